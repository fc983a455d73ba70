#include "srmix/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "srmix/error.hpp"

namespace srmix {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors through longjmp. Everything touched after setjmp
// lives behind this heap object so its state survives the jump.
struct CodecState {
  std::string message;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  bool unsupported = false;
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* state = static_cast<CodecState*>(png_get_error_ptr(png));
  if (state) state->message = msg ? msg : "libpng error";
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

std::uint16_t to_code(float v, float max_code) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * max_code));
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::FileNotFound, path.string());

  png_byte signature[8] = {};
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + " is not a PNG file");
  }

  auto state = std::make_unique<CodecState>();
  CodecState* s = state.get();
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, s, on_png_error, on_png_warning);
  if (!png) throw Error(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::IoError, "png_create_info_struct failed");
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    if (s->unsupported) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": " + s->message);
    throw Error(ErrorCode::CorruptFile, path.string() + ": " + s->message);
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  s->width = png_get_image_width(png, info);
  s->height = png_get_image_height(png, info);
  s->bit_depth = png_get_bit_depth(png, info);
  s->color_type = png_get_color_type(png, info);
  if (s->color_type != PNG_COLOR_TYPE_RGB || (s->bit_depth != 8 && s->bit_depth != 16)) {
    s->unsupported = true;
    png_error(png, "only 8/16-bit RGB PNG is supported");
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  s->pixels.resize(row_bytes * s->height);
  s->rows.resize(s->height);
  for (png_uint_32 y = 0; y < s->height; ++y) s->rows[y] = s->pixels.data() + y * row_bytes;
  png_read_image(png, s->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int h = static_cast<int>(s->height);
  const int w = static_cast<int>(s->width);
  std::vector<float> samples(static_cast<std::size_t>(h) * w * 3);
  if (s->bit_depth == 8) {
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = s->pixels[i] / 255.0f;
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const unsigned v = (static_cast<unsigned>(s->pixels[2 * i]) << 8) | s->pixels[2 * i + 1];
      samples[i] = static_cast<float>(v / 65535.0);
    }
  }
  return ImageBuffer(h, w, std::move(samples));
}

void save_image(const std::filesystem::path& path, const ImageBuffer& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw Error(ErrorCode::UnsupportedFormat, "bit depth must be 8 or 16");
  }
  if (image.empty()) throw Error(ErrorCode::InvalidDimensions, "cannot save an empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());

  auto state = std::make_unique<CodecState>();
  CodecState* s = state.get();
  const std::size_t bytes_per_sample = bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(image.width()) * 3 * bytes_per_sample;
  s->pixels.resize(row_bytes * image.height());
  const auto samples = image.samples();
  if (bit_depth == 8) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      s->pixels[i] = static_cast<unsigned char>(to_code(samples[i], 255.0f));
    }
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::uint16_t v = to_code(samples[i], 65535.0f);
      s->pixels[2 * i] = static_cast<unsigned char>(v >> 8);
      s->pixels[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
    }
  }
  s->rows.resize(image.height());
  for (int y = 0; y < image.height(); ++y) s->rows[y] = s->pixels.data() + y * row_bytes;

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, s, on_png_error, on_png_warning);
  if (!png) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::IoError, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, path.string() + ": " + s->message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width(), image.height(), bit_depth, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, s->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageBuffer quantize8(const ImageBuffer& image) {
  ImageBuffer out = image;
  for (float& v : out.samples()) v = to_code(v, 255.0f) / 255.0f;
  return out;
}

}  // namespace srmix
