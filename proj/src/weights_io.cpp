#include "srmix/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "srmix/error.hpp"
#include "srmix/rng.hpp"

namespace srmix {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'M', 'I', 'X', 'W', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::size_t end, const std::filesystem::path& path)
      : buf_(buf), end_(end), path_(path) {}

  void need(std::size_t n) const {
    if (pos_ + n > end_) throw Error(ErrorCode::MalformedWeights, path_.string() + ": truncated");
  }
  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<unsigned char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
  const std::filesystem::path& path_;
};

std::uint64_t checksum(const unsigned char* data, std::size_t n) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(data), n));
}

Writer serialize(const ModelWeights& weights) {
  const NetworkLayout layout(weights.config);
  if (weights.values.size() != layout.parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "weights do not match their configuration");
  }
  const ModelConfig& c = weights.config;
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(kVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.base_channels));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.num_cascading_blocks));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.rcabs_per_block));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.attention_reduction));
  w.uint<std::uint8_t>(c.global_skip ? 1 : 0);
  w.uint<std::uint8_t>(c.unet_skips ? 1 : 0);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(layout.inventory().size()));
  for (const ParamInfo& info : layout.inventory()) {
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(info.name.size()));
    w.bytes(info.name.data(), info.name.size());
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(info.shape.size()));
    for (int d : info.shape) w.uint<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.uint<std::uint64_t>(info.count);
    for (std::size_t i = 0; i < info.count; ++i) w.f32(weights.values[info.offset + i]);
  }
  return w;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const ModelWeights& weights) {
  Writer w = serialize(weights);
  const std::uint64_t sum = checksum(w.buffer().data(), w.buffer().size());
  w.uint<std::uint64_t>(sum);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto malformed = [&](const std::string& why) { return Error(ErrorCode::MalformedWeights, path.string() + ": " + why); };
  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw malformed("not a weights file");
  }
  const std::size_t body = buf.size() - 8;
  {
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf[body + i]) << (8 * i);
    if (stored != checksum(buf.data(), body)) throw malformed("checksum mismatch");
  }
  Reader r(buf, body, path);
  r.str(sizeof kMagic);
  if (r.uint<std::uint32_t>() != kVersion) throw malformed("unsupported version");
  ModelWeights weights;
  ModelConfig& c = weights.config;
  c.base_channels = static_cast<int>(r.uint<std::uint32_t>());
  c.num_cascading_blocks = static_cast<int>(r.uint<std::uint32_t>());
  c.rcabs_per_block = static_cast<int>(r.uint<std::uint32_t>());
  c.attention_reduction = static_cast<int>(r.uint<std::uint32_t>());
  c.global_skip = r.uint<std::uint8_t>() != 0;
  c.unet_skips = r.uint<std::uint8_t>() != 0;
  try {
    c.validate();
  } catch (const Error& e) {
    throw malformed(std::string("bad configuration: ") + e.what());
  }
  const NetworkLayout layout(c);
  if (r.uint<std::uint32_t>() != layout.inventory().size()) throw malformed("tensor count mismatch");
  weights.values.assign(layout.parameter_count(), 0.0f);
  for (const ParamInfo& info : layout.inventory()) {
    const std::string name = r.str(r.uint<std::uint16_t>());
    if (name != info.name) throw malformed("expected tensor '" + info.name + "', found '" + name + "'");
    const std::size_t ndim = r.uint<std::uint8_t>();
    std::vector<int> shape(ndim);
    for (int& d : shape) d = static_cast<int>(r.uint<std::uint32_t>());
    if (shape != info.shape) throw malformed("shape mismatch for '" + name + "'");
    if (r.uint<std::uint64_t>() != info.count) throw malformed("count mismatch for '" + name + "'");
    for (std::size_t i = 0; i < info.count; ++i) weights.values[info.offset + i] = r.f32();
  }
  if (r.position() != body) throw malformed("trailing bytes");
  return weights;
}

std::string weights_checksum(const ModelWeights& weights) {
  const Writer w = serialize(weights);
  const std::uint64_t sum = checksum(w.buffer().data(), w.buffer().size());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(sum));
  return hex;
}

}  // namespace srmix
