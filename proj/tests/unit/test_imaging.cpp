#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <array>
#include <cstdint>
#include <fstream>
#include <set>

#include "srmix/augment.hpp"
#include "srmix/error.hpp"
#include "srmix/image.hpp"
#include "srmix/manifest.hpp"
#include "srmix/png_io.hpp"
#include "srmix/rng.hpp"
#include "test_support.hpp"

using namespace srmix;
using srmix::testing::TempDir;
using srmix::testing::random_image;
using srmix::testing::random_image8;

namespace {

// Reference D4 action built from two generators with explicit index maps.
ImageBuffer ref_rot90(const ImageBuffer& in) {
  ImageBuffer out(in.width(), in.height());
  for (int r = 0; r < in.height(); ++r)
    for (int c = 0; c < in.width(); ++c)
      for (int k = 0; k < 3; ++k) out.at(in.width() - 1 - c, r, k) = in.at(r, c, k);
  return out;
}

ImageBuffer ref_hflip(const ImageBuffer& in) {
  ImageBuffer out(in.height(), in.width());
  for (int r = 0; r < in.height(); ++r)
    for (int c = 0; c < in.width(); ++c)
      for (int k = 0; k < 3; ++k) out.at(r, in.width() - 1 - c, k) = in.at(r, c, k);
  return out;
}

ImageBuffer ref_dihedral(const ImageBuffer& in, int id) {
  ImageBuffer out = in;
  for (int i = 0; i < id % 4; ++i) out = ref_rot90(out);
  if (id >= 4) out = ref_hflip(out);
  return out;
}

// Channel 0 holds the row index, channel 1 the column index.
ImageBuffer coordinate_image(int h, int w) {
  ImageBuffer img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = static_cast<float>(y);
      img.at(y, x, 1) = static_cast<float>(x);
    }
  return img;
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// 1x1 8-bit greyscale PNG with value 128.
const std::vector<unsigned char> kGreyPng = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
    0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0x77, 0xcd, 0x72, 0xb6, 0x00,
    0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

}  // namespace

TEST_CASE("image buffer basics") {
  ImageBuffer img(2, 3, 0.25f);
  CHECK(img.size() == 18);
  CHECK(img.at(1, 2, 2) == 0.25f);
  img.at(0, 0, 0) = 1.5f;
  img.at(0, 0, 1) = -0.5f;
  img.clamp();
  CHECK(img.at(0, 0, 0) == 1.0f);
  CHECK(img.at(0, 0, 1) == 0.0f);

  const auto c = crop(random_image(5, 6, 1), 1, 2, 3, 4);
  CHECK(c.height() == 3);
  CHECK(c.width() == 4);
  CHECK_THROWS_AS(crop(img, 1, 0, 2, 1), Error);

  CHECK_NOTHROW(check_pair({ImageBuffer(4, 4), ImageBuffer(4, 4)}));
  try {
    check_pair({ImageBuffer(4, 4), ImageBuffer(4, 5)});
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> da, db, dc;
  for (int i = 0; i < 100; ++i) {
    da.push_back(a());
    db.push_back(b());
    dc.push_back(c());
  }
  CHECK(da == db);
  CHECK(da != dc);

  // Consuming one derived stream leaves a sibling untouched.
  const Rng root(7);
  Rng patch = root.derive("patch");
  Rng mix1 = root.derive("mixup");
  for (int i = 0; i < 1000; ++i) patch();
  Rng mix2 = Rng(7).derive("mixup");
  for (int i = 0; i < 10; ++i) CHECK(mix1() == mix2());
  CHECK(root.derive("patch").key() != root.derive("mixup").key());
  CHECK(root.derive(std::uint64_t{0}).key() != root.derive(std::uint64_t{1}).key());

  Rng u(3);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    sum += v;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("png decode scaling and errors") {
  TempDir dir("png");
  SUBCASE("all-white and all-black 2x2") {
    save_image(dir / "w.png", ImageBuffer(2, 2, 1.0f));
    save_image(dir / "k.png", ImageBuffer(2, 2, 0.0f));
    const auto w = load_image(dir / "w.png");
    const auto k = load_image(dir / "k.png");
    CHECK(w.height() == 2);
    CHECK(w.width() == 2);
    for (float v : w.samples()) CHECK(v == 1.0f);
    for (float v : k.samples()) CHECK(v == 0.0f);
  }
  SUBCASE("code value 128") {
    save_image(dir / "m.png", ImageBuffer(1, 1, static_cast<float>(128.0 / 255.0)));
    const auto m = load_image(dir / "m.png");
    CHECK(m.at(0, 0, 0) == doctest::Approx(0.50196).epsilon(1e-5));
    CHECK(m.at(0, 0, 0) == static_cast<float>(128.0 / 255.0));
  }
  SUBCASE("8-bit round trip is exact after quantization") {
    const auto img = random_image(17, 23, 5);
    const auto q = quantize8(img);
    save_image(dir / "r.png", img);
    const auto back = load_image(dir / "r.png");
    CHECK(back == q);
    save_image(dir / "r2.png", back);
    CHECK(load_image(dir / "r2.png") == back);
    CHECK(quantize8(q) == q);
  }
  SUBCASE("16-bit round trip within one code") {
    const auto img = random_image(9, 11, 6);
    save_image(dir / "s.png", img, 16);
    const auto back = load_image(dir / "s.png");
    for (std::size_t i = 0; i < img.size(); ++i)
      CHECK(std::abs(back.samples()[i] - img.samples()[i]) <= 0.5 / 65535 + 1e-7);
  }
  SUBCASE("out-of-range samples clamp on write") {
    ImageBuffer img(1, 1);
    img.at(0, 0, 0) = 2.0f;
    img.at(0, 0, 1) = -1.0f;
    save_image(dir / "c.png", img);
    const auto back = load_image(dir / "c.png");
    CHECK(back.at(0, 0, 0) == 1.0f);
    CHECK(back.at(0, 0, 1) == 0.0f);
  }
  SUBCASE("error codes") {
    auto code_of = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::Usage;
    };
    CHECK(code_of([&] { load_image(dir / "missing.png"); }) == ErrorCode::FileNotFound);
    std::ofstream(dir / "text.png") << "definitely not a png";
    CHECK(code_of([&] { load_image(dir / "text.png"); }) == ErrorCode::UnsupportedFormat);
    write_bytes(dir / "grey.png", kGreyPng);
    CHECK(code_of([&] { load_image(dir / "grey.png"); }) == ErrorCode::UnsupportedFormat);

    save_image(dir / "full.png", random_image(32, 32, 9));
    std::ifstream in(dir / "full.png", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    bytes.resize(bytes.size() / 2);
    write_bytes(dir / "trunc.png", bytes);
    CHECK(code_of([&] { load_image(dir / "trunc.png"); }) == ErrorCode::CorruptFile);
    CHECK(code_of([&] { save_image(dir / "x.png", ImageBuffer(1, 1), 12); }) ==
          ErrorCode::UnsupportedFormat);
  }
}

TEST_CASE("crop_subimages examples") {
  CHECK(crop_subimages(ImageBuffer(480, 480), 480, 240).size() == 1);
  CHECK(crop_subimages(ImageBuffer(1000, 1000), 200, 100).size() == 81);
  CHECK(crop_subimages(ImageBuffer(500, 500), 480, 240).size() == 1);
  try {
    crop_subimages(ImageBuffer(100, 300), 200, 100);
    FAIL("expected SizeExceedsImage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SizeExceedsImage);
  }
}

TEST_CASE("window_count matches brute-force enumeration for extents up to 64") {
  for (int extent = 1; extent <= 64; ++extent) {
    for (int size = 1; size <= extent; ++size) {
      for (int stride = 1; stride <= 64; ++stride) {
        int brute = 0;
        for (int a = 0; a + size <= extent; a += stride) ++brute;
        REQUIRE(window_count(extent, size, stride) == brute);
      }
    }
  }
}

TEST_CASE("crop_subimages anchors and count across all shapes up to 64") {
  for (int h = 1; h <= 64; ++h) {
    for (int w = 1; w <= 64; ++w) {
      const auto img = coordinate_image(h, w);
      const int m = std::min(h, w);
      for (int size : {1, 5, m}) {
        if (size > m) continue;
        for (int stride : {2, 7, 64}) {
          const auto subs = crop_subimages(img, size, stride);
          std::vector<std::pair<int, int>> anchors;
          for (int y = 0; y + size <= h; y += stride)
            for (int x = 0; x + size <= w; x += stride) anchors.emplace_back(y, x);
          REQUIRE(subs.size() == anchors.size());
          for (std::size_t i = 0; i < subs.size(); ++i) {
            REQUIRE(subs[i].height() == size);
            REQUIRE(subs[i].width() == size);
            REQUIRE(subs[i].at(0, 0, 0) == static_cast<float>(anchors[i].first));
            REQUIRE(subs[i].at(0, 0, 1) == static_cast<float>(anchors[i].second));
          }
        }
      }
    }
  }
}

TEST_CASE("dihedral transforms match the generator oracle") {
  const auto img = random_image(5, 7, 11);
  for (int t = 0; t < kDihedralCount; ++t) {
    const auto out = dihedral_transform(img, t);
    CHECK(out == ref_dihedral(img, t));
    if (t % 2) {
      CHECK(out.height() == 7);
      CHECK(out.width() == 5);
    }
  }
  CHECK(dihedral_transform(img, 0) == img);

  auto r = img;
  for (int i = 0; i < 4; ++i) r = dihedral_transform(r, 1);
  CHECK(r == img);

  ImageBuffer row(1, 2);
  for (int c = 0; c < 3; ++c) {
    row.at(0, 0, c) = 0.1f;
    row.at(0, 1, c) = 0.9f;
  }
  const auto flipped = dihedral_transform(row, 4);
  CHECK(flipped.at(0, 0, 0) == 0.9f);
  CHECK(flipped.at(0, 1, 0) == 0.1f);

  for (int bad : {-1, 8}) {
    try {
      dihedral_transform(img, bad);
      FAIL("expected InvalidTransformId");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidTransformId);
    }
  }
}

TEST_CASE("dihedral composition table is a group action for all 64 pairs") {
  const auto img = random_image(6, 9, 12);
  for (int a = 0; a < kDihedralCount; ++a) {
    for (int b = 0; b < kDihedralCount; ++b) {
      const int ab = compose_transforms(a, b);
      CHECK(dihedral_transform(dihedral_transform(img, b), a) == dihedral_transform(img, ab));
    }
    const int inv = inverse_transform(a);
    CHECK(compose_transforms(inv, a) == 0);
    CHECK(dihedral_transform(dihedral_transform(img, a), inv) == img);
  }
}

TEST_CASE("random_patch contracts") {
  SUBCASE("full-size patch anchors at origin") {
    const ImagePair pair{random_image(128, 128, 1), random_image(128, 128, 2)};
    Rng rng(5);
    const auto p = random_patch(pair, 128, rng);
    CHECK(p == pair);
  }
  SUBCASE("co-located anchors and determinism") {
    const ImagePair pair{coordinate_image(40, 50), coordinate_image(40, 50)};
    Rng a(9), b(9);
    for (int i = 0; i < 50; ++i) {
      const auto pa = random_patch(pair, 16, a);
      const auto pb = random_patch(pair, 16, b);
      CHECK(pa == pb);
      CHECK(pa.lr == pa.hr);
    }
  }
  SUBCASE("too large") {
    const ImagePair pair{ImageBuffer(20, 30), ImageBuffer(20, 30)};
    Rng rng(1);
    try {
      random_patch(pair, 21, rng);
      FAIL("expected PatchTooLarge");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PatchTooLarge);
    }
  }
}

TEST_CASE("random_patch anchors are uniform (chi-square, 1e5 draws)") {
  const ImagePair pair{coordinate_image(200, 200), coordinate_image(200, 200)};
  constexpr int kSide = 73;  // anchors 0..72
  constexpr int kDraws = 100000;
  std::vector<int> hist(kSide * kSide, 0);
  Rng rng(2024);
  for (int i = 0; i < kDraws; ++i) {
    const auto p = random_patch(pair, 128, rng);
    const int y = static_cast<int>(p.hr.at(0, 0, 0));
    const int x = static_cast<int>(p.hr.at(0, 0, 1));
    REQUIRE(y >= 0);
    REQUIRE(y < kSide);
    REQUIRE(x >= 0);
    REQUIRE(x < kSide);
    ++hist[y * kSide + x];
  }
  const double expected = static_cast<double>(kDraws) / hist.size();
  double chi2 = 0.0;
  for (int n : hist) chi2 += (n - expected) * (n - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(hist.size() - 1));
  const double p_value = boost::math::cdf(boost::math::complement(dist, chi2));
  CHECK(p_value > 0.01);
}

TEST_CASE("manifest building and serialization") {
  TempDir dir("manifest");
  const auto hr = dir / "hr";
  const auto lr = dir / "lr";
  std::filesystem::create_directories(hr);
  std::filesystem::create_directories(lr);
  for (const char* name : {"b.png", "a.png"}) {
    save_image(hr / name, random_image8(4, 4, 1));
    save_image(lr / name, random_image8(4, 4, 2));
  }
  std::ofstream(hr / "notes.txt") << "ignored";

  const auto m = build_manifest(hr, lr, Split::train, Origin::observed);
  REQUIRE(m.size() == 2);
  CHECK(m[0].hr_path.filename() == "a.png");
  CHECK(m[1].hr_path.filename() == "b.png");
  CHECK(m[0].lr_path->filename() == "a.png");
  CHECK(m.paired());
  CHECK_NOTHROW(m.check_files());

  write_manifest(dir / "m.tsv", m);
  CHECK(read_manifest(dir / "m.tsv") == m);

  const auto unpaired = build_manifest(hr, std::nullopt, Split::val, Origin::synthetic);
  CHECK(unpaired.size() == 2);
  CHECK(!unpaired.paired());
  CHECK(unpaired[0].origin == Origin::synthetic);
  CHECK(unpaired[0].split == Split::val);
  write_manifest(dir / "u.tsv", unpaired);
  CHECK(read_manifest(dir / "u.tsv") == unpaired);

  {
    std::ifstream in(dir / "m.tsv");
    std::string first;
    std::getline(in, first);
    CHECK(first.rfind("hr/a.png\tlr/a.png\t", 0) == 0);
  }
  {
    TempDir moved("manifest_moved");
    std::filesystem::copy(dir.path(), moved.path(), std::filesystem::copy_options::recursive);
    const auto relocated = read_manifest(moved / "m.tsv");
    CHECK(relocated[0].hr_path == moved.path() / "hr" / "a.png");
    CHECK_NOTHROW(relocated.check_files());
  }

  CHECK(m.head(1).size() == 1);
  CHECK(m.head(1)[0] == m[0]);
  CHECK(m.head(10) == m);

  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Usage;
  };
  DatasetManifest dup;
  dup.add(m[0]);
  CHECK(code_of([&] { dup.add(m[0]); }) == ErrorCode::DuplicateRecord);

  std::filesystem::remove(lr / "b.png");
  save_image(lr / "c.png", random_image8(4, 4, 3));
  CHECK(code_of([&] { build_manifest(hr, lr, Split::train, Origin::observed); }) ==
        ErrorCode::MissingCounterpart);

  std::filesystem::create_directories(dir / "empty");
  CHECK(code_of([&] { build_manifest(dir / "empty", std::nullopt, Split::train, Origin::observed); }) ==
        ErrorCode::EmptyDirectory);

  std::ofstream(dir / "bad.tsv") << "only\ttwo\n";
  CHECK(code_of([&] { read_manifest(dir / "bad.tsv"); }) == ErrorCode::MalformedManifest);
  std::ofstream(dir / "bad2.tsv") << "a.png\t-\tsomething\ttrain\n";
  CHECK(code_of([&] { read_manifest(dir / "bad2.tsv"); }) == ErrorCode::MalformedManifest);

  std::filesystem::remove(hr / "a.png");
  CHECK(code_of([&] { m.check_files(); }) == ErrorCode::FileNotFound);
}

TEST_CASE("manifest of 800 unpaired files") {
  TempDir dir("many");
  const auto tiny = random_image8(1, 1, 4);
  for (int i = 0; i < 800; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%04d.png", i);
    save_image(dir.path() / name, tiny);
  }
  const auto m = build_manifest(dir.path(), std::nullopt, Split::train, Origin::analytic);
  CHECK(m.size() == 800);
  for (const auto& r : m.records()) {
    CHECK(!r.lr_path.has_value());
    CHECK(r.origin == Origin::analytic);
  }
}
