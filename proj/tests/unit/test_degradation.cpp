#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "srmix/degradation.hpp"
#include "srmix/error.hpp"
#include "srmix/png_io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace srmix;
using srmix::testing::TempDir;
using srmix::testing::reference_resize;

namespace {

double sample_std(const ImageBuffer& img, double mean) {
  double acc = 0.0;
  for (float v : img.samples()) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(img.size()));
}

}  // namespace

TEST_CASE("cubic kernel values and partition of unity") {
  CHECK(cubic_kernel(0.0) == doctest::Approx(1.0));
  CHECK(cubic_kernel(1.0) == doctest::Approx(0.0));
  CHECK(cubic_kernel(2.0) == doctest::Approx(0.0));
  CHECK(cubic_kernel(0.5) == doctest::Approx(0.5625));
  CHECK(cubic_kernel(-1.5) == doctest::Approx(-0.0625));
  for (double t = 0.0; t < 1.0; t += 0.05) {
    double sum = 0.0;
    for (int j = -3; j <= 3; ++j) sum += cubic_kernel(t - j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("bicubic degrade preserves constants and shape") {
  const ImageBuffer flat(64, 64, 0.3f);
  const ImageBuffer out = bicubic_degrade(flat, 4);
  REQUIRE(out.same_shape(flat));
  for (float v : out.samples()) CHECK(std::fabs(v - 0.3f) <= 1e-6);
  CHECK(bicubic_degrade(ImageBuffer(48, 80, 0.1f), 4).same_shape(ImageBuffer(48, 80)));
}

TEST_CASE("bicubic degrade rejects sizes not divisible by the factor") {
  CHECK_THROWS_AS(bicubic_degrade(ImageBuffer(30, 32), 4), Error);
  try {
    bicubic_degrade(ImageBuffer(32, 30), 4);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotDivisible);
  }
}

TEST_CASE("impulse response matches the direct-convolution reference") {
  ImageBuffer impulse(32, 32, 0.0f);
  for (int c = 0; c < 3; ++c) impulse.at(16, 16, c) = 1.0f;
  const ImageBuffer expected = reference_resize(reference_resize(impulse, 8, 8), 32, 32);
  const ImageBuffer got = bicubic_degrade(impulse, 4);
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(got.samples()[i]) - expected.samples()[i]));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("random content and non-square resizes match the reference") {
  const ImageBuffer img = srmix::testing::random_image(20, 28, 5);
  for (auto [oh, ow] : {std::pair{5, 7}, std::pair{40, 56}, std::pair{13, 28}}) {
    const ImageBuffer got = bicubic_resize(img, oh, ow);
    const ImageBuffer ref = reference_resize(img, oh, ow);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      worst = std::max(worst, std::fabs(static_cast<double>(got.samples()[i]) - ref.samples()[i]));
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("degraders keep values in [0,1]") {
  Rng rng(3);
  const ImageBuffer img = srmix::testing::random_image(32, 32, 9);
  for (const ImageBuffer& out : {bicubic_degrade(img, 4), add_gaussian_noise(img, 0.3, rng),
                                 add_signal_dependent_noise(img, 0.1, 0.3, rng)}) {
    for (float v : out.samples()) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("gaussian noise") {
  const ImageBuffer gray(256, 256, 0.5f);
  SUBCASE("zero sigma is bit-exact identity") {
    Rng rng(1);
    CHECK(add_gaussian_noise(gray, 0.0, rng) == gray);
  }
  SUBCASE("empirical std matches sigma 25/255") {
    Rng rng(2);
    const double sigma = 25.0 / 255.0;
    const double sd = sample_std(add_gaussian_noise(gray, sigma, rng), 0.5);
    CHECK(std::fabs(sd - sigma) / sigma < 0.03);
  }
  SUBCASE("same seed gives the same output") {
    Rng a(7);
    Rng b(7);
    CHECK(add_gaussian_noise(gray, 0.1, a) == add_gaussian_noise(gray, 0.1, b));
  }
  SUBCASE("negative sigma") {
    Rng rng(1);
    CHECK_THROWS_AS(add_gaussian_noise(gray, -0.1, rng), Error);
  }
}

TEST_CASE("signal dependent noise") {
  SUBCASE("zero parameters are the identity") {
    Rng rng(1);
    const ImageBuffer img = srmix::testing::random_image(16, 16, 1);
    CHECK(add_signal_dependent_noise(img, 0.0, 0.0, rng) == img);
  }
  SUBCASE("std at a constant 0.25 image") {
    Rng rng(4);
    const double sd = sample_std(add_signal_dependent_noise(ImageBuffer(256, 256, 0.25f), 0.01, 0.04, rng), 0.25);
    CHECK(std::fabs(sd - std::sqrt(0.0005)) / std::sqrt(0.0005) < 0.05);
  }
  SUBCASE("black pixels only see read noise") {
    // Clamping keeps the positive half: E[out^2] = sigma_read^2 / 2.
    Rng rng(5);
    const ImageBuffer out = add_signal_dependent_noise(ImageBuffer(256, 256, 0.0f), 0.02, 0.5, rng);
    double sq = 0.0;
    for (float v : out.samples()) sq += static_cast<double>(v) * v;
    const double estimate = std::sqrt(2.0 * sq / static_cast<double>(out.size()));
    CHECK(std::fabs(estimate - 0.02) / 0.02 < 0.03);
  }
  SUBCASE("negative parameters") {
    Rng rng(1);
    CHECK_THROWS_AS(add_signal_dependent_noise(ImageBuffer(4, 4), 0.1, -1.0, rng), Error);
  }
}

TEST_CASE("degradation spec validation") {
  DegradationSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.sigma = 0.1;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.kind = DegradationKind::gaussian_noise;
  CHECK_NOTHROW(spec.validate());
  spec.kind = DegradationKind::learned;
  spec.sigma = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.weights_path = "g.srw";
  CHECK_NOTHROW(spec.validate());
  for (auto kind : {DegradationKind::bicubic_x4, DegradationKind::gaussian_noise,
                    DegradationKind::bicubic_x4_plus_noise, DegradationKind::learned}) {
    CHECK(parse_degradation_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_degradation_kind("jpeg"), Error);
}

TEST_CASE("synthesize_lr") {
  TempDir dir("synth");
  DatasetManifest hr;
  for (int i = 0; i < 3; ++i) {
    const auto path = dir / ("hr" + std::to_string(i) + ".png");
    save_image(path, srmix::testing::random_image8(16, 24, i), 8);
    hr.add({path, std::nullopt, Origin::analytic, Split::train});
  }
  const ImageModel identity = [](const ImageBuffer& x) { return x; };

  SUBCASE("empty manifest gives an empty set") {
    const SyntheticSet set = synthesize_lr(identity, DatasetManifest{}, dir / "empty", DegradationSpec{});
    CHECK(set.manifest.empty());
  }
  SUBCASE("identity weights reproduce the HR images") {
    ModelConfig cfg;
    cfg.base_channels = 8;
    cfg.num_cascading_blocks = 1;
    cfg.rcabs_per_block = 1;
    cfg.attention_reduction = 4;
    const ModelWeights g = identity_weights(cfg);
    const ImageModel model = [&](const ImageBuffer& x) { return unet_forward(x, g); };
    DegradationSpec spec;
    spec.kind = DegradationKind::learned;
    spec.weights_path = "identity";
    const SyntheticSet set = synthesize_lr(model, hr, dir / "out", spec, "abc");
    REQUIRE(set.manifest.size() == hr.size());
    for (std::size_t i = 0; i < hr.size(); ++i) {
      const ManifestRecord& r = set.manifest[i];
      CHECK(r.origin == Origin::synthetic);
      CHECK(r.hr_path == hr[i].hr_path);
      REQUIRE(r.lr_path);
      const ImageBuffer lr = load_image(*r.lr_path);
      const ImageBuffer y = load_image(r.hr_path);
      REQUIRE(lr.same_shape(y));
      for (std::size_t k = 0; k < y.size(); ++k) {
        CHECK(std::fabs(lr.samples()[k] - y.samples()[k]) <= 0.5f / 255.0f + 1e-6f);
      }
    }
    std::ifstream sidecar(dir / "out" / "degradation.txt");
    std::string text((std::istreambuf_iterator<char>(sidecar)), std::istreambuf_iterator<char>());
    CHECK(text.find("kind=learned") != std::string::npos);
    CHECK(text.find("weights_checksum=abc") != std::string::npos);
  }
  SUBCASE("an indivisible image aborts the run") {
    const auto odd = dir / "odd.png";
    save_image(odd, ImageBuffer(18, 24, 0.5f), 8);
    hr.add({odd, std::nullopt, Origin::analytic, Split::train});
    CHECK_THROWS_AS(synthesize_lr(identity, hr, dir / "bad", DegradationSpec{}), Error);
  }
}

TEST_CASE("merge_datasets") {
  auto fake = [](const std::string& prefix, std::size_t n, Origin origin) {
    DatasetManifest m;
    for (std::size_t i = 0; i < n; ++i) {
      m.add({prefix + std::to_string(i) + "_hr.png", prefix + std::to_string(i) + "_lr.png", origin, Split::train});
    }
    return m;
  };
  const DatasetManifest observed = fake("obs", 4, Origin::observed);
  const DatasetManifest synthetic = fake("syn", 10, Origin::synthetic);

  CHECK(merge_datasets(observed, synthetic, SyntheticFraction::of(0.0)) == observed);
  const DatasetManifest half = merge_datasets(observed, synthetic, SyntheticFraction::of(0.5));
  REQUIRE(half.size() == 9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(half[i] == observed[i]);
  for (std::size_t i = 0; i < 5; ++i) CHECK(half[4 + i] == synthetic[i]);
  CHECK(merge_datasets(observed, synthetic, SyntheticFraction::of(0.3)).size() == 7);
  CHECK(merge_datasets(observed, synthetic, SyntheticFraction::of(0.31)).size() == 8);
  CHECK(merge_datasets(observed, synthetic, SyntheticFraction::everything()).size() == 14);
  CHECK(SyntheticFraction::parse("all").all);
  CHECK(SyntheticFraction::parse("0.25").value == 0.25);
  CHECK_THROWS_AS(SyntheticFraction::parse("1.5"), Error);
  CHECK_THROWS_AS(SyntheticFraction::parse("half"), Error);

  const DatasetManifest big_observed = fake("o", 12837, Origin::observed);
  const DatasetManifest big_synthetic = fake("s", 32208, Origin::synthetic);
  CHECK(merge_datasets(big_observed, big_synthetic, SyntheticFraction::everything()).size() == 45045);
}

TEST_CASE("train_degradation rejects an empty dataset") {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.num_cascading_blocks = 1;
  cfg.rcabs_per_block = 1;
  cfg.attention_reduction = 4;
  TrainConfig tc;
  try {
    train_degradation(DatasetManifest{}, DatasetManifest{}, cfg, tc);
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
}
