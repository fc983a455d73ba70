#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "srmix/config.hpp"
#include "srmix/error.hpp"
#include "srmix/experiment.hpp"
#include "srmix/model.hpp"
#include "srmix/plot.hpp"
#include "srmix/png_io.hpp"
#include "srmix/weights_io.hpp"
#include "test_support.hpp"

using namespace srmix;
using srmix::testing::TempDir;
using srmix::testing::random_image8;

namespace {

ErrorCode config_error(const std::string& text) {
  try {
    parse_config(text, "/base");
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Usage;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SRMIX_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TrainLog make_log(std::vector<std::pair<long, double>> points) {
  TrainLog log;
  for (auto [it, db] : points) {
    TrainLogRow row;
    row.iteration = it;
    row.learning_rate = 1e-4;
    row.train_loss = 0.1;
    row.val_psnr = PsnrValue::decibels(db);
    row.val_ssim = 0.5;
    log.rows.push_back(row);
  }
  return log;
}

}  // namespace

TEST_CASE("config defaults and strict parsing") {
  const auto c = parse_config("[experiment]\nschema_version = 1\n", "/base");
  CHECK(c.model == ModelConfig{});
  CHECK(c.train == TrainConfig{});
  CHECK(c.synthetic_fraction.count(100) == 0);
  CHECK(c.degradation.kind == DegradationKind::learned);
  CHECK(!c.sweep.has_value());

  CHECK(config_error("[train]\nbatch_size = 4\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment]\nschema_version = 2\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment]\nschema_version = 1\n[train]\nbatchsize = 4\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment]\nschema_version = 1\n[bogus]\nx = 1\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("stray = 1\n[experiment]\nschema_version = 1\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment]\nschema_version = 1\n[train]\nbatch_size = many\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment]\nschema_version = 1\n[mixup]\nalpha = -1\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment]\nschema_version = 1\npreset = nope\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment]\nschema_version = 1\n[train]\npatch_size = 30\n") == ErrorCode::InvalidConfig);
  CHECK(config_error("[experiment\nschema_version = 1\n") == ErrorCode::InvalidConfig);
}

TEST_CASE("presets and their precedence") {
  const auto desk = parse_config("[experiment]\nschema_version = 1\npreset = desk\n", "/base");
  CHECK(desk.model.base_channels == 16);
  CHECK(desk.train.total_iters == 5000);
  CHECK(desk.train.validate_every == 250);

  const auto full = parse_config("[experiment]\nschema_version = 1\npreset = full\n", "/base");
  CHECK(full.train.mixup.enabled);
  CHECK(full.train.mixup.alpha == 1.2);
  CHECK(full.synthetic_fraction.all);

  const auto baseline = parse_config("[experiment]\nschema_version = 1\npreset = baseline\n", "/base");
  CHECK(!baseline.train.mixup.enabled);
  CHECK(baseline.synthetic_fraction.count(1000) == 0);

  // File keys win over the file's presets.
  const auto mixed = parse_config(
      "[experiment]\nschema_version = 1\npreset = desk, full\n[train]\ntotal_iters = 123\n", "/base");
  CHECK(mixed.train.total_iters == 123);
  CHECK(mixed.model.base_channels == 16);
  CHECK(mixed.train.mixup.enabled);

  auto large = desk;
  apply_preset(large, "full_scale");
  CHECK(large.model == ModelConfig{});
  CHECK(large.train.total_iters == 500000);
  CHECK(large.data.paired_crop == 200);
  CHECK(large.data.extra_crop == 480);

  CHECK(preset_names().size() == 6);
  ExperimentConfig scratch;
  CHECK_THROWS_AS(apply_preset(scratch, "turbo"), Error);
}

TEST_CASE("paths, round trip and output root") {
  TempDir dir("cfg");
  const auto c = parse_config(
      "[experiment]\nschema_version = 1\noutput_dir = runs\n[data]\ntrain_hr = a/hr\nval_hr = /abs/val\n"
      "data_volume = 2000\n[degradation]\nkind = gaussian\nsigma = 0.1\n[sweep]\naxis = data_volume\n"
      "values = 2000, all\n[mixup]\nenabled = true\nalpha = 0.4\n[synthesis]\nfraction = 0.5\n",
      dir.path());
  CHECK(c.data.train_hr == dir.path() / "a/hr");
  CHECK(c.data.val_hr == "/abs/val");
  CHECK(c.output_dir == dir.path() / "runs");
  CHECK(c.data.data_volume == std::size_t{2000});
  REQUIRE(c.sweep.has_value());
  CHECK(c.sweep->values == std::vector<std::string>{"2000", "all"});

  save_config(dir / "saved.ini", c);
  const auto back = load_config(dir / "saved.ini");
  CHECK(back.model == c.model);
  CHECK(back.train == c.train);
  CHECK(back.data == c.data);
  CHECK(back.output_dir == c.output_dir);
  CHECK(back.degradation.kind == c.degradation.kind);
  CHECK(back.degradation.sigma == c.degradation.sigma);
  CHECK(back.synthetic_fraction.count(10) == c.synthetic_fraction.count(10));
  CHECK(back.sweep == c.sweep);
  save_config(dir / "again.ini", back);
  CHECK(slurp(dir / "saved.ini") == slurp(dir / "again.ini"));

  CHECK(resolve_output_root(std::filesystem::path("/flag"), c) == "/flag");
  CHECK(resolve_output_root(std::nullopt, c) == dir.path() / "runs");
  ExperimentConfig bare;
  ::setenv(kOutputRootEnv, "/from/env", 1);
  CHECK(resolve_output_root(std::nullopt, bare) == "/from/env");
  ::unsetenv(kOutputRootEnv);
  CHECK(resolve_output_root(std::nullopt, bare) == "srmix_out");
}

TEST_CASE("sweep validation") {
  auto ok = [](SweepAxis axis, std::vector<std::string> values) {
    try {
      SweepSpec{axis, std::move(values)}.validate();
      return true;
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidConfig);
      return false;
    }
  };
  CHECK(ok(SweepAxis::data_volume, {"2000", "all"}));
  CHECK(!ok(SweepAxis::data_volume, {}));
  CHECK(!ok(SweepAxis::data_volume, {"all", "2000"}));
  CHECK(!ok(SweepAxis::data_volume, {"2000", "2000"}));
  CHECK(!ok(SweepAxis::data_volume, {"1.5"}));
  CHECK(ok(SweepAxis::synthetic_volume, {"0", "half", "all"}));
  CHECK(!ok(SweepAxis::synthetic_volume, {"all", "half"}));
  CHECK(ok(SweepAxis::model_size, {"24", "32", "48"}));
  CHECK(!ok(SweepAxis::model_size, {"32", "24"}));
  CHECK(ok(SweepAxis::degradation_type, {"gaussian", "bicubic", "learned"}));
  CHECK(!ok(SweepAxis::degradation_type, {"gaussian", "gaussian"}));
  CHECK(!ok(SweepAxis::degradation_type, {"jpeg"}));
  CHECK(parse_sweep_axis("model_size") == SweepAxis::model_size);
  CHECK_THROWS_AS(parse_sweep_axis("depth"), Error);
}

TEST_CASE("convergence plot") {
  TempDir dir("plot");
  CHECK_THROWS_AS(plot_convergence({}, dir / "none.svg"), Error);

  auto a = make_log({{0, 10.0}, {250, 20.0}, {500, 25.0}});
  auto b = make_log({{0, 12.0}, {250, 31.0}, {750, 18.0}});
  TrainLogRow bad;
  bad.iteration = 1000;
  bad.val_psnr = PsnrValue::decibels(std::numeric_limits<double>::quiet_NaN());
  b.rows.push_back(bad);

  const auto one = plot_convergence({{"a", a}}, dir / "one.svg");
  CHECK(one.plotted_series == 1);
  CHECK(std::filesystem::file_size(dir / "one.svg") > 0);

  const auto layout = plot_convergence({{"a", a}, {"b", b}}, dir / "two.svg");
  CHECK(layout.plotted_series == 2);
  CHECK(layout.x.min <= 0.0);
  CHECK(layout.x.max >= 750.0);
  CHECK(layout.x.max < 1000.0);
  CHECK(layout.y.min <= 10.0);
  CHECK(layout.y.max >= 31.0);
  const auto svg = slurp(dir / "two.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find(">a<") != std::string::npos);
  CHECK(svg.find(">b<") != std::string::npos);

  std::filesystem::create_directories(dir / "run_x");
  write_train_log(dir / "run_x" / "log.csv", a);
  const auto series = load_series({dir / "run_x" / "log.csv"});
  REQUIRE(series.size() == 1);
  CHECK(series[0].label == "run_x");
  CHECK(series[0].log == a);
  std::ofstream(dir / "broken.csv") << "not,a,log\n";
  CHECK_THROWS_AS(load_series({dir / "broken.csv"}), Error);
}

TEST_CASE("prepare counts, idempotence and evaluation CSV") {
  TempDir dir("prep");
  const auto raw = dir / "raw";
  for (const char* sub : {"train/hr", "train/lr", "val/hr", "val/lr", "extra/hr"})
    std::filesystem::create_directories(raw / sub);
  save_image(raw / "train/hr/p.png", random_image8(1000, 1000, 1));
  save_image(raw / "train/lr/p.png", random_image8(1000, 1000, 2));
  save_image(raw / "extra/hr/e.png", random_image8(480, 480, 3));
  for (const char* name : {"v1.png", "v2.png", "v3.png"}) {
    const auto img = random_image8(16, 16, name[1]);
    save_image(raw / "val/hr" / name, img);
    save_image(raw / "val/lr" / name, img);
  }

  ExperimentConfig config;
  config.data.train_hr = raw / "train/hr";
  config.data.train_lr = raw / "train/lr";
  config.data.val_hr = raw / "val/hr";
  config.data.val_lr = raw / "val/lr";
  config.data.extra_hr = raw / "extra/hr";
  const OutputLayout out{dir / "out"};
  std::ostringstream log;

  const auto summary = cmd_prepare(config, out, log);
  CHECK(summary.train_subimages == 81);
  CHECK(summary.extra_subimages == 1);
  CHECK(summary.val_images == 3);
  CHECK(log.str().find("81") != std::string::npos);
  const auto first_train = slurp(out.train_manifest());
  const auto first_extra = slurp(out.extra_manifest());
  cmd_prepare(config, out, log);
  CHECK(slurp(out.train_manifest()) == first_train);
  CHECK(slurp(out.extra_manifest()) == first_extra);
  CHECK(read_manifest(out.train_manifest()).size() == 81);

  ModelConfig tiny;
  tiny.base_channels = 8;
  tiny.num_cascading_blocks = 1;
  tiny.rcabs_per_block = 1;
  tiny.attention_reduction = 4;
  save_weights(dir / "id.srw", identity_weights(tiny));
  std::ostringstream eval_log;
  const auto plain = cmd_evaluate(config, out, dir / "id.srw", false, eval_log);
  CHECK(plain.report.mean_psnr.is_identical());
  CHECK(eval_log.str().find("IdenticalImages") != std::string::npos);
  CHECK(line_count(plain.csv) == 3 + 2);
  const auto ensembled = cmd_evaluate(config, out, dir / "id.srw", true, eval_log);
  CHECK(ensembled.csv != plain.csv);
  CHECK(ensembled.report.mean_psnr == plain.report.mean_psnr);
  CHECK(ensembled.report.mean_ssim == plain.report.mean_ssim);

  // Degradation training without prepared data is a clear EmptyDataset failure.
  const OutputLayout empty{dir / "nothing"};
  try {
    cmd_train_degradation(config, empty, log);
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
}

TEST_CASE("cli exit codes") {
  TempDir dir("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("plot") == 1);

  std::ofstream(dir / "bad.ini") << "[experiment]\nschema_version = 1\n[train]\nspeed = 11\n";
  CHECK(run_cli("--config \"" + (dir / "bad.ini").string() + "\" prepare") == 1);

  std::ofstream(dir / "good.ini") << "[experiment]\nschema_version = 1\n";
  CHECK(run_cli("--config \"" + (dir / "good.ini").string() + "\" --out \"" + (dir / "o").string() +
                "\" train-degradation") == 2);

  write_train_log(dir / "log.csv", make_log({{0, 10.0}, {10, 12.0}}));
  CHECK(run_cli("plot \"" + (dir / "log.csv").string() + "\" -o \"" + (dir / "p.svg").string() + "\"") == 0);
  CHECK(std::filesystem::exists(dir / "p.svg"));
}

TEST_CASE("train-sr and sweeps on a tiny prepared set") {
  TempDir dir("sweep");
  const auto raw = dir / "raw";
  for (const char* sub : {"train/hr", "train/lr", "val/hr", "val/lr", "extra/hr"})
    std::filesystem::create_directories(raw / sub);
  for (int i = 0; i < 2; ++i) {
    const std::string name = "t" + std::to_string(i) + ".png";
    save_image(raw / "train/hr" / name, random_image8(32, 32, 10 + i));
    save_image(raw / "train/lr" / name, random_image8(32, 32, 20 + i));
    save_image(raw / "val/hr" / name, random_image8(16, 16, 30 + i));
    save_image(raw / "val/lr" / name, random_image8(16, 16, 40 + i));
  }
  save_image(raw / "extra/hr/e.png", random_image8(32, 32, 50));

  ExperimentConfig config;
  config.data = {raw / "train/hr", raw / "train/lr", raw / "val/hr", raw / "val/lr", raw / "extra/hr", 16, 16, 16, 16, {}};
  config.model.base_channels = 8;
  config.model.num_cascading_blocks = 1;
  config.model.rcabs_per_block = 1;
  config.model.attention_reduction = 4;
  config.train.batch_size = 2;
  config.train.patch_size = 16;
  config.train.total_iters = 10;
  config.train.validate_every = 5;
  config.checkpoint_every = 5;
  config.degradation = {DegradationKind::bicubic_x4, 0.0, 0.0, 0.0, {}};
  const OutputLayout out{dir / "out"};
  std::ostringstream log;
  const auto summary = cmd_prepare(config, out, log);
  REQUIRE(summary.train_subimages == 8);
  REQUIRE(summary.extra_subimages == 4);

  SUBCASE("train-sr writes its run directory") {
    const auto run = cmd_train_sr(config, out, log);
    CHECK(run.dir == out.sr_dir(sr_run_name(config)));
    for (const char* f : {"best.srw", "final.srw", "log.csv", "config.ini"}) CHECK(std::filesystem::exists(run.dir / f));
    CHECK(read_train_log(run.dir / "log.csv").rows.size() == 10 / 5 + 1);
    CHECK(load_weights(run.dir / "final.srw") == run.result.final);
    std::size_t checkpoints = 0;
    for (const auto& e : std::filesystem::directory_iterator(run.dir / "checkpoints"))
      checkpoints += e.path().filename().string().rfind("ckpt_", 0) == 0;
    CHECK(checkpoints == 2);
    CHECK(load_config(run.dir / "config.ini").train == config.train);
  }
  SUBCASE("data volume sweep gives one log per value and a plot") {
    const auto sweep = cmd_sweep(config, {SweepAxis::data_volume, {"2", "all"}}, out, log);
    REQUIRE(sweep.logs.size() == 2);
    for (const auto& p : sweep.logs) CHECK(read_train_log(p).rows.size() == 3);
    CHECK(std::filesystem::exists(sweep.plot));
    CHECK(sr_training_manifest([&] {
            auto c = config;
            c.data.data_volume = 2;
            return c;
          }(),
                               out)
              .size() == 2);
  }
  SUBCASE("synthetic volume sweep synthesizes once and grows the training set") {
    const auto sweep = cmd_sweep(config, {SweepAxis::synthetic_volume, {"0", "half", "all"}}, out, log);
    CHECK(sweep.logs.size() == 3);
    CHECK(read_manifest(out.synthetic_manifest(DegradationKind::bicubic_x4)).size() == 4);
    auto c = config;
    c.synthetic_fraction = SyntheticFraction::of(0.5);
    CHECK(sr_training_manifest(c, out).size() == 8 + 2);
    c.synthetic_fraction = SyntheticFraction::everything();
    CHECK(sr_training_manifest(c, out).size() == 8 + 4);
  }
}
