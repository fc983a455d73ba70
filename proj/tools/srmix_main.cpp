// Command-line front end: one subcommand per pipeline stage.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "srmix/config.hpp"
#include "srmix/error.hpp"
#include "srmix/experiment.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> presets;
  std::string out;
};

srmix::ExperimentConfig resolve_config(const GlobalOptions& opts) {
  srmix::ExperimentConfig config =
      opts.config_path.empty() ? srmix::ExperimentConfig{} : srmix::load_config(opts.config_path);
  for (const std::string& name : opts.presets) srmix::apply_preset(config, name);
  if (opts.seed) config.train.seed = *opts.seed;
  config.validate();
  return config;
}

bool is_usage_error(srmix::ErrorCode code) {
  return code == srmix::ErrorCode::InvalidConfig || code == srmix::ErrorCode::Usage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srmix: MixUp and learned-degradation synthesis for paired super-resolution"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "experiment config file (INI)")->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "override the experiment seed");
  app.add_option("--preset", opts.presets, "preset applied after the config file (repeatable)")
      ->check(CLI::IsMember(srmix::preset_names()));
  app.add_option("--out", opts.out, std::string("output root (default: config, then $") +
                                        srmix::kOutputRootEnv + ", then ./srmix_out)");

  auto* prepare = app.add_subcommand("prepare", "crop raw images into sub-images and write manifests");
  auto* train_deg = app.add_subcommand("train-degradation", "learn the HR -> LR degradation network");
  auto* synthesize = app.add_subcommand("synthesize", "create LR images for the extra HR set");
  auto* train_sr = app.add_subcommand("train-sr", "train the super-resolution network");

  auto* evaluate = app.add_subcommand("evaluate", "score weights on the validation set");
  std::string weights_path;
  bool self_ensemble = false;
  evaluate->add_option("--weights", weights_path, "weights file")->required()->check(CLI::ExistingFile);
  evaluate->add_flag("--self-ensemble", self_ensemble, "average over the 8 dihedral transforms");

  auto* sweep = app.add_subcommand("sweep", "train once per value of one axis and plot the curves");
  std::string sweep_axis;
  std::vector<std::string> sweep_values;
  sweep->add_option("--axis", sweep_axis, "data_volume | model_size | synthetic_volume | degradation_type");
  sweep->add_option("--values", sweep_values, "comma-separated values")->delimiter(',');

  auto* plot = app.add_subcommand("plot", "overlay validation PSNR curves from training logs");
  std::vector<std::string> log_paths;
  std::string plot_out = "val_psnr.svg";
  plot->add_option("logs", log_paths, "log.csv files");
  plot->add_option("-o,--output", plot_out, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (plot->parsed()) {
      if (log_paths.empty()) throw srmix::Error(srmix::ErrorCode::Usage, "plot needs at least one log file");
      std::vector<std::filesystem::path> paths(log_paths.begin(), log_paths.end());
      const srmix::PlotLayout layout = srmix::cmd_plot(paths, plot_out);
      std::cout << "plotted " << layout.plotted_series << " curve(s) to " << plot_out << '\n';
      return 0;
    }

    const srmix::ExperimentConfig config = resolve_config(opts);
    const srmix::OutputLayout out{srmix::resolve_output_root(
        opts.out.empty() ? std::nullopt : std::optional<std::filesystem::path>(opts.out), config)};

    if (prepare->parsed()) {
      srmix::cmd_prepare(config, out, std::cout);
    } else if (train_deg->parsed()) {
      srmix::cmd_train_degradation(config, out, std::cout);
    } else if (synthesize->parsed()) {
      srmix::cmd_synthesize(config, out, std::cout);
    } else if (train_sr->parsed()) {
      srmix::cmd_train_sr(config, out, std::cout);
    } else if (evaluate->parsed()) {
      srmix::cmd_evaluate(config, out, weights_path, self_ensemble, std::cout);
    } else if (sweep->parsed()) {
      srmix::SweepSpec spec = config.sweep.value_or(srmix::SweepSpec{});
      if (!sweep_axis.empty()) spec.axis = srmix::parse_sweep_axis(sweep_axis);
      if (!sweep_values.empty()) spec.values = sweep_values;
      if (spec.values.empty()) {
        throw srmix::Error(srmix::ErrorCode::Usage, "sweep needs --axis/--values or a [sweep] section");
      }
      srmix::cmd_sweep(config, spec, out, std::cout);
    }
    return 0;
  } catch (const srmix::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_usage_error(e.code()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
