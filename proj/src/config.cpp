#include "srmix/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "srmix/error.hpp"

namespace srmix {

namespace pt = boost::property_tree;

std::string_view to_string(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::data_volume: return "data_volume";
    case SweepAxis::model_size: return "model_size";
    case SweepAxis::synthetic_volume: return "synthetic_volume";
    case SweepAxis::degradation_type: return "degradation_type";
  }
  return "data_volume";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto axis : {SweepAxis::data_volume, SweepAxis::model_size, SweepAxis::synthetic_volume,
                    SweepAxis::degradation_type}) {
    if (text == to_string(axis)) return axis;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown sweep axis '" + std::string(text) + "'");
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

std::optional<double> as_number(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  return std::nullopt;
}

long parse_long(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  // allow 5e5 style integers
  const auto d = as_number(text);
  if (d && *d == static_cast<double>(static_cast<long>(*d))) return static_cast<long>(*d);
  invalid(key + ": expected an integer, got '" + text + "'");
}

int parse_int(const std::string& key, const std::string& text) {
  const long v = parse_long(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) invalid(key + ": out of range");
  return static_cast<int>(v);
}

double parse_real(const std::string& key, const std::string& text) {
  const auto v = as_number(text);
  if (!v) invalid(key + ": expected a number, got '" + text + "'");
  return *v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  invalid(key + ": expected true/false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  if (text.empty()) return {};
  const std::filesystem::path p(text);
  return p.is_absolute() || base.empty() ? p : base / p;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

std::map<std::string, Setter> schema(const std::filesystem::path& base) {
  std::map<std::string, Setter> s;
  s["experiment.schema_version"] = [](auto& c, auto& v) { c.schema_version = parse_int("schema_version", v); };
  s["experiment.preset"] = [](auto&, auto&) {};  // applied before the other keys
  s["experiment.output_dir"] = [base](auto& c, auto& v) { c.output_dir = resolve(base, v); };
  s["experiment.seed"] = [](auto& c, auto& v) {
    c.train.seed = static_cast<std::uint64_t>(parse_long("seed", v));
  };
  s["data.train_hr"] = [base](auto& c, auto& v) { c.data.train_hr = resolve(base, v); };
  s["data.train_lr"] = [base](auto& c, auto& v) { c.data.train_lr = resolve(base, v); };
  s["data.val_hr"] = [base](auto& c, auto& v) { c.data.val_hr = resolve(base, v); };
  s["data.val_lr"] = [base](auto& c, auto& v) { c.data.val_lr = resolve(base, v); };
  s["data.extra_hr"] = [base](auto& c, auto& v) { c.data.extra_hr = resolve(base, v); };
  s["data.paired_crop"] = [](auto& c, auto& v) { c.data.paired_crop = parse_int("paired_crop", v); };
  s["data.paired_stride"] = [](auto& c, auto& v) { c.data.paired_stride = parse_int("paired_stride", v); };
  s["data.extra_crop"] = [](auto& c, auto& v) { c.data.extra_crop = parse_int("extra_crop", v); };
  s["data.extra_stride"] = [](auto& c, auto& v) { c.data.extra_stride = parse_int("extra_stride", v); };
  s["data.data_volume"] = [](auto& c, auto& v) {
    if (v == "all") {
      c.data.data_volume.reset();
    } else {
      const long n = parse_long("data_volume", v);
      if (n < 1) invalid("data_volume must be >= 1 or 'all'");
      c.data.data_volume = static_cast<std::size_t>(n);
    }
  };
  s["model.base_channels"] = [](auto& c, auto& v) { c.model.base_channels = parse_int("base_channels", v); };
  s["model.num_cascading_blocks"] = [](auto& c, auto& v) {
    c.model.num_cascading_blocks = parse_int("num_cascading_blocks", v);
  };
  s["model.rcabs_per_block"] = [](auto& c, auto& v) { c.model.rcabs_per_block = parse_int("rcabs_per_block", v); };
  s["model.attention_reduction"] = [](auto& c, auto& v) {
    c.model.attention_reduction = parse_int("attention_reduction", v);
  };
  s["model.global_skip"] = [](auto& c, auto& v) { c.model.global_skip = parse_bool("global_skip", v); };
  s["model.unet_skips"] = [](auto& c, auto& v) { c.model.unet_skips = parse_bool("unet_skips", v); };
  s["train.batch_size"] = [](auto& c, auto& v) { c.train.batch_size = parse_int("batch_size", v); };
  s["train.patch_size"] = [](auto& c, auto& v) { c.train.patch_size = parse_int("patch_size", v); };
  s["train.total_iters"] = [](auto& c, auto& v) { c.train.total_iters = parse_long("total_iters", v); };
  s["train.lr_init"] = [](auto& c, auto& v) { c.train.lr_init = parse_real("lr_init", v); };
  s["train.lr_half_every"] = [](auto& c, auto& v) { c.train.lr_half_every = parse_long("lr_half_every", v); };
  s["train.adam_beta1"] = [](auto& c, auto& v) { c.train.adam_beta1 = parse_real("adam_beta1", v); };
  s["train.adam_beta2"] = [](auto& c, auto& v) { c.train.adam_beta2 = parse_real("adam_beta2", v); };
  s["train.adam_eps"] = [](auto& c, auto& v) { c.train.adam_eps = parse_real("adam_eps", v); };
  s["train.validate_every"] = [](auto& c, auto& v) { c.train.validate_every = parse_long("validate_every", v); };
  s["train.val_crop"] = [](auto& c, auto& v) { c.train.val_crop = parse_int("val_crop", v); };
  s["train.checkpoint_every"] = [](auto& c, auto& v) { c.checkpoint_every = parse_long("checkpoint_every", v); };
  s["mixup.enabled"] = [](auto& c, auto& v) { c.train.mixup.enabled = parse_bool("mixup.enabled", v); };
  s["mixup.alpha"] = [](auto& c, auto& v) { c.train.mixup.alpha = parse_real("mixup.alpha", v); };
  s["degradation.kind"] = [](auto& c, auto& v) { c.degradation.kind = parse_degradation_kind(v); };
  s["degradation.sigma"] = [](auto& c, auto& v) { c.degradation.sigma = parse_real("sigma", v); };
  s["degradation.sigma_read"] = [](auto& c, auto& v) { c.degradation.sigma_read = parse_real("sigma_read", v); };
  s["degradation.sigma_shot"] = [](auto& c, auto& v) { c.degradation.sigma_shot = parse_real("sigma_shot", v); };
  s["degradation.weights_path"] = [base](auto& c, auto& v) { c.degradation.weights_path = resolve(base, v); };
  s["synthesis.fraction"] = [](auto& c, auto& v) { c.synthetic_fraction = SyntheticFraction::parse(v); };
  s["sweep.axis"] = [](auto& c, auto& v) {
    if (!c.sweep) c.sweep = SweepSpec{};
    c.sweep->axis = parse_sweep_axis(v);
  };
  s["sweep.values"] = [](auto& c, auto& v) {
    if (!c.sweep) c.sweep = SweepSpec{};
    c.sweep->values = split_list(v);
  };
  return s;
}

}  // namespace

void SweepSpec::validate() const {
  if (values.empty()) invalid("sweep values must not be empty");
  std::optional<double> previous;
  for (const std::string& v : values) {
    std::optional<double> number;
    switch (axis) {
      case SweepAxis::data_volume:
        if (v != "all") {
          number = as_number(v);
          if (!number || *number < 1 || *number != std::floor(*number)) invalid("bad data_volume value '" + v + "'");
        } else {
          number = std::numeric_limits<double>::infinity();
        }
        break;
      case SweepAxis::model_size:
        number = as_number(v);
        if (!number || *number < 1 || *number != std::floor(*number)) invalid("bad model_size value '" + v + "'");
        break;
      case SweepAxis::synthetic_volume:
        if (v == "all") {
          number = 1.0;
        } else if (v == "half") {
          number = 0.5;
        } else {
          number = SyntheticFraction::parse(v).value;
        }
        break;
      case SweepAxis::degradation_type:
        if (v != "gaussian" && v != "bicubic" && v != "learned" && v != "bicubic_noise") {
          invalid("bad degradation_type value '" + v + "' (gaussian, bicubic, bicubic_noise, learned)");
        }
        break;
    }
    if (number) {
      if (previous && !(*number > *previous)) invalid("sweep values must be strictly increasing");
      previous = number;
    }
  }
  if (axis == SweepAxis::degradation_type) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = i + 1; j < values.size(); ++j) {
        if (values[i] == values[j]) invalid("duplicate sweep value '" + values[i] + "'");
      }
    }
  }
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    invalid("schema_version " + std::to_string(schema_version) + " is not supported (expected " +
            std::to_string(kConfigSchemaVersion) + ")");
  }
  model.validate();
  train.validate();
  if (train.patch_size % ModelConfig::kInternalScale != 0) invalid("patch_size must be divisible by 4");
  auto check_window = [](int crop, int stride, const char* name) {
    if (crop < 0 || stride < 0) invalid(std::string(name) + ": crop/stride must be >= 0");
    if (crop > 0 && (stride < 1 || crop % ModelConfig::kInternalScale != 0)) {
      invalid(std::string(name) + ": crop must be divisible by 4 and stride >= 1");
    }
  };
  check_window(data.paired_crop, data.paired_stride, "paired");
  check_window(data.extra_crop, data.extra_stride, "extra");
  if (checkpoint_every < 0) invalid("checkpoint_every must be >= 0");
  if (degradation.kind == DegradationKind::learned) {
    DegradationSpec probe = degradation;
    if (probe.weights_path.empty()) probe.weights_path = "unset";
    probe.validate();
  } else {
    degradation.validate();
  }
  if (sweep) sweep->validate();
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"baseline", "mixup", "synthesis", "full", "desk", "full_scale"};
  return names;
}

void apply_preset(ExperimentConfig& config, const std::string& name) {
  if (name == "baseline") {
    config.train.mixup.enabled = false;
    config.synthetic_fraction = SyntheticFraction::of(0.0);
  } else if (name == "mixup") {
    config.train.mixup = MixupConfig{true, 1.2};
    config.synthetic_fraction = SyntheticFraction::of(0.0);
  } else if (name == "synthesis") {
    config.train.mixup.enabled = false;
    config.synthetic_fraction = SyntheticFraction::everything();
  } else if (name == "full") {
    config.train.mixup = MixupConfig{true, 1.2};
    config.synthetic_fraction = SyntheticFraction::everything();
  } else if (name == "desk") {
    config.model.base_channels = 16;
    config.model.num_cascading_blocks = 1;
    config.model.rcabs_per_block = 2;
    config.model.attention_reduction = 4;
    config.train.total_iters = 5000;
    config.train.validate_every = 250;
    config.train.patch_size = 32;
    config.train.batch_size = 16;
    config.data.paired_crop = 64;
    config.data.paired_stride = 32;
    config.data.extra_crop = 64;
    config.data.extra_stride = 32;
  } else if (name == "full_scale") {
    const ExperimentConfig defaults;
    config.model = defaults.model;
    config.train.batch_size = defaults.train.batch_size;
    config.train.patch_size = defaults.train.patch_size;
    config.train.total_iters = defaults.train.total_iters;
    config.train.lr_init = defaults.train.lr_init;
    config.train.lr_half_every = defaults.train.lr_half_every;
    config.train.validate_every = defaults.train.validate_every;
    config.data.paired_crop = 200;
    config.data.paired_stride = 100;
    config.data.extra_crop = 480;
    config.data.extra_stride = 240;
  } else {
    invalid("unknown preset '" + name + "'");
  }
  config.presets.push_back(name);
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    invalid(std::string("config syntax: ") + e.what());
  }
  const auto setters = schema(base_dir);
  ExperimentConfig config;
  config.schema_version = -1;

  for (const auto& [section, body] : tree) {
    if (body.empty()) invalid("key '" + section + "' must be inside a section");
  }
  if (auto preset = tree.get_optional<std::string>("experiment.preset")) {
    for (const std::string& name : split_list(*preset)) apply_preset(config, name);
  }
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = setters.find(full);
      if (it == setters.end()) invalid("unknown config key '" + full + "'");
      if (!value.empty()) invalid("nested value under '" + full + "'");
      it->second(config, value.data());
    }
  }
  if (config.schema_version == -1) invalid("missing experiment.schema_version");
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(17) << std::boolalpha;
  out << "[experiment]\nschema_version = " << c.schema_version << '\n';
  if (!c.output_dir.empty()) out << "output_dir = " << c.output_dir.string() << '\n';
  out << "seed = " << c.train.seed << "\n\n[data]\n";
  auto path_key = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) out << key << " = " << p.string() << '\n';
  };
  path_key("train_hr", c.data.train_hr);
  path_key("train_lr", c.data.train_lr);
  path_key("val_hr", c.data.val_hr);
  path_key("val_lr", c.data.val_lr);
  path_key("extra_hr", c.data.extra_hr);
  out << "paired_crop = " << c.data.paired_crop << "\npaired_stride = " << c.data.paired_stride
      << "\nextra_crop = " << c.data.extra_crop << "\nextra_stride = " << c.data.extra_stride
      << "\ndata_volume = " << (c.data.data_volume ? std::to_string(*c.data.data_volume) : "all") << "\n\n";
  out << "[model]\nbase_channels = " << c.model.base_channels
      << "\nnum_cascading_blocks = " << c.model.num_cascading_blocks
      << "\nrcabs_per_block = " << c.model.rcabs_per_block
      << "\nattention_reduction = " << c.model.attention_reduction
      << "\nglobal_skip = " << c.model.global_skip << "\nunet_skips = " << c.model.unet_skips << "\n\n";
  out << "[train]\nbatch_size = " << c.train.batch_size << "\npatch_size = " << c.train.patch_size
      << "\ntotal_iters = " << c.train.total_iters << "\nlr_init = " << c.train.lr_init
      << "\nlr_half_every = " << c.train.lr_half_every << "\nadam_beta1 = " << c.train.adam_beta1
      << "\nadam_beta2 = " << c.train.adam_beta2 << "\nadam_eps = " << c.train.adam_eps
      << "\nvalidate_every = " << c.train.validate_every << "\nval_crop = " << c.train.val_crop
      << "\ncheckpoint_every = " << c.checkpoint_every << "\n\n";
  out << "[mixup]\nenabled = " << c.train.mixup.enabled << "\nalpha = " << c.train.mixup.alpha << "\n\n";
  out << "[degradation]\nkind = " << to_string(c.degradation.kind) << '\n';
  if (c.degradation.sigma != 0.0) out << "sigma = " << c.degradation.sigma << '\n';
  if (c.degradation.sigma_read != 0.0) out << "sigma_read = " << c.degradation.sigma_read << '\n';
  if (c.degradation.sigma_shot != 0.0) out << "sigma_shot = " << c.degradation.sigma_shot << '\n';
  path_key("weights_path", c.degradation.weights_path);
  out << "\n[synthesis]\nfraction = " << c.synthetic_fraction.to_string() << '\n';
  if (c.sweep) {
    out << "\n[sweep]\naxis = " << to_string(c.sweep->axis) << "\nvalues = ";
    for (std::size_t i = 0; i < c.sweep->values.size(); ++i) out << (i ? "," : "") << c.sweep->values[i];
    out << '\n';
  }
}

std::filesystem::path resolve_output_root(const std::optional<std::filesystem::path>& flag,
                                          const ExperimentConfig& config) {
  if (flag && !flag->empty()) return *flag;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "srmix_out";
}

}  // namespace srmix
