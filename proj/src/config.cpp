#include "sitar/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sitar/errors.hpp"

namespace sitar::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  T out;
  std::string rest;
  if (!(ss >> out) || (ss >> rest))
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

superimage::FrameOrder parse_order(const std::string& key, const std::string& value) {
  if (value == "normal") return superimage::FrameOrder::kNormal;
  if (value == "random") return superimage::FrameOrder::kRandom;
  if (value == "reverse") return superimage::FrameOrder::kReverse;
  throw ConfigError("config key '" + key + "': expected normal|random|reverse, got '" + value + "'");
}

std::string order_name(superimage::FrameOrder order) {
  switch (order) {
    case superimage::FrameOrder::kNormal: return "normal";
    case superimage::FrameOrder::kRandom: return "random";
    case superimage::FrameOrder::kReverse: return "reverse";
  }
  return "normal";
}

const std::map<std::string, Entry>& schema() {
  static const std::map<std::string, Entry> kSchema = [] {
    std::map<std::string, Entry> s;
    auto add_int = [&](const std::string& key, auto member) {
      s[key] = Entry{[member, key](RunConfig& c, const std::string& v) {
                       c.*member = parse_number<int>(key, v);
                     },
                     [member](const RunConfig& c) { return std::to_string(c.*member); }};
    };
    auto add = [&](const std::string& key, auto setter, auto getter) {
      s[key] = Entry{setter, getter};
    };

    // training
    add("phase1_epochs",
        [](RunConfig& c, const std::string& v) { c.train.phase1_epochs = parse_number<int>("phase1_epochs", v); },
        [](const RunConfig& c) { return std::to_string(c.train.phase1_epochs); });
    add("phase2_epochs",
        [](RunConfig& c, const std::string& v) { c.train.phase2_epochs = parse_number<int>("phase2_epochs", v); },
        [](const RunConfig& c) { return std::to_string(c.train.phase2_epochs); });
    add("labeled_batch",
        [](RunConfig& c, const std::string& v) { c.train.labeled_batch = parse_number<int>("labeled_batch", v); },
        [](const RunConfig& c) { return std::to_string(c.train.labeled_batch); });
    add("mu",
        [](RunConfig& c, const std::string& v) { c.train.mu = parse_number<int>("mu", v); },
        [](const RunConfig& c) { return std::to_string(c.train.mu); });
    add("tau",
        [](RunConfig& c, const std::string& v) { c.train.tau = static_cast<float>(parse_number<double>("tau", v)); },
        [](const RunConfig& c) { return format_double(c.train.tau); });
    add("gamma",
        [](RunConfig& c, const std::string& v) { c.train.gamma = static_cast<float>(parse_number<double>("gamma", v)); },
        [](const RunConfig& c) { return format_double(c.train.gamma); });
    add("beta",
        [](RunConfig& c, const std::string& v) { c.train.beta = static_cast<float>(parse_number<double>("beta", v)); },
        [](const RunConfig& c) { return format_double(c.train.beta); });
    add("base_lr",
        [](RunConfig& c, const std::string& v) { c.train.base_lr = parse_number<double>("base_lr", v); },
        [](const RunConfig& c) { return format_double(c.train.base_lr); });
    add("weight_decay",
        [](RunConfig& c, const std::string& v) { c.train.weight_decay = parse_number<double>("weight_decay", v); },
        [](const RunConfig& c) { return format_double(c.train.weight_decay); });
    add("frames_fast",
        [](RunConfig& c, const std::string& v) { c.train.frames_fast = parse_number<int>("frames_fast", v); },
        [](const RunConfig& c) { return std::to_string(c.train.frames_fast); });
    add("frames_slow",
        [](RunConfig& c, const std::string& v) { c.train.frames_slow = parse_number<int>("frames_slow", v); },
        [](const RunConfig& c) { return std::to_string(c.train.frames_slow); });
    add("super_side",
        [](RunConfig& c, const std::string& v) { c.train.super_side = parse_number<int>("super_side", v); },
        [](const RunConfig& c) { return std::to_string(c.train.super_side); });
    add("pad_value",
        [](RunConfig& c, const std::string& v) { c.train.pad_value = static_cast<float>(parse_number<double>("pad_value", v)); },
        [](const RunConfig& c) { return format_double(c.train.pad_value); });
    add("label_smoothing",
        [](RunConfig& c, const std::string& v) { c.train.label_smoothing = static_cast<float>(parse_number<double>("label_smoothing", v)); },
        [](const RunConfig& c) { return format_double(c.train.label_smoothing); });
    add("mixup_alpha",
        [](RunConfig& c, const std::string& v) { c.train.mix.mixup_alpha = parse_number<double>("mixup_alpha", v); },
        [](const RunConfig& c) { return format_double(c.train.mix.mixup_alpha); });
    add("cutmix_alpha",
        [](RunConfig& c, const std::string& v) { c.train.mix.cutmix_alpha = parse_number<double>("cutmix_alpha", v); },
        [](const RunConfig& c) { return format_double(c.train.mix.cutmix_alpha); });
    add("switch_prob",
        [](RunConfig& c, const std::string& v) { c.train.mix.switch_prob = parse_number<double>("switch_prob", v); },
        [](const RunConfig& c) { return format_double(c.train.mix.switch_prob); });
    add("crop_enabled",
        [](RunConfig& c, const std::string& v) { c.train.crop_enabled = parse_bool("crop_enabled", v); },
        [](const RunConfig& c) { return c.train.crop_enabled ? std::string("true") : std::string("false"); });
    add("crop_scale_lo",
        [](RunConfig& c, const std::string& v) { c.train.crop.scale_lo = parse_number<double>("crop_scale_lo", v); },
        [](const RunConfig& c) { return format_double(c.train.crop.scale_lo); });
    add("crop_scale_hi",
        [](RunConfig& c, const std::string& v) { c.train.crop.scale_hi = parse_number<double>("crop_scale_hi", v); },
        [](const RunConfig& c) { return format_double(c.train.crop.scale_hi); });
    add("crop_ratio_lo",
        [](RunConfig& c, const std::string& v) { c.train.crop.ratio_lo = parse_number<double>("crop_ratio_lo", v); },
        [](const RunConfig& c) { return format_double(c.train.crop.ratio_lo); });
    add("crop_ratio_hi",
        [](RunConfig& c, const std::string& v) { c.train.crop.ratio_hi = parse_number<double>("crop_ratio_hi", v); },
        [](const RunConfig& c) { return format_double(c.train.crop.ratio_hi); });
    add("drop_path",
        [](RunConfig& c, const std::string& v) { c.train.drop_path = parse_number<double>("drop_path", v); },
        [](const RunConfig& c) { return format_double(c.train.drop_path); });
    add("pseudo_threshold",
        [](RunConfig& c, const std::string& v) {
          if (v == "none" || v.empty()) c.train.pseudo_threshold.reset();
          else c.train.pseudo_threshold = static_cast<float>(parse_number<double>("pseudo_threshold", v));
        },
        [](const RunConfig& c) {
          return c.train.pseudo_threshold ? format_double(*c.train.pseudo_threshold) : std::string("none");
        });
    add("frame_order",
        [](RunConfig& c, const std::string& v) { c.train.frame_order = parse_order("frame_order", v); },
        [](const RunConfig& c) { return order_name(c.train.frame_order); });
    add("loss_mode",
        [](RunConfig& c, const std::string& v) {
          if (v == "contrastive") c.train.loss_mode = train::LossMode::kContrastive;
          else if (v == "consistency") c.train.loss_mode = train::LossMode::kConsistency;
          else throw ConfigError("config key 'loss_mode': expected contrastive|consistency, got '" + v + "'");
        },
        [](const RunConfig& c) {
          return c.train.loss_mode == train::LossMode::kContrastive ? std::string("contrastive")
                                                                    : std::string("consistency");
        });
    add("consistency_threshold",
        [](RunConfig& c, const std::string& v) { c.train.consistency_threshold = static_cast<float>(parse_number<double>("consistency_threshold", v)); },
        [](const RunConfig& c) { return format_double(c.train.consistency_threshold); });
    add("consistency_weight",
        [](RunConfig& c, const std::string& v) { c.train.consistency_weight = static_cast<float>(parse_number<double>("consistency_weight", v)); },
        [](const RunConfig& c) { return format_double(c.train.consistency_weight); });
    add("seed",
        [](RunConfig& c, const std::string& v) {
          c.train.seed = parse_number<unsigned long long>("seed", v);
          c.synth.seed = c.train.seed;
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); });
    add("max_steps",
        [](RunConfig& c, const std::string& v) { c.train.max_steps = parse_number<int>("max_steps", v); },
        [](const RunConfig& c) { return std::to_string(c.train.max_steps); });

    // encoder
    add_int("enc_width", &RunConfig::enc_width);
    add_int("enc_depth", &RunConfig::enc_depth);
    add_int("enc_patch_size", &RunConfig::enc_patch_size);

    // synthetic dataset
    add("synth_num_classes",
        [](RunConfig& c, const std::string& v) { c.synth.num_classes = parse_number<int>("synth_num_classes", v); },
        [](const RunConfig& c) { return std::to_string(c.synth.num_classes); });
    add("synth_videos_per_class",
        [](RunConfig& c, const std::string& v) { c.synth.videos_per_class = parse_number<int>("synth_videos_per_class", v); },
        [](const RunConfig& c) { return std::to_string(c.synth.videos_per_class); });
    add("synth_frames",
        [](RunConfig& c, const std::string& v) { c.synth.frames_per_video = parse_number<int>("synth_frames", v); },
        [](const RunConfig& c) { return std::to_string(c.synth.frames_per_video); });
    add("synth_resolution",
        [](RunConfig& c, const std::string& v) { c.synth.resolution = parse_number<int>("synth_resolution", v); },
        [](const RunConfig& c) { return std::to_string(c.synth.resolution); });
    add("synth_size_lo",
        [](RunConfig& c, const std::string& v) { c.synth.size_lo = parse_number<double>("synth_size_lo", v); },
        [](const RunConfig& c) { return format_double(c.synth.size_lo); });
    add("synth_size_hi",
        [](RunConfig& c, const std::string& v) { c.synth.size_hi = parse_number<double>("synth_size_hi", v); },
        [](const RunConfig& c) { return format_double(c.synth.size_hi); });
    add("synth_color_lo",
        [](RunConfig& c, const std::string& v) { c.synth.color_lo = parse_number<double>("synth_color_lo", v); },
        [](const RunConfig& c) { return format_double(c.synth.color_lo); });
    add("synth_color_hi",
        [](RunConfig& c, const std::string& v) { c.synth.color_hi = parse_number<double>("synth_color_hi", v); },
        [](const RunConfig& c) { return format_double(c.synth.color_hi); });
    add("synth_speed_jitter_lo",
        [](RunConfig& c, const std::string& v) { c.synth.speed_jitter_lo = parse_number<double>("synth_speed_jitter_lo", v); },
        [](const RunConfig& c) { return format_double(c.synth.speed_jitter_lo); });
    add("synth_speed_jitter_hi",
        [](RunConfig& c, const std::string& v) { c.synth.speed_jitter_hi = parse_number<double>("synth_speed_jitter_hi", v); },
        [](const RunConfig& c) { return format_double(c.synth.speed_jitter_hi); });
    add("synth_base_speed",
        [](RunConfig& c, const std::string& v) { c.synth.base_speed = parse_number<double>("synth_base_speed", v); },
        [](const RunConfig& c) { return format_double(c.synth.base_speed); });
    add("synth_noise_std",
        [](RunConfig& c, const std::string& v) { c.synth.noise_std = parse_number<double>("synth_noise_std", v); },
        [](const RunConfig& c) { return format_double(c.synth.noise_std); });
    return s;
  }();
  return kSchema;
}

}  // namespace

RunConfig defaults() { return RunConfig{}; }

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = schema().find(key);
  if (it == schema().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, trim(value));
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + ov + "' is not of the form key=value");
    apply_override(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
}

RunConfig parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg = defaults();
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string to_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, entry] : schema()) out << key << " = " << entry.get(cfg) << "\n";
  return out.str();
}

void write_snapshot(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config snapshot: " + path);
  out << to_text(cfg);
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, entry] : schema()) keys.push_back(key);
  return keys;
}

}  // namespace sitar::config
