#pragma once

#include <string>
#include <vector>

#include "sitar/datasets.hpp"
#include "sitar/nn.hpp"
#include "sitar/trainer.hpp"

namespace sitar::config {

// Everything a run needs, assembled from a flat key=value file plus CLI
// overrides. Unknown keys are rejected by name.
struct RunConfig {
  train::TrainConfig train;
  datasets::SyntheticSpec synth;
  int enc_width = 32;
  int enc_depth = 2;
  int enc_patch_size = 16;

  // input_side tracks the super-image side; drop_path comes from training.
  nn::EncoderSpec encoder_spec(int num_classes) const {
    nn::EncoderSpec spec;
    spec.input_side = train.super_side;
    spec.num_classes = num_classes;
    spec.width = enc_width;
    spec.depth = enc_depth;
    spec.patch_size = enc_patch_size;
    spec.drop_path_rate = train.drop_path;
    return spec;
  }
};

RunConfig defaults();

// Lines of "key = value"; '#' starts a comment. Throws ConfigError naming
// the first unknown key or unparsable value.
RunConfig parse_file(const std::string& path);

// "key=value" strings, applied on top (CLI --override).
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Full resolved key=value dump, one per line, stable order.
std::string to_text(const RunConfig& cfg);

void write_snapshot(const RunConfig& cfg, const std::string& path);

std::vector<std::string> known_keys();

}  // namespace sitar::config
