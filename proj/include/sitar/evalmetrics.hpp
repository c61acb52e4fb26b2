#pragma once

#include <string>
#include <vector>

#include "sitar/core_types.hpp"
#include "sitar/encoder.hpp"

namespace sitar::evaluation {

struct EvalReport {
  double top1 = 0.0;
  std::vector<double> per_class_acc;
  int num_samples = 0;
  double wall_time_per_video = 0.0;  // seconds
};

struct EvalConfig {
  int frames_fast = 8;
  int super_side = 96;
  float pad_value = 0.0f;
  int batch_size = 32;
};

// Fraction of rows whose argmax (ties to the lowest index) equals the label.
double top1(const nn::Mat<float>& logits, const std::vector<int>& labels);

// Inference path: primary pathway only, center-of-segment sampling, normal
// frame order, no augmentation. Deterministic for a fixed checkpoint.
EvalReport evaluate(const encoder::ReferenceEncoder& enc, const DatasetManifest& manifest,
                    const EvalConfig& cfg, sampling::FrameCache* cache = nullptr);

std::string report_to_json(const EvalReport& report);

}  // namespace sitar::evaluation
