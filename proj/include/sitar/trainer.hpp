#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sitar/augment.hpp"
#include "sitar/core_types.hpp"
#include "sitar/encoder.hpp"
#include "sitar/superimage.hpp"

namespace sitar::train {

enum class LossMode { kContrastive, kConsistency };

struct TrainConfig {
  int phase1_epochs = 25;
  int phase2_epochs = 50;
  int labeled_batch = 8;  // L_b
  int mu = 4;             // unlabeled:labeled ratio per step
  float tau = 0.5f;
  float gamma = 0.6f;
  float beta = 1.0f;
  double base_lr = 1e-4;
  double weight_decay = 0.05;
  int frames_fast = 8;
  int frames_slow = 4;
  int super_side = 96;
  float pad_value = 0.0f;
  float label_smoothing = 0.1f;
  augment::MixParams mix;       // phase 1 only
  bool crop_enabled = true;
  augment::CropParams crop;
  double drop_path = 0.1;
  std::optional<float> pseudo_threshold;  // absent: pure argmax pseudo-labels
  superimage::FrameOrder frame_order = superimage::FrameOrder::kNormal;
  LossMode loss_mode = LossMode::kContrastive;
  float consistency_threshold = 0.95f;  // Table-3 baseline mode
  float consistency_weight = 1.0f;
  std::uint64_t seed = 0;
  int max_steps = 0;  // stop after this many optimizer steps when > 0

  std::string metrics_path;     // JSON Lines, truncated at run start; empty disables
  std::string checkpoint_path;  // rewritten every epoch; empty disables
};

struct EpochMetrics {
  int epoch = 0;
  double l_sup = 0, l_ic = 0, l_gc = 0, total = 0;
  double lr = 0;
  double pseudo_accept_rate = 0;
  double wall_time = 0;  // seconds; reported but kept out of the metrics file
};

struct PseudoLabels {
  std::vector<int> labels;
  std::vector<char> accept;
  double accept_rate = 0.0;
};

// Argmax per row with ties to the lowest class; the optional threshold
// rejects rows whose max softmax falls below it.
PseudoLabels pseudo_label(const nn::Mat<float>& logits, std::optional<float> threshold);

// Called after every optimizer step with the current parameter vector.
using StepHook = std::function<void(int step, const std::vector<float>& params)>;

// Phase 1: supervised training of the primary pathway on the labeled set
// with crop + Mixup/CutMix and smoothed cross entropy.
std::vector<EpochMetrics> train_phase1(const TrainConfig& cfg, const DatasetManifest& labeled,
                                       encoder::ReferenceEncoder& enc,
                                       sampling::FrameCache* cache = nullptr,
                                       const StepHook& hook = nullptr);

// Phase 2: each step takes L_b labeled videos through the fast pathway
// (cross entropy) and mu*L_b unlabeled videos through both pathways
// (instance + group contrastive losses on pseudo-label groups). An epoch is
// one pass over the unlabeled set.
std::vector<EpochMetrics> train_phase2(const TrainConfig& cfg, const DatasetManifest& labeled,
                                       const DatasetManifest& unlabeled,
                                       encoder::ReferenceEncoder& enc,
                                       sampling::FrameCache* cache = nullptr,
                                       const StepHook& hook = nullptr);

// Supervised-only comparator: identical batch schedule and optimizer as
// phase 2 but only the labeled cross-entropy term is computed. With
// gamma = beta = 0 the phase-2 parameter trajectory must match this exactly.
std::vector<EpochMetrics> train_supervised_baseline(const TrainConfig& cfg,
                                                    const DatasetManifest& labeled,
                                                    const DatasetManifest& unlabeled,
                                                    encoder::ReferenceEncoder& enc,
                                                    sampling::FrameCache* cache = nullptr,
                                                    const StepHook& hook = nullptr);

}  // namespace sitar::train
