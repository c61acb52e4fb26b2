#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sitar/nn.hpp"
#include "sitar/superimage.hpp"

namespace sitar::encoder {

using nn::EncoderSpec;

enum class Pathway { kFast, kSlow };

struct RepresentationBatch {
  nn::Mat<float> values;  // B x num_classes logits
  Pathway pathway = Pathway::kFast;
};

struct OptimizerSnapshot {
  std::vector<float> first_moment, second_moment;
  std::int64_t step = 0;
};

// The desk-scale stand-in for the shared image-transformer backbone. Both
// pathways run through this single parameter store; there is no per-pathway
// copy anywhere.
class ReferenceEncoder {
 public:
  ReferenceEncoder(const EncoderSpec& spec, std::uint64_t seed, bool zero_head = false)
      : net_(spec) {
    Rng rng = Rng::substream(seed, 0x656e636f646572ULL);  // "encoder"
    net_.init_params(rng, zero_head);
  }
  explicit ReferenceEncoder(const EncoderSpec& spec) : net_(spec) {}

  const EncoderSpec& spec() const { return net_.spec(); }
  int num_params() const { return net_.num_params(); }
  nn::VitNet<float>& net() { return net_; }
  const nn::VitNet<float>& net() const { return net_; }

  // Flattens a super image into the row layout the network consumes.
  nn::Mat<float> to_input(const std::vector<superimage::SuperImage>& batch) const;

  // Inference-style encode; train mode enables drop path when a generator is
  // supplied. Deterministic when train is false.
  RepresentationBatch encode(const std::vector<superimage::SuperImage>& batch, bool train_mode,
                             Pathway pathway = Pathway::kFast, Rng* drop_rng = nullptr) const;

 private:
  nn::VitNet<float> net_;
};

// Training-facing batch forward/backward. Samples run in parallel but the
// gradient reduction is in sample order, so results do not depend on the
// thread count.
struct BatchForward {
  nn::Mat<float> logits;
  std::vector<nn::VitNet<float>::Cache> caches;
  std::vector<std::uint8_t> keep_masks;  // B * depth * 2, empty when drop path inactive
};

BatchForward forward_batch(const nn::VitNet<float>& net, const nn::Mat<float>& inputs, bool train,
                           Rng* drop_rng);

// Accumulates the summed parameter gradient over the batch into grad.
void backward_batch(const nn::VitNet<float>& net, const BatchForward& fwd,
                    const nn::Mat<float>& dlogits, std::vector<float>& grad);

// Single-file checkpoint: magic, JSON header (spec, epoch, tensor table,
// optimizer presence), then raw little-endian float32 payloads.
inline constexpr char kCheckpointMagic[] = "SITAR-CKPT-1";

void save_checkpoint(const std::string& path, const ReferenceEncoder& enc,
                     const OptimizerSnapshot* opt, int epoch);

struct LoadedCheckpoint {
  ReferenceEncoder encoder;
  std::optional<OptimizerSnapshot> optimizer;
  int epoch = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace sitar::encoder
