#include "sitar/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sitar/errors.hpp"
#include "sitar/losses.hpp"
#include "sitar/optim.hpp"

namespace sitar::train {

using encoder::ReferenceEncoder;
using nn::Mat;
using superimage::SuperImage;

PseudoLabels pseudo_label(const Mat<float>& logits, std::optional<float> threshold) {
  const int b = static_cast<int>(logits.rows());
  PseudoLabels out;
  out.labels.resize(b);
  out.accept.assign(b, 1);
  const Mat<float> probs = threshold ? losses::softmax_rows(logits) : Mat<float>();
  int accepted = 0;
  for (int r = 0; r < b; ++r) {
    out.labels[r] = losses::argmax_row(logits, r);
    if (threshold && probs(r, out.labels[r]) < *threshold) out.accept[r] = 0;
    accepted += out.accept[r];
  }
  out.accept_rate = b > 0 ? static_cast<double>(accepted) / b : 0.0;
  return out;
}

namespace {

// Independent generator streams so that skipping one part of the pipeline
// (e.g. the unlabeled branch in the supervised comparator) cannot shift the
// draws seen by another part.
struct Streams {
  Rng labeled_order, unlabeled_order, labeled_clip, unlabeled_clip, drop_lab, drop_unlab, mix;

  explicit Streams(std::uint64_t seed)
      : labeled_order(Rng::substream(seed, 1)),
        unlabeled_order(Rng::substream(seed, 2)),
        labeled_clip(Rng::substream(seed, 3)),
        unlabeled_clip(Rng::substream(seed, 4)),
        drop_lab(Rng::substream(seed, 5)),
        drop_unlab(Rng::substream(seed, 6)),
        mix(Rng::substream(seed, 7)) {}
};

// Cycles through a shuffled index order, reshuffling on wrap-around.
class IndexCycler {
 public:
  IndexCycler(size_t n, Rng& rng) : rng_(rng), order_(n) {
    for (size_t i = 0; i < n; ++i) order_[i] = i;
    rng_.shuffle(order_.begin(), order_.end());
  }

  std::vector<size_t> next(size_t count) {
    std::vector<size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(order_.begin(), order_.end());
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  Rng& rng_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
};

superimage::PairConfig pair_config(const TrainConfig& cfg) {
  superimage::PairConfig pc;
  pc.frames_fast = cfg.frames_fast;
  pc.frames_slow = cfg.frames_slow;
  pc.side = cfg.super_side;
  pc.pad_value = cfg.pad_value;
  pc.order = cfg.frame_order;
  pc.mode = sampling::SampleMode::kRandomInSegment;
  return pc;
}

superimage::ClipTransform crop_transform(const TrainConfig& cfg, int frame_side) {
  if (!cfg.crop_enabled) return nullptr;
  const augment::CropParams params = cfg.crop;
  return [params, frame_side](sampling::FrameSequence clip, Rng& rng) {
    return augment::random_resized_crop_clip(std::move(clip), frame_side, params, rng);
  };
}

// One u64 sub-seed is drawn per clip up front; clip construction itself can
// then run in parallel without reordering any stream.
std::vector<SuperImage> build_fast_batch(const std::vector<const ManifestRecord*>& records,
                                         const TrainConfig& cfg, sampling::FrameCache* cache,
                                         Rng& clip_stream) {
  const superimage::PairConfig pc = pair_config(cfg);
  const int frame_side = cfg.super_side / superimage::grid_dims(cfg.frames_fast).side;
  const superimage::ClipTransform transform = crop_transform(cfg, frame_side);

  std::vector<std::uint64_t> seeds(records.size());
  for (auto& s : seeds) s = clip_stream.next_u64();

  std::vector<SuperImage> out(records.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    try {
      Rng rng(seeds[i]);
      out[i] = superimage::super_image_single(records[i]->video, cfg.frames_fast, pc, rng, cache,
                                              transform);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::pair<std::vector<SuperImage>, std::vector<SuperImage>> build_pair_batch(
    const std::vector<const ManifestRecord*>& records, const TrainConfig& cfg,
    sampling::FrameCache* cache, Rng& clip_stream) {
  const superimage::PairConfig pc = pair_config(cfg);
  const int fast_side = cfg.super_side / superimage::grid_dims(cfg.frames_fast).side;
  const int slow_side = cfg.super_side / superimage::grid_dims(cfg.frames_slow).side;
  const superimage::ClipTransform fast_t = crop_transform(cfg, fast_side);
  const superimage::ClipTransform slow_t = crop_transform(cfg, slow_side);

  std::vector<std::uint64_t> seeds(records.size());
  for (auto& s : seeds) s = clip_stream.next_u64();

  std::vector<SuperImage> fast(records.size()), slow(records.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    try {
      Rng rng(seeds[i]);
      fast[i] = superimage::super_image_single(records[i]->video, cfg.frames_fast, pc, rng, cache,
                                               fast_t);
      slow[i] = superimage::super_image_single(records[i]->video, cfg.frames_slow, pc, rng, cache,
                                               slow_t);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return {std::move(fast), std::move(slow)};
}

nn::EncoderSpec check_encoder(const TrainConfig& cfg, const ReferenceEncoder& enc, int num_classes) {
  const nn::EncoderSpec& spec = enc.spec();
  if (spec.input_side != cfg.super_side)
    throw ConfigError("encoder input side " + std::to_string(spec.input_side) +
                      " does not match super-image side " + std::to_string(cfg.super_side));
  if (spec.num_classes != num_classes)
    throw ConfigError("encoder classes " + std::to_string(spec.num_classes) +
                      " do not match dataset classes " + std::to_string(num_classes));
  return spec;
}

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    if (!out_) throw DataError("cannot write metrics file: " + path);
  }

  void write(const EpochMetrics& m) {
    if (!out_.is_open()) return;
    // wall_time is intentionally not serialized: metrics files must be
    // byte-identical across reruns with the same seed.
    nlohmann::json j{{"epoch", m.epoch},           {"l_sup", m.l_sup}, {"l_ic", m.l_ic},
                     {"l_gc", m.l_gc},             {"total", m.total}, {"lr", m.lr},
                     {"pseudo_accept_rate", m.pseudo_accept_rate}};
    out_ << j.dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

void check_loss_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string(what) + " is not finite");
}

void save_epoch_checkpoint(const TrainConfig& cfg, const ReferenceEncoder& enc,
                           const optim::AdamW<float>& opt, int epoch) {
  if (cfg.checkpoint_path.empty()) return;
  encoder::OptimizerSnapshot snap{opt.first_moment(), opt.second_moment(), opt.step_count()};
  encoder::save_checkpoint(cfg.checkpoint_path, enc, &snap, epoch);
}

std::vector<const ManifestRecord*> pick(const DatasetManifest& manifest,
                                        const std::vector<size_t>& idx) {
  std::vector<const ManifestRecord*> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(&manifest.records[i]);
  return out;
}

// Shared phase-2 step scheduler. The labeled and unlabeled streams are kept
// apart so the supervised comparator can replay the labeled side bit-exactly
// while never touching the unlabeled branch.
struct Phase2Schedule {
  int steps_per_epoch = 0;
  std::int64_t total_steps = 0;
};

Phase2Schedule phase2_schedule(const TrainConfig& cfg, size_t n_labeled, size_t n_unlabeled) {
  Phase2Schedule s;
  const size_t chunk = static_cast<size_t>(cfg.mu) * cfg.labeled_batch;
  if (n_unlabeled > 0) {
    s.steps_per_epoch = std::max<size_t>(1, n_unlabeled / chunk);
  } else {
    s.steps_per_epoch = (n_labeled + cfg.labeled_batch - 1) / cfg.labeled_batch;
  }
  s.total_steps = static_cast<std::int64_t>(s.steps_per_epoch) * cfg.phase2_epochs;
  return s;
}

// The labeled half of a phase-2 step: build, forward, cross-entropy, and
// backward. Used identically by train_phase2 and the supervised baseline.
double labeled_step(const TrainConfig& cfg, const DatasetManifest& labeled,
                    const std::vector<size_t>& idx, ReferenceEncoder& enc,
                    sampling::FrameCache* cache, Streams& streams, std::vector<float>& grad) {
  const auto records = pick(labeled, idx);
  const auto batch = build_fast_batch(records, cfg, cache, streams.labeled_clip);
  const nn::Mat<float> inputs = enc.to_input(batch);
  auto fwd = encoder::forward_batch(enc.net(), inputs, true, &streams.drop_lab);

  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto* rec : records) labels.push_back(rec->label);

  const float l_sup = losses::cross_entropy_smoothed(fwd.logits, labels, cfg.label_smoothing);
  const nn::Mat<float> dlogits =
      losses::cross_entropy_smoothed_grad(fwd.logits, labels, cfg.label_smoothing);
  encoder::backward_batch(enc.net(), fwd, dlogits, grad);
  return l_sup;
}

struct UnlabeledResult {
  double l_ic = 0, l_gc = 0;
  double accept_rate = 1.0;
  int rows = 0;
};

// The unlabeled half of a phase-2 step: both pathways through the shared
// encoder, pseudo-labels, instance + group contrastive losses (or the
// consistency baseline), and backward with the configured weights.
UnlabeledResult unlabeled_step(const TrainConfig& cfg, const DatasetManifest& unlabeled,
                               const std::vector<size_t>& idx, ReferenceEncoder& enc,
                               sampling::FrameCache* cache, Streams& streams,
                               std::vector<float>& grad) {
  UnlabeledResult res;
  res.rows = static_cast<int>(idx.size());
  if (res.rows < 2) return res;  // no negatives: skip the contrastive terms

  const auto records = pick(unlabeled, idx);
  auto [fast, slow] = build_pair_batch(records, cfg, cache, streams.unlabeled_clip);
  const nn::Mat<float> fast_in = enc.to_input(fast);
  const nn::Mat<float> slow_in = enc.to_input(slow);
  auto fwd_fast = encoder::forward_batch(enc.net(), fast_in, true, &streams.drop_unlab);
  auto fwd_slow = encoder::forward_batch(enc.net(), slow_in, true, &streams.drop_unlab);
  const nn::Mat<float>& zf = fwd_fast.logits;
  const nn::Mat<float>& zs = fwd_slow.logits;

  nn::Mat<float> dzf = nn::Mat<float>::Zero(zf.rows(), zf.cols());
  nn::Mat<float> dzs = nn::Mat<float>::Zero(zs.rows(), zs.cols());

  if (cfg.loss_mode == LossMode::kConsistency) {
    // FixMatch-style ablation: the fast (primary) view supplies pseudo-labels,
    // the slow view is pushed toward them.
    nn::Mat<float> dstrong;
    res.l_ic = losses::pseudo_consistency_loss(zf, zs, cfg.consistency_threshold, &dstrong);
    dzs = cfg.consistency_weight * dstrong;
    const nn::Mat<float> probs = losses::softmax_rows(zf);
    int accepted = 0;
    for (int r = 0; r < res.rows; ++r)
      if (probs(r, losses::argmax_row(probs, r)) >= cfg.consistency_threshold) ++accepted;
    res.accept_rate = static_cast<double>(accepted) / res.rows;
    res.l_ic *= cfg.consistency_weight;
  } else {
    nn::Mat<float> dzf_ic, dzs_ic;
    res.l_ic = losses::instance_contrastive_loss<float>(zf, zs, cfg.tau, &dzf_ic, &dzs_ic);

    const PseudoLabels pf = pseudo_label(zf, cfg.pseudo_threshold);
    const PseudoLabels ps = pseudo_label(zs, cfg.pseudo_threshold);
    res.accept_rate = 0.5 * (pf.accept_rate + ps.accept_rate);
    const auto summary = losses::group_averages<float>(zf, zs, pf.labels, ps.labels,
                                                       enc.spec().num_classes, &pf.accept,
                                                       &ps.accept);
    nn::Mat<float> dmf, dms;
    res.l_gc = losses::group_contrastive_loss<float>(summary, cfg.tau, &dmf, &dms);
    nn::Mat<float> dzf_gc = nn::Mat<float>::Zero(zf.rows(), zf.cols());
    nn::Mat<float> dzs_gc = nn::Mat<float>::Zero(zs.rows(), zs.cols());
    losses::scatter_group_grad(summary, true, pf.labels, &pf.accept, dmf, dzf_gc);
    losses::scatter_group_grad(summary, false, ps.labels, &ps.accept, dms, dzs_gc);

    dzf = cfg.gamma * dzf_ic + cfg.beta * dzf_gc;
    dzs = cfg.gamma * dzs_ic + cfg.beta * dzs_gc;
  }

  check_loss_finite(res.l_ic, "contrastive loss");
  check_loss_finite(res.l_gc, "group contrastive loss");
  encoder::backward_batch(enc.net(), fwd_fast, dzf, grad);
  encoder::backward_batch(enc.net(), fwd_slow, dzs, grad);
  return res;
}

std::vector<EpochMetrics> run_phase2_like(const TrainConfig& cfg, const DatasetManifest& labeled,
                                          const DatasetManifest& unlabeled, ReferenceEncoder& enc,
                                          sampling::FrameCache* cache, const StepHook& hook,
                                          bool with_unlabeled_losses) {
  if (labeled.records.empty()) throw ConfigError("phase 2: labeled manifest is empty");
  check_encoder(cfg, enc, labeled.num_classes);
  if (with_unlabeled_losses && unlabeled.records.empty())
    std::fprintf(stderr,
                 "warning: unlabeled manifest is empty; phase 2 degenerates to supervised "
                 "fine-tuning\n");

  Streams streams(cfg.seed);
  IndexCycler labeled_cycler(labeled.records.size(), streams.labeled_order);
  const Phase2Schedule sched = phase2_schedule(cfg, labeled.records.size(), unlabeled.records.size());
  optim::AdamW<float> opt(enc.net().params().size(), static_cast<float>(cfg.weight_decay));
  MetricsWriter metrics_out(cfg.metrics_path);

  std::vector<EpochMetrics> all;
  std::vector<float> grad(enc.net().params().size());
  const size_t chunk = static_cast<size_t>(cfg.mu) * cfg.labeled_batch;
  std::int64_t global_step = 0;
  bool stop = false;

  for (int epoch = 0; epoch < cfg.phase2_epochs && !stop; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochMetrics em;
    em.epoch = epoch;
    double accept_sum = 0;
    int accept_batches = 0;

    std::vector<size_t> unlabeled_order(unlabeled.records.size());
    for (size_t i = 0; i < unlabeled_order.size(); ++i) unlabeled_order[i] = i;
    streams.unlabeled_order.shuffle(unlabeled_order.begin(), unlabeled_order.end());

    for (int step = 0; step < sched.steps_per_epoch && !stop; ++step) {
      std::fill(grad.begin(), grad.end(), 0.0f);

      const auto labeled_idx = labeled_cycler.next(cfg.labeled_batch);
      const double l_sup = labeled_step(cfg, labeled, labeled_idx, enc, cache, streams, grad);
      check_loss_finite(l_sup, "supervised loss");

      UnlabeledResult ur;
      if (with_unlabeled_losses && !unlabeled.records.empty()) {
        const size_t lo = static_cast<size_t>(step) * chunk;
        const size_t hi = std::min(lo + chunk, unlabeled_order.size());
        const std::vector<size_t> unlabeled_idx(unlabeled_order.begin() + lo,
                                                unlabeled_order.begin() + hi);
        ur = unlabeled_step(cfg, unlabeled, unlabeled_idx, enc, cache, streams, grad);
        accept_sum += ur.accept_rate;
        ++accept_batches;
      }

      const double lr = optim::cosine_lr(global_step, sched.total_steps, cfg.base_lr);
      opt.step(enc.net().params(), grad, static_cast<float>(lr));
      ++global_step;

      em.l_sup += l_sup;
      em.l_ic += ur.l_ic;
      em.l_gc += ur.l_gc;
      em.lr = lr;
      if (hook) hook(static_cast<int>(global_step), enc.net().params());
      if (cfg.max_steps > 0 && global_step >= cfg.max_steps) stop = true;
    }

    const int steps_done = std::max(1, std::min<int>(sched.steps_per_epoch,
                                                     static_cast<int>(global_step) -
                                                         epoch * sched.steps_per_epoch));
    em.l_sup /= steps_done;
    em.l_ic /= steps_done;
    em.l_gc /= steps_done;
    em.total = losses::total_loss<double>(em.l_sup, em.l_ic, em.l_gc,
                                          cfg.loss_mode == LossMode::kConsistency ? 1.0 : cfg.gamma,
                                          cfg.loss_mode == LossMode::kConsistency ? 0.0 : cfg.beta);
    em.pseudo_accept_rate = accept_batches > 0 ? accept_sum / accept_batches : 0.0;
    em.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    metrics_out.write(em);
    save_epoch_checkpoint(cfg, enc, opt, epoch);
    all.push_back(em);
  }
  return all;
}

}  // namespace

std::vector<EpochMetrics> train_phase1(const TrainConfig& cfg, const DatasetManifest& labeled,
                                       ReferenceEncoder& enc, sampling::FrameCache* cache,
                                       const StepHook& hook) {
  if (labeled.records.empty()) throw ConfigError("phase 1: labeled manifest is empty");
  const nn::EncoderSpec spec = check_encoder(cfg, enc, labeled.num_classes);
  const int classes = spec.num_classes;

  Streams streams(cfg.seed);
  const int steps_per_epoch =
      static_cast<int>((labeled.records.size() + cfg.labeled_batch - 1) / cfg.labeled_batch);
  const std::int64_t total_steps = static_cast<std::int64_t>(steps_per_epoch) * cfg.phase1_epochs;
  optim::AdamW<float> opt(enc.net().params().size(), static_cast<float>(cfg.weight_decay));
  MetricsWriter metrics_out(cfg.metrics_path);

  std::vector<EpochMetrics> all;
  std::vector<float> grad(enc.net().params().size());
  std::vector<size_t> order(labeled.records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::int64_t global_step = 0;
  bool stop = false;

  for (int epoch = 0; epoch < cfg.phase1_epochs && !stop; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochMetrics em;
    em.epoch = epoch;
    streams.labeled_order.shuffle(order.begin(), order.end());
    int steps_done = 0;

    for (size_t lo = 0; lo < order.size() && !stop; lo += cfg.labeled_batch) {
      const size_t hi = std::min(lo + cfg.labeled_batch, order.size());
      const std::vector<size_t> idx(order.begin() + lo, order.begin() + hi);
      const auto records = pick(labeled, idx);
      auto batch = build_fast_batch(records, cfg, cache, streams.labeled_clip);

      // Smoothed one-hot targets, then batch-level Mixup or CutMix.
      nn::Mat<float> targets(static_cast<Eigen::Index>(records.size()), classes);
      targets.setConstant(cfg.label_smoothing / classes);
      for (size_t i = 0; i < records.size(); ++i)
        targets(static_cast<Eigen::Index>(i), records[i]->label) += 1.0f - cfg.label_smoothing;

      std::vector<Image> pixels;
      pixels.reserve(batch.size());
      for (auto& si : batch) pixels.push_back(std::move(si.image));
      const bool have_mixup = cfg.mix.mixup_alpha > 0;
      const bool have_cutmix = cfg.mix.cutmix_alpha > 0;
      if (have_mixup || have_cutmix) {
        const bool use_mixup =
            have_mixup && (!have_cutmix || streams.mix.uniform() < cfg.mix.switch_prob);
        if (use_mixup) {
          const float lambda = static_cast<float>(
              streams.mix.beta(cfg.mix.mixup_alpha, cfg.mix.mixup_alpha));
          augment::mixup(pixels, targets, lambda);
        } else {
          const float lambda = static_cast<float>(
              streams.mix.beta(cfg.mix.cutmix_alpha, cfg.mix.cutmix_alpha));
          augment::cutmix(pixels, targets, lambda, streams.mix);
        }
      }
      for (size_t i = 0; i < batch.size(); ++i) batch[i].image = std::move(pixels[i]);

      const nn::Mat<float> inputs = enc.to_input(batch);
      auto fwd = encoder::forward_batch(enc.net(), inputs, true, &streams.drop_lab);
      const float loss = losses::cross_entropy_soft(fwd.logits, targets);
      check_loss_finite(loss, "supervised loss");
      const nn::Mat<float> dlogits = losses::cross_entropy_soft_grad(fwd.logits, targets);

      std::fill(grad.begin(), grad.end(), 0.0f);
      encoder::backward_batch(enc.net(), fwd, dlogits, grad);
      const double lr = optim::cosine_lr(global_step, total_steps, cfg.base_lr);
      opt.step(enc.net().params(), grad, static_cast<float>(lr));
      ++global_step;
      ++steps_done;

      em.l_sup += loss;
      em.lr = lr;
      if (hook) hook(static_cast<int>(global_step), enc.net().params());
      if (cfg.max_steps > 0 && global_step >= cfg.max_steps) stop = true;
    }

    em.l_sup /= std::max(1, steps_done);
    em.total = em.l_sup;
    em.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    metrics_out.write(em);
    save_epoch_checkpoint(cfg, enc, opt, epoch);
    all.push_back(em);
  }
  return all;
}

std::vector<EpochMetrics> train_phase2(const TrainConfig& cfg, const DatasetManifest& labeled,
                                       const DatasetManifest& unlabeled, ReferenceEncoder& enc,
                                       sampling::FrameCache* cache, const StepHook& hook) {
  return run_phase2_like(cfg, labeled, unlabeled, enc, cache, hook, true);
}

std::vector<EpochMetrics> train_supervised_baseline(const TrainConfig& cfg,
                                                    const DatasetManifest& labeled,
                                                    const DatasetManifest& unlabeled,
                                                    ReferenceEncoder& enc,
                                                    sampling::FrameCache* cache,
                                                    const StepHook& hook) {
  return run_phase2_like(cfg, labeled, unlabeled, enc, cache, hook, false);
}

}  // namespace sitar::train
