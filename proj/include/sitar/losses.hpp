#pragma once

#include <cmath>
#include <vector>

#include "sitar/errors.hpp"
#include "sitar/nn.hpp"

namespace sitar::losses {

template <class T>
using Mat = nn::Mat<T>;

template <class T>
struct ContrastiveConfig {
  T temperature = T(0.5);
  T gamma = T(0.6);
  T beta = T(1.0);
};

// First index holding the row maximum; ties resolve to the lowest class.
template <class T>
int argmax_row(const Mat<T>& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(row, c) > m(row, best)) best = static_cast<int>(c);
  return best;
}

template <class T>
Mat<T> softmax_rows(const Mat<T>& logits) {
  Mat<T> p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const T mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

template <class T>
void check_finite(const Mat<T>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

// Mean over the batch of -sum_c q_c log softmax(logits)_c with
// q = (1-eps) * onehot + eps / C.
template <class T>
T cross_entropy_smoothed(const Mat<T>& logits, const std::vector<int>& labels, T smoothing) {
  const int batch = static_cast<int>(logits.rows());
  const int classes = static_cast<int>(logits.cols());
  if (batch == 0 || static_cast<int>(labels.size()) != batch)
    throw std::invalid_argument("cross_entropy_smoothed: labels must match batch");
  if (!(smoothing >= T(0) && smoothing < T(1)))
    throw std::invalid_argument("cross_entropy_smoothed: smoothing must lie in [0, 1)");
  check_finite(logits, "cross_entropy_smoothed");

  T total = T(0);
  for (int r = 0; r < batch; ++r) {
    if (labels[r] < 0 || labels[r] >= classes)
      throw std::invalid_argument("cross_entropy_smoothed: label out of range");
    const T mx = logits.row(r).maxCoeff();
    const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    // -sum_c q_c (logit_c - lse) = lse - (1-eps)*logit_y - (eps/C)*sum_c logit_c
    total += lse - (T(1) - smoothing) * logits(r, labels[r]) -
             (smoothing / T(classes)) * logits.row(r).sum();
  }
  return total / T(batch);
}

template <class T>
Mat<T> cross_entropy_smoothed_grad(const Mat<T>& logits, const std::vector<int>& labels,
                                   T smoothing) {
  const int batch = static_cast<int>(logits.rows());
  const int classes = static_cast<int>(logits.cols());
  Mat<T> grad = softmax_rows(logits);
  for (int r = 0; r < batch; ++r) {
    grad.row(r).array() -= smoothing / T(classes);
    grad(r, labels[r]) -= T(1) - smoothing;
  }
  return grad / T(batch);
}

// Soft-target cross entropy (targets are probability rows), used with
// Mixup/CutMix-mixed label distributions.
template <class T>
T cross_entropy_soft(const Mat<T>& logits, const Mat<T>& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw std::invalid_argument("cross_entropy_soft: shape mismatch");
  if (logits.rows() == 0) throw std::invalid_argument("cross_entropy_soft: empty batch");
  check_finite(logits, "cross_entropy_soft");
  T total = T(0);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    total += targets.row(r).sum() * lse - (targets.row(r).array() * logits.row(r).array()).sum();
  }
  return total / T(logits.rows());
}

template <class T>
Mat<T> cross_entropy_soft_grad(const Mat<T>& logits, const Mat<T>& targets) {
  Mat<T> grad = softmax_rows(logits);
  grad -= targets;
  return grad / T(logits.rows());
}

// h(u, v) = exp(cos(u, v) / tau).
template <class T>
T sim_h(const Eigen::Ref<const Eigen::Matrix<T, 1, Eigen::Dynamic>>& u,
        const Eigen::Ref<const Eigen::Matrix<T, 1, Eigen::Dynamic>>& v, T tau) {
  if (tau <= T(0)) throw std::invalid_argument("sim_h: temperature must be positive");
  const T nu = u.norm();
  const T nv = v.norm();
  if (nu == T(0) || nv == T(0)) throw std::invalid_argument("sim_h: zero vector");
  return std::exp((u.dot(v) / (nu * nv)) / tau);
}

namespace detail {

// Rows scaled to unit norm; zero rows are rejected.
template <class T>
Mat<T> normalize_rows(const Mat<T>& z, const char* what) {
  Mat<T> u = z;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    const T n = u.row(r).norm();
    if (n == T(0)) throw std::invalid_argument(std::string(what) + ": zero-norm row");
    u.row(r) /= n;
  }
  return u;
}

// Chain rule through row normalization: given dL/dU for U = rows of Z
// normalized, produce dL/dZ.
template <class T>
Mat<T> normalize_rows_backward(const Mat<T>& z, const Mat<T>& u, const Mat<T>& du) {
  Mat<T> dz(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const T n = z.row(r).norm();
    const T dot = du.row(r).dot(u.row(r));
    dz.row(r) = (du.row(r) - dot * u.row(r)) / n;
  }
  return dz;
}

// Shared NT-Xent-style core. anchors[i] lists candidate columns per anchor:
// the first candidate is the positive, the rest are negatives. sims holds
// cos/tau for every ordered pair. Loss is the mean over anchors of
// -log softmax(positive). If dsims is non-null the gradient w.r.t. sims is
// accumulated there (same mean weighting).
template <class T>
T nt_xent_over_candidates(const Mat<T>& sims,
                          const std::vector<std::pair<int, std::vector<int>>>& anchors,
                          Mat<T>* dsims) {
  if (anchors.empty()) return T(0);
  T total = T(0);
  for (const auto& [a, cand] : anchors) {
    T mx = sims(a, cand[0]);
    for (int j : cand) mx = std::max(mx, sims(a, j));
    T denom = T(0);
    for (int j : cand) denom += std::exp(sims(a, j) - mx);
    const T log_denom = mx + std::log(denom);
    total += log_denom - sims(a, cand[0]);
    if (dsims) {
      const T inv = T(1) / (T(anchors.size()));
      for (size_t c = 0; c < cand.size(); ++c) {
        const T w = std::exp(sims(a, cand[c]) - log_denom);
        (*dsims)(a, cand[c]) += w * inv;
      }
      (*dsims)(a, cand[0]) -= inv;
    }
  }
  return total / T(anchors.size());
}

}  // namespace detail

// Eq.-2-style instance contrastive loss over a batch of B videos seen by two
// pathways. Row i of zf and zs must come from the same video. The loss is the
// mean over the 2B ordered positive pairs; every anchor sees 2B-2 negatives.
template <class T>
T instance_contrastive_loss(const Mat<T>& zf, const Mat<T>& zs, T tau, Mat<T>* dzf = nullptr,
                            Mat<T>* dzs = nullptr) {
  const int b = static_cast<int>(zf.rows());
  if (b == 0) throw std::invalid_argument("instance_contrastive_loss: empty batch");
  if (zs.rows() != b || zs.cols() != zf.cols())
    throw std::invalid_argument("instance_contrastive_loss: shape mismatch");
  if (tau <= T(0)) throw std::invalid_argument("instance_contrastive_loss: tau must be positive");
  check_finite(zf, "instance_contrastive_loss");
  check_finite(zs, "instance_contrastive_loss");

  Mat<T> z(2 * b, zf.cols());
  z.topRows(b) = zf;
  z.bottomRows(b) = zs;
  const Mat<T> u = detail::normalize_rows(z, "instance_contrastive_loss");
  const Mat<T> sims = (u * u.transpose()) / tau;

  std::vector<std::pair<int, std::vector<int>>> anchors;
  anchors.reserve(2 * b);
  for (int a = 0; a < 2 * b; ++a) {
    const int vid = a % b;
    std::vector<int> cand;
    cand.reserve(2 * b - 1);
    cand.push_back(a < b ? vid + b : vid);  // positive: same video, other pathway
    for (int j = 0; j < 2 * b; ++j)
      if (j % b != vid) cand.push_back(j);
    anchors.emplace_back(a, std::move(cand));
  }

  Mat<T> dsims;
  if (dzf || dzs) dsims = Mat<T>::Zero(2 * b, 2 * b);
  const T loss = detail::nt_xent_over_candidates(sims, anchors, (dzf || dzs) ? &dsims : nullptr);

  if (dzf || dzs) {
    const Mat<T> du = ((dsims + dsims.transpose()) * u) / tau;
    const Mat<T> dz = detail::normalize_rows_backward(z, u, du);
    if (dzf) *dzf = dz.topRows(b);
    if (dzs) *dzs = dz.bottomRows(b);
  }
  return loss;
}

// Per-class mean representations per pathway (Eq. 3). Classes with no
// accepted members in a pathway are masked out rather than averaged.
template <class T>
struct GroupSummary {
  Mat<T> means_fast, means_slow;  // C x C (class index -> mean logit row)
  std::vector<int> counts_fast, counts_slow;
  std::vector<char> present_fast, present_slow;

  int num_classes() const { return static_cast<int>(counts_fast.size()); }
};

template <class T>
GroupSummary<T> group_averages(const Mat<T>& zf, const Mat<T>& zs, const std::vector<int>& yf,
                               const std::vector<int>& ys, int num_classes,
                               const std::vector<char>* accept_f = nullptr,
                               const std::vector<char>* accept_s = nullptr) {
  const int b = static_cast<int>(zf.rows());
  if (static_cast<int>(yf.size()) != b || static_cast<int>(ys.size()) != zs.rows())
    throw std::invalid_argument("group_averages: pseudo-labels must align with rows");
  GroupSummary<T> s;
  s.means_fast = Mat<T>::Zero(num_classes, zf.cols());
  s.means_slow = Mat<T>::Zero(num_classes, zf.cols());
  s.counts_fast.assign(num_classes, 0);
  s.counts_slow.assign(num_classes, 0);
  s.present_fast.assign(num_classes, 0);
  s.present_slow.assign(num_classes, 0);

  auto accumulate = [&](const Mat<T>& z, const std::vector<int>& y, const std::vector<char>* accept,
                        Mat<T>& means, std::vector<int>& counts, std::vector<char>& present) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (accept && !(*accept)[i]) continue;
      if (y[i] < 0 || y[i] >= num_classes)
        throw std::invalid_argument("group_averages: pseudo-label out of range");
      means.row(y[i]) += z.row(i);
      ++counts[y[i]];
    }
    for (int c = 0; c < num_classes; ++c) {
      if (counts[c] > 0) {
        means.row(c) /= T(counts[c]);
        present[c] = 1;
      }
    }
  };
  accumulate(zf, yf, accept_f, s.means_fast, s.counts_fast, s.present_fast);
  accumulate(zs, ys, accept_s, s.means_slow, s.counts_slow, s.present_slow);
  return s;
}

// Eq.-4 group contrastive loss over group means. Positive pairs exist for
// classes present in both pathways; negatives are all other present groups
// in either pathway. Returns 0 when no class is present in both pathways.
// Optional gradients are w.r.t. the group means.
template <class T>
T group_contrastive_loss(const GroupSummary<T>& s, T tau, Mat<T>* dmeans_fast = nullptr,
                         Mat<T>* dmeans_slow = nullptr) {
  if (tau <= T(0)) throw std::invalid_argument("group_contrastive_loss: tau must be positive");
  const int classes = s.num_classes();
  if (dmeans_fast) *dmeans_fast = Mat<T>::Zero(classes, s.means_fast.cols());
  if (dmeans_slow) *dmeans_slow = Mat<T>::Zero(classes, s.means_slow.cols());

  // Flatten present groups: row index -> (pathway, class).
  std::vector<std::pair<int, int>> tags;  // (0=fast|1=slow, class)
  std::vector<int> row_of_fast(classes, -1), row_of_slow(classes, -1);
  for (int c = 0; c < classes; ++c)
    if (s.present_fast[c]) {
      row_of_fast[c] = static_cast<int>(tags.size());
      tags.emplace_back(0, c);
    }
  for (int c = 0; c < classes; ++c)
    if (s.present_slow[c]) {
      row_of_slow[c] = static_cast<int>(tags.size());
      tags.emplace_back(1, c);
    }
  if (tags.empty()) return T(0);

  Mat<T> g(static_cast<int>(tags.size()), s.means_fast.cols());
  for (size_t r = 0; r < tags.size(); ++r)
    g.row(static_cast<Eigen::Index>(r)) =
        tags[r].first == 0 ? s.means_fast.row(tags[r].second) : s.means_slow.row(tags[r].second);
  check_finite(g, "group_contrastive_loss");

  const Mat<T> u = detail::normalize_rows(g, "group_contrastive_loss");
  const Mat<T> sims = (u * u.transpose()) / tau;

  std::vector<std::pair<int, std::vector<int>>> anchors;
  for (int c = 0; c < classes; ++c) {
    if (row_of_fast[c] < 0 || row_of_slow[c] < 0) continue;
    for (int dir = 0; dir < 2; ++dir) {
      const int a = dir == 0 ? row_of_fast[c] : row_of_slow[c];
      const int pos = dir == 0 ? row_of_slow[c] : row_of_fast[c];
      std::vector<int> cand{pos};
      for (size_t j = 0; j < tags.size(); ++j)
        if (tags[j].second != c) cand.push_back(static_cast<int>(j));
      anchors.emplace_back(a, std::move(cand));
    }
  }
  if (anchors.empty()) return T(0);

  const bool want_grad = dmeans_fast || dmeans_slow;
  Mat<T> dsims;
  if (want_grad) dsims = Mat<T>::Zero(g.rows(), g.rows());
  const T loss = detail::nt_xent_over_candidates(sims, anchors, want_grad ? &dsims : nullptr);

  if (want_grad) {
    const Mat<T> du = ((dsims + dsims.transpose()) * u) / tau;
    const Mat<T> dg = detail::normalize_rows_backward(g, u, du);
    for (size_t r = 0; r < tags.size(); ++r) {
      if (tags[r].first == 0 && dmeans_fast)
        dmeans_fast->row(tags[r].second) = dg.row(static_cast<Eigen::Index>(r));
      if (tags[r].first == 1 && dmeans_slow)
        dmeans_slow->row(tags[r].second) = dg.row(static_cast<Eigen::Index>(r));
    }
  }
  return loss;
}

// Spreads d(loss)/d(group mean) back onto member rows: each accepted row
// with pseudo-label l receives dmean_l / count_l. Accumulates into dz.
template <class T>
void scatter_group_grad(const GroupSummary<T>& s, bool fast_pathway, const std::vector<int>& labels,
                        const std::vector<char>* accept, const Mat<T>& dmeans, Mat<T>& dz) {
  const auto& counts = fast_pathway ? s.counts_fast : s.counts_slow;
  for (Eigen::Index i = 0; i < dz.rows(); ++i) {
    if (accept && !(*accept)[i]) continue;
    const int l = labels[i];
    if (counts[l] > 0) dz.row(i) += dmeans.row(l) / T(counts[l]);
  }
}

// FixMatch-style baseline: cross entropy of strong-view logits against the
// argmax pseudo-labels of the weak view, masked by weak-view confidence and
// averaged over the full batch. Pseudo-labels are constants (no gradient
// flows into the weak view).
template <class T>
T pseudo_consistency_loss(const Mat<T>& weak_logits, const Mat<T>& strong_logits, T threshold,
                          Mat<T>* dstrong = nullptr) {
  if (weak_logits.rows() != strong_logits.rows() || weak_logits.cols() != strong_logits.cols())
    throw std::invalid_argument("pseudo_consistency_loss: shape mismatch");
  const int b = static_cast<int>(weak_logits.rows());
  if (b == 0) throw std::invalid_argument("pseudo_consistency_loss: empty batch");
  check_finite(weak_logits, "pseudo_consistency_loss");
  check_finite(strong_logits, "pseudo_consistency_loss");

  const Mat<T> weak_probs = softmax_rows(weak_logits);
  if (dstrong) *dstrong = Mat<T>::Zero(b, weak_logits.cols());
  T total = T(0);
  for (int r = 0; r < b; ++r) {
    const int label = argmax_row(weak_probs, r);
    if (weak_probs(r, label) < threshold) continue;
    const T mx = strong_logits.row(r).maxCoeff();
    const T lse = mx + std::log((strong_logits.row(r).array() - mx).exp().sum());
    total += lse - strong_logits(r, label);
    if (dstrong) {
      dstrong->row(r) = (strong_logits.row(r).array() - lse).exp().matrix() / T(b);
      (*dstrong)(r, label) -= T(1) / T(b);
    }
  }
  return total / T(b);
}

// Eq. 5.
template <class T>
T total_loss(T l_sup, T l_ic, T l_gc, T gamma, T beta) {
  return l_sup + gamma * l_ic + beta * l_gc;
}

}  // namespace sitar::losses
