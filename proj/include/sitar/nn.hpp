#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sitar/rng.hpp"

namespace sitar::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct EncoderSpec {
  int input_side = 96;
  int num_classes = 8;
  int width = 32;
  int depth = 2;
  int patch_size = 16;
  double drop_path_rate = 0.1;

  void validate() const {
    if (input_side < 1 || num_classes < 1 || width < 1 || depth < 0 || patch_size < 1)
      throw std::invalid_argument("EncoderSpec: all dimensions must be positive");
    if (input_side % patch_size != 0)
      throw std::invalid_argument("EncoderSpec: input_side must be divisible by patch_size");
    if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0))
      throw std::invalid_argument("EncoderSpec: drop_path_rate must lie in [0, 1)");
  }

  bool operator==(const EncoderSpec&) const = default;
};

struct ParamInfo {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 0;
};

// Patch embedding + pre-norm transformer blocks (full attention over all
// tokens, no windowing) + final norm + mean pool + linear head. Forward
// caches per-sample activations so the analytic backward can be checked
// against finite differences parameter by parameter.
template <class T>
class VitNet {
 public:
  explicit VitNet(const EncoderSpec& spec) : spec_(spec) {
    spec_.validate();
    tokens_side_ = spec_.input_side / spec_.patch_size;
    tokens_ = tokens_side_ * tokens_side_;
    patch_dim_ = spec_.patch_size * spec_.patch_size * 3;
    heads_ = (spec_.width % 8 == 0) ? spec_.width / 8 : 1;
    head_dim_ = spec_.width / heads_;
    hidden_ = 2 * spec_.width;
    build_layout();
    params_.assign(total_params_, T(0));
  }

  const EncoderSpec& spec() const { return spec_; }
  int num_params() const { return total_params_; }
  int tokens() const { return tokens_; }
  int input_dim() const { return spec_.input_side * spec_.input_side * 3; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  const std::vector<ParamInfo>& tensors() const { return infos_; }

  // Truncated-normal weights, zero biases, unit norm gains. Passing
  // zero_head leaves the classification head at zero (all-zero logits).
  void init_params(Rng& rng, bool zero_head = false) {
    for (const auto& info : infos_) {
      T* p = params_.data() + info.offset;
      const int n = info.rows * info.cols;
      const std::string leaf = info.name.substr(info.name.rfind('.') + 1);
      const bool is_gain = leaf.ends_with("_g");
      const bool is_bias = leaf.ends_with("_b") || leaf[0] == 'b';
      const bool is_head = leaf.starts_with("head");
      if (is_gain) {
        std::fill(p, p + n, T(1));
      } else if (is_bias || (is_head && zero_head)) {
        std::fill(p, p + n, T(0));
      } else {
        for (int i = 0; i < n; ++i) {
          double v = rng.normal(0.0, 0.02);
          while (std::abs(v) > 0.04) v = rng.normal(0.0, 0.02);
          p[i] = static_cast<T>(v);
        }
      }
    }
  }

  struct BlockCache {
    Mat<T> x_in, u, q, k, v_attn, attn_cat, x_mid, vn, h_pre, h_act;
    std::vector<Mat<T>> attn;              // per-head tokens x tokens softmax rows
    Mat<T> mu1, rstd1, mu2, rstd2;         // tokens x 1 layer-norm stats
    T keep_attn = T(1), keep_mlp = T(1);   // drop-path scale, 0 when dropped
  };

  struct Cache {
    Mat<T> patches;  // tokens x patch_dim
    std::vector<BlockCache> blocks;
    Mat<T> x_last, xf, muf, rstdf;
    Mat<T> pooled;  // 1 x width
  };

  // keep_mask holds depth*2 bytes per sample (attention branch then MLP
  // branch); pass nullptr to run without drop path. Returns 1 x C logits.
  Mat<T> forward_one(const T* x, bool train, const std::uint8_t* keep_mask, Cache* cache) const {
    Cache local;
    Cache& cc = cache ? *cache : local;
    extract_patches(x, cc.patches);

    Mat<T> h = cc.patches * view(idx_patch_w_);
    h.rowwise() += row(idx_patch_b_);
    h += view(idx_pos_);

    cc.blocks.resize(spec_.depth);
    const bool drop_active = train && spec_.drop_path_rate > 0.0 && keep_mask != nullptr;
    const T keep_scale = drop_active ? T(1) / T(1.0 - spec_.drop_path_rate) : T(1);
    for (int b = 0; b < spec_.depth; ++b) {
      BlockCache& bc = cc.blocks[b];
      bc.keep_attn = drop_active ? (keep_mask[2 * b] ? keep_scale : T(0)) : T(1);
      bc.keep_mlp = drop_active ? (keep_mask[2 * b + 1] ? keep_scale : T(0)) : T(1);
      h = block_forward(h, b, bc);
    }

    cc.x_last = h;
    layer_norm(h, row(idx_lnf_g_), row(idx_lnf_b_), cc.xf, cc.muf, cc.rstdf);
    cc.pooled = cc.xf.colwise().mean();
    Mat<T> logits = cc.pooled * view(idx_head_w_);
    logits.rowwise() += row(idx_head_b_);
    return logits;
  }

  // Accumulates this sample's parameter gradient into grad (num_params
  // entries). dlogits is 1 x C.
  void backward_one(const Cache& cc, const Mat<T>& dlogits, T* grad) const {
    gmap(grad, idx_head_w_) += cc.pooled.transpose() * dlogits;
    gmap(grad, idx_head_b_) += dlogits;
    Mat<T> dpooled = dlogits * view(idx_head_w_).transpose();
    Mat<T> dxf = Mat<T>::Ones(tokens_, 1) * (dpooled / T(tokens_));

    Mat<T> dx = layer_norm_backward(dxf, cc.x_last, cc.muf, cc.rstdf, row(idx_lnf_g_),
                                    gmap(grad, idx_lnf_g_), gmap(grad, idx_lnf_b_));

    for (int b = spec_.depth - 1; b >= 0; --b) dx = block_backward(dx, b, cc.blocks[b], grad);

    gmap(grad, idx_patch_w_) += cc.patches.transpose() * dx;
    gmap(grad, idx_patch_b_) += dx.colwise().sum();
    gmap(grad, idx_pos_) += dx;
  }

 private:
  void build_layout() {
    auto add = [&](const std::string& name, int rows, int cols) {
      infos_.push_back({name, total_params_, rows, cols});
      total_params_ += rows * cols;
      return static_cast<int>(infos_.size()) - 1;
    };
    idx_patch_w_ = add("patch_w", patch_dim_, spec_.width);
    idx_patch_b_ = add("patch_b", 1, spec_.width);
    idx_pos_ = add("pos", tokens_, spec_.width);
    block_base_.clear();
    for (int b = 0; b < spec_.depth; ++b) {
      const std::string p = "block" + std::to_string(b) + ".";
      block_base_.push_back(static_cast<int>(infos_.size()));
      add(p + "ln1_g", 1, spec_.width);
      add(p + "ln1_b", 1, spec_.width);
      add(p + "wq", spec_.width, spec_.width);
      add(p + "bq", 1, spec_.width);
      add(p + "wk", spec_.width, spec_.width);
      add(p + "bk", 1, spec_.width);
      add(p + "wv", spec_.width, spec_.width);
      add(p + "bv", 1, spec_.width);
      add(p + "wo", spec_.width, spec_.width);
      add(p + "bo", 1, spec_.width);
      add(p + "ln2_g", 1, spec_.width);
      add(p + "ln2_b", 1, spec_.width);
      add(p + "w1", spec_.width, hidden_);
      add(p + "b1", 1, hidden_);
      add(p + "w2", hidden_, spec_.width);
      add(p + "b2", 1, spec_.width);
    }
    idx_lnf_g_ = add("lnf_g", 1, spec_.width);
    idx_lnf_b_ = add("lnf_b", 1, spec_.width);
    idx_head_w_ = add("head_w", spec_.width, spec_.num_classes);
    idx_head_b_ = add("head_b", 1, spec_.num_classes);
  }

  Eigen::Map<const Mat<T>> view(int idx) const {
    const auto& info = infos_[idx];
    return Eigen::Map<const Mat<T>>(params_.data() + info.offset, info.rows, info.cols);
  }

  RowVec<T> row(int idx) const {
    const auto& info = infos_[idx];
    return Eigen::Map<const RowVec<T>>(params_.data() + info.offset, info.cols);
  }

  Eigen::Map<Mat<T>> gmap(T* grad, int idx) const {
    const auto& info = infos_[idx];
    return Eigen::Map<Mat<T>>(grad + info.offset, info.rows, info.cols);
  }

  void extract_patches(const T* x, Mat<T>& patches) const {
    const int s = spec_.input_side;
    const int p = spec_.patch_size;
    patches.resize(tokens_, patch_dim_);
    for (int ty = 0; ty < tokens_side_; ++ty)
      for (int tx = 0; tx < tokens_side_; ++tx) {
        T* dst = patches.data() + static_cast<std::ptrdiff_t>(ty * tokens_side_ + tx) * patch_dim_;
        for (int dy = 0; dy < p; ++dy) {
          const T* src = x + ((ty * p + dy) * s + tx * p) * 3;
          std::copy(src, src + p * 3, dst + dy * p * 3);
        }
      }
  }

  static constexpr T kLnEps = T(1e-5);

  void layer_norm(const Mat<T>& x, const RowVec<T>& gain, const RowVec<T>& bias, Mat<T>& y,
                  Mat<T>& mu, Mat<T>& rstd) const {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    y.resize(n, d);
    mu.resize(n, 1);
    rstd.resize(n, 1);
    for (int r = 0; r < n; ++r) {
      const T m = x.row(r).mean();
      const T var = (x.row(r).array() - m).square().mean();
      const T rs = T(1) / std::sqrt(var + kLnEps);
      mu(r, 0) = m;
      rstd(r, 0) = rs;
      y.row(r) = ((((x.row(r).array() - m) * rs) * gain.array()) + bias.array()).matrix();
    }
  }

  Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& mu, const Mat<T>& rstd,
                             const RowVec<T>& gain, Eigen::Map<Mat<T>> dgain,
                             Eigen::Map<Mat<T>> dbias) const {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    Mat<T> dx(n, d);
    for (int r = 0; r < n; ++r) {
      const Eigen::Array<T, 1, Eigen::Dynamic> xhat = (x.row(r).array() - mu(r, 0)) * rstd(r, 0);
      const Eigen::Array<T, 1, Eigen::Dynamic> dxhat = dy.row(r).array() * gain.array();
      const T mean_dxhat = dxhat.mean();
      const T mean_dxhat_xhat = (dxhat * xhat).mean();
      dx.row(r) = (rstd(r, 0) * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)).matrix();
      dgain.array() += dy.row(r).array() * xhat;
      dbias.array() += dy.row(r).array();
    }
    return dx;
  }

  static T gelu(T x) { return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2))); }
  static T gelu_grad(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
    return cdf + x * pdf;
  }

  Mat<T> block_forward(const Mat<T>& x, int b, BlockCache& bc) const {
    const int base = block_base_[b];
    bc.x_in = x;
    layer_norm(x, row(base + 0), row(base + 1), bc.u, bc.mu1, bc.rstd1);

    bc.q = bc.u * view(base + 2);
    bc.q.rowwise() += row(base + 3);
    bc.k = bc.u * view(base + 4);
    bc.k.rowwise() += row(base + 5);
    bc.v_attn = bc.u * view(base + 6);
    bc.v_attn.rowwise() += row(base + 7);

    bc.attn.assign(heads_, Mat<T>());
    bc.attn_cat.resize(tokens_, spec_.width);
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(head_dim_));
    for (int h = 0; h < heads_; ++h) {
      const auto qh = bc.q.middleCols(h * head_dim_, head_dim_);
      const auto kh = bc.k.middleCols(h * head_dim_, head_dim_);
      const auto vh = bc.v_attn.middleCols(h * head_dim_, head_dim_);
      Mat<T> scores = (qh * kh.transpose()) * inv_sqrt;
      for (int r = 0; r < tokens_; ++r) {
        const T mx = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - mx).exp().matrix();
        scores.row(r) /= scores.row(r).sum();
      }
      bc.attn[h] = std::move(scores);
      bc.attn_cat.middleCols(h * head_dim_, head_dim_) = bc.attn[h] * vh;
    }

    Mat<T> attn_out = bc.attn_cat * view(base + 8);
    attn_out.rowwise() += row(base + 9);
    bc.x_mid = x + bc.keep_attn * attn_out;

    layer_norm(bc.x_mid, row(base + 10), row(base + 11), bc.vn, bc.mu2, bc.rstd2);
    bc.h_pre = bc.vn * view(base + 12);
    bc.h_pre.rowwise() += row(base + 13);
    bc.h_act = bc.h_pre.unaryExpr([](T v) { return gelu(v); });
    Mat<T> mlp_out = bc.h_act * view(base + 14);
    mlp_out.rowwise() += row(base + 15);
    return bc.x_mid + bc.keep_mlp * mlp_out;
  }

  Mat<T> block_backward(const Mat<T>& dy, int b, const BlockCache& bc, T* grad) const {
    const int base = block_base_[b];

    // MLP branch.
    Mat<T> dmlp = bc.keep_mlp * dy;
    gmap(grad, base + 14) += bc.h_act.transpose() * dmlp;
    gmap(grad, base + 15) += dmlp.colwise().sum();
    Mat<T> dh_act = dmlp * view(base + 14).transpose();
    Mat<T> dh_pre = dh_act.binaryExpr(bc.h_pre, [](T dv, T x) { return dv * gelu_grad(x); });
    gmap(grad, base + 12) += bc.vn.transpose() * dh_pre;
    gmap(grad, base + 13) += dh_pre.colwise().sum();
    Mat<T> dvn = dh_pre * view(base + 12).transpose();
    Mat<T> dx_mid = dy + layer_norm_backward(dvn, bc.x_mid, bc.mu2, bc.rstd2, row(base + 10),
                                             gmap(grad, base + 10), gmap(grad, base + 11));

    // Attention branch.
    Mat<T> dattn_out = bc.keep_attn * dx_mid;
    gmap(grad, base + 8) += bc.attn_cat.transpose() * dattn_out;
    gmap(grad, base + 9) += dattn_out.colwise().sum();
    Mat<T> dattn_cat = dattn_out * view(base + 8).transpose();

    Mat<T> dq(tokens_, spec_.width), dk(tokens_, spec_.width), dv(tokens_, spec_.width);
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(head_dim_));
    for (int h = 0; h < heads_; ++h) {
      const auto vh = bc.v_attn.middleCols(h * head_dim_, head_dim_);
      const auto qh = bc.q.middleCols(h * head_dim_, head_dim_);
      const auto kh = bc.k.middleCols(h * head_dim_, head_dim_);
      const auto doh = dattn_cat.middleCols(h * head_dim_, head_dim_);
      const Mat<T>& ah = bc.attn[h];
      Mat<T> da = doh * vh.transpose();
      dv.middleCols(h * head_dim_, head_dim_) = ah.transpose() * doh;
      Mat<T> ds(tokens_, tokens_);
      for (int r = 0; r < tokens_; ++r) {
        const T dot = (da.row(r).array() * ah.row(r).array()).sum();
        ds.row(r) = (((da.row(r).array() - dot) * ah.row(r).array()) * inv_sqrt).matrix();
      }
      dq.middleCols(h * head_dim_, head_dim_) = ds * kh;
      dk.middleCols(h * head_dim_, head_dim_) = ds.transpose() * qh;
    }

    gmap(grad, base + 2) += bc.u.transpose() * dq;
    gmap(grad, base + 3) += dq.colwise().sum();
    gmap(grad, base + 4) += bc.u.transpose() * dk;
    gmap(grad, base + 5) += dk.colwise().sum();
    gmap(grad, base + 6) += bc.u.transpose() * dv;
    gmap(grad, base + 7) += dv.colwise().sum();

    Mat<T> du = dq * view(base + 2).transpose() + dk * view(base + 4).transpose() +
                dv * view(base + 6).transpose();
    return dx_mid + layer_norm_backward(du, bc.x_in, bc.mu1, bc.rstd1, row(base + 0),
                                        gmap(grad, base + 0), gmap(grad, base + 1));
  }

  EncoderSpec spec_;
  int tokens_side_ = 0, tokens_ = 0, patch_dim_ = 0, heads_ = 1, head_dim_ = 0, hidden_ = 0;
  int total_params_ = 0;
  std::vector<ParamInfo> infos_;
  std::vector<int> block_base_;
  int idx_patch_w_ = 0, idx_patch_b_ = 0, idx_pos_ = 0;
  int idx_lnf_g_ = 0, idx_lnf_b_ = 0, idx_head_w_ = 0, idx_head_b_ = 0;
  std::vector<T> params_;
};

}  // namespace sitar::nn
