#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sitar::optim {

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)).
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr) {
  if (total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

// Adam with decoupled weight decay: p <- p - lr*wd*p - lr * mhat / (sqrt(vhat) + eps).
template <class T>
class AdamW {
 public:
  AdamW(std::size_t num_params, T weight_decay, T beta1 = T(0.9), T beta2 = T(0.999),
        T eps = T(1e-8))
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(num_params, T(0)), v_(num_params, T(0)) {}

  void step(std::vector<T>& params, const std::vector<T>& grad, T lr) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw std::invalid_argument("AdamW::step: size mismatch");
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (T(1) - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (T(1) - beta2_) * grad[i] * grad[i];
      const T mhat = m_[i] / bc1;
      const T vhat = v_[i] / bc2;
      params[i] -= lr * weight_decay_ * params[i] + lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  std::int64_t step_count() const { return t_; }
  const std::vector<T>& first_moment() const { return m_; }
  const std::vector<T>& second_moment() const { return v_; }

  void restore(std::vector<T> m, std::vector<T> v, std::int64_t t) {
    if (m.size() != m_.size() || v.size() != v_.size())
      throw std::invalid_argument("AdamW::restore: size mismatch");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  T weight_decay_, beta1_, beta2_, eps_;
  std::vector<T> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace sitar::optim
