#pragma once

#include <cmath>
#include <vector>

#include "bevdrive/core/nn.hpp"

namespace bevdrive::nn {

/// Adam with bias correction; operates on every parameter in a store.
template <typename S>
class Adam {
 public:
  explicit Adam(ParamStore<S>& ps, double lr = 3e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : ps_(&ps), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& [k, v] : ps.all()) {
      m_.push_back(Tensor<S>(v.value().shape()));
      v_.push_back(Tensor<S>(v.value().shape()));
    }
  }

  void setLearningRate(double lr) { lr_ = lr; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    std::size_t i = 0;
    for (auto& [k, p] : ps_->all()) {
      auto& m = m_[i];
      auto& v = v_[i];
      ++i;
      if (p.grad().numel() == 0) continue;
      const auto& g = p.grad();
      auto& val = p.value();
      for (std::int64_t j = 0; j < val.numel(); ++j) {
        const double gj = static_cast<double>(g[j]);
        m[j] = static_cast<S>(b1_ * m[j] + (1.0 - b1_) * gj);
        v[j] = static_cast<S>(b2_ * v[j] + (1.0 - b2_) * gj * gj);
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        val[j] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  ParamStore<S>* ps_;
  double lr_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor<S>> m_, v_;
};

/// Plain gradient descent (used by the full-batch descent checks).
template <typename S>
class Sgd {
 public:
  explicit Sgd(ParamStore<S>& ps, double lr) : ps_(&ps), lr_(lr) {}

  void step() {
    for (auto& [k, p] : ps_->all()) {
      if (p.grad().numel() == 0) continue;
      auto& val = p.value();
      const auto& g = p.grad();
      for (std::int64_t j = 0; j < val.numel(); ++j)
        val[j] -= static_cast<S>(lr_ * g[j]);
    }
  }

 private:
  ParamStore<S>* ps_;
  double lr_;
};

}  // namespace bevdrive::nn
