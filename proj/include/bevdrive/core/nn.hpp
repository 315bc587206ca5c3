#pragma once

#include <map>
#include <string>

#include "bevdrive/core/autodiff.hpp"
#include "bevdrive/core/conv.hpp"
#include "bevdrive/core/random.hpp"

namespace bevdrive::nn {

using ad::Var;

/// Flat registry of named trainable parameters. Modules register their
/// weights here under hierarchical names ("embed.conv1.w", ...), which is
/// also the checkpoint naming contract.
template <typename S>
class ParamStore {
 public:
  Var<S> create(const std::string& name, Tensor<S> init) {
    auto v = Var<S>::leaf(std::move(init), true);
    params_.emplace(name, v);
    return v;
  }
  const std::map<std::string, Var<S>>& all() const { return params_; }
  std::map<std::string, Var<S>>& all() { return params_; }
  Var<S> at(const std::string& name) const { return params_.at(name); }
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  void zeroGrad() {
    for (auto& [k, v] : params_) v.zeroGrad();
  }

  /// Stop gradient tracking on every parameter (frozen teacher models).
  void freeze() {
    for (auto& [k, v] : params_) v.node()->requires_grad = false;
  }

  /// Copy values from another store; names and shapes must line up.
  void copyValuesFrom(const ParamStore& other) {
    for (auto& [k, v] : params_) {
      auto it = other.params_.find(k);
      if (it == other.params_.end())
        throw std::invalid_argument("copyValuesFrom: missing parameter " + k);
      if (!it->second.value().sameShape(v.value()))
        throw std::invalid_argument("copyValuesFrom: shape mismatch for " + k);
      v.value() = it->second.value();
    }
  }

  std::int64_t numel() const {
    std::int64_t n = 0;
    for (auto& [k, v] : params_) n += v.value().numel();
    return n;
  }

 private:
  std::map<std::string, Var<S>> params_;
};

namespace init {

template <typename S>
Tensor<S> normal(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor<S> t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<S>(rng.normal(0.0, stddev));
  return t;
}

template <typename S>
Tensor<S> uniform(std::vector<int> shape, double lo, double hi, Rng& rng) {
  Tensor<S> t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

template <typename S>
Tensor<S> heNormal(std::vector<int> shape, int fan_in, Rng& rng) {
  return normal<S>(std::move(shape), std::sqrt(2.0 / fan_in), rng);
}

}  // namespace init

/// y = x W + b with W stored [in, out].
template <typename S>
struct Linear {
  Var<S> w, b;

  Linear() = default;
  Linear(ParamStore<S>& ps, const std::string& name, int in, int out, Rng& rng,
         bool zero_init = false) {
    if (zero_init) {
      w = ps.create(name + ".w", Tensor<S>({in, out}));
      b = ps.create(name + ".b", Tensor<S>({out}));
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      w = ps.create(name + ".w", init::uniform<S>({in, out}, -bound, bound, rng));
      b = ps.create(name + ".b", init::uniform<S>({out}, -bound, bound, rng));
    }
  }

  Var<S> forward(const Var<S>& x) const {
    return ad::addRowVector(ad::matmul(x, w), b);
  }
};

template <typename S>
struct Conv2d {
  Var<S> w, b;
  int stride = 1, pad = 1;

  Conv2d() = default;
  Conv2d(ParamStore<S>& ps, const std::string& name, int cin, int cout, int k, int stride_,
         int pad_, Rng& rng)
      : stride(stride_), pad(pad_) {
    w = ps.create(name + ".w", init::heNormal<S>({cout, cin, k, k}, cin * k * k, rng));
    b = ps.create(name + ".b", Tensor<S>({cout}));
  }

  Var<S> forward(const Var<S>& x) const { return ad::conv2d(x, w, b, stride, pad); }
};

template <typename S>
struct ConvTranspose2d {
  Var<S> w, b;
  int stride = 2, pad = 1, out_pad = 1;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParamStore<S>& ps, const std::string& name, int cin, int cout, int k,
                  int stride_, int pad_, int out_pad_, Rng& rng)
      : stride(stride_), pad(pad_), out_pad(out_pad_) {
    w = ps.create(name + ".w", init::heNormal<S>({cin, cout, k, k}, cin * k * k, rng));
    b = ps.create(name + ".b", Tensor<S>({cout}));
  }

  Var<S> forward(const Var<S>& x) const {
    return ad::convTranspose2d(x, w, b, stride, pad, out_pad);
  }
};

/// Gated recurrent unit cell, gate layout [r | z | n].
template <typename S>
struct GRUCell {
  Var<S> w_ih, w_hh, b_ih, b_hh;  // w_ih: [in, 3H], w_hh: [H, 3H]
  int hidden = 0;

  GRUCell() = default;
  GRUCell(ParamStore<S>& ps, const std::string& name, int in, int h, Rng& rng) : hidden(h) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    w_ih = ps.create(name + ".w_ih", init::uniform<S>({in, 3 * h}, -bound, bound, rng));
    w_hh = ps.create(name + ".w_hh", init::uniform<S>({h, 3 * h}, -bound, bound, rng));
    b_ih = ps.create(name + ".b_ih", init::uniform<S>({3 * h}, -bound, bound, rng));
    b_hh = ps.create(name + ".b_hh", init::uniform<S>({3 * h}, -bound, bound, rng));
  }

  /// x: [B, in], h: [B, H] -> new hidden [B, H].
  Var<S> step(const Var<S>& x, const Var<S>& h) const {
    using namespace ad;
    const int H = hidden;
    Var<S> gi = addRowVector(matmul(x, w_ih), b_ih);
    Var<S> gh = addRowVector(matmul(h, w_hh), b_hh);
    Var<S> r = sigmoid(add(sliceCols(gi, 0, H), sliceCols(gh, 0, H)));
    Var<S> z = sigmoid(add(sliceCols(gi, H, 2 * H), sliceCols(gh, H, 2 * H)));
    Var<S> ncand =
        tanhv(add(sliceCols(gi, 2 * H, 3 * H), mul(r, sliceCols(gh, 2 * H, 3 * H))));
    // h' = (1 - z) * n + z * h
    Var<S> one_minus_z = scale(addScalar(scale(z, S(-1)), S(1)), S(1));
    return add(mul(one_minus_z, ncand), mul(z, h));
  }
};

}  // namespace bevdrive::nn
