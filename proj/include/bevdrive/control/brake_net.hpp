#pragma once

#include "bevdrive/core/checkpoint.hpp"
#include "bevdrive/core/optim.hpp"
#include "bevdrive/microworld/frame.hpp"

namespace bevdrive {

/// Binary brake classifier over the privileged light/hazard features,
/// trained with BCE against the expert's recorded brake actions.
template <typename S>
class BrakeNet {
 public:
  BrakeNet() = default;
  explicit BrakeNet(std::uint64_t seed, int in_dim = kNumPrivFeatures, int hidden = 32)
      : in_dim_(in_dim) {
    Rng rng(seed);
    fc1_ = nn::Linear<S>(params_, "fc1", in_dim, hidden, rng);
    fc2_ = nn::Linear<S>(params_, "fc2", hidden, hidden, rng);
    out_ = nn::Linear<S>(params_, "out", hidden, 1, rng);
  }

  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }
  bool trained() const { return trained_; }
  void markTrained() { trained_ = true; }
  int inputDim() const { return in_dim_; }

  ad::Var<S> logits(const ad::Var<S>& x) const {
    using namespace ad;
    return out_.forward(relu(fc2_.forward(relu(fc1_.forward(x)))));
  }

  /// BCE-with-logits against 0/1 labels; returns the mean loss.
  ad::Var<S> loss(const Tensor<S>& features, const std::vector<int>& labels) const {
    using namespace ad;
    const int B = features.dim(0);
    Tensor<S> y({B, 1});
    for (int b = 0; b < B; ++b) y.at(b, 0) = static_cast<S>(labels[b]);
    Var<S> x = logits(Var<S>::constant(features));
    return meanAll(sub(softplus(x), mul(x, Var<S>::constant(y))));
  }

  double score(const std::vector<float>& priv_features) const {
    if (!trained_)
      throw std::runtime_error("brake classifier: model not trained");
    Tensor<S> x({1, in_dim_});
    for (int i = 0; i < in_dim_; ++i) x.at(0, i) = static_cast<S>(priv_features[i]);
    const double l = static_cast<double>(logits(ad::Var<S>::constant(x)).value()[0]);
    return 1.0 / (1.0 + std::exp(-l));
  }

  /// Adam on (features, labels) batches; returns the final epoch mean BCE.
  double fit(const Tensor<S>& features, const std::vector<int>& labels, int steps,
             double lr = 1e-3) {
    nn::Adam<S> opt(params_, lr);
    double last = 0.0;
    for (int s = 0; s < steps; ++s) {
      params_.zeroGrad();
      auto l = loss(features, labels);
      last = static_cast<double>(l.item());
      l.backward();
      opt.step();
    }
    trained_ = true;
    return last;
  }

 private:
  int in_dim_ = kNumPrivFeatures;
  nn::ParamStore<S> params_;
  nn::Linear<S> fc1_, fc2_, out_;
  bool trained_ = false;
};

}  // namespace bevdrive
