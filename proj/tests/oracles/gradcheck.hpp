#pragma once

// Central finite-difference gradient oracle. Independent of the autodiff
// tape: it only re-evaluates the forward function at perturbed inputs.

#include <cmath>
#include <functional>
#include <vector>

#include "bevdrive/core/autodiff.hpp"
#include "bevdrive/core/random.hpp"

namespace oracles {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Compares d(loss)/d(x[i]) from the tape against (f(x+h)-f(x-h))/2h for a
// sampled set of coordinates of one leaf tensor. rel = |a-b|/max(|a|,|b|,floor).
template <typename S>
GradCheckResult gradCheck(bevdrive::ad::Var<S>& leaf,
                          const std::function<bevdrive::ad::Var<S>()>& forward,
                          bevdrive::Rng& rng, int max_coords = 40, double h = 1e-3,
                          double floor_ = 1e-4) {
  leaf.zeroGrad();
  auto loss = forward();
  loss.backward();
  bevdrive::Tensor<S> analytic = leaf.grad();

  std::vector<std::int64_t> coords;
  const std::int64_t n = leaf.value().numel();
  if (n <= max_coords) {
    for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (int i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<std::int64_t>(rng.uniform(0.0, 1.0) * n) % n);
  }

  GradCheckResult res;
  for (std::int64_t c : coords) {
    const S orig = leaf.value()[c];
    leaf.value()[c] = orig + static_cast<S>(h);
    const double fp = static_cast<double>(forward().item());
    leaf.value()[c] = orig - static_cast<S>(h);
    const double fm = static_cast<double>(forward().item());
    leaf.value()[c] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double an = static_cast<double>(analytic[c]);
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor_});
    res.max_rel_err = std::max(res.max_rel_err, rel);
    ++res.checked;
  }
  return res;
}

}  // namespace oracles
