#pragma once

#include "bevdrive/microworld/lidar.hpp"

namespace bevdrive {

/// Semantic class channels painted onto points. Order is a wire contract.
enum class SemClass : int {
  kBackground = 0,
  kVehicles = 1,
  kRoads = 2,
  kLaneMarkings = 3,
  kPedestrians = 4,
};
inline constexpr int kNumSemClasses = 5;

/// Per-point semantic scores: the one-hot class of the entity each point hit,
/// corrupted to a uniformly random *wrong* class with probability noise_rate,
/// then softened so every row sums to one. Stands in for the image
/// segmentation network of the full-sensor stack.
inline Tensor<float> semanticOracle(const std::vector<HitKind>& hits, double noise_rate,
                                    Rng& rng, double softness = 0.0) {
  if (noise_rate < 0.0 || noise_rate >= 1.0)
    throw std::invalid_argument("semantic_oracle: noise_rate outside [0,1)");
  const int n = static_cast<int>(hits.size());
  Tensor<float> scores({n, kNumSemClasses});
  for (int i = 0; i < n; ++i) {
    int cls = 0;
    switch (hits[i]) {
      case HitKind::kVehicle: cls = static_cast<int>(SemClass::kVehicles); break;
      case HitKind::kPedestrian: cls = static_cast<int>(SemClass::kPedestrians); break;
      case HitKind::kRoadBoundary: cls = static_cast<int>(SemClass::kRoads); break;
    }
    if (noise_rate > 0.0 && rng.bernoulli(noise_rate)) {
      int wrong = rng.uniformInt(0, kNumSemClasses - 2);
      if (wrong >= cls) ++wrong;
      cls = wrong;
    }
    const float lo = static_cast<float>(softness / kNumSemClasses);
    for (int c = 0; c < kNumSemClasses; ++c) scores.at(i, c) = lo;
    scores.at(i, cls) += static_cast<float>(1.0 - softness);
  }
  return scores;
}

}  // namespace bevdrive
