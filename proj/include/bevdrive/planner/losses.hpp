#pragma once

#include "bevdrive/planner/model.hpp"

namespace bevdrive {

/// Per-sample trajectory L1 [B]: mean over the n*2 coordinates.
template <typename S>
ad::Var<S> trajectoryL1(const TrajectorySteps<S>& traj, const Tensor<S>& target) {
  using namespace ad;
  const int B = traj[0].value().dim(0);
  const int n = static_cast<int>(traj.size());
  Var<S> acc;
  for (int t = 0; t < n; ++t) {
    Tensor<S> tgt({B, 2});
    for (int b = 0; b < B; ++b) {
      tgt.at(b, 0) = target.at(b, 2 * t);
      tgt.at(b, 1) = target.at(b, 2 * t + 1);
    }
    Var<S> term = rowSum(absv(sub(traj[t], Var<S>::constant(tgt))));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, S(1.0 / (2.0 * n)));
}

/// All-branch per-sample losses: [B, kNumCommands].
template <typename S>
ad::Var<S> branchLossMatrix(const std::array<TrajectorySteps<S>, kNumCommands>& branches,
                            const Tensor<S>& target) {
  using namespace ad;
  Var<S> mat;
  for (int c = 0; c < kNumCommands; ++c) {
    Var<S> col = reshape(trajectoryL1(branches[c], target),
                         {branches[c][0].value().dim(0), 1});
    mat = mat.defined() ? concatCols(mat, col) : col;
  }
  return mat;
}

/// Masked mean over rows of a [B] vector; count normalizes the sum.
template <typename S>
ad::Var<S> maskedMean(const ad::Var<S>& rows, const std::vector<S>& mask, int count) {
  using namespace ad;
  Tensor<S> m({static_cast<int>(mask.size())}, mask);
  return scale(sumAll(mul(rows, Var<S>::constant(m))), S(1.0 / std::max(1, count)));
}

/// Ego imitation loss: L1 of the labeled-command branch against the ground
/// truth future. Gradient flows only through that branch.
template <typename S>
ad::Var<S> lossEgo(const ad::Var<S>& branch_l1, const std::vector<int>& cmds,
                   const std::vector<S>& mask, int count) {
  return maskedMean(ad::gatherCols(branch_l1, cmds), mask, count);
}

/// Other-vehicle loss: min over the six command branches, subgradient
/// through the argmin branch only; the argmin is the pseudo command label.
template <typename S>
ad::Var<S> lossOther(const ad::Var<S>& branch_l1, const std::vector<S>& mask, int count,
                     std::vector<int>* argmin_out = nullptr) {
  return maskedMean(ad::minSelectRows(branch_l1, argmin_out), mask, count);
}

/// Cross-entropy of the likelihood logits against integer command labels.
template <typename S>
ad::Var<S> lossCmd(const ad::Var<S>& logits, const std::vector<int>& labels,
                   const std::vector<S>& mask, int count) {
  using namespace ad;
  return scale(maskedMean(gatherCols(logSoftmaxRows(logits), labels), mask, count),
               S(-1));
}

/// Cross-entropy on an explicit likelihood vector (contract form): the
/// likelihoods are already a probability vector.
template <typename S>
S lossCmdValue(const std::vector<S>& likelihood, int label) {
  return static_cast<S>(-std::log(std::max(static_cast<double>(likelihood[label]), 1e-12)));
}

/// KL(teacher || student) over commands from student logits [B, 6] and
/// constant teacher probabilities; zero when the distributions match.
template <typename S>
ad::Var<S> lossCmdDistill(const ad::Var<S>& student_logits, const Tensor<S>& teacher_probs,
                          const std::vector<S>& mask, int count) {
  using namespace ad;
  const int B = student_logits.value().dim(0);
  Var<S> log_s = logSoftmaxRows(student_logits);
  Tensor<S> ent({B});  // sum_c p log p
  for (int b = 0; b < B; ++b) {
    double e = 0;
    for (int c = 0; c < kNumCommands; ++c) {
      const double p = static_cast<double>(teacher_probs.at(b, c));
      if (p > 1e-12) e += p * std::log(p);
    }
    ent[b] = static_cast<S>(e);
  }
  Var<S> cross = rowSum(mul(Var<S>::constant(teacher_probs), log_s));  // sum p log q
  Var<S> kl = sub(Var<S>::constant(ent), cross);
  return maskedMean(kl, mask, count);
}

/// Refinement loss (applied at every rollout iteration): mean over
/// iterations of the trajectory L1 after each iteration.
template <typename S>
ad::Var<S> lossRefine(const std::vector<TrajectorySteps<S>>& taus, const Tensor<S>& target,
                      const std::vector<S>& mask, int count) {
  using namespace ad;
  if (taus.empty()) return Var<S>::constant(Tensor<S>::scalar(S(0)));
  Var<S> acc;
  for (const auto& tau : taus) {
    Var<S> term = maskedMean(trajectoryL1(tau, target), mask, count);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, S(1.0 / taus.size()));
}

}  // namespace bevdrive
