#pragma once

#include <string>
#include <vector>

#include "ebsde/chain.hpp"

namespace ebsde {

/// Finite ergodic control model: a reference kernel A, a finite action set,
/// per-action kernels B^u that are gamma-equivalent to A, and a bounded
/// per-(state, action) running cost.
class ControlModel {
 public:
  static ControlModel validate(TransitionMatrix reference, double gamma,
                               std::vector<std::string> action_names,
                               std::vector<TransitionMatrix> kernels, Mat cost);

  int states() const { return reference_.size(); }
  int action_count() const { return static_cast<int>(kernels_.size()); }
  const TransitionMatrix& reference() const { return reference_; }
  double gamma() const { return gamma_; }
  const TransitionMatrix& kernel(int u) const { return kernels_[u]; }
  double cost(int x, int u) const { return cost_(x, u); }
  const Mat& cost_matrix() const { return cost_; }
  const std::vector<std::string>& action_names() const { return action_names_; }

 private:
  ControlModel(TransitionMatrix reference, double gamma, std::vector<std::string> action_names,
               std::vector<TransitionMatrix> kernels, Mat cost)
      : reference_(std::move(reference)),
        gamma_(gamma),
        action_names_(std::move(action_names)),
        kernels_(std::move(kernels)),
        cost_(std::move(cost)) {}

  TransitionMatrix reference_;
  double gamma_;
  std::vector<std::string> action_names_;
  std::vector<TransitionMatrix> kernels_;
  Mat cost_;  // states x actions
};

}  // namespace ebsde
