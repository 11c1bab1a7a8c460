#pragma once

#include <vector>

#include "ebsde/chain.hpp"
#include "ebsde/control_model.hpp"
#include "ebsde/rng.hpp"

namespace ebsde::testing {

inline TransitionMatrix matrix2(double a11, double a12, double a21, double a22) {
  Mat m(2, 2);
  m << a11, a12, a21, a22;
  return TransitionMatrix::validate(m);
}

/// The two-state workhorse: columns (0.7, 0.3) and (0.4, 0.6);
/// stationary law (4/7, 3/7).
inline TransitionMatrix chain_a() { return matrix2(0.7, 0.4, 0.3, 0.6); }

/// Column-swapped companion, gamma-equivalent to chain_a at gamma = 0.5.
inline TransitionMatrix chain_b() { return matrix2(0.4, 0.7, 0.6, 0.3); }

/// Random full-support column-stochastic matrix.
inline TransitionMatrix random_chain(int n, Rng& rng) {
  Mat m(n, n);
  for (int j = 0; j < n; ++j) m.col(j) = rng.dirichlet(n);
  return TransitionMatrix::validate(std::move(m));
}

/// Random B with the same support as A and entry ratios within
/// [sqrt(gamma), 1/sqrt(gamma)], hence strictly gamma-equivalent to A.
inline TransitionMatrix random_equivalent(const TransitionMatrix& a, double gamma, Rng& rng) {
  const int n = a.size();
  const double hi = 1.0 / std::sqrt(gamma);
  Mat m(n, n);
  for (int j = 0; j < n; ++j) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = a.entry(i, j) > kStructuralZero ? a.entry(i, j) * rng.uniform(1.0, hi) : 0.0;
      m(i, j) = e;
      sum += e;
    }
    m.col(j) /= sum;
  }
  return TransitionMatrix::validate(std::move(m));
}

/// Random control model with full-support reference kernel (hence unichain).
inline ControlModel random_control_model(int n, int actions, double gamma, Rng& rng) {
  TransitionMatrix a = random_chain(n, rng);
  std::vector<std::string> names;
  std::vector<TransitionMatrix> kernels;
  Mat cost(n, actions);
  for (int u = 0; u < actions; ++u) {
    names.push_back("u" + std::to_string(u + 1));
    kernels.push_back(random_equivalent(a, gamma, rng));
    for (int x = 0; x < n; ++x) cost(x, u) = rng.uniform(0.0, 1.0);
  }
  return ControlModel::validate(std::move(a), gamma, std::move(names), std::move(kernels),
                                std::move(cost));
}

}  // namespace ebsde::testing
