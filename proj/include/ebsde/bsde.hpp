#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ebsde/chain.hpp"
#include "ebsde/driver.hpp"

namespace ebsde {

struct FiniteHorizonOptions {
  std::size_t node_cap = 1'000'000;  // general adapted solving is exponential in T
  double root_tol = 1e-12;
  int root_max_iter = 200;
};

/// One node of the path tree: a positive-probability path prefix.
struct PathNode {
  int state;
  std::int64_t parent;      // index into the previous layer, -1 at the root layer
  double prob;              // unconditional probability of the prefix
  std::int64_t first_child; // index into the next layer, -1 at the terminal layer
  int child_count;
  double y;
  Vec z;  // canonical representative: first reachable component 0, unreachable 0
};

/// Solution of the general adapted finite-horizon equation on the path tree.
struct BsdeSolution {
  std::vector<std::vector<PathNode>> layers;  // layers[t], t = 0..T
  double max_one_step_residual;

  /// Path (x_0, ..., x_t) leading to a node.
  std::vector<int> path_of(int t, std::size_t node) const;
};

using TerminalFn = std::function<double(const std::vector<int>&)>;

/// Backward-induction solver for the finite-horizon BSDE
///   Y_t - f(x, t, Y_t, Z_t) + Z_t^T M_{t+1} = Y_{t+1},  Y_T = xi(path).
/// `kernels` holds either one matrix (time-homogeneous) or one per step.
BsdeSolution solve_finite_horizon(const std::vector<TransitionMatrix>& kernels,
                                  const Distribution& initial, const Driver& driver,
                                  const TerminalFn& terminal, int horizon,
                                  const FiniteHorizonOptions& opts = {});

/// Markovian value recursion: v(T,.) = terminal and
///   v(t, x) - f(x, t, v(t,x), v_{t+1}) - v_{t+1}^T A_t x = 0,
/// with Z_t = v_{t+1} (deterministic).
struct MarkovianBsdeSolution {
  std::vector<Vec> value;  // value[t], t = 0..T
  std::vector<Vec> z;      // z[t] = value[t+1], t = 0..T-1
  double max_residual;
};

MarkovianBsdeSolution solve_finite_horizon_markovian(const std::vector<TransitionMatrix>& kernels,
                                                     const Driver& driver, const Vec& terminal,
                                                     int horizon,
                                                     const FiniteHorizonOptions& opts = {});

/// Martingale representation: Z with Z^T M_{t+1} = W on every reachable next
/// state, given E[W | x] = 0. Unreachable components are set to zero.
Vec martingale_represent(const TransitionMatrix& a, int state, const Vec& w);

enum class DiscountedMethod {
  Auto,            // plain iteration when cheap, structured solve otherwise
  PlainIteration,  // the contraction v <- (f(., v) + A^T-ish v) / (1 + alpha)
  Structured,      // exact kernel solves through the gamma-certificate
};

struct DiscountedOptions {
  DiscountedMethod method = DiscountedMethod::Auto;
  long plain_budget = 20'000;        // Auto switches to Structured above this estimate
  long max_plain_iterations = 2'000'000;
  int max_structured_sweeps = 128;
  std::optional<Vec> initial_guess;  // defaults to zero
  int anchor = 0;                    // state used for the stable centred outputs
};

/// Bounded solution of the discounted infinite-horizon equation.
///
/// Besides the raw table v (which grows like C/alpha), the solution carries
/// numerically stable centred outputs: alpha * v(anchor) and v - v(anchor),
/// which stay well conditioned as alpha -> 0 and are what the vanishing
/// discount limit consumes.
struct DiscountedSolution {
  double alpha;
  Vec v;
  double zero_bound;          // the driver's C
  long iterations;            // plain contraction steps taken (truncation horizon)
  long structured_sweeps;     // exact kernel solves taken
  bool structured;            // true when a structured solve produced the result
  double residual;            // ||v - T(v)||_inf, evaluated in centred form
  double truncation_bound;    // C (1+alpha)^{-iterations} / alpha (plain path)
  double max_contraction_ratio;  // sup of per-step ratios observed (plain path)
  int anchor;
  double alpha_v_anchor;      // alpha * v(anchor), computed stably
  Vec v_centered;             // v - v(anchor) * 1, computed stably
};

DiscountedSolution solve_discounted(const TransitionMatrix& a, const Driver& driver, double alpha,
                                    double tol, const DiscountedOptions& opts = {});

}  // namespace ebsde
