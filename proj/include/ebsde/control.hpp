#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "ebsde/control_model.hpp"
#include "ebsde/ebsde.hpp"

namespace ebsde {

/// Stationary feedback control: one action per state.
struct FeedbackPolicy {
  std::vector<int> action;
};

/// Time-dependent schedule (t, x) -> action, total up to a declared horizon.
struct SchedulePolicy {
  std::function<int(long t, int x)> action;
};

using Policy = std::variant<FeedbackPolicy, SchedulePolicy>;

/// Kernel induced by a feedback policy: column x taken from B^{policy(x)}.
TransitionMatrix policy_kernel(const ControlModel& model, const FeedbackPolicy& policy);

struct OptimalControlSolution {
  double lambda_bar;          // optimal ergodic cost
  Vec v;                      // bias, normalised at the anchor
  FeedbackPolicy policy;      // argmin of the Hamiltonian at v
  double optimality_identity_gap;  // max_x |f(x,v) - (L + v^T (B^u - A) x)| at the policy
  EbsdeSolution ebsde;
};

/// Solve the ergodic control problem through the Hamiltonian-driven ergodic
/// equation and extract the minimising feedback policy.
OptimalControlSolution solve_optimal(const ControlModel& model, double tol,
                                     const EbsdeOptions& base_opts = {});

/// Stationary average cost of a feedback policy under its induced kernel.
double ergodic_cost_exact(const ControlModel& model, const FeedbackPolicy& policy);

struct SimulatedCost {
  double mean;
  double stderr;
  long runs;
  long horizon;
};

/// Monte Carlo estimate of the finite-horizon average cost under a policy.
SimulatedCost ergodic_cost_simulate(const ControlModel& model, const Policy& policy, long horizon,
                                    int runs, std::uint64_t seed, int start_state);

struct RviResult {
  double lambda_star;
  Vec h;            // bias, normalised at the anchor
  long iterations;
  bool damped;      // true when the aperiodicity transform was needed
};

/// Independent average-cost oracle: relative value iteration on the Bellman
/// operator, iterated to span-seminorm tolerance.
RviResult rvi_oracle(const ControlModel& model, double tol);

}  // namespace ebsde
