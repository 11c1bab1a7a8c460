#include "ebsde/control.hpp"

#include <cmath>

#include "ebsde/rng.hpp"

namespace ebsde {

TransitionMatrix policy_kernel(const ControlModel& model, const FeedbackPolicy& policy) {
  const int n = model.states();
  if (policy.action.size() != static_cast<std::size_t>(n)) {
    raise(Errc::ValidationError, "policy must pick an action at every state");
  }
  Mat k(n, n);
  for (int x = 0; x < n; ++x) {
    int u = policy.action[static_cast<std::size_t>(x)];
    if (u < 0 || u >= model.action_count()) raise(Errc::ValidationError, "action out of range");
    k.col(x) = model.kernel(u).matrix().col(x);
  }
  return TransitionMatrix::validate(std::move(k));
}

OptimalControlSolution solve_optimal(const ControlModel& model, double tol,
                                     const EbsdeOptions& base_opts) {
  Driver driver = Driver::hamiltonian(model);
  EbsdeOptions opts = base_opts;
  opts.tol = tol;
  EbsdeSolution sol = solve_ebsde(model.reference(), driver, opts);

  const int n = model.states();
  FeedbackPolicy policy;
  policy.action.resize(static_cast<std::size_t>(n));
  double gap = 0.0;
  for (int x = 0; x < n; ++x) {
    int u = driver.argmin_action(x, sol.v);
    policy.action[static_cast<std::size_t>(x)] = u;
    double realised = model.cost(x, u) +
                      sol.v.dot(model.kernel(u).matrix().col(x) - model.reference().matrix().col(x));
    gap = std::max(gap, std::abs(driver.eval(x, sol.v) - realised));
  }
  if (gap > 1e-12) {
    raise(Errc::ComputeError, "extracted policy does not attain the Hamiltonian");
  }
  return OptimalControlSolution{sol.lambda, sol.v, std::move(policy), gap, std::move(sol)};
}

double ergodic_cost_exact(const ControlModel& model, const FeedbackPolicy& policy) {
  TransitionMatrix k = policy_kernel(model, policy);
  auto cls = classify_uniform_ergodicity(k);
  if (cls.kind != ChainClass::UniformlyErgodic) {
    raise(Errc::PolicyKernelNotErgodic, "policy-induced kernel is not uniformly ergodic");
  }
  Distribution pi = stationary_distribution(k);
  double cost = 0.0;
  for (int x = 0; x < model.states(); ++x) {
    cost += pi[x] * model.cost(x, policy.action[static_cast<std::size_t>(x)]);
  }
  return cost;
}

SimulatedCost ergodic_cost_simulate(const ControlModel& model, const Policy& policy, long horizon,
                                    int runs, std::uint64_t seed, int start_state) {
  const int n = model.states();
  if (horizon < 1) raise(Errc::ValidationError, "horizon must be at least 1");
  if (runs < 1) raise(Errc::ValidationError, "need at least one run");
  if (start_state < 0 || start_state >= n) raise(Errc::ValidationError, "start state out of range");

  auto action_at = [&](long t, int x) -> int {
    if (const auto* fb = std::get_if<FeedbackPolicy>(&policy)) {
      return fb->action[static_cast<std::size_t>(x)];
    }
    return std::get<SchedulePolicy>(policy).action(t, x);
  };

  Rng root = Rng::stream(seed, "ergodic_cost_simulate");
  double sum = 0.0, sum_sq = 0.0;
  for (int run = 0; run < runs; ++run) {
    Rng rng = root.child(static_cast<std::uint64_t>(run));
    int x = start_state;
    double acc = 0.0;
    for (long t = 0; t < horizon; ++t) {
      int u = action_at(t, x);
      if (u < 0 || u >= model.action_count()) raise(Errc::ValidationError, "action out of range");
      acc += model.cost(x, u);
      x = rng.sample(model.kernel(u).matrix().col(x));
    }
    double avg = acc / static_cast<double>(horizon);
    sum += avg;
    sum_sq += avg * avg;
  }
  double mean = sum / runs;
  double var = runs > 1 ? std::max(0.0, (sum_sq - sum * sum / runs) / (runs - 1)) : 0.0;
  return SimulatedCost{mean, std::sqrt(var / runs), runs, horizon};
}

namespace {

Vec bellman_apply(const ControlModel& model, const Vec& h) {
  const int n = model.states();
  Vec out(n);
  for (int x = 0; x < n; ++x) {
    double best = model.cost(x, 0) + h.dot(model.kernel(0).matrix().col(x));
    for (int u = 1; u < model.action_count(); ++u) {
      double val = model.cost(x, u) + h.dot(model.kernel(u).matrix().col(x));
      if (val < best) best = val;
    }
    out[x] = best;
  }
  return out;
}

}  // namespace

RviResult rvi_oracle(const ControlModel& model, double tol) {
  const int n = model.states();
  const int anchor = 0;
  const long max_iterations = 200'000;

  for (int attempt = 0; attempt < 2; ++attempt) {
    const bool damped = attempt == 1;  // aperiodicity transform on retry
    const double kappa = damped ? 0.5 : 1.0;
    Vec h = Vec::Zero(n);
    for (long it = 1; it <= max_iterations; ++it) {
      Vec th = bellman_apply(model, h);
      Vec d = th - h;
      double span = d.maxCoeff() - d.minCoeff();
      if (span <= tol) {
        double lambda = 0.5 * (d.maxCoeff() + d.minCoeff());
        h -= Vec::Constant(n, h[anchor]);
        return RviResult{lambda, std::move(h), it, damped};
      }
      h = (1.0 - kappa) * h + kappa * th;
      h -= Vec::Constant(n, h[anchor]);
    }
  }
  raise(Errc::NoConvergence, "relative value iteration span did not contract");
}

}  // namespace ebsde
