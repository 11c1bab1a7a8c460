#include "ebsde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ebsde/rng.hpp"

namespace ebsde {

namespace {

const TransitionMatrix& kernel_at(const std::vector<TransitionMatrix>& kernels, int t) {
  return kernels.size() == 1 ? kernels.front() : kernels[static_cast<std::size_t>(t)];
}

void check_kernels(const std::vector<TransitionMatrix>& kernels, int n, int horizon) {
  if (kernels.empty()) raise(Errc::ValidationError, "at least one kernel required");
  if (kernels.size() != 1 && kernels.size() != static_cast<std::size_t>(horizon)) {
    raise(Errc::ValidationError, "kernel list must have length 1 or horizon");
  }
  for (const auto& k : kernels) {
    if (k.size() != n) raise(Errc::DimensionMismatch, "kernel size differs from state count");
  }
}

// Sampled check of the bijection hypothesis: y -> y - f(x,t,y,z) increasing.
void check_y_monotone(const Driver& driver, int horizon) {
  if (driver.y_free()) return;
  Rng rng(0x79'6d6f6e6fULL);
  const int n = driver.states();
  Vec z(n);
  for (int k = 0; k < 64; ++k) {
    int x = rng.uniform_int(n);
    int t = rng.uniform_int(std::max(horizon, 1));
    for (int i = 0; i < n; ++i) z[i] = rng.uniform(-5.0, 5.0);
    double y1 = rng.uniform(-5.0, 5.0);
    double y2 = rng.uniform(-5.0, 5.0);
    if (y1 > y2) std::swap(y1, y2);
    if (y2 - y1 < 1e-6) continue;
    double g1 = y1 - driver.eval(x, t, y1, z);
    double g2 = y2 - driver.eval(x, t, y2, z);
    if (g2 < g1 - 1e-12) {
      raise(Errc::RootSolveFailure, "sampled y -> y - f(x,t,y,z) is not increasing");
    }
  }
}

// Solve y - f(x,t,y,z) = rhs for y.
double solve_y(const Driver& driver, int x, int t, const Vec& z, double rhs,
               const FiniteHorizonOptions& opts) {
  if (driver.y_free()) return rhs + driver.eval(x, t, 0.0, z);
  if (driver.kind() == Driver::Kind::Discounted) {
    // y - (g(z) - alpha y) = rhs has the closed form below.
    double g = driver.inner()->eval(x, t, 0.0, z);
    return (rhs + g) / (1.0 + driver.discount_alpha());
  }
  auto g = [&](double y) { return y - driver.eval(x, t, y, z) - rhs; };
  double base = std::abs(driver.eval(x, t, 0.0, z));
  double lo = rhs - 2.0 * base - 1.0;
  double hi = rhs + 2.0 * base + 1.0;
  int budget = 60;
  while (g(lo) > 0.0) {
    double width = hi - lo;
    lo -= 2.0 * width;
    if (--budget == 0) raise(Errc::RootSolveFailure, "no lower bracket for the y-solve");
  }
  budget = 60;
  while (g(hi) < 0.0) {
    double width = hi - lo;
    hi += 2.0 * width;
    if (--budget == 0) raise(Errc::RootSolveFailure, "no upper bracket for the y-solve");
  }
  for (int it = 0; it < opts.root_max_iter && hi - lo > opts.root_tol; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<int> BsdeSolution::path_of(int t, std::size_t node) const {
  std::vector<int> path(static_cast<std::size_t>(t) + 1);
  std::int64_t idx = static_cast<std::int64_t>(node);
  for (int s = t; s >= 0; --s) {
    const PathNode& nd = layers[static_cast<std::size_t>(s)][static_cast<std::size_t>(idx)];
    path[static_cast<std::size_t>(s)] = nd.state;
    idx = nd.parent;
  }
  return path;
}

Vec martingale_represent(const TransitionMatrix& a, int state, const Vec& w) {
  const int n = a.size();
  if (w.size() != n) raise(Errc::DimensionMismatch, "representation target has wrong length");
  Vec ax = a.column(state);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    if (a.structurally_positive(i, state)) mean += ax[i] * w[i];
  }
  if (std::abs(mean) > 1e-10) {
    raise(Errc::NonZeroMean, "conditional mean " + std::to_string(mean) + " is not zero");
  }
  Vec z = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (a.structurally_positive(i, state)) z[i] = w[i];
  }
  return z;
}

BsdeSolution solve_finite_horizon(const std::vector<TransitionMatrix>& kernels,
                                  const Distribution& initial, const Driver& driver,
                                  const TerminalFn& terminal, int horizon,
                                  const FiniteHorizonOptions& opts) {
  const int n = initial.size();
  if (horizon < 1) raise(Errc::ValidationError, "horizon must be at least 1");
  check_kernels(kernels, n, horizon);
  if (driver.states() != n) raise(Errc::DimensionMismatch, "driver size differs");
  check_y_monotone(driver, horizon);

  BsdeSolution out;
  out.layers.resize(static_cast<std::size_t>(horizon) + 1);
  std::size_t total = 0;

  // Forward pass: enumerate positive-probability path prefixes.
  for (int x = 0; x < n; ++x) {
    if (initial[x] > kStructuralZero) {
      out.layers[0].push_back(PathNode{x, -1, initial[x], -1, 0, 0.0, Vec()});
    }
  }
  total += out.layers[0].size();
  for (int t = 0; t < horizon; ++t) {
    const TransitionMatrix& a = kernel_at(kernels, t);
    auto& cur = out.layers[static_cast<std::size_t>(t)];
    auto& next = out.layers[static_cast<std::size_t>(t) + 1];
    for (auto& node : cur) {
      node.first_child = static_cast<std::int64_t>(next.size());
      for (int i = 0; i < n; ++i) {
        if (!a.structurally_positive(i, node.state)) continue;
        next.push_back(PathNode{i, static_cast<std::int64_t>(&node - cur.data()),
                                node.prob * a.entry(i, node.state), -1, 0, 0.0, Vec()});
        ++node.child_count;
      }
    }
    total += next.size();
    if (total > opts.node_cap) {
      std::ostringstream os;
      os << "path tree exceeds node cap (" << opts.node_cap << ") at layer " << (t + 1);
      raise(Errc::PathExplosion, os.str());
    }
  }

  // Terminal condition.
  auto& last = out.layers[static_cast<std::size_t>(horizon)];
  for (std::size_t i = 0; i < last.size(); ++i) {
    last[i].y = terminal(out.path_of(horizon, i));
    if (!std::isfinite(last[i].y)) raise(Errc::ValidationError, "non-finite terminal value");
  }

  // Backward pass.
  double max_residual = 0.0;
  for (int t = horizon - 1; t >= 0; --t) {
    const TransitionMatrix& a = kernel_at(kernels, t);
    auto& cur = out.layers[static_cast<std::size_t>(t)];
    auto& next = out.layers[static_cast<std::size_t>(t) + 1];
    for (auto& node : cur) {
      Vec ax = a.column(node.state);
      double expect = 0.0;
      for (int c = 0; c < node.child_count; ++c) {
        const PathNode& ch = next[static_cast<std::size_t>(node.first_child + c)];
        expect += ax[ch.state] * ch.y;
      }
      Vec w = Vec::Zero(n);
      for (int c = 0; c < node.child_count; ++c) {
        const PathNode& ch = next[static_cast<std::size_t>(node.first_child + c)];
        w[ch.state] = ch.y - expect;
      }
      Vec z = martingale_represent(a, node.state, w);
      // Canonical representative: shift so the first reachable component is 0.
      if (node.child_count > 0) {
        double shift = z[next[static_cast<std::size_t>(node.first_child)].state];
        for (int c = 0; c < node.child_count; ++c) {
          z[next[static_cast<std::size_t>(node.first_child + c)].state] -= shift;
        }
      }
      node.y = solve_y(driver, node.state, t, z, expect, opts);
      node.z = z;

      double f_val = driver.eval(node.state, t, node.y, z);
      double z_mean = 0.0;
      for (int c = 0; c < node.child_count; ++c) {
        const PathNode& ch = next[static_cast<std::size_t>(node.first_child + c)];
        z_mean += ax[ch.state] * z[ch.state];
      }
      for (int c = 0; c < node.child_count; ++c) {
        const PathNode& ch = next[static_cast<std::size_t>(node.first_child + c)];
        double predicted = node.y - f_val + z[ch.state] - z_mean;
        max_residual = std::max(max_residual, std::abs(ch.y - predicted));
      }
    }
  }
  out.max_one_step_residual = max_residual;
  return out;
}

MarkovianBsdeSolution solve_finite_horizon_markovian(const std::vector<TransitionMatrix>& kernels,
                                                     const Driver& driver, const Vec& terminal,
                                                     int horizon,
                                                     const FiniteHorizonOptions& opts) {
  const int n = driver.states();
  if (horizon < 1) raise(Errc::ValidationError, "horizon must be at least 1");
  check_kernels(kernels, n, horizon);
  if (terminal.size() != n) raise(Errc::DimensionMismatch, "terminal table has wrong length");
  check_y_monotone(driver, horizon);

  MarkovianBsdeSolution out;
  out.value.assign(static_cast<std::size_t>(horizon) + 1, Vec());
  out.z.assign(static_cast<std::size_t>(horizon), Vec());
  out.value[static_cast<std::size_t>(horizon)] = terminal;
  double max_residual = 0.0;
  for (int t = horizon - 1; t >= 0; --t) {
    const TransitionMatrix& a = kernel_at(kernels, t);
    const Vec& vnext = out.value[static_cast<std::size_t>(t) + 1];
    Vec vt(n);
    for (int x = 0; x < n; ++x) {
      double rhs = vnext.dot(a.column(x));
      vt[x] = solve_y(driver, x, t, vnext, rhs, opts);
      double res = vt[x] - driver.eval(x, t, vt[x], vnext) - rhs;
      max_residual = std::max(max_residual, std::abs(res));
    }
    out.value[static_cast<std::size_t>(t)] = std::move(vt);
    out.z[static_cast<std::size_t>(t)] = vnext;
  }
  out.max_residual = max_residual;
  return out;
}

namespace {

struct AffineSplit {
  double alpha_s;  // alpha * (level of v along the all-ones direction)
  Vec w;           // remainder with pi^T w = 0 (or anchored form on the fallback)
  bool centered;   // true when the stationary decomposition was available
};

// Solve ((1+alpha) I - K^T) v = c through the decomposition v = s*1 + w.
// The all-ones direction carries the 1/alpha blow-up; splitting it off keeps
// both parts well-conditioned as alpha -> 0.
AffineSplit stable_affine_solve(const TransitionMatrix& kernel, const Vec& cost, double alpha) {
  const int n = kernel.size();
  try {
    Distribution pi = stationary_distribution(kernel);
    double alpha_s = pi.weights().dot(cost);
    Vec g = cost - Vec::Constant(n, alpha_s);
    Mat shifted = (1.0 + alpha) * Mat::Identity(n, n) - kernel.matrix().transpose() +
                  Vec::Ones(n) * pi.weights().transpose();
    Vec w = shifted.partialPivLu().solve(g);
    return AffineSplit{alpha_s, std::move(w), true};
  } catch (const Error& e) {
    if (e.code() != Errc::NotUniformlyErgodic) throw;
    // Kernel with several closed classes or periodicity: fall back to the
    // direct solve (fine at moderate alpha, where this path is used).
    Mat m = (1.0 + alpha) * Mat::Identity(n, n) - kernel.matrix().transpose();
    Vec v = m.partialPivLu().solve(cost);
    double s = v[0];
    return AffineSplit{alpha * s, v - Vec::Constant(n, s), false};
  }
}

// Kernel/cost pair of the structured sweep at the current iterate.
void structured_model(const Driver& driver, const Vec& v, TransitionMatrix& kernel, Vec& cost) {
  const int n = driver.states();
  switch (driver.kind()) {
    case Driver::Kind::Linear:
      kernel = *driver.linear_psi();
      cost = *driver.linear_offset();
      return;
    case Driver::Kind::Hamiltonian: {
      const ControlModel& m = *driver.control_model();
      Mat k(n, n);
      cost.resize(n);
      for (int x = 0; x < n; ++x) {
        int u = driver.argmin_action(x, v);
        k.col(x) = m.kernel(u).matrix().col(x);
        cost[x] = m.cost(x, u);
      }
      kernel = TransitionMatrix::validate(std::move(k));
      return;
    }
    default: {
      kernel = equivalent_measure_matrix(driver, v, Vec::Zero(n));
      cost.resize(n);
      Vec zero = Vec::Zero(n);
      for (int x = 0; x < n; ++x) cost[x] = driver.eval(x, zero);
      return;
    }
  }
}

}  // namespace

DiscountedSolution solve_discounted(const TransitionMatrix& a, const Driver& driver, double alpha,
                                    double tol, const DiscountedOptions& opts) {
  const int n = a.size();
  if (driver.states() != n) raise(Errc::DimensionMismatch, "driver and kernel sizes differ");
  if (!(alpha > 0.0)) raise(Errc::ValidationError, "alpha must be positive");
  if (!(tol > 0.0)) raise(Errc::ValidationError, "tolerance must be positive");
  if (!driver.y_free() || !driver.time_free()) {
    raise(Errc::ValidationError, "discounted solver requires a y-free, time-free driver");
  }
  if (!driver.zero_bound()) raise(Errc::NoZeroBound, "driver does not declare |f(.,0)| <= C");
  if (opts.anchor < 0 || opts.anchor >= n) raise(Errc::ValidationError, "anchor out of range");
  const double c_bound = *driver.zero_bound();

  Vec v = opts.initial_guess.value_or(Vec::Zero(n));
  if (v.size() != n) raise(Errc::DimensionMismatch, "initial guess has wrong length");

  const double threshold = tol * alpha / (1.0 + alpha);
  const double err0 = c_bound / alpha + v.cwiseAbs().maxCoeff() + 1.0;
  const double est_iters = std::log(err0 / threshold) / std::log1p(alpha);

  bool plain_first = true;
  if (opts.method == DiscountedMethod::Structured) plain_first = false;
  if (opts.method == DiscountedMethod::Auto && driver.certified() &&
      est_iters > static_cast<double>(opts.plain_budget)) {
    plain_first = false;
  }

  long iterations = 0;
  double max_ratio = 0.0;
  bool converged = false;

  if (plain_first) {
    const long cap = opts.method == DiscountedMethod::PlainIteration
                         ? opts.max_plain_iterations
                         : std::min(opts.max_plain_iterations, 4 * opts.plain_budget);
    Vec next(n);
    double prev_delta = std::numeric_limits<double>::infinity();
    while (iterations < cap) {
      for (int x = 0; x < n; ++x) {
        next[x] = (driver.eval(x, v) + v.dot(a.column(x))) / (1.0 + alpha);
      }
      double delta = (next - v).cwiseAbs().maxCoeff();
      if (std::isfinite(prev_delta) && prev_delta > 1e-300) {
        max_ratio = std::max(max_ratio, delta / prev_delta);
      }
      prev_delta = delta;
      v = next;
      ++iterations;
      if (delta <= threshold) {
        converged = true;
        break;
      }
    }
    if (!converged && (opts.method == DiscountedMethod::PlainIteration || !driver.certified())) {
      raise(Errc::NoConvergence, "plain discounted iteration exhausted its budget");
    }
  }

  long sweeps = 0;
  bool used_structured = false;
  double residual = std::numeric_limits<double>::infinity();
  double alpha_s = alpha * v[opts.anchor];
  Vec w = v - Vec::Constant(n, v[opts.anchor]);

  auto centered_residual = [&](double as, const Vec& ww) {
    double r = 0.0;
    for (int x = 0; x < n; ++x) {
      double lhs = (1.0 + alpha) * ww[x] + as - driver.eval(x, ww) - ww.dot(a.column(x));
      r = std::max(r, std::abs(lhs));
    }
    return r / (1.0 + alpha);
  };

  if (!converged) {
    // Exact kernel solves through the certificate. Fixed points of this sweep
    // coincide with fixed points of the contraction, and the centred split
    // keeps the vanishing-discount outputs accurate at small alpha.
    used_structured = true;
    TransitionMatrix kernel = a;
    Vec cost;
    double floor = 0.0;
    for (; sweeps < opts.max_structured_sweeps; ++sweeps) {
      structured_model(driver, v, kernel, cost);
      AffineSplit split = stable_affine_solve(kernel, cost, alpha);
      alpha_s = split.alpha_s;
      w = std::move(split.w);
      v = Vec::Constant(n, alpha_s / alpha) + w;
      residual = centered_residual(alpha_s, w);
      floor = 32.0 * std::numeric_limits<double>::epsilon() *
              (std::abs(alpha_s) + (2.0 + alpha) * w.cwiseAbs().maxCoeff() + c_bound + 1.0);
      if (residual <= std::max(threshold, floor)) {
        ++sweeps;
        break;
      }
    }
    if (residual > std::max(threshold, 4.0 * floor)) {
      raise(Errc::NoConvergence, "structured discounted solve did not reach its target residual");
    }
  } else {
    residual = centered_residual(alpha_s, w);
  }

  DiscountedSolution out;
  out.alpha = alpha;
  out.v = v;
  out.zero_bound = c_bound;
  out.iterations = iterations;
  out.structured_sweeps = sweeps;
  out.structured = used_structured;
  out.residual = residual;
  out.truncation_bound = c_bound * std::pow(1.0 + alpha, -static_cast<double>(iterations)) / alpha;
  out.max_contraction_ratio = max_ratio;
  out.anchor = opts.anchor;
  out.alpha_v_anchor = alpha_s + alpha * w[opts.anchor];
  out.v_centered = w - Vec::Constant(n, w[opts.anchor]);

  if (v.cwiseAbs().maxCoeff() > c_bound / alpha + 1e-9 + 2.0 * tol) {
    raise(Errc::ComputeError, "discounted solution violates the C/alpha bound");
  }
  return out;
}

}  // namespace ebsde
