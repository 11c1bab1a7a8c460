#include "ebsde/ebsde.hpp"

#include <cmath>
#include <limits>

#include "ebsde/rng.hpp"

namespace ebsde {

EbsdeSolution solve_ebsde(const TransitionMatrix& a, const Driver& driver,
                          const EbsdeOptions& opts) {
  const int n = a.size();
  if (driver.states() != n) raise(Errc::DimensionMismatch, "driver and kernel sizes differ");
  if (opts.anchor < 0 || opts.anchor >= n) raise(Errc::ValidationError, "anchor out of range");
  if (!(opts.tol > 0.0)) raise(Errc::ValidationError, "tolerance must be positive");
  if (!(opts.ratio > 0.0 && opts.ratio < 1.0)) {
    raise(Errc::ValidationError, "schedule ratio must lie in (0,1)");
  }
  auto cls = classify_uniform_ergodicity(a);
  if (cls.kind != ChainClass::UniformlyErgodic) {
    raise(Errc::NotUniformlyErgodic, "ergodic equation needs a uniformly ergodic chain");
  }
  if (!driver.certified()) {
    raise(Errc::NoCertificate, "ergodic solver requires a gamma-balanced driver");
  }
  if (!driver.zero_bound()) raise(Errc::NoZeroBound, "driver does not declare |f(.,0)| <= C");

  const double c_bound = *driver.zero_bound();
  ErgodicityCertificate cert =
      opts.cert ? *opts.cert : certificate(a, *driver.gamma(), opts.cert_epsilon);
  const double c_prime = 2.0 * c_bound * cert.r / (1.0 - std::exp(-cert.rho));

  std::vector<double> alphas_used;
  std::vector<EbsdeAlphaTrace> trace;
  double lambda = 0.0;
  Vec v;

  double prev_lambda = std::numeric_limits<double>::quiet_NaN();
  Vec prev_centered;
  Vec prev_v;       // raw table of the previous level, for warm starts
  Vec prev_prev_v;  // and the level before it, for the extrapolated guess
  bool done = false;

  for (int step = 0; step <= opts.max_steps && !done; ++step) {
    const double alpha = opts.alpha0 * std::pow(opts.ratio, step);
    DiscountedOptions dopts;
    dopts.anchor = opts.anchor;
    if (prev_v.size() == n && prev_prev_v.size() == n) {
      // v^alpha is affine in 1/alpha to first order, so extrapolate linearly.
      const double b2 = 1.0 / alpha;
      const double b1 = b2 * opts.ratio;
      const double b0 = b1 * opts.ratio;
      dopts.initial_guess = prev_v + (prev_v - prev_prev_v) * ((b2 - b1) / (b1 - b0));
    } else if (prev_v.size() == n) {
      dopts.initial_guess = prev_v;
    }
    DiscountedSolution sol = solve_discounted(a, driver, alpha, opts.tol * alpha, dopts);

    const double lambda_n = sol.alpha_v_anchor;
    const Vec& centered = sol.v_centered;
    alphas_used.push_back(alpha);

    EbsdeAlphaTrace tr;
    tr.alpha = alpha;
    tr.spread = centered.cwiseAbs().maxCoeff();
    tr.alpha_sup_v = std::abs(lambda_n) + alpha * tr.spread;
    tr.plain_iterations = sol.iterations;
    tr.structured_sweeps = sol.structured_sweeps;
    tr.lambda_gap = std::numeric_limits<double>::quiet_NaN();
    tr.v_gap = std::numeric_limits<double>::quiet_NaN();

    if (step > 0) {
      tr.lambda_gap = std::abs(lambda_n - prev_lambda);
      tr.v_gap = (centered - prev_centered).cwiseAbs().maxCoeff();
      if (tr.lambda_gap < opts.tol && tr.v_gap < opts.tol) {
        lambda = lambda_n;
        v = centered;
        done = true;
      }
    }
    trace.push_back(tr);

    prev_lambda = lambda_n;
    prev_centered = centered;
    prev_prev_v = prev_v;
    prev_v = sol.v;
  }
  if (!done) {
    raise(Errc::NoConvergence, "vanishing-discount schedule exhausted its budget");
  }

  EbsdeResidual res = ebsde_residual(a, driver, v, lambda);
  if (res.recurrent > 10.0 * opts.tol) {
    raise(Errc::ComputeError, "ergodic vector-equation residual " +
                                  std::to_string(res.recurrent) + " exceeds 10x tolerance");
  }
  return EbsdeSolution{std::move(v),
                       lambda,
                       opts.anchor,
                       std::move(alphas_used),
                       res.recurrent,
                       res.transient,
                       stationary_distribution(a),
                       c_prime,
                       cert,
                       std::move(trace),
                       cls.transient,
                       cls.transient[static_cast<std::size_t>(opts.anchor)]};
}

EbsdeResidual ebsde_residual(const TransitionMatrix& a, const Driver& driver, const Vec& v,
                             double lambda) {
  const int n = a.size();
  if (v.size() != n) raise(Errc::DimensionMismatch, "value table has wrong length");
  auto cls = classify_uniform_ergodicity(a);
  EbsdeResidual out{0.0, 0.0};
  for (int x = 0; x < n; ++x) {
    double r = std::abs(v[x] - driver.eval(x, v) + lambda - v.dot(a.column(x)));
    if (cls.transient[static_cast<std::size_t>(x)]) {
      out.transient = std::max(out.transient, r);
    } else {
      out.recurrent = std::max(out.recurrent, r);
    }
  }
  return out;
}

LambdaIdentities lambda_identities(const TransitionMatrix& a, const Driver& driver,
                                   const EbsdeSolution& sol) {
  const int n = a.size();
  double via_pi = 0.0;
  for (int x = 0; x < n; ++x) via_pi += sol.pi[x] * driver.eval(x, sol.v);

  TransitionMatrix psi = equivalent_measure_matrix(driver, sol.v, Vec::Zero(n));
  Distribution pi_v = stationary_distribution(psi);
  Vec zero = Vec::Zero(n);
  double via_pi_v = 0.0;
  for (int x = 0; x < n; ++x) via_pi_v += pi_v[x] * driver.eval(x, zero);

  return LambdaIdentities{sol.lambda, via_pi, via_pi_v};
}

ComparisonResult compare_drivers(const TransitionMatrix& a, const Driver& f,
                                 const Driver& f_prime, double tol) {
  const int n = a.size();
  if (f.states() != n || f_prime.states() != n) {
    raise(Errc::DimensionMismatch, "driver sizes differ from the kernel");
  }
  // Sampled dominance check: all states, random z draws (plus z = 0).
  Rng rng = Rng::stream(0xd011'1a4cULL, "compare_drivers");
  Vec z = Vec::Zero(n);
  for (int x = 0; x < n; ++x) {
    if (f.eval(x, z) < f_prime.eval(x, z) - 1e-12) {
      raise(Errc::DominanceNotVerified, "f < f' at z = 0, state " + std::to_string(x));
    }
  }
  for (int k = 0; k < 1000; ++k) {
    for (int i = 0; i < n; ++i) z[i] = rng.uniform(-3.0, 3.0);
    for (int x = 0; x < n; ++x) {
      if (f.eval(x, z) < f_prime.eval(x, z) - 1e-12) {
        raise(Errc::DominanceNotVerified, "sampling found f < f' at state " + std::to_string(x));
      }
    }
  }
  EbsdeOptions opts;
  opts.tol = tol;
  EbsdeSolution sol = solve_ebsde(a, f, opts);
  EbsdeOptions opts2 = opts;
  opts2.cert = sol.cert;  // same gamma class: the certificate is shared
  if (f.gamma() != f_prime.gamma()) opts2.cert.reset();
  EbsdeSolution sol2 = solve_ebsde(a, f_prime, opts2);
  return ComparisonResult{sol.lambda, sol2.lambda, sol.lambda >= sol2.lambda - tol};
}

}  // namespace ebsde
