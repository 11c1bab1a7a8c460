#pragma once

#include <optional>
#include <vector>

#include "ebsde/bsde.hpp"
#include "ebsde/chain.hpp"
#include "ebsde/driver.hpp"
#include "ebsde/ergodicity.hpp"

namespace ebsde {

struct EbsdeOptions {
  int anchor = 0;          // state with v(anchor) = 0
  double tol = 1e-8;
  double alpha0 = 1.0;
  double ratio = 0.5;      // geometric discount schedule alpha_{n+1} = ratio * alpha_n
  int max_steps = 60;
  double cert_epsilon = 0.5;
  std::optional<ErgodicityCertificate> cert;  // reuse a precomputed certificate
};

struct EbsdeAlphaTrace {
  double alpha;
  double spread;        // max_x |v^alpha(x) - v^alpha(anchor)|
  double alpha_sup_v;   // alpha * ||v^alpha||_inf
  double lambda_gap;    // Cauchy gap of alpha v^alpha(anchor), NaN at the first level
  double v_gap;         // Cauchy gap of the centred tables
  long plain_iterations;
  long structured_sweeps;
};

/// Bounded stationary Markovian solution (v, lambda) of the ergodic equation,
/// extracted as the vanishing-discount limit of the discounted solutions.
struct EbsdeSolution {
  Vec v;        // normalised v(anchor) = 0
  double lambda;
  int anchor;
  std::vector<double> alphas_used;   // descending schedule actually run
  double residual;                   // vector-equation residual on recurrent states
  double transient_residual;         // same, on transient states (0 when none)
  Distribution pi;                   // ergodic measure of the reference chain
  double c_prime;                    // 2 C R / (1 - e^{-rho})
  ErgodicityCertificate cert;
  std::vector<EbsdeAlphaTrace> trace;
  std::vector<bool> transient_states;
  bool anchor_is_transient;
};

EbsdeSolution solve_ebsde(const TransitionMatrix& a, const Driver& driver,
                          const EbsdeOptions& opts = {});

/// max_x |v(x) - f(x, v) + lambda - v^T A x| over the given states.
struct EbsdeResidual {
  double recurrent;
  double transient;  // 0 when the chain has no transient states
};

EbsdeResidual ebsde_residual(const TransitionMatrix& a, const Driver& driver, const Vec& v,
                             double lambda);

struct LambdaIdentities {
  double lambda;
  double via_pi;    // integral of f(., v) against the ergodic measure of A
  double via_pi_v;  // integral of f(., 0) against the ergodic measure of Psi^{v,0}
};

LambdaIdentities lambda_identities(const TransitionMatrix& a, const Driver& driver,
                                   const EbsdeSolution& sol);

struct ComparisonResult {
  double lambda;
  double lambda_prime;
  bool ordered;  // lambda >= lambda' - tol
};

/// Comparison theorem check: requires f >= f' pointwise (verified by sampling
/// all states and random z draws; throws DominanceNotVerified otherwise).
ComparisonResult compare_drivers(const TransitionMatrix& a, const Driver& f, const Driver& f_prime,
                                 double tol);

}  // namespace ebsde
