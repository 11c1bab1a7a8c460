#pragma once

#include <cstdint>
#include <vector>

#include "ebsde/chain.hpp"

namespace ebsde {

/// Nummelin split of a controlled kernel: C = (B - gamma A) / (1 - gamma) and
/// the 2N x 2N split kernel on X x {0,1} whose first N columns move by C and
/// last N columns move by A, each split (1-gamma)/gamma across the layers.
struct SplitKernel {
  TransitionMatrix a;
  TransitionMatrix b;
  TransitionMatrix residual;  // C
  double gamma;
  Mat big;                    // the split kernel, layer 0 first
};

SplitKernel build_split(const TransitionMatrix& a, const TransitionMatrix& b, double gamma);

/// Splitting map ((1-gamma) phi, gamma phi).
Vec split_vector(const Vec& phi, double gamma);

/// Max deviation over basis starts between split-then-evolve and
/// evolve-then-split at time t, together with the marginal collapse identity.
double split_commutation_check(const TransitionMatrix& a, const TransitionMatrix& b, double gamma,
                               int t);

struct MgfResult {
  bool finite;
  double value;            // sup over ordered start pairs of E[e^{beta T}]
  double spectral_radius;  // of the off-diagonal product kernel scaled by e^beta
};

/// Exponential moment G*(beta) of the first meeting time (T >= 1) of two
/// independent copies of the chain, via a linear solve on the product chain.
MgfResult meeting_mgf(const TransitionMatrix& a, double beta);

/// Infimum over ordered start pairs of the first-meeting-time generating
/// function evaluated at gamma^2. Lies in (0, 1) for uniformly ergodic chains.
double q_gamma(const TransitionMatrix& a, double gamma);

/// Given G(beta*) <= K, every beta in [0, beta* min(eps/K, 1)] has G <= 1+eps.
double improve_bound(double beta_star, double k_bound, double eps);

/// Largest beta (bisection) with E[e^{2 beta (Q1+Q2)}] <= (1 + 1/(1-q))/2 for
/// Q1 ~ Geom(1-gamma^2), Q2 ~ Geom(gamma^2).
double beta_from_geometrics(double gamma, double q_gamma_value);

/// Uniform-ergodicity constants valid for every B controlled by A at level
/// gamma: sup_x || B^t delta_x - pi_B ||_TV <= R e^{-rho t}.
struct ErgodicityCertificate {
  double gamma;
  double epsilon;
  double q_gamma;
  double beta_geometric;  // from the geometric-trials bound
  double beta_used;       // after shrinking until G*(2 beta) is finite
  double g_star_2beta;
  double h_star_bound;    // bound on sup E[e^{beta S}] over the split chain
  double beta_tilde;
  double r;               // 1 + epsilon
  double rho;             // beta_tilde
};

ErgodicityCertificate certificate(const TransitionMatrix& a, double gamma, double eps);

struct EnvelopeReport {
  double worst_margin;  // min over samples and times of R e^{-rho t} - TV
  bool pass;
  int samples;
  int t_max;
};

/// Exact total-variation decay check of the certificate envelope over sampled
/// kernels B >= gamma A (always including B = A and the rank-one extremes).
EnvelopeReport verify_envelope(const ErgodicityCertificate& cert, const TransitionMatrix& a,
                               double gamma, int samples, int t_max, std::uint64_t seed);

struct CouplingStats {
  long runs;
  double beta;
  double mgf_mean;     // Monte Carlo estimate of E[e^{beta S}]
  double mgf_stderr;
  std::vector<long> k_histogram;    // counts of K at the layer-1 meeting time
  std::vector<long> t1_histogram;   // counts of the first marker time t_1
  long s_le_t_violations;           // samplewise S <= T-check failures
  long k_bound_violations;          // empirical P(K = k) above the geometric bound + 3 sigma
  double mean_marker_gap;           // average of t_k - t_{k-1}
};

/// Simulate two independent split chains and report meeting-time statistics.
/// Start states are indices into the split space (layer 0 first).
CouplingStats simulate_coupling(const SplitKernel& split, double beta, double q_gamma_value,
                                long runs, std::uint64_t seed, int start_x, int start_y);

}  // namespace ebsde
