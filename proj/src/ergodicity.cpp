#include "ebsde/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ebsde/rng.hpp"

namespace ebsde {

SplitKernel build_split(const TransitionMatrix& a, const TransitionMatrix& b, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ValidationError, "gamma must lie in (0,1)");
  if (!is_gamma_controlled(b, a, gamma)) {
    raise(Errc::NotGammaControlled, "B is not gamma-controlled by A");
  }
  const int n = a.size();
  Mat c = (b.matrix() - gamma * a.matrix()) / (1.0 - gamma);
  c = c.cwiseMax(0.0);  // clear rounding noise at the control boundary
  TransitionMatrix residual = TransitionMatrix::validate(std::move(c));

  Mat big(2 * n, 2 * n);
  for (int x = 0; x < n; ++x) {
    big.col(x) = split_vector(residual.column(x), gamma);
    big.col(n + x) = split_vector(a.column(x), gamma);
  }
  return SplitKernel{a, b, std::move(residual), gamma, std::move(big)};
}

Vec split_vector(const Vec& phi, double gamma) {
  const int n = static_cast<int>(phi.size());
  Vec out(2 * n);
  out.head(n) = (1.0 - gamma) * phi;
  out.tail(n) = gamma * phi;
  return out;
}

double split_commutation_check(const TransitionMatrix& a, const TransitionMatrix& b, double gamma,
                               int t) {
  if (t < 0) raise(Errc::ValidationError, "time must be nonnegative");
  SplitKernel split = build_split(a, b, gamma);
  const int n = a.size();
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    Vec base = Vec::Unit(n, j);
    Vec split_law = split_vector(base, gamma);
    for (int s = 0; s < t; ++s) {
      base = b.matrix() * base;
      split_law = split.big * split_law;
    }
    worst = std::max(worst, (split_vector(base, gamma) - split_law).cwiseAbs().maxCoeff());
    // Marginal collapse: the split law projected across layers is the B-law.
    worst = std::max(worst,
                     (split_law.head(n) + split_law.tail(n) - base).cwiseAbs().maxCoeff());
  }
  return worst;
}

namespace {

struct ProductChain {
  Mat off;   // off(cur, next) = P(next | cur) restricted to off-diagonal next
  Vec hit;   // hit(cur) = P(next is diagonal | cur)
};

// Two independent copies of the A-chain on ordered pairs; pairs are indexed
// x * N + y. The diagonal is removed as a destination, matching T >= 1.
ProductChain product_chain(const TransitionMatrix& a) {
  const int n = a.size();
  const int m = n * n;
  ProductChain out;
  out.off = Mat::Zero(m, m);
  out.hit = Vec::Zero(m);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      const int cur = x * n + y;
      for (int xn = 0; xn < n; ++xn) {
        double px = a.entry(xn, x);
        if (px <= kStructuralZero) continue;
        for (int yn = 0; yn < n; ++yn) {
          double p = px * a.entry(yn, y);
          if (p <= 0.0) continue;
          if (xn == yn) {
            out.hit[cur] += p;
          } else {
            out.off(cur, xn * n + yn) = p;
          }
        }
      }
    }
  }
  return out;
}

// Spectral radius of a nonnegative matrix by iterated survival norms.
double spectral_radius(const Mat& m) {
  const int dim = static_cast<int>(m.rows());
  Vec v = Vec::Ones(dim);
  double estimate = 0.0;
  double prev = -1.0;
  for (int outer = 0; outer < 512; ++outer) {
    Vec next = m * v;
    double norm = next.cwiseAbs().maxCoeff();
    if (norm <= 0.0) return 0.0;  // nilpotent: everything meets in bounded time
    estimate = norm / v.cwiseAbs().maxCoeff();
    v = next / norm;
    if (outer > 32 && std::abs(estimate - prev) < 1e-13 * std::max(estimate, 1e-30)) break;
    prev = estimate;
  }
  return estimate;
}

void require_uniformly_ergodic(const TransitionMatrix& a) {
  auto cls = classify_uniform_ergodicity(a);
  if (cls.kind != ChainClass::UniformlyErgodic) {
    raise(Errc::NotUniformlyErgodic, "reference chain is not uniformly ergodic");
  }
}

}  // namespace

MgfResult meeting_mgf(const TransitionMatrix& a, double beta) {
  if (beta < 0.0) raise(Errc::ValidationError, "beta must be nonnegative");
  require_uniformly_ergodic(a);
  ProductChain pc = product_chain(a);
  const int m = static_cast<int>(pc.hit.size());
  double scale = std::exp(beta);
  double radius = scale * spectral_radius(pc.off);
  if (radius >= 1.0 - 1e-10) {
    return MgfResult{false, std::numeric_limits<double>::infinity(), radius};
  }
  Mat sys = Mat::Identity(m, m) - scale * pc.off;
  Vec rhs = scale * pc.hit;
  Vec mgf = sys.partialPivLu().solve(rhs);
  if (!mgf.allFinite() || mgf.minCoeff() < 1.0 - 1e-9) {
    return MgfResult{false, std::numeric_limits<double>::infinity(), radius};
  }
  return MgfResult{true, mgf.maxCoeff(), radius};
}

double q_gamma(const TransitionMatrix& a, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ValidationError, "gamma must lie in (0,1)");
  require_uniformly_ergodic(a);
  ProductChain pc = product_chain(a);
  const int m = static_cast<int>(pc.hit.size());
  const double s = gamma * gamma;
  Mat sys = Mat::Identity(m, m) - s * pc.off;
  Vec rhs = s * pc.hit;
  Vec pgf = sys.partialPivLu().solve(rhs);
  double q = pgf.minCoeff();
  if (!(q > 0.0 && q < 1.0)) {
    raise(Errc::ComputeError, "q_gamma outside (0,1): " + std::to_string(q));
  }
  return q;
}

double improve_bound(double beta_star, double k_bound, double eps) {
  if (!(beta_star > 0.0 && k_bound > 0.0 && eps > 0.0)) {
    raise(Errc::ValidationError, "improve_bound needs positive arguments");
  }
  return beta_star * std::min(eps / k_bound, 1.0);
}

namespace {

// MGF of Geom(p) (support >= 1) at s, defined for e^s (1-p) < 1.
double geometric_mgf(double s, double p) {
  double es = std::exp(s);
  return p * es / (1.0 - (1.0 - p) * es);
}

}  // namespace

double beta_from_geometrics(double gamma, double q_gamma_value) {
  if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ValidationError, "gamma must lie in (0,1)");
  if (!(q_gamma_value > 0.0 && q_gamma_value < 1.0)) {
    raise(Errc::ValidationError, "q_gamma must lie in (0,1)");
  }
  const double g2 = gamma * gamma;
  const double target = 0.5 * (1.0 + 1.0 / (1.0 - q_gamma_value));
  // Validity boundary of both MGFs; the product blows up as 2 beta approaches it.
  const double s_max = -std::log(std::max(g2, 1.0 - g2));
  auto product = [&](double beta) {
    return geometric_mgf(2.0 * beta, 1.0 - g2) * geometric_mgf(2.0 * beta, g2);
  };
  double lo = 0.0;
  double hi = 0.5 * s_max * (1.0 - 1e-12);
  if (product(hi) <= target) return hi;
  while (hi - lo > 1e-12) {
    double mid = 0.5 * (lo + hi);
    (product(mid) <= target ? lo : hi) = mid;
  }
  return lo;
}

ErgodicityCertificate certificate(const TransitionMatrix& a, double gamma, double eps) {
  if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ValidationError, "gamma must lie in (0,1)");
  if (!(eps > 0.0 && eps < 1.0)) raise(Errc::ValidationError, "epsilon must lie in (0,1)");
  require_uniformly_ergodic(a);

  const double q = q_gamma(a, gamma);
  const double beta_geometric = beta_from_geometrics(gamma, q);
  double beta = beta_geometric;
  MgfResult mgf = meeting_mgf(a, 2.0 * beta);
  for (int shrink = 0; !mgf.finite; ++shrink) {
    if (shrink >= 200) raise(Errc::ComputeError, "could not find beta with finite G*(2 beta)");
    beta *= 0.5;
    mgf = meeting_mgf(a, 2.0 * beta);
  }
  // sup E[e^{beta T-hat}] <= gamma sqrt(G*(2b)/(1-q)) / (1 - sqrt(1 - q/2)).
  const double h_star_bound = gamma * std::sqrt(mgf.value / (1.0 - q)) /
                              (1.0 - std::sqrt(1.0 - 0.5 * q));
  const double beta_tilde = improve_bound(beta, h_star_bound, eps);

  ErgodicityCertificate cert;
  cert.gamma = gamma;
  cert.epsilon = eps;
  cert.q_gamma = q;
  cert.beta_geometric = beta_geometric;
  cert.beta_used = beta;
  cert.g_star_2beta = mgf.value;
  cert.h_star_bound = h_star_bound;
  cert.beta_tilde = beta_tilde;
  cert.r = 1.0 + eps;
  cert.rho = beta_tilde;
  return cert;
}

EnvelopeReport verify_envelope(const ErgodicityCertificate& cert, const TransitionMatrix& a,
                               double gamma, int samples, int t_max, std::uint64_t seed) {
  if (samples < 1) raise(Errc::ValidationError, "need at least one sample");
  if (t_max < 0) raise(Errc::ValidationError, "t_max must be nonnegative");
  const int n = a.size();
  Rng rng = Rng::stream(seed, "verify_envelope");
  double worst = std::numeric_limits<double>::infinity();

  for (int s = 0; s < samples; ++s) {
    Mat bm;
    if (s == 0) {
      bm = a.matrix();  // A controls itself
    } else if (s <= n) {
      // Extreme directions of the controlled set: rank-one remainder.
      bm = gamma * a.matrix() + (1.0 - gamma) * Vec::Unit(n, s - 1) * Eigen::RowVectorXd::Ones(n);
    } else {
      Mat e(n, n);
      for (int j = 0; j < n; ++j) e.col(j) = rng.dirichlet(n);
      bm = gamma * a.matrix() + (1.0 - gamma) * e;
    }
    TransitionMatrix b = TransitionMatrix::validate(std::move(bm));
    Distribution pi = stationary_distribution(b);
    Mat laws = Mat::Identity(n, n);  // column x = law of X_t given X_0 = x
    for (int t = 0; t <= t_max; ++t) {
      double tv = 0.0;
      for (int x = 0; x < n; ++x) {
        tv = std::max(tv, 0.5 * (laws.col(x) - pi.weights()).lpNorm<1>());
      }
      worst = std::min(worst, cert.r * std::exp(-cert.rho * t) - tv);
      if (t < t_max) laws = b.matrix() * laws;
    }
  }
  return EnvelopeReport{worst, worst >= -1e-10, samples, t_max};
}

CouplingStats simulate_coupling(const SplitKernel& split, double beta, double q_gamma_value,
                                long runs, std::uint64_t seed, int start_x, int start_y) {
  const int n = split.a.size();
  const int dim = 2 * n;
  if (start_x < 0 || start_x >= dim || start_y < 0 || start_y >= dim) {
    raise(Errc::ValidationError, "split start state out of range");
  }
  if (runs < 1) raise(Errc::ValidationError, "need at least one run");

  auto in_layer1 = [&](int s) { return s >= n; };
  constexpr long kHorizonCap = 10'000'000;

  Rng root = Rng::stream(seed, "simulate_coupling");
  double sum = 0.0, sum_sq = 0.0;
  std::vector<long> k_hist;
  std::vector<long> t1_hist;
  long s_violations = 0;
  double gap_sum = 0.0;
  long gap_count = 0;

  for (long run = 0; run < runs; ++run) {
    Rng rng = root.child(static_cast<std::uint64_t>(run));
    int xs = start_x, ys = start_y;
    long meet_s = (xs == ys) ? 0 : -1;
    long k_count = 0;
    long last_marker = 0;
    long first_marker = -1;
    bool both1_prev = in_layer1(xs) && in_layer1(ys);
    long meet_t = -1;
    for (long t = 1; t <= kHorizonCap; ++t) {
      xs = rng.sample(split.big.col(xs));
      ys = rng.sample(split.big.col(ys));
      bool both1 = in_layer1(xs) && in_layer1(ys);
      if (meet_s < 0 && xs == ys) meet_s = t;
      if (both1 && !both1_prev) {
        ++k_count;
        if (first_marker < 0) first_marker = t;
        if (last_marker > 0) {
          gap_sum += static_cast<double>(t - last_marker);
          ++gap_count;
        }
        last_marker = t;
      }
      if (both1_prev && both1 && xs == ys) {
        meet_t = t;
        break;
      }
      both1_prev = both1;
    }
    if (meet_t < 0) raise(Errc::ComputeError, "coupling simulation exceeded its horizon cap");
    if (meet_s < 0 || meet_s > meet_t) ++s_violations;

    double val = std::exp(beta * static_cast<double>(meet_s));
    sum += val;
    sum_sq += val * val;
    if (k_hist.size() <= static_cast<std::size_t>(k_count)) k_hist.resize(k_count + 1, 0);
    ++k_hist[static_cast<std::size_t>(k_count)];
    if (first_marker >= 0) {
      std::size_t bucket = std::min<std::size_t>(static_cast<std::size_t>(first_marker), 511);
      if (t1_hist.size() <= bucket) t1_hist.resize(bucket + 1, 0);
      ++t1_hist[bucket];
    }
  }

  const double mean = sum / static_cast<double>(runs);
  double var = (sum_sq - sum * sum / static_cast<double>(runs)) /
               std::max<double>(1.0, static_cast<double>(runs - 1));
  var = std::max(var, 0.0);

  long k_violations = 0;
  for (std::size_t k = 0; k < k_hist.size(); ++k) {
    double p_hat = static_cast<double>(k_hist[k]) / static_cast<double>(runs);
    double bound = split.gamma * split.gamma *
                   std::pow(1.0 - q_gamma_value, static_cast<double>(k) - 1.0);
    double sigma = std::sqrt(std::max(p_hat * (1.0 - p_hat), 1e-12) / static_cast<double>(runs));
    if (p_hat > bound + 3.0 * sigma) ++k_violations;
  }

  CouplingStats stats;
  stats.runs = runs;
  stats.beta = beta;
  stats.mgf_mean = mean;
  stats.mgf_stderr = std::sqrt(var / static_cast<double>(runs));
  stats.k_histogram = std::move(k_hist);
  stats.t1_histogram = std::move(t1_hist);
  stats.s_le_t_violations = s_violations;
  stats.k_bound_violations = k_violations;
  stats.mean_marker_gap = gap_count > 0 ? gap_sum / static_cast<double>(gap_count) : 0.0;
  return stats;
}

}  // namespace ebsde
