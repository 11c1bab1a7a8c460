#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ebsde/errors.hpp"

namespace ebsde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tolerance separating rounding noise from a genuine stochasticity defect.
inline constexpr double kStochasticTol = 1e-12;
/// Entries below this are treated as structural zeros of the support digraph.
inline constexpr double kStructuralZero = 1e-15;

/// Column-stochastic transition matrix: entry(i, j) = P(next = i | current = j).
/// Immutable after validation; states are 0-based indices into the standard basis.
class TransitionMatrix {
 public:
  static TransitionMatrix validate(Mat raw);

  int size() const { return static_cast<int>(m_.cols()); }
  const Mat& matrix() const { return m_; }
  double entry(int next, int current) const { return m_(next, current); }
  Vec column(int j) const { return m_.col(j); }

  /// True when the entry is a genuine (structural) transition.
  bool structurally_positive(int next, int current) const {
    return m_(next, current) > kStructuralZero;
  }

 private:
  explicit TransitionMatrix(Mat m) : m_(std::move(m)) {}
  Mat m_;
};

/// Probability vector on the state space.
class Distribution {
 public:
  static Distribution validate(Vec weights);
  static Distribution point_mass(int n, int state);

  int size() const { return static_cast<int>(w_.size()); }
  const Vec& weights() const { return w_; }
  double operator[](int i) const { return w_[i]; }

 private:
  explicit Distribution(Vec w) : w_(std::move(w)) {}
  Vec w_;
};

enum class ChainClass { UniformlyErgodic, Reducible, Periodic };

struct ErgodicityClassification {
  ChainClass kind;
  int period;                     // > 1 only when kind == Periodic
  int closed_class_count;
  std::vector<int> closed_class;  // states of the unique closed class (when unique)
  std::vector<bool> transient;    // per-state flag
};

/// Structural classification of the support digraph: a chain is uniformly
/// ergodic iff it has exactly one closed communicating class and that class
/// is aperiodic.
ErgodicityClassification classify_uniform_ergodicity(const TransitionMatrix& a);

/// Unique invariant distribution, by a dense least-squares solve of
/// (A - I)pi = 0 stacked with the normalisation row. Requires uniform ergodicity.
Distribution stationary_distribution(const TransitionMatrix& a);

/// B >= gamma * A componentwise (within kStochasticTol).
bool is_gamma_controlled(const TransitionMatrix& b, const TransitionMatrix& a, double gamma);

/// Mutual gamma-control: same zero pattern with entry ratios in [gamma, 1/gamma].
bool is_gamma_equivalent(const TransitionMatrix& a, const TransitionMatrix& b, double gamma);

struct MartingaleCovariance {
  int state;
  Mat matrix;  // diag(Ax) - (Ax)(Ax)^T; symmetric PSD, all-ones vector in kernel
};

/// Conditional covariance of the one-step martingale difference at a state.
MartingaleCovariance martingale_covariance(const TransitionMatrix& a, int state);

/// Stochastic seminorm sqrt(z^T cov z), clamped at zero for tiny negatives.
double seminorm_m(const TransitionMatrix& a, int state, const Vec& z);

/// Total variation distance (1/2) * sum |mu_i - nu_i|.
double tv_distance(const Distribution& mu, const Distribution& nu);

/// Law of X_t given X_0 ~ nu: A^t nu.
Distribution marginal_law(const TransitionMatrix& a, const Distribution& nu, int t);

}  // namespace ebsde
