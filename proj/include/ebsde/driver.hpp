#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "ebsde/chain.hpp"
#include "ebsde/control_model.hpp"

namespace ebsde {

/// Declared traits of a user-supplied driver. The library can verify the
/// certificate by sampling but cannot prove bounds for black-box code, so
/// custom drivers must state their own constants.
struct CustomDriverTraits {
  bool y_free = true;
  bool time_free = true;
  std::optional<double> gamma;
  std::optional<double> zero_bound;  // C with |f(x, t, 0)| <= C
  std::optional<double> lipschitz;
  std::function<Vec(int, const Vec&, const Vec&)> psi;  // optional certificate field
};

/// BSDE generator f(x, t, y, z) with optional gamma-balanced certificate.
///
/// Built-in kinds:
///  - Linear:      f(x, z) = c(x) + z^T (Psi - A) x, with Psi ~gamma A;
///  - Hamiltonian: f(x, z) = min_u { L(x, u) + z^T (B^u - A) x };
///  - Discounted:  f(x, y, z) = g(x, z) - alpha * y for an inner y-free g;
///  - Custom:      arbitrary evaluator with declared traits.
class Driver {
 public:
  enum class Kind { Linear, Hamiltonian, Discounted, Custom };

  using EvalFn = std::function<double(int x, int t, double y, const Vec& z)>;

  static Driver linear(const TransitionMatrix& base, const TransitionMatrix& psi, Vec offset,
                       double gamma);
  static Driver hamiltonian(ControlModel model);
  static Driver discounted(Driver inner, double alpha);
  static Driver custom(const TransitionMatrix& base, EvalFn eval, CustomDriverTraits traits);

  double eval(int x, int t, double y, const Vec& z) const;
  /// Convenience for y-free, time-free drivers.
  double eval(int x, const Vec& z) const { return eval(x, 0, 0.0, z); }

  Kind kind() const { return kind_; }
  int states() const { return base_.size(); }
  const TransitionMatrix& base() const { return base_; }
  bool y_free() const { return y_free_; }
  bool time_free() const { return time_free_; }

  std::optional<double> gamma() const { return gamma_; }
  std::optional<double> zero_bound() const { return zero_bound_; }
  std::optional<double> lipschitz_bound() const { return lipschitz_; }
  /// True when the driver carries a usable gamma-balanced certificate.
  bool certified() const;

  /// Stochastic field psi(x, z, z') realising
  ///   f(x, z) - f(x, z') = (z - z')^T (psi - A x),
  /// with componentwise psi_i / (Ax)_i in [gamma, 1/gamma]. Throws NoCertificate
  /// when the driver carries no certificate.
  Vec psi_field(int x, const Vec& z, const Vec& z_prime) const;

  /// Index of the minimising action of the Hamiltonian at (x, z);
  /// ties break to the lowest index.
  int argmin_action(int x, const Vec& z) const;

  const ControlModel* control_model() const { return model_.get(); }
  const TransitionMatrix* linear_psi() const { return linear_psi_.get(); }
  const Vec* linear_offset() const { return linear_offset_ ? &*linear_offset_ : nullptr; }
  const Driver* inner() const { return inner_.get(); }
  double discount_alpha() const { return discount_alpha_; }

 private:
  Driver(Kind kind, TransitionMatrix base) : kind_(kind), base_(std::move(base)) {}

  Kind kind_;
  TransitionMatrix base_;
  bool y_free_ = true;
  bool time_free_ = true;
  std::optional<double> gamma_;
  std::optional<double> zero_bound_;
  std::optional<double> lipschitz_;
  // payloads
  std::shared_ptr<const TransitionMatrix> linear_psi_;
  std::optional<Vec> linear_offset_;
  std::shared_ptr<const ControlModel> model_;
  std::shared_ptr<const Driver> inner_;
  double discount_alpha_ = 0.0;
  EvalFn custom_eval_;
  std::function<Vec(int, const Vec&, const Vec&)> custom_psi_;
};

/// Deterministic transition matrix Psi^{Z,Z'} whose column x is
/// psi_field(x, Z, Z'); validated gamma-equivalent to the driver's base kernel.
TransitionMatrix equivalent_measure_matrix(const Driver& driver, const Vec& z, const Vec& z_prime);

struct LipschitzReport {
  double max_ratio;
  bool pass;
  long samples_used;
};

/// Monte Carlo check of |f(x,z) - f(x,z')| <= (1/gamma) ||z - z'||_M at x.
LipschitzReport lipschitz_check(const Driver& driver, long trials, std::uint64_t seed);

}  // namespace ebsde
