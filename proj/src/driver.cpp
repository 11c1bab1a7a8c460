#include "ebsde/driver.hpp"

#include <algorithm>
#include <cmath>

#include "ebsde/rng.hpp"

namespace ebsde {

Driver Driver::linear(const TransitionMatrix& base, const TransitionMatrix& psi, Vec offset,
                      double gamma) {
  if (psi.size() != base.size()) raise(Errc::DimensionMismatch, "psi and base kernel sizes differ");
  if (offset.size() != base.size()) raise(Errc::DimensionMismatch, "offset length differs");
  if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ValidationError, "gamma must lie in (0,1)");
  if (!is_gamma_equivalent(psi, base, gamma)) {
    raise(Errc::NotGammaEquivalent, "psi is not gamma-equivalent to the base kernel");
  }
  if (!offset.allFinite()) raise(Errc::ValidationError, "offset must be finite");
  Driver d(Kind::Linear, base);
  d.gamma_ = gamma;
  d.lipschitz_ = 1.0 / gamma;
  d.zero_bound_ = offset.size() > 0 ? offset.cwiseAbs().maxCoeff() : 0.0;
  d.linear_psi_ = std::make_shared<const TransitionMatrix>(psi);
  d.linear_offset_ = std::move(offset);
  return d;
}

Driver Driver::hamiltonian(ControlModel model) {
  Driver d(Kind::Hamiltonian, model.reference());
  d.gamma_ = model.gamma();
  d.lipschitz_ = 1.0 / model.gamma();
  double c = 0.0;
  for (int x = 0; x < model.states(); ++x) {
    double best = model.cost(x, 0);
    for (int u = 1; u < model.action_count(); ++u) best = std::min(best, model.cost(x, u));
    c = std::max(c, std::abs(best));
  }
  d.zero_bound_ = c;
  d.model_ = std::make_shared<const ControlModel>(std::move(model));
  return d;
}

Driver Driver::discounted(Driver inner, double alpha) {
  if (!inner.y_free()) raise(Errc::ValidationError, "inner driver must be y-free");
  if (!(alpha > 0.0)) raise(Errc::ValidationError, "alpha must be positive");
  Driver d(Kind::Discounted, inner.base());
  d.y_free_ = false;
  d.time_free_ = inner.time_free();
  d.zero_bound_ = inner.zero_bound();  // |f(x, 0) - alpha * 0| = |g(x, 0)|
  d.discount_alpha_ = alpha;
  d.inner_ = std::make_shared<const Driver>(std::move(inner));
  return d;
}

Driver Driver::custom(const TransitionMatrix& base, EvalFn eval, CustomDriverTraits traits) {
  Driver d(Kind::Custom, base);
  d.y_free_ = traits.y_free;
  d.time_free_ = traits.time_free;
  d.gamma_ = traits.gamma;
  d.zero_bound_ = traits.zero_bound;
  d.lipschitz_ = traits.lipschitz;
  if (!d.lipschitz_ && traits.gamma) d.lipschitz_ = 1.0 / *traits.gamma;
  d.custom_eval_ = std::move(eval);
  d.custom_psi_ = std::move(traits.psi);
  return d;
}

double Driver::eval(int x, int t, double y, const Vec& z) const {
  switch (kind_) {
    case Kind::Linear: {
      const Mat& psi = linear_psi_->matrix();
      return (*linear_offset_)[x] + z.dot(psi.col(x) - base_.matrix().col(x));
    }
    case Kind::Hamiltonian: {
      const ControlModel& m = *model_;
      double best = m.cost(x, 0) + z.dot(m.kernel(0).matrix().col(x) - base_.matrix().col(x));
      for (int u = 1; u < m.action_count(); ++u) {
        double val = m.cost(x, u) + z.dot(m.kernel(u).matrix().col(x) - base_.matrix().col(x));
        if (val < best) best = val;
      }
      return best;
    }
    case Kind::Discounted:
      return inner_->eval(x, t, 0.0, z) - discount_alpha_ * y;
    case Kind::Custom:
      return custom_eval_(x, t, y, z);
  }
  raise(Errc::ComputeError, "unreachable driver kind");
}

int Driver::argmin_action(int x, const Vec& z) const {
  if (kind_ != Kind::Hamiltonian) raise(Errc::ValidationError, "argmin requires a Hamiltonian driver");
  const ControlModel& m = *model_;
  int best_u = 0;
  double best = m.cost(x, 0) + z.dot(m.kernel(0).matrix().col(x) - base_.matrix().col(x));
  for (int u = 1; u < m.action_count(); ++u) {
    double val = m.cost(x, u) + z.dot(m.kernel(u).matrix().col(x) - base_.matrix().col(x));
    if (val < best) {
      best = val;
      best_u = u;
    }
  }
  return best_u;
}

bool Driver::certified() const {
  if (!gamma_ || !y_free_ || !time_free_) return false;
  switch (kind_) {
    case Kind::Linear:
    case Kind::Hamiltonian:
      return true;
    case Kind::Custom:
      return static_cast<bool>(custom_psi_);
    case Kind::Discounted:
      return false;
  }
  return false;
}

Vec Driver::psi_field(int x, const Vec& z, const Vec& z_prime) const {
  if (!certified()) raise(Errc::NoCertificate, "driver carries no gamma-balanced certificate");
  switch (kind_) {
    case Kind::Linear:
      return linear_psi_->column(x);
    case Kind::Custom:
      return custom_psi_(x, z, z_prime);
    case Kind::Hamiltonian:
      break;
    default:
      raise(Errc::NoCertificate, "driver carries no gamma-balanced certificate");
  }

  // Interpolate between the extreme kernel directions so that
  //   f(x,z) - f(x,z') = (z - z')^T (psi - Ax)
  // holds exactly; the interpolation weight lies in [0,1] because the
  // Hamiltonian increment is sandwiched between the extremes.
  const ControlModel& m = *model_;
  Vec d = z - z_prime;
  int u_lo = 0, u_hi = 0;
  double lo = d.dot(m.kernel(0).matrix().col(x));
  double hi = lo;
  for (int u = 1; u < m.action_count(); ++u) {
    double s = d.dot(m.kernel(u).matrix().col(x));
    if (s < lo) {
      lo = s;
      u_lo = u;
    }
    if (s > hi) {
      hi = s;
      u_hi = u;
    }
  }
  double target = eval(x, z) - eval(x, z_prime) + d.dot(base_.matrix().col(x));
  double denom = hi - lo;
  double mu = 0.5;  // 0/0 convention
  if (std::abs(denom) >= 1e-14) {
    mu = (hi - target) / denom;
    mu = std::clamp(mu, 0.0, 1.0);
  }
  return mu * m.kernel(u_lo).matrix().col(x) + (1.0 - mu) * m.kernel(u_hi).matrix().col(x);
}

TransitionMatrix equivalent_measure_matrix(const Driver& driver, const Vec& z,
                                           const Vec& z_prime) {
  if (!driver.certified()) raise(Errc::NoCertificate, "driver carries no certificate");
  const int n = driver.states();
  Mat psi(n, n);
  for (int x = 0; x < n; ++x) psi.col(x) = driver.psi_field(x, z, z_prime);
  TransitionMatrix out = TransitionMatrix::validate(std::move(psi));
  if (!is_gamma_equivalent(out, driver.base(), *driver.gamma())) {
    raise(Errc::NotGammaEquivalent, "psi field violates its own certificate");
  }
  return out;
}

LipschitzReport lipschitz_check(const Driver& driver, long trials, std::uint64_t seed) {
  if (!driver.gamma()) raise(Errc::NoCertificate, "lipschitz check requires gamma");
  Rng rng = Rng::stream(seed, "lipschitz_check");
  const int n = driver.states();
  double max_ratio = 0.0;
  long used = 0;
  Vec z(n), zp(n);
  for (long k = 0; k < trials; ++k) {
    int x = rng.uniform_int(n);
    for (int i = 0; i < n; ++i) {
      z[i] = rng.uniform(-2.0, 2.0);
      zp[i] = rng.uniform(-2.0, 2.0);
    }
    double semi = seminorm_m(driver.base(), x, z - zp);
    if (semi < 1e-10) continue;
    double diff = std::abs(driver.eval(x, 0, 0.0, z) - driver.eval(x, 0, 0.0, zp));
    max_ratio = std::max(max_ratio, diff / semi);
    ++used;
  }
  return LipschitzReport{max_ratio, max_ratio <= 1.0 / *driver.gamma() + 1e-8, used};
}

ControlModel ControlModel::validate(TransitionMatrix reference, double gamma,
                                    std::vector<std::string> action_names,
                                    std::vector<TransitionMatrix> kernels, Mat cost) {
  if (kernels.empty()) raise(Errc::EmptyActionSet, "control model needs at least one action");
  if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ValidationError, "gamma must lie in (0,1)");
  if (action_names.size() != kernels.size()) {
    raise(Errc::ValidationError, "action name count differs from kernel count");
  }
  const int n = reference.size();
  if (cost.rows() != n || cost.cols() != static_cast<Eigen::Index>(kernels.size())) {
    raise(Errc::DimensionMismatch, "cost matrix must be states x actions");
  }
  if (!cost.allFinite()) raise(Errc::ValidationError, "costs must be finite");
  for (std::size_t u = 0; u < kernels.size(); ++u) {
    if (kernels[u].size() != n) raise(Errc::DimensionMismatch, "kernel size differs from reference");
    if (!is_gamma_equivalent(kernels[u], reference, gamma)) {
      raise(Errc::NotGammaEquivalent,
            "kernel for action '" + action_names[u] + "' is not gamma-equivalent to the reference");
    }
  }
  return ControlModel(std::move(reference), gamma, std::move(action_names), std::move(kernels),
                      std::move(cost));
}

}  // namespace ebsde
