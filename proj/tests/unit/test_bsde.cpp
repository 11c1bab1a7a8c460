#include <doctest.h>

#include <cmath>

#include "ebsde/bsde.hpp"
#include "helpers.hpp"

using namespace ebsde;
using namespace ebsde::testing;

namespace {

Driver zero_driver(const TransitionMatrix& a) {
  return Driver::linear(a, a, Vec::Zero(a.size()), 0.5);
}

}  // namespace

TEST_CASE("martingale representation") {
  TransitionMatrix a = chain_a();

  Vec w0 = Vec::Zero(2);
  CHECK(martingale_represent(a, 0, w0).cwiseAbs().maxCoeff() == 0.0);

  Vec w(2);
  w << 0.3, -0.7;
  Vec z = martingale_represent(a, 0, w);
  CHECK(z[0] == doctest::Approx(0.3));
  CHECK(z[1] == doctest::Approx(-0.7));
  // Z^T (e_i - Ax) reproduces W on every reachable state.
  Vec ax = a.column(0);
  for (int i = 0; i < 2; ++i) {
    CHECK(z.dot(Vec::Unit(2, i) - ax) == doctest::Approx(w[i]).epsilon(1e-12));
  }

  Vec bad(2);
  bad << 1.0, 1.0;  // constant nonzero conditional mean
  CHECK_THROWS_AS(martingale_represent(a, 0, bad), Error);

  // Unreachable components are zeroed.
  Mat m(2, 2);
  m << 1.0, 0.4, 0.0, 0.6;
  TransitionMatrix part = TransitionMatrix::validate(m);
  Vec w2(2);
  w2 << 0.0, 5.0;
  Vec z2 = martingale_represent(part, 0, w2);
  CHECK(z2[1] == 0.0);
}

TEST_CASE("finite horizon with zero driver equals conditional expectations") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 2 + rng.uniform_int(3);
    int horizon = 2 + rng.uniform_int(4);
    TransitionMatrix a = random_chain(n, rng);
    Vec phi(n);
    for (int i = 0; i < n; ++i) phi[i] = rng.uniform(-2.0, 2.0);

    Driver f0 = Driver::linear(a, a, Vec::Zero(n), 0.5);
    auto sol = solve_finite_horizon(
        {a}, Distribution::point_mass(n, 0), f0,
        [&](const std::vector<int>& path) { return phi[path.back()]; }, horizon);

    CHECK(sol.max_one_step_residual < 1e-9);
    // Oracle: phi^T A^{T-t} e_x by repeated multiplication.
    for (int t = 0; t <= horizon; ++t) {
      Vec expect = phi;
      for (int s = 0; s < horizon - t; ++s) expect = a.matrix().transpose() * expect;
      for (const auto& node : sol.layers[static_cast<std::size_t>(t)]) {
        CHECK(node.y == doctest::Approx(expect[node.state]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("finite horizon with f = -y halves the terminal value each step") {
  TransitionMatrix a = chain_a();
  Driver f = Driver::custom(
      a, [](int, int, double y, const Vec&) { return -y; },
      CustomDriverTraits{false, true, std::nullopt, 0.0, std::nullopt, nullptr});
  const int horizon = 6;
  auto sol = solve_finite_horizon({a}, Distribution::point_mass(2, 0), f,
                                  [](const std::vector<int>&) { return 1.0; }, horizon);
  for (int t = 0; t <= horizon; ++t) {
    double expected = std::pow(2.0, -(horizon - t));
    for (const auto& node : sol.layers[static_cast<std::size_t>(t)]) {
      CHECK(node.y == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("deterministic terminal at horizon one") {
  TransitionMatrix a = chain_a();
  auto sol = solve_finite_horizon({a}, Distribution::point_mass(2, 0), zero_driver(a),
                                  [](const std::vector<int>&) { return 3.25; }, 1);
  CHECK(sol.layers[0][0].y == doctest::Approx(3.25));
  CHECK(seminorm_m(a, 0, sol.layers[0][0].z) < 1e-12);
}

TEST_CASE("path explosion is detected") {
  Rng rng(43);
  TransitionMatrix a = random_chain(4, rng);
  FiniteHorizonOptions opts;
  opts.node_cap = 100;
  CHECK_THROWS_AS(solve_finite_horizon({a}, Distribution::point_mass(4, 0), zero_driver(a),
                                       [](const std::vector<int>&) { return 0.0; }, 8, opts),
                  Error);
}

TEST_CASE("markovian recursion against matrix powers and constants") {
  Rng rng(47);
  TransitionMatrix a = random_chain(3, rng);
  Vec phi(3);
  phi << 1.0, -0.5, 2.0;
  auto sol = solve_finite_horizon_markovian({a}, zero_driver(a), phi, 5);
  Vec expect = phi;
  for (int t = 5; t-- > 0;) {
    expect = a.matrix().transpose() * expect;
    CHECK((sol.value[static_cast<std::size_t>(t)] - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  // Constant terminal with zero driver stays constant.
  auto flat = solve_finite_horizon_markovian({a}, zero_driver(a), Vec::Constant(3, 4.0), 7);
  for (const auto& v : flat.value) {
    CHECK((v.array() - 4.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("discounted-form driver gives the scalar recursion v = (1 + v)/2") {
  TransitionMatrix a = chain_a();
  Driver ones = Driver::linear(a, a, Vec::Ones(2), 0.5);
  Driver g = Driver::discounted(ones, 1.0);
  const int horizon = 10;
  auto sol = solve_finite_horizon_markovian({a}, g, Vec::Zero(2), horizon);
  for (int t = 0; t <= horizon; ++t) {
    double expected = 0.0;
    for (int k = 1; k <= horizon - t; ++k) expected += std::pow(2.0, -k);
    CHECK((sol.value[static_cast<std::size_t>(t)].array() - expected).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("markovian and path-tree solvers agree at every reachable node") {
  Rng rng(53);
  for (int trial = 0; trial < 6; ++trial) {
    int n = 2 + rng.uniform_int(3);
    int horizon = 2 + rng.uniform_int(5);
    TransitionMatrix a = random_chain(n, rng);
    TransitionMatrix psi = random_equivalent(a, 0.5, rng);
    Vec c(n);
    for (int i = 0; i < n; ++i) c[i] = rng.uniform(-1.0, 1.0);
    Driver f = Driver::linear(a, psi, c, 0.5);
    Vec phi(n);
    for (int i = 0; i < n; ++i) phi[i] = rng.uniform(-2.0, 2.0);

    auto tree = solve_finite_horizon(
        {a}, Distribution::validate(rng.dirichlet(n)), f,
        [&](const std::vector<int>& path) { return phi[path.back()]; }, horizon);
    auto table = solve_finite_horizon_markovian({a}, f, phi, horizon);

    for (int t = 0; t <= horizon; ++t) {
      for (const auto& node : tree.layers[static_cast<std::size_t>(t)]) {
        CHECK(node.y ==
              doctest::Approx(table.value[static_cast<std::size_t>(t)][node.state]).epsilon(1e-9));
      }
    }
    // Z tables agree modulo the all-ones direction on reachable components.
    for (int t = 0; t < horizon; ++t) {
      const Vec& zv = table.z[static_cast<std::size_t>(t)];
      for (const auto& node : tree.layers[static_cast<std::size_t>(t)]) {
        CHECK(seminorm_m(a, node.state, node.z - zv) < 1e-9);
      }
    }
  }
}

TEST_CASE("adding multiples of the ones vector to Z changes nothing") {
  TransitionMatrix a = chain_a();
  Rng rng(59);
  for (int k = 0; k < 100; ++k) {
    Vec z(2);
    z << rng.uniform(-2, 2), rng.uniform(-2, 2);
    double c = rng.uniform(-10, 10);
    int x = rng.uniform_int(2);
    CHECK(seminorm_m(a, x, z + Vec::Constant(2, c)) ==
          doctest::Approx(seminorm_m(a, x, z)).epsilon(1e-10));
  }
}

TEST_CASE("time-dependent kernels are honoured") {
  Rng rng(61);
  TransitionMatrix a0 = random_chain(3, rng);
  TransitionMatrix a1 = random_chain(3, rng);
  Vec phi(3);
  phi << 1.0, 0.0, -1.0;
  Driver f = Driver::linear(a0, a0, Vec::Zero(3), 0.5);
  auto sol = solve_finite_horizon_markovian({a0, a1}, f, phi, 2);
  Vec expect = a0.matrix().transpose() * (a1.matrix().transpose() * phi);
  CHECK((sol.value[0] - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("discounted solver: constant driver has the exact fixed point c/alpha") {
  TransitionMatrix a = chain_a();
  Vec c = Vec::Constant(2, 0.8);
  Driver f = Driver::linear(a, a, c, 0.5);
  auto sol = solve_discounted(a, f, 0.4, 1e-11);
  CHECK((sol.v.array() - 0.8 / 0.4).abs().maxCoeff() < 1e-10);
}

TEST_CASE("discounted solver matches the direct linear-solve oracle") {
  TransitionMatrix a = chain_a();
  Vec c(2);
  c << 1.0, 0.0;
  Driver f = Driver::linear(a, a, c, 0.5);
  auto sol = solve_discounted(a, f, 1.0, 1e-11);
  Mat sys = 2.0 * Mat::Identity(2, 2) - a.matrix().transpose();
  Vec oracle = sys.partialPivLu().solve(c);
  CHECK((sol.v - oracle).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sol.residual < 1e-11);

  // The bound ||v|| <= C / alpha.
  CHECK(sol.v.cwiseAbs().maxCoeff() <= sol.zero_bound / sol.alpha + 1e-9);
}

TEST_CASE("plain iteration contracts at rate 1/(1+alpha) step by step") {
  Rng rng(67);
  TransitionMatrix a = random_chain(4, rng);
  TransitionMatrix psi = random_equivalent(a, 0.5, rng);
  Vec c(4);
  for (int i = 0; i < 4; ++i) c[i] = rng.uniform(-1, 1);
  Driver f = Driver::linear(a, psi, c, 0.5);
  const double alpha = 0.3;

  Vec v = Vec::Zero(4);
  double prev_delta = -1.0;
  for (int k = 0; k < 200; ++k) {
    Vec next(4);
    for (int x = 0; x < 4; ++x) next[x] = (f.eval(x, v) + v.dot(a.column(x))) / (1.0 + alpha);
    double delta = (next - v).cwiseAbs().maxCoeff();
    if (prev_delta >= 0.0) {
      CHECK(delta <= prev_delta / (1.0 + alpha) + 1e-12);
    }
    prev_delta = delta;
    v = next;
  }
}

TEST_CASE("truncation error obeys the geometric bound") {
  TransitionMatrix a = chain_a();
  Vec c(2);
  c << 1.0, -0.5;
  Driver g = Driver::linear(a, chain_b(), c, 0.5);
  const double alpha = 0.5;
  auto limit = solve_discounted(a, g, alpha, 1e-12);
  Driver wrapped = Driver::discounted(g, alpha);
  const double c_bound = *g.zero_bound();
  for (int horizon : {2, 5, 9, 14}) {
    auto finite = solve_finite_horizon_markovian({a}, wrapped, Vec::Zero(2), horizon);
    double err = (finite.value[0] - limit.v).cwiseAbs().maxCoeff();
    CHECK(err <= c_bound * std::pow(1.0 + alpha, -horizon) / alpha + 1e-10);
  }
}

TEST_CASE("uniqueness: both initial guesses land on the same fixed point") {
  Rng rng(71);
  TransitionMatrix a = random_chain(3, rng);
  TransitionMatrix psi = random_equivalent(a, 0.5, rng);
  Vec c(3);
  for (int i = 0; i < 3; ++i) c[i] = rng.uniform(-1, 1);
  Driver f = Driver::linear(a, psi, c, 0.5);
  const double alpha = 0.2, tol = 1e-11;

  DiscountedOptions from_zero;
  from_zero.method = DiscountedMethod::PlainIteration;
  auto s1 = solve_discounted(a, f, alpha, tol, from_zero);

  DiscountedOptions from_cap;
  from_cap.method = DiscountedMethod::PlainIteration;
  from_cap.initial_guess = Vec::Constant(3, *f.zero_bound() / alpha);
  auto s2 = solve_discounted(a, f, alpha, tol, from_cap);

  CHECK((s1.v - s2.v).cwiseAbs().maxCoeff() < 2 * tol);
}

TEST_CASE("structured and plain paths agree") {
  Rng rng(73);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 2 + rng.uniform_int(3);
    TransitionMatrix a = random_chain(n, rng);
    TransitionMatrix psi = random_equivalent(a, 0.5, rng);
    Vec c(n);
    for (int i = 0; i < n; ++i) c[i] = rng.uniform(-1, 1);
    Driver f = Driver::linear(a, psi, c, 0.5);

    DiscountedOptions plain;
    plain.method = DiscountedMethod::PlainIteration;
    DiscountedOptions structured;
    structured.method = DiscountedMethod::Structured;
    auto sp = solve_discounted(a, f, 0.5, 1e-12, plain);
    auto ss = solve_discounted(a, f, 0.5, 1e-12, structured);
    CHECK((sp.v - ss.v).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(sp.alpha_v_anchor == doctest::Approx(ss.alpha_v_anchor).epsilon(1e-10));
  }
}

TEST_CASE("hamiltonian drivers solve through policy iteration at small alpha") {
  Rng rng(79);
  ControlModel model = random_control_model(4, 3, 0.5, rng);
  Driver h = Driver::hamiltonian(model);
  auto sol = solve_discounted(model.reference(), h, 1e-7, 1e-10);
  CHECK(sol.structured);
  CHECK(sol.residual <= 1e-10);
  // Bellman fixed point: (1+alpha) v(x) = min_u { L + v^T B^u x }.
  for (int x = 0; x < 4; ++x) {
    double best = 1e12;
    for (int u = 0; u < 3; ++u) {
      best = std::min(best, model.cost(x, u) + sol.v.dot(model.kernel(u).matrix().col(x)));
    }
    CHECK((1.0 + sol.alpha) * sol.v[x] == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("missing zero bound is reported") {
  TransitionMatrix a = chain_a();
  Driver f = Driver::custom(a, [](int, int, double, const Vec&) { return 1.0; },
                            CustomDriverTraits{true, true, std::nullopt, std::nullopt,
                                               std::nullopt, nullptr});
  CHECK_THROWS_AS(solve_discounted(a, f, 0.5, 1e-10), Error);
  try {
    solve_discounted(a, f, 0.5, 1e-10);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoZeroBound);
  }
}
