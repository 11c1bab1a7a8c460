#include <doctest.h>

#include "ebsde/chain.hpp"
#include "helpers.hpp"

using namespace ebsde;
using namespace ebsde::testing;

TEST_CASE("validate_stochastic accepts valid kernels and rejects defects") {
  CHECK_NOTHROW(TransitionMatrix::validate(Mat::Identity(2, 2)));
  CHECK_NOTHROW(chain_a());

  Mat bad(2, 2);
  bad << 0.7, 0.4, 0.2, 0.6;  // first column sums to 0.9
  try {
    TransitionMatrix::validate(bad);
    FAIL("expected NonStochastic");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonStochastic);
    CHECK(std::string(e.what()).find("column 0") != std::string::npos);
  }

  Mat neg(2, 2);
  neg << 1.2, 0.4, -0.2, 0.6;
  CHECK_THROWS_AS(TransitionMatrix::validate(neg), Error);

  Mat rect(2, 3);
  rect.setZero();
  CHECK_THROWS_AS(TransitionMatrix::validate(rect), Error);
}

TEST_CASE("classification: identity, cycle, mixing chain") {
  auto id = classify_uniform_ergodicity(TransitionMatrix::validate(Mat::Identity(2, 2)));
  CHECK(id.kind == ChainClass::Reducible);
  CHECK(id.closed_class_count == 2);

  Mat cyc(2, 2);
  cyc << 0, 1, 1, 0;
  auto per = classify_uniform_ergodicity(TransitionMatrix::validate(cyc));
  CHECK(per.kind == ChainClass::Periodic);
  CHECK(per.period == 2);

  // Brute-force cross-check on the mixing chain: positive powers and a self
  // loop make it uniformly ergodic.
  auto ue = classify_uniform_ergodicity(chain_a());
  CHECK(ue.kind == ChainClass::UniformlyErgodic);
  CHECK(ue.closed_class.size() == 2);
  CHECK_FALSE(ue.transient[0]);
}

TEST_CASE("classification covers transient states and longer periods") {
  // State 0 drains into the 2-cycle {1, 2}.
  Mat m(3, 3);
  m << 0.0, 0.0, 0.0,
       0.5, 0.0, 1.0,
       0.5, 1.0, 0.0;
  auto cls = classify_uniform_ergodicity(TransitionMatrix::validate(m));
  CHECK(cls.kind == ChainClass::Periodic);
  CHECK(cls.period == 2);
  CHECK(cls.transient[0]);

  // Adding a self loop to state 1 breaks the period.
  m << 0.0, 0.0, 0.0,
       0.5, 0.1, 1.0,
       0.5, 0.9, 0.0;
  auto cls2 = classify_uniform_ergodicity(TransitionMatrix::validate(m));
  CHECK(cls2.kind == ChainClass::UniformlyErgodic);
  CHECK(cls2.transient[0]);
  CHECK_FALSE(cls2.transient[1]);
}

TEST_CASE("stationary distribution: exact example and power-iteration oracle") {
  CHECK_THROWS_AS(stationary_distribution(TransitionMatrix::validate(Mat::Identity(2, 2))),
                  Error);

  auto pi = stationary_distribution(chain_a());
  CHECK(pi[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(3.0 / 7.0).epsilon(1e-12));

  // Absorbing state: all columns point at state 1.
  Mat abs(3, 3);
  abs << 0, 0, 0, 1, 1, 1, 0, 0, 0;
  auto delta = stationary_distribution(TransitionMatrix::validate(abs));
  CHECK(delta[1] == doctest::Approx(1.0));

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + rng.uniform_int(5);
    TransitionMatrix a = random_chain(n, rng);
    auto p = stationary_distribution(a);
    CHECK((a.matrix() * p.weights() - p.weights()).cwiseAbs().maxCoeff() < 1e-10);
    for (int x = 0; x < n; ++x) {
      auto law = marginal_law(a, Distribution::point_mass(n, x), 200);
      CHECK(tv_distance(law, p) < 1e-6);
    }
  }
}

TEST_CASE("gamma relations") {
  TransitionMatrix a = chain_a();
  TransitionMatrix b = chain_b();
  CHECK(is_gamma_controlled(a, a, 0.9));
  CHECK(is_gamma_equivalent(a, a, 0.3));

  // Componentwise ratio scan: extremes 4/7 and 3/6 -> gamma = 0.5 works.
  CHECK(is_gamma_equivalent(a, b, 0.5));
  CHECK_FALSE(is_gamma_equivalent(a, b, 0.6));

  Mat with_zero(2, 2);
  with_zero << 1.0, 0.4, 0.0, 0.6;
  TransitionMatrix z = TransitionMatrix::validate(with_zero);
  CHECK_FALSE(is_gamma_controlled(z, a, 0.1));  // zero where A is positive
  CHECK(is_gamma_controlled(a, z, 0.5));

  Mat small = Mat::Identity(3, 3);
  CHECK_THROWS_AS(is_gamma_controlled(TransitionMatrix::validate(small), a, 0.5), Error);
}

TEST_CASE("martingale covariance and seminorm") {
  TransitionMatrix a = chain_a();
  auto cov = martingale_covariance(a, 0);
  CHECK(cov.matrix.rows() == 2);
  CHECK((cov.matrix - cov.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(cov.matrix.rowwise().sum().cwiseAbs().maxCoeff() < 1e-15);

  Vec ones = Vec::Ones(2);
  CHECK(seminorm_m(a, 0, ones) == 0.0);

  Vec z(2);
  z << 1.0, 0.0;
  // Variance of a Bernoulli(0.7) indicator.
  CHECK(seminorm_m(a, 0, z) == doctest::Approx(std::sqrt(0.21)).epsilon(1e-12));

  // Shift invariance and brute-force quadratic form on random instances.
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    TransitionMatrix m = random_chain(5, rng);
    int x = rng.uniform_int(5);
    Vec zz(5);
    for (int i = 0; i < 5; ++i) zz[i] = rng.uniform(-3.0, 3.0);
    double direct = seminorm_m(m, x, zz);
    Vec ax = m.column(x);
    double brute = 0.0;
    for (int i = 0; i < 5; ++i) {
      double diff = zz[i] - zz.dot(ax);
      brute += ax[i] * diff * diff;
    }
    CHECK(direct * direct == doctest::Approx(brute).epsilon(1e-12));
    double c = rng.uniform(-5.0, 5.0);
    CHECK(seminorm_m(m, x, zz + Vec::Constant(5, c)) == doctest::Approx(direct).epsilon(1e-9));

    // PSD with the all-ones kernel direction.
    auto mc = martingale_covariance(m, x);
    Eigen::SelfAdjointEigenSolver<Mat> es(mc.matrix);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("tv distance and marginal law") {
  TransitionMatrix a = chain_a();
  auto d1 = Distribution::point_mass(2, 0);
  auto d2 = Distribution::point_mass(2, 1);
  CHECK(tv_distance(d1, d1) == 0.0);
  CHECK(tv_distance(d1, d2) == 1.0);

  auto law = marginal_law(a, d1, 1);
  CHECK(law[0] == doctest::Approx(0.7));
  CHECK(law[1] == doctest::Approx(0.3));

  // TV contraction under the kernel.
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 2 + rng.uniform_int(4);
    TransitionMatrix m = random_chain(n, rng);
    Distribution mu = Distribution::validate(rng.dirichlet(n));
    Distribution nu = Distribution::validate(rng.dirichlet(n));
    CHECK(tv_distance(marginal_law(m, mu, 1), marginal_law(m, nu, 1)) <=
          tv_distance(mu, nu) + 1e-12);
  }
}

TEST_CASE("matrix powers stay stochastic") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 2 + rng.uniform_int(5);
    TransitionMatrix a = random_chain(n, rng);
    Mat p = Mat::Identity(n, n);
    for (int t = 0; t < 64; ++t) p = a.matrix() * p;
    CHECK((p.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK(p.minCoeff() > -1e-12);
  }
}

TEST_CASE("gamma-equivalent kernels share their classification") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + rng.uniform_int(4);
    TransitionMatrix a = random_chain(n, rng);
    TransitionMatrix b = random_equivalent(a, 0.4, rng);
    CHECK(is_gamma_equivalent(a, b, 0.4));
    auto ca = classify_uniform_ergodicity(a);
    auto cb = classify_uniform_ergodicity(b);
    CHECK(ca.kind == cb.kind);
    CHECK(ca.closed_class_count == cb.closed_class_count);
  }
}
