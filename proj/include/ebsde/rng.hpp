#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace ebsde {

/// Deterministic splitmix64 generator. All Monte Carlo code derives its
/// streams from a single root seed so that reports are byte-reproducible
/// and independent of evaluation order across operations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Stream derived from a root seed and a stable stream name.
  static Rng stream(std::uint64_t root, std::string_view name) {
    return Rng(mix(root, fnv1a(name)));
  }

  /// Per-sample child stream (used to keep parallelisable loops order-free).
  Rng child(std::uint64_t index) const { return Rng(mix(state_, 0x9e3779b97f4a7c15ULL + index)); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in {0, ..., n-1}.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  /// Sample an index from a probability vector (linear cumulative scan).
  int sample(const Eigen::VectorXd& probs) {
    double u = uniform01();
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;  // guard against rounding in the final bucket
  }

  /// Column-stochastic vector with Dirichlet(1,...,1) law.
  Eigen::VectorXd dirichlet(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      double u = uniform01();
      v[i] = -std::log(1.0 - u);
    }
    v /= v.sum();
    return v;
  }

 private:
  static std::uint64_t fnv1a(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace ebsde
