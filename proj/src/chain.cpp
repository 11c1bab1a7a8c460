#include "ebsde/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ebsde {

TransitionMatrix TransitionMatrix::validate(Mat raw) {
  if (raw.rows() != raw.cols()) {
    raise(Errc::DimensionMismatch, "transition matrix must be square");
  }
  const int n = static_cast<int>(raw.cols());
  if (n < 1) raise(Errc::ValidationError, "state space must be nonempty");
  for (int j = 0; j < n; ++j) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      double v = raw(i, j);
      if (!std::isfinite(v)) raise(Errc::ValidationError, "non-finite entry");
      if (v < -kStochasticTol) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") = " << v;
        raise(Errc::NegativeEntry, os.str());
      }
      if (v > 1.0 + kStochasticTol) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") = " << v << " exceeds 1";
        raise(Errc::NonStochastic, os.str());
      }
      if (v < 0.0) raw(i, j) = 0.0;  // rounding noise below tolerance
      sum += raw(i, j);
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      std::ostringstream os;
      os << "column " << j << " sums to " << sum;
      raise(Errc::NonStochastic, os.str());
    }
  }
  return TransitionMatrix(std::move(raw));
}

Distribution Distribution::validate(Vec weights) {
  const int n = static_cast<int>(weights.size());
  if (n < 1) raise(Errc::ValidationError, "distribution must be nonempty");
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = weights[i];
    if (!std::isfinite(v)) raise(Errc::ValidationError, "non-finite weight");
    if (v < -kStochasticTol) raise(Errc::NegativeEntry, "negative weight");
    if (v < 0.0) weights[i] = 0.0;
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > kStochasticTol) {
    raise(Errc::NonStochastic, "weights sum to " + std::to_string(sum));
  }
  return Distribution(std::move(weights));
}

Distribution Distribution::point_mass(int n, int state) {
  Vec w = Vec::Zero(n);
  w[state] = 1.0;
  return Distribution(std::move(w));
}

namespace {

// Support digraph as adjacency lists: edge j -> i iff a_ij structurally positive.
std::vector<std::vector<int>> support_digraph(const TransitionMatrix& a) {
  const int n = a.size();
  std::vector<std::vector<int>> adj(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (a.structurally_positive(i, j)) adj[j].push_back(i);
    }
  }
  return adj;
}

// Iterative Tarjan strongly-connected components. Returns component id per
// node; ids are in reverse topological order of the condensation.
std::vector<int> tarjan_scc(const std::vector<std::vector<int>>& adj, int& component_count) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), lowlink(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int next_index = 0;
  component_count = 0;

  struct Frame {
    int node;
    std::size_t edge;
  };

  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call;
    call.push_back({root, 0});
    index[root] = lowlink[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.edge < adj[f.node].size()) {
        int w = adj[f.node][f.edge++];
        if (index[w] == -1) {
          index[w] = lowlink[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          lowlink[f.node] = std::min(lowlink[f.node], index[w]);
        }
      } else {
        if (lowlink[f.node] == index[f.node]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp[w] = component_count;
            if (w == f.node) break;
          }
          ++component_count;
        }
        int done = f.node;
        call.pop_back();
        if (!call.empty()) {
          lowlink[call.back().node] = std::min(lowlink[call.back().node], lowlink[done]);
        }
      }
    }
  }
  return comp;
}

// gcd of (d[u] + 1 - d[v]) over intra-class edges, with d the BFS levels:
// equals the period of the strongly connected class.
int class_period(const std::vector<std::vector<int>>& adj, const std::vector<int>& members) {
  const int n = static_cast<int>(adj.size());
  std::vector<bool> in_class(n, false);
  for (int v : members) in_class[v] = true;
  std::vector<int> level(n, -1);
  std::vector<int> queue;
  queue.push_back(members.front());
  level[members.front()] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    for (int v : adj[u]) {
      if (!in_class[v]) continue;
      if (level[v] == -1) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  int g = 0;
  for (int u : members) {
    for (int v : adj[u]) {
      if (!in_class[v]) continue;
      g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
    }
  }
  return g == 0 ? 1 : g;
}

}  // namespace

ErgodicityClassification classify_uniform_ergodicity(const TransitionMatrix& a) {
  const int n = a.size();
  auto adj = support_digraph(a);
  int ncomp = 0;
  auto comp = tarjan_scc(adj, ncomp);

  // A component is closed iff no edge leaves it.
  std::vector<bool> closed(ncomp, true);
  for (int u = 0; u < n; ++u) {
    for (int v : adj[u]) {
      if (comp[v] != comp[u]) closed[comp[u]] = false;
    }
  }
  int closed_count = 0;
  int closed_id = -1;
  for (int c = 0; c < ncomp; ++c) {
    if (closed[c]) {
      ++closed_count;
      closed_id = c;
    }
  }

  ErgodicityClassification out;
  out.closed_class_count = closed_count;
  out.transient.assign(n, true);
  if (closed_count != 1) {
    out.kind = ChainClass::Reducible;
    out.period = 1;
    return out;
  }
  for (int v = 0; v < n; ++v) {
    if (comp[v] == closed_id) {
      out.closed_class.push_back(v);
      out.transient[v] = false;
    }
  }
  int p = class_period(adj, out.closed_class);
  out.period = p;
  out.kind = (p == 1) ? ChainClass::UniformlyErgodic : ChainClass::Periodic;
  return out;
}

Distribution stationary_distribution(const TransitionMatrix& a) {
  auto cls = classify_uniform_ergodicity(a);
  if (cls.kind != ChainClass::UniformlyErgodic) {
    raise(Errc::NotUniformlyErgodic,
          cls.kind == ChainClass::Reducible
              ? "chain has " + std::to_string(cls.closed_class_count) + " closed classes"
              : "chain is periodic with period " + std::to_string(cls.period));
  }
  const int n = a.size();
  // Stacked system [A - I; 1^T] pi = [0; 1], solved by column-pivoted QR.
  Mat sys(n + 1, n);
  sys.topRows(n) = a.matrix() - Mat::Identity(n, n);
  sys.row(n).setOnes();
  Vec rhs = Vec::Zero(n + 1);
  rhs[n] = 1.0;
  Vec pi = sys.colPivHouseholderQr().solve(rhs);
  for (int i = 0; i < n; ++i) {
    if (pi[i] < 0.0 && pi[i] > -1e-12) pi[i] = 0.0;
  }
  pi /= pi.sum();
  return Distribution::validate(std::move(pi));
}

bool is_gamma_controlled(const TransitionMatrix& b, const TransitionMatrix& a, double gamma) {
  if (b.size() != a.size()) raise(Errc::DimensionMismatch, "kernel sizes differ");
  return (b.matrix().array() >= gamma * a.matrix().array() - kStochasticTol).all();
}

bool is_gamma_equivalent(const TransitionMatrix& a, const TransitionMatrix& b, double gamma) {
  return is_gamma_controlled(b, a, gamma) && is_gamma_controlled(a, b, gamma);
}

MartingaleCovariance martingale_covariance(const TransitionMatrix& a, int state) {
  Vec ax = a.column(state);
  Mat cov = Mat(ax.asDiagonal()) - ax * ax.transpose();
  return MartingaleCovariance{state, std::move(cov)};
}

double seminorm_m(const TransitionMatrix& a, int state, const Vec& z) {
  Vec ax = a.column(state);
  double mean = z.dot(ax);
  double q = 0.0;
  for (int i = 0; i < z.size(); ++i) q += ax[i] * (z[i] - mean) * (z[i] - mean);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

double tv_distance(const Distribution& mu, const Distribution& nu) {
  if (mu.size() != nu.size()) raise(Errc::DimensionMismatch, "distribution sizes differ");
  return 0.5 * (mu.weights() - nu.weights()).lpNorm<1>();
}

Distribution marginal_law(const TransitionMatrix& a, const Distribution& nu, int t) {
  if (a.size() != nu.size()) raise(Errc::DimensionMismatch, "kernel and law sizes differ");
  if (t < 0) raise(Errc::ValidationError, "time must be nonnegative");
  Vec w = nu.weights();
  for (int s = 0; s < t; ++s) w = a.matrix() * w;
  return Distribution::validate(std::move(w));
}

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::NonStochastic: return "NonStochastic";
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotUniformlyErgodic: return "NotUniformlyErgodic";
    case Errc::NotGammaControlled: return "NotGammaControlled";
    case Errc::NotGammaEquivalent: return "NotGammaEquivalent";
    case Errc::EmptyActionSet: return "EmptyActionSet";
    case Errc::NoCertificate: return "NoCertificate";
    case Errc::NonZeroMean: return "NonZeroMean";
    case Errc::PathExplosion: return "PathExplosion";
    case Errc::RootSolveFailure: return "RootSolveFailure";
    case Errc::NoZeroBound: return "NoZeroBound";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::DominanceNotVerified: return "DominanceNotVerified";
    case Errc::PolicyKernelNotErgodic: return "PolicyKernelNotErgodic";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::ComputeError: return "ComputeError";
  }
  return "UnknownError";
}

}  // namespace ebsde
