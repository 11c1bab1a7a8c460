#include "ebsde/json_io.hpp"

#include <fstream>

namespace ebsde {

namespace {

[[noreturn]] void parse_fail(const std::string& what) { raise(Errc::ParseError, what); }

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) parse_fail("expected an array of numbers");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) parse_fail("expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Json vec_to_json(const Vec& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

}  // namespace

Json matrix_to_json(const TransitionMatrix& m) {
  Json cols = Json::array();
  for (int j = 0; j < m.size(); ++j) cols.push_back(vec_to_json(m.column(j)));
  return Json{{"n", m.size()}, {"columns", cols}};
}

TransitionMatrix matrix_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("columns")) parse_fail("matrix needs a 'columns' field");
  const Json& cols = j["columns"];
  if (!cols.is_array() || cols.empty()) parse_fail("'columns' must be a nonempty array");
  const int n = j.contains("n") ? j["n"].get<int>() : static_cast<int>(cols.size());
  if (static_cast<int>(cols.size()) != n) parse_fail("'n' disagrees with the column count");
  Mat m(n, n);
  for (int c = 0; c < n; ++c) {
    Vec col = vec_from_json(cols[static_cast<std::size_t>(c)]);
    if (col.size() != n) parse_fail("column " + std::to_string(c) + " has wrong length");
    m.col(c) = col;
  }
  return TransitionMatrix::validate(std::move(m));
}

Json distribution_to_json(const Distribution& d) {
  return Json{{"weights", vec_to_json(d.weights())}};
}

Distribution distribution_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("weights")) parse_fail("distribution needs 'weights'");
  return Distribution::validate(vec_from_json(j["weights"]));
}

Json value_table_to_json(const Vec& v) {
  Json out = Json::object();
  for (Eigen::Index i = 0; i < v.size(); ++i) out[std::to_string(i + 1)] = v[i];
  return out;
}

Vec value_table_from_json(const Json& j, int expected_size) {
  const Json& body = j.is_object() && j.contains("values") ? j["values"] : j;
  if (body.is_array()) {
    Vec v = vec_from_json(body);
    if (v.size() != expected_size) parse_fail("value table has wrong length");
    return v;
  }
  if (body.is_object()) {
    Vec v = Vec::Zero(expected_size);
    std::vector<bool> seen(static_cast<std::size_t>(expected_size), false);
    for (const auto& [key, val] : body.items()) {
      int idx = 0;
      try {
        idx = std::stoi(key);
      } catch (...) {
        parse_fail("value table key '" + key + "' is not a state index");
      }
      if (idx < 1 || idx > expected_size) parse_fail("state index " + key + " out of range");
      v[idx - 1] = val.get<double>();
      seen[static_cast<std::size_t>(idx - 1)] = true;
    }
    for (bool s : seen) {
      if (!s) parse_fail("value table does not cover every state");
    }
    return v;
  }
  parse_fail("value table must be an array or keyed object");
}

Json control_model_to_json(const ControlModel& m) {
  Json kernels = Json::object();
  Json cost = Json::object();
  Json actions = Json::array();
  for (int u = 0; u < m.action_count(); ++u) {
    const std::string& name = m.action_names()[static_cast<std::size_t>(u)];
    actions.push_back(name);
    kernels[name] = matrix_to_json(m.kernel(u));
    cost[name] = vec_to_json(m.cost_matrix().col(u));
  }
  return Json{{"A", matrix_to_json(m.reference())},
              {"gamma", m.gamma()},
              {"actions", actions},
              {"kernels", kernels},
              {"cost", cost}};
}

ControlModel control_model_from_json(const Json& j) {
  if (!j.is_object()) parse_fail("control model must be an object");
  for (const char* field : {"A", "gamma", "actions", "kernels", "cost"}) {
    if (!j.contains(field)) parse_fail(std::string("control model needs '") + field + "'");
  }
  TransitionMatrix a = matrix_from_json(j["A"]);
  double gamma = j["gamma"].get<double>();
  std::vector<std::string> names;
  for (const auto& name : j["actions"]) names.push_back(name.get<std::string>());
  std::vector<TransitionMatrix> kernels;
  Mat cost(a.size(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t u = 0; u < names.size(); ++u) {
    if (!j["kernels"].contains(names[u])) parse_fail("missing kernel for action " + names[u]);
    if (!j["cost"].contains(names[u])) parse_fail("missing cost for action " + names[u]);
    kernels.push_back(matrix_from_json(j["kernels"][names[u]]));
    Vec c = vec_from_json(j["cost"][names[u]]);
    if (c.size() != a.size()) parse_fail("cost for action " + names[u] + " has wrong length");
    cost.col(static_cast<Eigen::Index>(u)) = c;
  }
  return ControlModel::validate(std::move(a), gamma, std::move(names), std::move(kernels),
                                std::move(cost));
}

Driver driver_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind")) parse_fail("driver needs a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "linear") {
    TransitionMatrix a = matrix_from_json(j.at("A"));
    TransitionMatrix psi = j.contains("psi") ? matrix_from_json(j["psi"]) : a;
    Vec c = j.contains("c") ? vec_from_json(j["c"]) : Vec::Zero(a.size());
    if (!j.contains("gamma")) parse_fail("linear driver needs 'gamma'");
    return Driver::linear(a, psi, std::move(c), j["gamma"].get<double>());
  }
  if (kind == "hamiltonian") {
    if (!j.contains("model")) parse_fail("hamiltonian driver needs 'model'");
    return Driver::hamiltonian(control_model_from_json(j["model"]));
  }
  if (kind == "discounted") {
    if (!j.contains("inner") || !j.contains("alpha")) {
      parse_fail("discounted driver needs 'inner' and 'alpha'");
    }
    return Driver::discounted(driver_from_json(j["inner"]), j["alpha"].get<double>());
  }
  parse_fail("unknown driver kind '" + kind + "'");
}

Json certificate_to_json(const ErgodicityCertificate& c) {
  return Json{{"gamma", c.gamma},
              {"epsilon", c.epsilon},
              {"q_gamma", c.q_gamma},
              {"beta_geometric", c.beta_geometric},
              {"beta_used", c.beta_used},
              {"g_star_2beta", c.g_star_2beta},
              {"h_star_bound", c.h_star_bound},
              {"beta_tilde", c.beta_tilde},
              {"R", c.r},
              {"rho", c.rho}};
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ParseError, path + ": " + e.what());
  }
}

}  // namespace ebsde
