#pragma once

#include <json.hpp>
#include <string>

#include "ebsde/chain.hpp"
#include "ebsde/control.hpp"
#include "ebsde/driver.hpp"
#include "ebsde/ergodicity.hpp"

namespace ebsde {

using Json = nlohmann::ordered_json;

// Matrices are serialised column-major: {"n": N, "columns": [[...], ...]},
// matching the column-stochastic convention. Distributions: {"weights": [...]}.
// Value tables are emitted keyed by 1-based state index.

Json matrix_to_json(const TransitionMatrix& m);
TransitionMatrix matrix_from_json(const Json& j);

Json distribution_to_json(const Distribution& d);
Distribution distribution_from_json(const Json& j);

Json value_table_to_json(const Vec& v);
Vec value_table_from_json(const Json& j, int expected_size);

Json control_model_to_json(const ControlModel& m);
ControlModel control_model_from_json(const Json& j);

// {"kind": "linear" | "hamiltonian" | "discounted", ...}
Driver driver_from_json(const Json& j);

Json certificate_to_json(const ErgodicityCertificate& c);

Json load_json_file(const std::string& path);

}  // namespace ebsde
