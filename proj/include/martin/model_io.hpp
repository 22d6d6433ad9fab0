#pragma once

#include <string>

#include <json.hpp>

#include "martin/model.hpp"

namespace martin {

using Json = nlohmann::json;

/// Model definition file:
///
///   {
///     "dim": 1,
///     "drift": {"kind": "constant", "value": [0.03]},
///     "sigma": {"kind": "constant", "value": [[0.2]]},
///     "rate":  {"kind": "constant", "value": 0.05},
///     "domain": [{"left": null, "right": null, "left_label": "a", "right_label": "b"}]
///   }
///
/// drift kinds: constant {value: [N]}, linear {matrix: [[N x N]], offset: [N]},
/// expr {exprs: [N strings]}.
/// sigma kinds: constant {value: [[N x N]] or scalar for N=1}, diagonal
/// {value: [N]}, expr {exprs: [[N x N strings]]}.
/// rate kinds: constant {value}, linear {coeffs: [N], offset}, expr {expr}.
/// Domain ends are numbers, null (infinite) or the strings "-inf"/"inf".
/// "domain" may be omitted for the whole space.
/// allow_degenerate accepts a singular sigma sigma^T (simulation only).
Model parse_model(const Json& j, bool allow_degenerate = false);
Model load_model(const std::string& path, bool allow_degenerate = false);

Json read_json_file(const std::string& path);

}  // namespace martin
