#pragma once

// JSON for recovery directives and recovered measures.
//
// Directive:
//   {"beta": 0.05, "mode": "transient_side", "side": "right", "model_ref": "gbm.json"}
//   mixture: "weights": [p, q]; direction_nd: "gamma": [...]; ratio_nd:
//   "ratio": [...]; measure_nd: "density": "<expr>", "atoms": n.
//
// Recovered measure: the model source, phi as kernel terms, the atoms of mu,
// drift and rho samples on the default grid, and the certificate.

#include <string>

#include "martin/model_io.hpp"
#include "martin/recovery.hpp"

namespace martin {

Json directive_to_json(const RecoveryDirective& d);
/// Throws UsageError naming the offending field.
RecoveryDirective directive_from_json(const Json& j);

Json criticality_to_json(const sturm1d::CriticalityReport& r);

Json recovered_to_json(const RecoveredMeasure& rec, const Json& model_source,
                       const RecoveryDirective& directive);

struct LoadedRecovery {
  Json model_source;
  Model model;
  RecoveryDirective directive;
  RecoveredMeasure rec;
  /// Drift samples as written, for round-trip checks.
  std::vector<std::pair<Vec, Vec>> drift_samples;
};

LoadedRecovery recovered_from_json(const Json& j);

}  // namespace martin
