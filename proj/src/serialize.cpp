#include "martin/serialize.hpp"

#include <cmath>

namespace martin {

namespace {

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw UsageError(field + ": expected a nonempty array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw UsageError(field + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

double number(const Json& j, const char* key, const std::string& prefix) {
  if (!j.contains(key)) throw UsageError(prefix + key + ": missing");
  if (!j[key].is_number()) throw UsageError(prefix + key + ": expected a number");
  return j[key].get<double>();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

sturm1d::Criticality criticality_from_string(const std::string& s) {
  if (s == "subcritical") return sturm1d::Criticality::Subcritical;
  if (s == "critical") return sturm1d::Criticality::Critical;
  if (s == "supercritical") return sturm1d::Criticality::Supercritical;
  throw UsageError("criticality.class: unknown value '" + s + "'");
}

}  // namespace

Json directive_to_json(const RecoveryDirective& d) {
  Json j;
  j["mode"] = to_string(d.mode);
  if (d.mode != RecoveryMode::Recurrent) j["beta"] = d.beta;
  switch (d.mode) {
    case RecoveryMode::TransientSide: j["side"] = d.side > 0 ? "right" : "left"; break;
    case RecoveryMode::Mixture: j["weights"] = {d.p, d.q}; break;
    case RecoveryMode::Recurrent: break;
    case RecoveryMode::DirectionND: j["gamma"] = vec_json(d.gamma); break;
    case RecoveryMode::RatioND: j["ratio"] = vec_json(d.ratio); break;
    case RecoveryMode::MeasureND:
      j["density"] = d.density;
      j["atoms"] = d.atoms;
      break;
  }
  if (!d.model_ref.empty()) j["model_ref"] = d.model_ref;
  return j;
}

RecoveryDirective directive_from_json(const Json& j) {
  if (!j.is_object()) throw UsageError("directive: expected a JSON object");
  RecoveryDirective d;
  if (!j.contains("mode") || !j["mode"].is_string()) throw UsageError("directive.mode: missing");
  d.mode = recovery_mode_from_string(j["mode"].get<std::string>());
  if (d.mode != RecoveryMode::Recurrent) d.beta = number(j, "beta", "directive.");
  switch (d.mode) {
    case RecoveryMode::TransientSide: {
      if (!j.contains("side")) throw UsageError("directive.side: missing");
      const auto& s = j["side"];
      if (s.is_string() && s == "left") d.side = -1;
      else if (s.is_string() && s == "right") d.side = 1;
      else if (s.is_number_integer() && (s == 1 || s == -1)) d.side = s.get<int>();
      else throw UsageError("directive.side: expected \"left\", \"right\", -1 or 1");
      break;
    }
    case RecoveryMode::Mixture: {
      const Vec w = json_vec(j.value("weights", Json()), "directive.weights");
      if (w.size() != 2) throw UsageError("directive.weights: expected [p, q]");
      d.p = w[0];
      d.q = w[1];
      break;
    }
    case RecoveryMode::Recurrent: break;
    case RecoveryMode::DirectionND:
      d.gamma = json_vec(j.value("gamma", Json()), "directive.gamma");
      break;
    case RecoveryMode::RatioND:
      d.ratio = json_vec(j.value("ratio", Json()), "directive.ratio");
      break;
    case RecoveryMode::MeasureND:
      if (j.contains("density")) {
        if (!j["density"].is_string()) throw UsageError("directive.density: expected a string");
        d.density = j["density"].get<std::string>();
      }
      if (j.contains("atoms")) {
        if (!j["atoms"].is_number_integer()) throw UsageError("directive.atoms: expected an integer");
        d.atoms = j["atoms"].get<int>();
      }
      break;
  }
  if (j.contains("model_ref")) {
    if (!j["model_ref"].is_string()) throw UsageError("directive.model_ref: expected a path");
    d.model_ref = j["model_ref"].get<std::string>();
  }
  return d;
}

Json criticality_to_json(const sturm1d::CriticalityReport& r) {
  return {{"lambda", r.lambda},
          {"class", sturm1d::to_string(r.cls)},
          {"witness", r.witness},
          {"log_wronskian", number_or_null(r.log_wronskian)}};
}

Json recovered_to_json(const RecoveredMeasure& rec, const Json& model_source,
                       const RecoveryDirective& directive) {
  Json j;
  j["format"] = "martin_recovered/1";
  j["model"] = model_source;
  j["directive"] = directive_to_json(directive);
  j["mode"] = to_string(rec.mode);
  j["beta"] = rec.beta;
  j["xi"] = vec_json(rec.xi);
  j["principal"] = rec.expansion.to_json();
  Json mu = Json::array();
  for (const auto& atom : rec.mu.atoms) {
    Json a;
    a["weight"] = atom.weight;
    if (atom.point.kind == BoundaryPoint::Kind::Side) {
      a["kind"] = "side";
      a["side"] = atom.point.side;
    } else {
      a["kind"] = "direction";
      a["gamma"] = vec_json(atom.point.gamma);
      a["curve_direction"] = vec_json(atom.point.curve(1.0) - atom.point.curve(0.0));
    }
    // Index of the matching kernel term.
    for (std::size_t i = 0; i < rec.expansion.terms.size(); ++i) {
      const auto& t = rec.expansion.terms[i];
      if (t.weight == atom.weight && t.kernel.index() == atom.kernel.index() &&
          kernel_value(t.kernel, rec.xi) == kernel_value(atom.kernel, rec.xi) &&
          (t.kernel.index() != 1 ||
           std::get<1>(t.kernel) == std::get<1>(atom.kernel)) &&
          (t.kernel.index() != 0 ||
           std::get<0>(t.kernel).alpha == std::get<0>(atom.kernel).alpha)) {
        a["term"] = i;
        break;
      }
    }
    mu.push_back(std::move(a));
  }
  j["mu"] = mu;
  Json samples = Json::array();
  for (const auto& x : default_grid(rec.dynamics)) {
    samples.push_back({{"x", vec_json(x)},
                       {"drift", vec_json(rec.dynamics.drift(x))},
                       {"rho", vec_json(rec.rho(x))}});
  }
  j["drift_samples"] = samples;
  j["residual"] = rec.residual;
  j["certificate"] = rec.certificate.to_json();
  if (rec.criticality) j["criticality"] = criticality_to_json(*rec.criticality);
  j["notes"] = rec.notes;
  return j;
}

LoadedRecovery recovered_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", std::string()) != "martin_recovered/1")
    throw UsageError("recovered: not a recovered-measure file (format field)");
  LoadedRecovery out;
  out.model_source = j.at("model");
  out.model = parse_model(out.model_source);
  out.directive = directive_from_json(j.at("directive"));
  auto& rec = out.rec;
  rec.mode = recovery_mode_from_string(j.at("mode").get<std::string>());
  rec.beta = number(j, "beta", "recovered.");
  rec.expansion = KernelExpansion::from_json(j.at("principal"));
  if (rec.expansion.terms.empty()) throw UsageError("recovered.principal: no terms");
  attach_dynamics(out.model, rec);
  for (const auto& a : j.value("mu", Json::array())) {
    if (!a.contains("term") || !a["term"].is_number_unsigned() ||
        a["term"].get<std::size_t>() >= rec.expansion.terms.size())
      throw UsageError("recovered.mu.term: missing or out of range");
    const auto& term = rec.expansion.terms[a["term"].get<std::size_t>()];
    const auto kind = a.at("kind").get<std::string>();
    BoundaryPoint pt;
    if (kind == "side") {
      pt = BoundaryPoint::at_side(a.at("side").get<int>(), rec.xi[0]);
    } else if (kind == "direction") {
      pt = BoundaryPoint::direction(json_vec(a.at("gamma"), "recovered.mu.gamma"));
      const Vec dir = json_vec(a.at("curve_direction"), "recovered.mu.curve_direction");
      const Vec xi = rec.xi;
      pt.curve = [dir, xi](double t) { return Vec(xi + dir * t); };
    } else {
      throw UsageError("recovered.mu.kind: unknown kind '" + kind + "'");
    }
    rec.mu.atoms.push_back({pt, a.at("weight").get<double>(), term.kernel});
  }
  rec.residual = j.value("residual", 0.0);
  if (j.contains("certificate")) rec.certificate = AdmissibilityCertificate::from_json(j["certificate"]);
  if (j.contains("criticality")) {
    const auto& c = j["criticality"];
    sturm1d::CriticalityReport r;
    r.lambda = c.at("lambda").get<double>();
    r.cls = criticality_from_string(c.at("class").get<std::string>());
    r.witness = c.value("witness", std::string());
    r.log_wronskian = c.contains("log_wronskian") && c["log_wronskian"].is_number()
                          ? c["log_wronskian"].get<double>()
                          : std::nan("");
    rec.criticality = r;
  }
  if (j.contains("notes")) rec.notes = j["notes"].get<std::vector<std::string>>();
  for (const auto& s : j.value("drift_samples", Json::array()))
    out.drift_samples.push_back({json_vec(s.at("x"), "drift_samples.x"),
                                 json_vec(s.at("drift"), "drift_samples.drift")});
  return out;
}

}  // namespace martin
