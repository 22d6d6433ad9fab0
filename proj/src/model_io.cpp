#include "martin/model_io.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "martin/expression.hpp"

namespace martin {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw UsageError("model." + field + ": " + why);
}

const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad(path + key, "missing");
  return j.at(key);
}

double number(const Json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  return j.get<double>();
}

Vec vector_of(const Json& j, int n, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    bad(field, "expected an array of " + std::to_string(n) + " numbers");
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = number(j[i], field);
  return v;
}

Mat matrix_of(const Json& j, int n, const std::string& field) {
  if (n == 1 && j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    bad(field, "expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m.row(i) = vector_of(j[i], n, field).transpose();
  return m;
}

std::string kind_of(const Json& j, const std::string& field) {
  const auto& k = require(j, "kind", field + ".");
  if (!k.is_string()) bad(field + ".kind", "expected a string");
  return k.get<std::string>();
}

Expression expression_of(const Json& j, int dim, const std::string& field) {
  if (!j.is_string()) bad(field, "expected an expression string");
  try {
    return Expression::parse(j.get<std::string>(), dim);
  } catch (const UsageError& e) {
    bad(field, e.what());
  }
}

double domain_end(const Json& j, double infinite, const std::string& field) {
  if (j.is_null()) return infinite;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    bad(field, "expected a number, null, \"inf\" or \"-inf\"");
  }
  return number(j, field);
}

}  // namespace

Model parse_model(const Json& j, bool allow_degenerate) {
  if (!j.is_object()) throw UsageError("model: expected a JSON object");
  const auto& dim_j = require(j, "dim", "");
  if (!dim_j.is_number_integer() || dim_j.get<int>() < 1) bad("dim", "expected a positive integer");
  const int n = dim_j.get<int>();

  Model m;
  m.dim = n;
  bool constant = true;
  Vec k_const;
  Mat s_const;
  double r_const = 0;

  const auto& drift = require(j, "drift", "");
  const auto dkind = kind_of(drift, "drift");
  if (dkind == "constant") {
    k_const = vector_of(require(drift, "value", "drift."), n, "drift.value");
    m.drift = VField::constant(k_const);
  } else if (dkind == "linear") {
    const Mat lin = matrix_of(require(drift, "matrix", "drift."), n, "drift.matrix");
    const Vec off = drift.contains("offset") ? vector_of(drift["offset"], n, "drift.offset")
                                             : Vec::Zero(n);
    m.drift = VField::affine(lin, off);
    constant = false;
  } else if (dkind == "expr") {
    const auto& ex = require(drift, "exprs", "drift.");
    if (!ex.is_array() || static_cast<int>(ex.size()) != n)
      bad("drift.exprs", "expected " + std::to_string(n) + " expressions");
    std::vector<Expression> parts;
    for (int i = 0; i < n; ++i)
      parts.push_back(expression_of(ex[i], n, "drift.exprs[" + std::to_string(i) + "]"));
    m.drift = VField([parts](const Vec& x) {
      Vec out(parts.size());
      for (std::size_t i = 0; i < parts.size(); ++i) out[i] = parts[i](x);
      return out;
    });
    constant = false;
  } else {
    bad("drift.kind", "unknown kind '" + dkind + "'");
  }

  const auto& sigma = require(j, "sigma", "");
  const auto skind = kind_of(sigma, "sigma");
  if (skind == "constant") {
    s_const = matrix_of(require(sigma, "value", "sigma."), n, "sigma.value");
    m.sigma = MField::constant(s_const);
  } else if (skind == "diagonal") {
    s_const = vector_of(require(sigma, "value", "sigma."), n, "sigma.value").asDiagonal();
    m.sigma = MField::constant(s_const);
  } else if (skind == "expr") {
    const auto& ex = require(sigma, "exprs", "sigma.");
    if (!ex.is_array() || static_cast<int>(ex.size()) != n)
      bad("sigma.exprs", "expected " + std::to_string(n) + " rows");
    std::vector<Expression> parts;
    for (int i = 0; i < n; ++i) {
      if (!ex[i].is_array() || static_cast<int>(ex[i].size()) != n)
        bad("sigma.exprs", "expected " + std::to_string(n) + " entries per row");
      for (int c = 0; c < n; ++c)
        parts.push_back(expression_of(ex[i][c], n,
                                      "sigma.exprs[" + std::to_string(i) + "][" +
                                          std::to_string(c) + "]"));
    }
    m.sigma = MField([parts, n](const Vec& x) {
      Mat out(n, n);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < n; ++c) out(i, c) = parts[i * n + c](x);
      return out;
    });
    constant = false;
  } else {
    bad("sigma.kind", "unknown kind '" + skind + "'");
  }

  const auto& rate = require(j, "rate", "");
  const auto rkind = kind_of(rate, "rate");
  if (rkind == "constant") {
    r_const = number(require(rate, "value", "rate."), "rate.value");
    m.rate = Field::constant(r_const);
  } else if (rkind == "linear") {
    const Vec c = vector_of(require(rate, "coeffs", "rate."), n, "rate.coeffs");
    const double off = rate.contains("offset") ? number(rate["offset"], "rate.offset") : 0.0;
    m.rate = Field([c, off](const Vec& x) { return off + c.dot(x); },
                   [c](const Vec&) { return c; },
                   [n](const Vec&) { return Mat::Zero(n, n); });
    constant = false;
  } else if (rkind == "expr") {
    m.rate = expression_of(require(rate, "expr", "rate."), n, "rate.expr").to_field();
    constant = false;
  } else {
    bad("rate.kind", "unknown kind '" + rkind + "'");
  }

  m.domain.assign(n, Interval<double>{});
  if (j.contains("domain")) {
    const auto& d = j["domain"];
    if (!d.is_array() || static_cast<int>(d.size()) != n)
      bad("domain", "expected " + std::to_string(n) + " axis entries");
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const std::string f = "domain[" + std::to_string(i) + "]";
      const auto& ax = d[i];
      if (!ax.is_object()) bad(f, "expected an object");
      auto& iv = m.domain[i];
      iv.left = ax.contains("left") ? domain_end(ax["left"], -inf, f + ".left") : -inf;
      iv.right = ax.contains("right") ? domain_end(ax["right"], inf, f + ".right") : inf;
      if (ax.contains("left_label")) iv.left_label = ax["left_label"].get<std::string>();
      if (ax.contains("right_label")) iv.right_label = ax["right_label"].get<std::string>();
      if (!(iv.left < iv.right)) bad(f, "left must be below right");
      if (iv.left_finite() || iv.right_finite()) constant = false;
    }
  }

  if (constant) m.constant = ConstantCoefficients<double>{s_const * s_const.transpose(), k_const, r_const};
  validate(m, !allow_degenerate);
  return m;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

Model load_model(const std::string& path, bool allow_degenerate) {
  return parse_model(read_json_file(path), allow_degenerate);
}

}  // namespace martin
