#include "martin/kernel_expansion.hpp"

#include <cmath>
#include <limits>

#include "martin/errors.hpp"

namespace martin {

LogTable1D::LogTable1D(double x0, double dx, std::vector<double> log_value,
                       std::vector<double> log_slope, std::vector<double> log_curvature,
                       TableEnd left, TableEnd right)
    : x0_(x0),
      dx_(dx),
      log_value_(std::move(log_value)),
      log_slope_(std::move(log_slope)),
      log_curvature_(std::move(log_curvature)),
      left_(left),
      right_(right) {
  if (!(dx_ > 0)) throw UsageError("LogTable1D: dx must be positive");
  if (log_value_.size() < 2 || log_slope_.size() != log_value_.size() ||
      log_curvature_.size() != log_value_.size())
    throw UsageError("LogTable1D: need at least two nodes with matching arrays");
}

namespace {

LogJet extrapolate(const TableEnd& end, double x_end, double L, double w, double x) {
  if (end.kind == TableEnd::Kind::Dirichlet) {
    const double d = x - end.boundary;
    const double d_end = x_end - end.boundary;
    if (d * d_end <= 0)
      return {-std::numeric_limits<double>::infinity(), 0, 0};
    return {L + std::log(d / d_end), 1 / d, -1 / (d * d)};
  }
  return {L + w * (x - x_end), w, 0};
}

}  // namespace

LogJet LogTable1D::jet(double x) const {
  const std::size_t n = size();
  if (x < x0_) return extrapolate(left_, x0_, log_value_.front(), log_slope_.front(), x);
  const double xl = x_last();
  if (x > xl) return extrapolate(right_, xl, log_value_.back(), log_slope_.back(), x);

  std::size_t i = static_cast<std::size_t>((x - x0_) / dx_);
  if (i >= n - 1) i = n - 2;
  const double h = dx_;
  const double t = (x - (x0_ + h * static_cast<double>(i))) / h;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;

  const double f0 = log_value_[i], f1 = log_value_[i + 1];
  const double d0 = log_slope_[i], d1 = log_slope_[i + 1];
  const double c0 = log_curvature_[i], c1 = log_curvature_[i + 1];

  const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
  const double H1 = t - 6 * t3 + 8 * t4 - 3 * t5;
  const double H2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
  const double H3 = 10 * t3 - 15 * t4 + 6 * t5;
  const double H4 = -4 * t3 + 7 * t4 - 3 * t5;
  const double H5 = 0.5 * t3 - t4 + 0.5 * t5;

  const double dH0 = -30 * t2 + 60 * t3 - 30 * t4;
  const double dH1 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
  const double dH2 = t - 4.5 * t2 + 6 * t3 - 2.5 * t4;
  const double dH4 = -12 * t2 + 28 * t3 - 15 * t4;
  const double dH5 = 1.5 * t2 - 4 * t3 + 2.5 * t4;

  const double ddH0 = -60 * t + 180 * t2 - 120 * t3;
  const double ddH1 = -36 * t + 96 * t2 - 60 * t3;
  const double ddH2 = 1 - 9 * t + 18 * t2 - 10 * t3;
  const double ddH4 = -24 * t + 84 * t2 - 60 * t3;
  const double ddH5 = 3 * t - 12 * t2 + 10 * t3;

  LogJet out;
  out.value = f0 * H0 + h * d0 * H1 + h * h * c0 * H2 + f1 * H3 + h * d1 * H4 + h * h * c1 * H5;
  out.slope = (f1 - f0) * (-dH0) / h + d0 * dH1 + d1 * dH4 + h * (c0 * dH2 + c1 * dH5);
  out.curvature = (f1 - f0) * (-ddH0) / (h * h) + (d0 * ddH1 + d1 * ddH4) / h + c0 * ddH2 +
                  c1 * ddH5;
  return out;
}

double LogTable1D::operator()(double x) const { return std::exp(jet(x).value); }

LogTable1D LogTable1D::normalized_at(double xi) const {
  const double shift = jet(xi).value;
  std::vector<double> lv = log_value_;
  for (auto& v : lv) v -= shift;
  return LogTable1D(x0_, dx_, std::move(lv), log_slope_, log_curvature_, left_, right_);
}

Field LogTable1D::field() const {
  auto self = std::make_shared<const LogTable1D>(*this);
  return kernel_field(self);
}

namespace {

struct ComponentJet {
  double value;
  Vec grad;
  Mat hess;
};

ComponentJet evaluate(const KernelComponent& c, const Vec& x) {
  if (const auto* e = std::get_if<ExponentialKernel>(&c)) {
    const double v = std::exp(e->alpha.dot(x - e->origin));
    return {v, v * e->alpha, v * e->alpha * e->alpha.transpose()};
  }
  const auto& table = *std::get<std::shared_ptr<const LogTable1D>>(c);
  const LogJet j = table.jet(x[0]);
  const double v = std::exp(j.value);
  return {v, Vec::Constant(1, v * j.slope),
          Mat::Constant(1, 1, v * (j.curvature + j.slope * j.slope))};
}

}  // namespace

double kernel_value(const KernelComponent& c, const Vec& x) {
  if (const auto* e = std::get_if<ExponentialKernel>(&c)) return std::exp(e->alpha.dot(x - e->origin));
  return (*std::get<std::shared_ptr<const LogTable1D>>(c))(x[0]);
}

Field kernel_field(const KernelComponent& c) {
  return Field([c](const Vec& x) { return kernel_value(c, x); },
               [c](const Vec& x) { return evaluate(c, x).grad; },
               [c](const Vec& x) { return evaluate(c, x).hess; });
}

Field KernelExpansion::field() const {
  const auto t = terms;
  if (t.empty()) throw UsageError("KernelExpansion: no terms");
  auto value = [t](const Vec& x) {
    double s = 0;
    for (const auto& term : t) s += term.weight * kernel_value(term.kernel, x);
    return s;
  };
  auto grad = [t](const Vec& x) {
    Vec g = Vec::Zero(x.size());
    for (const auto& term : t) g += term.weight * evaluate(term.kernel, x).grad;
    return g;
  };
  auto hess = [t](const Vec& x) {
    Mat h = Mat::Zero(x.size(), x.size());
    for (const auto& term : t) h += term.weight * evaluate(term.kernel, x).hess;
    return h;
  };
  // Log-sum-exp weights keep grad(log phi) finite where phi over- or
  // underflows.
  auto log_grad = [t](const Vec& x) {
    std::vector<double> lv(t.size());
    std::vector<Vec> lg(t.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (const auto* e = std::get_if<ExponentialKernel>(&t[i].kernel)) {
        lv[i] = e->alpha.dot(x - e->origin);
        lg[i] = e->alpha;
      } else {
        const LogJet j = std::get<std::shared_ptr<const LogTable1D>>(t[i].kernel)->jet(x[0]);
        lv[i] = j.value;
        lg[i] = Vec::Constant(1, j.slope);
      }
      lv[i] += std::log(t[i].weight);
      top = std::max(top, lv[i]);
    }
    Vec g = Vec::Zero(x.size());
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double w = std::exp(lv[i] - top);
      g += w * lg[i];
      s += w;
    }
    return Vec(g / s);
  };
  return Field(value, grad, hess).with_log_gradient(log_grad);
}

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw UsageError(std::string("principal.") + field + ": expected an array");
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json end_json(const TableEnd& e) {
  if (e.kind == TableEnd::Kind::Dirichlet) return {{"kind", "dirichlet"}, {"boundary", e.boundary}};
  return {{"kind", "linear"}};
}

TableEnd json_end(const nlohmann::json& j) {
  TableEnd e;
  if (j.value("kind", "linear") == "dirichlet") {
    e.kind = TableEnd::Kind::Dirichlet;
    e.boundary = j.at("boundary").get<double>();
  }
  return e;
}

}  // namespace

nlohmann::json KernelExpansion::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& term : terms) {
    nlohmann::json t;
    t["weight"] = term.weight;
    if (const auto* e = std::get_if<ExponentialKernel>(&term.kernel)) {
      t["kind"] = "exponential";
      t["alpha"] = vec_json(e->alpha);
      t["origin"] = vec_json(e->origin);
    } else {
      const auto& tab = *std::get<std::shared_ptr<const LogTable1D>>(term.kernel);
      t["kind"] = "tabulated";
      t["x0"] = tab.x0();
      t["dx"] = tab.dx();
      t["log_value"] = tab.log_value();
      t["log_slope"] = tab.log_slope();
      t["log_curvature"] = tab.log_curvature();
      t["left_end"] = end_json(tab.left_end());
      t["right_end"] = end_json(tab.right_end());
    }
    out.push_back(std::move(t));
  }
  return {{"terms", out}};
}

KernelExpansion KernelExpansion::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("terms") || !j["terms"].is_array())
    throw UsageError("principal: expected {\"terms\": [...]}");
  KernelExpansion out;
  for (const auto& t : j["terms"]) {
    const double w = t.at("weight").get<double>();
    const auto kind = t.at("kind").get<std::string>();
    if (kind == "exponential") {
      out.terms.push_back({w, ExponentialKernel{json_vec(t.at("alpha"), "alpha"),
                                                json_vec(t.at("origin"), "origin")}});
    } else if (kind == "tabulated") {
      auto tab = std::make_shared<const LogTable1D>(
          t.at("x0").get<double>(), t.at("dx").get<double>(),
          t.at("log_value").get<std::vector<double>>(),
          t.at("log_slope").get<std::vector<double>>(),
          t.at("log_curvature").get<std::vector<double>>(), json_end(t.at("left_end")),
          json_end(t.at("right_end")));
      out.terms.push_back({w, tab});
    } else {
      throw UsageError("principal.terms.kind: unknown kind '" + kind + "'");
    }
  }
  return out;
}

}  // namespace martin
