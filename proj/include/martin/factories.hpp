#pragma once

#include <functional>

#include "martin/model.hpp"

namespace martin {

/// dX = k dt + sigma dW with constant k, sigma, r on R^N.
inline Model constant_model(const Vec& k, const Mat& sigma, double r) {
  Model m;
  m.dim = static_cast<int>(k.size());
  m.drift = VField::constant(k);
  m.sigma = MField::constant(sigma);
  m.rate = Field::constant(r);
  m.domain.assign(m.dim, Interval<double>{});
  m.constant = ConstantCoefficients<double>{sigma * sigma.transpose(), k, r};
  validate(m);
  return m;
}

inline Model constant_model_1d(double k, double sigma, double r) {
  return constant_model(Vec::Constant(1, k), Mat::Constant(1, 1, sigma), r);
}

/// One-dimensional model from scalar callables on the line.
inline Model model_1d(std::function<double(double)> drift,
                      std::function<double(double)> sigma, Field rate,
                      Interval<double> axis = {}) {
  Model m;
  m.dim = 1;
  m.drift = VField([drift](const Vec& x) { return Vec::Constant(1, drift(x[0])); });
  m.sigma = MField([sigma](const Vec& x) { return Mat::Constant(1, 1, sigma(x[0])); });
  m.rate = std::move(rate);
  m.domain = {axis};
  validate(m);
  return m;
}

}  // namespace martin
