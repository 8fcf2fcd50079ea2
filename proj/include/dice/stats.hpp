// Scalar statistical functions.
#pragma once

#include <cmath>

#include "dice/common.hpp"

namespace dice {

// Survival function of the chi-square distribution with one degree of
// freedom: P(X > g) = erfc(sqrt(g/2)).
inline double chi_square_sf_1df(double g) {
  if (!(g >= 0.0)) throw NumericError("chi_square_sf_1df: statistic must be nonnegative");
  return std::erfc(std::sqrt(g / 2.0));
}

// Inverse of the survival function above: the threshold g with
// P(X > g) = alpha. Bisection is plenty at the precision needed here.
inline double chi_square_isf_1df(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw NumericError("chi_square_isf_1df: alpha must lie in (0,1)");
  double lo = 0.0, hi = 1.0;
  while (chi_square_sf_1df(hi) > alpha) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (chi_square_sf_1df(mid) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow
inline double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

}  // namespace dice
