#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mfld/errors.hpp"

namespace mfld {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight exp(-x^2): nodes by Newton iteration on
/// the orthonormal Hermite recurrence from asymptotic starting guesses.
inline QuadratureRule gauss_hermite(std::size_t n) {
  if (n == 0) throw DomainError("Gauss-Hermite rule needs at least one node");
  constexpr double kPiToMinusQuarter = 0.7511255444649425;
  QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
  const std::size_t half = (n + 1) / 2;
  const double nd = static_cast<double>(n);
  double z = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(nd, 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * rule.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * rule.nodes[1];
    else
      z = 2.0 * z - rule.nodes[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = kPiToMinusQuarter, p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * nd) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

inline const QuadratureRule& gauss_hermite_64() {
  static const QuadratureRule rule = gauss_hermite(64);
  return rule;
}

/// E f(Z) for Z ~ N(mean, sd^2) by 64-point Gauss-Hermite quadrature.
template <class F>
double gaussian_expectation(double mean, double sd, F&& f) {
  if (sd == 0.0) return f(mean);
  const auto& rule = gauss_hermite_64();
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(mean + M_SQRT2 * sd * rule.nodes[i]);
  return s / std::sqrt(M_PI);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }

}  // namespace mfld
