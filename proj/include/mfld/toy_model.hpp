#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mfld/discrete_distribution.hpp"
#include "mfld/gaussian.hpp"
#include "mfld/noise_systems.hpp"
#include "mfld/quadrature.hpp"

namespace mfld {

/// Bounded interaction drift b: R -> R. Only named builtins are accepted, so
/// the declared sup norm is known.
class DriftFunction {
 public:
  enum class Kind { constant, tanh, cosine };

  DriftFunction() = default;
  DriftFunction(Kind kind, double scale) : kind_(kind), scale_(scale) {
    if (!std::isfinite(scale)) throw DomainError("drift scale must be finite");
  }

  static DriftFunction constant(double c) { return {Kind::constant, c}; }
  static DriftFunction scaled_tanh(double s) { return {Kind::tanh, s}; }
  static DriftFunction scaled_cosine(double s) { return {Kind::cosine, s}; }

  static DriftFunction from_name(const std::string& name, double scale) {
    if (name == "constant") return constant(scale);
    if (name == "tanh") return scaled_tanh(scale);
    if (name == "cosine" || name == "cos") return scaled_cosine(scale);
    throw DomainError("unknown drift builtin '" + name + "' (expected constant, tanh or cosine)");
  }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::constant: return scale_;
      case Kind::tanh: return scale_ * std::tanh(x);
      case Kind::cosine: return scale_ * std::cos(x);
    }
    return 0.0;
  }

  double sup_norm() const { return std::abs(scale_); }
  Kind kind() const { return kind_; }
  double scale() const { return scale_; }

 private:
  Kind kind_ = Kind::constant;
  double scale_ = 0.0;
};

struct Interval {
  double lo;
  double hi;  // closed interval [lo, hi]; infinite ends allowed
};

/// Two-step Gaussian toy model. In the standard variant particles move by
/// x -> x + m_b(mu) + y; in the indicator variant by x -> x + mu(B x R) * y.
struct ToyModelSpec {
  enum class Variant { standard, indicator };

  DriftFunction b;
  Variant variant = Variant::standard;
  std::vector<Interval> B;

  void validate() const {
    if (variant != Variant::indicator) return;
    auto sorted = B;
    std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& c) { return a.lo < c.lo; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (std::isnan(sorted[i].lo) || std::isnan(sorted[i].hi) || !(sorted[i].lo < sorted[i].hi))
        throw DomainError("indicator interval must satisfy lo < hi");
      if (i > 0 && sorted[i].lo <= sorted[i - 1].hi) throw DomainError("indicator intervals overlap");
    }
  }

  bool in_B(double x) const {
    for (const auto& iv : B)
      if (x >= iv.lo && x <= iv.hi) return true;
    return false;
  }
};

namespace detail {
inline void require_bivariate(const GaussianMeasure& theta) {
  if (theta.dimension() != 2) throw DomainError("toy model measures live on R^2");
}
inline void require_standard(const ToyModelSpec& spec, const char* op) {
  if (spec.variant != ToyModelSpec::Variant::standard)
    throw DomainError(std::string(op) + " is closed-form only for the standard variant");
}
}  // namespace detail

/// Mean-field statistic of theta: int b(x) dtheta(x, x~) in the standard
/// variant, theta(B x R) in the indicator variant. Gaussian first marginals
/// use 64-point Gauss-Hermite (or the normal CDF for B).
inline double m_b(const GaussianMeasure& theta, const ToyModelSpec& spec) {
  spec.validate();
  const double mean = theta.mean()(0);
  const double sd = std::sqrt(std::max(0.0, theta.covariance()(0, 0)));
  if (spec.variant == ToyModelSpec::Variant::indicator) {
    if (sd == 0.0) return spec.in_B(mean) ? 1.0 : 0.0;
    double mass = 0.0;
    for (const auto& iv : spec.B) mass += normal_cdf((iv.hi - mean) / sd) - normal_cdf((iv.lo - mean) / sd);
    return mass;
  }
  return gaussian_expectation(mean, sd, spec.b);
}

/// Same statistic for a finite-support measure on the first coordinate.
inline double m_b(const DiscreteDistribution<double>& first_marginal, const ToyModelSpec& spec) {
  spec.validate();
  detail::CompensatedSum s;
  for (const auto& a : first_marginal.atoms()) {
    if (spec.variant == ToyModelSpec::Variant::indicator)
      s.add(spec.in_B(a.point) ? a.weight : 0.0);
    else
      s.add(a.weight * spec.b(a.point));
  }
  return s.value();
}

inline double m_b(const PathMeasure<double>& theta, const ToyModelSpec& spec) {
  return m_b(marginal(theta, 0), spec);
}

/// psi(theta, (y, y~)) given the statistic m = m_b(theta).
inline Path<double> toy_psi_with_statistic(double m, const Path<double>& y, const ToyModelSpec& spec) {
  if (y.size() != 2) throw DomainError("toy noise points are pairs");
  if (spec.variant == ToyModelSpec::Variant::indicator) return {y[0], y[0] + m * y[1]};
  return {y[0], y[0] + m + y[1]};
}

inline Path<double> toy_psi(const GaussianMeasure& theta, const Path<double>& y, const ToyModelSpec& spec) {
  detail::require_bivariate(theta);
  return toy_psi_with_statistic(m_b(theta, spec), y, spec);
}

inline Path<double> toy_psi(const PathMeasure<double>& theta, const Path<double>& y, const ToyModelSpec& spec) {
  return toy_psi_with_statistic(m_b(theta, spec), y, spec);
}

inline Eigen::Matrix2d toy_frozen_covariance() {
  Eigen::Matrix2d c;
  c << 1.0, 1.0, 1.0, 2.0;
  return c;
}

/// Psi_gamma0(theta) for gamma0 the standard normal pair: the exact Gaussian
/// N((0, m_b(theta)), [[1,1],[1,2]]).
inline GaussianMeasure toy_Psi_gamma0(const GaussianMeasure& theta, const ToyModelSpec& spec) {
  detail::require_bivariate(theta);
  detail::require_standard(spec, "toy_Psi_gamma0");
  return GaussianMeasure(Eigen::Vector2d(0.0, m_b(theta, spec)), toy_frozen_covariance());
}

/// Psi_gamma0(theta) for a finite-support noise law (any variant).
inline PathMeasure<double> toy_Psi_discrete(const PathMeasure<double>& theta, const NoisePathMeasure<double>& gamma0,
                                            const ToyModelSpec& spec) {
  const double m = m_b(theta, spec);
  return pushforward(gamma0, [&](const Path<double>& y) { return toy_psi_with_statistic(m, y, spec); });
}

/// The McKean-Vlasov law: first marginal N(0,1), so m* = E b(Z), Z ~ N(0,1).
inline GaussianMeasure toy_mckean_vlasov(const ToyModelSpec& spec) {
  return toy_Psi_gamma0(GaussianMeasure::standard(2), spec);
}

/// F(theta) = int f(theta, .) dtheta with
/// f(theta, (y, y~)) = (y + m) y~ - |y + m|^2 / 2, m = m_b(theta),
/// from the first and second moments of theta.
inline double toy_F(const GaussianMeasure& theta, const ToyModelSpec& spec) {
  detail::require_bivariate(theta);
  detail::require_standard(spec, "toy_F");
  const double m = m_b(theta, spec);
  const auto& mu = theta.mean();
  const auto& c = theta.covariance();
  const double e_y = mu(0), e_yt = mu(1);
  const double e_y_yt = c(0, 1) + mu(0) * mu(1);
  const double e_y2 = c(0, 0) + mu(0) * mu(0);
  return e_y_yt + m * e_yt - 0.5 * (e_y2 + 2.0 * m * e_y + m * m);
}

/// F for a finite-support theta (always integrable).
inline double toy_F(const PathMeasure<double>& theta, const ToyModelSpec& spec) {
  detail::require_standard(spec, "toy_F");
  const double m = m_b(theta, spec);
  detail::CompensatedSum s;
  for (const auto& a : theta.atoms()) {
    const double shifted = a.point[0] + m;
    s.add(a.weight * (shifted * a.point[1] - 0.5 * shifted * shifted));
  }
  return s.value();
}

struct ToyRate {
  double re_minus_F;    // R(theta || gamma0) - F(theta)
  double entropy_form;  // R(theta || Psi_gamma0(theta))
};

/// Both forms of the toy rate function for a nondegenerate Gaussian theta.
inline ToyRate toy_rate_function(const GaussianMeasure& theta, const ToyModelSpec& spec) {
  detail::require_bivariate(theta);
  detail::require_standard(spec, "toy_rate_function");
  Eigen::LLT<Eigen::MatrixXd> chol(theta.covariance());
  if (chol.info() != Eigen::Success || Eigen::MatrixXd(chol.matrixL()).diagonal().minCoeff() <= 1e-12)
    throw DomainError("toy rate function needs a positive definite covariance");
  const auto to_gamma0 = gaussian_relative_entropy(theta, GaussianMeasure::standard(2));
  const auto to_frozen = gaussian_relative_entropy(theta, toy_Psi_gamma0(theta, spec));
  return {to_gamma0.value() - toy_F(theta, spec), to_frozen.value()};
}

/// Noise path (Y(0), Y(1)) of i.i.d. standard normals.
inline Path<double> toy_noise_path(Engine& eng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Path<double> y(2);
  y[0] = normal(eng);
  y[1] = normal(eng);
  return y;
}

/// The toy model as a staged system with T = 1.
inline StagedSystemSpec<double, double> toy_staged_spec(const ToyModelSpec& spec) {
  spec.validate();
  StagedSystemSpec<double, double> s;
  s.T = 1;
  s.phi0 = [](const double& y) { return y; };
  s.phi = [spec](int, const double& x, const DiscreteDistribution<double>& mu0, const double& y) {
    const double m = m_b(mu0, spec);
    if (spec.variant == ToyModelSpec::Variant::indicator) return x + m * y;
    return x + m + y;
  };
  return s;
}

struct ToySimulation {
  std::vector<Path<double>> noise;
  std::vector<Path<double>> paths;
  EmpiricalMeasure<Path<double>> empirical;
};

/// N-particle toy system: X(0) = Y(0), X(1) = X(0) + (1/N) sum_j b(X_j(0)) + Y(1)
/// (indicator variant: X(1) = X(0) + mu^N(B x R) Y(1)).
inline ToySimulation toy_simulate(const ToyModelSpec& spec, std::size_t N, std::uint64_t seed) {
  spec.validate();
  if (N == 0) throw DomainError("toy_simulate needs N >= 1");
  ToySimulation sim;
  sim.noise.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    Engine eng = particle_engine(seed, i);
    sim.noise.push_back(toy_noise_path(eng));
  }
  std::vector<double> x0(N);
  for (std::size_t i = 0; i < N; ++i) x0[i] = sim.noise[i][0];
  const double m = m_b(EmpiricalMeasure<double>(x0).to_distribution(), spec);
  sim.paths.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double x1 = spec.variant == ToyModelSpec::Variant::indicator ? x0[i] + m * sim.noise[i][1]
                                                                         : x0[i] + m + sim.noise[i][1];
    sim.paths[i] = {x0[i], x1};
  }
  sim.empirical = EmpiricalMeasure<Path<double>>(sim.paths);
  return sim;
}

}  // namespace mfld
