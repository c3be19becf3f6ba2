#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfld/discrete_distribution.hpp"
#include "mfld/errors.hpp"
#include "mfld/gaussian.hpp"
#include "mfld/noise_systems.hpp"
#include "mfld/rng.hpp"

namespace mfld {

using State = std::vector<double>;

/// Euler grid: K steps of size h over [0, K h].
struct EulerGrid {
  double h = 0.0;
  int K = 0;

  static EulerGrid over(double T, int K) {
    if (K < 1) throw DomainError("Euler grid needs at least one step");
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("Euler horizon must be positive");
    return {T / K, K};
  }

  double horizon() const { return h * K; }

  void validate(double T) const {
    if (K < 1 || !(h > 0.0)) throw DomainError("Euler grid needs K >= 1 and h > 0");
    if (std::abs(h * K - T) > 1e-12 * std::max(1.0, T))
      throw DomainError("Euler grid does not cover the horizon: K h = " + std::to_string(h * K) +
                        ", T = " + std::to_string(T));
  }
};

/// The parts of a measure the builtin coefficients read: its mean and, for
/// one-dimensional states, the means of sin and cos.
struct MeasureSummary {
  Eigen::VectorXd mean;
  double mean_sin = 0.0;
  double mean_cos = 0.0;
};

inline MeasureSummary summarize(const DiscreteDistribution<State>& nu) {
  if (nu.empty()) throw DomainError("summary of an empty measure");
  const auto d = static_cast<Eigen::Index>(nu.atoms()[0].point.size());
  MeasureSummary s{Eigen::VectorXd::Zero(d)};
  for (const auto& a : nu.atoms()) {
    for (Eigen::Index i = 0; i < d; ++i) s.mean(i) += a.weight * a.point[static_cast<std::size_t>(i)];
    if (d == 1) {
      s.mean_sin += a.weight * std::sin(a.point[0]);
      s.mean_cos += a.weight * std::cos(a.point[0]);
    }
  }
  return s;
}

inline MeasureSummary dirac_summary(const Eigen::VectorXd& x) {
  MeasureSummary s{x};
  if (x.size() == 1) {
    s.mean_sin = std::sin(x(0));
    s.mean_cos = std::cos(x(0));
  }
  return s;
}

/// Diffusion coefficients of dX = b(t, X, nu) dt + s(t, X, nu) dW.
///
/// linear: b = a + B x + C mean(nu), s = S (constant).
/// sine_coupling (d = 1): b = -kappa x + lambda E_nu sin(y - x), s = sigma.
class ItoSpec {
 public:
  enum class Kind { linear, sine_coupling };

  static ItoSpec linear(Eigen::VectorXd a, Eigen::MatrixXd B, Eigen::MatrixXd C, Eigen::MatrixXd S,
                        Eigen::VectorXd x0, double T) {
    const auto d = x0.size();
    if (d == 0) throw DomainError("state dimension must be positive");
    if (a.size() != d || B.rows() != d || B.cols() != d || C.rows() != d || C.cols() != d || S.rows() != d ||
        S.cols() == 0)
      throw DomainError("linear coefficients have inconsistent shapes");
    if (!a.allFinite() || !B.allFinite() || !C.allFinite() || !S.allFinite() || !x0.allFinite())
      throw DomainError("linear coefficients must be finite");
    ItoSpec s;
    s.kind_ = Kind::linear;
    s.a_ = std::move(a);
    s.B_ = std::move(B);
    s.C_ = std::move(C);
    s.S_ = std::move(S);
    s.x0_ = std::move(x0);
    s.set_horizon(T);
    s.K_ = std::max({s.a_.norm(), operator_norm(s.B_) + operator_norm(s.C_), operator_norm(s.S_)});
    return s;
  }

  /// Brownian motion from x0 in dimension d.
  static ItoSpec brownian(Eigen::VectorXd x0, double T) {
    const auto d = x0.size();
    return linear(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d),
                  Eigen::MatrixXd::Identity(d, d), std::move(x0), T);
  }

  /// One-dimensional relaxation towards the mean field: b = kappa (mean - x).
  static ItoSpec mean_reverting(double kappa, double sigma, double x0, double T) {
    return linear(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, -kappa),
                  Eigen::MatrixXd::Constant(1, 1, kappa), Eigen::MatrixXd::Constant(1, 1, sigma),
                  Eigen::VectorXd::Constant(1, x0), T);
  }

  static ItoSpec sine_coupling(double kappa, double lambda, double sigma, double x0, double T) {
    if (!std::isfinite(kappa) || !std::isfinite(lambda) || !std::isfinite(sigma) || !std::isfinite(x0))
      throw DomainError("sine coupling parameters must be finite");
    ItoSpec s;
    s.kind_ = Kind::sine_coupling;
    s.kappa_ = kappa;
    s.lambda_ = lambda;
    s.sigma_ = sigma;
    s.x0_ = Eigen::VectorXd::Constant(1, x0);
    s.S_ = Eigen::MatrixXd::Constant(1, 1, sigma);
    s.set_horizon(T);
    s.K_ = std::max({std::abs(kappa), std::abs(lambda), std::abs(sigma)});
    return s;
  }

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::linear; }
  Eigen::Index d() const { return x0_.size(); }
  Eigen::Index d1() const { return S_.cols(); }
  const Eigen::VectorXd& x0() const { return x0_; }
  double T() const { return T_; }

  /// Growth constant: |s| <= K and |b(t, x, nu)| <= K (1 + sup |support of nu| + |x|).
  double growth_constant() const { return K_; }

  const Eigen::VectorXd& a() const { return require_linear(), a_; }
  const Eigen::MatrixXd& B() const { return require_linear(), B_; }
  const Eigen::MatrixXd& C() const { return require_linear(), C_; }
  const Eigen::MatrixXd& S() const { return require_linear(), S_; }

  Eigen::VectorXd drift(double /*t*/, const Eigen::VectorXd& x, const MeasureSummary& nu) const {
    if (kind_ == Kind::linear) return a_ + B_ * x + C_ * nu.mean;
    // E sin(y - x) = E sin(y) cos(x) - E cos(y) sin(x)
    return Eigen::VectorXd::Constant(1, -kappa_ * x(0) + lambda_ * (nu.mean_sin * std::cos(x(0)) -
                                                                     nu.mean_cos * std::sin(x(0))));
  }

  const Eigen::MatrixXd& dispersion(double /*t*/, const Eigen::VectorXd& /*x*/, const MeasureSummary& /*nu*/) const {
    return S_;
  }

 private:
  static double operator_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  }
  void set_horizon(double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("horizon must be positive");
    T_ = T;
  }
  void require_linear() const {
    if (kind_ != Kind::linear) throw DomainError("coefficient matrices exist only for linear specs");
  }

  Kind kind_ = Kind::linear;
  Eigen::VectorXd a_, x0_;
  Eigen::MatrixXd B_, C_, S_;
  double kappa_ = 0.0, lambda_ = 0.0, sigma_ = 0.0;
  double T_ = 1.0;
  double K_ = 0.0;
};

/// Deterministic piecewise-constant control u_0..u_{K-1}.
struct ControlPath {
  std::vector<Eigen::VectorXd> u;

  static ControlPath zero(int K, Eigen::Index d1) {
    return {std::vector<Eigen::VectorXd>(static_cast<std::size_t>(K), Eigen::VectorXd::Zero(d1))};
  }
  static ControlPath constant(int K, const Eigen::VectorXd& c) {
    return {std::vector<Eigen::VectorXd>(static_cast<std::size_t>(K), c)};
  }

  /// 1/2 sum |u_k|^2 h.
  double energy(double h) const {
    double s = 0.0;
    for (const auto& v : u) s += v.squaredNorm();
    return 0.5 * s * h;
  }

  /// The same control on a grid `factor` times finer.
  ControlPath refined(int factor) const {
    if (factor < 1) throw DomainError("refinement factor must be positive");
    ControlPath out;
    for (const auto& v : u)
      for (int r = 0; r < factor; ++r) out.u.push_back(v);
    return out;
  }

  void validate(int K, Eigen::Index d1) const {
    if (u.size() != static_cast<std::size_t>(K)) throw DomainError("control has the wrong number of steps");
    for (const auto& v : u) {
      if (v.size() != d1) throw DomainError("control has the wrong dimension");
      if (!v.allFinite()) throw DomainError("control has non-finite entries");
    }
  }
};

namespace detail {

inline Eigen::VectorXd as_vector(const State& s) {
  return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}
inline State as_state(const Eigen::VectorXd& v) { return State(v.data(), v.data() + v.size()); }

// One Euler step out of stage t-1 (time (t-1) h):
//   x + b h + sqrt(h) s y [+ h s u].
inline Eigen::VectorXd euler_step(const ItoSpec& spec, const EulerGrid& grid, int t, const Eigen::VectorXd& x,
                                  const MeasureSummary& nu, const Eigen::VectorXd& y, const Eigen::VectorXd* u) {
  const double time = (t - 1) * grid.h;
  const Eigen::MatrixXd& s = spec.dispersion(time, x, nu);
  Eigen::VectorXd next = x + grid.h * spec.drift(time, x, nu) + std::sqrt(grid.h) * (s * y);
  if (u) next += grid.h * (s * *u);
  return next;
}

}  // namespace detail

/// Noise path (y_0, ..., y_K) of standard normal vectors in R^d1. y_0 is drawn
/// but unused (the initial state is deterministic), which keeps the stream
/// layout identical to the staged form.
inline Path<State> ito_noise_path(Engine& eng, Eigen::Index d1, int K) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Path<State> y(static_cast<std::size_t>(K) + 1, State(static_cast<std::size_t>(d1)));
  for (auto& v : y)
    for (auto& c : v) c = normal(eng);
  return y;
}

/// The Euler chain as a staged system with stage maps
/// phi(t, x, nu, y) = x + b((t-1)h, x, nu) h + sqrt(h) s((t-1)h, x, nu) y.
inline StagedSystemSpec<State, State> ito_staged_spec(const ItoSpec& spec, const EulerGrid& grid) {
  grid.validate(spec.T());
  StagedSystemSpec<State, State> s;
  s.T = grid.K;
  const State x0 = detail::as_state(spec.x0());
  s.phi0 = [x0](const State&) { return x0; };
  s.phi = [spec, grid](int t, const State& x, const DiscreteDistribution<State>& nu, const State& y) {
    return detail::as_state(
        detail::euler_step(spec, grid, t, detail::as_vector(x), summarize(nu), detail::as_vector(y), nullptr));
  };
  return s;
}

struct EulerRun {
  std::vector<Path<State>> noise;
  std::vector<Path<State>> paths;
  EmpiricalMeasure<Path<State>> empirical;
};

/// N particles under controls (one ControlPath per particle, or none). Each
/// stage reads the empirical state distribution of the previous stage. A
/// non-finite state raises DivergenceError naming particle and stage.
inline EulerRun euler_controlled_simulate(const ItoSpec& spec, const EulerGrid& grid, std::size_t N,
                                          const std::vector<ControlPath>& controls, std::uint64_t seed) {
  grid.validate(spec.T());
  if (N == 0) throw DomainError("simulation needs N >= 1");
  if (!controls.empty()) {
    if (controls.size() != N) throw DomainError("need one control per particle");
    for (const auto& c : controls) c.validate(grid.K, spec.d1());
  }
  EulerRun run;
  run.noise.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    Engine eng = particle_engine(seed, i);
    run.noise.push_back(ito_noise_path(eng, spec.d1(), grid.K));
  }
  const State x0 = detail::as_state(spec.x0());
  run.paths.assign(N, Path<State>{x0});
  std::vector<State> states(N);
  for (int t = 0; t < grid.K; ++t) {
    for (std::size_t i = 0; i < N; ++i) states[i] = run.paths[i].back();
    const MeasureSummary nu = summarize(EmpiricalMeasure<State>(states).to_distribution());
    for (std::size_t i = 0; i < N; ++i) {
      const Eigen::VectorXd* u = controls.empty() ? nullptr : &controls[i].u[static_cast<std::size_t>(t)];
      const Eigen::VectorXd next =
          detail::euler_step(spec, grid, t + 1, detail::as_vector(run.paths[i].back()), nu,
                             detail::as_vector(run.noise[i][static_cast<std::size_t>(t) + 1]), u);
      if (!next.allFinite())
        throw DivergenceError("trajectory of particle " + std::to_string(i) + " diverged at stage " +
                                  std::to_string(t + 1),
                              i, static_cast<std::size_t>(t) + 1);
      run.paths[i].push_back(detail::as_state(next));
    }
  }
  run.empirical = EmpiricalMeasure<Path<State>>(run.paths);
  return run;
}

inline EulerRun euler_simulate(const ItoSpec& spec, const EulerGrid& grid, std::size_t N, std::uint64_t seed) {
  return euler_controlled_simulate(spec, grid, N, {}, seed);
}

/// Means and covariances of the stage marginals, k = 0..K.
struct MarginalFlow {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::MatrixXd> cov;
};

struct McKeanVlasovFlow {
  MarginalFlow flow;
  std::optional<GaussianMeasure> path_law;  // linear specs: law of (X_1, ..., X_K)
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline void require_linear(const ItoSpec& spec, const char* op) {
  if (!spec.is_linear())
    throw CapacityError(std::string(op) + " has an exact form only for linear specs; use the particle flow");
}

// Stage marginal moments of the Euler chain with the measure argument frozen
// at the mean flow theta (theta[k], k = 0..K-1, enters the step out of k).
inline MarginalFlow frozen_moments(const ItoSpec& spec, const EulerGrid& grid, const std::vector<Eigen::VectorXd>& theta) {
  const auto d = spec.d();
  const Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(d, d) + spec.B() * grid.h;
  const Eigen::MatrixXd Q = grid.h * spec.S() * spec.S().transpose();
  MarginalFlow f;
  f.mean.push_back(spec.x0());
  f.cov.push_back(Eigen::MatrixXd::Zero(d, d));
  for (int k = 0; k < grid.K; ++k) {
    const auto& m = f.mean.back();
    f.mean.push_back(Phi * m + (spec.a() + spec.C() * theta[static_cast<std::size_t>(k)]) * grid.h);
    f.cov.push_back(Phi * f.cov.back() * Phi.transpose() + Q);
  }
  return f;
}

// Stacked G with X_k - E X_k = sum_{i <= k} Phi^(k-i) sqrt(h) S xi_i.
inline Eigen::MatrixXd stacked_noise_map(const ItoSpec& spec, const EulerGrid& grid) {
  const auto d = spec.d(), d1 = spec.d1();
  const Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(d, d) + spec.B() * grid.h;
  const Eigen::MatrixXd block = std::sqrt(grid.h) * spec.S();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(grid.K * d, grid.K * d1);
  for (int i = 0; i < grid.K; ++i) {
    Eigen::MatrixXd P = block;
    for (int k = i; k < grid.K; ++k) {
      G.block(k * d, i * d1, d, d1) = P;
      P = Phi * P;
    }
  }
  return G;
}

inline void require_flow(const std::vector<Eigen::VectorXd>& theta, const ItoSpec& spec, const EulerGrid& grid) {
  if (theta.size() < static_cast<std::size_t>(grid.K)) throw DomainError("mean flow is shorter than the grid");
  for (const auto& m : theta)
    if (m.size() != spec.d()) throw DomainError("mean flow has the wrong dimension");
}

}  // namespace detail

/// Law of (X_1, ..., X_K) for the Euler chain with the measure argument frozen
/// at the mean flow theta (theta[0] = x0, ..., theta[K-1]).
inline GaussianMeasure frozen_law(const ItoSpec& spec, const EulerGrid& grid, const std::vector<Eigen::VectorXd>& theta) {
  detail::require_linear(spec, "frozen_law");
  grid.validate(spec.T());
  detail::require_flow(theta, spec, grid);
  const auto f = detail::frozen_moments(spec, grid, theta);
  const auto d = spec.d();
  Eigen::VectorXd mean(grid.K * d);
  for (int k = 1; k <= grid.K; ++k) mean.segment((k - 1) * d, d) = f.mean[static_cast<std::size_t>(k)];
  const Eigen::MatrixXd G = detail::stacked_noise_map(spec, grid);
  Eigen::MatrixXd cov = G * G.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return GaussianMeasure(mean, cov);
}

/// Stage-marginal means of a stacked path law, with x0 at stage 0.
inline std::vector<Eigen::VectorXd> mean_flow(const GaussianMeasure& theta, const ItoSpec& spec, const EulerGrid& grid) {
  const auto d = spec.d();
  if (theta.dimension() != grid.K * d) throw DomainError("path law does not match the grid");
  std::vector<Eigen::VectorXd> m{spec.x0()};
  for (int k = 1; k <= grid.K; ++k) m.push_back(theta.mean().segment((k - 1) * d, d));
  return m;
}

struct FlowOptions {
  double tol = 1e-10;
  int max_iter = 1000;
  double damping = 0.5;
  std::size_t particles = 4000;  // nonlinear specs only
  std::uint64_t seed = 0;        // nonlinear specs only
};

/// The McKean-Vlasov flow. Linear specs: damped fixed-point iteration
/// theta <- (1 - d) M(theta) + d theta on stage means and covariances, M the
/// frozen moment recursion; the residual is the sup over stages of the mean
/// gap plus the covariance gap. Other specs: moments of a particle system.
inline McKeanVlasovFlow mckean_vlasov_flow(const ItoSpec& spec, const EulerGrid& grid, const FlowOptions& opt = {}) {
  grid.validate(spec.T());
  McKeanVlasovFlow out;
  if (!spec.is_linear()) {
    auto run = euler_simulate(spec, grid, opt.particles, opt.seed);
    const double n = static_cast<double>(opt.particles);
    for (int k = 0; k <= grid.K; ++k) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(spec.d());
      for (const auto& p : run.paths) m += detail::as_vector(p[static_cast<std::size_t>(k)]);
      m /= n;
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(spec.d(), spec.d());
      for (const auto& p : run.paths) {
        const Eigen::VectorXd v = detail::as_vector(p[static_cast<std::size_t>(k)]) - m;
        c += v * v.transpose();
      }
      out.flow.mean.push_back(m);
      out.flow.cov.push_back(c / n);
    }
    out.iterations = 1;
    return out;
  }
  if (!(opt.tol > 0.0)) throw DomainError("flow tolerance must be positive");
  if (!(opt.damping >= 0.0 && opt.damping < 1.0)) throw DomainError("damping must lie in [0,1)");

  MarginalFlow theta;
  theta.mean.assign(static_cast<std::size_t>(grid.K) + 1, spec.x0());
  theta.cov.assign(static_cast<std::size_t>(grid.K) + 1, Eigen::MatrixXd::Zero(spec.d(), spec.d()));
  double residual = 0.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    MarginalFlow image = detail::frozen_moments(spec, grid, theta.mean);
    residual = 0.0;
    for (std::size_t k = 0; k < image.mean.size(); ++k)
      residual = std::max(residual, (image.mean[k] - theta.mean[k]).cwiseAbs().maxCoeff() +
                                        (image.cov[k] - theta.cov[k]).cwiseAbs().maxCoeff());
    if (residual < opt.tol) {
      out.flow = std::move(image);
      out.path_law = frozen_law(spec, grid, out.flow.mean);
      out.iterations = it;
      out.residual = residual;
      return out;
    }
    for (std::size_t k = 0; k < image.mean.size(); ++k) {
      theta.mean[k] = (1.0 - opt.damping) * image.mean[k] + opt.damping * theta.mean[k];
      theta.cov[k] = (1.0 - opt.damping) * image.cov[k] + opt.damping * theta.cov[k];
    }
  }
  throw ConvergenceError("McKean-Vlasov flow did not converge (residual " + std::to_string(residual) + ")", residual,
                         opt.max_iter);
}

/// I(theta) = R(theta || frozen_law(mean flow of theta)).
inline ExtendedReal ito_rate_re_form(const GaussianMeasure& theta, const ItoSpec& spec, const EulerGrid& grid) {
  detail::require_linear(spec, "ito_rate_re_form");
  return gaussian_relative_entropy(theta, frozen_law(spec, grid, mean_flow(theta, spec, grid)));
}

struct VariationalResult {
  ExtendedReal value = ExtendedReal::infinity();
  std::optional<ControlPath> control;
  std::string note;
};

/// inf 1/2 sum |u_k|^2 h over deterministic controls whose controlled law
/// (measure argument = the law of the controlled process itself) equals
/// theta. Deterministic controls shift means only, so theta must carry the
/// uncontrolled covariance. The required drift correction
///   r_k = m_{k+1} - Phi m_k - (a + C m_k) h
/// must lie in the range of S h; the min-norm solution u_k = S^+ r_k / h is
/// optimal stage by stage.
inline VariationalResult variational_upper_bound(const GaussianMeasure& theta, const ItoSpec& spec,
                                                 const EulerGrid& grid) {
  detail::require_linear(spec, "variational_upper_bound");
  const auto m = mean_flow(theta, spec, grid);
  const GaussianMeasure reference = frozen_law(spec, grid, m);
  VariationalResult out;
  const double scale = std::max(1.0, reference.covariance().cwiseAbs().maxCoeff());
  if ((theta.covariance() - reference.covariance()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    out.note = "target covariance differs from the uncontrolled one; deterministic controls only shift means";
    return out;
  }
  const auto d = spec.d();
  const Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(d, d) + spec.B() * grid.h;
  const Eigen::MatrixXd S_pinv = spec.S().completeOrthogonalDecomposition().pseudoInverse();
  ControlPath u;
  for (int k = 0; k < grid.K; ++k) {
    const auto& mk = m[static_cast<std::size_t>(k)];
    const Eigen::VectorXd r = m[static_cast<std::size_t>(k) + 1] - Phi * mk - (spec.a() + spec.C() * mk) * grid.h;
    Eigen::VectorXd uk = S_pinv * r / grid.h;
    if ((spec.S() * uk * grid.h - r).norm() > 1e-9 * std::max(1.0, r.norm())) {
      out.note = "mean increment at stage " + std::to_string(k) + " is outside the range of the dispersion";
      return out;
    }
    u.u.push_back(std::move(uk));
  }
  out.value = ExtendedReal::finite(u.energy(grid.h));
  out.control = std::move(u);
  return out;
}

/// R(gamma || gamma0) for gamma0 the Wiener law on the grid (W(h), ..., W(Kh))
/// and gamma its shift by the integrated control sum_{i<k} u_i h, computed as
/// a Gaussian relative entropy of the stacked values.
inline double wiener_re_discretized(const ControlPath& u, const EulerGrid& grid) {
  if (u.u.empty()) throw DomainError("control has no steps");
  const auto d = u.u[0].size();
  u.validate(grid.K, d);
  const Eigen::Index n = grid.K * d;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < grid.K; ++j)
    for (int k = 0; k < grid.K; ++k)
      cov.block(j * d, k * d, d, d) = Eigen::MatrixXd::Identity(d, d) * (grid.h * (std::min(j, k) + 1));
  Eigen::VectorXd shift(n);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < grid.K; ++k) {
    acc += u.u[static_cast<std::size_t>(k)] * grid.h;
    shift.segment(k * d, d) = acc;
  }
  return gaussian_relative_entropy(GaussianMeasure(shift, cov), GaussianMeasure(Eigen::VectorXd::Zero(n), cov)).value();
}

}  // namespace mfld
