#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mfld/discrete_distribution.hpp"
#include "mfld/errors.hpp"
#include "mfld/measures.hpp"
#include "mfld/rng.hpp"

namespace mfld {

template <class X>
using Path = std::vector<X>;

template <class X>
using PathMeasure = DiscreteDistribution<Path<X>>;

template <class Y>
using NoisePathMeasure = DiscreteDistribution<Path<Y>>;

/// Discrete-time noise-based system driven stage by stage:
///
///   x_0     = phi0(y_0)
///   x_{t+1} = phi(t+1, x_t, mu(t), y_{t+1}),   t = 0..T-1
///
/// where mu(t) is the time-t marginal of the measure the system is coupled
/// to (the empirical measure for particles, a candidate law for Psi).
template <class X, class Y>
struct StagedSystemSpec {
  using InitialMap = std::function<X(const Y&)>;
  using StageMap = std::function<X(int, const X&, const DiscreteDistribution<X>&, const Y&)>;

  int T = 1;
  InitialMap phi0;
  StageMap phi;

  void validate() const {
    if (T < 1) throw DomainError("staged system needs T >= 1");
    if (!phi0 || !phi) throw DomainError("staged system maps are not set");
  }
};

namespace detail {

template <class Y>
void require_noise_path(const Path<Y>& y, int T) {
  if (y.size() != static_cast<std::size_t>(T) + 1)
    throw DomainError("noise path has " + std::to_string(y.size()) + " stages, expected " + std::to_string(T + 1));
}

template <class X>
void require_path_length(const PathMeasure<X>& mu, int T) {
  for (const auto& a : mu.atoms())
    if (a.point.size() != static_cast<std::size_t>(T) + 1)
      throw DomainError("path atom has " + std::to_string(a.point.size()) + " stages, expected " +
                        std::to_string(T + 1));
}

// The forward recursion shared by the limit law (real weights) and the
// empirical law (integer counts). MakeMarginal turns (states, weights) into
// the stage marginal fed to phi.
template <class X, class Y, class W, class MakeMarginal>
std::vector<Path<X>> staged_forward(const StagedSystemSpec<X, Y>& spec, const std::vector<const Path<Y>*>& noise,
                                    const std::vector<W>& weights, MakeMarginal&& make_marginal,
                                    std::vector<DiscreteDistribution<X>>* marginals_out) {
  const std::size_t n = noise.size();
  std::vector<Path<X>> paths(n);
  for (std::size_t i = 0; i < n; ++i) {
    require_noise_path(*noise[i], spec.T);
    paths[i].reserve(static_cast<std::size_t>(spec.T) + 1);
    paths[i].push_back(spec.phi0((*noise[i])[0]));
  }
  for (int t = 0; t < spec.T; ++t) {
    DiscreteDistribution<X> marg = make_marginal(paths, weights, static_cast<std::size_t>(t));
    for (std::size_t i = 0; i < n; ++i)
      paths[i].push_back(spec.phi(t + 1, paths[i].back(), marg, (*noise[i])[static_cast<std::size_t>(t) + 1]));
    if (marginals_out) marginals_out->push_back(std::move(marg));
  }
  if (marginals_out) marginals_out->push_back(make_marginal(paths, weights, static_cast<std::size_t>(spec.T)));
  return paths;
}

template <class X>
DiscreteDistribution<X> weighted_marginal(const std::vector<Path<X>>& paths, const std::vector<double>& w,
                                          std::size_t t) {
  std::vector<Atom<X>> atoms;
  atoms.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) atoms.push_back({paths[i][t], w[i]});
  return DiscreteDistribution<X>::aggregated(std::move(atoms));
}

template <class X>
DiscreteDistribution<X> counted_marginal(const std::vector<Path<X>>& paths, const std::vector<std::uint64_t>& c,
                                         std::size_t t) {
  std::vector<std::pair<X, std::uint64_t>> counts;
  counts.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) counts.emplace_back(paths[i][t], c[i]);
  return EmpiricalMeasure<X>::from_counts(std::move(counts)).to_distribution();
}

}  // namespace detail

/// psi(mu, y): the path generated from noise path y with the measure argument
/// frozen at the marginals of mu (marginals[t] = mu(t), t = 0..T-1).
template <class X, class Y>
Path<X> frozen_path(const StagedSystemSpec<X, Y>& spec, const std::vector<DiscreteDistribution<X>>& marginals,
                    const Path<Y>& y) {
  detail::require_noise_path(y, spec.T);
  if (marginals.size() < static_cast<std::size_t>(spec.T)) throw DomainError("not enough stage marginals");
  Path<X> x;
  x.reserve(y.size());
  x.push_back(spec.phi0(y[0]));
  for (int t = 0; t < spec.T; ++t)
    x.push_back(spec.phi(t + 1, x.back(), marginals[static_cast<std::size_t>(t)], y[static_cast<std::size_t>(t) + 1]));
  return x;
}

template <class X>
std::vector<DiscreteDistribution<X>> stage_marginals(const PathMeasure<X>& mu, int T) {
  detail::require_path_length(mu, T);
  std::vector<DiscreteDistribution<X>> out;
  out.reserve(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) out.push_back(marginal(mu, static_cast<std::size_t>(t)));
  return out;
}

/// Psi_gamma(mu): the image of gamma under psi(mu, .).
template <class X, class Y>
PathMeasure<X> apply_Psi(const NoisePathMeasure<Y>& gamma, const PathMeasure<X>& mu,
                         const StagedSystemSpec<X, Y>& spec) {
  spec.validate();
  const auto marginals = stage_marginals(mu, spec.T);
  return pushforward(gamma, [&](const Path<Y>& y) { return frozen_path(spec, marginals, y); });
}

/// The McKean-Vlasov law mu*(gamma) together with its stage marginals
/// alpha_0(gamma), ..., alpha_T(gamma).
template <class X>
struct McKeanVlasovLaw {
  PathMeasure<X> law;
  std::vector<DiscreteDistribution<X>> marginals;
};

/// Computes alpha_t(gamma) by the forward recursion (each stage pushes gamma
/// through the composed stage maps with the previously computed marginals
/// plugged in) and returns the image of gamma under the full path map.
template <class X, class Y>
McKeanVlasovLaw<X> mckean_vlasov_solution(const NoisePathMeasure<Y>& gamma, const StagedSystemSpec<X, Y>& spec) {
  spec.validate();
  std::vector<const Path<Y>*> noise;
  std::vector<double> weights;
  for (const auto& a : gamma.atoms()) {
    noise.push_back(&a.point);
    weights.push_back(a.weight);
  }
  McKeanVlasovLaw<X> out;
  auto paths = detail::staged_forward(
      spec, noise, weights,
      [](const std::vector<Path<X>>& p, const std::vector<double>& w, std::size_t t) {
        return detail::weighted_marginal(p, w, t);
      },
      &out.marginals);
  std::vector<Atom<Path<X>>> atoms;
  atoms.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) atoms.push_back({std::move(paths[i]), weights[i]});
  out.law = PathMeasure<X>::aggregated(std::move(atoms));
  return out;
}

template <class X, class Y>
PathMeasure<X> mckean_vlasov_law(const NoisePathMeasure<Y>& gamma, const StagedSystemSpec<X, Y>& spec) {
  return mckean_vlasov_solution(gamma, spec).law;
}

/// mu*(lambda^N) for an empirical noise measure, in exact counts.
template <class X, class Y>
EmpiricalMeasure<Path<X>> mckean_vlasov_law(const EmpiricalMeasure<Path<Y>>& lambda,
                                             const StagedSystemSpec<X, Y>& spec) {
  spec.validate();
  std::vector<const Path<Y>*> noise;
  std::vector<std::uint64_t> counts;
  for (const auto& [y, c] : lambda.counts()) {
    noise.push_back(&y);
    counts.push_back(c);
  }
  auto paths = detail::staged_forward(
      spec, noise, counts,
      [](const std::vector<Path<X>>& p, const std::vector<std::uint64_t>& c, std::size_t t) {
        return detail::counted_marginal(p, c, t);
      },
      static_cast<std::vector<DiscreteDistribution<X>>*>(nullptr));
  std::vector<std::pair<Path<X>, std::uint64_t>> out;
  out.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) out.emplace_back(std::move(paths[i]), counts[i]);
  return EmpiricalMeasure<Path<X>>::from_counts(std::move(out));
}

/// Psi_lambda(mu) for empirical lambda and mu, in exact counts.
template <class X, class Y>
EmpiricalMeasure<Path<X>> apply_Psi(const EmpiricalMeasure<Path<Y>>& lambda, const EmpiricalMeasure<Path<X>>& mu,
                                     const StagedSystemSpec<X, Y>& spec) {
  spec.validate();
  std::vector<DiscreteDistribution<X>> marginals;
  for (int t = 0; t < spec.T; ++t) marginals.push_back(marginal(mu, static_cast<std::size_t>(t)).to_distribution());
  std::vector<std::pair<Path<X>, std::uint64_t>> out;
  for (const auto& [y, c] : lambda.counts()) out.emplace_back(frozen_path(spec, marginals, y), c);
  return EmpiricalMeasure<Path<X>>::from_counts(std::move(out));
}

template <class X>
struct FixedPointReport {
  PathMeasure<X> solution;
  int iterations = 0;
  double residual = 0.0;
};

/// Damped fixed-point iteration mu_{k+1} = (1 - d) Psi(mu_k) + d mu_k started
/// at `seed`. The residual is the total-variation gap between mu_k and
/// Psi(mu_k); the iterate is returned as soon as it drops below tol.
template <class X, class PsiOp>
FixedPointReport<X> solve_fixed_point_iterative(PsiOp&& psi_op, PathMeasure<X> seed, double tol, int max_iter,
                                                double damping) {
  if (!(tol > 0.0)) throw DomainError("fixed-point tolerance must be positive");
  if (!(damping >= 0.0 && damping < 1.0)) throw DomainError("damping must lie in [0,1)");
  PathMeasure<X> mu = psi_op(seed);
  double residual = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    PathMeasure<X> image = psi_op(mu);
    residual = total_variation(mu, image);
    if (residual < tol) return {std::move(mu), k, residual};
    mu = damping == 0.0 ? std::move(image) : mixture(image, mu, damping);
  }
  throw ConvergenceError("fixed-point iteration did not converge in " + std::to_string(max_iter) +
                             " iterations (residual " + std::to_string(residual) + ")",
                         residual, max_iter);
}

/// Seed for staged systems: every path is held constant at its initial state.
template <class X, class Y>
PathMeasure<X> constant_seed(const NoisePathMeasure<Y>& gamma, const StagedSystemSpec<X, Y>& spec) {
  return pushforward(gamma, [&](const Path<Y>& y) {
    detail::require_noise_path(y, spec.T);
    return Path<X>(static_cast<std::size_t>(spec.T) + 1, spec.phi0(y[0]));
  });
}

template <class X, class Y>
FixedPointReport<X> solve_fixed_point_iterative(const NoisePathMeasure<Y>& gamma, const StagedSystemSpec<X, Y>& spec,
                                                double tol = 1e-10, int max_iter = 1000, double damping = 0.0) {
  return solve_fixed_point_iterative<X>([&](const PathMeasure<X>& mu) { return apply_Psi(gamma, mu, spec); },
                                        constant_seed(gamma, spec), tol, max_iter, damping);
}

template <class X, class Y>
struct ParticleRun {
  std::vector<Path<Y>> noise;        // Y_1..Y_N
  std::vector<Path<X>> paths;        // X_1..X_N
  EmpiricalMeasure<Path<X>> empirical;  // mu^N
  EmpiricalMeasure<Path<Y>> noise_empirical;  // lambda^N
};

/// N-particle simulation. Particle i draws its noise path from its own
/// stream (see derive_seed); the stage-t empirical marginal of all particles
/// feeds stage t+1.
template <class X, class Y, class Sampler>
ParticleRun<X, Y> simulate_particles(Sampler&& sample_noise_path, const StagedSystemSpec<X, Y>& spec, std::size_t N,
                                     std::uint64_t seed) {
  spec.validate();
  if (N == 0) throw DomainError("simulate_particles needs N >= 1");
  ParticleRun<X, Y> run;
  run.noise.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    Engine eng = particle_engine(seed, i);
    run.noise.push_back(sample_noise_path(eng));
    detail::require_noise_path(run.noise.back(), spec.T);
  }
  run.paths.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    run.paths[i].reserve(static_cast<std::size_t>(spec.T) + 1);
    run.paths[i].push_back(spec.phi0(run.noise[i][0]));
  }
  std::vector<X> states(N);
  for (int t = 0; t < spec.T; ++t) {
    for (std::size_t i = 0; i < N; ++i) states[i] = run.paths[i].back();
    const DiscreteDistribution<X> marg = EmpiricalMeasure<X>(states).to_distribution();
    for (std::size_t i = 0; i < N; ++i)
      run.paths[i].push_back(
          spec.phi(t + 1, run.paths[i].back(), marg, run.noise[i][static_cast<std::size_t>(t) + 1]));
  }
  run.empirical = EmpiricalMeasure<Path<X>>(run.paths);
  run.noise_empirical = EmpiricalMeasure<Path<Y>>(run.noise);
  return run;
}

/// Rate function in relative-entropy form: I(eta) = R(eta || Psi_gamma0(eta)).
template <class X, class Y>
ExtendedReal rate_function_re_form(const PathMeasure<X>& eta, const NoisePathMeasure<Y>& gamma0,
                                   const StagedSystemSpec<X, Y>& spec) {
  return relative_entropy(eta, apply_Psi(gamma0, eta, spec));
}

/// Rate function in contraction form: inf { R(gamma||gamma0) : mu*(gamma) = eta }.
/// mu*(gamma) = eta exactly when gamma pushed through psi(eta, .) is eta, so
/// the infimum is taken by the grid oracle over lifts through that frozen map.
template <class X, class Y>
ExtendedReal rate_function_contraction_form(const PathMeasure<X>& eta, const NoisePathMeasure<Y>& gamma0,
                                            const StagedSystemSpec<X, Y>& spec, int grid_resolution) {
  spec.validate();
  const auto marginals = stage_marginals(eta, spec.T);
  return brute_force_lift_infimum(eta, gamma0, [&](const Path<Y>& y) { return frozen_path(spec, marginals, y); },
                                  grid_resolution);
}

}  // namespace mfld
