#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mfld/harness/report.hpp"
#include "mfld/ito_euler.hpp"
#include "mfld/meanfield_chain.hpp"
#include "mfld/measures.hpp"
#include "mfld/noise_systems.hpp"
#include "mfld/quadrature.hpp"
#include "mfld/rng.hpp"
#include "mfld/toy_model.hpp"

namespace mfld::harness {

inline constexpr std::size_t kMaxSanovAlphabet = 6;
inline constexpr std::size_t kMaxSanovN = 200;

// ---------------------------------------------------------------------------
// Sanov check

struct SanovType {
  std::vector<std::size_t> counts;
  double log_probability;  // -inf when the type is impossible under mu
  ExtendedReal rate;       // R(counts / N || mu)
  double gap;
};

/// log of the multinomial probability of `counts` under mu, via lgamma.
inline double multinomial_log_probability(const std::vector<std::size_t>& counts, const std::vector<double>& mu) {
  std::size_t N = 0;
  double lp = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    N += counts[i];
    if (counts[i] == 0) continue;
    if (mu[i] == 0.0) return -std::numeric_limits<double>::infinity();
    lp += static_cast<double>(counts[i]) * std::log(mu[i]) - std::lgamma(static_cast<double>(counts[i]) + 1.0);
  }
  return lp + std::lgamma(static_cast<double>(N) + 1.0);
}

inline SanovType sanov_type(const std::vector<std::size_t>& counts, const std::vector<double>& mu) {
  const std::size_t N = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<int> pts(counts.size());
  std::iota(pts.begin(), pts.end(), 0);
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / static_cast<double>(N);
  const auto nu = DiscreteDistribution<int>::from_weights(pts, w);
  const auto ref = DiscreteDistribution<int>::from_weights(pts, mu);
  SanovType t{counts, multinomial_log_probability(counts, mu), relative_entropy(nu, ref), 0.0};
  t.gap = type_gap(t.log_probability, t.rate, N);
  return t;
}

inline std::string counts_id(const std::vector<std::size_t>& counts) {
  std::string s = "(";
  for (std::size_t i = 0; i < counts.size(); ++i) s += (i ? "," : "") + std::to_string(counts[i]);
  return s + ")";
}

inline double sanov_bound(std::size_t M, std::size_t N) {
  return static_cast<double>(M) * std::log(static_cast<double>(N) + 1.0) / static_cast<double>(N);
}

namespace detail {

template <class Visit>
void for_each_count_vector(std::size_t M, std::size_t N, Visit&& visit) {
  std::vector<std::size_t> c(M, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == M) {
      c[i] = left;
      visit(c);
      return;
    }
    for (std::size_t v = left + 1; v-- > 0;) {
      c[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, N);
}

inline void require_probability_vector(const std::vector<double>& mu) {
  if (mu.empty()) throw DomainError("reference law is empty");
  double s = 0.0;
  for (double w : mu) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("reference law has an invalid entry");
    s += w;
  }
  if (std::abs(s - 1.0) > kWeightSumTolerance) throw DomainError("reference law does not sum to 1");
}

}  // namespace detail

/// Method-of-types check of Sanov's bound: every type nu at every N satisfies
/// |-(1/N) log P(nu) - R(nu || mu)| <= M log(N+1) / N. Rows list every type
/// while a schedule entry has at most `max_rows_per_N` types, and only the
/// worst type otherwise.
inline RateReport sanov_check(const std::vector<double>& mu, const std::vector<std::size_t>& schedule,
                              std::size_t max_rows_per_N = 2000) {
  detail::require_probability_vector(mu);
  const std::size_t M = mu.size();
  if (M > kMaxSanovAlphabet)
    throw CapacityError("sanov_check: alphabet size " + std::to_string(M) + " exceeds " +
                        std::to_string(kMaxSanovAlphabet));
  RateReport report;
  report.title = "Sanov method of types";
  for (std::size_t N : schedule) {
    if (N == 0) throw DomainError("sanov_check: N must be positive");
    if (N > kMaxSanovN)
      throw CapacityError("sanov_check: N = " + std::to_string(N) + " exceeds " + std::to_string(kMaxSanovN));
    const double bound = sanov_bound(M, N);
    const bool all_rows = type_count(N, M) <= static_cast<double>(max_rows_per_N);
    std::optional<SanovType> worst;
    bool pass = true;
    detail::for_each_count_vector(M, N, [&](const std::vector<std::size_t>& c) {
      SanovType t = sanov_type(c, mu);
      pass = pass && t.gap <= bound;
      if (all_rows) {
        report.add({counts_id(c), N, -t.log_probability / static_cast<double>(N), t.rate, t.gap, bound, t.gap <= bound});
      } else if (!worst || t.gap > worst->gap) {
        worst = std::move(t);
      }
    });
    if (worst)
      report.add({"worst " + counts_id(worst->counts), N, -worst->log_probability / static_cast<double>(N),
                  worst->rate, worst->gap, bound, pass});
    if (!pass) report.fail("a type at N = " + std::to_string(N) + " exceeds the bound");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Mean-field decay scan

/// Per-N method-of-types check of a chain plus a monotonicity check: every
/// type representable at the gcd of the schedule is scaled to each N and its
/// gap must not grow along the schedule.
inline RateReport meanfield_decay_scan(const MeanFieldChainSpec& spec, const std::vector<std::size_t>& schedule,
                                       std::size_t max_rows_per_N = 2000) {
  RateReport report;
  report.title = "Mean-field chain decay";
  if (schedule.empty()) return report;
  for (std::size_t N : schedule) {
    const DecayCheck check = types_decay_bound_check(spec, N, max_rows_per_N);
    for (const auto& r : check.rows)
      report.add({r.type_id, N, -r.log_probability / static_cast<double>(N), r.rate, r.gap, r.bound, r.pass});
    if (!check.all_pass) report.fail("a type at N = " + std::to_string(N) + " exceeds the bound");
    if (check.rows.size() < check.types)
      report.notes.push_back("N = " + std::to_string(N) + ": " + std::to_string(check.rows.size()) + " of " +
                             std::to_string(check.types) + " types listed, max gap " + detail::fmt(check.max_gap));
  }

  std::size_t g = 0;
  for (std::size_t N : schedule) g = std::gcd(g, N);
  const auto paths = feasible_paths(spec);
  std::vector<LogFactorials> lf;
  for (std::size_t N : schedule) lf.emplace_back(N);
  std::size_t grew = 0;
  for_each_type(paths, g, [&](const PathType& base) {
    const auto rate = chain_rate_function(base, spec);  // scaling leaves the measure unchanged
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < schedule.size(); ++k) {
      const std::uint64_t f = schedule[k] / g;
      std::vector<std::pair<Path<int>, std::uint64_t>> c;
      for (const auto& [p, n] : base.counts()) c.emplace_back(p, n * f);
      const double lp = mfld::detail::exact_type_log_probability(PathType::from_counts(std::move(c)), spec, lf[k]);
      const double gap = type_gap(lp, rate, schedule[k]);
      if (gap > prev + 1e-12) ++grew;
      prev = gap;
    }
  });
  if (grew) report.fail(std::to_string(grew) + " scaled types have a gap that grows with N");
  return report;
}

inline std::vector<Series> gap_series(const RateReport& report) {
  Series gap{"max gap", {}, {}}, bound{"bound", {}, {}};
  for (const auto& r : report.rows) {
    if (gap.x.empty() || gap.x.back() != static_cast<double>(r.N)) {
      gap.x.push_back(static_cast<double>(r.N));
      gap.y.push_back(0.0);
      bound.x.push_back(static_cast<double>(r.N));
      bound.y.push_back(r.bound);
    }
    if (std::isfinite(r.gap)) gap.y.back() = std::max(gap.y.back(), r.gap);
  }
  return {gap, bound};
}

// ---------------------------------------------------------------------------
// Identities

struct IdentityOptions {
  std::uint64_t seed = 20240601;
  bool mutate_psi = false;  // perturb the pushforward by 1e-3 in the contraction check
  double mutation = 1e-3;
  std::size_t contraction_instances = 50;
  std::size_t toy_instances = 100;
  std::size_t staged_instances = 6;
  std::size_t ito_specs = 10;
  std::size_t telescope_controls = 100;
  std::size_t fixed_point_runs = 200;
  int lift_grid_resolution = 16;
  double tol_contraction = 1e-12;
  double tol_lift_grid = 1e-4;
  double tol_toy = 1e-9;
  double tol_rate_forms = 1e-4;
  double tol_variational = 1e-6;
  double tol_telescope = 1e-12;
  double tol_sanov_baseline = 1e-12;
};

namespace detail {

inline double deviation(const ExtendedReal& a, const ExtendedReal& b) {
  if (a.is_infinite() || b.is_infinite()) return a.is_infinite() == b.is_infinite() ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(a.value() - b.value());
}

inline IdentityRow finish(std::string name, std::size_t n, double dev, double tol) {
  return {std::move(name), n, dev, tol, dev <= tol};
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.05, 1.0), coin(0.0, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) s += (x = coin(rng) < zero_prob ? 0.0 : u(rng));
  if (s == 0.0) w[0] = s = 1.0;
  for (auto& x : w) x /= s;
  return w;
}

struct ContractionInstance {
  DiscreteDistribution<int> gamma0;
  std::vector<int> psi;  // psi[y]
  DiscreteDistribution<int> eta;
};

inline ContractionInstance random_contraction_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ny_d(1, 6), nx_d(1, 3);
  const int ny = ny_d(rng), nx = nx_d(rng);
  std::vector<int> ys(static_cast<std::size_t>(ny));
  std::iota(ys.begin(), ys.end(), 0);
  ContractionInstance inst{DiscreteDistribution<int>::from_weights(ys, random_simplex(rng, ys.size(), 0.15)), {}, {}};
  std::uniform_int_distribution<int> x_d(0, nx - 1);
  for (int y = 0; y < ny; ++y) inst.psi.push_back(x_d(rng));
  // eta on the image of psi(gamma0), sometimes with an extra unreachable atom
  std::vector<int> xs;
  for (const auto& a : inst.gamma0.atoms())
    if (a.weight > 0.0) xs.push_back(inst.psi[static_cast<std::size_t>(a.point)]);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.1) xs.push_back(nx);
  inst.eta = DiscreteDistribution<int>::from_weights(xs, random_simplex(rng, xs.size()));
  return inst;
}

inline GaussianMeasure random_toy_theta(std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.2, 1.5);
  Eigen::Matrix2d L;
  L << u(rng), 0.0, z(rng), u(rng);
  return GaussianMeasure(Eigen::Vector2d(z(rng), z(rng)), L * L.transpose());
}

inline DriftFunction random_builtin_drift(std::mt19937_64& rng, std::size_t i) {
  std::uniform_real_distribution<double> s(-2.0, 2.0);
  switch (i % 3) {
    case 0: return DriftFunction::scaled_tanh(s(rng));
    case 1: return DriftFunction::scaled_cosine(s(rng));
    default: return DriftFunction::constant(s(rng));
  }
}

// Two-state affine chain whose entries stay in [0.2, 0.8] on the simplex,
// so every path is reachable from the four-point noise grid.
inline MeanFieldChainSpec random_interior_chain(std::mt19937_64& rng, int T) {
  std::uniform_real_distribution<double> base(0.35, 0.65), slope(-0.15, 0.15);
  Eigen::MatrixXd B(2, 2);
  std::vector<Eigen::MatrixXd> S(2, Eigen::MatrixXd::Zero(2, 2));
  for (int i = 0; i < 2; ++i) {
    B(i, 0) = base(rng);
    B(i, 1) = 1.0 - B(i, 0);
    for (int k = 0; k < 2; ++k) {
      S[static_cast<std::size_t>(k)](i, 0) = slope(rng);
      S[static_cast<std::size_t>(k)](i, 1) = -S[static_cast<std::size_t>(k)](i, 0);
    }
  }
  MeanFieldChainSpec spec;
  spec.states = {"a", "b"};
  const double q0 = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
  spec.q = {q0, 1.0 - q0};
  spec.A = TransitionFamily::affine(B, S);
  spec.T = T;
  return spec;
}

inline NoisePathMeasure<double> grid_noise(int T, const std::vector<double>& grid, const std::vector<double>& w) {
  std::vector<Path<double>> pts;
  std::vector<double> ws;
  Path<double> cur;
  std::function<void(double)> rec = [&](double weight) {
    if (cur.size() == static_cast<std::size_t>(T) + 1) {
      pts.push_back(cur);
      ws.push_back(weight);
      return;
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      cur.push_back(grid[i]);
      rec(weight * w[i]);
      cur.pop_back();
    }
  };
  rec(1.0);
  return NoisePathMeasure<double>::from_weights(pts, ws);
}

inline ItoSpec random_affine_ito_spec(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> z;
  Eigen::VectorXd a(d), x0(d);
  Eigen::MatrixXd B(d, d), C(d, d), S(d, d);
  for (int i = 0; i < d; ++i) {
    a(i) = z(rng);
    x0(i) = z(rng);
    for (int j = 0; j < d; ++j) {
      B(i, j) = 0.5 * z(rng);
      C(i, j) = 0.5 * z(rng);
      S(i, j) = 0.3 * z(rng);
    }
    S(i, i) += 1.0;
  }
  return ItoSpec::linear(a, B, C, S, x0, 1.0);
}

}  // namespace detail

/// R(eta || psi(gamma0)) against the entropy of the closed-form lift, on
/// random instances with |Y| <= 6 and |X| <= 3. In mutation mode the
/// reference psi(gamma0) is mixed with the uniform law on its support.
inline IdentityRow contraction_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  double dev = 0.0;
  for (std::size_t n = 0; n < opt.contraction_instances; ++n) {
    const auto inst = detail::random_contraction_instance(rng);
    auto psi = [&](int y) { return inst.psi[static_cast<std::size_t>(y)]; };
    auto image = pushforward(inst.gamma0, psi);
    if (opt.mutate_psi) image = mixture(image, DiscreteDistribution<int>::uniform(image.support()), opt.mutation);
    const auto lift = optimal_lift(inst.eta, inst.gamma0, psi);
    dev = std::max(dev, detail::deviation(relative_entropy(inst.eta, image), lift.relative_entropy));
  }
  return detail::finish("contraction closed-form lift", opt.contraction_instances, dev, opt.tol_contraction);
}

/// Same instances against the brute-force infimum over all lifts.
inline IdentityRow contraction_grid_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  double dev = 0.0;
  for (std::size_t n = 0; n < opt.contraction_instances; ++n) {
    const auto inst = detail::random_contraction_instance(rng);
    auto psi = [&](int y) { return inst.psi[static_cast<std::size_t>(y)]; };
    auto image = pushforward(inst.gamma0, psi);
    if (opt.mutate_psi) image = mixture(image, DiscreteDistribution<int>::uniform(image.support()), opt.mutation);
    const auto grid = brute_force_lift_infimum(inst.eta, inst.gamma0, psi, opt.lift_grid_resolution);
    dev = std::max(dev, detail::deviation(relative_entropy(inst.eta, image), grid));
  }
  return detail::finish("contraction grid infimum", opt.contraction_instances, dev, opt.tol_lift_grid);
}

/// Toy model: R(theta||gamma0) - F(theta) against R(theta||Psi_gamma0(theta))
/// on random Gaussians, plus the anchor b = 0, theta = N((1,1), [[1,1],[1,2]])
/// where both forms equal 1/2.
inline IdentityRow toy_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed + 1);
  double dev = 0.0;
  for (std::size_t n = 0; n < opt.toy_instances; ++n) {
    ToyModelSpec spec{detail::random_builtin_drift(rng, n), ToyModelSpec::Variant::standard, {}};
    const auto r = toy_rate_function(detail::random_toy_theta(rng), spec);
    dev = std::max(dev, std::abs(r.re_minus_F - r.entropy_form));
  }
  Eigen::Matrix2d cov;
  cov << 1.0, 1.0, 1.0, 2.0;
  const auto anchor = toy_rate_function(GaussianMeasure(Eigen::Vector2d(1.0, 1.0), cov),
                                        ToyModelSpec{DriftFunction::constant(0.0), ToyModelSpec::Variant::standard, {}});
  dev = std::max({dev, std::abs(anchor.re_minus_F - 0.5), std::abs(anchor.entropy_form - 0.5)});
  return detail::finish("toy rate forms", opt.toy_instances + 1, dev, opt.tol_toy);
}

/// Staged systems: R(eta || Psi_gamma0(eta)) against the lift infimum over
/// noise laws with mu*(gamma) = eta, on two-state chains driven by a
/// four-point noise grid with T in {1, 2}.
inline IdentityRow staged_rate_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed + 2);
  const std::vector<double> grid{0.125, 0.375, 0.625, 0.875};
  double dev = 0.0;
  for (std::size_t n = 0; n < opt.staged_instances; ++n) {
    const int T = 1 + static_cast<int>(n % 2);
    const auto chain = detail::random_interior_chain(rng, T);
    const auto staged = chain_staged_spec(chain);
    const auto gamma0 = detail::grid_noise(T, grid, detail::random_simplex(rng, grid.size()));
    // eta: random law on all paths; a second instance perturbs the fixed point
    std::vector<Path<int>> pts = feasible_paths(chain);
    const auto eta = PathMeasure<int>::from_weights(pts, detail::random_simplex(rng, pts.size()));
    const auto mv = mckean_vlasov_law(gamma0, staged);
    for (const auto& e : {eta, mixture(mv, eta, 0.1)}) {
      const auto re = rate_function_re_form(e, gamma0, staged);
      const auto cf = rate_function_contraction_form(e, gamma0, staged, 8);
      dev = std::max(dev, detail::deviation(re, cf));
    }
  }
  return detail::finish("staged rate forms", 2 * opt.staged_instances, dev, opt.tol_rate_forms);
}

/// Linear Ito specs: the variational bound against the relative-entropy
/// form for targets reached by random deterministic controls, K in {8, 32}.
inline IdentityRow ito_variational_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed + 3);
  std::normal_distribution<double> z;
  double dev = 0.0;
  for (std::size_t n = 0; n < opt.ito_specs; ++n) {
    const int d = 1 + static_cast<int>(n % 2);
    const auto spec = detail::random_affine_ito_spec(rng, d);
    for (int K : {8, 32}) {
      const auto grid = EulerGrid::over(spec.T(), K);
      const Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(d, d) + spec.B() * grid.h;
      std::vector<Eigen::VectorXd> m{spec.x0()};
      for (int k = 0; k < K; ++k) {
        Eigen::VectorXd u(d);
        for (int i = 0; i < d; ++i) u(i) = z(rng);
        m.push_back(Phi * m.back() + (spec.a() + spec.C() * m.back()) * grid.h + spec.S() * u * grid.h);
      }
      Eigen::VectorXd stacked(K * d);
      for (int k = 1; k <= K; ++k) stacked.segment((k - 1) * d, d) = m[static_cast<std::size_t>(k)];
      const GaussianMeasure target(stacked, frozen_law(spec, grid, m).covariance());
      dev = std::max(dev, detail::deviation(variational_upper_bound(target, spec, grid).value,
                                            ito_rate_re_form(target, spec, grid)));
    }
  }
  return detail::finish("ito variational bound", 2 * opt.ito_specs, dev, opt.tol_variational);
}

/// Discretized Wiener relative entropy against the control energy on random
/// piecewise-constant controls, plus the constant control c = 2, T = 1.
inline IdentityRow telescope_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed + 4);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> K_d(1, 40), d_d(1, 3);
  std::uniform_real_distribution<double> T_d(0.25, 2.0);
  double dev = 0.0;
  for (std::size_t n = 0; n < opt.telescope_controls; ++n) {
    const int K = K_d(rng), d = d_d(rng);
    const auto grid = EulerGrid::over(T_d(rng), K);
    ControlPath u;
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = 2.0 * z(rng);
      u.u.push_back(v);
    }
    dev = std::max(dev, std::abs(wiener_re_discretized(u, grid) - u.energy(grid.h)));
  }
  const double c = wiener_re_discretized(ControlPath::constant(10, Eigen::VectorXd::Constant(1, 2.0)),
                                         EulerGrid::over(1.0, 10));
  dev = std::max(dev, std::abs(c - 2.0));
  return detail::finish("wiener telescope", opt.telescope_controls + 1, dev, opt.tol_telescope);
}

/// Every simulated empirical measure equals the McKean-Vlasov image of the
/// empirical noise, count for count. Runs cycle over chains, the toy model
/// and Euler schemes with random N and seeds; the deviation is the number of
/// runs that differ.
inline IdentityRow fixed_point_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed + 5);
  std::uniform_int_distribution<std::size_t> N_d(1, 60);
  std::size_t mismatches = 0;
  for (std::size_t n = 0; n < opt.fixed_point_runs; ++n) {
    const std::size_t N = N_d(rng);
    const std::uint64_t seed = rng();
    bool same = true;
    switch (n % 4) {
      case 0: {
        MeanFieldChainSpec spec;
        spec.states = {"a", "b"};
        spec.q = {0.7, 0.3};
        spec.A = TransitionFamily::adoption(0.2, 0.6);
        spec.T = 3;
        const auto run = chain_simulate(spec, N, seed);
        same = run.empirical == mckean_vlasov_law(run.noise_empirical, chain_staged_spec(spec));
        break;
      }
      case 1: {
        const auto spec = detail::random_interior_chain(rng, 2);
        const auto run = chain_simulate(spec, N, seed);
        same = run.empirical == mckean_vlasov_law(run.noise_empirical, chain_staged_spec(spec));
        break;
      }
      case 2: {
        ToyModelSpec spec{detail::random_builtin_drift(rng, n), ToyModelSpec::Variant::standard, {}};
        const auto sim = toy_simulate(spec, N, seed);
        same = sim.empirical == mckean_vlasov_law(EmpiricalMeasure<Path<double>>(sim.noise), toy_staged_spec(spec));
        break;
      }
      default: {
        const auto spec = n % 8 == 3 ? ItoSpec::sine_coupling(0.5, 1.0, 0.7, 0.2, 1.0)
                                     : detail::random_affine_ito_spec(rng, 1 + static_cast<int>(n % 2));
        const auto grid = EulerGrid::over(spec.T(), 6);
        const auto run = euler_simulate(spec, grid, N, seed);
        same = run.empirical == mckean_vlasov_law(EmpiricalMeasure<Path<State>>(run.noise), ito_staged_spec(spec, grid));
        break;
      }
    }
    if (!same) ++mismatches;
  }
  return detail::finish("empirical fixed point", opt.fixed_point_runs, static_cast<double>(mismatches), 0.0);
}

/// Constant-transition chains against the dedicated Sanov path: a T = 0
/// chain on an alphabet, and a T = 1 chain whose path law plays the role
/// of mu. Compares -(1/N) log P and the rate type by type.
inline IdentityRow sanov_baseline_identity(const IdentityOptions& opt) {
  std::mt19937_64 rng(opt.seed + 6);
  double dev = 0.0;
  std::size_t checked = 0;
  auto compare = [&](const MeanFieldChainSpec& spec, std::size_t N) {
    const auto paths = feasible_paths(spec);
    const auto law = chain_mckean_vlasov_law(spec);
    std::vector<double> mu;
    for (const auto& p : paths) mu.push_back(law.weight_of(p));
    const LogFactorials lf(N);
    for_each_type(paths, N, [&](const PathType& nu) {
      std::vector<std::size_t> c;
      for (const auto& p : paths) c.push_back(nu.count_of(p));
      const auto s = sanov_type(c, mu);
      const double lp = mfld::detail::exact_type_log_probability(nu, spec, lf);
      dev = std::max({dev, std::abs(lp - s.log_probability) / static_cast<double>(N),
                      detail::deviation(chain_rate_function(nu, spec), s.rate)});
      ++checked;
    });
  };
  for (std::size_t M : {2u, 3u, 4u}) {
    MeanFieldChainSpec spec;
    for (std::size_t i = 0; i < M; ++i) spec.states.push_back(std::string(1, static_cast<char>('a' + i)));
    spec.q = detail::random_simplex(rng, M);
    spec.A = TransitionFamily::constant(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M)));
    spec.T = 0;
    compare(spec, 12);
  }
  MeanFieldChainSpec spec;
  spec.states = {"a", "b"};
  spec.q = {0.6, 0.4};
  Eigen::MatrixXd A(2, 2);
  A << 0.7, 0.3, 0.25, 0.75;
  spec.A = TransitionFamily::constant(A);
  spec.T = 1;
  compare(spec, 10);
  return detail::finish("iid baseline vs sanov", checked, dev, opt.tol_sanov_baseline);
}

/// Runs every identity with fixed seeds; failures are rows, not exceptions.
inline IdentityReport identity_suite(const IdentityOptions& opt = {}) {
  IdentityReport report;
  report.rows.push_back(contraction_identity(opt));
  report.rows.push_back(contraction_grid_identity(opt));
  report.rows.push_back(toy_identity(opt));
  report.rows.push_back(staged_rate_identity(opt));
  report.rows.push_back(ito_variational_identity(opt));
  report.rows.push_back(telescope_identity(opt));
  report.rows.push_back(fixed_point_identity(opt));
  report.rows.push_back(sanov_baseline_identity(opt));
  return report;
}

// ---------------------------------------------------------------------------
// LLN trend

inline constexpr std::size_t kLlnBins = 200;

/// d_bL between the empirical law of `samples` and N(mean, sd^2) after both
/// are binned onto `bins` equally spaced points over mean +- 6 sd. Samples
/// go to the nearest point; the reference puts the normal mass of each
/// point's cell there, the outer cells extending to infinity.
inline double binned_bounded_lipschitz(const std::vector<double>& samples, double mean, double sd,
                                       std::size_t bins = kLlnBins) {
  if (samples.empty()) throw DomainError("binned_bounded_lipschitz: no samples");
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean))
    throw DomainError("binned_bounded_lipschitz: reference needs a positive finite sd");
  if (bins < 2) throw DomainError("binned_bounded_lipschitz: at least two bins");
  const double lo = mean - 6.0 * sd, w = 12.0 * sd / static_cast<double>(bins - 1);
  std::vector<double> pts(bins), ref(bins), emp(bins, 0.0);
  for (std::size_t j = 0; j < bins; ++j) pts[j] = lo + w * static_cast<double>(j);
  for (std::size_t j = 0; j < bins; ++j) {
    const double a = j == 0 ? 0.0 : normal_cdf((pts[j] - 0.5 * w - mean) / sd);
    const double b = j + 1 == bins ? 1.0 : normal_cdf((pts[j] + 0.5 * w - mean) / sd);
    ref[j] = b - a;
  }
  for (double x : samples) {
    const double r = std::round((x - lo) / w);
    const auto j = static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(bins - 1)));
    emp[j] += 1.0;
  }
  for (double& e : emp) e /= static_cast<double>(samples.size());
  auto positive = [&](const std::vector<double>& m) {
    std::vector<double> p, q;
    for (std::size_t j = 0; j < bins; ++j)
      if (m[j] > 0.0) p.push_back(pts[j]), q.push_back(m[j]);
    return DiscreteDistribution<double>::from_weights(p, q);
  };
  return bounded_lipschitz_distance(positive(emp), positive(ref));
}

struct LlnOptions {
  enum class System { toy, iid, ito };
  System system = System::toy;
  ToyModelSpec toy{DriftFunction::scaled_tanh(1.0), ToyModelSpec::Variant::standard, {}};
  ItoSpec ito = ItoSpec::mean_reverting(1.0, 0.5, 1.0, 1.0);
  int K = 16;
  std::vector<std::size_t> schedule{100, 1000, 10000};
  std::size_t replications = 20;
  std::uint64_t seed = 0;
};

struct LlnTrend {
  RateReport report;
  Series series;
  double slope = 0.0;  // least-squares slope of log d against log N
};

inline const char* lln_system_name(LlnOptions::System s) {
  switch (s) {
    case LlnOptions::System::toy: return "toy";
    case LlnOptions::System::iid: return "iid";
    case LlnOptions::System::ito: return "ito";
  }
  return "?";
}

/// Seed-averaged binned d_bL between the final-stage empirical marginal and
/// the McKean-Vlasov marginal, per N. Replication r uses the same root seed
/// at every N. Row r has bound = previous mean distance, so a row passes
/// when the sequence decreases strictly there.
inline LlnTrend lln_trend(const LlnOptions& opt) {
  double ref_mean = 0.0, ref_sd = 0.0;
  ToyModelSpec toy = opt.toy;
  EulerGrid grid;
  if (opt.system == LlnOptions::System::ito) {
    if (!opt.ito.is_linear()) throw DomainError("lln_trend needs a linear Ito spec");
    grid = EulerGrid::over(opt.ito.T(), opt.K);
    const auto mv = mckean_vlasov_flow(opt.ito, grid);
    ref_mean = mv.flow.mean.back()(0);
    ref_sd = std::sqrt(mv.flow.cov.back()(0, 0));
  } else {
    if (opt.system == LlnOptions::System::iid) toy = {DriftFunction::constant(0.0), ToyModelSpec::Variant::standard, {}};
    const auto mv = toy_mckean_vlasov(toy);
    ref_mean = mv.mean()(1);
    ref_sd = std::sqrt(mv.covariance()(1, 1));
  }

  LlnTrend out;
  out.report.title = std::string("LLN trend (") + lln_system_name(opt.system) + ")";
  out.series.name = std::string("d_bL ") + lln_system_name(opt.system);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t N : opt.schedule) {
    mfld::detail::CompensatedSum total;
    for (std::size_t r = 0; r < opt.replications; ++r) {
      const std::uint64_t seed = derive_seed(opt.seed, StreamKind::replication, r);
      std::vector<double> final_states(N);
      if (opt.system == LlnOptions::System::ito) {
        const auto run = euler_simulate(opt.ito, grid, N, seed);
        for (std::size_t i = 0; i < N; ++i) final_states[i] = run.paths[i].back()[0];
      } else {
        const auto sim = toy_simulate(toy, N, seed);
        for (std::size_t i = 0; i < N; ++i) final_states[i] = sim.paths[i][1];
      }
      total.add(binned_bounded_lipschitz(final_states, ref_mean, ref_sd));
    }
    const double d = total.value() / static_cast<double>(opt.replications);
    out.report.add({lln_system_name(opt.system), N, d, ExtendedReal::finite(0.0), d, prev, d < prev});
    out.series.x.push_back(static_cast<double>(N));
    out.series.y.push_back(d);
    prev = d;
  }
  if (!out.report.pass) out.report.fail("distance does not decrease strictly across the schedule");
  if (out.series.x.size() >= 2) {
    double mx = 0, my = 0;
    const double n = static_cast<double>(out.series.x.size());
    for (std::size_t i = 0; i < out.series.x.size(); ++i) mx += std::log(out.series.x[i]), my += std::log(out.series.y[i]);
    mx /= n, my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < out.series.x.size(); ++i) {
      const double dx = std::log(out.series.x[i]) - mx;
      sxy += dx * (std::log(out.series.y[i]) - my);
      sxx += dx * dx;
    }
    out.slope = sxy / sxx;
    out.report.notes.push_back("log-log slope " + detail::fmt(out.slope));
  }
  return out;
}

}  // namespace mfld::harness
