#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mfld/detail/simplex.hpp"
#include "mfld/discrete_distribution.hpp"
#include "mfld/errors.hpp"
#include "mfld/extended_real.hpp"
#include "mfld/gaussian.hpp"

namespace mfld {

namespace detail {

template <class P>
void require_same_universe(const DiscreteDistribution<P>& a, const DiscreteDistribution<P>& b, const char* op) {
  if (a.empty() || b.empty()) throw DomainError(std::string(op) + ": empty distribution");
  if (!AtomTraits<P>::compatible(a.atoms()[0].point, b.atoms()[0].point))
    throw DomainError(std::string(op) + ": atoms live in different spaces");
}

inline double xlogx_over(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(x / y); }

}  // namespace detail

/// R(nu || mu) = sum nu(x) log(nu(x)/mu(x)), with 0 log 0 = 0 and +inf as soon
/// as nu charges an atom mu does not.
template <class P>
ExtendedReal relative_entropy(const DiscreteDistribution<P>& nu, const DiscreteDistribution<P>& mu) {
  detail::require_same_universe(nu, mu, "relative_entropy");
  detail::CompensatedSum s;
  for (const auto& a : nu.atoms()) {
    if (a.weight == 0.0) continue;
    const double m = mu.weight_of(a.point);
    if (m == 0.0) return ExtendedReal::infinity();
    s.add(a.weight * std::log(a.weight / m));
  }
  return ExtendedReal::finite(std::max(0.0, s.value()));
}

/// Finite partition of an atom universe into disjoint blocks.
template <class P>
struct Partition {
  std::vector<std::vector<P>> blocks;

  // Every atom of the distribution in its own block.
  static Partition singletons(const DiscreteDistribution<P>& d) {
    Partition p;
    for (const auto& a : d.atoms()) p.blocks.push_back({a.point});
    return p;
  }
};

/// sum over blocks A of nu(A) log(nu(A)/mu(A)); a lower bound for R(nu||mu)
/// that is exact on the singleton partition. The partition must cover the
/// union of both supports with disjoint blocks.
template <class P>
ExtendedReal partition_lower_bound(const DiscreteDistribution<P>& nu, const DiscreteDistribution<P>& mu,
                                   const Partition<P>& partition) {
  detail::require_same_universe(nu, mu, "partition_lower_bound");
  std::vector<char> nu_seen(nu.size(), 0);
  std::vector<char> mu_seen(mu.size(), 0);
  std::vector<std::pair<double, double>> masses;
  masses.reserve(partition.blocks.size());
  for (const auto& block : partition.blocks) {
    if (block.empty()) throw DomainError("partition has an empty block");
    detail::CompensatedSum nu_mass, mu_mass;
    for (const auto& p : block) {
      const Atom<P>* a = nu.find(p);
      const Atom<P>* b = mu.find(p);
      if (!a && !b) throw DomainError("partition point " + AtomTraits<P>::format(p) + " is outside the universe");
      if (a) {
        auto& seen = nu_seen[static_cast<std::size_t>(a - nu.atoms().data())];
        if (seen) throw DomainError("partition blocks overlap at " + AtomTraits<P>::format(p));
        seen = 1;
        nu_mass.add(a->weight);
      }
      if (b) {
        auto& seen = mu_seen[static_cast<std::size_t>(b - mu.atoms().data())];
        if (seen) throw DomainError("partition blocks overlap at " + AtomTraits<P>::format(p));
        seen = 1;
        mu_mass.add(b->weight);
      }
    }
    masses.emplace_back(nu_mass.value(), mu_mass.value());
  }
  if (std::find(nu_seen.begin(), nu_seen.end(), 0) != nu_seen.end() ||
      std::find(mu_seen.begin(), mu_seen.end(), 0) != mu_seen.end())
    throw DomainError("partition does not cover the support");

  detail::CompensatedSum s;
  for (auto [n, m] : masses) {
    if (n == 0.0) continue;
    if (m == 0.0) return ExtendedReal::infinity();
    s.add(n * std::log(n / m));
  }
  return ExtendedReal::finite(std::max(0.0, s.value()));
}

/// Donsker-Varadhan functional  int g dnu - log int e^g dmu, a lower bound
/// for R(nu||mu) over all bounded g.
template <class P, class G>
double donsker_varadhan_value(const DiscreteDistribution<P>& nu, const DiscreteDistribution<P>& mu, G&& g) {
  detail::require_same_universe(nu, mu, "donsker_varadhan_value");
  std::vector<double> gmu;
  gmu.reserve(mu.size());
  double gmax = -std::numeric_limits<double>::infinity();
  for (const auto& a : mu.atoms()) {
    const double v = a.weight > 0.0 ? static_cast<double>(g(a.point)) : 0.0;
    if (!std::isfinite(v)) throw DomainError("test function is not finite on the reference support");
    gmu.push_back(v);
    if (a.weight > 0.0) gmax = std::max(gmax, v);
  }
  detail::CompensatedSum lse;
  for (std::size_t i = 0; i < gmu.size(); ++i)
    if (mu.atoms()[i].weight > 0.0) lse.add(mu.atoms()[i].weight * std::exp(gmu[i] - gmax));
  detail::CompensatedSum mean;
  for (const auto& a : nu.atoms()) {
    if (a.weight == 0.0) continue;
    const double v = static_cast<double>(g(a.point));
    if (!std::isfinite(v)) throw DomainError("test function is not finite on the support of nu");
    mean.add(a.weight * v);
  }
  return mean.value() - (gmax + std::log(lse.value()));
}

/// A total map between finite atom sets, given as a lookup table.
template <class P, class Q>
class FiniteMap {
 public:
  explicit FiniteMap(std::vector<std::pair<P, Q>> table) : table_(std::move(table)) {
    std::stable_sort(table_.begin(), table_.end(),
                     [](const auto& a, const auto& b) { return AtomTraits<P>::less(a.first, b.first); });
    for (std::size_t i = 1; i < table_.size(); ++i)
      if (AtomTraits<P>::same(table_[i - 1].first, table_[i].first))
        throw DomainError("map assigns two images to " + AtomTraits<P>::format(table_[i].first));
  }

  const Q& operator()(const P& p) const {
    auto it = std::lower_bound(table_.begin(), table_.end(), p,
                               [](const auto& a, const P& q) { return AtomTraits<P>::less(a.first, q); });
    if (it != table_.end() && AtomTraits<P>::same(it->first, p)) return it->second;
    if constexpr (AtomTraits<P>::tolerant) {
      for (const auto& e : table_)
        if (AtomTraits<P>::same(e.first, p)) return e.second;
    }
    throw DomainError("map is undefined at " + AtomTraits<P>::format(p));
  }

 private:
  std::vector<std::pair<P, Q>> table_;
};

/// Image measure gamma o psi^-1.
template <class P, class F>
auto pushforward(const DiscreteDistribution<P>& gamma, F&& psi) {
  using Q = std::decay_t<std::invoke_result_t<F&, const P&>>;
  std::vector<Atom<Q>> atoms;
  atoms.reserve(gamma.size());
  for (const auto& a : gamma.atoms()) atoms.push_back({psi(a.point), a.weight});
  return DiscreteDistribution<Q>::aggregated(std::move(atoms));
}

template <class P>
struct LiftResult {
  // Empty when eta is not absolutely continuous w.r.t. psi(gamma0).
  std::optional<DiscreteDistribution<P>> lift;
  ExtendedReal relative_entropy;
};

/// The minimizer of R(gamma||gamma0) over gamma with psi(gamma) = eta:
/// gamma(y) = f(psi(y)) gamma0(y) with f = d eta / d psi(gamma0). Its entropy
/// equals R(eta || psi(gamma0)).
template <class P, class Q, class F>
LiftResult<P> optimal_lift(const DiscreteDistribution<Q>& eta, const DiscreteDistribution<P>& gamma0, F&& psi) {
  const auto image = pushforward(gamma0, psi);
  for (const auto& a : eta.atoms())
    if (a.weight > 0.0 && image.weight_of(a.point) == 0.0) return {std::nullopt, ExtendedReal::infinity()};
  std::vector<Atom<P>> atoms;
  atoms.reserve(gamma0.size());
  for (const auto& a : gamma0.atoms()) {
    if (a.weight == 0.0) {
      atoms.push_back({a.point, 0.0});
      continue;
    }
    const auto x = psi(a.point);
    atoms.push_back({a.point, eta.weight_of(x) / image.weight_of(x) * a.weight});
  }
  DiscreteDistribution<P> lift(std::move(atoms));
  const ExtendedReal re = relative_entropy(lift, gamma0);
  return {std::move(lift), re};
}

inline constexpr std::size_t kMaxLiftSource = 64;

namespace detail {

// Entropy of one fiber: sum e c_i log(e c_i / p_i).
inline double fiber_entropy(double mass, const std::vector<double>& c, const std::vector<double>& prior) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += xlogx_over(mass * c[i], prior[i]);
  return s;
}

// Visits every composition of `total` into `parts` nonnegative integers.
template <class Visit>
void for_each_composition(int total, std::size_t parts, std::vector<int>& buf, std::size_t pos, Visit& visit) {
  if (pos + 1 == parts) {
    buf[pos] = total;
    visit(buf);
    return;
  }
  for (int v = 0; v <= total; ++v) {
    buf[pos] = v;
    for_each_composition(total - v, parts, buf, pos + 1, visit);
  }
}

// Exhaustive simplex grid at the given resolution, followed by pairwise mass
// transfers with a shrinking step around the incumbent. The objective is
// convex and separable, so the local stage converges to the fiber minimum.
inline double minimize_fiber_on_grid(double mass, const std::vector<double>& prior, int resolution) {
  const std::size_t k = prior.size();
  if (k == 1) return fiber_entropy(mass, {1.0}, prior);

  // Level 0: full simplex grid; resolution is lowered so the grid stays below ~1e6 points.
  int res = std::max(1, resolution);
  auto grid_points = [&](int r) {
    double c = 1.0;
    for (std::size_t i = 1; i < k; ++i) c = c * (r + static_cast<double>(i)) / static_cast<double>(i);
    return c;
  };
  while (res > 2 && grid_points(res) > 1e6) --res;

  std::vector<double> best(k, 0.0), trial(k, 0.0);
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<int> buf(k);
  auto visit = [&](const std::vector<int>& comp) {
    for (std::size_t i = 0; i < k; ++i) trial[i] = static_cast<double>(comp[i]) / res;
    const double v = fiber_entropy(mass, trial, prior);
    if (v < best_value) {
      best_value = v;
      best = trial;
    }
  };
  for_each_composition(res, k, buf, 0, visit);

  // Local refinement: move `step` of conditional mass between pairs of atoms
  // while that lowers the objective, then halve the step. The fiber sum is
  // preserved exactly by every move.
  double step = 1.0 / res;
  while (step > 1e-13) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          if (i == j || best[i] <= 0.0) continue;
          const double delta = std::min(step, best[i]);
          trial = best;
          trial[i] -= delta;
          trial[j] += delta;
          const double v = fiber_entropy(mass, trial, prior);
          if (v < best_value - 1e-16 * std::abs(best_value)) {
            best_value = v;
            best = trial;
            moved = true;
          }
        }
    }
    step *= 0.5;
  }
  return best_value;
}

}  // namespace detail

/// Grid-search oracle for inf { R(gamma||gamma0) : psi(gamma) = eta }.
///
/// gamma is parametrized fiber by fiber: on the preimage of each target atom
/// x it is eta(x) times a point of the conditional simplex, so the image
/// constraint holds by construction. The objective separates over fibers and
/// each fiber is minimized by an exhaustive simplex grid of the given
/// resolution followed by local refinement. Infeasible targets give +inf.
/// The source support is capped at 64 atoms.
template <class P, class Q, class F>
ExtendedReal brute_force_lift_infimum(const DiscreteDistribution<Q>& eta, const DiscreteDistribution<P>& gamma0,
                                      F&& psi, int grid_resolution) {
  if (gamma0.size() > kMaxLiftSource)
    throw CapacityError("brute-force lift: source support " + std::to_string(gamma0.size()) + " exceeds " +
                        std::to_string(kMaxLiftSource));
  if (grid_resolution < 1) throw DomainError("grid resolution must be positive");

  // Fibers of psi restricted to the support of gamma0, keyed by image atom.
  std::vector<std::pair<Q, std::vector<double>>> fibers;
  for (const auto& a : gamma0.atoms()) {
    if (a.weight == 0.0) continue;
    Q x = psi(a.point);
    auto it = std::find_if(fibers.begin(), fibers.end(),
                           [&](const auto& f) { return AtomTraits<Q>::same(f.first, x); });
    if (it == fibers.end())
      fibers.emplace_back(std::move(x), std::vector<double>{a.weight});
    else
      it->second.push_back(a.weight);
  }

  double total = 0.0;
  for (const auto& a : eta.atoms()) {
    if (a.weight == 0.0) continue;
    auto it = std::find_if(fibers.begin(), fibers.end(),
                           [&](const auto& f) { return AtomTraits<Q>::same(f.first, a.point); });
    if (it == fibers.end()) return ExtendedReal::infinity();
    total += detail::minimize_fiber_on_grid(a.weight, it->second, grid_resolution);
  }
  return ExtendedReal::finite(std::max(0.0, total));
}

inline constexpr std::size_t kMaxBoundedLipschitzSupport = 200;

namespace detail {

inline double euclidean(double a, double b) { return std::abs(a - b); }
inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
inline std::size_t point_dimension(double) { return 1; }
inline std::size_t point_dimension(const std::vector<double>& a) { return a.size(); }
inline double first_coordinate(double a) { return a; }
inline double first_coordinate(const std::vector<double>& a) { return a.front(); }

}  // namespace detail

/// Bounded-Lipschitz distance sup { int f d(nu - mu) : sup|f| + Lip(f) <= 1 }
/// on real points, as a linear program over the values of f on the combined
/// support with auxiliary bounds M (sup norm) and L (Lipschitz constant),
/// M + L <= 1. In one dimension only neighbouring points need a Lipschitz
/// constraint; otherwise all ordered pairs are constrained.
template <class P>
double bounded_lipschitz_distance(const DiscreteDistribution<P>& nu, const DiscreteDistribution<P>& mu) {
  static_assert(std::is_same_v<P, double> || std::is_same_v<P, std::vector<double>>,
                "bounded-Lipschitz distance needs real points");
  detail::require_same_universe(nu, mu, "bounded_lipschitz_distance");
  const std::size_t dim = detail::point_dimension(nu.atoms()[0].point);
  if (dim == 0) throw DomainError("bounded_lipschitz_distance: zero-dimensional points");

  std::vector<P> points;
  std::vector<double> signed_mass;
  for (const auto& a : nu.atoms()) {
    points.push_back(a.point);
    signed_mass.push_back(a.weight - mu.weight_of(a.point));
  }
  for (const auto& b : mu.atoms())
    if (!nu.find(b.point)) {
      points.push_back(b.point);
      signed_mass.push_back(-b.weight);
    }
  const std::size_t n = points.size();
  if (n > kMaxBoundedLipschitzSupport)
    throw CapacityError("bounded_lipschitz_distance: combined support " + std::to_string(n) + " exceeds " +
                        std::to_string(kMaxBoundedLipschitzSupport));
  if (std::all_of(signed_mass.begin(), signed_mass.end(), [](double c) { return c == 0.0; })) return 0.0;

  // Pairs that carry a Lipschitz constraint (both orientations are added).
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (dim == 1) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return detail::first_coordinate(points[a]) < detail::first_coordinate(points[b]);
    });
    for (std::size_t i = 0; i + 1 < n; ++i) pairs.emplace_back(order[i], order[i + 1]);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }

  // Variables: g_i = f_i + M >= 0 (i < n), M, L.  Since sum c_i = 0 the
  // objective sum c_i f_i equals sum c_i g_i.
  const std::size_t var_m = n, var_l = n + 1;
  const std::size_t rows = n + 2 * pairs.size() + 1;
  detail::DenseSimplex lp(rows, n + 2);
  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i, ++r) {  // g_i - 2M <= 0
    lp.set_coefficient(r, i, 1.0);
    lp.set_coefficient(r, var_m, -2.0);
    lp.set_bound(r, 0.0);
  }
  for (auto [i, j] : pairs) {
    const double dist = detail::euclidean(points[i], points[j]);
    for (int orient = 0; orient < 2; ++orient, ++r) {  // g_a - g_b - L d(a,b) <= 0
      const std::size_t a = orient ? j : i, b = orient ? i : j;
      lp.set_coefficient(r, a, 1.0);
      lp.set_coefficient(r, b, -1.0);
      lp.set_coefficient(r, var_l, -dist);
      lp.set_bound(r, 0.0);
    }
  }
  lp.set_coefficient(r, var_m, 1.0);  // M + L <= 1
  lp.set_coefficient(r, var_l, 1.0);
  lp.set_bound(r, 1.0);
  for (std::size_t i = 0; i < n; ++i) lp.set_objective(i, signed_mass[i]);
  return std::max(0.0, lp.solve());
}

}  // namespace mfld
