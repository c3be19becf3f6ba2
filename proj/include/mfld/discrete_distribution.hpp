#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfld/atom_traits.hpp"
#include "mfld/errors.hpp"

namespace mfld {

inline constexpr double kWeightSumTolerance = 1e-12;

template <class P>
struct Atom {
  P point;
  double weight = 0.0;
};

namespace detail {

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Sorts atoms canonically and merges neighbours that are the same atom
// (exactly, or within tolerance for real coordinates), summing their weights
// in storage order. The first atom of a merged run is kept as representative.
template <class P>
std::vector<Atom<P>> aggregate(std::vector<Atom<P>> atoms) {
  std::stable_sort(atoms.begin(), atoms.end(), [](const Atom<P>& a, const Atom<P>& b) {
    return AtomTraits<P>::less(a.point, b.point);
  });
  std::vector<Atom<P>> out;
  out.reserve(atoms.size());
  for (auto& a : atoms) {
    if (!out.empty() && AtomTraits<P>::same(out.back().point, a.point))
      out.back().weight += a.weight;
    else
      out.push_back(std::move(a));
  }
  return out;
}

}  // namespace detail

/// A probability measure with finite support.
///
/// Atoms are kept in canonical (exact lexicographic) order. Construction
/// refuses negative weights, duplicate atoms and weight sums off by more than
/// 1e-12; there is no silent renormalization.
template <class P>
class DiscreteDistribution {
 public:
  using point_type = P;
  using Traits = AtomTraits<P>;

  // Empty placeholder; not a probability measure.
  DiscreteDistribution() = default;

  explicit DiscreteDistribution(std::vector<Atom<P>> atoms) : atoms_(std::move(atoms)) {
    std::stable_sort(atoms_.begin(), atoms_.end(), [](const Atom<P>& a, const Atom<P>& b) {
      return Traits::less(a.point, b.point);
    });
    validate();
  }

  static DiscreteDistribution dirac(P point) {
    std::vector<Atom<P>> a;
    a.push_back({std::move(point), 1.0});
    return DiscreteDistribution(std::move(a));
  }

  static DiscreteDistribution uniform(std::vector<P> points) {
    if (points.empty()) throw DomainError("uniform distribution needs at least one atom");
    const double w = 1.0 / static_cast<double>(points.size());
    std::vector<Atom<P>> a;
    a.reserve(points.size());
    for (auto& p : points) a.push_back({std::move(p), w});
    return DiscreteDistribution(std::move(a));
  }

  static DiscreteDistribution from_weights(std::vector<P> points, const std::vector<double>& weights) {
    if (points.size() != weights.size()) throw DomainError("points and weights differ in length");
    std::vector<Atom<P>> a;
    a.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) a.push_back({std::move(points[i]), weights[i]});
    return DiscreteDistribution(std::move(a));
  }

  // Merges duplicate points before validating; for measures built as images.
  static DiscreteDistribution aggregated(std::vector<Atom<P>> atoms) {
    DiscreteDistribution d;
    d.atoms_ = detail::aggregate(std::move(atoms));
    d.validate();
    return d;
  }

  std::span<const Atom<P>> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  const Atom<P>* find(const P& p) const {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), p,
                               [](const Atom<P>& a, const P& q) { return Traits::less(a.point, q); });
    if (it != atoms_.end() && Traits::same(it->point, p)) return &*it;
    if constexpr (Traits::tolerant) {
      if (it != atoms_.begin() && Traits::same(std::prev(it)->point, p)) return &*std::prev(it);
      for (const auto& a : atoms_)
        if (Traits::same(a.point, p)) return &a;
    }
    return nullptr;
  }

  double weight_of(const P& p) const {
    const Atom<P>* a = find(p);
    return a ? a->weight : 0.0;
  }

  std::vector<P> support() const {
    std::vector<P> out;
    for (const auto& a : atoms_)
      if (a.weight > 0.0) out.push_back(a.point);
    return out;
  }

 private:
  void validate() const {
    if (atoms_.empty()) throw DomainError("distribution has no atoms");
    detail::CompensatedSum total;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const double w = atoms_[i].weight;
      if (!(w >= 0.0) || !std::isfinite(w))
        throw DomainError("atom " + Traits::format(atoms_[i].point) + " has invalid weight");
      if (i > 0 && Traits::same(atoms_[i - 1].point, atoms_[i].point))
        throw DomainError("duplicate atom " + Traits::format(atoms_[i].point));
      if (!Traits::compatible(atoms_[0].point, atoms_[i].point))
        throw DomainError("atoms " + Traits::format(atoms_[0].point) + " and " +
                          Traits::format(atoms_[i].point) + " live in different spaces");
      total.add(w);
    }
    if (std::abs(total.value() - 1.0) > kWeightSumTolerance)
      throw DomainError("weights sum to " + std::to_string(total.value()) + ", not 1");
  }

  std::vector<Atom<P>> atoms_;
};

/// Empirical measure (1/N) sum of Dirac masses, stored as exact integer
/// counts. Two empirical measures compare equal only if every atom carries the
/// same count out of the same N.
template <class P>
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;

  explicit EmpiricalMeasure(std::vector<P> samples) : total_(samples.size()) {
    if (samples.empty()) throw DomainError("empirical measure of zero samples");
    std::stable_sort(samples.begin(), samples.end(), AtomLess<P>{});
    for (auto& s : samples) {
      if (!counts_.empty() && !AtomTraits<P>::less(counts_.back().first, s))
        ++counts_.back().second;
      else
        counts_.emplace_back(std::move(s), 1);
    }
  }

  // counts must be keyed by distinct points; zero counts are dropped.
  static EmpiricalMeasure from_counts(std::vector<std::pair<P, std::uint64_t>> counts) {
    EmpiricalMeasure m;
    std::stable_sort(counts.begin(), counts.end(),
                     [](const auto& a, const auto& b) { return AtomTraits<P>::less(a.first, b.first); });
    for (auto& [p, c] : counts) {
      if (c == 0) continue;
      if (!m.counts_.empty() && !AtomTraits<P>::less(m.counts_.back().first, p))
        m.counts_.back().second += c;
      else
        m.counts_.emplace_back(std::move(p), c);
      m.total_ += c;
    }
    if (m.total_ == 0) throw DomainError("empirical measure of zero samples");
    return m;
  }

  std::uint64_t total() const { return total_; }
  std::span<const std::pair<P, std::uint64_t>> counts() const { return counts_; }

  std::uint64_t count_of(const P& p) const {
    auto it = std::lower_bound(counts_.begin(), counts_.end(), p,
                               [](const auto& a, const P& q) { return AtomTraits<P>::less(a.first, q); });
    if (it != counts_.end() && !AtomTraits<P>::less(p, it->first)) return it->second;
    return 0;
  }

  DiscreteDistribution<P> to_distribution() const {
    std::vector<Atom<P>> atoms;
    atoms.reserve(counts_.size());
    const double n = static_cast<double>(total_);
    for (const auto& [p, c] : counts_) atoms.push_back({p, static_cast<double>(c) / n});
    return DiscreteDistribution<P>(std::move(atoms));
  }

  friend bool operator==(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.total_ != b.total_ || a.counts_.size() != b.counts_.size()) return false;
    for (std::size_t i = 0; i < a.counts_.size(); ++i) {
      if (a.counts_[i].second != b.counts_[i].second) return false;
      const auto& p = a.counts_[i].first;
      const auto& q = b.counts_[i].first;
      if (AtomTraits<P>::less(p, q) || AtomTraits<P>::less(q, p)) return false;
    }
    return true;
  }

 private:
  std::vector<std::pair<P, std::uint64_t>> counts_;
  std::uint64_t total_ = 0;
};

/// t-th coordinate marginal of a measure on tuples.
template <class X>
DiscreteDistribution<X> marginal(const DiscreteDistribution<std::vector<X>>& mu, std::size_t t) {
  std::vector<Atom<X>> atoms;
  atoms.reserve(mu.size());
  for (const auto& a : mu.atoms()) {
    if (t >= a.point.size()) throw DomainError("marginal index out of range");
    atoms.push_back({a.point[t], a.weight});
  }
  return DiscreteDistribution<X>::aggregated(std::move(atoms));
}

template <class X>
EmpiricalMeasure<X> marginal(const EmpiricalMeasure<std::vector<X>>& mu, std::size_t t) {
  std::vector<std::pair<X, std::uint64_t>> counts;
  counts.reserve(mu.counts().size());
  for (const auto& [p, c] : mu.counts()) {
    if (t >= p.size()) throw DomainError("marginal index out of range");
    counts.emplace_back(p[t], c);
  }
  return EmpiricalMeasure<X>::from_counts(std::move(counts));
}

/// (1 - lambda) * a + lambda * b.
template <class P>
DiscreteDistribution<P> mixture(const DiscreteDistribution<P>& a, const DiscreteDistribution<P>& b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("mixture weight outside [0,1]");
  std::vector<Atom<P>> atoms;
  atoms.reserve(a.size() + b.size());
  for (const auto& x : a.atoms()) atoms.push_back({x.point, (1.0 - lambda) * x.weight});
  for (const auto& x : b.atoms()) atoms.push_back({x.point, lambda * x.weight});
  return DiscreteDistribution<P>::aggregated(std::move(atoms));
}

/// Total variation distance sup_A |a(A) - b(A)| = half the l1 gap.
template <class P>
double total_variation(const DiscreteDistribution<P>& a, const DiscreteDistribution<P>& b) {
  detail::CompensatedSum s;
  for (const auto& x : a.atoms()) s.add(std::abs(x.weight - b.weight_of(x.point)));
  for (const auto& y : b.atoms())
    if (!a.find(y.point)) s.add(y.weight);
  return 0.5 * s.value();
}

/// Atomwise comparison: identical positive-weight supports and weights within tol.
template <class P>
bool approx_equal(const DiscreteDistribution<P>& a, const DiscreteDistribution<P>& b, double tol) {
  for (const auto& x : a.atoms())
    if (std::abs(x.weight - b.weight_of(x.point)) > tol) return false;
  for (const auto& y : b.atoms())
    if (std::abs(y.weight - a.weight_of(y.point)) > tol) return false;
  return true;
}

}  // namespace mfld
