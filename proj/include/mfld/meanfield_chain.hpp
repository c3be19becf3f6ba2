#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfld/discrete_distribution.hpp"
#include "mfld/measures.hpp"
#include "mfld/noise_systems.hpp"

namespace mfld {

inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr std::size_t kMaxTypeParticles = 200;
inline constexpr std::size_t kMaxChainPaths = 64;

/// Transition family (t, p) -> A(t, p) on M states, p a probability vector.
///
/// Builtins are affine in p; for them an entry that vanishes at every vertex
/// of the simplex vanishes everywhere, which lets type enumeration skip paths
/// that can never occur.
class TransitionFamily {
 public:
  using Eval = std::function<Eigen::MatrixXd(int, const std::vector<double>&)>;

  TransitionFamily() = default;

  /// A custom family; no entry is treated as structurally zero.
  TransitionFamily(std::size_t M, Eval eval, std::string name = "custom")
      : M_(M), eval_(std::move(eval)), name_(std::move(name)), possible_(M, std::vector<bool>(M, true)) {}

  static TransitionFamily constant(const Eigen::MatrixXd& A) {
    std::vector<Eigen::MatrixXd> slopes(static_cast<std::size_t>(A.rows()), Eigen::MatrixXd::Zero(A.rows(), A.cols()));
    auto f = affine(A, slopes);
    f.name_ = "constant";
    return f;
  }

  /// a_ij(p) = base_ij + sum_k slopes[k]_ij p_k.
  static TransitionFamily affine(const Eigen::MatrixXd& base, const std::vector<Eigen::MatrixXd>& slopes) {
    const auto M = static_cast<std::size_t>(base.rows());
    if (M == 0 || base.cols() != base.rows()) throw DomainError("transition base must be a nonempty square matrix");
    if (slopes.size() != M) throw DomainError("affine family needs one slope matrix per state");
    for (const auto& s : slopes)
      if (s.rows() != base.rows() || s.cols() != base.cols()) throw DomainError("slope matrix has wrong shape");
    TransitionFamily f;
    f.M_ = M;
    f.name_ = "affine";
    f.possible_.assign(M, std::vector<bool>(M, false));
    for (std::size_t k = 0; k < M; ++k) {
      const Eigen::MatrixXd vertex = base + slopes[k];
      check_stochastic(vertex, "affine family at a simplex vertex");
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j)
          if (vertex(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) f.possible_[i][j] = true;
    }
    f.eval_ = [base, slopes](int, const std::vector<double>& p) {
      Eigen::MatrixXd A = base;
      for (std::size_t k = 0; k < slopes.size(); ++k) A += slopes[k] * p[k];
      return A;
    };
    return f;
  }

  /// Two-state adoption dynamics: state 1 is absorbing and state 0 switches
  /// with probability alpha + beta * p_1.
  static TransitionFamily adoption(double alpha, double beta) {
    if (!(alpha >= 0.0 && alpha <= 1.0 && alpha + beta >= 0.0 && alpha + beta <= 1.0))
      throw DomainError("adoption needs 0 <= alpha <= 1 and 0 <= alpha + beta <= 1");
    Eigen::MatrixXd base(2, 2);
    base << 1.0 - alpha, alpha, 0.0, 1.0;
    Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd s1(2, 2);
    s1 << -beta, beta, 0.0, 0.0;
    auto f = affine(base, {s0, s1});
    f.name_ = "adoption";
    return f;
  }

  std::size_t states() const { return M_; }
  const std::string& name() const { return name_; }
  bool entry_possible(std::size_t i, std::size_t j) const { return possible_[i][j]; }

  /// A(t, p); every evaluation is checked for row-stochasticity.
  Eigen::MatrixXd operator()(int t, const std::vector<double>& p) const {
    if (!eval_) throw DomainError("transition family is not set");
    if (p.size() != M_) throw DomainError("state distribution has wrong length");
    Eigen::MatrixXd A = eval_(t, p);
    if (static_cast<std::size_t>(A.rows()) != M_ || static_cast<std::size_t>(A.cols()) != M_)
      throw DomainError("transition matrix has wrong shape");
    check_stochastic(A, "transition matrix");
    return A;
  }

  static void check_stochastic(const Eigen::MatrixXd& A, const char* what) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < A.cols(); ++j) {
        if (!(A(i, j) >= 0.0) || !std::isfinite(A(i, j)))
          throw DomainError(std::string(what) + ": negative or non-finite entry in row " + std::to_string(i));
        s += A(i, j);
      }
      if (std::abs(s - 1.0) > kStochasticTolerance)
        throw DomainError(std::string(what) + ": row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }

 private:
  std::size_t M_ = 0;
  Eval eval_;
  std::string name_;
  std::vector<std::vector<bool>> possible_;
};

/// Finite-state mean-field chain on states 0..M-1. A(t, p) drives the move
/// from stage t to stage t+1, p being the stage-t state distribution.
struct MeanFieldChainSpec {
  std::vector<std::string> states;
  std::vector<double> q;
  TransitionFamily A;
  int T = 1;

  std::size_t M() const { return states.size(); }

  void validate() const {
    if (states.empty()) throw DomainError("chain needs at least one state");
    if (q.size() != M()) throw DomainError("initial law has wrong length");
    if (A.states() != M()) throw DomainError("transition family has wrong number of states");
    if (T < 0) throw DomainError("chain horizon must be nonnegative");
    double s = 0.0;
    for (double w : q) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("initial law has a negative entry");
      s += w;
    }
    if (std::abs(s - 1.0) > kWeightSumTolerance) throw DomainError("initial law does not sum to 1");
  }

  std::string path_name(const Path<int>& path) const {
    std::string out;
    for (std::size_t t = 0; t < path.size(); ++t) {
      if (t) out += '.';
      out += states[static_cast<std::size_t>(path[t])];
    }
    return out;
  }
};

using PathType = EmpiricalMeasure<Path<int>>;

namespace detail {

// Inverse CDF with intervals (cum_{j-1}, cum_j]; y = 0 goes to the first
// positive entry and y beyond the rounded total to the last positive entry.
inline int inverse_cdf(const double* row, std::size_t M, double y, std::ptrdiff_t stride = 1) {
  double cum = 0.0;
  int last = -1;
  for (std::size_t j = 0; j < M; ++j) {
    const double w = row[static_cast<std::ptrdiff_t>(j) * stride];
    cum += w;
    if (w > 0.0) {
      last = static_cast<int>(j);
      if (y <= cum) return last;
    }
  }
  if (last < 0) throw DomainError("inverse CDF of an all-zero row");
  return last;
}

inline std::vector<double> probability_vector(const DiscreteDistribution<int>& p, std::size_t M) {
  std::vector<double> v(M, 0.0);
  for (const auto& a : p.atoms()) {
    if (a.point < 0 || static_cast<std::size_t>(a.point) >= M) throw DomainError("state index out of range");
    v[static_cast<std::size_t>(a.point)] = a.weight;
  }
  return v;
}

inline void require_uniform(double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("chain noise must lie in [0,1]");
}

}  // namespace detail

/// phi0: initial state from a uniform draw by the inverse CDF of q.
inline int chain_initial_state(double y, const MeanFieldChainSpec& spec) {
  detail::require_uniform(y);
  return detail::inverse_cdf(spec.q.data(), spec.M(), y);
}

/// phi(t, x, p, y) for t in 1..T: the next state drawn from row x of
/// A(t-1, p) by the inverse CDF.
inline int chain_step(int t, int x, const std::vector<double>& p, double y, const MeanFieldChainSpec& spec) {
  detail::require_uniform(y);
  if (x < 0 || static_cast<std::size_t>(x) >= spec.M()) throw DomainError("state index out of range");
  const Eigen::MatrixXd A = spec.A(t - 1, p);
  // Eigen is column-major: walk row x with stride equal to the row count.
  return detail::inverse_cdf(A.data() + x, spec.M(), y, A.rows());
}

inline StagedSystemSpec<int, double> chain_staged_spec(const MeanFieldChainSpec& spec) {
  spec.validate();
  if (spec.T < 1) throw DomainError("a staged system needs at least one transition");
  StagedSystemSpec<int, double> s;
  s.T = spec.T;
  s.phi0 = [spec](const double& y) { return chain_initial_state(y, spec); };
  s.phi = [spec](int t, const int& x, const DiscreteDistribution<int>& p, const double& y) {
    return chain_step(t, x, detail::probability_vector(p, spec.M()), y, spec);
  };
  return s;
}

inline Path<double> uniform_noise_path(Engine& eng, int T) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Path<double> y(static_cast<std::size_t>(T) + 1);
  for (auto& v : y) v = u(eng);
  return y;
}

/// N interacting chains driven by uniform noise; each stage's empirical state
/// distribution enters A. Same draws and arithmetic as the staged route.
inline ParticleRun<int, double> chain_simulate(const MeanFieldChainSpec& spec, std::size_t N, std::uint64_t seed) {
  const int T = spec.T;
  return simulate_particles([T](Engine& e) { return uniform_noise_path(e, T); }, chain_staged_spec(spec), N, seed);
}

/// All paths of length T+1 that can carry mass: start in supp(q) and use
/// only entries the family does not rule out. Sorted lexicographically.
inline std::vector<Path<int>> feasible_paths(const MeanFieldChainSpec& spec) {
  spec.validate();
  std::vector<Path<int>> out;
  Path<int> cur;
  std::function<void()> rec = [&]() {
    if (cur.size() == static_cast<std::size_t>(spec.T) + 1) {
      out.push_back(cur);
      return;
    }
    for (std::size_t j = 0; j < spec.M(); ++j) {
      if (cur.empty() ? spec.q[j] <= 0.0 : !spec.A.entry_possible(static_cast<std::size_t>(cur.back()), j)) continue;
      cur.push_back(static_cast<int>(j));
      rec();
      cur.pop_back();
    }
  };
  rec();
  return out;
}

namespace detail {

inline const Path<int>& entry_point(const Atom<Path<int>>& a) { return a.point; }
inline const Path<int>& entry_point(const std::pair<Path<int>, std::uint64_t>& c) { return c.first; }

// Per-stage state distributions of a path measure, as probability vectors.
template <class Measure, class Weight>
std::vector<std::vector<double>> stage_vectors(const Measure& eta, std::size_t M, int T, Weight weight) {
  std::vector<std::vector<double>> p(static_cast<std::size_t>(T) + 1, std::vector<double>(M, 0.0));
  for (const auto& entry : eta) {
    const auto& path = entry_point(entry);
    if (path.size() != static_cast<std::size_t>(T) + 1) throw DomainError("path has wrong length");
    for (std::size_t t = 0; t < path.size(); ++t) {
      if (path[t] < 0 || static_cast<std::size_t>(path[t]) >= M) throw DomainError("state index out of range");
      p[t][static_cast<std::size_t>(path[t])] += weight(entry);
    }
  }
  return p;
}

// log of q(path_0) prod_t a(t, p_t)[path_t, path_{t+1}] given the transition
// matrices A_t = A(t, p_t).
inline double log_path_probability(const Path<int>& path, const std::vector<double>& q,
                                   const std::vector<Eigen::MatrixXd>& A) {
  double lp = std::log(q[static_cast<std::size_t>(path[0])]);
  for (std::size_t t = 0; t + 1 < path.size(); ++t) lp += std::log(A[t](path[t], path[t + 1]));
  return lp;
}

// The Markov path law with initial law q and stage matrices A, restricted to
// positive-probability paths.
inline PathMeasure<int> markov_path_law(const std::vector<double>& q, const std::vector<Eigen::MatrixXd>& A) {
  const std::size_t M = q.size();
  std::vector<Atom<Path<int>>> atoms;
  Path<int> cur;
  std::function<void(double)> rec = [&](double w) {
    if (cur.size() == A.size() + 1) {
      atoms.push_back({cur, w});
      return;
    }
    for (std::size_t j = 0; j < M; ++j) {
      const double step = cur.empty() ? q[j] : A[cur.size() - 1](cur.back(), static_cast<Eigen::Index>(j));
      if (step <= 0.0) continue;
      cur.push_back(static_cast<int>(j));
      rec(w * step);
      cur.pop_back();
    }
  };
  rec(1.0);
  return PathMeasure<int>(std::move(atoms));
}

}  // namespace detail

/// The time-inhomogeneous chain with the measure argument frozen at the
/// marginals of eta: path phi has probability
/// q(phi_0) prod_t a_{phi_t phi_{t+1}}(t, eta(t)). Zero-probability paths
/// are omitted.
inline PathMeasure<int> frozen_chain_law(const PathMeasure<int>& eta, const MeanFieldChainSpec& spec) {
  spec.validate();
  const auto p = detail::stage_vectors(eta.atoms(), spec.M(), spec.T, [](const Atom<Path<int>>& a) { return a.weight; });
  std::vector<Eigen::MatrixXd> A;
  for (int t = 0; t < spec.T; ++t) A.push_back(spec.A(t, p[static_cast<std::size_t>(t)]));
  return detail::markov_path_law(spec.q, A);
}

/// The McKean-Vlasov path law of the chain by the forward recursion
/// p_{t+1} = p_t A(t, p_t).
inline PathMeasure<int> chain_mckean_vlasov_law(const MeanFieldChainSpec& spec) {
  spec.validate();
  std::vector<double> p = spec.q;
  std::vector<Eigen::MatrixXd> A;
  for (int t = 0; t < spec.T; ++t) {
    A.push_back(spec.A(t, p));
    Eigen::RowVectorXd row = Eigen::Map<const Eigen::RowVectorXd>(p.data(), static_cast<Eigen::Index>(p.size())) * A.back();
    p.assign(row.data(), row.data() + row.size());
  }
  return detail::markov_path_law(spec.q, A);
}

/// Exact log-factorial table log(0!) .. log(n!).
class LogFactorials {
 public:
  explicit LogFactorials(std::size_t n) : table_(n + 1, 0.0) {
    for (std::size_t k = 2; k <= n; ++k) table_[k] = table_[k - 1] + std::log(static_cast<double>(k));
  }
  double operator()(std::size_t k) const {
    if (k >= table_.size()) throw CapacityError("log-factorial table too small");
    return table_[k];
  }

 private:
  std::vector<double> table_;
};

inline double log_multinomial(const PathType& nu, const LogFactorials& lf) {
  double v = lf(nu.total());
  for (const auto& [p, c] : nu.counts()) v -= lf(c);
  return v;
}

namespace detail {

inline void require_type_capacity(const MeanFieldChainSpec& spec, std::size_t N) {
  if (N > kMaxTypeParticles)
    throw CapacityError("type probabilities are limited to N <= " + std::to_string(kMaxTypeParticles));
  double paths = 1.0;
  for (int t = 0; t <= spec.T; ++t) paths *= static_cast<double>(spec.M());
  if (paths > static_cast<double>(kMaxChainPaths))
    throw CapacityError("type probabilities are limited to M^(T+1) <= " + std::to_string(kMaxChainPaths));
}

// Transition matrices at the type's own stage marginals.
inline std::vector<Eigen::MatrixXd> type_matrices(const PathType& nu, const MeanFieldChainSpec& spec) {
  const double n = static_cast<double>(nu.total());
  const auto p = stage_vectors(nu.counts(), spec.M(), spec.T,
                               [n](const std::pair<Path<int>, std::uint64_t>& c) { return static_cast<double>(c.second) / n; });
  std::vector<Eigen::MatrixXd> A;
  for (int t = 0; t < spec.T; ++t) A.push_back(spec.A(t, p[static_cast<std::size_t>(t)]));
  return A;
}

inline double exact_type_log_probability(const PathType& nu, const MeanFieldChainSpec& spec, const LogFactorials& lf) {
  const auto A = type_matrices(nu, spec);
  double lp = log_multinomial(nu, lf);
  for (const auto& [path, c] : nu.counts()) {
    const double l = log_path_probability(path, spec.q, A);
    if (l == -std::numeric_limits<double>::infinity()) return l;
    lp += static_cast<double>(c) * l;
  }
  return lp;
}

}  // namespace detail

/// log P(mu^N = nu): by exchangeability every configuration of type nu has
/// probability prod_paths (q(phi_0) prod_t a(t, nu(t)))^count, so the type
/// probability is the multinomial coefficient times that product. Returns
/// -inf for impossible types.
inline double exact_type_log_probability(const PathType& nu, const MeanFieldChainSpec& spec) {
  spec.validate();
  detail::require_type_capacity(spec, nu.total());
  return detail::exact_type_log_probability(nu, spec, LogFactorials(nu.total()));
}

/// exp of the above; underflows to 0 below about e^-745.
inline double exact_type_probability(const PathType& nu, const MeanFieldChainSpec& spec) {
  return std::exp(exact_type_log_probability(nu, spec));
}

/// I(eta) = R(eta || frozen_chain_law(eta)).
inline ExtendedReal chain_rate_function(const PathMeasure<int>& eta, const MeanFieldChainSpec& spec) {
  return relative_entropy(eta, frozen_chain_law(eta, spec));
}

inline ExtendedReal chain_rate_function(const PathType& nu, const MeanFieldChainSpec& spec) {
  return chain_rate_function(nu.to_distribution(), spec);
}

/// Calls visit(type) for every composition of N over `paths` (zero counts
/// dropped), in lexicographic order of the count vector.
template <class Visit>
void for_each_type(const std::vector<Path<int>>& paths, std::size_t N, Visit&& visit) {
  if (paths.empty()) throw DomainError("no feasible paths");
  std::vector<std::uint64_t> counts(paths.size(), 0);
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t i, std::uint64_t left) {
    if (i + 1 == paths.size()) {
      counts[i] = left;
      std::vector<std::pair<Path<int>, std::uint64_t>> c;
      for (std::size_t k = 0; k < paths.size(); ++k)
        if (counts[k]) c.emplace_back(paths[k], counts[k]);
      visit(PathType::from_counts(std::move(c)));
      return;
    }
    for (std::uint64_t v = left + 1; v-- > 0;) {
      counts[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, N);
}

/// Number of compositions of N into k parts, C(N + k - 1, k - 1).
inline double type_count(std::size_t N, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i < k; ++i) c = c * static_cast<double>(N + i) / static_cast<double>(i);
  return c;
}

struct TypeRow {
  std::string type_id;
  double log_probability;  // -inf for impossible types
  ExtendedReal rate;
  double gap;
  double bound;
  bool pass;
};

struct DecayCheck {
  std::size_t N = 0;
  double bound = 0.0;  // M^(T+1) log(N+1) / N
  std::size_t types = 0;
  std::size_t impossible_types = 0;
  double max_gap = 0.0;
  double total_probability = 0.0;
  bool all_pass = true;
  std::vector<TypeRow> rows;  // at most max_rows, in enumeration order
};

inline std::string type_id(const PathType& nu, const MeanFieldChainSpec& spec) {
  std::string out;
  for (const auto& [p, c] : nu.counts()) {
    if (!out.empty()) out += ' ';
    out += spec.path_name(p) + ':' + std::to_string(c);
  }
  return out;
}

/// Gap between -(1/N) log P(nu) and the rate of nu. An impossible type with
/// infinite rate is consistent (gap 0); any other mismatch in finiteness is
/// an infinite gap.
inline double type_gap(double log_probability, const ExtendedReal& rate, std::size_t N) {
  const bool impossible = log_probability == -std::numeric_limits<double>::infinity();
  if (impossible || rate.is_infinite()) return impossible && rate.is_infinite() ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(-log_probability / static_cast<double>(N) - rate.value());
}

/// Method-of-types check at N: every feasible type satisfies
/// |-(1/N) log P(nu) - I(nu)| <= M^(T+1) log(N+1) / N.
inline DecayCheck types_decay_bound_check(const MeanFieldChainSpec& spec, std::size_t N, std::size_t max_rows = 1000) {
  spec.validate();
  if (N == 0) throw DomainError("decay check needs N >= 1");
  detail::require_type_capacity(spec, N);
  const auto paths = feasible_paths(spec);
  DecayCheck out;
  out.N = N;
  out.bound = std::pow(static_cast<double>(spec.M()), spec.T + 1) * std::log(static_cast<double>(N) + 1.0) /
              static_cast<double>(N);
  const LogFactorials lf(N);
  detail::CompensatedSum total;
  for_each_type(paths, N, [&](const PathType& nu) {
    const double lp = detail::exact_type_log_probability(nu, spec, lf);
    const auto rate = chain_rate_function(nu, spec);
    const double gap = type_gap(lp, rate, N);
    const bool pass = gap <= out.bound;
    ++out.types;
    if (lp == -std::numeric_limits<double>::infinity()) ++out.impossible_types;
    total.add(std::exp(lp));
    out.max_gap = std::max(out.max_gap, gap);
    out.all_pass = out.all_pass && pass;
    if (out.rows.size() < max_rows) out.rows.push_back({type_id(nu, spec), lp, rate, gap, out.bound, pass});
  });
  out.total_probability = total.value();
  return out;
}

}  // namespace mfld
