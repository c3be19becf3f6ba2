#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mfld/io.hpp"
#include "mfld/measures.hpp"
#include "mfld/quadrature.hpp"

using namespace mfld;

namespace {

DiscreteDistribution<int> on_ints(const std::vector<double>& w) {
  std::vector<int> pts(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) pts[i] = static_cast<int>(i);
  return DiscreteDistribution<int>::from_weights(pts, w);
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) {
    x = u(rng) < zero_prob ? 0.0 : u(rng) + 1e-3;
    s += x;
  }
  if (s == 0.0) {
    w[0] = 1.0;
    s = 1.0;
  }
  for (auto& x : w) x /= s;
  // absorb the rounding residue so the sum is 1 to the last bit we can manage
  double t = 0.0;
  for (std::size_t i = 1; i < n; ++i) t += w[i];
  w[0] = 1.0 - t;
  if (w[0] < 0.0) w[0] = 0.0;
  return w;
}

const double kRe_03_07 = 0.3 * std::log(0.3 / 0.5) + 0.7 * std::log(0.7 / 0.5);

}  // namespace

TEST(DiscreteDistribution, RejectsBadWeights) {
  EXPECT_THROW(on_ints({0.5, 0.6}), DomainError);
  EXPECT_THROW(on_ints({-0.1, 1.1}), DomainError);
  EXPECT_THROW(DiscreteDistribution<int>::from_weights({1, 1}, {0.5, 0.5}), DomainError);
  EXPECT_THROW(on_ints({}), DomainError);
  EXPECT_NO_THROW(on_ints({0.0, 1.0}));
}

TEST(DiscreteDistribution, RealAtomsMatchWithinTolerance) {
  auto d = DiscreteDistribution<double>::from_weights({0.1, 0.2}, {0.25, 0.75});
  EXPECT_DOUBLE_EQ(d.weight_of(0.2 + 1e-14), 0.75);
  EXPECT_EQ(d.weight_of(0.2 + 1e-9), 0.0);
  EXPECT_THROW(DiscreteDistribution<double>::from_weights({0.1, 0.1 + 1e-13}, {0.5, 0.5}), DomainError);
}

TEST(RelativeEntropy, Examples) {
  auto mu = on_ints({0.5, 0.5});
  EXPECT_EQ(relative_entropy(mu, mu), ExtendedReal::finite(0.0));
  EXPECT_NEAR(relative_entropy(DiscreteDistribution<int>::dirac(0), mu).value(), std::log(2.0), 1e-15);
  EXPECT_NEAR(relative_entropy(DiscreteDistribution<int>::dirac(0), mu).value(), 0.693147, 1e-6);
  EXPECT_TRUE(relative_entropy(DiscreteDistribution<int>::dirac(7), mu).is_infinite());
  EXPECT_NEAR(relative_entropy(on_ints({0.3, 0.7}), mu).value(), kRe_03_07, 1e-15);
}

TEST(RelativeEntropy, MismatchedSpacesAreDomainErrors) {
  auto a = DiscreteDistribution<std::vector<double>>::dirac({0.0, 1.0});
  auto b = DiscreteDistribution<std::vector<double>>::dirac({0.0});
  EXPECT_THROW(relative_entropy(a, b), DomainError);
}

TEST(RelativeEntropy, NonnegativeAndZeroOnlyAtEquality) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    auto nu = on_ints(random_simplex(rng, 5, 0.2));
    auto mu = on_ints(random_simplex(rng, 5, 0.2));
    const auto re = relative_entropy(nu, mu);
    EXPECT_GE(re, ExtendedReal::finite(0.0));
    if (total_variation(nu, mu) > 1e-6) EXPECT_GT(re, ExtendedReal::finite(0.0));
    EXPECT_EQ(relative_entropy(nu, nu), ExtendedReal::finite(0.0));
  }
}

TEST(PartitionLowerBound, Examples) {
  auto nu = on_ints({0.3, 0.7});
  auto mu = on_ints({0.5, 0.5});
  Partition<int> whole{{{0, 1}}};
  EXPECT_EQ(partition_lower_bound(nu, mu, whole), ExtendedReal::finite(0.0));
  EXPECT_NEAR(partition_lower_bound(nu, mu, Partition<int>::singletons(nu)).value(), kRe_03_07, 1e-15);

  auto nu3 = on_ints({0.2, 0.3, 0.5});
  auto mu3 = on_ints({0.4, 0.4, 0.2});
  EXPECT_EQ(partition_lower_bound(nu3, mu3, Partition<int>::singletons(nu3)), relative_entropy(nu3, mu3));
}

TEST(PartitionLowerBound, InvalidPartitions) {
  auto nu = on_ints({0.3, 0.7});
  auto mu = on_ints({0.5, 0.5});
  EXPECT_THROW(partition_lower_bound(nu, mu, Partition<int>{{{0}}}), DomainError);          // not covering
  EXPECT_THROW(partition_lower_bound(nu, mu, Partition<int>{{{0, 1}, {1}}}), DomainError);  // overlap
  EXPECT_THROW(partition_lower_bound(nu, mu, Partition<int>{{{0, 1}, {5}}}), DomainError);  // outside
}

TEST(PartitionLowerBound, RefinementIsMonotone) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    auto nu = on_ints(random_simplex(rng, 6, 0.15));
    auto mu = on_ints(random_simplex(rng, 6, 0.15));
    // chain: {all} > {0,1,2}{3,4,5} > {0,1}{2}{3}{4,5} > singletons
    std::vector<Partition<int>> chain = {
        {{{0, 1, 2, 3, 4, 5}}},
        {{{0, 1, 2}, {3, 4, 5}}},
        {{{0, 1}, {2}, {3}, {4, 5}}},
        Partition<int>::singletons(on_ints({1, 0, 0, 0, 0, 0})),
    };
    ExtendedReal prev = ExtendedReal::finite(0.0);
    for (const auto& p : chain) {
      const auto v = partition_lower_bound(nu, mu, p);
      EXPECT_GE(v.to_double() + 1e-14, prev.to_double());
      EXPECT_LE(v.to_double(), relative_entropy(nu, mu).to_double() + 1e-14);
      prev = v;
    }
    EXPECT_EQ(prev, relative_entropy(nu, mu));
  }
}

TEST(DonskerVaradhan, Examples) {
  auto nu = on_ints({0.3, 0.7});
  auto mu = on_ints({0.5, 0.5});
  EXPECT_NEAR(donsker_varadhan_value(nu, mu, [](int) { return 3.0; }), 0.0, 1e-15);
  auto log_density = [&](int x) { return std::log(nu.weight_of(x) / mu.weight_of(x)); };
  EXPECT_NEAR(donsker_varadhan_value(nu, mu, log_density), kRe_03_07, 1e-15);
  EXPECT_NEAR(donsker_varadhan_value(nu, mu, log_density), 0.08228, 1e-5);
  EXPECT_THROW(donsker_varadhan_value(nu, mu, [](int) { return INFINITY; }), DomainError);
}

TEST(DonskerVaradhan, BoundedByRelativeEntropy) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  auto nu = on_ints(random_simplex(rng, 4));
  auto mu = on_ints(random_simplex(rng, 4));
  const double re = relative_entropy(nu, mu).value();
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> g = {u(rng), u(rng), u(rng), u(rng)};
    EXPECT_LE(donsker_varadhan_value(nu, mu, [&](int x) { return g[static_cast<std::size_t>(x)]; }), re + 1e-14);
  }
  EXPECT_NEAR(donsker_varadhan_value(nu, mu, [&](int x) { return std::log(nu.weight_of(x) / mu.weight_of(x)); }), re,
              1e-14);
}

TEST(Pushforward, Examples) {
  auto gamma = DiscreteDistribution<int>::uniform({1, 2, 3, 4});
  EXPECT_TRUE(approx_equal(pushforward(gamma, [](int y) { return y; }), gamma, 0.0));
  auto image = pushforward(gamma, [](int y) { return y % 2; });
  ASSERT_EQ(image.size(), 2u);
  EXPECT_DOUBLE_EQ(image.weight_of(0), 0.5);
  EXPECT_DOUBLE_EQ(image.weight_of(1), 0.5);
  auto dirac = pushforward(DiscreteDistribution<int>::dirac(3), [](int y) { return 10 * y; });
  EXPECT_DOUBLE_EQ(dirac.weight_of(30), 1.0);
}

TEST(FiniteMap, RejectsUndefinedPoints) {
  FiniteMap<int, int> psi({{1, 0}, {2, 1}});
  EXPECT_EQ(psi(2), 1);
  EXPECT_THROW(psi(3), DomainError);
  EXPECT_THROW((FiniteMap<int, int>({{1, 0}, {1, 1}})), DomainError);
}

TEST(OptimalLift, Examples) {
  auto gamma0 = DiscreteDistribution<int>::uniform({1, 2, 3, 4});
  auto mod2 = [](int y) { return y % 2; };

  auto same = optimal_lift(pushforward(gamma0, mod2), gamma0, mod2);
  ASSERT_TRUE(same.lift);
  EXPECT_TRUE(approx_equal(*same.lift, gamma0, 1e-15));

  auto eta = DiscreteDistribution<int>::from_weights({0, 1}, {0.3, 0.7});
  auto res = optimal_lift(eta, gamma0, mod2);
  ASSERT_TRUE(res.lift);
  EXPECT_NEAR(res.lift->weight_of(1), 0.35, 1e-15);
  EXPECT_NEAR(res.lift->weight_of(2), 0.15, 1e-15);
  EXPECT_NEAR(res.lift->weight_of(3), 0.35, 1e-15);
  EXPECT_NEAR(res.lift->weight_of(4), 0.15, 1e-15);
  EXPECT_NEAR(res.relative_entropy.value(), kRe_03_07, 1e-15);

  auto bad = optimal_lift(DiscreteDistribution<int>::dirac(2), gamma0, mod2);
  EXPECT_FALSE(bad.lift);
  EXPECT_TRUE(bad.relative_entropy.is_infinite());
}

TEST(BruteForceLift, Examples) {
  auto gamma0 = DiscreteDistribution<int>::uniform({1, 2, 3, 4});
  auto mod2 = [](int y) { return y % 2; };
  EXPECT_NEAR(brute_force_lift_infimum(pushforward(gamma0, mod2), gamma0, mod2, 20).value(), 0.0, 1e-6);
  auto eta = DiscreteDistribution<int>::from_weights({0, 1}, {0.3, 0.7});
  EXPECT_NEAR(brute_force_lift_infimum(eta, gamma0, mod2, 20).value(), kRe_03_07, 1e-9);
  EXPECT_TRUE(brute_force_lift_infimum(DiscreteDistribution<int>::dirac(5), gamma0, mod2, 20).is_infinite());
}

TEST(BruteForceLift, CapacityLimits) {
  std::vector<int> pts(65);
  for (int i = 0; i < 65; ++i) pts[static_cast<std::size_t>(i)] = i;
  auto gamma0 = DiscreteDistribution<int>::uniform(pts);
  auto to_zero = [](int) { return 0; };
  EXPECT_THROW(brute_force_lift_infimum(DiscreteDistribution<int>::dirac(0), gamma0, to_zero, 10), CapacityError);
}

// Contraction identity on random instances, including skewed priors.
TEST(Contraction, RandomInstancesAgree) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> ysize(1, 6), xsize(1, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const int ny = ysize(rng), nx = xsize(rng);
    auto gamma0 = on_ints(random_simplex(rng, static_cast<std::size_t>(ny), 0.1));
    std::vector<std::pair<int, int>> table;
    std::uniform_int_distribution<int> img(0, nx - 1);
    for (int y = 0; y < ny; ++y) table.emplace_back(y, img(rng));
    FiniteMap<int, int> psi(table);
    auto image = pushforward(gamma0, psi);
    auto eta_w = random_simplex(rng, static_cast<std::size_t>(nx), 0.2);
    auto eta = on_ints(eta_w);

    const auto direct = relative_entropy(eta, image);
    const auto lift = optimal_lift(eta, gamma0, psi);
    const auto brute = brute_force_lift_infimum(eta, gamma0, psi, 16);
    EXPECT_LE(extended_gap(direct, lift.relative_entropy), 1e-12);
    EXPECT_LE(extended_gap(direct, brute), 1e-6);
    if (lift.lift) EXPECT_TRUE(approx_equal(pushforward(*lift.lift, psi), eta, 1e-14));
  }
}

TEST(BoundedLipschitz, Examples) {
  auto d0 = DiscreteDistribution<double>::dirac(0.0);
  EXPECT_NEAR(bounded_lipschitz_distance(d0, d0), 0.0, 1e-15);
  EXPECT_NEAR(bounded_lipschitz_distance(d0, DiscreteDistribution<double>::dirac(1.0)), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(bounded_lipschitz_distance(d0, DiscreteDistribution<double>::dirac(10.0)), 5.0 / 3.0, 1e-12);
  using V = std::vector<double>;
  auto a = DiscreteDistribution<V>::dirac({0.0, 0.0});
  auto b = DiscreteDistribution<V>::dirac({3.0, 4.0});
  // two-point LP: max min(2M, 5L) with M + L <= 1 -> 10/7
  EXPECT_NEAR(bounded_lipschitz_distance(a, b), 10.0 / 7.0, 1e-12);
  EXPECT_THROW(bounded_lipschitz_distance(a, DiscreteDistribution<V>::dirac({1.0})), DomainError);
}

TEST(BoundedLipschitz, MetricAxioms) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 1.0);
  using V = std::vector<double>;
  auto random_measure = [&](std::size_t n) {
    std::vector<V> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({z(rng), z(rng)});
    return DiscreteDistribution<V>::from_weights(pts, random_simplex(rng, n));
  };
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_measure(5), q = random_measure(4), r = random_measure(6);
    const double pq = bounded_lipschitz_distance(p, q), qp = bounded_lipschitz_distance(q, p);
    const double qr = bounded_lipschitz_distance(q, r), pr = bounded_lipschitz_distance(p, r);
    EXPECT_NEAR(pq, qp, 1e-10);
    EXPECT_GT(pq, 0.0);
    EXPECT_NEAR(bounded_lipschitz_distance(p, p), 0.0, 1e-15);
    EXPECT_LE(pr, pq + qr + 1e-10);
  }
}

TEST(BoundedLipschitz, OneDimensionalShortcutMatchesFullPairs) {
  // 1-D points embedded as length-1 vectors go through the all-pairs LP.
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> xs, ys;
    std::vector<std::vector<double>> vx, vy;
    for (int i = 0; i < 6; ++i) {
      xs.push_back(z(rng));
      vx.push_back({xs.back()});
      ys.push_back(z(rng));
      vy.push_back({ys.back()});
    }
    auto w1 = random_simplex(rng, 6), w2 = random_simplex(rng, 6);
    const double fast = bounded_lipschitz_distance(DiscreteDistribution<double>::from_weights(xs, w1),
                                                   DiscreteDistribution<double>::from_weights(ys, w2));
    const double full = bounded_lipschitz_distance(DiscreteDistribution<std::vector<double>>::from_weights(vx, w1),
                                                   DiscreteDistribution<std::vector<double>>::from_weights(vy, w2));
    EXPECT_NEAR(fast, full, 1e-10);
  }
}

TEST(BoundedLipschitz, DominatedByCouplingCost) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 40;
    std::vector<double> xs(n), ys(n);
    double mean_gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = z(rng);
      ys[i] = xs[i] + 0.3 * z(rng);
      mean_gap += std::abs(xs[i] - ys[i]) / n;
    }
    const double d = bounded_lipschitz_distance(EmpiricalMeasure<double>(xs).to_distribution(),
                                                EmpiricalMeasure<double>(ys).to_distribution());
    EXPECT_LE(d, mean_gap + 1e-12);
  }
}

TEST(GaussianRelativeEntropy, Examples) {
  Eigen::Matrix2d s;
  s << 1, 1, 1, 2;
  GaussianMeasure a(Eigen::Vector2d(1, 1), s), b(Eigen::Vector2d(0, 0), s);
  EXPECT_NEAR(gaussian_relative_entropy(a, a).value(), 0.0, 1e-15);
  EXPECT_NEAR(gaussian_relative_entropy(a, b).value(), 0.5, 1e-14);
  EXPECT_NEAR(gaussian_relative_entropy(a, GaussianMeasure::standard(2)).value(), 1.5, 1e-14);
  EXPECT_THROW(gaussian_relative_entropy(a, GaussianMeasure(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Zero())),
               DomainError);
  Eigen::Matrix2d degenerate;
  degenerate << 1, 1, 1, 1;
  EXPECT_TRUE(gaussian_relative_entropy(GaussianMeasure(Eigen::Vector2d(0, 0), degenerate), b).is_infinite());
}

// Fine discretizations of 1-D Gaussians reproduce the closed form.
TEST(GaussianRelativeEntropy, MatchesDiscretizedQuadrature) {
  struct Case {
    double m1, s1, m2, s2;
  };
  for (const Case c : {Case{0.0, 1.0, 0.5, 1.3}, Case{-1.0, 0.7, 0.0, 1.0}, Case{2.0, 2.0, 1.0, 1.5}}) {
    const double lo = std::min(c.m1, c.m2) - 12.0 * std::max(c.s1, c.s2);
    const double hi = std::max(c.m1, c.m2) + 12.0 * std::max(c.s1, c.s2);
    const int cells = 4000;
    const double h = (hi - lo) / cells;
    // upper tail via the survival function to avoid cancellation
    auto mass = [](double a, double b) {
      return a > 0.0 ? normal_cdf(-a) - normal_cdf(-b) : normal_cdf(b) - normal_cdf(a);
    };
    std::vector<double> pts, w1, w2;
    for (int i = 0; i < cells; ++i) {
      const double a = lo + i * h, b = a + h;
      pts.push_back(0.5 * (a + b));
      w1.push_back(mass((a - c.m1) / c.s1, (b - c.m1) / c.s1));
      w2.push_back(mass((a - c.m2) / c.s2, (b - c.m2) / c.s2));
    }
    auto normalize = [](std::vector<double>& w) {
      double s = 0.0;
      for (double x : w) s += x;
      for (double& x : w) x /= s;
    };
    normalize(w1);
    normalize(w2);
    const double discrete = relative_entropy(DiscreteDistribution<double>::from_weights(pts, w1),
                                             DiscreteDistribution<double>::from_weights(pts, w2))
                                .value();
    GaussianMeasure g1(Eigen::VectorXd::Constant(1, c.m1), Eigen::MatrixXd::Constant(1, 1, c.s1 * c.s1));
    GaussianMeasure g2(Eigen::VectorXd::Constant(1, c.m2), Eigen::MatrixXd::Constant(1, 1, c.s2 * c.s2));
    const double closed = gaussian_relative_entropy(g1, g2).value();
    EXPECT_NEAR(discrete, closed, 0.02 * closed);
  }
}

TEST(GaussianMeasure, Validation) {
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0.4, 1;
  EXPECT_THROW(GaussianMeasure(Eigen::Vector2d(0, 0), asym), DomainError);
  Eigen::Matrix2d indefinite;
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(GaussianMeasure(Eigen::Vector2d(0, 0), indefinite), DomainError);
  EXPECT_THROW(GaussianMeasure(Eigen::Vector3d(0, 0, 0), Eigen::Matrix2d::Identity()), DomainError);
}

TEST(Serialization, RoundTripPreservesWeightsExactly) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 7; ++i) pts.push_back({z(rng), z(rng)});
  auto d = DiscreteDistribution<std::vector<double>>::from_weights(pts, random_simplex(rng, 7));
  std::stringstream ss;
  write_distribution(ss, d);
  auto back = read_distribution<std::vector<double>>(ss);
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.atoms()[i].point, d.atoms()[i].point);
    EXPECT_EQ(back.atoms()[i].weight, d.atoms()[i].weight);
  }

  Eigen::Matrix2d s;
  s << 2, 0.3, 0.3, 1;
  GaussianMeasure g(Eigen::Vector2d(0.1, -3), s);
  std::stringstream gs;
  write_gaussian(gs, g);
  auto g2 = read_gaussian(gs);
  EXPECT_EQ(g2.mean(), g.mean());
  EXPECT_EQ(g2.covariance(), g.covariance());
}

TEST(Serialization, MalformedInput) {
  std::stringstream ss("0\t0.5\n1 0.5\n");
  EXPECT_THROW(read_distribution<int>(ss), DomainError);
  std::stringstream sum("0\t0.5\n1\t0.4\n");
  EXPECT_THROW(read_distribution<int>(sum), DomainError);
}

TEST(GaussHermite, IntegratesMoments) {
  const auto& r = gauss_hermite_64();
  double s = 0.0;
  for (double w : r.weights) s += w;
  EXPECT_NEAR(s, std::sqrt(M_PI), 1e-13);
  EXPECT_NEAR(gaussian_expectation(0.0, 1.0, [](double x) { return x * x; }), 1.0, 1e-13);
  EXPECT_NEAR(gaussian_expectation(1.0, 2.0, [](double x) { return x * x * x * x; }),
              1.0 + 6.0 * 4.0 + 3.0 * 16.0, 1e-10);
  EXPECT_NEAR(gaussian_expectation(0.0, 1.0, [](double x) { return std::cos(x); }), std::exp(-0.5), 1e-14);
}
