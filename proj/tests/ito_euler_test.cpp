#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfld/ito_euler.hpp"

using namespace mfld;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::MatrixXd m1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

// Stacked Wiener covariance h min(j, k) (j, k = 1..K) in dimension one.
Eigen::MatrixXd wiener_cov(const EulerGrid& g) {
  Eigen::MatrixXd c(g.K, g.K);
  for (int j = 0; j < g.K; ++j)
    for (int k = 0; k < g.K; ++k) c(j, k) = g.h * (std::min(j, k) + 1);
  return c;
}

ItoSpec random_affine_spec(std::mt19937_64& rng, int d) {
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

}  // namespace

TEST(EulerGrid, Validation) {
  EXPECT_THROW(EulerGrid::over(1.0, 0), DomainError);
  EXPECT_THROW(EulerGrid::over(-1.0, 4), DomainError);
  EulerGrid g{0.3, 3};
  EXPECT_THROW(g.validate(1.0), DomainError);
  EXPECT_NO_THROW(EulerGrid::over(1.0, 10).validate(1.0));
}

TEST(EulerSimulate, BrownianIsScaledRandomWalk) {
  auto spec = ItoSpec::brownian(v1(0.5), 1.0);
  auto grid = EulerGrid::over(1.0, 16);
  auto run = euler_simulate(spec, grid, 20, 3);
  for (std::size_t i = 0; i < 20; ++i) {
    double walk = 0.0;
    for (int k = 1; k <= 16; ++k) {
      walk += run.noise[i][static_cast<std::size_t>(k)][0];
      EXPECT_NEAR(run.paths[i][static_cast<std::size_t>(k)][0], 0.5 + std::sqrt(grid.h) * walk, 1e-13);
    }
  }
}

TEST(EulerSimulate, ConstantDriftWithoutNoiseIsALine) {
  auto spec = ItoSpec::linear(v1(1.5), m1(0.0), m1(0.0), m1(0.0), v1(-1.0), 2.0);
  auto grid = EulerGrid::over(2.0, 8);
  auto run = euler_simulate(spec, grid, 5, 0);
  for (const auto& p : run.paths)
    for (int k = 0; k <= 8; ++k) EXPECT_NEAR(p[static_cast<std::size_t>(k)][0], -1.0 + 1.5 * k * grid.h, 1e-14);
}

TEST(EulerSimulate, MeanRevertingKeepsMeanOnNoiseAverage) {
  const double sigma = 0.7;
  auto spec = ItoSpec::mean_reverting(2.0, sigma, 1.0, 1.0);
  auto grid = EulerGrid::over(1.0, 20);
  const std::size_t N = 200;
  auto run = euler_simulate(spec, grid, N, 11);
  double mean = 1.0;
  for (int k = 1; k <= grid.K; ++k) {
    double ybar = 0.0, xbar = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      ybar += run.noise[i][static_cast<std::size_t>(k)][0];
      xbar += run.paths[i][static_cast<std::size_t>(k)][0];
    }
    mean += sigma * std::sqrt(grid.h) * ybar / N;
    EXPECT_NEAR(xbar / N, mean, 1e-12);
  }
}

TEST(EulerSimulate, MatchesStagedRouteBitForBit) {
  for (auto spec : {ItoSpec::mean_reverting(1.0, 0.5, 0.2, 1.0), ItoSpec::sine_coupling(0.5, 1.5, 0.8, 0.0, 1.0)}) {
    auto grid = EulerGrid::over(1.0, 10);
    auto direct = euler_simulate(spec, grid, 64, 21);
    auto staged = simulate_particles([&](Engine& e) { return ito_noise_path(e, spec.d1(), grid.K); },
                                     ito_staged_spec(spec, grid), 64, 21);
    EXPECT_EQ(direct.paths, staged.paths);
    EXPECT_EQ(direct.empirical, staged.empirical);
  }
  std::mt19937_64 rng(4);
  auto spec2 = random_affine_spec(rng, 2);
  auto grid = EulerGrid::over(1.0, 6);
  auto direct = euler_simulate(spec2, grid, 30, 5);
  auto staged = simulate_particles([&](Engine& e) { return ito_noise_path(e, spec2.d1(), grid.K); },
                                   ito_staged_spec(spec2, grid), 30, 5);
  EXPECT_EQ(direct.paths, staged.paths);
}

TEST(EulerSimulate, EmpiricalIsMcKeanVlasovLawOfNoise) {
  auto spec = ItoSpec::sine_coupling(0.3, 1.0, 0.6, 0.5, 1.0);
  auto grid = EulerGrid::over(1.0, 5);
  auto staged = ito_staged_spec(spec, grid);
  auto run = simulate_particles([&](Engine& e) { return ito_noise_path(e, 1, grid.K); }, staged, 40, 8);
  EXPECT_EQ(run.empirical, mckean_vlasov_law(run.noise_empirical, staged));
}

TEST(EulerSimulate, DivergenceIsReported) {
  auto spec = ItoSpec::linear(v1(0.0), m1(1e300), m1(0.0), m1(1.0), v1(1.0), 1.0);
  try {
    euler_simulate(spec, EulerGrid::over(1.0, 4), 3, 0);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.particle(), 0u);
    EXPECT_GE(e.stage(), 1u);
  }
}

TEST(EulerControlled, ZeroControlIsBitIdentical) {
  auto spec = ItoSpec::sine_coupling(0.5, 1.0, 0.4, 0.1, 1.0);
  auto grid = EulerGrid::over(1.0, 12);
  std::vector<ControlPath> zero(50, ControlPath::zero(grid.K, 1));
  EXPECT_EQ(euler_controlled_simulate(spec, grid, 50, zero, 9).paths, euler_simulate(spec, grid, 50, 9).paths);
  EXPECT_EQ(zero[0].energy(grid.h), 0.0);
}

TEST(EulerControlled, ConstantControlAddsLine) {
  auto spec = ItoSpec::brownian(v1(0.0), 1.0);
  auto grid = EulerGrid::over(1.0, 10);
  const double c = -0.8;
  std::vector<ControlPath> u(7, ControlPath::constant(grid.K, v1(c)));
  auto controlled = euler_controlled_simulate(spec, grid, 7, u, 2);
  auto free = euler_simulate(spec, grid, 7, 2);
  for (std::size_t i = 0; i < 7; ++i)
    for (int k = 0; k <= grid.K; ++k)
      EXPECT_NEAR(controlled.paths[i][static_cast<std::size_t>(k)][0] - free.paths[i][static_cast<std::size_t>(k)][0],
                  c * k * grid.h, 1e-14);
  EXPECT_THROW(euler_controlled_simulate(spec, grid, 7, {ControlPath::zero(grid.K, 1)}, 2), DomainError);
}

TEST(GrowthCondition, HoldsAlongTrajectories) {
  std::mt19937_64 rng(12);
  for (auto spec : {ItoSpec::mean_reverting(1.5, 0.9, 2.0, 1.0), ItoSpec::sine_coupling(0.7, 2.0, 0.5, -1.0, 1.0),
                    random_affine_spec(rng, 2)}) {
    auto grid = EulerGrid::over(1.0, 16);
    auto run = euler_simulate(spec, grid, 300, 1);
    const double K = spec.growth_constant();
    for (int k = 0; k < grid.K; ++k) {
      std::vector<State> states;
      double sup = 0.0;
      for (const auto& p : run.paths) {
        states.push_back(p[static_cast<std::size_t>(k)]);
        sup = std::max(sup, Eigen::Map<const Eigen::VectorXd>(states.back().data(), spec.d()).norm());
      }
      const auto nu = summarize(EmpiricalMeasure<State>(states).to_distribution());
      for (const auto& s : states) {
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(s.data(), spec.d());
        EXPECT_LE(spec.drift(k * grid.h, x, nu).norm(), K * (1.0 + sup) + 1e-12);
        EXPECT_LE(Eigen::JacobiSVD<Eigen::MatrixXd>(spec.dispersion(k * grid.h, x, nu)).singularValues()(0), K + 1e-12);
      }
    }
  }
}

TEST(McKeanVlasovFlow, BrownianHasRandomWalkCovariance) {
  auto spec = ItoSpec::brownian(v1(0.0), 1.0);
  auto grid = EulerGrid::over(1.0, 8);
  auto mv = mckean_vlasov_flow(spec, grid);
  ASSERT_TRUE(mv.path_law);
  EXPECT_LE(mv.path_law->mean().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((mv.path_law->covariance() - wiener_cov(grid)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(McKeanVlasovFlow, MeanRevertingKeepsInitialMean) {
  auto spec = ItoSpec::mean_reverting(1.3, 0.5, 1.0, 1.0);
  auto grid = EulerGrid::over(1.0, 32);
  auto mv = mckean_vlasov_flow(spec, grid);
  for (const auto& m : mv.flow.mean) EXPECT_NEAR(m(0), 1.0, 1e-10);
  EXPECT_LT(mv.residual, 1e-10);
}

TEST(McKeanVlasovFlow, NoiselessFlowIsDiracAlongEulerOde) {
  // dx = (1 - x + 0.5 mean) dt, mean = x on the limit: x' = 1 - 0.5 x
  auto spec = ItoSpec::linear(v1(1.0), m1(-1.0), m1(0.5), m1(0.0), v1(0.0), 1.0);
  auto grid = EulerGrid::over(1.0, 10);
  auto mv = mckean_vlasov_flow(spec, grid);
  double x = 0.0;
  for (int k = 1; k <= grid.K; ++k) {
    x += (1.0 - 0.5 * x) * grid.h;
    EXPECT_NEAR(mv.flow.mean[static_cast<std::size_t>(k)](0), x, 1e-10);
    EXPECT_EQ(mv.flow.cov[static_cast<std::size_t>(k)](0, 0), 0.0);
  }
  EXPECT_EQ(mv.path_law->covariance().cwiseAbs().maxCoeff(), 0.0);
}

TEST(McKeanVlasovFlow, ConvergenceFailureIsReported) {
  auto spec = ItoSpec::mean_reverting(1.0, 1.0, 1.0, 1.0);
  auto grid = EulerGrid::over(1.0, 8);
  FlowOptions opt;
  opt.max_iter = 2;
  opt.tol = 1e-300;
  spec = ItoSpec::linear(v1(1.0), m1(0.0), m1(1.0), m1(1.0), v1(0.0), 1.0);
  EXPECT_THROW(mckean_vlasov_flow(spec, grid, opt), ConvergenceError);
}

TEST(McKeanVlasovFlow, NonlinearUsesParticleApproximation) {
  auto spec = ItoSpec::sine_coupling(0.0, 1.0, 0.0, 0.3, 1.0);
  auto grid = EulerGrid::over(1.0, 4);
  auto mv = mckean_vlasov_flow(spec, grid, FlowOptions{1e-10, 1000, 0.5, 100, 0});
  EXPECT_FALSE(mv.path_law);
  // all particles coincide, so sin(y - x) = 0 and nothing moves
  for (const auto& m : mv.flow.mean) EXPECT_NEAR(m(0), 0.3, 1e-15);
  EXPECT_THROW(frozen_law(spec, grid, mv.flow.mean), CapacityError);
}

TEST(FrozenLaw, FixedPointAndSufficiency) {
  std::mt19937_64 rng(5);
  auto spec = random_affine_spec(rng, 2);
  auto grid = EulerGrid::over(1.0, 8);
  auto mv = mckean_vlasov_flow(spec, grid);
  auto frozen = frozen_law(spec, grid, mv.flow.mean);
  EXPECT_LE((frozen.mean() - mv.path_law->mean()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(frozen.covariance(), mv.path_law->covariance());

  // a second path law with the same mean flow but a different covariance
  GaussianMeasure other(mv.path_law->mean(), 2.0 * mv.path_law->covariance());
  auto f1 = frozen_law(spec, grid, mean_flow(*mv.path_law, spec, grid));
  auto f2 = frozen_law(spec, grid, mean_flow(other, spec, grid));
  EXPECT_EQ(f1.mean(), f2.mean());
  EXPECT_EQ(f1.covariance(), f2.covariance());

  auto zero_drift = ItoSpec::brownian(Eigen::Vector2d(1.0, -1.0), 1.0);
  std::vector<Eigen::VectorXd> t1(9, Eigen::Vector2d(0, 0)), t2(9, Eigen::Vector2d(5, 3));
  EXPECT_EQ(frozen_law(zero_drift, grid, t1).mean(), frozen_law(zero_drift, grid, t2).mean());
}

TEST(ItoRate, Examples) {
  auto spec = ItoSpec::brownian(v1(0.0), 1.0);
  auto grid = EulerGrid::over(1.0, 16);
  auto mv = mckean_vlasov_flow(spec, grid);
  EXPECT_EQ(ito_rate_re_form(*mv.path_law, spec, grid), ExtendedReal::finite(0.0));

  for (double c : {0.5, 2.0}) {
    Eigen::VectorXd line(grid.K);
    for (int k = 0; k < grid.K; ++k) line(k) = c * (k + 1) * grid.h;
    const double r = ito_rate_re_form(GaussianMeasure(line, wiener_cov(grid)), spec, grid).value();
    EXPECT_NEAR(r, c * c / 2.0, 1e-12);
    const double doubled = ito_rate_re_form(GaussianMeasure(2.0 * line, wiener_cov(grid)), spec, grid).value();
    EXPECT_NEAR(doubled, 4.0 * r, 1e-11);
  }
}

TEST(VariationalBound, Examples) {
  auto spec = ItoSpec::brownian(v1(0.0), 1.0);
  auto grid = EulerGrid::over(1.0, 16);
  auto mv = mckean_vlasov_flow(spec, grid);
  auto at_mv = variational_upper_bound(*mv.path_law, spec, grid);
  EXPECT_EQ(at_mv.value, ExtendedReal::finite(0.0));
  for (const auto& u : at_mv.control->u) EXPECT_EQ(u(0), 0.0);

  const double c = 1.7;
  Eigen::VectorXd line(grid.K);
  for (int k = 0; k < grid.K; ++k) line(k) = c * (k + 1) * grid.h;
  GaussianMeasure target(line, wiener_cov(grid));
  auto res = variational_upper_bound(target, spec, grid);
  EXPECT_NEAR(res.value.value(), c * c / 2.0, 1e-12);
  for (const auto& u : res.control->u) EXPECT_NEAR(u(0), c, 1e-12);
  EXPECT_NEAR(res.value.value(), ito_rate_re_form(target, spec, grid).value(), 1e-12);

  auto inflated = variational_upper_bound(GaussianMeasure(line, 1.5 * wiener_cov(grid)), spec, grid);
  EXPECT_TRUE(inflated.value.is_infinite());
  EXPECT_FALSE(inflated.control);
  EXPECT_FALSE(inflated.note.empty());
}

TEST(VariationalBound, UnreachableMeanIncrement) {
  // second coordinate carries no noise, so its mean cannot be steered
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 1);
  S(0, 0) = 1.0;
  auto spec = ItoSpec::linear(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero(), S,
                              Eigen::Vector2d::Zero(), 1.0);
  auto grid = EulerGrid::over(1.0, 4);
  auto base = frozen_law(spec, grid, std::vector<Eigen::VectorXd>(5, Eigen::Vector2d::Zero()));
  Eigen::VectorXd shifted = base.mean();
  shifted(1) += 0.1;
  auto res = variational_upper_bound(GaussianMeasure(shifted, base.covariance()), spec, grid);
  EXPECT_TRUE(res.value.is_infinite());
}

TEST(VariationalBound, MatchesRelativeEntropyFormOnRandomSpecs) {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 2;
    auto spec = random_affine_spec(rng, d);
    for (int K : {8, 32}) {
      auto grid = EulerGrid::over(1.0, K);
      // target: controlled law under a random deterministic control
      std::vector<Eigen::VectorXd> m{spec.x0()};
      const Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(d, d) + spec.B() * grid.h;
      for (int k = 0; k < K; ++k) {
        Eigen::VectorXd u(d);
        for (int i = 0; i < d; ++i) u(i) = z(rng);
        m.push_back(Phi * m.back() + (spec.a() + spec.C() * m.back()) * grid.h + spec.S() * u * grid.h);
      }
      Eigen::VectorXd stacked(K * d);
      for (int k = 1; k <= K; ++k) stacked.segment((k - 1) * d, d) = m[static_cast<std::size_t>(k)];
      GaussianMeasure target(stacked, frozen_law(spec, grid, m).covariance());
      const double re = ito_rate_re_form(target, spec, grid).value();
      const double var = variational_upper_bound(target, spec, grid).value.value();
      EXPECT_NEAR(var, re, 1e-6) << "trial " << trial << " K " << K;
      EXPECT_GE(var, re - 1e-9);
    }
  }
}

TEST(ItoRate, VanishesOnlyAtMcKeanVlasovLaw) {
  auto grid = EulerGrid::over(1.0, 8);
  for (double kappa : {-0.5, 0.0, 1.0, 2.0})
    for (double sigma : {0.5, 1.0}) {
      auto spec = ItoSpec::linear(v1(0.3), m1(-kappa), m1(kappa), m1(sigma), v1(0.5), 1.0);
      auto mv = mckean_vlasov_flow(spec, grid);
      EXPECT_NEAR(ito_rate_re_form(*mv.path_law, spec, grid).value(), 0.0, 1e-18);
      for (double shift : {-0.1, 0.05, 0.3}) {
        Eigen::VectorXd mean = mv.path_law->mean();
        mean(grid.K / 2) += shift;
        EXPECT_GT(ito_rate_re_form(GaussianMeasure(mean, mv.path_law->covariance()), spec, grid).value(), 0.0);
        EXPECT_GT(ito_rate_re_form(GaussianMeasure(mv.path_law->mean(), (1.0 + shift) * mv.path_law->covariance()),
                                   spec, grid)
                      .value(),
                  0.0);
      }
    }
}

TEST(WienerRelativeEntropy, Examples) {
  auto grid = EulerGrid::over(1.0, 10);
  EXPECT_EQ(wiener_re_discretized(ControlPath::zero(10, 1), grid), 0.0);
  EXPECT_NEAR(wiener_re_discretized(ControlPath::constant(10, v1(2.0)), grid), 2.0, 1e-12);
  EXPECT_NEAR(wiener_re_discretized(ControlPath::constant(1, v1(2.0)), EulerGrid::over(1.0, 1)), 2.0, 0.0);
}

TEST(WienerRelativeEntropy, EqualsControlEnergy) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 4 + trial % 29, d = 1 + trial % 3;
    auto grid = EulerGrid::over(0.5 + 0.01 * trial, K);
    ControlPath u;
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = 2.0 * z(rng);
      u.u.push_back(v);
    }
    EXPECT_NEAR(wiener_re_discretized(u, grid), u.energy(grid.h), 1e-12);
  }
}

TEST(WienerRelativeEntropy, RefinementInvariant) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 10; ++trial) {
    ControlPath u;
    for (int k = 0; k < 8; ++k) u.u.push_back(v1(z(rng)));
    const double coarse = wiener_re_discretized(u, EulerGrid::over(1.0, 8));
    const double fine = wiener_re_discretized(u.refined(2), EulerGrid::over(1.0, 16));
    EXPECT_NEAR(coarse, fine, 1e-12);
  }
}
