#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "discrot/consistency.hpp"
#include "discrot/energy.hpp"
#include "oracles.hpp"

using namespace discrot;

namespace {

Model make(double beta, int q) { return Model(ModelParams{beta, q, 32}); }

TEST(SimplexVector, ValidatesInvariants) {
  EXPECT_THROW(SimplexVector({0.5, 0.6}), InvalidInput);
  EXPECT_THROW(SimplexVector({1.2, -0.2}), InvalidInput);
  EXPECT_THROW(SimplexVector::normalized({0.0, 0.0}), InvalidInput);
  EXPECT_NO_THROW(SimplexVector({0.25, 0.25, 0.5}));
  const auto d = SimplexVector::dirac(5, 2);
  EXPECT_EQ(d(2), 1.0);
  EXPECT_FALSE(d.interior());
  const auto s = SimplexVector({0.1, 0.2, 0.3, 0.4}).cyclic_shift(1);
  EXPECT_DOUBLE_EQ(s(1), 0.4);
  EXPECT_DOUBLE_EQ(s(2), 0.1);
  EXPECT_DOUBLE_EQ(tv_distance(SimplexVector::dirac(3, 1), SimplexVector::dirac(3, 2)), 1.0);
}

TEST(SolveMagnetization, EquidistributionGivesZero) {
  const Model m = make(3.0, 10);
  const auto r = solve_magnetization(m, SimplexVector::uniform(10));
  EXPECT_TRUE(r.converged);
  EXPECT_LE(norm(r.m), 1e-14);
}

TEST(SolveMagnetization, DiracMatchesGridScanOracle) {
  const Model m = make(3.0, 10);
  const auto r = solve_magnetization(m, SimplexVector::dirac(10, 1));
  const auto ref = oracle::delta1_fixed_point(10, 3.0);
  EXPECT_NEAR(r.m.x, ref[0], 1e-10);
  EXPECT_NEAR(r.m.y, ref[1], 1e-10);
  EXPECT_NEAR(r.m.x, oracle::kDelta1MagnetizationX, 1e-11);
  EXPECT_NEAR(r.m.y, oracle::kDelta1MagnetizationY, 1e-11);
}

TEST(SolveMagnetization, OrbitPointRecoversContinuousOrderParameter) {
  const Model m = make(3.0, 10);
  const std::vector<double> w = oracle::gibbs_profile(10, 3.0, oracle::kMstarBeta3, 0.0);
  const auto r = solve_magnetization(m, SimplexVector(w));
  EXPECT_NEAR(r.m.x, oracle::kMstarBeta3, 1e-8);
  EXPECT_NEAR(r.m.y, 0.0, 1e-8);
}

TEST(SolveMagnetization, ResidualBoundOnRandomProfiles) {
  const Model m = make(3.0, 10);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto nu = oracle::random_simplex(10, rng);
    const auto r = solve_magnetization(m, nu);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(magnetization_residual(m, nu.weights(), r.m), 1e-12);
    EXPECT_LE(dot(r.m, r.m), 1.0 + 1e-12);
  }
}

TEST(SolveMagnetization, RotationEquivariance) {
  const Model m = make(3.0, 10);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto nu = oracle::random_simplex(10, rng);
    const Vec2 a = rotate(solve_magnetization(m, nu).m, kTwoPi / 10);
    const Vec2 b = solve_magnetization(m, nu.cyclic_shift(1)).m;
    EXPECT_NEAR(a.x, b.x, 1e-10);
    EXPECT_NEAR(a.y, b.y, 1e-10);
  }
}

TEST(SolveMagnetization, AntipodalStartsAgreeInUniquenessRegime) {
  const Model m = make(3.0, 10);
  ASSERT_EQ(classify_regime(3.0, 10).regime, Regime::UniquenessGuaranteed);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto nu = oracle::random_simplex(10, rng);
    const Vec2 a = solve_magnetization(m, nu, Vec2{0.9, 0.0}).m;
    const Vec2 b = solve_magnetization(m, nu, Vec2{-0.9, 0.0}).m;
    EXPECT_NEAR(a.x, b.x, 1e-10);
    EXPECT_NEAR(a.y, b.y, 1e-10);
  }
}

TEST(SolveMagnetization, ConvergenceFailureCarriesLastIterate) {
  const Model m = make(3.0, 10);
  SolverOptions opts;
  opts.max_iter = 1;
  try {
    solve_magnetization(m, SimplexVector::dirac(10, 1), std::nullopt, opts);
    FAIL() << "expected a convergence error";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Convergence);
    EXPECT_GT(e.residual(), 1e-12);
    EXPECT_TRUE(is_finite(e.last_iterate()));
  }
}

TEST(SweepMagnetization, CheckerboardShowsNonUniqueness) {
  // (beta = 6, q = 4): the checkerboard profile admits three fixed points.
  const Model m = make(6.0, 4);
  const auto sweep = sweep_magnetization(m, checkerboard_profile(4));
  EXPECT_GE(sweep.distinct.size(), 2u);
  const Model u = make(3.0, 10);
  EXPECT_EQ(sweep_magnetization(u, checkerboard_profile(10)).distinct.size(), 1u);
}

TEST(ContinuousMstar, SubcriticalIsZero) {
  EXPECT_EQ(continuous_mstar(1.5), 0.0);
  EXPECT_EQ(continuous_mstar(2.0), 0.0);
}

TEST(ContinuousMstar, MatchesBesselOracle) {
  for (double beta : {2.05, 2.3, 3.0, 6.0, 50.0}) {
    EXPECT_NEAR(continuous_mstar(beta), oracle::mstar_bessel(beta), 1e-12) << beta;
  }
  EXPECT_NEAR(continuous_mstar(2.3), oracle::kMstarBeta2_3, 1e-12);
  EXPECT_NEAR(continuous_mstar(3.0), oracle::kMstarBeta3, 1e-12);
  EXPECT_NEAR(continuous_mstar(6.0), oracle::kMstarBeta6, 1e-12);
  EXPECT_NEAR(continuous_mstar(50.0), oracle::kMstarBeta50, 1e-12);
}

TEST(ContinuousMstar, ResidualBound) {
  const double m = continuous_mstar(3.0);
  EXPECT_LE(std::abs(m - circle_mean_ratio(3.0 * m, 512)), 1e-12);
}

TEST(Checkerboard, OddQRejected) { EXPECT_THROW(checkerboard_fixed_points(make(3.0, 5)), InvalidInput); }

TEST(Checkerboard, UniquenessAtBeta3Q10) {
  const auto roots = checkerboard_fixed_points(make(3.0, 10));
  ASSERT_EQ(roots.size(), 1u);
  EXPECT_EQ(roots[0], 0.0);
}

TEST(Checkerboard, SymmetricPairAtBeta6Q4) {
  const Model m = make(6.0, 4);
  const auto roots = checkerboard_fixed_points(m);
  ASSERT_EQ(roots.size(), 3u);
  EXPECT_EQ(roots[1], 0.0);
  EXPECT_GT(roots[2], 0.0);
  EXPECT_DOUBLE_EQ(roots[0], -roots[2]);
  const CheckerboardMap f(4, 32);
  EXPECT_NEAR(roots[2], f(6.0 * roots[2]), 1e-13);
  // The same root from a Simpson evaluation of F_4.
  const auto simpson_f = [](double x) {
    const double a = -oracle::kPi / 4, b = oracle::kPi / 4;
    const double num = oracle::simpson([&](double w) { return std::sin(w) * std::exp(x * std::sin(w)); }, a, b, 4000);
    const double den = oracle::simpson([&](double w) { return std::exp(x * std::sin(w)); }, a, b, 4000);
    return num / den;
  };
  EXPECT_NEAR(roots[2], simpson_f(6.0 * roots[2]), 1e-12);
}

TEST(Checkerboard, SlopeAtZero) {
  for (int q : {4, 6, 10, 40}) {
    const CheckerboardMap f(q, 32);
    const double h = 1e-4;
    const double fd = (f(h) - f(-h)) / (2 * h);
    EXPECT_NEAR(fd, checkerboard_slope_at_zero(q), 1e-8) << q;
    EXPECT_NEAR(f.derivative_at_zero(), checkerboard_slope_at_zero(q), 1e-14) << q;
  }
}

TEST(Checkerboard, RootsAreAntisymmetric) {
  for (double beta : {4.0, 6.0, 10.0, 30.0}) {
    const auto roots = checkerboard_fixed_points(make(beta, 4));
    for (std::size_t i = 0; i < roots.size(); ++i) EXPECT_DOUBLE_EQ(roots[i], -roots[roots.size() - 1 - i]);
  }
}

TEST(Regimes, ClassifiesDocumentedCells) {
  const auto a = classify_regime(3.0, 10);
  EXPECT_EQ(a.regime, Regime::UniquenessGuaranteed);
  EXPECT_FALSE(a.equidistribution_attractive);
  EXPECT_EQ(classify_regime(6.0, 4).regime, Regime::NonUniqueness);
  EXPECT_EQ(classify_regime(2.1, 3).regime, Regime::Unknown);
  EXPECT_NEAR(attractivity_indicator(3.0, 10), 3.0 * (1.0 - std::pow(10 / oracle::kPi * std::sin(oracle::kPi / 10), 2)),
              1e-15);
  EXPECT_NEAR(non_uniqueness_indicator(6.0, 4), 6.0 * (1.0 - 2.0 / oracle::kPi), 1e-14);
}

TEST(Regimes, GridRefusesSubcriticalBeta) {
  EXPECT_THROW(regime_grid(1.5, 10.0, 5, 3, 5), RegimeViolation);
  EXPECT_NO_THROW(regime_grid(2.0, 10.0, 5, 3, 5));
}

TEST(Regimes, GridStructure) {
  const auto cells = regime_grid(2.0, 100.0, 196, 3, 100);
  ASSERT_EQ(cells.size(), 196u * 98u);
  for (const auto& c : cells) {
    EXPECT_GT(c.beta, 2.0);
    const bool uniq = c.beta * std::pow(std::sin(oracle::kPi / c.q), 2) < 1.0;
    EXPECT_EQ(c.label.uniqueness, uniq);
    EXPECT_FALSE(c.label.uniqueness && c.label.non_uniqueness);
    if (c.label.equidistribution_attractive) {
      EXPECT_TRUE(c.label.non_uniqueness);
    }
    if (c.q >= 100 && std::abs(c.beta - 2.5) < 1e-9) {
      EXPECT_EQ(c.label.regime, Regime::UniquenessGuaranteed);
    }
  }
  // Monotone boundaries in beta for each q: once a criterion flips it stays flipped.
  for (int q = 3; q <= 100; ++q) {
    bool seen_not_unique = false, seen_nonuniq = false;
    for (const auto& c : cells) {
      if (c.q != q) continue;
      if (seen_not_unique) EXPECT_FALSE(c.label.uniqueness);
      if (seen_nonuniq) EXPECT_TRUE(c.label.non_uniqueness);
      seen_not_unique = seen_not_unique || !c.label.uniqueness;
      seen_nonuniq = seen_nonuniq || c.label.non_uniqueness;
    }
  }
}

}  // namespace
