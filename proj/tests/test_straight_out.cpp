#include <gtest/gtest.h>

#include <numbers>

#include "imcvf/charts.hpp"
#include "imcvf/straight_out.hpp"
#include "test_util.hpp"

using namespace imcvf;

namespace {

BlockMetric seed_no_d(int k, double eps) { return complete_chart(charts::seed(k, eps), false); }

double ylm(int l, const CoordinatePoint& p) {
  double c = std::cos(p.th), s = std::sin(p.th);
  return l == 1 ? s * std::cos(p.ph) : l == 2 ? s * c * std::sin(p.ph) : 5 * c * c * c - 3 * c;
}

double poisson_error(int l, int n) {
  SphereOperator op(minkowski(), SphereGrid::uniform(0, 1, n, 2 * n));
  auto f = op.grid().sample([&](const CoordinatePoint& p) { return -l * (l + 1) * ylm(l, p); });
  auto s = op.solve(f);
  double err = 0;
  for (std::size_t k = 0; k < f.size(); ++k) err = std::max(err, std::fabs(s.psi[k] - ylm(l, op.grid().point(k))));
  return err;
}

}  // namespace

TEST(Poisson, SphericalHarmonics) {
  for (int l = 1; l <= 3; ++l) {
    double e32 = poisson_error(l, 32), e64 = poisson_error(l, 64);
    EXPECT_LE(e64, 1e-6) << l;
    EXPECT_GE(e32 / e64, 3.5) << l;
  }
}

TEST(Poisson, ConstantDefectAndMeanZero) {
  SphereOperator op(minkowski(), SphereGrid::uniform(0, 1, 16, 32));
  auto s = op.solve(std::vector<double>(op.grid().size(), 2.0));
  EXPECT_NEAR(s.lambda, 2.0, 1e-10);
  for (double x : s.psi) EXPECT_NEAR(x, 0, 1e-10);
  EXPECT_NEAR(op.area(), 4 * std::numbers::pi, 1e-12);
}

// Non-divergence form: int Lap psi dA vanishes to truncation order only.
TEST(Poisson, GeneralChartIntegratesToZero) {
  auto g = seed_no_d(8, 0.1);
  auto mean_lap = [&](int n) {
    SphereOperator op(g, SphereGrid::uniform(0.3, 2, n, 2 * n));
    auto psi = op.grid().sample([](const CoordinatePoint& p) { return std::sin(p.th) * std::cos(p.ph) + std::cos(2 * p.th); });
    return std::fabs(op.integrate(op.apply(psi)));
  };
  double e16 = mean_lap(16), e32 = mean_lap(32);
  EXPECT_LE(e32, 1e-5);
  EXPECT_GE(e16 / e32, 8);
}

TEST(ConnectionOneForm, ChristoffelAndInnerProductAgree) {
  std::mt19937_64 rng(43);
  for (int k = 0; k < 10; ++k) {
    auto g = seed_no_d(k, 0.1);
    auto p = testutil::random_point(rng);
    auto j = JetEvaluator(g, 1).eval(p);
    auto a = connection_one_form(j.val, christoffel(g, p));
    auto b = connection_one_form_inner(j.val, metric_at(g, p), christoffel(g, p));
    EXPECT_NEAR(a.th, b.th, 1e-10);
    EXPECT_NEAR(a.ph, b.ph, 1e-10);
  }
  auto z = connection_one_form(minkowski(), {0, 2, 1, 0});
  EXPECT_EQ(z.th, 0);
  EXPECT_EQ(z.ph, 0);
}

TEST(StraightOut, RoutesAgree) {
  for (int k = 0; k < charts::num_seeds; ++k) {
    auto r = straight_out_residual(complete_chart(charts::seed(k, 0.1)), SphereGrid(0.3, 2.5, 8, 8));
    EXPECT_LE(r.max_diff, 1e-6 * std::max(1.0, r.max_closed)) << k;
  }
}

TEST(StraightOut, SphericalVanishes) {
  SphericalMetric sm{parse("1 + 0.3*exp(-r)"), parse("1 + 0.1*sin(t)")};
  auto r = straight_out_residual(sm.block(), SphereGrid(0.3, 2, 6, 6));
  EXPECT_LE(r.max_closed, 1e-12);
}

TEST(GaugeRotation, RemovesDivergence) {
  for (int k : {0, 4, 9}) {
    auto g = seed_no_d(k, 0.1);
    SphereOperator op(g, SphereGrid::uniform(0.3, 2, 32, 64));
    auto gr = gauge_rotation(g, op);
    EXPECT_GT(gr.div_before_max, 1e-4) << k;
    EXPECT_LE(gr.div_after_max, 1e-7) << k;
    EXPECT_LE(std::fabs(gr.solvability), 1e-6 * gr.alpha_l2) << k;
    EXPECT_LE(gr.div_after_sampled, 1e-4) << k;
  }
}

TEST(GaugeRotation, IncompatibleInputRejected) {
  SphereOperator op(minkowski(), SphereGrid::uniform(0, 1, 8, 16));
  OneForm al{std::vector<double>(op.grid().size(), 0.0), std::vector<double>(op.grid().size(), 0.0)};
  std::vector<double> div(op.grid().size(), 1.0);
  EXPECT_THROW(gauge_rotation(op, al, 1e-6, &div), CompatibilityError);
}

// Rotating by d psi changes the energy by int |d psi|^2 - 2 <alpha, d psi>.
TEST(GaugeRotation, EnergyIsQuadratic) {
  auto g = seed_no_d(2, 0.1);
  SphereOperator op(g, SphereGrid::uniform(0.3, 2, 16, 32));
  auto al = sample_connection_one_form(g, op.grid());
  auto psi = op.grid().sample([](const CoordinatePoint& p) { return 0.1 * std::cos(p.th); });
  auto rot = rotate(op, al, psi), dp = op.gradient(psi);
  double e0 = normal_energy(op, al), e1 = normal_energy(op, rot), edp = normal_energy(op, dp);
  auto sum = al;
  for (std::size_t k = 0; k < sum.th.size(); ++k) {
    sum.th[k] += dp.th[k];
    sum.ph[k] += dp.ph[k];
  }
  double cross = (normal_energy(op, sum) - e0 - edp) / 2;
  EXPECT_NEAR(e1, e0 + edp - 2 * cross, 1e-12 * (1 + e0));
}

// The gauge angle minimises E = int |alpha - d theta|^2 dA against random
// alternative rotations (the discrete cross term is truncation-sized).
TEST(GaugeRotation, MinimisesEnergy) {
  auto g = seed_no_d(3, 0.1);
  SphereOperator op(g, SphereGrid::uniform(0.3, 2, 32, 64));
  auto al = sample_connection_one_form(g, op.grid());
  auto gr = gauge_rotation(g, op);
  double e_star = normal_energy(op, gr.rotated);
  EXPECT_LT(e_star, normal_energy(op, al));
  std::mt19937_64 rng(47);
  for (int s = 0; s < 20; ++s) {
    double c1 = testutil::uni(rng, -1, 1), c2 = testutil::uni(rng, -1, 1), c3 = testutil::uni(rng, -1, 1);
    double amp = testutil::uni(rng, 1e-3, 0.1);
    auto psi = gr.theta;
    for (std::size_t k = 0; k < psi.size(); ++k) {
      auto p = op.grid().point(k);
      psi[k] += amp * (c1 * std::cos(p.th) + c2 * std::sin(p.th) * std::cos(p.ph) +
                       c3 * std::sin(p.th) * std::sin(p.th) * std::sin(2 * p.ph));
    }
    EXPECT_GT(normal_energy(op, rotate(op, al, psi)), e_star) << s;
  }
}

TEST(TimeFlat, SphericalChartsAreTimeFlat) {
  SphericalMetric sm{parse("1 + 0.3/r"), 1.0};
  SphereOperator op(sm.block(), SphereGrid::uniform(0, 2, 16, 32));
  auto rep = is_time_flat(sm.block(), op);
  EXPECT_TRUE(rep.time_flat);
  EXPECT_LE(rep.sup_norm, 1e-12);
}

TEST(Picard, SolvesSeeds) {
  for (int k : {0, 3, 7})
    for (double eps : {1e-3, 1e-1}) {
      auto g = seed_no_d(k, eps);
      SphereOperator op(g, SphereGrid::uniform(0.3, 2, 32, 64));
      auto s = solve_straight_out_d(g, op);
      EXPECT_TRUE(s.converged) << k << " " << s.message;
      EXPECT_TRUE(s.compatible) << k;
      EXPECT_LE(s.residual_max, 1e-6) << k;
      EXPECT_LE(std::fabs(s.compat), 1e-6 * std::max(s.compat_scale, 1e-300) + 1e-14);
    }
}

// A source with nonzero mean has no solution: reported, not hidden.
TEST(Picard, IncompatibleSourceReported) {
  SphereOperator op(minkowski(), SphereGrid::uniform(0, 1, 8, 16));
  SourceFn G = [](const std::vector<double>& d, const OneForm&) { return std::vector<double>(d.size(), 1.0); };
  auto s = picard_solve(op, G, std::vector<double>(op.grid().size(), 0.0));
  EXPECT_FALSE(s.compatible);
  EXPECT_FALSE(s.converged);
  EXPECT_NE(s.message.find("compatibility"), std::string::npos);
}

TEST(Picard, IterationCap) {
  auto g = seed_no_d(1, 0.1);
  SphereOperator op(g, SphereGrid::uniform(0.3, 2, 16, 32));
  PicardOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-300;
  auto s = solve_straight_out_d(g, op, {}, opt);
  EXPECT_FALSE(s.converged);
  EXPECT_EQ(s.log.size(), 1u);
}
