#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "imcvf/charts.hpp"
#include "imcvf/metric_chart.hpp"
#include "test_util.hpp"

using namespace imcvf;
using std::numbers::pi;

namespace {

// Random chart in block layout with a valid Lorentzian signature at the test points.
BlockMetric random_block(std::mt19937_64& rng) {
  auto ff = charts::seed(std::uniform_int_distribution<int>(0, 9)(rng), testutil::uni(rng, 0.05, 0.3));
  auto g = complete_chart(ff, false);
  return g.with(FD, testutil::uni(rng, -0.5, 0.5) * sin(FieldExpr::th()) * cos(FieldExpr::ph() + FieldExpr::r()));
}

double cofactor_det(const Mat4& m) {
  double s = 0;
  for (int j = 0; j < 4; ++j) {
    Eigen::Matrix3d minor;
    for (int r = 1; r < 4; ++r)
      for (int c = 0, cc = 0; c < 4; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    s += (j % 2 ? -1 : 1) * m(0, j) * minor.determinant();
  }
  return s;
}

}  // namespace

TEST(MetricAt, Minkowski) {
  Mat4 m = metric_at(minkowski(), {0, 2, pi / 2, 0});
  Mat4 expect = Eigen::Vector4d(-1, 1, 4, 4).asDiagonal();
  EXPECT_LE((m - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MetricAt, SchwarzschildAreal) {
  Mat4 m = metric_at(schwarzschild_areal(1.0), {0, 4, 1.0, 0});
  EXPECT_NEAR(m(T, T), -0.5, 1e-15);
  EXPECT_NEAR(m(R, R), 2.0, 1e-15);
}

TEST(MetricAt, OffBlockZeros) {
  auto g = complete_chart(charts::seed(0, 0.1), false).with(FC, 0.0).with(FE, 0.0).with(FF, 0.0);
  Mat4 m = metric_at(g, {0, 2, 1, 1});
  EXPECT_EQ(m(T, TH), 0);
  EXPECT_EQ(m(T, PH), 0);
  EXPECT_EQ(m(TH, PH), 0);
  EXPECT_EQ(m(R, TH), 0);
  EXPECT_EQ(m(R, PH), 0);
}

TEST(DetMetric, Examples) {
  EXPECT_NEAR(det_metric(minkowski(), {0, 1, pi / 2, 0}), -1.0, 1e-15);
  SphericalMetric sm{parse("1+0.1*r"), parse("2-exp(-r)")};
  CoordinatePoint p{0, 2.5, 0.7, 0};
  double u = sm.u.eval(p), v = sm.v.eval(p);
  EXPECT_NEAR(det_metric(sm.block(), p),
              -u * u * v * v * std::pow(p.r, 4) * std::pow(std::sin(p.th), 2), 1e-12);
}

TEST(DetMetric, ClosedFormMatchesCofactorExpansion) {
  std::mt19937_64 rng(3);
  for (int s = 0; s < 100; ++s) {
    auto g = random_block(rng);
    auto p = testutil::random_point(rng);
    double closed = det_metric(g, p), brute = cofactor_det(metric_at(g, p));
    EXPECT_LE(std::fabs(closed - brute), 1e-10 * std::fabs(brute));
  }
}

TEST(InverseMetric, Minkowski) {
  CoordinatePoint p{0, 2, 0.9, 0.3};
  Mat4 gi = inverse_metric(minkowski(), p);
  double s2 = std::pow(std::sin(p.th), 2);
  Mat4 expect = Eigen::Vector4d(-1, 1, 0.25, 0.25 / s2).asDiagonal();
  EXPECT_LE((gi - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(InverseMetric, OnlyShiftTerm) {
  auto g = minkowski().with(FD, parse("0.3*r"));
  CoordinatePoint p{0, 2, 1.1, 0};
  auto q = field_values(g, p);
  double gs = q.sphere_det();
  EXPECT_NEAR(inverse_metric(g, p)(T, R), -q[FD] * gs / det_closed(q), 1e-14);
}

TEST(InverseMetric, ClosedFormMatchesNumericInverse) {
  std::mt19937_64 rng(5);
  for (int s = 0; s < 100; ++s) {
    auto g = random_block(rng);
    auto p = testutil::random_point(rng);
    Mat4 m = metric_at(g, p), gi = inverse_metric(g, p);
    EXPECT_LE((gi - m.inverse()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((m * gi - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(InverseMetric, SingularThrows) {
  auto g = minkowski().with(FU, 0.0);
  EXPECT_THROW(inverse_metric(g, {0, 2, 1, 0}), SingularMetric);
}

TEST(Signature, LorentzianOnSamples) {
  std::mt19937_64 rng(9);
  for (int s = 0; s < 50; ++s) {
    auto g = random_block(rng);
    auto p = testutil::random_point(rng);
    Eigen::SelfAdjointEigenSolver<Mat4> es(metric_at(g, p));
    auto ev = es.eigenvalues();
    EXPECT_LT(ev(0), 0);
    EXPECT_GT(ev(1), 0);
  }
  EXPECT_TRUE(check_signature(complete_chart(charts::seed(2, 0.1)), SampleSpec{}).ok);
  EXPECT_FALSE(check_signature(minkowski().with(FA, -1.0), SampleSpec{}).ok);
}

TEST(Jets, MatchDirectDerivatives) {
  auto g = complete_chart(charts::seed(4, 0.1));
  JetEvaluator je(g, 2);
  CoordinatePoint p{0.2, 2.3, 1.2, 0.4};
  auto j = je.eval(p);
  for (int f = 0; f < NFIELDS; ++f)
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(j.d1[f][k], g.fld[f].diff(k).eval(p), 1e-12 * (1 + std::fabs(j.d1[f][k])));
      for (int l = 0; l < 4; ++l)
        EXPECT_NEAR(j.d2[f][k][l], g.fld[f].diff(k).diff(l).eval(p),
                    1e-11 * (1 + std::fabs(j.d2[f][k][l])));
    }
}
