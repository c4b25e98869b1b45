#pragma once

// Christoffel symbols, Ricci / scalar / Einstein curvature from exact jets.
//
// Derivatives of Gamma come from the product rule with
//   d_m g^{kl} = -g^{ka} (d_m g_ab) g^{bl},
// so every input is an exact symbolic derivative of the chart functions; no
// finite differences anywhere in this file.

#include <array>
#include <cmath>

#include "metric_chart.hpp"

namespace imcvf {

// gam[k](i,j) = Gamma^k_ij
using Christoffel = std::array<Mat4, 4>;
// dgam[m][k](i,j) = Gamma^k_ij,m
using ChristoffelDeriv = std::array<Christoffel, 4>;

struct CurvaturePack {
  Mat4 ric;
  double R = 0;
  Mat4 G;
};

struct PointGeometry {
  MetricJet jet;
  Mat4 ginv;
  Christoffel gam;
  ChristoffelDeriv dgam;  // only filled by full_geometry()
};

namespace detail {

// Gamma_{l,ij} = 1/2 (g_jl,i + g_il,j - g_ij,l)
inline double gamma_lower(const MetricJet& m, int l, int i, int j) {
  return 0.5 * (m.dg[i](j, l) + m.dg[j](i, l) - m.dg[l](i, j));
}

}  // namespace detail

inline Christoffel christoffel_from(const MetricJet& m, const Mat4& ginv) {
  std::array<Mat4, 4> low;  // low[l](i,j)
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) low[l](i, j) = low[l](j, i) = detail::gamma_lower(m, l, i, j);
  Christoffel gam;
  for (int k = 0; k < 4; ++k) {
    gam[k].setZero();
    for (int l = 0; l < 4; ++l) gam[k] += ginv(k, l) * low[l];
  }
  return gam;
}

inline PointGeometry point_geometry(const FieldJet& j, bool second_order) {
  PointGeometry pg;
  pg.jet = metric_jet(j, second_order ? 2 : 1);
  pg.ginv = inverse_closed(j.val);
  pg.gam = christoffel_from(pg.jet, pg.ginv);
  if (!second_order) return pg;

  const MetricJet& m = pg.jet;
  std::array<Mat4, 4> low;
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 4; ++i)
      for (int jj = i; jj < 4; ++jj) low[l](i, jj) = low[l](jj, i) = detail::gamma_lower(m, l, i, jj);

  for (int s = 0; s < 4; ++s) {
    Mat4 dginv = -pg.ginv * m.dg[s] * pg.ginv;
    std::array<Mat4, 4> dlow;
    for (int l = 0; l < 4; ++l)
      for (int i = 0; i < 4; ++i)
        for (int jj = i; jj < 4; ++jj)
          dlow[l](i, jj) = dlow[l](jj, i) =
              0.5 * (m.ddg[i][s](jj, l) + m.ddg[jj][s](i, l) - m.ddg[l][s](i, jj));
    for (int k = 0; k < 4; ++k) {
      pg.dgam[s][k].setZero();
      for (int l = 0; l < 4; ++l) pg.dgam[s][k] += dginv(k, l) * low[l] + pg.ginv(k, l) * dlow[l];
    }
  }
  return pg;
}

// Ric_ij = Gamma^k_ij,k - Gamma^k_ik,j + Gamma^k_km Gamma^m_ij - Gamma^k_jm Gamma^m_ik
inline CurvaturePack curvature_from(const PointGeometry& pg) {
  CurvaturePack cp;
  const auto& G = pg.gam;
  const auto& dG = pg.dgam;
  std::array<double, 4> trace{};  // Gamma^k_km
  for (int m = 0; m < 4; ++m)
    for (int k = 0; k < 4; ++k) trace[m] += G[k](k, m);
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += dG[k][k](i, j) - dG[j][k](i, k);
      for (int m = 0; m < 4; ++m) s += trace[m] * G[m](i, j);
      for (int k = 0; k < 4; ++k)
        for (int m = 0; m < 4; ++m) s -= G[k](j, m) * G[m](i, k);
      cp.ric(i, j) = cp.ric(j, i) = s;
    }
  cp.R = (pg.ginv.cwiseProduct(cp.ric)).sum();
  cp.G = cp.ric - 0.5 * cp.R * pg.jet.g;
  return cp;
}

// Point-at-a-time convenience API.  Builds a tape per engine; reuse the engine
// across points.
class CurvatureEngine {
 public:
  explicit CurvatureEngine(const BlockMetric& g, int order = 2) : jets_(g, order) {}

  PointGeometry geometry(const CoordinatePoint& p) const {
    std::vector<double> scratch;
    return point_geometry(jets_.eval(p, scratch), jets_.order() >= 2);
  }
  PointGeometry geometry(const CoordinatePoint& p, std::vector<double>& scratch) const {
    return point_geometry(jets_.eval(p, scratch), jets_.order() >= 2);
  }
  FieldJet jet(const CoordinatePoint& p, std::vector<double>& scratch) const {
    return jets_.eval(p, scratch);
  }
  Christoffel christoffel(const CoordinatePoint& p) const { return geometry(p).gam; }
  CurvaturePack curvature(const CoordinatePoint& p) const { return curvature_from(geometry(p)); }

 private:
  JetEvaluator jets_;
};

inline Christoffel christoffel(const BlockMetric& g, const CoordinatePoint& p) {
  return CurvatureEngine(g, 1).christoffel(p);
}

inline CurvaturePack curvature_pack(const BlockMetric& g, const CoordinatePoint& p) {
  return CurvatureEngine(g, 2).curvature(p);
}

// ---------------------------------------------------------------------------
// Spherically symmetric closed forms (u, v functions of t and r).

struct RadialJet {
  double u, ut, ur, utt, urr, utr;
  double v, vt, vr, vtt, vrr, vtr;
  double r, th;
};

inline RadialJet radial_jet(const FieldExpr& u, const FieldExpr& v, const CoordinatePoint& p) {
  auto ut = u.diff(T), ur = u.diff(R), vt = v.diff(T), vr = v.diff(R);
  return {u.eval(p),          ut.eval(p),          ur.eval(p),          ut.diff(T).eval(p),
          ur.diff(R).eval(p), ut.diff(R).eval(p),  v.eval(p),           vt.eval(p),
          vr.eval(p),         vt.diff(T).eval(p),  vr.diff(R).eval(p),  vt.diff(R).eval(p),
          p.r,                p.th};
}

struct SphericalClosedForms {
  Christoffel gam;
  Mat4 ric, G;
  double R;
};

inline SphericalClosedForms spherical_closed_forms(const RadialJet& q) {
  SphericalClosedForms s;
  const double u = q.u, v = q.v, r = q.r;
  const double u2 = u * u, u3 = u2 * u, v2 = v * v, v3 = v2 * v;
  const double sn = std::sin(q.th), cs = std::cos(q.th), sn2 = sn * sn;
  for (auto& m : s.gam) m.setZero();

  s.gam[T](T, T) = q.vt / v;
  s.gam[T](T, R) = s.gam[T](R, T) = q.vr / v;
  s.gam[T](R, R) = u * q.ut / v2;

  s.gam[R](T, T) = v * q.vr / u2;
  s.gam[R](T, R) = s.gam[R](R, T) = q.ut / u;
  s.gam[R](R, R) = q.ur / u;
  s.gam[R](TH, TH) = -r / u2;
  s.gam[R](PH, PH) = -r * sn2 / u2;

  s.gam[TH](R, TH) = s.gam[TH](TH, R) = 1 / r;
  s.gam[TH](PH, PH) = -sn * cs;

  s.gam[PH](R, PH) = s.gam[PH](PH, R) = 1 / r;
  s.gam[PH](TH, PH) = s.gam[PH](PH, TH) = cs / sn;

  s.ric.setZero();
  s.ric(T, T) = (v * q.vrr + 2 / r * v * q.vr) / u2 - q.ur / u3 * v * q.vr +
                (q.ut * q.vt / v - q.utt) / u;
  s.ric(T, R) = s.ric(R, T) = 2 / r * q.ut / u;
  s.ric(R, R) = -q.vrr / v + 2 / r * q.ur / u - q.vt / v3 * u * q.ut +
                (u * q.utt / v + q.vr * q.ur / u) / v;
  s.ric(TH, TH) = (1 - 1 / u2) + r * q.ur / u3 - r * q.vr / (v * u2);
  s.ric(PH, PH) = sn2 * s.ric(TH, TH);

  s.R = -2 / u2 * (q.vrr / v) + 2 * (q.ur / u3) * (q.vr / v) - 2 * (q.ut / u) * (q.vt / v3) +
        2 * (q.utt / u) / v2 + 4 / r * (q.ur / u3) - 4 / r / u2 * (q.vr / v) +
        2 / (r * r) * (1 - 1 / u2);

  s.G.setZero();
  s.G(T, T) = 2 / r * (q.ur / u3) * v2 + v2 / (r * r) * (1 - 1 / u2);
  s.G(T, R) = s.G(R, T) = 2 / r * (q.ut / u);
  s.G(R, R) = 2 / r * (q.vr / v) - u2 / (r * r) + 1 / (r * r);
  s.G(TH, TH) = r * r / u2 * (q.vrr / v) - r * r * (q.ur / u3) * (q.vr / v) +
                r * r * (q.ut / u) * (q.vt / v3) - r * r * (q.utt / u) / v2 - r * q.ur / u3 +
                r / u2 * (q.vr / v);
  s.G(PH, PH) = sn2 * s.G(TH, TH);
  return s;
}

inline double scalar_curvature_spherical(const FieldExpr& u, const FieldExpr& v,
                                         const CoordinatePoint& p) {
  return spherical_closed_forms(radial_jet(u, v, p)).R;
}

// Scalar curvature after a conformal change: g~ = u^{4/(n-2)} g (n >= 3),
// g~ = e^{2u} g (n = 2).
inline double conformal_scalar(double R, double u_val, double lap_u, int n) {
  if (n < 2) throw std::invalid_argument("conformal_scalar: dimension must be >= 2");
  if (n == 2) return std::exp(-2 * u_val) * (R - 2 * lap_u);
  if (!(u_val > 0)) throw std::invalid_argument("conformal_scalar: u must be positive");
  double nn = n;
  return std::pow(u_val, -(nn + 2) / (nn - 2)) * (R * u_val - 4 * (nn - 1) / (nn - 2) * lap_u);
}

}  // namespace imcvf
