#pragma once

// Normal-bundle geometry of the coordinate spheres S_{t,r}.
//
// Frame: e_r = d_r / u (spacelike, unit), e_n = n / |n| (timelike, unit) with
//   n = d_t - (d/u^2) d_r + ((cf - be)/|g_S|) d_th + ((ce - af)/|g_S|) d_ph.
// The mean curvature vector is stored by coefficients,
//   H = H_r e_r + H_n e_n,   <H, H> = H_r^2 - H_n^2.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "curvature.hpp"
#include "parallel.hpp"
#include "sphere_grid.hpp"

namespace imcvf {

using Vec4 = Eigen::Vector4d;

struct DegenerateSphere : std::domain_error {
  using std::domain_error::domain_error;
};
struct NullMeanCurvature : std::domain_error {
  using std::domain_error::domain_error;
};

struct SphereFrame {
  Eigen::Matrix2d gS, gS_inv;
  double gS_det = 0;
  Vec4 n, e_r, e_n;
  double nn = 0;  // <n, n>, closed form |g| / (u^2 |g_S|)
};

inline SphereFrame sphere_frame(const FieldValues& q) {
  SphereFrame fr;
  const double a = q[FA], b = q[FB], c = q[FC], u = q[FU];
  fr.gS << a, c, c, b;
  fr.gS_det = a * b - c * c;
  if (!(fr.gS_det > 0)) throw DegenerateSphere("induced sphere metric is not positive definite");
  fr.gS_inv << b, -c, -c, a;
  fr.gS_inv /= fr.gS_det;
  const double e = q[FE], f = q[FF], d = q[FD];
  fr.n << 1, -d / (u * u), (c * f - b * e) / fr.gS_det, (c * e - a * f) / fr.gS_det;
  fr.nn = det_closed(q) / (u * u * fr.gS_det);
  if (!(fr.nn < 0)) throw DegenerateSphere("normal n is not timelike");
  fr.e_r << 0, 1 / u, 0, 0;
  fr.e_n = fr.n / std::sqrt(-fr.nn);
  return fr;
}

inline SphereFrame sphere_frame(const BlockMetric& g, const CoordinatePoint& p) {
  return sphere_frame(field_values(g, p));
}

struct MeanCurvatureDecomp {
  double H_r = 0, H_n = 0, star = 0;
  double norm2() const { return H_r * H_r - H_n * H_n; }
};

// (*) = b Gamma^t_thth - 2c Gamma^t_thph + a Gamma^t_phph, explicit in the
// chart functions and their first derivatives.  The last line is the
// -(u^2 |g_S| / 2|g|) d_t|g_S| contribution, which vanishes whenever the area
// form is t-independent.
inline double star_closed(const FieldJet& j) {
  const auto& q = j.val;
  const auto& D = j.d1;
  const double a = q[FA], b = q[FB], c = q[FC], d = q[FD], e = q[FE], f = q[FF];
  const double u2 = q[FU] * q[FU];
  const double gs = a * b - c * c, det = det_closed(q);
  auto dgs = [&](int k) { return D[FA][k] * b + a * D[FB][k] - 2 * c * D[FC][k]; };
  const double P = c * f - b * e, S = c * e - a * f;
  double brace = u2 * gs * (2 * b * D[FE][TH] - 2 * c * D[FE][PH] - 2 * c * D[FF][TH] + 2 * a * D[FF][PH]) +
                 d * gs * dgs(R) +
                 u2 * P * (D[FA][TH] * b - 2 * D[FA][PH] * c + 2 * a * D[FC][PH] - a * D[FB][TH]) +
                 u2 * S * (2 * b * D[FC][TH] - D[FA][PH] * b - 2 * D[FB][TH] * c + a * D[FB][PH]);
  brace -= u2 * gs * dgs(T);
  return brace / (2 * det);
}

inline double star_contraction(const FieldValues& q, const Christoffel& gam) {
  return q[FB] * gam[T](TH, TH) - 2 * q[FC] * gam[T](TH, PH) + q[FA] * gam[T](PH, PH);
}

// Closed-form decomposition: H_r = -(|g_S|)_r / (2u|g_S|) (= -2/(ru) when
// |g_S| = r^4 sin^2 th), H_n = (1/u) (-|g|)^{1/2} / |g_S|^{3/2} (*).
inline MeanCurvatureDecomp mean_curvature_closed(const FieldJet& j) {
  const auto& q = j.val;
  const auto& D = j.d1;
  const double a = q[FA], b = q[FB], c = q[FC], u = q[FU];
  const double gs = a * b - c * c;
  const double gs_r = D[FA][R] * b + a * D[FB][R] - 2 * c * D[FC][R];
  MeanCurvatureDecomp m;
  m.star = star_closed(j);
  m.H_r = -gs_r / (2 * u * gs);
  m.H_n = std::sqrt(-det_closed(q)) / (u * std::pow(gs, 1.5)) * m.star;
  return m;
}

// Trace formula H = g_S^{ij} (nabla_i d_j)^perp with exact Christoffels; the
// independent oracle for the closed forms above.
inline MeanCurvatureDecomp mean_curvature_trace(const FieldValues& q, const Mat4& g,
                                                const Christoffel& gam) {
  SphereFrame fr = sphere_frame(q);
  MeanCurvatureDecomp m;
  const int ang[2] = {TH, PH};
  Vec4 ger = g * fr.e_r, gen = g * fr.e_n;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      Vec4 nab;  // nabla_{d_i} d_k in coordinates
      for (int l = 0; l < 4; ++l) nab(l) = gam[l](ang[i], ang[k]);
      m.H_r += fr.gS_inv(i, k) * nab.dot(ger);
      m.H_n -= fr.gS_inv(i, k) * nab.dot(gen);
    }
  m.star = star_contraction(q, gam);
  return m;
}

inline MeanCurvatureDecomp mean_curvature_trace(const FieldJet& j) {
  MetricJet m = metric_jet(j, 1);
  Mat4 ginv = inverse_closed(j.val);
  return mean_curvature_trace(j.val, m.g, christoffel_from(m, ginv));
}

inline MeanCurvatureDecomp mean_curvature_vector(const BlockMetric& g, const CoordinatePoint& p) {
  return mean_curvature_closed(JetEvaluator(g, 1).eval(p));
}

inline double star_term(const BlockMetric& g, const CoordinatePoint& p) {
  return star_closed(JetEvaluator(g, 1).eval(p));
}

// I = -H / <H, H>
struct InverseMeanCurvature {
  double I_r = 0, I_n = 0;
};

inline InverseMeanCurvature inverse_mean_curvature_vector(const MeanCurvatureDecomp& m,
                                                          double tol = 1e-300) {
  double hh = m.norm2();
  if (std::fabs(hh) <= tol) throw NullMeanCurvature("mean curvature vector is null");
  return {-m.H_r / hh, -m.H_n / hh};
}

// ---------------------------------------------------------------------------
// Per-node survey of a whole sphere.

struct NodeData {
  FieldJet jet;
  SphereFrame frame;
  MeanCurvatureDecomp closed, trace;
  double area_density = 0;  // sqrt|g_S| / sin(th): integrate against grid weights
};

inline std::vector<NodeData> survey_sphere(const JetEvaluator& jets, const SphereGrid& grid) {
  std::vector<NodeData> out(grid.size());
  parallel_chunks(grid.size(), [&](std::size_t b, std::size_t e) {
    std::vector<double> scratch;
    for (std::size_t k = b; k < e; ++k) {
      auto p = grid.point(k);
      NodeData& nd = out[k];
      nd.jet = jets.eval(p, scratch);
      nd.frame = sphere_frame(nd.jet.val);
      nd.closed = mean_curvature_closed(nd.jet);
      nd.trace = mean_curvature_trace(nd.jet);
      nd.area_density = std::sqrt(nd.frame.gS_det) / std::sin(p.th);
    }
  });
  return out;
}

inline std::vector<NodeData> survey_sphere(const BlockMetric& g, const SphereGrid& grid) {
  return survey_sphere(JetEvaluator(g, 1), grid);
}

inline double sphere_area(const std::vector<NodeData>& nodes, const SphereGrid& grid) {
  double s = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) s += grid.weight(k) * nodes[k].area_density;
  return s;
}

// m_H = sqrt(|S|/16 pi) (1 - (1/16 pi) int <H,H> dA), <H,H> from the trace formula.
inline double hawking_mass(const std::vector<NodeData>& nodes, const SphereGrid& grid) {
  double area = 0, hh = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double w = grid.weight(k) * nodes[k].area_density;
    area += w;
    hh += w * nodes[k].trace.norm2();
  }
  if (!(area > 0)) throw DegenerateSphere("zero sphere area in Hawking-mass quadrature");
  const double sixteen_pi = 16 * std::numbers::pi;
  return std::sqrt(area / sixteen_pi) * (1 - hh / sixteen_pi);
}

inline double hawking_mass(const BlockMetric& g, const SphereGrid& grid) {
  return hawking_mass(survey_sphere(g, grid), grid);
}

// max |2 H_{e_r} (ab - c^2) - e_r(ab - c^2)|, H_{e_r} = -<H, e_r> = -H_r.
inline double first_variation_area_check(const std::vector<NodeData>& nodes) {
  double worst = 0;
  for (const auto& nd : nodes) {
    const auto& q = nd.jet.val;
    const auto& D = nd.jet.d1;
    double gs = q.sphere_det();
    double er_gs = (D[FA][R] * q[FB] + q[FA] * D[FB][R] - 2 * q[FC] * D[FC][R]) / q[FU];
    worst = std::max(worst, std::fabs(2 * (-nd.trace.H_r) * gs - er_gs));
  }
  return worst;
}

inline double first_variation_area_check(const BlockMetric& g, const SphereGrid& grid) {
  return first_variation_area_check(survey_sphere(g, grid));
}

// Laplace-Beltrami on S_{t,r} in the explicit form valid for |g_S| = r^4 sin^2 th:
//   (1/|g_S|) [ b psi_thth - 2c psi_thph + a psi_phph
//               + (b_th - b cot th - c_ph) psi_th + (-c_th + c cot th + a_ph) psi_ph ]
inline std::vector<double> sphere_laplacian(const BlockMetric& g, const SphereGrid& grid,
                                            const std::vector<double>& psi) {
  SphereFD fd(grid);
  auto p_t = fd.d_theta(psi, +1), p_p = fd.d_phi(psi);
  auto p_tt = fd.d2_theta(psi, +1), p_pp = fd.d2_phi(psi);
  auto p_tp = fd.d_phi(p_t);
  JetEvaluator jets(g, 1);
  std::vector<double> out(grid.size());
  parallel_chunks(grid.size(), [&](std::size_t b0, std::size_t e0) {
    std::vector<double> scratch;
    for (std::size_t k = b0; k < e0; ++k) {
      auto pt = grid.point(k);
      auto j = jets.eval(pt, scratch);
      const auto& q = j.val;
      const auto& D = j.d1;
      const double a = q[FA], b = q[FB], c = q[FC];
      const double cot = std::cos(pt.th) / std::sin(pt.th);
      out[k] = (b * p_tt[k] - 2 * c * p_tp[k] + a * p_pp[k] +
                (D[FB][TH] - b * cot - D[FC][PH]) * p_t[k] +
                (-D[FC][TH] + c * cot + D[FA][PH]) * p_p[k]) /
               (a * b - c * c);
    }
  });
  return out;
}

}  // namespace imcvf
