#pragma once

// Riemannian side: radially symmetric conformally flat 3-metrics g = u^4 delta,
// their ADM mass, the conformal change of mass, mean curvature of coordinate
// spheres and the large-sphere limit of the Hawking mass.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "field_expr.hpp"
#include "sphere_grid.hpp"

namespace imcvf {

struct NonDecayingMetric : std::domain_error {
  using std::domain_error::domain_error;
};

class ConformalMetric3 {
 public:
  explicit ConformalMetric3(FieldExpr u3) : u_(std::move(u3)), ur_(u_.diff(R)) {
    for (int k = 0; k < 4; ++k)
      if (k != R && !u_.diff(k).is_const(0))
        throw std::invalid_argument("conformal factor must depend on r only");
    double far = u(1e6);
    if (!(std::fabs(far - 1) <= 1e-3)) throw NonDecayingMetric("conformal factor does not tend to 1");
  }

  const FieldExpr& factor() const { return u_; }
  double u(double r) const {
    double x = u_.eval(at(r));
    if (!(x > 0)) throw std::domain_error("conformal factor must be positive");
    return x;
  }
  double u_r(double r) const { return ur_.eval(at(r)); }

 private:
  FieldExpr u_, ur_;
  static CoordinatePoint at(double r) { return {0, r, std::numbers::pi / 2, 0}; }
};

// Least-squares fit m(r) = m_inf + c / r over the last three radii.
struct Extrapolation {
  double m_inf = 0, c = 0;
};

inline Extrapolation extrapolate_inverse_r(const std::vector<double>& radii, const std::vector<double>& m) {
  const std::size_t n = radii.size();
  if (n < 2) throw std::invalid_argument("extrapolation needs at least two radii");
  const std::size_t k0 = n >= 3 ? n - 3 : 0;
  Eigen::MatrixXd A(n - k0, 2);
  Eigen::VectorXd y(n - k0);
  for (std::size_t k = k0; k < n; ++k) {
    A(k - k0, 0) = 1;
    A(k - k0, 1) = 1 / radii[k];
    y(k - k0) = m[k];
  }
  Eigen::Vector2d x = A.colPivHouseholderQr().solve(y);
  return {x(0), x(1)};
}

struct MassTable {
  std::vector<double> radii, values;
  double extrapolated = 0;
  double slope = 0;  // c in m_inf + c / r
  bool decaying = true;
};

inline void check_radii(const std::vector<double>& radii) {
  if (radii.empty()) throw std::invalid_argument("no radii");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0)) throw std::invalid_argument("radii must be positive");
    if (k && !(radii[k] > radii[k - 1])) throw std::invalid_argument("radii must be increasing");
  }
}

// (1/16 pi) int sum_i (g_ij,i - g_ii,j) nu^j dS over the flat coordinate
// sphere.  With g_ij = u^4 delta_ij and d_j(u^4) = 4u^3 u_r x_j / r the
// integrand is -8 u^3 u_r; it is still integrated node by node.
inline double adm_integral(const ConformalMetric3& g3, double r, int nth = 8, int nph = 8) {
  SphereGrid grid(0, r, nth, nph);
  const double u = g3.u(r), ur = g3.u_r(r);
  std::vector<double> f(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto p = grid.point(k);
    double n[3] = {std::sin(p.th) * std::cos(p.ph), std::sin(p.th) * std::sin(p.ph), std::cos(p.th)};
    double s = 0;
    for (int j = 0; j < 3; ++j) {
      double dj = 4 * u * u * u * ur * n[j];  // d_j(u^4)
      // sum_i g_ij,i = d_j(u^4);  sum_i g_ii,j = 3 d_j(u^4)
      s += (dj - 3 * dj) * n[j];
    }
    f[k] = s * r * r;
  }
  return grid.integrate(f) / (16 * std::numbers::pi);
}

inline MassTable finish_table(std::vector<double> radii, std::vector<double> values) {
  MassTable t;
  auto fit = extrapolate_inverse_r(radii, values);
  t.extrapolated = fit.m_inf;
  t.slope = fit.c;
  // values should settle; a growing tail means the metric is not asymptotically flat
  const std::size_t n = values.size();
  if (n >= 3) {
    double d1 = std::fabs(values[n - 1] - values[n - 2]), d0 = std::fabs(values[n - 2] - values[n - 3]);
    t.decaying = !(d1 > d0 * 1.01 && d1 > 1e-12) && std::isfinite(values[n - 1]);
  }
  t.radii = std::move(radii);
  t.values = std::move(values);
  return t;
}

inline MassTable adm_mass(const ConformalMetric3& g3, const std::vector<double>& radii) {
  check_radii(radii);
  std::vector<double> m;
  for (double r : radii) m.push_back(adm_integral(g3, r));
  return finish_table(radii, m);
}

// m(u^4 g) - m(g) = -(1/2 pi) lim int u_r dS  (flat g: dS = r^2 sin th).
inline MassTable adm_conformal_delta(const FieldExpr& u3, const std::vector<double>& radii) {
  check_radii(radii);
  ConformalMetric3 g3(u3);
  std::vector<double> m;
  for (double r : radii) m.push_back(-(1 / (2 * std::numbers::pi)) * 4 * std::numbers::pi * r * r * g3.u_r(r));
  return finish_table(radii, m);
}

inline double conformal_sphere_mean_curvature(const ConformalMetric3& g3, double r) {
  const double u = g3.u(r);
  return (2 / r + 4 * g3.u_r(r) / u) / (u * u);
}

// Round sphere of areal radius r u^2.
inline double conformal_sphere_area(const ConformalMetric3& g3, double r) {
  const double u = g3.u(r);
  return 4 * std::numbers::pi * r * r * u * u * u * u;
}

inline double riemannian_hawking_mass(const ConformalMetric3& g3, double r) {
  const double A = conformal_sphere_area(g3, r), H = conformal_sphere_mean_curvature(g3, r);
  const double s = 16 * std::numbers::pi;
  return std::sqrt(A / s) * (1 - H * H * A / s);
}

struct HawkingAdmRow {
  double r = 0, m_H = 0, gap = 0;
};

struct HawkingAdmTable {
  std::vector<HawkingAdmRow> rows;
  double m_adm = 0;
  bool gap_nonincreasing = true;
};

// gap_slack: allowed increase of |m_H - m_ADM| between consecutive radii.
inline HawkingAdmTable hawking_to_adm_convergence(const ConformalMetric3& g3,
                                                  const std::vector<double>& radii, double m_adm,
                                                  double gap_slack = 1e-12) {
  check_radii(radii);
  HawkingAdmTable t;
  t.m_adm = m_adm;
  for (double r : radii) {
    HawkingAdmRow row{r, riemannian_hawking_mass(g3, r), 0};
    row.gap = std::fabs(row.m_H - m_adm);
    if (!t.rows.empty() && row.gap > t.rows.back().gap + gap_slack) t.gap_nonincreasing = false;
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace imcvf
