#pragma once

// Block Lorentzian metric of the IMCVF chart form
//
//        t      r     th    ph
//   t  -v^2     d     e     f
//   r    d     u^2    0     0
//   th   e      0     a     c
//   ph   f      0     c     b

#include <array>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "field_expr.hpp"

namespace imcvf {

using Mat4 = Eigen::Matrix4d;

enum Field : int { FV = 0, FD, FE, FF, FU, FA, FB, FC, NFIELDS };
inline constexpr std::array<const char*, NFIELDS> field_names{"v", "d", "e", "f", "u", "a", "b", "c"};

struct SingularMetric : std::domain_error {
  using std::domain_error::domain_error;
};

struct BlockMetric {
  std::array<FieldExpr, NFIELDS> fld;
  double theta_min = 1e-3;
  double r_min = 1.0;

  BlockMetric() = default;
  BlockMetric(FieldExpr v, FieldExpr d, FieldExpr e, FieldExpr f, FieldExpr u, FieldExpr a,
              FieldExpr b, FieldExpr c)
      : fld{std::move(v), std::move(d), std::move(e), std::move(f),
            std::move(u), std::move(a), std::move(b), std::move(c)} {}

  const FieldExpr& v() const { return fld[FV]; }
  const FieldExpr& d() const { return fld[FD]; }
  const FieldExpr& e() const { return fld[FE]; }
  const FieldExpr& f() const { return fld[FF]; }
  const FieldExpr& u() const { return fld[FU]; }
  const FieldExpr& a() const { return fld[FA]; }
  const FieldExpr& b() const { return fld[FB]; }
  const FieldExpr& c() const { return fld[FC]; }

  BlockMetric with(Field which, FieldExpr x) const {
    BlockMetric g = *this;
    g.fld[which] = std::move(x);
    return g;
  }
};

// u, v functions of (t, r) only.
struct SphericalMetric {
  FieldExpr u, v;
  BlockMetric block() const {
    auto r = FieldExpr::r(), s = sin(FieldExpr::th());
    return {v, 0.0, 0.0, 0.0, u, sqr(r), sqr(r) * sqr(s), 0.0};
  }
};

inline BlockMetric minkowski() { return SphericalMetric{1.0, 1.0}.block(); }

inline BlockMetric schwarzschild_areal(double m) {
  auto r = FieldExpr::r();
  auto s = 1.0 - 2.0 * m / r;
  return SphericalMetric{pow(s, -0.5), pow(s, 0.5)}.block();
}

// Pointwise values of the eight component functions.
struct FieldValues {
  std::array<double, NFIELDS> x{};
  double operator[](int i) const { return x[i]; }
  double& operator[](int i) { return x[i]; }
  double sphere_det() const { return x[FA] * x[FB] - x[FC] * x[FC]; }
};

inline FieldValues field_values(const BlockMetric& g, const CoordinatePoint& p) {
  FieldValues fv;
  for (int i = 0; i < NFIELDS; ++i) fv[i] = g.fld[i].eval(p);
  return fv;
}

inline Mat4 metric_matrix(const FieldValues& q) {
  Mat4 m;
  double v = q[FV], u = q[FU];
  m << -v * v, q[FD], q[FE], q[FF],
       q[FD], u * u, 0, 0,
       q[FE], 0, q[FA], q[FC],
       q[FF], 0, q[FC], q[FB];
  return m;
}

inline Mat4 metric_at(const BlockMetric& g, const CoordinatePoint& p) {
  return metric_matrix(field_values(g, p));
}

inline double det_closed(const FieldValues& q) {
  double u2 = q[FU] * q[FU], v2 = q[FV] * q[FV];
  double a = q[FA], b = q[FB], c = q[FC], d = q[FD], e = q[FE], f = q[FF];
  return (-u2 * v2 - d * d) * (a * b - c * c) + u2 * (2 * c * e * f - b * e * e - a * f * f);
}

inline double det_metric(const BlockMetric& g, const CoordinatePoint& p) {
  return det_closed(field_values(g, p));
}

inline Mat4 inverse_closed(const FieldValues& q) {
  double det = det_closed(q);
  if (std::fabs(det) < 1e-14) throw SingularMetric("metric determinant below 1e-14");
  double u2 = q[FU] * q[FU], v2 = q[FV] * q[FV];
  double a = q[FA], b = q[FB], c = q[FC], d = q[FD], e = q[FE], f = q[FF];
  double gs = a * b - c * c;
  double p = c * f - b * e, s = c * e - a * f;
  Mat4 m;
  m(0, 0) = u2 * gs;
  m(0, 1) = -d * gs;
  m(0, 2) = u2 * p;
  m(0, 3) = u2 * s;
  m(1, 1) = -v2 * gs + f * s + e * p;
  m(1, 2) = -d * p;
  m(1, 3) = -d * s;
  m(2, 2) = -u2 * v2 * b - u2 * f * f - b * d * d;
  m(2, 3) = u2 * v2 * c + u2 * e * f + c * d * d;
  m(3, 3) = -u2 * v2 * a - u2 * e * e - a * d * d;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) m(i, j) = m(j, i);
  return m / det;
}

inline Mat4 inverse_metric(const BlockMetric& g, const CoordinatePoint& p) {
  return inverse_closed(field_values(g, p));
}

// Jets of the eight component functions up to second order, evaluated through
// one compiled tape.  Order 1 skips the Hessians.
struct FieldJet {
  FieldValues val;
  std::array<std::array<double, 4>, NFIELDS> d1{};
  std::array<std::array<std::array<double, 4>, 4>, NFIELDS> d2{};
};

class JetEvaluator {
 public:
  JetEvaluator() = default;
  JetEvaluator(const BlockMetric& g, int order) : order_(order) {
    std::vector<FieldExpr> out;
    for (int f = 0; f < NFIELDS; ++f) {
      out.push_back(g.fld[f]);
      std::array<FieldExpr, 4> first;
      for (int k = 0; k < 4; ++k) {
        first[k] = g.fld[f].diff(k);
        out.push_back(first[k]);
      }
      if (order >= 2)
        for (int k = 0; k < 4; ++k)
          for (int l = k; l < 4; ++l) out.push_back(first[k].diff(l));
    }
    tape_ = Tape(out);
  }

  int order() const { return order_; }
  std::size_t tape_size() const { return tape_.size(); }

  FieldJet eval(const CoordinatePoint& p, std::vector<double>& scratch) const {
    std::vector<double> out(tape_.num_outputs());
    tape_.eval(p, scratch, out);
    FieldJet j;
    std::size_t i = 0;
    for (int f = 0; f < NFIELDS; ++f) {
      j.val[f] = out[i++];
      for (int k = 0; k < 4; ++k) j.d1[f][k] = out[i++];
      if (order_ >= 2)
        for (int k = 0; k < 4; ++k)
          for (int l = k; l < 4; ++l) j.d2[f][k][l] = j.d2[f][l][k] = out[i++];
    }
    return j;
  }
  FieldJet eval(const CoordinatePoint& p) const {
    std::vector<double> scratch;
    return eval(p, scratch);
  }

 private:
  int order_ = 1;
  Tape tape_;
};

// Metric components and their coordinate derivatives from a field jet:
// dg[k](i,j) = g_ij,k ; ddg[k][l](i,j) = g_ij,kl.
struct MetricJet {
  Mat4 g;
  std::array<Mat4, 4> dg;
  std::array<std::array<Mat4, 4>, 4> ddg;
};

inline MetricJet metric_jet(const FieldJet& j, int order = 2) {
  MetricJet m;
  m.g = metric_matrix(j.val);
  const double v = j.val[FV], u = j.val[FU];
  auto fill = [](Mat4& M, double gtt, double gtr, double gte, double gtf, double grr, double a,
                 double c, double b) {
    M << gtt, gtr, gte, gtf, gtr, grr, 0, 0, gte, 0, a, c, gtf, 0, c, b;
  };
  for (int k = 0; k < 4; ++k) {
    const auto& D = j.d1;
    fill(m.dg[k], -2 * v * D[FV][k], D[FD][k], D[FE][k], D[FF][k], 2 * u * D[FU][k], D[FA][k],
         D[FC][k], D[FB][k]);
  }
  if (order >= 2) {
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) {
        const auto& D = j.d1;
        const auto& H = j.d2;
        fill(m.ddg[k][l], -2 * (D[FV][k] * D[FV][l] + v * H[FV][k][l]), H[FD][k][l], H[FE][k][l],
             H[FF][k][l], 2 * (D[FU][k] * D[FU][l] + u * H[FU][k][l]), H[FA][k][l], H[FC][k][l],
             H[FB][k][l]);
      }
  }
  return m;
}

// Invariant checks on a sample grid (r x th x ph at fixed t).
struct SampleSpec {
  double t = 0;
  double r_lo = 1, r_hi = 10;
  int nr = 8, nth = 16, nph = 8;
  double theta_min = 1e-3;

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (int i = 0; i < nr; ++i) {
      double r = nr == 1 ? r_lo : r_lo + (r_hi - r_lo) * i / (nr - 1);
      for (int j = 0; j < nth; ++j) {
        double th = theta_min + (std::numbers::pi - 2 * theta_min) * (j + 0.5) / nth;
        for (int k = 0; k < nph; ++k) {
          double ph = 2 * std::numbers::pi * k / nph;
          fn(CoordinatePoint{t, r, th, ph});
        }
      }
    }
  }
};

struct SignatureReport {
  bool ok = true;
  std::string first_failure;
};

inline SignatureReport check_signature(const BlockMetric& g, const SampleSpec& s) {
  SignatureReport rep;
  s.for_each([&](const CoordinatePoint& p) {
    if (!rep.ok) return;
    auto q = field_values(g, p);
    std::string why;
    if (!(q[FU] > 0)) why = "u <= 0";
    else if (!(q[FV] > 0)) why = "v <= 0";
    else if (!(q.sphere_det() > 0)) why = "ab - c^2 <= 0";
    else if (!(det_closed(q) < 0)) why = "det >= 0";
    if (!why.empty()) {
      rep.ok = false;
      rep.first_failure = why + " at r=" + std::to_string(p.r) + " th=" + std::to_string(p.th) +
                          " ph=" + std::to_string(p.ph);
    }
  });
  return rep;
}

}  // namespace imcvf
