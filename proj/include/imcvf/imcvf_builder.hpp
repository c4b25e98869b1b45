#pragma once

// Construction and validation of IMCVF coordinate charts.
//
// The four chart conditions: <d_r, d_th> = 0, <d_r, d_ph> = 0 (both built
// into the block layout), ab - c^2 = r^4 sin^2 th, and (*) = 0, i.e. the mean
// curvature vector of S_{t,r} has no e_n part.  Given a, c, e, f, u, v the
// third condition fixes b and the fourth fixes d algebraically.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "curvature.hpp"
#include "sphere_geometry.hpp"

namespace imcvf {

enum class PoleStrategy { Window, SphericalCollar, None };

inline const char* to_string(PoleStrategy p) {
  switch (p) {
    case PoleStrategy::Window: return "window";
    case PoleStrategy::SphericalCollar: return "spherical-collar";
    default: return "none";
  }
}

// Pole window multiplying every non-spherical perturbation.
//   Window:          sin^4 keeps c, e, f = O(sin^4), so d = O(sin^2), d_th = O(sin).
//   SphericalCollar: exp(1 - 1/sin^2) is flat to all orders at the poles, so
//                    the chart is spherically symmetric there up to roundoff.
inline FieldExpr pole_window(PoleStrategy s = PoleStrategy::Window) {
  auto sn = sin(FieldExpr::th());
  switch (s) {
    case PoleStrategy::Window: return pow(sn, 4);
    case PoleStrategy::SphericalCollar: return exp(1.0 - 1.0 / sqr(sn));
    default: return 1.0;
  }
}

inline FieldExpr area_form_sq() {
  auto r = FieldExpr::r();
  return pow(r, 4) * sqr(sin(FieldExpr::th()));
}

// b from ab - c^2 = r^4 sin^2 th.
inline FieldExpr area_constrained_b(const FieldExpr& a, const FieldExpr& c) {
  return (area_form_sq() + sqr(c)) / a;
}

inline FieldExpr solve_d(const FieldExpr& a, const FieldExpr& b, const FieldExpr& c,
                         const FieldExpr& e, const FieldExpr& f, const FieldExpr& u) {
  auto r = FieldExpr::r();
  auto s2 = sqr(sin(FieldExpr::th()));
  auto D = [](const FieldExpr& x, int k) { return x.diff(k); };
  FieldExpr area = pow(r, 4) * s2;
  FieldExpr br1 = 2.0 * b * D(e, TH) - 2.0 * c * D(e, PH) - 2.0 * c * D(f, TH) + 2.0 * a * D(f, PH);
  FieldExpr br2 = D(a, TH) * b - 2.0 * D(a, PH) * c + 2.0 * a * D(c, PH) - a * D(b, TH);
  FieldExpr br3 = 2.0 * b * D(c, TH) - D(a, PH) * b - 2.0 * D(b, TH) * c + a * D(b, PH);
  FieldExpr P = c * f - b * e, S = c * e - a * f;
  FieldExpr brace = br1 + P / area * br2 + S / area * br3;
  return -(sqr(u) / (4.0 * pow(r, 3) * s2)) * brace;
}

// The six free functions; b and d are derived.
struct FreeFunctions {
  FieldExpr a, c, e, f, u, v;
};

inline BlockMetric complete_chart(const FreeFunctions& ff, bool with_d = true) {
  FieldExpr b = area_constrained_b(ff.a, ff.c);
  FieldExpr d = with_d ? solve_d(ff.a, b, ff.c, ff.e, ff.f, ff.u) : FieldExpr(0.0);
  return BlockMetric(ff.v, d, ff.e, ff.f, ff.u, ff.a, b, ff.c);
}

// ---------------------------------------------------------------------------

struct ChartTolerances {
  double cond3 = 1e-10;
  double cond4 = 1e-8;
};

struct ChartReport {
  double cond1_max = 0, cond2_max = 0;  // structural zeros of the layout
  double cond3_max = 0;                 // max |ab - c^2 - r^4 sin^2| / max(1, r^4)
  double cond4_max = 0;                 // max |(*)|
  double cond4_Hn_max = 0;              // max |H_n| from the trace formula
  double Hr_dev_max = 0;                // max |H_r + 2/(ru)|
  bool signature_ok = true;
  std::string signature_note;
  PoleStrategy pole_strategy = PoleStrategy::Window;
  std::size_t samples = 0;
  bool pass = false;
};

inline ChartReport validate_chart(const BlockMetric& g, const SampleSpec& spec,
                                  const ChartTolerances& tol = {},
                                  PoleStrategy pole = PoleStrategy::Window) {
  ChartReport rep;
  rep.pole_strategy = pole;
  auto sig = check_signature(g, spec);
  rep.signature_ok = sig.ok;
  rep.signature_note = sig.first_failure;
  if (!sig.ok) return rep;

  std::vector<CoordinatePoint> pts;
  spec.for_each([&](const CoordinatePoint& p) { pts.push_back(p); });
  rep.samples = pts.size();
  JetEvaluator jets(g, 1);
  std::vector<std::array<double, 4>> res(pts.size());
  parallel_chunks(pts.size(), [&](std::size_t b, std::size_t e) {
    std::vector<double> scratch;
    for (std::size_t k = b; k < e; ++k) {
      const auto& p = pts[k];
      auto j = jets.eval(p, scratch);
      double s = std::sin(p.th);
      double area = std::pow(p.r, 4) * s * s;
      auto closed = mean_curvature_closed(j);
      auto trace = mean_curvature_trace(j);
      res[k] = {std::fabs(j.val.sphere_det() - area) / std::max(1.0, std::pow(p.r, 4)),
                std::fabs(closed.star), std::fabs(trace.H_n),
                std::fabs(trace.H_r + 2 / (p.r * j.val[FU]))};
    }
  });
  for (const auto& x : res) {
    rep.cond3_max = std::max(rep.cond3_max, x[0]);
    rep.cond4_max = std::max(rep.cond4_max, x[1]);
    rep.cond4_Hn_max = std::max(rep.cond4_Hn_max, x[2]);
    rep.Hr_dev_max = std::max(rep.Hr_dev_max, x[3]);
  }
  rep.pass = rep.cond3_max <= tol.cond3 && rep.cond4_max <= tol.cond4 &&
             rep.cond4_Hn_max <= tol.cond4;
  return rep;
}

// ---------------------------------------------------------------------------
// Radial flow as IMCVF: r^2 = e^s.

inline double imcvf_flow_param(double r) {
  if (!(r > 0)) throw std::domain_error("flow parameter needs r > 0");
  return 2 * std::log(r);
}
inline double imcvf_flow_radius(double s) { return std::exp(s / 2); }

struct MonotonicitySample {
  double r = 0, s = 0;
  double m_H = 0;
  double dm_ds = 0;      // centred difference in s
  double G_tt = 0;       // generic curvature engine
  double I_mH = 0;       // (r/2)[(1 - 1/u^2)/2 + r u_r / u^3]
  double I_mH_from_G = 0;  // (r/2)(r^2 / 2v^2) G_tt
};

struct MonotonicityReport {
  std::vector<MonotonicitySample> samples;
  double identity_max = 0;        // max |I_mH - I_mH_from_G|
  double worst_violation = 0;     // max over G_tt >= 0 of -(dm_ds) / (1 + |m_H|)
  bool monotone = true;
};

inline MonotonicityReport monotonicity_check_spherical(const FieldExpr& u, const FieldExpr& v,
                                                       double t, double r_lo, double r_hi, int N,
                                                       double h = 1e-4) {
  if (N < 2 || !(r_lo > 0) || !(r_hi > r_lo)) throw std::invalid_argument("bad radial range");
  BlockMetric g = SphericalMetric{u, v}.block();
  CurvatureEngine eng(g, 2);
  FieldExpr ur = u.diff(R);
  auto mass_at = [&](double r) {
    SphereGrid grid(t, r, 4, 4);
    return hawking_mass(g, grid);
  };
  MonotonicityReport rep;
  for (int k = 0; k < N; ++k) {
    MonotonicitySample s;
    s.r = r_lo + (r_hi - r_lo) * k / (N - 1);
    s.s = imcvf_flow_param(s.r);
    CoordinatePoint p{t, s.r, std::numbers::pi / 2, 0};
    s.m_H = mass_at(s.r);
    s.dm_ds = (mass_at(imcvf_flow_radius(s.s + h)) - mass_at(imcvf_flow_radius(s.s - h))) / (2 * h);
    s.G_tt = eng.curvature(p).G(T, T);
    double uu = u.eval(p), vv = v.eval(p);
    s.I_mH = s.r / 2 * (0.5 * (1 - 1 / (uu * uu)) + s.r * ur.eval(p) / (uu * uu * uu));
    s.I_mH_from_G = s.r / 2 * (s.r * s.r / (2 * vv * vv)) * s.G_tt;
    rep.identity_max = std::max(rep.identity_max, std::fabs(s.I_mH - s.I_mH_from_G));
    if (s.G_tt >= 0) {
      double viol = -s.dm_ds / (1 + std::fabs(s.m_H));
      rep.worst_violation = std::max(rep.worst_violation, viol);
      if (viol > 1e-8) rep.monotone = false;
    }
    rep.samples.push_back(s);
  }
  return rep;
}

// Pole behaviour of d: max |d| and |d_th| on the rings th = theta and pi - theta.
struct PoleSample {
  double theta = 0, d_max = 0, dth_max = 0;
};

inline std::vector<PoleSample> pole_profile(const BlockMetric& g, double t, double r,
                                            const std::vector<double>& thetas, int nph = 16) {
  FieldExpr d = g.d(), dth = g.d().diff(TH);
  std::vector<PoleSample> out;
  for (double th : thetas) {
    PoleSample s{th, 0, 0};
    for (int j = 0; j < nph; ++j) {
      double ph = 2 * std::numbers::pi * j / nph;
      for (double tt : {th, std::numbers::pi - th}) {
        CoordinatePoint p{t, r, tt, ph};
        s.d_max = std::max(s.d_max, std::fabs(d.eval(p)));
        s.dth_max = std::max(s.dth_max, std::fabs(dth.eval(p)));
      }
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace imcvf
