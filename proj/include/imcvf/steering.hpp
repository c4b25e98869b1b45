#pragma once

// Steering: adding Q (beta_t (x) beta_r + beta_r (x) beta_t) to the metric so
// that the mean curvature vector of a sphere becomes tangential to the slice.
//
// Concrete frame for a BlockMetric chart:
//   e_r = d_r / u,
//   e_t = n / N,  n = d_t - (d/u^2) d_r + P^th d_th + P^ph d_ph,  N = |n|,
//   P^th = (cf - be)/|g_S|,  P^ph = (ce - af)/|g_S|.
// Then [e_t, d_th] = -(d_th E^mu) d_mu and re-expanding in the frame gives
//   C^th_{t th} = -P^th_{,th} / N,   C^ph_{t ph} = -P^ph_{,ph} / N,
// while [e_r, d_th] is a multiple of d_r, so C^th_{r th} = C^ph_{r ph} = 0.
// The dual one-forms are beta_t = N dt and beta_r = (d/u) dt + u dr, so in
// chart components the steered metric has
//   g_tr' = d + Q N u,   g_tt' = -v^2 + 2 Q N d / u,
// and a, b, c, u (the slice metric) are untouched.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "parallel.hpp"
#include "sphere_geometry.hpp"

namespace imcvf {

struct NotAreaExpanding : std::domain_error {
  using std::domain_error::domain_error;
};

// Per-node frame quantities entering the steering formula.
struct FrameData {
  double a = 0, b = 0, c = 0;
  double et_area = 0;  // e_t(ab - c^2)
  double er_area = 0;  // e_r(ab - c^2)
  double C_t_th = 0, C_t_ph = 0;
  static constexpr double C_r_th = 0, C_r_ph = 0;

  double area() const { return a * b - c * c; }
  bool area_expanding() const { return er_area > 0; }
};

inline bool area_expanding(std::span<const FrameData> nodes) {
  for (const auto& fd : nodes)
    if (!fd.area_expanding()) return false;
  return !nodes.empty();
}

inline double steering_parameter(const FrameData& fd) {
  if (!(fd.er_area > 0))
    throw NotAreaExpanding("e_r(ab - c^2) <= 0: the surface is minimal in the slice, not area expanding");
  return (fd.et_area - 2 * fd.area() * (fd.C_t_th + fd.C_t_ph)) / fd.er_area;
}

inline double tangentiality_residual(const FrameData& fd, double Q) {
  return fd.er_area * Q - fd.et_area + 2 * fd.area() * (fd.C_t_th + fd.C_t_ph);
}

// |2 H_{e_r} (ab - c^2) - e_r(ab - c^2)|
inline double minimal_surface_lemma_check(const FrameData& fd, double H_er) {
  return std::fabs(2 * H_er * fd.area() - fd.er_area);
}

// Steered metric in the frame-dual basis {beta_t, beta_r, dth, dph}.
inline Mat4 steer_metric(const FrameData& fd, double Q) {
  Mat4 m;
  m << -1, Q, 0, 0,
       Q, 1, 0, 0,
       0, 0, fd.a, fd.c,
       0, 0, fd.c, fd.b;
  return m;
}

// Symbolic realisation of the frame for one chart.
class SteeringFrame {
 public:
  explicit SteeringFrame(const BlockMetric& g) : g_(g) {
    const auto &a = g.a(), &b = g.b(), &c = g.c(), &d = g.d(), &e = g.e(), &f = g.f();
    const auto &u = g.u(), &v = g.v();
    area_ = a * b - sqr(c);
    Pth_ = (c * f - b * e) / area_;
    Pph_ = (c * e - a * f) / area_;
    FieldExpr u2 = sqr(u);
    FieldExpr det = (-u2 * sqr(v) - sqr(d)) * area_ + u2 * (2.0 * c * e * f - b * sqr(e) - a * sqr(f));
    N_ = sqrt(-det / (u2 * area_));
    et_area_ = (area_.diff(T) - d / u2 * area_.diff(R) + Pth_ * area_.diff(TH) + Pph_ * area_.diff(PH)) / N_;
    er_area_ = area_.diff(R) / u;
    Cth_ = -Pth_.diff(TH) / N_;
    Cph_ = -Pph_.diff(PH) / N_;
    Q_ = (et_area_ - 2.0 * area_ * (Cth_ + Cph_)) / er_area_;
    tape_ = Tape({a, b, c, et_area_, er_area_, Cth_, Cph_});
  }

  const FieldExpr& norm_n() const { return N_; }
  const FieldExpr& steering_field() const { return Q_; }

  FrameData frame_data(const CoordinatePoint& p, std::vector<double>& scratch) const {
    double out[7];
    tape_.eval(p, scratch, out);
    FrameData fd;
    fd.a = out[0];
    fd.b = out[1];
    fd.c = out[2];
    fd.et_area = out[3];
    fd.er_area = out[4];
    fd.C_t_th = out[5];
    fd.C_t_ph = out[6];
    return fd;
  }
  FrameData frame_data(const CoordinatePoint& p) const {
    std::vector<double> scratch;
    return frame_data(p, scratch);
  }

  std::vector<FrameData> frame_data(const SphereGrid& grid) const {
    std::vector<FrameData> out(grid.size());
    parallel_chunks(grid.size(), [&](std::size_t b, std::size_t e) {
      std::vector<double> scratch;
      for (std::size_t k = b; k < e; ++k) out[k] = frame_data(grid.point(k), scratch);
    });
    return out;
  }

  // Chart-component form of g + Q (beta_t beta_r + beta_r beta_t).
  BlockMetric steered(const FieldExpr& Q) const {
    const auto &d = g_.d(), &u = g_.u(), &v = g_.v();
    FieldExpr d_new = d + Q * N_ * u;
    FieldExpr v_new = d.is_const(0) ? v : sqrt(sqr(v) - 2.0 * Q * N_ * d / u);
    return g_.with(FD, d_new).with(FV, v_new);
  }
  BlockMetric steered() const { return steered(Q_); }

 private:
  BlockMetric g_;
  FieldExpr area_, Pth_, Pph_, N_, et_area_, er_area_, Cth_, Cph_, Q_;
  Tape tape_;
};

struct SteeringReport {
  std::vector<double> Q;
  double residual_max = 0;   // max |tangentiality_residual|
  double Hn_before_max = 0;  // trace |H_n| of the unsteered metric
  double Hn_after_max = 0;   // trace |H_n| of the steered metric
  double lemma_max = 0;      // max minimal_surface_lemma_check on the unsteered metric
};

// Steer every node of a sphere and verify with the trace formula on both metrics.
inline SteeringReport steer_sphere(const BlockMetric& g, const SphereGrid& grid) {
  SteeringFrame sf(g);
  auto fds = sf.frame_data(grid);
  SteeringReport rep;
  rep.Q.resize(fds.size());
  for (std::size_t k = 0; k < fds.size(); ++k) {
    rep.Q[k] = steering_parameter(fds[k]);
    rep.residual_max = std::max(rep.residual_max, std::fabs(tangentiality_residual(fds[k], rep.Q[k])));
  }
  auto before = survey_sphere(g, grid);
  auto after = survey_sphere(sf.steered(), grid);
  for (std::size_t k = 0; k < fds.size(); ++k) {
    rep.Hn_before_max = std::max(rep.Hn_before_max, std::fabs(before[k].trace.H_n));
    rep.Hn_after_max = std::max(rep.Hn_after_max, std::fabs(after[k].trace.H_n));
    rep.lemma_max = std::max(rep.lemma_max, minimal_surface_lemma_check(fds[k], -before[k].trace.H_r));
  }
  return rep;
}

}  // namespace imcvf
