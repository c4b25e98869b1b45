#pragma once

// Quadrature and finite differences on a coordinate sphere S_{t,r}.
//
// Two node layouts:
//   GaussLegendre - th nodes at Gauss-Legendre roots in cos(th); integrals only.
//   Uniform       - th_i = (i + 1/2) pi / n_th (poles never sampled), Fejer
//                   weights; supports periodic-in-phi and pole-reflected-in-th
//                   finite differences.
// Phi nodes are uniform, ph_j = 2 pi j / n_ph, in both layouts.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "field_expr.hpp"

namespace imcvf {

struct GridError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class SphereGrid {
 public:
  enum class Kind { GaussLegendre, Uniform };

  SphereGrid(double t, double r, int nth, int nph, Kind kind = Kind::GaussLegendre)
      : t_(t), r_(r), nth_(nth), nph_(nph), kind_(kind) {
    if (nth < 2 || nph < 1) throw GridError("sphere grid needs n_th >= 2 and n_ph >= 1");
    th_.resize(nth);
    wth_.resize(nth);
    if (kind == Kind::GaussLegendre)
      gauss_legendre();
    else
      fejer();
  }
  static SphereGrid uniform(double t, double r, int nth, int nph) {
    return SphereGrid(t, r, nth, nph, Kind::Uniform);
  }

  double t() const { return t_; }
  double r() const { return r_; }
  int nth() const { return nth_; }
  int nph() const { return nph_; }
  Kind kind() const { return kind_; }
  std::size_t size() const { return static_cast<std::size_t>(nth_) * nph_; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * nph_ + j; }

  double theta(int i) const { return th_[i]; }
  double phi(int j) const { return 2 * std::numbers::pi * j / nph_; }
  double dtheta() const { return std::numbers::pi / nth_; }  // Uniform layout spacing
  double dphi() const { return 2 * std::numbers::pi / nph_; }

  // Sum of weight(i,j) f(th_i, ph_j) ~ int int f sin(th) dth dph.
  double weight(int i, int /*j*/) const { return wth_[i] * dphi(); }
  double weight(std::size_t k) const { return weight(static_cast<int>(k / nph_), 0); }

  CoordinatePoint point(int i, int j) const { return {t_, r_, th_[i], phi(j)}; }
  CoordinatePoint point(std::size_t k) const {
    return point(static_cast<int>(k / nph_), static_cast<int>(k % nph_));
  }

  // Plain quadrature of node samples against sin(th) dth dph.
  double integrate(const std::vector<double>& f) const {
    double s = 0;
    for (std::size_t k = 0; k < size(); ++k) s += weight(k) * f[k];
    return s;
  }

  template <class Fn>
  std::vector<double> sample(Fn&& fn) const {
    std::vector<double> out(size());
    for (std::size_t k = 0; k < size(); ++k) out[k] = fn(point(k));
    return out;
  }

 private:
  double t_, r_;
  int nth_, nph_;
  Kind kind_;
  std::vector<double> th_, wth_;

  void gauss_legendre() {
    const int n = nth_;
    for (int i = 0; i < n; ++i) {
      // Newton on P_n from the Tricomi initial guess; node i ascends in theta.
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-16) break;
      }
      th_[i] = std::acos(x);
      wth_[i] = 2 / ((1 - x * x) * dp * dp);
    }
  }

  void fejer() {
    const int n = nth_;
    for (int i = 0; i < n; ++i) {
      double th = std::numbers::pi * (i + 0.5) / n;
      double s = 0;
      for (int k = 1; k <= n / 2; ++k) s += std::cos(2 * k * th) / (4.0 * k * k - 1);
      th_[i] = th;
      wth_[i] = 2.0 / n * (1 - 2 * s);
    }
  }
};

// Sixth-order centred differences on a Uniform grid.  Values beyond the poles
// come from the reflection (th, ph) -> (-th, ph + pi), with `parity` = +1 for
// functions that are even across the pole (scalars, ph-components) and -1 for
// odd ones (th-components of vectors / one-forms).
class SphereFD {
 public:
  explicit SphereFD(const SphereGrid& g) : g_(g) {
    if (g.kind() != SphereGrid::Kind::Uniform)
      throw GridError("finite differences need a Uniform sphere grid");
    if (g.nth() < 8 || g.nph() < 8) throw GridError("grid too coarse: need n_th, n_ph >= 8");
    if (g.nph() % 2) throw GridError("n_ph must be even for pole reflection");
  }

  const SphereGrid& grid() const { return g_; }

  // value at row i (may be outside [0, nth)), column j (any integer)
  double at(const std::vector<double>& f, int i, int j, int parity) const {
    const int nth = g_.nth(), nph = g_.nph();
    double sgn = 1;
    if (i < 0) {
      i = -1 - i;
      j += nph / 2;
      sgn = parity;
    } else if (i >= nth) {
      i = 2 * nth - 1 - i;
      j += nph / 2;
      sgn = parity;
    }
    j %= nph;
    if (j < 0) j += nph;
    return sgn * f[g_.index(i, j)];
  }

  std::vector<double> d_theta(const std::vector<double>& f, int parity) const {
    return apply(f, parity, true, D1, 1 / g_.dtheta());
  }
  std::vector<double> d_phi(const std::vector<double>& f) const {
    return apply(f, 1, false, D1, 1 / g_.dphi());
  }
  std::vector<double> d2_theta(const std::vector<double>& f, int parity) const {
    return apply(f, parity, true, D2, 1 / (g_.dtheta() * g_.dtheta()));
  }
  std::vector<double> d2_phi(const std::vector<double>& f) const {
    return apply(f, 1, false, D2, 1 / (g_.dphi() * g_.dphi()));
  }

  // Stencil weights for the first derivative at offsets -3..3.
  static constexpr double D1[7] = {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
  static constexpr double D2[7] = {1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18,
                                   3.0 / 2,  -3.0 / 20, 1.0 / 90};

 private:
  SphereGrid g_;

  std::vector<double> apply(const std::vector<double>& f, int parity, bool along_theta,
                            const double (&w)[7], double scale) const {
    std::vector<double> out(g_.size());
    for (int i = 0; i < g_.nth(); ++i)
      for (int j = 0; j < g_.nph(); ++j) {
        double s = 0;
        for (int o = -3; o <= 3; ++o) {
          if (w[o + 3] == 0) continue;
          s += w[o + 3] * (along_theta ? at(f, i + o, j, parity) : at(f, i, j + o, parity));
        }
        out[g_.index(i, j)] = s * scale;
      }
    return out;
  }
};

}  // namespace imcvf
