#pragma once

// Reference chart families used by the tests, the acceptance run and the CLI.

#include <array>
#include <cmath>

#include "imcvf_builder.hpp"

namespace imcvf::charts {

inline FieldExpr harmonic(int k) {
  auto th = FieldExpr::th(), ph = FieldExpr::ph();
  auto s = sin(th), c = cos(th);
  switch (k % 10) {
    case 0: return c;
    case 1: return s * cos(ph);
    case 2: return s * sin(ph);
    case 3: return 3.0 * sqr(c) - 1.0;
    case 4: return s * c * cos(ph);
    case 5: return sqr(s) * cos(2.0 * ph);
    case 6: return sqr(s) * sin(2.0 * ph);
    case 7: return 5.0 * pow(c, 3) - 3.0 * c;
    case 8: return s * (5.0 * sqr(c) - 1.0) * sin(ph);
    default: return pow(s, 3) * cos(3.0 * ph);
  }
}

inline constexpr int num_seeds = 10;

// Non-spherically-symmetric seed: windowed harmonic perturbations of a, c, e,
// f (and of u for odd seeds) of strength eps about a spherically symmetric
// background.  b and d are left to complete_chart().
inline FreeFunctions seed(int k, double eps, PoleStrategy pole = PoleStrategy::Window) {
  auto t = FieldExpr::t(), r = FieldExpr::r();
  auto w = pole_window(pole);
  // components with a single theta index flip sign under the pole reflection,
  // so they take an odd power of sin(theta) to stay smooth tensors
  auto wo = w * sin(FieldExpr::th());
  double L = 3.0 + (k % 4);
  auto rho = exp(-r / L);
  auto rho2 = 1.0 / (1.0 + sqr(r) / (2.0 + k));
  auto tmod = 1.0 + 0.3 * sin(t + 0.7 * k);

  FreeFunctions ff;
  ff.a = sqr(r) * (1.0 + eps * w * harmonic(k + 3) * rho * tmod);
  ff.c = (k % 3 == 0) ? FieldExpr(0.0) : eps * 0.5 * wo * harmonic(k + 5) * sqr(r) * rho2;
  ff.e = eps * wo * harmonic(k) * r * rho * tmod;
  ff.f = (k % 2 == 0) ? eps * w * harmonic(k + 1) * sqr(r) * rho2
                      : eps * 0.7 * w * harmonic(k + 7) * sqr(r) * rho;
  FieldExpr ubg = 1.0 + (0.05 + 0.02 * k) * exp(-r / 2.0);
  ff.u = (k % 2 == 1) ? ubg + eps * 0.5 * w * harmonic(k + 2) * rho2 : ubg;
  ff.v = 1.0 + (0.1 + 0.01 * k) / (1.0 + sqr(r)) + 0.05 * sin(t) * rho2;
  return ff;
}

// Positive-energy spherically symmetric charts: u = (1 - 2m/r)^(-1/2) with a
// mass profile m(t, r) nondecreasing in r, so G_tt >= 0 everywhere.
inline SphericalMetric positive_energy(int k) {
  auto t = FieldExpr::t(), r = FieldExpr::r();
  static constexpr std::array<double, 5> M{0.05, 0.15, 0.25, 0.1, 0.3};
  static constexpr std::array<double, 5> A{1.0, 2.0, 1.5, 3.0, 2.5};
  FieldExpr m = M[k % 5] * (1.0 + 0.2 * sin(t)) * pow(r, 3) / (pow(r, 3) + std::pow(A[k % 5], 3));
  FieldExpr u = pow(1.0 - 2.0 * m / r, -0.5);
  FieldExpr v = 1.0 + 0.1 * k / (1.0 + r) + 0.05 * cos(t);
  return {u, v};
}

// Riemannian conformal factors (g = u3^4 delta).
inline FieldExpr schwarzschild_isotropic(double m) { return 1.0 + m / (2.0 * FieldExpr::r()); }

}  // namespace imcvf::charts
