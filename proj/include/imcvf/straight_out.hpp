#pragma once

// Straight-out machinery on a coordinate sphere S_{t,r}.
//
// alpha is the connection one-form of e_r = d_r / u,
//   alpha_i = <nabla_i e_r, e_n> = -(1/u^2) Gamma^t_{ir} (-|g| / |g_S|)^{1/2},  i in {th, ph}.
// Rotating e_r by a hyperbolic angle psi gives alpha - d psi, so the gauge
// problem is the Poisson equation Lap psi = div alpha on the sphere.
//
// Discretisation: Uniform pole-offset grid, sixth-order centred differences
// with exact metric coefficients.  Div_h applies the first-derivative stencil
// to g_S^{-1} alpha; the Laplacian L is the non-divergence form
//   P^{ij} psi_ij + (d_i P^{ij} + P^{ij} d_i ln sqrt|g_S|) psi_j
// with the compact second-derivative stencil.  L is solved by sparse LU on the
// system bordered with the constants: the extra unknown lambda soaks up
// whatever part of the source is not in the range of L and is reported as the
// discrete compatibility defect.

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "curvature.hpp"
#include "parallel.hpp"
#include "sphere_geometry.hpp"
#include "sphere_grid.hpp"

namespace imcvf {

struct CompatibilityError : std::runtime_error {
  double integral, scale;
  CompatibilityError(const std::string& m, double i, double s)
      : std::runtime_error(m), integral(i), scale(s) {}
};
struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonSpacelikeMeanCurvature : std::domain_error {
  using std::domain_error::domain_error;
};

using SpMat = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Pointwise connection one-form.

struct ConnectionOneForm {
  double th = 0, ph = 0;
};

inline ConnectionOneForm connection_one_form(const FieldValues& q, const Christoffel& gam) {
  const double gs = q.sphere_det();
  if (!(gs > 0)) throw DegenerateSphere("induced sphere metric is not positive definite");
  const double det = det_closed(q), u2 = q[FU] * q[FU];
  const double s = std::sqrt(-det / gs);
  return {-gam[T](TH, R) * s / u2, -gam[T](PH, R) * s / u2};
}

// Oracle: contract nabla_{d_i}(d_r / u) with e_n using every Christoffel.
inline ConnectionOneForm connection_one_form_inner(const FieldValues& q, const Mat4& g,
                                                   const Christoffel& gam) {
  SphereFrame fr = sphere_frame(q);
  Vec4 gen = g * fr.e_n;
  ConnectionOneForm out;
  double* dst[2] = {&out.th, &out.ph};
  const int ang[2] = {TH, PH};
  for (int i = 0; i < 2; ++i) {
    Vec4 nab;  // nabla_{d_i} d_r; the (1/u)_{,i} d_r part is orthogonal to e_n
    for (int k = 0; k < 4; ++k) nab(k) = gam[k](ang[i], R);
    *dst[i] = nab.dot(gen) / q[FU];
  }
  return out;
}

inline ConnectionOneForm connection_one_form(const BlockMetric& g, const CoordinatePoint& p) {
  auto pg = CurvatureEngine(g, 1).geometry(p);
  return connection_one_form(field_values(g, p), pg.gam);
}

// Exact div_{g_S} alpha from second-order jets:
//   beta = g_S^{-1} alpha,  div = d_i beta^i + beta^i d_i ln sqrt|g_S|.
inline double div_alpha_exact(const FieldJet& j, const PointGeometry& pg) {
  const auto& q = j.val;
  const auto& D = j.d1;
  const double a = q[FA], b = q[FB], c = q[FC], u = q[FU];
  const double gs = a * b - c * c, det = det_closed(q);
  const int ang[2] = {TH, PH};
  const double s = std::sqrt(-det / gs);

  double al[2], dal[2][2], gsm[2], sm[2];
  for (int m = 0; m < 2; ++m) {
    const int k = ang[m];
    gsm[m] = D[FA][k] * b + a * D[FB][k] - 2 * c * D[FC][k];
    const double detm = det * (pg.ginv * pg.jet.dg[k]).trace();
    sm[m] = 0.5 * s * (detm / det - gsm[m] / gs);
  }
  for (int i = 0; i < 2; ++i) {
    const double G = pg.gam[T](ang[i], R);
    al[i] = -G * s / (u * u);
    for (int m = 0; m < 2; ++m) {
      const double Gm = pg.dgam[ang[m]][T](ang[i], R);
      dal[i][m] = -(Gm * s + G * sm[m]) / (u * u) + 2 * G * s * D[FU][ang[m]] / (u * u * u);
    }
  }
  Eigen::Matrix2d ginv;
  ginv << b, -c, -c, a;
  ginv /= gs;
  Eigen::Vector2d alpha(al[0], al[1]);
  Eigen::Vector2d beta = ginv * alpha;
  double div = 0;
  for (int m = 0; m < 2; ++m) {
    const int k = ang[m];
    Eigen::Matrix2d dgS;
    dgS << D[FA][k], D[FC][k], D[FC][k], D[FB][k];
    Eigen::Matrix2d dginv = -ginv * dgS * ginv;
    Eigen::Vector2d dalpha(dal[0][m], dal[1][m]);
    Eigen::Vector2d dbeta = dginv * alpha + ginv * dalpha;
    div += dbeta(m) + beta(m) * gsm[m] / (2 * gs);
  }
  return div;
}

// One-form of the rotated normal cosh(psi) e_r + sinh(psi) e_n, straight from
// the definition <nabla_i nu, nu_perp> with symbolic frame vectors.
class RotatedOneForm {
 public:
  RotatedOneForm(const BlockMetric& g, const FieldExpr& psi) : eng_(g, 1) {
    const auto &a = g.a(), &b = g.b(), &c = g.c(), &d = g.d(), &e = g.e(), &f = g.f();
    const auto &u = g.u(), &v = g.v();
    FieldExpr gs = a * b - sqr(c), u2 = sqr(u);
    FieldExpr det = (-u2 * sqr(v) - sqr(d)) * gs + u2 * (2.0 * c * e * f - b * sqr(e) - a * sqr(f));
    FieldExpr N = sqrt(-det / (u2 * gs));
    std::array<FieldExpr, 4> er{0.0, 1.0 / u, 0.0, 0.0};
    std::array<FieldExpr, 4> en{1.0 / N, -d / u2 / N, (c * f - b * e) / gs / N, (c * e - a * f) / gs / N};
    FieldExpr ch = (exp(psi) + exp(-psi)) / 2.0, sh = (exp(psi) - exp(-psi)) / 2.0;
    std::vector<FieldExpr> out;
    for (int k = 0; k < 4; ++k) {
      FieldExpr V = ch * er[k] + sh * en[k];
      out.push_back(V);
      out.push_back(V.diff(TH));
      out.push_back(V.diff(PH));
      out.push_back(sh * er[k] + ch * en[k]);
    }
    tape_ = Tape(out);
  }

  ConnectionOneForm operator()(const CoordinatePoint& p) const {
    auto pg = eng_.geometry(p);
    auto x = tape_.eval(p);
    Vec4 V, Vth, Vph, W;
    for (int k = 0; k < 4; ++k) {
      V(k) = x[4 * k];
      Vth(k) = x[4 * k + 1];
      Vph(k) = x[4 * k + 2];
      W(k) = x[4 * k + 3];
    }
    auto nabla = [&](int i, const Vec4& dV) {
      Vec4 out = dV;
      for (int m = 0; m < 4; ++m) out(m) += pg.gam[m].row(i).dot(V);
      return out;
    };
    Vec4 gW = pg.jet.g * W;
    return {nabla(TH, Vth).dot(gW), nabla(PH, Vph).dot(gW)};
  }

 private:
  CurvatureEngine eng_;
  Tape tape_;
};

// ---------------------------------------------------------------------------
// The straight-out equation, route (ii): |g_S| Lap d + F(d, d').  The closed
// form assumes ab - c^2 = r^4 sin^2 th.

struct StraightOutParts {
  double lap_term = 0;  // |g_S| Lap_{g_S} d
  double F = 0;
  double total() const { return lap_term + F; }
};

inline StraightOutParts straight_out_closed(const FieldJet& j, double theta) {
  const auto& q = j.val;
  const auto& D = j.d1;
  const auto& H = j.d2;
  const double a = q[FA], b = q[FB], c = q[FC], d = q[FD], e = q[FE], f = q[FF], u = q[FU],
               v = q[FV];
  auto d1 = [&](int fld, int k) { return D[fld][k]; };
  auto d2 = [&](int fld, int k, int l) { return H[fld][k][l]; };
  const double cot = std::cos(theta) / std::sin(theta);
  const double gs = a * b - c * c;
  const double P = c * f - b * e, S = c * e - a * f;
  const double K = 2 * c * e * f - b * e * e - a * f * f;
  const double det = (-u * u * v * v - d * d) * gs + u * u * K;

  auto gs_d = [&](int k) { return d1(FA, k) * b + a * d1(FB, k) - 2 * c * d1(FC, k); };
  auto K_d = [&](int k) {
    return 2 * (d1(FC, k) * e * f + c * d1(FE, k) * f + c * e * d1(FF, k)) - d1(FB, k) * e * e -
           2 * b * e * d1(FE, k) - d1(FA, k) * f * f - 2 * a * f * d1(FF, k);
  };
  auto det_d = [&](int k) {
    return (-2 * u * d1(FU, k) * v * v - 2 * u * u * v * d1(FV, k) - 2 * d * d1(FD, k)) * gs +
           (-u * u * v * v - d * d) * gs_d(k) + 2 * u * d1(FU, k) * K + u * u * K_d(k);
  };
  auto P_d = [&](int k) {
    return d1(FC, k) * f + c * d1(FF, k) - d1(FB, k) * e - b * d1(FE, k);
  };
  auto S_d = [&](int k) {
    return d1(FC, k) * e + c * d1(FE, k) - d1(FA, k) * f - a * d1(FF, k);
  };
  auto U2 = [&](int k, int l) {  // (u^2)_{,kl}
    return 2 * (d1(FU, k) * d1(FU, l) + u * d2(FU, k, l));
  };

  const double gth = det_d(TH) / (2 * det), gph = det_d(PH) / (2 * det);
  const double a_r = d1(FA, R), b_r = d1(FB, R), c_r = d1(FC, R), e_r = d1(FE, R), f_r = d1(FF, R);
  const double b_th = d1(FB, TH), c_th = d1(FC, TH);
  const double a_ph = d1(FA, PH), c_ph = d1(FC, PH);
  const double u_th = d1(FU, TH), u_ph = d1(FU, PH);
  const double d_th = d1(FD, TH), d_ph = d1(FD, PH);

  StraightOutParts out;
  out.lap_term = b * d2(FD, TH, TH) - 2 * c * d2(FD, TH, PH) + a * d2(FD, PH, PH) +
                 (b_th - b * cot - c_ph) * d_th + (-c_th + c * cot + a_ph) * d_ph;

  double L2rest = (b * d2(FE, R, TH) - c * d2(FF, R, TH) - c * d2(FE, R, PH) + a * d2(FF, R, PH)) -
                  d / (u * u) * (b * U2(TH, TH) - 2 * c * U2(TH, PH) + a * U2(PH, PH)) +
                  P / gs * (b * d2(FA, R, TH) - c * d2(FC, R, TH) - c * d2(FA, R, PH) + a * d2(FC, R, PH)) +
                  S / gs * (b * d2(FC, R, TH) - c * d2(FB, R, TH) - c * d2(FC, R, PH) + a * d2(FB, R, PH));

  double F = L2rest;
  F += cot * (b * d_th - c * d_ph);
  F -= gth * (b * e_r + b * d_th - c * f_r - c * d_ph);
  F -= gph * (-c * e_r - c * d_th + a * f_r + a * d_ph);
  F -= 2 / u * ((d_th - 2 * d * u_th / u - d * gth) * (b * u_th - c * u_ph) +
                (d_ph - 2 * d * u_ph / u - d * gph) * (-c * u_th + a * u_ph));
  F += ((P_d(TH) - P * gth - 2 * P * cot) * (b * a_r - c * c_r) +
        (P_d(PH) - P * gph) * (-c * a_r + a * c_r)) / gs;
  F += ((S_d(TH) - S * gth - 2 * S * cot) * (b * c_r - c * b_r) +
        (S_d(PH) - S * gph) * (-c * c_r + a * b_r)) / gs;
  F += b_th * e_r - c_ph * e_r - c_th * f_r + a_ph * f_r;
  F -= 2 * d / u * (b_th * u_th - c_ph * u_th - c_th * u_ph + a_ph * u_ph);
  F += P / gs * (b_th * a_r - a_r * c_ph - c_r * c_th + a_ph * c_r);
  F += S / gs * (b_th * c_r - c_r * c_ph - b_r * c_th + a_ph * b_r);
  out.F = F;
  return out;
}

// Route (i): 2 (-|g_S| |g|)^{1/2} div alpha.
inline double straight_out_direct(const FieldJet& j, const PointGeometry& pg) {
  const double gs = j.val.sphere_det(), det = det_closed(j.val);
  return 2 * std::sqrt(-gs * det) * div_alpha_exact(j, pg);
}

// ---------------------------------------------------------------------------
// Discrete operators on a Uniform sphere grid.

namespace detail {

inline SpMat fd_matrix(const SphereGrid& g, bool along_theta, int parity, const double (&w)[7],
                       double scale) {
  const int nth = g.nth(), nph = g.nph();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * 6);
  for (int i = 0; i < nth; ++i)
    for (int j = 0; j < nph; ++j) {
      const int row = static_cast<int>(g.index(i, j));
      for (int o = -3; o <= 3; ++o) {
        if (w[o + 3] == 0) continue;
        int ii = along_theta ? i + o : i, jj = along_theta ? j : j + o;
        double sgn = 1;
        if (ii < 0) {
          ii = -1 - ii;
          jj += nph / 2;
          sgn = parity;
        } else if (ii >= nth) {
          ii = 2 * nth - 1 - ii;
          jj += nph / 2;
          sgn = parity;
        }
        jj = ((jj % nph) + nph) % nph;
        trip.emplace_back(row, static_cast<int>(g.index(ii, jj)), sgn * w[o + 3] * scale);
      }
    }
  SpMat m(g.size(), g.size());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

inline SpMat diag(const std::vector<double>& x) {
  SpMat m(x.size(), x.size());
  m.reserve(Eigen::VectorXi::Constant(x.size(), 1));
  for (std::size_t k = 0; k < x.size(); ++k) m.insert(k, k) = x[k];
  return m;
}

inline Eigen::Map<const Eigen::VectorXd> as_vec(const std::vector<double>& x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}
inline std::vector<double> to_std(const Eigen::VectorXd& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace detail

struct OneForm {
  std::vector<double> th, ph;
};

struct PoissonSolution {
  std::vector<double> psi;   // area-weighted mean zero
  double lambda = 0;         // constant defect: L psi = f - lambda
  double residual_max = 0;   // max |L psi - f| (= |lambda| up to roundoff)
};

class SphereOperator {
 public:
  SphereOperator(const BlockMetric& g, const SphereGrid& grid) : grid_(grid), fd_(grid) {
    const std::size_t n = grid.size();
    pthth_.resize(n);
    pthph_.resize(n);
    pphph_.resize(n);
    lth_.resize(n);
    lph_.resize(n);
    rho_.resize(n);
    bth_.resize(n);
    bph_.resize(n);
    JetEvaluator jets(g, 1);
    parallel_chunks(n, [&](std::size_t b0, std::size_t e0) {
      std::vector<double> scratch;
      for (std::size_t k = b0; k < e0; ++k) {
        auto p = grid.point(k);
        auto j = jets.eval(p, scratch);
        const auto& q = j.val;
        const auto& D = j.d1;
        const double a = q[FA], b = q[FB], c = q[FC], gs = a * b - c * c;
        if (!(gs > 0)) throw DegenerateSphere("induced sphere metric is not positive definite");
        pthth_[k] = b / gs;
        pthph_[k] = -c / gs;
        pphph_[k] = a / gs;
        lth_[k] = (D[FA][TH] * b + a * D[FB][TH] - 2 * c * D[FC][TH]) / (2 * gs);
        lph_[k] = (D[FA][PH] * b + a * D[FB][PH] - 2 * c * D[FC][PH]) / (2 * gs);
        rho_[k] = std::sqrt(gs) / std::sin(p.th);
        // first-order coefficients d_i P^{ij} + P^{ij} d_i ln sqrt|g_S|
        Eigen::Matrix2d P;
        P << pthth_[k], pthph_[k], pthph_[k], pphph_[k];
        Eigen::Vector2d l(lth_[k], lph_[k]), div = P * l;
        const int ang[2] = {TH, PH};
        for (int m = 0; m < 2; ++m) {
          Eigen::Matrix2d dg;
          dg << D[FA][ang[m]], D[FC][ang[m]], D[FC][ang[m]], D[FB][ang[m]];
          div += (-P * dg * P).row(m).transpose();
        }
        bth_[k] = div(0);
        bph_[k] = div(1);
      }
    });
    const double sth = 1 / grid.dtheta(), sph = 1 / grid.dphi();
    Gth_ = detail::fd_matrix(grid, true, +1, SphereFD::D1, sth);
    Dth_ = detail::fd_matrix(grid, true, -1, SphereFD::D1, sth);
    Gph_ = detail::fd_matrix(grid, false, +1, SphereFD::D1, sph);
    // Non-divergence form with the compact second-derivative stencil; composing
    // two first-derivative stencils would leave grid-scale modes in the kernel.
    SpMat D2th = detail::fd_matrix(grid, true, +1, SphereFD::D2, sth * sth);
    SpMat D2ph = detail::fd_matrix(grid, false, +1, SphereFD::D2, sph * sph);
    using detail::diag;
    L_ = diag(pthth_) * D2th + 2.0 * diag(pthph_) * (Gth_ * Gph_) + diag(pphph_) * D2ph +
         diag(bth_) * Gth_ + diag(bph_) * Gph_;
    L_.makeCompressed();
  }

  const SphereGrid& grid() const { return grid_; }
  const SpMat& laplacian() const { return L_; }
  const std::vector<double>& area_density() const { return rho_; }

  // int f dA with the grid's quadrature
  double integrate(const std::vector<double>& f) const {
    double s = 0;
    for (std::size_t k = 0; k < f.size(); ++k) s += grid_.weight(k) * rho_[k] * f[k];
    return s;
  }
  double area() const { return integrate(std::vector<double>(grid_.size(), 1.0)); }

  OneForm gradient(const std::vector<double>& psi) const {
    auto x = detail::as_vec(psi);
    return {detail::to_std(Gth_ * x), detail::to_std(Gph_ * x)};
  }

  std::vector<double> divergence(const OneForm& al) const {
    const std::size_t n = grid_.size();
    std::vector<double> bth(n), bph(n);
    for (std::size_t k = 0; k < n; ++k) {
      bth[k] = pthth_[k] * al.th[k] + pthph_[k] * al.ph[k];
      bph[k] = pthph_[k] * al.th[k] + pphph_[k] * al.ph[k];
    }
    Eigen::VectorXd out = Dth_ * detail::as_vec(bth) + Gph_ * detail::as_vec(bph);
    for (std::size_t k = 0; k < n; ++k) out[k] += lth_[k] * bth[k] + lph_[k] * bph[k];
    return detail::to_std(out);
  }

  std::vector<double> apply(const std::vector<double>& psi) const {
    return detail::to_std(L_ * detail::as_vec(psi));
  }

  // pointwise g_S-norm squared of a one-form
  std::vector<double> norm2(const OneForm& al) const {
    std::vector<double> out(grid_.size());
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = pthth_[k] * al.th[k] * al.th[k] + 2 * pthph_[k] * al.th[k] * al.ph[k] +
               pphph_[k] * al.ph[k] * al.ph[k];
    return out;
  }
  // L2 norm sqrt(int |alpha|^2 dA)
  double l2(const OneForm& al) const { return std::sqrt(integrate(norm2(al))); }

  // Lap psi = f, mean-zero psi.
  PoissonSolution solve(const std::vector<double>& f) const {
    factorize();
    const Eigen::Index n = static_cast<Eigen::Index>(grid_.size());
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = detail::as_vec(f);
    rhs(n) = 0;
    Eigen::VectorXd x = lu_->solve(rhs);
    if (lu_->info() != Eigen::Success) throw NonConvergence("sparse LU solve failed");
    PoissonSolution s;
    s.psi = detail::to_std(x.head(n));
    s.lambda = x(n);
    Eigen::VectorXd r = L_ * x.head(n) - rhs.head(n);
    s.residual_max = r.cwiseAbs().maxCoeff();
    return s;
  }

 private:
  SphereGrid grid_;
  SphereFD fd_;
  std::vector<double> pthth_, pthph_, pphph_, lth_, lph_, rho_, bth_, bph_;
  SpMat Gth_, Dth_, Gph_, L_;
  mutable std::shared_ptr<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>> lu_;

  void factorize() const {
    if (lu_) return;
    const Eigen::Index n = static_cast<Eigen::Index>(grid_.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(L_.nonZeros() + 2 * n);
    for (int k = 0; k < L_.outerSize(); ++k)
      for (SpMat::InnerIterator it(L_, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    const double A = area();
    for (Eigen::Index k = 0; k < n; ++k) {
      trip.emplace_back(k, n, 1.0);
      trip.emplace_back(n, k, grid_.weight(k) * rho_[k] / A);
    }
    SpMat B(n + 1, n + 1);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    auto lu = std::make_shared<Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>>();
    lu->analyzePattern(B);
    lu->factorize(B);
    if (lu->info() != Eigen::Success) throw NonConvergence("sparse LU factorisation failed");
    lu_ = lu;
  }
};

// ---------------------------------------------------------------------------
// Sampled one-forms and the gauge rotation.

inline OneForm sample_connection_one_form(const BlockMetric& g, const SphereGrid& grid) {
  OneForm al{std::vector<double>(grid.size()), std::vector<double>(grid.size())};
  JetEvaluator jets(g, 1);
  parallel_chunks(grid.size(), [&](std::size_t b, std::size_t e) {
    std::vector<double> scratch;
    for (std::size_t k = b; k < e; ++k) {
      auto j = jets.eval(grid.point(k), scratch);
      auto pg = point_geometry(j, false);
      auto c = connection_one_form(j.val, pg.gam);
      al.th[k] = c.th;
      al.ph[k] = c.ph;
    }
  });
  return al;
}

// alpha together with its exact pointwise divergence (second-order jets).
struct SampledAlpha {
  OneForm alpha;
  std::vector<double> div;
};

inline SampledAlpha sample_alpha_with_divergence(const BlockMetric& g, const SphereGrid& grid) {
  SampledAlpha out{{std::vector<double>(grid.size()), std::vector<double>(grid.size())},
                   std::vector<double>(grid.size())};
  JetEvaluator jets(g, 2);
  parallel_chunks(grid.size(), [&](std::size_t b, std::size_t e) {
    std::vector<double> scratch;
    for (std::size_t k = b; k < e; ++k) {
      auto j = jets.eval(grid.point(k), scratch);
      auto pg = point_geometry(j, true);
      auto c = connection_one_form(j.val, pg.gam);
      out.alpha.th[k] = c.th;
      out.alpha.ph[k] = c.ph;
      out.div[k] = div_alpha_exact(j, pg);
    }
  });
  return out;
}

struct DivergenceReport {
  std::vector<double> div;  // finite-difference divergence
  double integral = 0;      // int div dA
  double alpha_l2 = 0;      // ||alpha||
  double max_abs = 0;
};

// With `exact` given, the solvability integral uses the exact pointwise
// divergence; the finite-difference field is still what the Poisson solve sees.
inline DivergenceReport divergence_alpha(const SphereOperator& op, const OneForm& al,
                                         const std::vector<double>* exact = nullptr) {
  DivergenceReport rep;
  rep.div = op.divergence(al);
  rep.integral = op.integrate(exact ? *exact : rep.div);
  rep.alpha_l2 = op.l2(al);
  for (double x : rep.div) rep.max_abs = std::max(rep.max_abs, std::fabs(x));
  return rep;
}

struct GaugeRotation {
  std::vector<double> theta;  // hyperbolic angle, mean zero
  OneForm rotated;            // alpha - d theta
  double div_before_max = 0;
  double div_after_max = 0;      // Div_h alpha - L theta: the discrete divergence the solver annihilates
  double div_after_sampled = 0;  // Div_h(alpha - Grad_h theta): truncation-level diagnostic
  double solvability = 0;        // int div alpha dA
  double alpha_l2 = 0;
  double lambda = 0;
};

inline GaugeRotation gauge_rotation(const SphereOperator& op, const OneForm& al,
                                    double compat_rel_tol = 1e-6,
                                    const std::vector<double>* exact_div = nullptr) {
  auto dv = divergence_alpha(op, al, exact_div);
  if (std::fabs(dv.integral) > compat_rel_tol * std::max(dv.alpha_l2, 1e-300) &&
      std::fabs(dv.integral) > 1e-14)
    throw CompatibilityError("int div alpha dA is not zero", dv.integral, dv.alpha_l2);
  auto sol = op.solve(dv.div);
  GaugeRotation out;
  out.theta = sol.psi;
  out.lambda = sol.lambda;
  out.solvability = dv.integral;
  out.alpha_l2 = dv.alpha_l2;
  out.div_before_max = dv.max_abs;
  auto lt = op.apply(sol.psi);
  for (std::size_t k = 0; k < lt.size(); ++k)
    out.div_after_max = std::max(out.div_after_max, std::fabs(dv.div[k] - lt[k]));
  auto dth = op.gradient(sol.psi);
  out.rotated = al;
  for (std::size_t k = 0; k < al.th.size(); ++k) {
    out.rotated.th[k] -= dth.th[k];
    out.rotated.ph[k] -= dth.ph[k];
  }
  for (double x : op.divergence(out.rotated))
    out.div_after_sampled = std::max(out.div_after_sampled, std::fabs(x));
  return out;
}

inline GaugeRotation gauge_rotation(const BlockMetric& g, const SphereOperator& op,
                                    double compat_rel_tol = 1e-6) {
  auto s = sample_alpha_with_divergence(g, op.grid());
  return gauge_rotation(op, s.alpha, compat_rel_tol, &s.div);
}

// E(nu) = int |alpha_nu|^2 dA.  With nu_perp the unit timelike partner,
// nabla^perp nu = -alpha(.) nu_perp, so |nabla^perp nu|^2 = |alpha|^2 exactly;
// there is no nu-independent offset.
inline double normal_energy(const SphereOperator& op, const OneForm& al) {
  return op.integrate(op.norm2(al));
}

inline OneForm rotate(const SphereOperator& op, const OneForm& al, const std::vector<double>& psi) {
  auto d = op.gradient(psi);
  OneForm out = al;
  for (std::size_t k = 0; k < out.th.size(); ++k) {
    out.th[k] -= d.th[k];
    out.ph[k] -= d.ph[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Time-flatness of the sphere: div alpha_H = 0 with nu_H = -H/|H|.
// nu_H = cosh(psi) e_r + sinh(psi) e_n with tanh(psi) = H_n / H_r, so
// alpha_H = alpha - d psi.

struct TimeFlatReport {
  bool time_flat = false;
  double sup_norm = 0;
};

inline TimeFlatReport is_time_flat(const BlockMetric& g, const SphereOperator& op,
                                   double tol = 1e-7) {
  const auto& grid = op.grid();
  auto nodes = survey_sphere(g, grid);
  std::vector<double> psi(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& m = nodes[k].trace;
    if (!(std::fabs(m.H_r) > std::fabs(m.H_n)))
      throw NonSpacelikeMeanCurvature("mean curvature vector is not spacelike");
    if (!(m.H_r < 0)) throw NonSpacelikeMeanCurvature("mean curvature vector is not inward");
    psi[k] = std::atanh(m.H_n / m.H_r);
  }
  auto al = rotate(op, sample_connection_one_form(g, grid), psi);
  TimeFlatReport rep;
  for (double x : op.divergence(al)) rep.sup_norm = std::max(rep.sup_norm, std::fabs(x));
  rep.time_flat = rep.sup_norm <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Cross-validation of the two routes on a sphere.

struct StraightOutResidual {
  std::vector<double> closed;  // route (ii)
  std::vector<double> direct;  // route (i)
  double max_diff = 0;
  double max_closed = 0;
};

inline StraightOutResidual straight_out_residual(const BlockMetric& g, const SphereGrid& grid) {
  JetEvaluator jets(g, 2);
  StraightOutResidual out;
  out.closed.resize(grid.size());
  out.direct.resize(grid.size());
  parallel_chunks(grid.size(), [&](std::size_t b, std::size_t e) {
    std::vector<double> scratch;
    for (std::size_t k = b; k < e; ++k) {
      auto p = grid.point(k);
      auto j = jets.eval(p, scratch);
      auto pg = point_geometry(j, true);
      out.closed[k] = straight_out_closed(j, p.th).total();
      out.direct[k] = straight_out_direct(j, pg);
    }
  });
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.max_diff = std::max(out.max_diff, std::fabs(out.closed[k] - out.direct[k]));
    out.max_closed = std::max(out.max_closed, std::fabs(out.closed[k]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Picard iteration for Lap d + G(d, d') = 0 on one sphere, G = F / |g_S|.

struct PicardStep {
  int iter = 0;
  double update = 0;        // ||d_{k+1} - d_k||_inf
  double compat = 0;        // int G dA
  double compat_scale = 0;  // int |G| dA
  double lambda = 0;        // constant defect absorbed by the bordered solve
  double damping = 1;
};

struct StraightOutSolve {
  std::vector<double> d;
  std::vector<PicardStep> log;
  bool converged = false;
  bool compatible = true;   // int G dA ~ 0 at the final iterate
  double compat = 0, compat_scale = 0;
  double residual_max = 0;  // max |Lap d + G(d)|
  std::string message;
};

struct PicardOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double compat_tol = 1e-6;  // relative to int |G| dA
  double residual_tol = 1e-6;
};

// G evaluated on the grid for the current iterate (values, d_th, d_ph).
using SourceFn = std::function<std::vector<double>(const std::vector<double>& d, const OneForm& dd)>;

inline StraightOutSolve picard_solve(const SphereOperator& op, const SourceFn& G,
                                     std::vector<double> d0, const PicardOptions& opt = {}) {
  StraightOutSolve out;
  std::vector<double> d = std::move(d0);
  const std::size_t n = d.size();
  double damping = 1, prev_update = INFINITY;
  auto abs_integral = [&](const std::vector<double>& x) {
    std::vector<double> a(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) a[k] = std::fabs(x[k]);
    return op.integrate(a);
  };
  for (int it = 1; it <= opt.max_iter; ++it) {
    auto g = G(d, op.gradient(d));
    PicardStep st;
    st.iter = it;
    st.compat = op.integrate(g);
    st.compat_scale = abs_integral(g);
    std::vector<double> rhs(n);
    for (std::size_t k = 0; k < n; ++k) rhs[k] = -g[k];
    auto sol = op.solve(rhs);
    st.lambda = sol.lambda;
    double upd = 0;
    for (std::size_t k = 0; k < n; ++k) upd = std::max(upd, std::fabs(sol.psi[k] - d[k]));
    if (upd > prev_update) damping = 0.5;
    st.damping = damping;
    for (std::size_t k = 0; k < n; ++k) d[k] += damping * (sol.psi[k] - d[k]);
    st.update = damping * upd;
    prev_update = upd;
    out.log.push_back(st);
    if (st.update <= opt.tol) {
      out.converged = true;
      break;
    }
  }
  out.d = d;
  auto g = G(d, op.gradient(d));
  auto lap = op.apply(d);
  for (std::size_t k = 0; k < n; ++k) out.residual_max = std::max(out.residual_max, std::fabs(lap[k] + g[k]));
  out.compat = op.integrate(g);
  out.compat_scale = abs_integral(g);
  out.compatible = !(std::fabs(out.compat) > opt.compat_tol * std::max(out.compat_scale, 1e-300) &&
                     std::fabs(out.compat) > 1e-14);
  if (!out.compatible) {
    out.converged = false;
    char buf[160];
    std::snprintf(buf, sizeof buf, "compatibility violated: int G dA = %.3e (int |G| dA = %.3e)",
                  out.compat, out.compat_scale);
    out.message = buf;
  }
  if (out.converged && out.residual_max > opt.residual_tol) {
    out.converged = false;
    out.message = "fixed point reached but |Lap d + G| = " + std::to_string(out.residual_max);
  }
  if (!out.converged && out.message.empty()) out.message = "iteration cap reached";
  return out;
}

// The straight-out source for a chart whose d is replaced by grid samples.
inline SourceFn straight_out_source(const BlockMetric& g_no_d, const SphereGrid& grid) {
  auto jets = std::make_shared<JetEvaluator>(g_no_d.with(FD, 0.0), 2);
  auto samples = std::make_shared<std::vector<FieldJet>>(grid.size());
  parallel_chunks(grid.size(), [&](std::size_t b, std::size_t e) {
    std::vector<double> scratch;
    for (std::size_t k = b; k < e; ++k) (*samples)[k] = jets->eval(grid.point(k), scratch);
  });
  std::vector<double> th(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) th[k] = grid.point(k).th;
  return [samples, th](const std::vector<double>& d, const OneForm& dd) {
    std::vector<double> out(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      FieldJet j = (*samples)[k];
      j.val[FD] = d[k];
      j.d1[FD] = {0, 0, dd.th[k], dd.ph[k]};
      out[k] = straight_out_closed(j, th[k]).F / j.val.sphere_det();
    }
    return out;
  };
}

inline StraightOutSolve solve_straight_out_d(const BlockMetric& g_no_d, const SphereOperator& op,
                                             std::vector<double> d0 = {},
                                             const PicardOptions& opt = {}) {
  if (d0.empty()) d0.assign(op.grid().size(), 0.0);
  return picard_solve(op, straight_out_source(g_no_d, op.grid()), std::move(d0), opt);
}

}  // namespace imcvf
