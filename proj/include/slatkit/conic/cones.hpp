#pragma once

// Cone block kernels for the interior-point solver: nonnegative orthant,
// second-order cones and real symmetric PSD cones in scaled-vector (svec)
// coordinates.  Each block supplies the Nesterov-Todd scaling, Jordan
// products and boundary step computations the driver needs.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "slatkit/common.hpp"

namespace slatkit::conic {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class BlockKind { Nonnegative, SecondOrder, SemidefiniteReal };

struct ConeBlock {
  BlockKind kind;
  int size;  // dimension for Nonnegative/SecondOrder, matrix side for PSD

  int vec_dim() const {
    return kind == BlockKind::SemidefiniteReal ? size * (size + 1) / 2 : size;
  }
  // Degree of the log barrier (number of Jordan-algebra "eigenvalues").
  int barrier_degree() const {
    switch (kind) {
      case BlockKind::Nonnegative: return size;
      case BlockKind::SecondOrder: return 1;
      default: return size;
    }
  }
};

struct ConeSpec {
  std::vector<ConeBlock> blocks;

  int total_dim() const {
    int d = 0;
    for (const auto& b : blocks) d += b.vec_dim();
    return d;
  }
  int barrier_degree() const {
    int d = 0;
    for (const auto& b : blocks) d += b.barrier_degree();
    return d;
  }
  void validate() const {
    for (const auto& b : blocks)
      if (b.size < 1) throw config_error("cone block dimension must be >= 1");
  }
};

// ---- svec utilities (lower-triangular column-major, off-diagonals * sqrt2) ----

inline int svec_dim(int side) { return side * (side + 1) / 2; }

// Index of entry (i, j), i >= j, within svec of a side x side matrix.
inline int svec_index(int side, int i, int j) {
  return j * side - j * (j - 1) / 2 + (i - j);
}

inline VectorXd svec(const MatrixXd& m) {
  const int k = static_cast<int>(m.rows());
  VectorXd v(svec_dim(k));
  const double s2 = std::sqrt(2.0);
  int idx = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) v[idx++] = (i == j) ? m(i, j) : s2 * m(i, j);
  return v;
}

inline MatrixXd smat(const VectorXd& v, int side) {
  MatrixXd m(side, side);
  const double is2 = 1.0 / std::sqrt(2.0);
  int idx = 0;
  for (int j = 0; j < side; ++j)
    for (int i = j; i < side; ++i) {
      const double val = (i == j) ? v[idx] : is2 * v[idx];
      m(i, j) = val;
      m(j, i) = val;
      ++idx;
    }
  return m;
}

// ---- per-block scaling state ----

namespace detail {

// Hyperbolic Householder-like matrix for SOC scalings:
//   Hbar(w) v = (w0 v0 + wt.v1, v0 wt + v1 + (wt.v1/(1+w0)) wt)
// with w = (w0, wt), wJw = 1, so Hbar J Hbar = J and Hbar^{-1} = J Hbar J.
inline void soc_hbar_apply(double w0, const VectorXd& wt, const double* v, double* out,
                           int dim) {
  Eigen::Map<const VectorXd> vt(v + 1, dim - 1);
  const double dot = wt.dot(vt);
  out[0] = w0 * v[0] + dot;
  const double coef = v[0] + dot / (1.0 + w0);
  for (int i = 1; i < dim; ++i) out[i] = vt[i - 1] + coef * wt[i - 1];
}

}  // namespace detail

// Scaling for one cone block, recomputed at every iterate from the primal
// block x and dual block s.  Conventions (W symmetric for Nonneg/SOC,
// operator form for PSD): lambda = W^{-T} x = W s.
class BlockScaling {
 public:
  ConeBlock block;

  // Nonnegative: W = diag(w)
  VectorXd nn_w;

  // SOC: W = eta * Hbar(wbar)
  double soc_eta = 1.0;
  double soc_w0 = 1.0;
  VectorXd soc_wt;

  // PSD: lambda = R^{-1} X R^{-T} = R^T S R = diag(sigma); G = R R^T
  MatrixXd psd_R, psd_Rinv, psd_G, psd_Ginv, psd_Lx;

  VectorXd lambda;  // scaled point for this block

  // Computes the NT scaling; returns false on numerical breakdown
  // (iterate effectively left the cone interior).
  bool compute(const VectorXd& x, const VectorXd& s) {
    switch (block.kind) {
      case BlockKind::Nonnegative: {
        if ((x.array() <= 0).any() || (s.array() <= 0).any()) return false;
        nn_w = (x.array() / s.array()).sqrt();
        lambda = (x.array() * s.array()).sqrt();
        return true;
      }
      case BlockKind::SecondOrder: {
        const int d = block.size;
        const double jx = x[0] * x[0] - x.tail(d - 1).squaredNorm();
        const double js = s[0] * s[0] - s.tail(d - 1).squaredNorm();
        if (jx <= 0 || js <= 0 || x[0] <= 0 || s[0] <= 0) return false;
        const double nx = std::sqrt(jx), ns = std::sqrt(js);
        VectorXd xh = x / nx, sh = s / ns;
        const double gamma = std::sqrt((1.0 + xh.dot(sh)) / 2.0);
        soc_eta = std::sqrt(nx / ns);
        // wbar = (xh + J sh) / (2 gamma)
        soc_w0 = (xh[0] + sh[0]) / (2.0 * gamma);
        soc_wt = (xh.tail(d - 1) - sh.tail(d - 1)) / (2.0 * gamma);
        lambda.resize(d);
        apply_W(s.data(), lambda.data());
        return lambda[0] > 0;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        MatrixXd X = smat(x, k), S = smat(s, k);
        Eigen::LLT<MatrixXd> lx(X), ls(S);
        if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) return false;
        psd_Lx = lx.matrixL();
        MatrixXd Ls = ls.matrixL();
        Eigen::JacobiSVD<MatrixXd> svd(Ls.transpose() * psd_Lx,
                                       Eigen::ComputeFullU | Eigen::ComputeFullV);
        VectorXd sig = svd.singularValues();
        if (sig.minCoeff() <= 0) return false;
        VectorXd isqrt = sig.array().sqrt().inverse();
        psd_R = psd_Lx * svd.matrixV() * isqrt.asDiagonal();
        // R^{-1} = sqrt(sigma)^{-1}... actually R^{-1} = diag(sqrt(sig)) V^T Lx^{-1}
        MatrixXd Lxinv = psd_Lx.triangularView<Eigen::Lower>().solve(
            MatrixXd::Identity(k, k));
        psd_Rinv = sig.array().sqrt().matrix().asDiagonal() * svd.matrixV().transpose() * Lxinv;
        psd_G = psd_R * psd_R.transpose();
        psd_Ginv = psd_Rinv.transpose() * psd_Rinv;
        lambda.resize(svec_dim(k));
        MatrixXd lam = sig.asDiagonal();
        lambda = svec(lam);
        return true;
      }
    }
    return false;
  }

  // --- scaling applications ---

  void apply_W(const double* v, double* out) const {  // out = W v
    switch (block.kind) {
      case BlockKind::Nonnegative:
        for (int i = 0; i < block.size; ++i) out[i] = nn_w[i] * v[i];
        return;
      case BlockKind::SecondOrder: {
        detail::soc_hbar_apply(soc_w0, soc_wt, v, out, block.size);
        for (int i = 0; i < block.size; ++i) out[i] *= soc_eta;
        return;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        Eigen::Map<const VectorXd> vv(v, svec_dim(k));
        MatrixXd M = psd_R.transpose() * smat(vv, k) * psd_R;
        Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(M);
        return;
      }
    }
  }

  void apply_Winv(const double* v, double* out) const {  // out = W^{-1} v
    switch (block.kind) {
      case BlockKind::Nonnegative:
        for (int i = 0; i < block.size; ++i) out[i] = v[i] / nn_w[i];
        return;
      case BlockKind::SecondOrder: {
        const int d = block.size;
        VectorXd tmp(d);
        tmp[0] = v[0];
        for (int i = 1; i < d; ++i) tmp[i] = -v[i];
        VectorXd res(d);
        detail::soc_hbar_apply(soc_w0, soc_wt, tmp.data(), res.data(), d);
        out[0] = res[0] / soc_eta;
        for (int i = 1; i < d; ++i) out[i] = -res[i] / soc_eta;
        return;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        Eigen::Map<const VectorXd> vv(v, svec_dim(k));
        MatrixXd M = psd_Rinv.transpose() * smat(vv, k) * psd_Rinv;
        Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(M);
        return;
      }
    }
  }

  void apply_WinvT(const double* v, double* out) const {  // out = W^{-T} v
    if (block.kind == BlockKind::SemidefiniteReal) {
      const int k = block.size;
      Eigen::Map<const VectorXd> vv(v, svec_dim(k));
      MatrixXd M = psd_Rinv * smat(vv, k) * psd_Rinv.transpose();
      Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(M);
      return;
    }
    apply_Winv(v, out);  // W symmetric for the other cones
  }

  void apply_WtW(const double* v, double* out) const {  // out = W^T W v
    switch (block.kind) {
      case BlockKind::Nonnegative:
        for (int i = 0; i < block.size; ++i) out[i] = nn_w[i] * nn_w[i] * v[i];
        return;
      case BlockKind::SecondOrder: {
        const int d = block.size;
        VectorXd tmp(d);
        detail::soc_hbar_apply(soc_w0, soc_wt, v, tmp.data(), d);
        detail::soc_hbar_apply(soc_w0, soc_wt, tmp.data(), out, d);
        const double e2 = soc_eta * soc_eta;
        for (int i = 0; i < d; ++i) out[i] *= e2;
        return;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        Eigen::Map<const VectorXd> vv(v, svec_dim(k));
        MatrixXd M = psd_G * smat(vv, k) * psd_G;
        Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(M);
        return;
      }
    }
  }

  void apply_inv_WtW(const double* v, double* out) const {  // out = (W^T W)^{-1} v
    switch (block.kind) {
      case BlockKind::Nonnegative:
        for (int i = 0; i < block.size; ++i) out[i] = v[i] / (nn_w[i] * nn_w[i]);
        return;
      case BlockKind::SecondOrder: {
        // (W^T W)^{-1} = (1/eta^2) J Hbar^2 J
        const int d = block.size;
        VectorXd a(d), b(d);
        a[0] = v[0];
        for (int i = 1; i < d; ++i) a[i] = -v[i];
        detail::soc_hbar_apply(soc_w0, soc_wt, a.data(), b.data(), d);
        detail::soc_hbar_apply(soc_w0, soc_wt, b.data(), a.data(), d);
        const double e2 = soc_eta * soc_eta;
        out[0] = a[0] / e2;
        for (int i = 1; i < d; ++i) out[i] = -a[i] / e2;
        return;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        Eigen::Map<const VectorXd> vv(v, svec_dim(k));
        MatrixXd M = psd_Ginv * smat(vv, k) * psd_Ginv;
        Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(M);
        return;
      }
    }
  }

  // --- Jordan algebra ---

  // out = u o v
  void jordan_product(const double* u, const double* v, double* out) const {
    switch (block.kind) {
      case BlockKind::Nonnegative:
        for (int i = 0; i < block.size; ++i) out[i] = u[i] * v[i];
        return;
      case BlockKind::SecondOrder: {
        const int d = block.size;
        double dot = 0;
        for (int i = 0; i < d; ++i) dot += u[i] * v[i];
        for (int i = 1; i < d; ++i) out[i] = u[0] * v[i] + v[0] * u[i];
        out[0] = dot;
        return;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        Eigen::Map<const VectorXd> uu(u, svec_dim(k)), vv(v, svec_dim(k));
        MatrixXd U = smat(uu, k), V = smat(vv, k);
        MatrixXd M = 0.5 * (U * V + V * U);
        Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(M);
        return;
      }
    }
  }

  // out solves lambda o out = v (uses this block's scaled point lambda)
  bool jordan_solve(const double* v, double* out) const {
    switch (block.kind) {
      case BlockKind::Nonnegative:
        for (int i = 0; i < block.size; ++i) {
          if (lambda[i] == 0) return false;
          out[i] = v[i] / lambda[i];
        }
        return true;
      case BlockKind::SecondOrder: {
        const int d = block.size;
        const double a = lambda[0];
        const double det = a * a - lambda.tail(d - 1).squaredNorm();
        if (det <= 0 || a <= 0) return false;
        double bidot = 0;
        for (int i = 1; i < d; ++i) bidot += lambda[i] * v[i];
        out[0] = (a * v[0] - bidot) / det;
        for (int i = 1; i < d; ++i) out[i] = (v[i] - out[0] * lambda[i]) / a;
        return true;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        Eigen::Map<const VectorXd> vv(v, svec_dim(k));
        MatrixXd V = smat(vv, k);
        MatrixXd L = smat(lambda, k);  // diagonal by construction
        MatrixXd O(k, k);
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            const double den = L(i, i) + L(j, j);
            if (den == 0) return false;
            O(i, j) = 2.0 * V(i, j) / den;
          }
        Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(O);
        return true;
      }
    }
    return false;
  }

  // Largest t >= 0 with x + t*dx still in the (closed) cone; inf if unbounded.
  double step_to_boundary(const VectorXd& x, const VectorXd& dx) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (block.kind) {
      case BlockKind::Nonnegative: {
        double t = inf;
        for (int i = 0; i < block.size; ++i)
          if (dx[i] < 0) t = std::min(t, -x[i] / dx[i]);
        return t;
      }
      case BlockKind::SecondOrder: {
        const int d = block.size;
        // roots of (x0+t d0)^2 - |xt + t dt|^2 = 0
        const double a = dx[0] * dx[0] - dx.tail(d - 1).squaredNorm();
        const double b = 2.0 * (x[0] * dx[0] - x.tail(d - 1).dot(dx.tail(d - 1)));
        const double c = x[0] * x[0] - x.tail(d - 1).squaredNorm();
        double t = inf;
        if (dx[0] < 0) t = std::min(t, -x[0] / dx[0]);
        const double disc = b * b - 4 * a * c;
        if (std::abs(a) < 1e-300) {
          if (b < 0) t = std::min(t, -c / b);
        } else if (disc >= 0) {
          const double sd = std::sqrt(disc);
          const double r1 = (-b - sd) / (2 * a), r2 = (-b + sd) / (2 * a);
          for (double r : {std::min(r1, r2), std::max(r1, r2)})
            if (r > 0) {
              // valid boundary crossing only if head stays nonnegative
              if (x[0] + r * dx[0] >= -1e-14 * std::abs(x[0])) {
                t = std::min(t, r);
                break;
              }
            }
        }
        return t;
      }
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        // boundary at -1/lambda_min(L^{-1} dX L^{-T}) for X = L L^T;
        // x here may be either the primal or the dual block.
        MatrixXd X = smat(x, k);
        Eigen::LLT<MatrixXd> llt(X);
        if (llt.info() != Eigen::Success) return 0.0;
        MatrixXd L = llt.matrixL();
        MatrixXd D = smat(dx, k);
        MatrixXd B = L.triangularView<Eigen::Lower>().solve(D);
        B = L.triangularView<Eigen::Lower>().solve(B.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (B + B.transpose()),
                                                   Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        return lmin >= 0 ? inf : -1.0 / lmin;
      }
    }
    return 0;
  }

  // Identity element of the block's Jordan algebra.
  void identity(double* out) const {
    switch (block.kind) {
      case BlockKind::Nonnegative:
        for (int i = 0; i < block.size; ++i) out[i] = 1.0;
        return;
      case BlockKind::SecondOrder:
        out[0] = 1.0;
        for (int i = 1; i < block.size; ++i) out[i] = 0.0;
        return;
      case BlockKind::SemidefiniteReal: {
        const int k = block.size;
        Eigen::Map<VectorXd>(out, svec_dim(k)) = svec(MatrixXd::Identity(k, k));
        return;
      }
    }
  }
};

}  // namespace slatkit::conic
