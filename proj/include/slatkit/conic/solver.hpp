#pragma once

// Primal-dual path-following solver for standard-form cone programs,
// using the homogeneous self-dual embedding, Nesterov-Todd scaling and
// a Mehrotra predictor-corrector step.  Dense block factorizations; no
// global state; deterministic for identical inputs.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <vector>

#include "slatkit/conic/problem.hpp"

namespace slatkit::conic {

/// Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a complex
/// Hermitian matrix; PSD iff H is PSD, each eigenvalue doubled.
inline MatrixXd hermitian_embed(const Eigen::MatrixXcd& h) {
  const Eigen::Index k = h.rows();
  if (h.cols() != k) throw config_error("hermitian_embed: matrix not square");
  double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (((h - h.adjoint()).cwiseAbs().maxCoeff()) > 1e-12 * scale)
    throw config_error("hermitian_embed: input not Hermitian");
  MatrixXd e(2 * k, 2 * k);
  e.topLeftCorner(k, k) = h.real();
  e.bottomRightCorner(k, k) = h.real();
  e.topRightCorner(k, k) = -h.imag();
  e.bottomLeftCorner(k, k) = h.imag();
  return e;
}

/// Inverse of the embedding on (averaged) 2k x 2k symmetric matrices.
inline Eigen::MatrixXcd hermitian_unembed(const MatrixXd& x) {
  const Eigen::Index k = x.rows() / 2;
  MatrixXd re = 0.5 * (x.topLeftCorner(k, k) + x.bottomRightCorner(k, k));
  MatrixXd im = 0.5 * (x.bottomLeftCorner(k, k) - x.bottomLeftCorner(k, k).transpose());
  re = 0.5 * (re + re.transpose()).eval();
  return re + std::complex<double>(0, 1) * im;
}

namespace detail {

struct BlockLayout {
  std::vector<BlockScaling> scalings;
  std::vector<int> offsets;
  int dim = 0;

  explicit BlockLayout(const ConeSpec& spec) {
    for (const auto& b : spec.blocks) {
      BlockScaling sc;
      sc.block = b;
      offsets.push_back(dim);
      dim += b.vec_dim();
      scalings.push_back(std::move(sc));
    }
  }

  template <typename F>
  void each(F&& f) {
    for (std::size_t i = 0; i < scalings.size(); ++i) f(scalings[i], offsets[i]);
  }

  bool compute(const VectorXd& x, const VectorXd& s) {
    bool ok = true;
    each([&](BlockScaling& sc, int off) {
      if (!ok) return;
      ok = sc.compute(x.segment(off, sc.block.vec_dim()),
                      s.segment(off, sc.block.vec_dim()));
    });
    return ok;
  }

  VectorXd lambda() const {
    VectorXd out(dim);
    for (std::size_t i = 0; i < scalings.size(); ++i)
      out.segment(offsets[i], scalings[i].block.vec_dim()) = scalings[i].lambda;
    return out;
  }

#define SLATKIT_BLOCK_APPLY(NAME)                                        \
  VectorXd NAME(const VectorXd& v) {                                    \
    VectorXd out(dim);                                                  \
    each([&](BlockScaling& sc, int off) {                               \
      sc.NAME(v.data() + off, out.data() + off);                        \
    });                                                                 \
    return out;                                                         \
  }
  SLATKIT_BLOCK_APPLY(apply_W)
  SLATKIT_BLOCK_APPLY(apply_Winv)
  SLATKIT_BLOCK_APPLY(apply_WinvT)
  SLATKIT_BLOCK_APPLY(apply_WtW)
  SLATKIT_BLOCK_APPLY(apply_inv_WtW)
#undef SLATKIT_BLOCK_APPLY

  VectorXd jordan_product(const VectorXd& u, const VectorXd& v) {
    VectorXd out(dim);
    each([&](BlockScaling& sc, int off) {
      sc.jordan_product(u.data() + off, v.data() + off, out.data() + off);
    });
    return out;
  }

  bool jordan_solve(const VectorXd& v, VectorXd& out) {
    out.resize(dim);
    bool ok = true;
    each([&](BlockScaling& sc, int off) {
      if (ok) ok = sc.jordan_solve(v.data() + off, out.data() + off);
    });
    return ok;
  }

  double step_to_boundary(const VectorXd& x, const VectorXd& dx) {
    double t = std::numeric_limits<double>::infinity();
    each([&](BlockScaling& sc, int off) {
      t = std::min(t, sc.step_to_boundary(x.segment(off, sc.block.vec_dim()),
                                          dx.segment(off, sc.block.vec_dim())));
    });
    return t;
  }

  VectorXd identity_e() const {
    VectorXd out(dim);
    for (std::size_t i = 0; i < scalings.size(); ++i)
      scalings[i].identity(out.data() + offsets[i]);
    return out;
  }
};

// Removes linearly dependent equality rows (pivot threshold 1e-10) and
// checks that the dropped rows are consistent with the kept ones.
// Returns false (infeasible) when an eliminated row contradicts the rest;
// `keep` receives the retained original row indices.
inline bool reduce_rows(Eigen::SparseMatrix<double>& a, VectorXd& b,
                        std::vector<Eigen::Index>& keep) {
  const Eigen::Index p = a.rows();
  keep.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) keep[i] = i;
  if (p == 0) return true;
  MatrixXd at = MatrixXd(a).transpose();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(at);
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  if (r == p) return true;

  const auto& perm = qr.colsPermutation().indices();
  keep.assign(perm.data(), perm.data() + r);
  std::vector<Eigen::Index> drop(perm.data() + r, perm.data() + p);

  // Express dropped rows in terms of kept ones to test b-consistency.
  MatrixXd rfull = qr.matrixR().template triangularView<Eigen::Upper>();
  MatrixXd r11 = rfull.topLeftCorner(r, r);
  MatrixXd r12 = rfull.topRows(r).rightCols(p - r);
  MatrixXd t = r11.template triangularView<Eigen::Upper>().solve(r12);
  VectorXd b_keep(r);
  for (Eigen::Index i = 0; i < r; ++i) b_keep[i] = b[keep[i]];
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(drop.size()); ++j) {
    const double predicted = t.col(j).dot(b_keep);
    if (std::abs(predicted - b[drop[j]]) > 1e-8 * scale) return false;
  }

  Eigen::SparseMatrix<double> reduced(r, a.cols());
  std::vector<Eigen::Triplet<double>> trips;
  MatrixXd adense(a);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (adense(keep[i], j) != 0.0) trips.emplace_back(i, j, adense(keep[i], j));
  reduced.setFromTriplets(trips.begin(), trips.end());
  a.swap(reduced);
  b = b_keep;
  return true;
}

}  // namespace detail

class InteriorPointSolver {
 public:
  ConicSolution solve(const ConicProblem& problem, const SolveOptions& opt) {
    // Fast path assumes independent equality rows; fall back to QR row
    // reduction only when the initial Schur factorization says otherwise.
    bool rank_deficient = false;
    ConicSolution sol = solve_impl(problem, opt, false, rank_deficient);
    if (rank_deficient) sol = solve_impl(problem, opt, true, rank_deficient);
    return sol;
  }

 private:
  ConicSolution solve_impl(const ConicProblem& problem, const SolveOptions& opt,
                           bool reduce, bool& rank_deficient) {
    problem.validate();
    rank_deficient = false;
    ConicSolution sol;

    // Work on a row-equilibrated copy, with redundant rows removed when asked.
    Eigen::SparseMatrix<double> A = problem.A;
    VectorXd b = problem.b;
    std::vector<Eigen::Index> kept_rows;
    if (reduce) {
      if (!detail::reduce_rows(A, b, kept_rows)) {
        sol.status = SolveStatus::Infeasible;
        sol.x = VectorXd::Zero(problem.c.size());
        sol.s = sol.x;
        sol.y = VectorXd::Zero(problem.b.size());
        return sol;
      }
    } else {
      kept_rows.resize(A.rows());
      for (Eigen::Index i = 0; i < A.rows(); ++i) kept_rows[i] = i;
    }
    const Eigen::Index p = A.rows();
    const Eigen::Index n = A.cols();
    VectorXd rowscale = VectorXd::Ones(p);
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
        rowscale[it.row()] = std::max(rowscale[it.row()], std::abs(it.value()));
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
        it.valueRef() /= rowscale[it.row()];
    b.array() /= rowscale.array();

    const VectorXd& c = problem.c;
    MatrixXd At = MatrixXd(A).transpose();

    detail::BlockLayout cone(problem.cone);
    const double nu = problem.cone.barrier_degree() + 1;

    // HSD start
    VectorXd x = cone.identity_e();
    VectorXd s = cone.identity_e();
    VectorXd y = VectorXd::Zero(p);
    double tau = 1.0, kappa = 1.0;

    const double bnorm = std::max(1.0, b.norm());
    const double cnorm = std::max(1.0, c.norm());

    Eigen::LLT<MatrixXd> schur_llt;
    Eigen::LDLT<MatrixXd> schur_ldlt;
    bool use_ldlt = false;
    MatrixXd Y(n, p);

    auto schur_solve = [&](const VectorXd& r) -> VectorXd {
      if (use_ldlt) return schur_ldlt.solve(r);
      return schur_llt.solve(r);
    };

    // Saddle solve:  (W^{-1}W^{-T}) u - A' v = rx ;  A u = ry
    auto solve2_raw = [&](const VectorXd& rx, const VectorXd& ry, VectorXd& u,
                          VectorXd& v) {
      VectorXd hrx = cone.apply_WtW(rx);
      if (p > 0) {
        v = schur_solve(ry - A * hrx);
        u = hrx + cone.apply_WtW(At * v);
      } else {
        v.resize(0);
        u = hrx;
      }
    };
    auto solve2 = [&](const VectorXd& rx, const VectorXd& ry, VectorXd& u, VectorXd& v) {
      solve2_raw(rx, ry, u, v);
      const double scale = std::max({1.0, rx.cwiseAbs().maxCoeff(),
                                     ry.size() ? ry.cwiseAbs().maxCoeff() : 0.0});
      for (int pass = 0; pass < 3; ++pass) {
        VectorXd res_x = rx - cone.apply_inv_WtW(u);
        if (p > 0) res_x += At * v;
        VectorXd res_y = p > 0 ? VectorXd(ry - A * u) : VectorXd();
        const double rnorm = std::max(res_x.cwiseAbs().maxCoeff(),
                                      res_y.size() ? res_y.cwiseAbs().maxCoeff() : 0.0);
        if (rnorm < 1e-14 * scale) break;
        VectorXd du, dv;
        solve2_raw(res_x, res_y, du, dv);
        u += du;
        if (p > 0) v += dv;
      }
    };

    double best_score = std::numeric_limits<double>::infinity();
    VectorXd best_x = x, best_y = y, best_s = s;
    double best_tau = tau;
    int best_iter = 0;
    int stall = 0;

    // Map multipliers of the reduced, row-scaled system back onto the
    // caller's equality rows.
    auto scatter_y = [&](const VectorXd& yred) {
      VectorXd out = VectorXd::Zero(problem.b.size());
      for (Eigen::Index i = 0; i < yred.size(); ++i)
        out[kept_rows[i]] = yred[i] / rowscale[i];
      return out;
    };

    auto finalize = [&](SolveStatus status) {
      sol.status = status;
      // report the best iterate seen for any non-optimal exit
      const bool use_best = status != SolveStatus::Optimal;
      const double t = use_best ? best_tau : tau;
      const VectorXd& fx = use_best ? best_x : x;
      const VectorXd& fy = use_best ? best_y : y;
      const VectorXd& fs = use_best ? best_s : s;
      sol.x = fx / t;
      sol.y = scatter_y(fy / t);
      sol.s = fs / t;
      sol.objective = c.dot(sol.x);
      sol.gap = sol.x.dot(sol.s);
      sol.pinfeas = (A * sol.x - b).norm() / bnorm;
      sol.dinfeas = (At * (fy / t) + sol.s - c).norm() / cnorm;
      return sol;
    };

    for (int iter = 0; iter < opt.max_iters; ++iter) {
      sol.iterations = iter;
      VectorXd Rp = A * x - b * tau;
      VectorXd Rd = c * tau - s;
      if (p > 0) Rd -= At * y;
      const double Rg = b.dot(y) - c.dot(x) - kappa;
      const double xs = x.dot(s);
      const double mu = (xs + tau * kappa) / nu;

      const double pobj = c.dot(x) / tau;
      const double dobj_plain = b.dot(y) / tau;
      const double dobj = dobj_plain + (x.dot(Rd) + y.dot(Rp)) / (tau * tau);
      const double pinf = (A * x / tau - b).norm() / bnorm;
      const double dinf = (Rd / tau).norm() / cnorm;  // Rd/tau = c - (A'y+s)/tau
      const double gap_abs = xs / (tau * tau);
      const double relgap =
          gap_abs / std::max({1.0, std::abs(pobj), std::abs(dobj_plain)});

      if (opt.keep_trace) {
        IterateInfo info;
        info.primal_obj = pobj;
        info.dual_obj = dobj;
        info.pinfeas = pinf;
        info.dinfeas = dinf;
        info.relgap = relgap;
        info.mu = mu;
        sol.trace.push_back(info);
      }

      const double score = std::max({pinf, dinf, relgap});
      if (score < 0.98 * best_score) {
        best_score = score;
        best_x = x;
        best_y = y;
        best_s = s;
        best_tau = tau;
        best_iter = iter;
      }
      // residuals have stopped improving: further steps only grind on a
      // boundary-crushed scaling, so stop with the best point found
      if (iter - best_iter >= 8) return finalize(SolveStatus::MaxIterations);

      if (pinf <= opt.feas_tol && dinf <= opt.feas_tol && relgap <= opt.gap_tol)
        return finalize(SolveStatus::Optimal);

      // Certificates of primal/dual infeasibility.
      const double by = b.dot(y);
      if (by > 0) {
        const double res = p > 0 ? (At * y + s).norm() : s.norm();
        if (res / by <= opt.feas_tol * cnorm) {
          sol.status = SolveStatus::Infeasible;
          sol.x = VectorXd::Zero(n);
          sol.y = scatter_y(y / by);
          sol.s = s / by;
          return sol;
        }
      }
      const double cx = c.dot(x);
      if (cx < 0) {
        const double res = (A * x).norm();
        if (res / (-cx) <= opt.feas_tol * bnorm) {
          sol.status = SolveStatus::Unbounded;
          sol.x = x / (-cx);
          sol.y = VectorXd::Zero(problem.b.size());
          sol.s = VectorXd::Zero(n);
          return sol;
        }
      }

      if (!cone.compute(x, s)) return finalize(SolveStatus::NumericalFailure);
      VectorXd lambda = cone.lambda();

      // Schur complement A (W'W) A' and its factorization.
      if (p > 0) {
        for (Eigen::Index j = 0; j < p; ++j) {
          VectorXd col = At.col(j);
          Y.col(j) = cone.apply_WtW(col);
        }
        MatrixXd S = A * Y;
        schur_llt.compute(S);
        use_ldlt = false;
        bool singular = schur_llt.info() != Eigen::Success;
        if (!singular && iter == 0) {
          const auto diag = schur_llt.matrixLLT().diagonal();
          singular = diag.minCoeff() < 1e-10 * std::max(1e-300, diag.maxCoeff());
        }
        if (singular && iter == 0 && !reduce) {
          // A A' singular at the identity scaling: equality rows are
          // linearly dependent; redo with QR preprocessing.
          rank_deficient = true;
          return finalize(SolveStatus::NumericalFailure);
        }
        if (singular) {
          double ridge = 1e-12 * S.trace() / static_cast<double>(p);
          bool ok = false;
          for (int attempt = 0; attempt < 6 && !ok; ++attempt) {
            schur_llt.compute(S + ridge * MatrixXd::Identity(p, p));
            ok = schur_llt.info() == Eigen::Success;
            ridge *= 100;
          }
          if (!ok) {
            schur_ldlt.compute(S);
            use_ldlt = true;
            if (schur_ldlt.info() != Eigen::Success)
              return finalize(SolveStatus::NumericalFailure);
          }
        }
      }

      VectorXd u2, v2;
      solve2(-c, b, u2, v2);
      const double tau_den = b.dot(v2) - c.dot(u2) + kappa / tau;

      // `g` is W^{-1}(lambda \ d_c) supplied directly by the caller so the
      // affine case can use the cancellation-free identity g = -s.
      auto direction = [&](double eta, const VectorXd& g, double dtk, VectorXd& dx,
                           VectorXd& dy, VectorXd& ds, double& dtau,
                           double& dkappa) -> bool {
        VectorXd u1, v1;
        solve2(-eta * Rd + g, -eta * Rp, u1, v1);
        const double num = -eta * Rg + c.dot(u1) - b.dot(v1) + dtk / tau;
        if (std::abs(tau_den) < 1e-300) return false;
        dtau = num / tau_den;
        dx = u1 + dtau * u2;
        dy = v1 + dtau * v2;
        // recover ds from the dual-feasibility row, which keeps the dual
        // residual contracting even when the reduced solve loses digits
        ds = eta * Rd + c * dtau;
        if (p > 0) ds -= At * dy;
        dkappa = (dtk - kappa * dtau) / tau;
        return true;
      };

      // Affine (predictor) direction: lambda \ (-lambda o lambda) = -lambda
      // and W^{-1} lambda = s exactly.
      VectorXd dxa, dya, dsa;
      double dtaua, dkappaa;
      if (!direction(1.0, -s, -tau * kappa, dxa, dya, dsa, dtaua, dkappaa))
        return finalize(SolveStatus::NumericalFailure);

      double alpha_aff = std::min(cone.step_to_boundary(x, dxa),
                                  cone.step_to_boundary(s, dsa));
      if (dtaua < 0) alpha_aff = std::min(alpha_aff, -tau / dtaua);
      if (dkappaa < 0) alpha_aff = std::min(alpha_aff, -kappa / dkappaa);
      alpha_aff = std::min(alpha_aff, 1.0);

      const double mu_aff = ((x + alpha_aff * dxa).dot(s + alpha_aff * dsa) +
                             (tau + alpha_aff * dtaua) * (kappa + alpha_aff * dkappaa)) /
                            nu;
      double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
      sigma = std::min(1.0, sigma);

      // Combined (corrector) direction; its g splits into the exact affine
      // part -s plus the centering/correction remainder.
      VectorXd corr = cone.jordan_product(cone.apply_WinvT(dxa), cone.apply_W(dsa));
      VectorXd extra = sigma * mu * cone.identity_e() - corr;
      VectorXd lam_extra;
      if (!cone.jordan_solve(extra, lam_extra))
        return finalize(SolveStatus::NumericalFailure);
      VectorXd g = -s + cone.apply_Winv(lam_extra);
      const double dtk = -tau * kappa - dtaua * dkappaa + sigma * mu;
      VectorXd dx, dy, ds;
      double dtau, dkappa;
      if (!direction(1.0 - sigma, g, dtk, dx, dy, ds, dtau, dkappa))
        return finalize(SolveStatus::NumericalFailure);

      double alpha = std::min(cone.step_to_boundary(x, dx), cone.step_to_boundary(s, ds));
      if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
      if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
      alpha = std::min(0.98 * alpha, 1.0);

      // If the second-order correction crushes the step, fall back to the
      // plain centering direction for this iteration.
      if (alpha < 0.1) {
        VectorXd lam_ctr;
        if (cone.jordan_solve(sigma * mu * cone.identity_e(), lam_ctr)) {
          VectorXd gc = -s + cone.apply_Winv(lam_ctr);
          VectorXd dx2, dy2, ds2;
          double dtau2, dkappa2;
          const double dtk2 = -tau * kappa + sigma * mu;
          if (direction(1.0 - sigma, gc, dtk2, dx2, dy2, ds2, dtau2, dkappa2)) {
            double alpha2 = std::min(cone.step_to_boundary(x, dx2),
                                     cone.step_to_boundary(s, ds2));
            if (dtau2 < 0) alpha2 = std::min(alpha2, -tau / dtau2);
            if (dkappa2 < 0) alpha2 = std::min(alpha2, -kappa / dkappa2);
            alpha2 = std::min(0.98 * alpha2, 1.0);
            if (alpha2 > alpha) {
              alpha = alpha2;
              dx = dx2;
              dy = dy2;
              ds = ds2;
              dtau = dtau2;
              dkappa = dkappa2;
            }
          }
        }
      }

      if (!std::isfinite(alpha) || alpha <= 1e-10) {
        if (++stall >= 6) return finalize(SolveStatus::MaxIterations);
      } else {
        stall = 0;
      }

      x += alpha * dx;
      y += alpha * dy;
      s += alpha * ds;
      tau += alpha * dtau;
      kappa += alpha * dkappa;
      if (opt.keep_trace && !sol.trace.empty()) sol.trace.back().step = alpha;

      if (!x.allFinite() || !s.allFinite() || !std::isfinite(tau) || tau <= 0 ||
          kappa <= 0)
        return finalize(SolveStatus::NumericalFailure);
    }
    sol.iterations = opt.max_iters;
    return finalize(SolveStatus::MaxIterations);
  }
};

// Optional external backend registered behind the same interface; the
// embedded solver is the default.
using SolverBackend = std::function<ConicSolution(const ConicProblem&, const SolveOptions&)>;

namespace detail {
inline std::mutex& backend_mutex() {
  static std::mutex m;
  return m;
}
inline SolverBackend& backend_slot() {
  static SolverBackend fn;
  return fn;
}
}  // namespace detail

inline void set_solver_backend(SolverBackend fn) {
  std::lock_guard<std::mutex> lk(detail::backend_mutex());
  detail::backend_slot() = std::move(fn);
}

inline ConicSolution solve(const ConicProblem& p, const SolveOptions& opt = {}) {
  SolverBackend fn;
  {
    std::lock_guard<std::mutex> lk(detail::backend_mutex());
    fn = detail::backend_slot();
  }
  if (fn) return fn(p, opt);
  InteriorPointSolver solver;
  return solver.solve(p, opt);
}

}  // namespace slatkit::conic
