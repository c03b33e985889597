#pragma once

// Distance-matrix completion initializers: the partial pre-distance matrix,
// its three completion relaxations (squared ranges, plain ranges, plain
// ranges with an l1-style convex envelope) and coordinate extraction via
// Gram factorization plus anchor alignment.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "slatkit/conic/solver.hpp"
#include "slatkit/model.hpp"

namespace slatkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Index convention, fixed repo-wide: 0..n-1 sensors, n..n+m-1 targets,
// n+m..rho-1 anchors, rho = n + m + l.
struct PartialEDM {
  MatrixXd D;  // squared observed distances at masked entries, 0 elsewhere
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> W;  // observation mask
  int n = 0, m = 0, l = 0;

  int rho() const { return n + m + l; }
  bool is_anchor(int i) const { return i >= n + m; }

  // Masked index pairs (i < j) that enter completion objectives; the
  // anchor block is pinned separately and stays out of the objective.
  std::vector<std::pair<int, int>> objective_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int j = 0; j < rho(); ++j)
      for (int i = j + 1; i < rho(); ++i)
        if (W(i, j) && !(is_anchor(i) && is_anchor(j))) out.emplace_back(i, j);
    return out;
  }
  std::vector<std::pair<int, int>> anchor_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int j = n + m; j < rho(); ++j)
      for (int i = j + 1; i < rho(); ++i) out.emplace_back(i, j);
    return out;
  }
};

struct EDMSolution {
  MatrixXd E;
  double objective_value = 0.0;
  conic::SolveStatus solver_status = conic::SolveStatus::NumericalFailure;
  VectorXd epigraph;  // per-pair T values for the plain-range relaxations
  int iterations = 0;
};

struct CompletionOptions {
  std::optional<conic::SolveOptions> solver;  // per-relaxation defaults if unset
  std::function<void(const conic::ConicProblem&)> inspect;  // e.g. --dump-conic
};

// Per-relaxation solver tolerances.  The squared-range objective makes its
// epigraph cone tight with strong cancellation in the last interior steps,
// so it gets a slightly looser gap; the plain-range relaxations have a
// second-order-flat optimum whose E is determined to ~gap^(1/4), so they
// are pushed deeper.
inline conic::SolveOptions sr_solve_defaults() {
  conic::SolveOptions o;
  o.feas_tol = 1e-8;
  o.gap_tol = 3e-8;
  return o;
}
inline conic::SolveOptions plain_range_solve_defaults() {
  conic::SolveOptions o;
  o.feas_tol = 1e-9;
  o.gap_tol = 1e-10;
  return o;
}

inline PartialEDM build_partial_edm(const std::vector<Point2>& anchors, std::size_t n,
                                    std::size_t m, const RangeData& r) {
  PartialEDM p;
  p.n = static_cast<int>(n);
  p.m = static_cast<int>(m);
  p.l = static_cast<int>(anchors.size());
  const int rho = p.rho();
  p.D = MatrixXd::Zero(rho, rho);
  p.W.setConstant(rho, rho, false);
  for (int i = 0; i < rho; ++i) p.W(i, i) = true;

  auto set = [&](int a, int b, double d) {
    p.D(a, b) = p.D(b, a) = d * d;
    p.W(a, b) = p.W(b, a) = true;
  };
  for (auto [key, d] : r.sensor_target) {
    if (key.first >= n || key.second >= m) throw config_error("range index out of bounds");
    set(static_cast<int>(key.first), static_cast<int>(n + key.second), d);
  }
  for (auto [key, d] : r.anchor_target) {
    if (key.first >= anchors.size() || key.second >= m)
      throw config_error("range index out of bounds");
    set(static_cast<int>(n + m + key.first), static_cast<int>(n + key.second), d);
  }
  for (std::size_t k = 0; k < anchors.size(); ++k)
    for (std::size_t k2 = k + 1; k2 < anchors.size(); ++k2)
      set(static_cast<int>(n + m + k), static_cast<int>(n + m + k2),
          distance(anchors[k], anchors[k2]));
  return p;
}

namespace detail {

// Orthonormal basis U (rho x rho-1) of the centering subspace 1-perp,
// via the Householder reflection mapping e_1 onto 1/sqrt(rho).
inline MatrixXd centering_basis(int rho) {
  VectorXd v = VectorXd::Constant(rho, 1.0 / std::sqrt(static_cast<double>(rho)));
  v[0] -= 1.0;
  MatrixXd h = MatrixXd::Identity(rho, rho) - (2.0 / v.squaredNorm()) * (v * v.transpose());
  return h.rightCols(rho - 1);
}

// Entries of an EDM expressed through the centered Gram parameter Q
// (PSD, side rho-1): E_ij = 0.5 * (u_i - u_j)' Q (u_i - u_j).
struct EdmTranscription {
  MatrixXd U;
  int rho;

  explicit EdmTranscription(int rho_) : U(centering_basis(rho_)), rho(rho_) {}

  // Adds the svec(Q) coefficients of coef * E_ij to builder row `row`.
  void add_entry_coefs(conic::ProblemBuilder& pb, int row, int qoff, int i, int j,
                       double coef) const {
    const int k = rho - 1;
    VectorXd delta = (U.row(i) - U.row(j)).transpose();
    const double s2 = std::sqrt(2.0);
    int idx = 0;
    for (int b = 0; b < k; ++b)
      for (int a = b; a < k; ++a) {
        const double mab = 0.5 * delta[a] * delta[b];
        pb.coef(row, qoff + idx, coef * (a == b ? mab : s2 * mab));
        ++idx;
      }
  }

  MatrixXd recover_E(const VectorXd& x, int qoff) const {
    const int k = rho - 1;
    MatrixXd Q = conic::smat(x.segment(qoff, conic::svec_dim(k)), k);
    MatrixXd G = 0.5 * U * Q * U.transpose();
    MatrixXd E(rho, rho);
    for (int i = 0; i < rho; ++i)
      for (int j = 0; j < rho; ++j) E(i, j) = G(i, i) + G(j, j) - 2.0 * G(i, j);
    E.diagonal().setZero();
    return E;
  }
};

inline void pin_anchor_block(conic::ProblemBuilder& pb, const EdmTranscription& tr,
                             int qoff, const PartialEDM& p) {
  for (auto [i, j] : p.anchor_pairs()) {
    int row = pb.new_row(p.D(i, j));
    tr.add_entry_coefs(pb, row, qoff, i, j, 1.0);
  }
}

inline EDMSolution finish_edm(const conic::ConicSolution& sol,
                              const detail::EdmTranscription& tr, int qoff) {
  const bool usable =
      sol.status == conic::SolveStatus::Optimal ||
      (sol.status == conic::SolveStatus::MaxIterations &&
       std::max({sol.pinfeas, sol.dinfeas, std::abs(sol.gap)}) <= 1e-6);
  if (!usable)
    throw solver_error(std::string("EDM completion failed: ") +
                       conic::to_string(sol.status));
  EDMSolution out;
  out.solver_status = sol.status;
  out.iterations = sol.iterations;
  out.E = tr.recover_E(sol.x, qoff);
  return out;
}

}  // namespace detail

/// Nearest-EDM completion matching squared ranges over the mask.
inline EDMSolution complete_edm_sr(const PartialEDM& p, const CompletionOptions& opt = {}) {
  const auto pairs = p.objective_pairs();
  detail::EdmTranscription tr(p.rho());
  conic::ProblemBuilder pb;
  const int qoff = pb.add_psd(p.rho() - 1);
  const int soc = pb.add_soc(1 + static_cast<int>(pairs.size()));
  pb.obj(soc, 1.0);
  const double s2 = std::sqrt(2.0);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    auto [i, j] = pairs[t];
    int row = pb.new_row(-s2 * p.D(i, j));
    pb.coef(row, soc + 1 + static_cast<int>(t), 1.0);
    tr.add_entry_coefs(pb, row, qoff, i, j, -s2);
  }
  detail::pin_anchor_block(pb, tr, qoff, p);
  auto problem = pb.build();
  if (opt.inspect) opt.inspect(problem);
  auto sol = conic::solve(problem, opt.solver.value_or(sr_solve_defaults()));
  EDMSolution out = detail::finish_edm(sol, tr, qoff);
  double acc = 0.0;
  for (int j = 0; j < p.rho(); ++j)
    for (int i = 0; i < p.rho(); ++i)
      if (p.W(i, j)) acc += (out.E(i, j) - p.D(i, j)) * (out.E(i, j) - p.D(i, j));
  out.objective_value = acc;
  return out;
}

/// Completion matching plain ranges through the epigraph relaxation
/// T_ij^2 <= E_ij with objective sum(E_ij - 2 d_ij T_ij).
inline EDMSolution complete_edm_r(const PartialEDM& p, const CompletionOptions& opt = {}) {
  const auto pairs = p.objective_pairs();
  detail::EdmTranscription tr(p.rho());
  conic::ProblemBuilder pb;
  const int qoff = pb.add_psd(p.rho() - 1);
  std::vector<int> socs;
  socs.reserve(pairs.size());
  for (std::size_t t = 0; t < pairs.size(); ++t) socs.push_back(pb.add_soc(3));
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    auto [i, j] = pairs[t];
    const int z = socs[t];
    // z = (E+1, 2T, E-1)
    pb.obj(z + 0, 0.5);
    pb.obj(z + 2, 0.5);
    pb.obj(z + 1, -p.D.cwiseSqrt()(i, j));
    int consistency = pb.new_row(2.0);
    pb.coef(consistency, z + 0, 1.0);
    pb.coef(consistency, z + 2, -1.0);
    int link = pb.new_row(0.0);
    pb.coef(link, z + 0, 0.5);
    pb.coef(link, z + 2, 0.5);
    tr.add_entry_coefs(pb, link, qoff, i, j, -1.0);
  }
  detail::pin_anchor_block(pb, tr, qoff, p);
  auto problem = pb.build();
  if (opt.inspect) opt.inspect(problem);
  auto sol = conic::solve(problem, opt.solver.value_or(plain_range_solve_defaults()));
  EDMSolution out = detail::finish_edm(sol, tr, qoff);
  out.epigraph.resize(static_cast<Eigen::Index>(pairs.size()));
  double acc = 0.0;
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    auto [i, j] = pairs[t];
    const double T = 0.5 * sol.x[socs[t] + 1];
    out.epigraph[static_cast<Eigen::Index>(t)] = T;
    acc += out.E(i, j) - 2.0 * T * std::sqrt(p.D(i, j));
  }
  out.objective_value = acc;
  return out;
}

/// Robust completion: minimize sum T_ij subject to (d_ij - T_ij)^2 <= E_ij
/// and the linearized concave piece a_ij E_ij + b_ij <= T_ij, where
/// a_ij = 1/(sqrt(e_max) + d_ij), b_ij = -d_ij^2/(sqrt(e_max) + d_ij).
inline EDMSolution complete_edm_r_l1(const PartialEDM& p, double e_max,
                                     const CompletionOptions& opt = {}) {
  const auto pairs = p.objective_pairs();
  double dmax2 = 0.0;
  for (auto [i, j] : pairs) dmax2 = std::max(dmax2, p.D(i, j));
  if (e_max < dmax2) throw config_error("e_max below largest observed squared range");
  const double semax = std::sqrt(e_max);

  detail::EdmTranscription tr(p.rho());
  conic::ProblemBuilder pb;
  const int qoff = pb.add_psd(p.rho() - 1);
  std::vector<int> socs;
  socs.reserve(pairs.size());
  for (std::size_t t = 0; t < pairs.size(); ++t) socs.push_back(pb.add_soc(3));
  const int slack = pb.add_nonneg(static_cast<int>(pairs.size()));
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    auto [i, j] = pairs[t];
    const double d = std::sqrt(p.D(i, j));
    const double a = 1.0 / (semax + d);
    const double benv = -p.D(i, j) / (semax + d);
    const int z = socs[t];
    // z = (E+1, 2(d-T), E-1); T = d - z1/2
    pb.obj(z + 1, -0.5);  // sum T up to a constant
    int consistency = pb.new_row(2.0);
    pb.coef(consistency, z + 0, 1.0);
    pb.coef(consistency, z + 2, -1.0);
    int link = pb.new_row(0.0);
    pb.coef(link, z + 0, 0.5);
    pb.coef(link, z + 2, 0.5);
    tr.add_entry_coefs(pb, link, qoff, i, j, -1.0);
    // envelope slack: s = T - a E - benv >= 0
    int env = pb.new_row(d - benv);
    pb.coef(env, slack + static_cast<int>(t), 1.0);
    pb.coef(env, z + 1, 0.5);
    pb.coef(env, z + 0, 0.5 * a);
    pb.coef(env, z + 2, 0.5 * a);
  }
  detail::pin_anchor_block(pb, tr, qoff, p);
  auto problem = pb.build();
  if (opt.inspect) opt.inspect(problem);
  auto sol = conic::solve(problem, opt.solver.value_or(plain_range_solve_defaults()));
  EDMSolution out = detail::finish_edm(sol, tr, qoff);
  out.epigraph.resize(static_cast<Eigen::Index>(pairs.size()));
  double acc = 0.0;
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const double d = std::sqrt(p.D(pairs[t].first, pairs[t].second));
    const double T = d - 0.5 * sol.x[socs[t] + 1];
    out.epigraph[static_cast<Eigen::Index>(t)] = T;
    acc += T;
  }
  out.objective_value = acc;
  return out;
}

/// Default practical upper bound on squared ranges for the l1 relaxation.
inline double default_e_max(const PartialEDM& p) {
  double dmax = 0.0;
  for (auto [i, j] : p.objective_pairs()) dmax = std::max(dmax, std::sqrt(p.D(i, j)));
  const double r = 1.5 * dmax;
  return r * r;
}

struct ExtractedCoords {
  StackedCoords coords;         // sensors then targets
  double anchor_fit_residual;   // Procrustes objective at the optimum
};

/// Gram factorization of a completed EDM, rank-2 truncation, and O(2)
/// Procrustes alignment of the extracted anchor columns onto the true
/// anchors (translation + rotation, reflection resolved by the sign of
/// the determinant as needed).
inline ExtractedCoords extract_coordinates(const EDMSolution& e,
                                           const std::vector<Point2>& anchors) {
  const int rho = static_cast<int>(e.E.rows());
  const int l = static_cast<int>(anchors.size());
  if (l < 3) throw config_error("need at least 3 anchors to align");
  if (rho < l) throw config_error("EDM smaller than anchor set");
  const int nm = rho - l;

  MatrixXd J = MatrixXd::Identity(rho, rho) -
               MatrixXd::Constant(rho, rho, 1.0 / static_cast<double>(rho));
  MatrixXd G = -0.5 * J * e.E * J;
  G = (0.5 * (G + G.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  const VectorXd& ev = es.eigenvalues();  // ascending
  const double lmax = std::max(ev[rho - 1], 0.0);
  if (rho < 2 || ev[rho - 2] <= 1e-12 * std::max(1.0, lmax))
    throw solver_error("degenerate geometry: fewer than 2 positive Gram eigenvalues");

  MatrixXd config(2, rho);
  for (int r = 0; r < 2; ++r) {
    const double lam = std::max(ev[rho - 1 - r], 0.0);
    config.row(r) = std::sqrt(lam) * es.eigenvectors().col(rho - 1 - r).transpose();
  }

  // Procrustes over O(2): rotation or reflection, whichever fits.
  Eigen::Vector2d a_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d x_mean = Eigen::Vector2d::Zero();
  for (int k = 0; k < l; ++k) {
    a_mean += Eigen::Vector2d(anchors[k].x, anchors[k].y);
    x_mean += config.col(nm + k);
  }
  a_mean /= l;
  x_mean /= l;
  Eigen::Matrix2d cross = Eigen::Matrix2d::Zero();
  for (int k = 0; k < l; ++k) {
    Eigen::Vector2d a(anchors[k].x, anchors[k].y);
    cross += (a - a_mean) * (config.col(nm + k) - x_mean).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d rot = svd.matrixU() * svd.matrixV().transpose();
  Eigen::Vector2d shift = a_mean - rot * x_mean;

  ExtractedCoords out;
  out.coords.resize(2 * nm);
  for (int i = 0; i < nm; ++i)
    out.coords.segment<2>(2 * i) = rot * config.col(i) + shift;
  double res = 0.0;
  for (int k = 0; k < l; ++k) {
    Eigen::Vector2d fitted = rot * config.col(nm + k) + shift;
    res += (fitted - Eigen::Vector2d(anchors[k].x, anchors[k].y)).squaredNorm();
  }
  out.anchor_fit_residual = res;
  return out;
}

/// Checks the EDM-cone membership invariants used throughout the tests.
inline bool edm_invariants_hold(const MatrixXd& E, double* min_gram_eig = nullptr) {
  const int rho = static_cast<int>(E.rows());
  if (E.diagonal().cwiseAbs().maxCoeff() > 1e-9) return false;
  if ((E - E.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  if (E.minCoeff() < -1e-9) return false;
  MatrixXd J = MatrixXd::Identity(rho, rho) -
               MatrixXd::Constant(rho, rho, 1.0 / static_cast<double>(rho));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(MatrixXd(-J * E * J), Eigen::EigenvaluesOnly);
  if (min_gram_eig) *min_gram_eig = es.eigenvalues().minCoeff();
  return es.eigenvalues().minCoeff() >= -1e-7;
}

}  // namespace slatkit
