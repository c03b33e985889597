#pragma once

// Cone program in standard form:
//   minimize    c' x
//   subject to  A x = b,   x in K
// with K an ordered product of nonnegative, second-order and PSD blocks.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <charconv>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "slatkit/conic/cones.hpp"

namespace slatkit::conic {

struct ConicProblem {
  VectorXd c;
  Eigen::SparseMatrix<double> A;  // p x n
  VectorXd b;
  ConeSpec cone;

  void validate() const {
    cone.validate();
    const int n = cone.total_dim();
    if (c.size() != n) throw config_error("objective length != cone dimension");
    if (A.cols() != n) throw config_error("constraint columns != cone dimension");
    if (A.rows() != b.size()) throw config_error("constraint rows != rhs length");
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIterations, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIterations: return "max_iterations";
    default: return "numerical_failure";
  }
}

// One row of the solver's progress log.  dual_obj folds the current
// infeasibility into the bound so that primal_obj - dual_obj equals the
// (nonnegative) complementarity gap of the iterate exactly.
struct IterateInfo {
  double primal_obj = 0, dual_obj = 0;
  double pinfeas = 0, dinfeas = 0, relgap = 0, mu = 0, step = 0;
};

struct ConicSolution {
  VectorXd x;  // primal point (tau-normalized)
  VectorXd y;  // equality multipliers
  VectorXd s;  // dual cone point
  SolveStatus status = SolveStatus::NumericalFailure;
  double objective = 0;  // c' x
  double gap = 0;        // achieved absolute duality gap x' s
  double pinfeas = 0, dinfeas = 0;
  int iterations = 0;
  std::vector<IterateInfo> trace;
};

struct SolveOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iters = 200;
  bool keep_trace = false;
  bool verbose = false;
};

// Incremental construction of a ConicProblem: register variable blocks,
// then add equality rows as (row, col, coef) triplets.
class ProblemBuilder {
 public:
  int add_nonneg(int dim) { return add_block({BlockKind::Nonnegative, dim}); }
  int add_soc(int dim) { return add_block({BlockKind::SecondOrder, dim}); }
  int add_psd(int side) { return add_block({BlockKind::SemidefiniteReal, side}); }

  void obj(int col, double v) { obj_.emplace_back(col, v); }

  int new_row(double rhs) {
    rhs_.push_back(rhs);
    return static_cast<int>(rhs_.size()) - 1;
  }
  void coef(int row, int col, double v) {
    if (v != 0.0) trips_.emplace_back(row, col, v);
  }

  int dim() const { return dim_; }

  ConicProblem build() const {
    ConicProblem p;
    p.cone.blocks = blocks_;
    p.c = VectorXd::Zero(dim_);
    for (auto& [col, v] : obj_) p.c[col] += v;
    p.b = Eigen::Map<const VectorXd>(rhs_.data(), static_cast<Eigen::Index>(rhs_.size()));
    p.A.resize(static_cast<Eigen::Index>(rhs_.size()), dim_);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(trips_.size());
    for (auto& [r, c, v] : trips_) t.emplace_back(r, c, v);
    p.A.setFromTriplets(t.begin(), t.end());
    p.validate();
    return p;
  }

 private:
  int add_block(ConeBlock blk) {
    blocks_.push_back(blk);
    const int off = dim_;
    dim_ += blk.vec_dim();
    return off;
  }

  std::vector<ConeBlock> blocks_;
  int dim_ = 0;
  std::vector<std::pair<int, double>> obj_;
  std::vector<double> rhs_;
  std::vector<std::tuple<int, int, double>> trips_;
};

namespace detail {
inline std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
}  // namespace detail

// Self-describing text dump: objective and equality rows as COO triplets
// plus the cone block list, for cross-checking against external tools.
inline void dump_problem(const ConicProblem& p, std::ostream& os) {
  os << "slatkit-conic 1\n";
  os << "vars " << p.c.size() << "\n";
  os << "objective\n";
  for (Eigen::Index i = 0; i < p.c.size(); ++i)
    if (p.c[i] != 0.0) os << i << " " << detail::fmt_double(p.c[i]) << "\n";
  os << "equalities " << p.A.rows() << " " << p.A.nonZeros() << "\n";
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, k); it; ++it)
      os << it.row() << " " << it.col() << " " << detail::fmt_double(it.value()) << "\n";
  os << "rhs\n";
  for (Eigen::Index i = 0; i < p.b.size(); ++i)
    if (p.b[i] != 0.0) os << i << " " << detail::fmt_double(p.b[i]) << "\n";
  os << "cones\n";
  for (const auto& blk : p.cone.blocks) {
    switch (blk.kind) {
      case BlockKind::Nonnegative: os << "nonneg " << blk.size << "\n"; break;
      case BlockKind::SecondOrder: os << "soc " << blk.size << "\n"; break;
      case BlockKind::SemidefiniteReal: os << "psd " << blk.size << "\n"; break;
    }
  }
}

inline std::string dump_problem(const ConicProblem& p) {
  std::ostringstream ss;
  dump_problem(p, ss);
  return ss.str();
}

}  // namespace slatkit::conic
