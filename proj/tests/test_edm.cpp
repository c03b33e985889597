#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <set>

#include "slatkit/edm.hpp"

using namespace slatkit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Geometry oracle: exact squared-distance matrix of a point list.
MatrixXd exact_edm(const std::vector<Point2>& pts) {
  const int k = static_cast<int>(pts.size());
  MatrixXd e(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double d = distance(pts[i], pts[j]);
      e(i, j) = d * d;
    }
  return e;
}

std::vector<Point2> all_points(const Scenario& s) {
  std::vector<Point2> pts;  // sensors, targets, anchors
  pts.insert(pts.end(), s.sensors.begin(), s.sensors.end());
  pts.insert(pts.end(), s.targets.begin(), s.targets.end());
  pts.insert(pts.end(), s.anchors.begin(), s.anchors.end());
  return pts;
}

RangeData exact_ranges(const Scenario& s) {
  return synthesize_ranges(s, GaussianNoise{0.0},
                           ObservationMask::complete(s.l(), s.n(), s.m()), 1);
}

bool edm_membership(const MatrixXd& e) {
  const int rho = static_cast<int>(e.rows());
  MatrixXd j = MatrixXd::Identity(rho, rho) - MatrixXd::Constant(rho, rho, 1.0 / rho);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(MatrixXd(-j * e * j), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-9;
}

}  // namespace

TEST_CASE("build_partial_edm") {
  SECTION("anchor block carries exact squared side lengths") {
    std::vector<Point2> anchors = {{0, 0}, {1, 0}, {0, 1}};
    RangeData r;
    auto p = build_partial_edm(anchors, 0, 0, r);
    REQUIRE(p.rho() == 3);
    REQUIRE(p.D(1, 0) == Catch::Approx(1.0));
    REQUIRE(p.D(2, 0) == Catch::Approx(1.0));
    REQUIRE(p.D(2, 1) == Catch::Approx(2.0));
    REQUIRE(p.W(2, 1));
  }

  SECTION("distance 2 becomes entry 4 and mask follows the data") {
    std::vector<Point2> anchors = {{0, 0}, {1, 0}, {0, 1}};
    RangeData r;
    r.mask.anchor_target = {{0, 0}};
    r.anchor_target[{0, 0}] = 2.0;
    auto p = build_partial_edm(anchors, 0, 1, r);
    // layout: target at 0, anchors at 1..3
    REQUIRE(p.D(1, 0) == Catch::Approx(4.0));
    REQUIRE(p.W(1, 0));
    REQUIRE_FALSE(p.W(2, 0));
  }

  SECTION("full mask with exact ranges reproduces the true squared distances") {
    auto s = generate_scenario(3, 2, 3, Box{0, 2}, 5);
    auto r = exact_ranges(s);
    auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
    auto truth = exact_edm(all_points(s));
    for (int i = 0; i < p.rho(); ++i)
      for (int j = 0; j < p.rho(); ++j)
        if (p.W(i, j))
          REQUIRE(p.D(i, j) == Catch::Approx(truth(i, j)).margin(1e-10));
  }
}

TEST_CASE("complete_edm_sr") {
  SECTION("fully specified exact matrix is returned unchanged") {
    auto s = generate_scenario(3, 1, 2, Box{0, 2}, 11);
    auto truth = exact_edm(all_points(s));
    PartialEDM p;
    p.n = 1;
    p.m = 2;
    p.l = 3;
    p.D = truth;
    p.W.setConstant(p.rho(), p.rho(), true);
    auto sol = complete_edm_sr(p);
    REQUIRE(sol.objective_value < 1e-8);
    REQUIRE((sol.E - truth).cwiseAbs().maxCoeff() < 1e-6);
  }

  SECTION("free sensor-sensor entry completed from noiseless data") {
    auto s = generate_scenario(3, 2, 3, Box{0, 2}, 23);
    auto r = exact_ranges(s);
    auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
    REQUIRE_FALSE(p.W(1, 0));  // sensor-sensor entry free
    auto sol = complete_edm_sr(p);
    auto truth = exact_edm(all_points(s));
    REQUIRE(sol.E(1, 0) == Catch::Approx(truth(1, 0)).margin(1e-4));
    double min_eig;
    REQUIRE(edm_invariants_hold(sol.E, &min_eig));
  }

  SECTION("noisy objective positive yet no larger than at the true matrix") {
    auto s = generate_scenario(3, 2, 3, Box{0, 2}, 31);
    auto mask = ObservationMask::complete(s.l(), s.n(), s.m());
    auto r = synthesize_ranges(s, GaussianNoise{0.05}, mask, 77);
    auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
    auto sol = complete_edm_sr(p);
    REQUIRE(sol.objective_value > 1e-6);
    auto truth = exact_edm(all_points(s));
    double at_truth = 0.0;
    for (int i = 0; i < p.rho(); ++i)
      for (int j = 0; j < p.rho(); ++j)
        if (p.W(i, j)) at_truth += (truth(i, j) - p.D(i, j)) * (truth(i, j) - p.D(i, j));
    REQUIRE(sol.objective_value <= at_truth + 1e-8);
  }
}

TEST_CASE("complete_edm_r") {
  SECTION("exact data recovers the true matrix") {
    auto s = generate_scenario(3, 2, 3, Box{0, 2}, 41);
    auto r = exact_ranges(s);
    auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
    auto sol = complete_edm_r(p);
    auto truth = exact_edm(all_points(s));
    // the optimum is second-order flat, so unmeasured entries are pinned
    // down only to ~gap^(1/4); measured entries converge much faster
    for (auto [i, j] : p.objective_pairs())
      REQUIRE(sol.E(i, j) == Catch::Approx(truth(i, j)).margin(1e-4));
    REQUIRE((sol.E - truth).cwiseAbs().maxCoeff() < 2e-2);
  }

  SECTION("epigraph variable is tight at the optimum") {
    auto s = generate_scenario(3, 2, 3, Box{0, 2}, 59);
    auto mask = ObservationMask::complete(s.l(), s.n(), s.m());
    auto r = synthesize_ranges(s, GaussianNoise{0.05}, mask, 3);
    auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
    auto sol = complete_edm_r(p);
    auto pairs = p.objective_pairs();
    for (std::size_t t = 0; t < pairs.size(); ++t) {
      const double e = sol.E(pairs[t].first, pairs[t].second);
      REQUIRE(sol.epigraph[static_cast<Eigen::Index>(t)] ==
              Catch::Approx(std::sqrt(std::max(e, 0.0))).margin(1e-6));
    }
  }

  SECTION("single-pair toy instance matches exhaustive search") {
    // two anchors one unit apart, one target with a single measured range
    PartialEDM p;
    p.n = 0;
    p.m = 1;
    p.l = 2;
    p.D = MatrixXd::Zero(3, 3);
    p.W.setConstant(3, 3, false);
    for (int i = 0; i < 3; ++i) p.W(i, i) = true;
    const double d = 0.8;
    p.D(1, 0) = p.D(0, 1) = d * d;  // anchor0(index1)-target range
    p.W(1, 0) = p.W(0, 1) = true;
    p.D(2, 1) = p.D(1, 2) = 1.0;  // anchor-anchor pin
    p.W(2, 1) = p.W(1, 2) = true;

    auto sol = complete_edm_r(p);

    // brute force over the two unknown entries w = E(1,0), z = E(2,0)
    double best = 1e300;
    for (double w = 1e-4; w < 4.0; w += 2e-3)
      for (double z = 1e-4; z < 4.0; z += 2e-3) {
        MatrixXd e(3, 3);
        e << 0, w, z, w, 0, 1.0, z, 1.0, 0;
        if (!edm_membership(e)) continue;
        best = std::min(best, w - 2.0 * std::sqrt(w) * d);
      }
    REQUIRE(sol.objective_value == Catch::Approx(best).margin(5e-3));
    REQUIRE(sol.E(1, 0) == Catch::Approx(d * d).margin(1e-4));
  }
}

TEST_CASE("complete_edm_r_l1") {
  SECTION("envelope pieces coincide at the documented points") {
    const double d = 1.3, emax = 9.0;
    const double a = 1.0 / (std::sqrt(emax) + d);
    const double b = -d * d / (std::sqrt(emax) + d);
    REQUIRE(a * d * d + b == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(std::abs(std::sqrt(d * d) - d) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(a * emax + b == Catch::Approx(std::sqrt(emax) - d).margin(1e-12));
  }

  SECTION("rejects an e_max below the data") {
    auto s = generate_scenario(3, 1, 1, Box{0, 2}, 2);
    auto p = build_partial_edm(s.anchors, 1, 1, exact_ranges(s));
    REQUIRE_THROWS_AS(complete_edm_r_l1(p, 1e-9), config_error);
  }

  SECTION("exact data gives near-zero objective and truth recovery") {
    auto s = generate_scenario(3, 2, 3, Box{0, 2}, 71);
    auto r = exact_ranges(s);
    auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
    auto sol = complete_edm_r_l1(p, default_e_max(p));
    REQUIRE(std::abs(sol.objective_value) < 1e-3);
    auto truth = exact_edm(all_points(s));
    REQUIRE((sol.E - truth).cwiseAbs().maxCoeff() < 1e-3);
  }

  SECTION("robust completion beats squared-range completion under outliers") {
    int wins = 0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
      auto s = generate_scenario(4, 3, 3, Box{0, 2}, 300 + seed);
      auto mask = ObservationMask::complete(s.l(), s.n(), s.m());
      auto r = synthesize_ranges(
          s, SelectiveGaussianNoise{0.01, 0.8, 2, OutlierPlacement::RandomEdges}, mask,
          900 + seed);
      auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
      auto truth = exact_edm(all_points(s));

      auto clean = synthesize_ranges(s, GaussianNoise{0.01}, mask, 900 + seed);
      auto sol_l1 = complete_edm_r_l1(p, default_e_max(p));
      auto sol_sr = complete_edm_sr(p);
      // error over every pair except the outlier-carrying measurements
      std::set<std::pair<int, int>> bad;
      for (auto [key, d] : r.sensor_target)
        if (std::abs(d - clean.sensor_target.at(key)) > 1e-12)
          bad.insert({static_cast<int>(key.first), static_cast<int>(s.n() + key.second)});
      for (auto [key, d] : r.anchor_target)
        if (std::abs(d - clean.anchor_target.at(key)) > 1e-12)
          bad.insert({static_cast<int>(s.n() + s.m() + key.first),
                      static_cast<int>(s.n() + key.second)});
      double err_l1 = 0.0, err_sr = 0.0;
      for (int j = 0; j < p.rho(); ++j)
        for (int i = j + 1; i < p.rho(); ++i) {
          if (bad.count({i, j}) || bad.count({j, i})) continue;
          err_l1 += std::pow(sol_l1.E(i, j) - truth(i, j), 2);
          err_sr += std::pow(sol_sr.E(i, j) - truth(i, j), 2);
        }
      if (err_l1 < err_sr) ++wins;
    }
    REQUIRE(wins > seeds / 2);
  }
}

TEST_CASE("extract_coordinates") {
  SECTION("exact matrix reproduces the points to 1e-8") {
    for (int seed : {1, 2, 3, 4, 5}) {
      auto s = generate_scenario(3, 2, 3, Box{0, 2}, 100 + seed);
      EDMSolution e;
      e.E = exact_edm(all_points(s));
      e.solver_status = conic::SolveStatus::Optimal;
      auto got = extract_coordinates(e, s.anchors);
      REQUIRE((got.coords - truth_coords(s)).cwiseAbs().maxCoeff() < 1e-8);
      REQUIRE(got.anchor_fit_residual < 1e-14);
    }
  }

  SECTION("anchors resolve the reflection ambiguity") {
    // mirrored configurations share the same EDM; alignment must pick the
    // one matching the anchors.
    Scenario s;
    s.anchors = {{0, 0}, {2, 0}, {0, 2}};
    s.sensors = {{1.1, 0.4}};
    s.targets = {{0.3, 1.2}, {1.8, 1.7}};
    EDMSolution e;
    e.E = exact_edm(all_points(s));
    auto got = extract_coordinates(e, s.anchors);
    REQUIRE((got.coords - truth_coords(s)).cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("reported residual matches an independent recomputation") {
    auto s = generate_scenario(4, 3, 3, Box{0, 2}, 7);
    auto mask = ObservationMask::complete(s.l(), s.n(), s.m());
    auto r = synthesize_ranges(s, GaussianNoise{0.05}, mask, 3);
    auto sol = complete_edm_sr(build_partial_edm(s.anchors, s.n(), s.m(), r));
    auto got = extract_coordinates(sol, s.anchors);

    // independent path: re-run eigendecomposition and full O(2) alignment
    const int rho = sol.E.rows();
    const int l = static_cast<int>(s.l());
    const int nm = rho - l;
    MatrixXd j = MatrixXd::Identity(rho, rho) - MatrixXd::Constant(rho, rho, 1.0 / rho);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(MatrixXd(-0.5 * j * sol.E * j));
    MatrixXd cfg(2, rho);
    for (int rr = 0; rr < 2; ++rr)
      cfg.row(rr) = std::sqrt(std::max(es.eigenvalues()[rho - 1 - rr], 0.0)) *
                    es.eigenvectors().col(rho - 1 - rr).transpose();
    MatrixXd a(2, l), xx(2, l);
    for (int k = 0; k < l; ++k) {
      a.col(k) = Eigen::Vector2d(s.anchors[k].x, s.anchors[k].y);
      xx.col(k) = cfg.col(nm + k);
    }
    Eigen::Vector2d am = a.rowwise().mean(), xm = xx.rowwise().mean();
    Eigen::Matrix2d cross = (a.colwise() - am) * (xx.colwise() - xm).transpose();
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d q = svd.matrixU() * svd.matrixV().transpose();
    double res = 0;
    for (int k = 0; k < l; ++k)
      res += (a.col(k) - (q * (xx.col(k) - xm) + am)).squaredNorm();
    REQUIRE(got.anchor_fit_residual == Catch::Approx(res).margin(1e-10));
  }

  SECTION("collinear geometry is rejected") {
    std::vector<Point2> pts = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
    EDMSolution e;
    e.E = exact_edm(pts);
    std::vector<Point2> anchors = {{0, 0}, {1, 0}, {2, 0}};
    REQUIRE_THROWS_AS(extract_coordinates(e, anchors), solver_error);
  }
}

TEST_CASE("edm properties") {
  SECTION("returned solutions satisfy the EDM-cone invariants") {
    for (int seed = 0; seed < 5; ++seed) {
      auto s = generate_scenario(3, 2, 2, Box{0, 2}, 500 + seed);
      auto mask = ObservationMask::complete(s.l(), s.n(), s.m());
      auto r = synthesize_ranges(s, GaussianNoise{0.1}, mask, seed);
      auto p = build_partial_edm(s.anchors, s.n(), s.m(), r);
      for (auto sol : {complete_edm_sr(p), complete_edm_r(p),
                       complete_edm_r_l1(p, default_e_max(p))})
        REQUIRE(edm_invariants_hold(sol.E));
    }
  }

  SECTION("adding a noiseless measurement never hurts measured entries") {
    for (int seed = 0; seed < 10; ++seed) {
      auto s = generate_scenario(3, 2, 2, Box{0, 2}, 700 + seed);
      ObservationMask small;
      for (std::size_t i = 0; i < s.n(); ++i)
        for (std::size_t j = 0; j < s.m(); ++j)
          if ((i + j + seed) % 2 == 0) small.sensor_target.emplace_back(i, j);
      for (std::size_t k = 0; k < s.l(); ++k)
        for (std::size_t j = 0; j < s.m(); ++j) small.anchor_target.emplace_back(k, j);
      ObservationMask larger = small;
      larger.sensor_target = {};
      for (std::size_t i = 0; i < s.n(); ++i)
        for (std::size_t j = 0; j < s.m(); ++j)
          if ((i + j + seed) % 2 == 0 || (i == 0 && j == 0))
            larger.sensor_target.emplace_back(i, j);

      auto truth = exact_edm(all_points(s));
      auto err_on = [&](const ObservationMask& msk, const ObservationMask& eval) {
        auto r = synthesize_ranges(s, GaussianNoise{0.0}, msk, seed);
        auto sol = complete_edm_sr(build_partial_edm(s.anchors, s.n(), s.m(), r));
        double acc = 0;
        for (auto [i, j] : eval.sensor_target)
          acc += std::abs(sol.E(static_cast<int>(i), static_cast<int>(s.n() + j)) -
                          truth(static_cast<int>(i), static_cast<int>(s.n() + j)));
        return acc;
      };
      REQUIRE(err_on(larger, small) <= err_on(small, small) + 1e-5);
    }
  }
}
