#pragma once

// Ground-truth scenarios, range synthesis, likelihood costs and error
// metrics shared by every estimation module.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <variant>
#include <vector>

#include "slatkit/common.hpp"

namespace slatkit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2() = default;
  Point2(double px, double py) : x(px), y(py) {}

  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Point2& a, const Point2& b) { return (a - b).norm(); }

/// Anchor positions are exact; sensors and targets are ground truth used
/// for synthesis and error metrics only.
struct Scenario {
  std::vector<Point2> anchors;
  std::vector<Point2> sensors;
  std::vector<Point2> targets;

  std::size_t l() const { return anchors.size(); }
  std::size_t n() const { return sensors.size(); }
  std::size_t m() const { return targets.size(); }
};

// Unknowns stacked as [sensor_1 .. sensor_n, target_1 .. target_m], each (x, y).
using StackedCoords = Eigen::VectorXd;

inline StackedCoords stack_coords(const std::vector<Point2>& sensors,
                                  const std::vector<Point2>& targets) {
  StackedCoords x(2 * (sensors.size() + targets.size()));
  std::size_t k = 0;
  for (const auto& p : sensors) {
    x[2 * k] = p.x;
    x[2 * k + 1] = p.y;
    ++k;
  }
  for (const auto& p : targets) {
    x[2 * k] = p.x;
    x[2 * k + 1] = p.y;
    ++k;
  }
  return x;
}

inline Point2 sensor_at(const StackedCoords& x, std::size_t i) {
  return {x[2 * i], x[2 * i + 1]};
}

inline Point2 target_at(const StackedCoords& x, std::size_t n, std::size_t j) {
  return {x[2 * (n + j)], x[2 * (n + j) + 1]};
}

inline StackedCoords truth_coords(const Scenario& s) {
  return stack_coords(s.sensors, s.targets);
}

/// Pairs for which a range measurement exists.  Indices are zero-based.
struct ObservationMask {
  std::vector<std::pair<std::size_t, std::size_t>> sensor_target;  // (i, j)
  std::vector<std::pair<std::size_t, std::size_t>> anchor_target;  // (k, j)

  static ObservationMask complete(std::size_t l, std::size_t n, std::size_t m) {
    ObservationMask mk;
    mk.sensor_target.reserve(n * m);
    mk.anchor_target.reserve(l * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) mk.sensor_target.emplace_back(i, j);
    for (std::size_t k = 0; k < l; ++k)
      for (std::size_t j = 0; j < m; ++j) mk.anchor_target.emplace_back(k, j);
    return mk;
  }

  std::size_t size() const { return sensor_target.size() + anchor_target.size(); }

  void validate(const Scenario& s) const {
    for (auto [i, j] : sensor_target)
      if (i >= s.n() || j >= s.m()) throw config_error("mask index out of range");
    for (auto [k, j] : anchor_target)
      if (k >= s.l() || j >= s.m()) throw config_error("mask index out of range");
  }
};

constexpr double kRangeFloor = 1e-5;

/// Noisy ranges, keyed exactly by the mask that produced them.
struct RangeData {
  std::map<std::pair<std::size_t, std::size_t>, double> sensor_target;
  std::map<std::pair<std::size_t, std::size_t>, double> anchor_target;
  ObservationMask mask;

  double st(std::size_t i, std::size_t j) const { return sensor_target.at({i, j}); }
  double at(std::size_t k, std::size_t j) const { return anchor_target.at({k, j}); }
};

struct GaussianNoise {
  double sigma = 0.0;
};

struct LaplacianNoise {
  double sigma = 0.0;  // standard deviation, not scale
};

enum class OutlierPlacement { RandomEdges, SingleAnchor };

/// Gaussian noise everywhere plus a nonnegative heavy disturbance on a few
/// measurements: either `outlier_count` random edges, or every measurement
/// of one designated anchor.
struct SelectiveGaussianNoise {
  double sigma_gaussian = 0.0;
  double sigma_outlier = 0.0;
  std::size_t outlier_count = 0;
  OutlierPlacement placement = OutlierPlacement::RandomEdges;
  std::size_t anchor_index = 0;
};

using NoiseModel = std::variant<GaussianNoise, LaplacianNoise, SelectiveGaussianNoise>;

namespace detail {

inline void check_noise(const NoiseModel& noise, std::size_t mask_size) {
  if (const auto* g = std::get_if<GaussianNoise>(&noise)) {
    if (g->sigma < 0.0) throw config_error("gaussian sigma must be >= 0");
  } else if (const auto* lp = std::get_if<LaplacianNoise>(&noise)) {
    if (lp->sigma < 0.0) throw config_error("laplacian sigma must be >= 0");
  } else {
    const auto& sg = std::get<SelectiveGaussianNoise>(noise);
    if (sg.sigma_gaussian < 0.0 || sg.sigma_outlier <= 0.0)
      throw config_error("selective gaussian sigmas invalid");
    if (sg.placement == OutlierPlacement::RandomEdges && sg.outlier_count > mask_size)
      throw config_error("outlier count exceeds number of measurements");
  }
}

// Smallest singular value of the centered 2 x l anchor matrix must exceed
// 1e-9 times the largest, otherwise the anchors count as collinear.
inline bool anchors_non_collinear(const std::vector<Point2>& anchors) {
  const std::size_t l = anchors.size();
  if (l < 3) return false;
  Eigen::MatrixXd a(2, static_cast<Eigen::Index>(l));
  for (std::size_t k = 0; k < l; ++k) {
    a(0, static_cast<Eigen::Index>(k)) = anchors[k].x;
    a(1, static_cast<Eigen::Index>(k)) = anchors[k].y;
  }
  a.colwise() -= a.rowwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  return sv(1) > 1e-9 * sv(0);
}

}  // namespace detail

struct Box {
  double lo = 0.0;
  double hi = 1.0;
  double side() const { return hi - lo; }
};

inline Scenario generate_scenario(std::size_t l, std::size_t n, std::size_t m,
                                  const Box& box, std::uint64_t seed) {
  if (l < 3) throw config_error("need at least 3 anchors");
  if (box.side() <= 0.0) throw config_error("box must have positive side");
  Rng rng(seed);
  Scenario s;
  auto draw = [&]() -> Point2 {
    return {rng.uniform(box.lo, box.hi), rng.uniform(box.lo, box.hi)};
  };
  do {
    s.anchors.clear();
    for (std::size_t k = 0; k < l; ++k) s.anchors.push_back(draw());
  } while (!detail::anchors_non_collinear(s.anchors));
  for (std::size_t i = 0; i < n; ++i) s.sensors.push_back(draw());
  for (std::size_t j = 0; j < m; ++j) s.targets.push_back(draw());
  return s;
}

inline RangeData synthesize_ranges(const Scenario& s, const NoiseModel& noise,
                                   const ObservationMask& mask, std::uint64_t seed) {
  mask.validate(s);
  detail::check_noise(noise, mask.size());
  Rng rng(seed);
  RangeData r;
  r.mask = mask;

  auto sample = [&](double truth) -> double {
    if (const auto* g = std::get_if<GaussianNoise>(&noise))
      return truth + (g->sigma > 0.0 ? rng.normal(0.0, g->sigma) : 0.0);
    if (const auto* lp = std::get_if<LaplacianNoise>(&noise))
      return truth + (lp->sigma > 0.0 ? rng.laplace(lp->sigma) : 0.0);
    const auto& sg = std::get<SelectiveGaussianNoise>(noise);
    return truth + (sg.sigma_gaussian > 0.0 ? rng.normal(0.0, sg.sigma_gaussian) : 0.0);
  };

  for (auto [i, j] : mask.sensor_target)
    r.sensor_target[{i, j}] = sample(distance(s.sensors[i], s.targets[j]));
  for (auto [k, j] : mask.anchor_target)
    r.anchor_target[{k, j}] = sample(distance(s.anchors[k], s.targets[j]));

  if (const auto* sg = std::get_if<SelectiveGaussianNoise>(&noise)) {
    if (sg->placement == OutlierPlacement::RandomEdges) {
      // Pick outlier_count distinct edges over the whole mask.
      const std::size_t total = mask.size();
      std::vector<std::size_t> order(total);
      for (std::size_t t = 0; t < total; ++t) order[t] = t;
      for (std::size_t t = 0; t < total; ++t)
        std::swap(order[t], order[t + rng.index(total - t)]);
      for (std::size_t t = 0; t < sg->outlier_count; ++t) {
        const std::size_t e = order[t];
        const double bump = std::abs(rng.normal(0.0, sg->sigma_outlier));
        if (e < mask.sensor_target.size())
          r.sensor_target[mask.sensor_target[e]] += bump;
        else
          r.anchor_target[mask.anchor_target[e - mask.sensor_target.size()]] += bump;
      }
    } else {
      if (sg->anchor_index >= s.l()) throw config_error("outlier anchor index out of range");
      for (auto [k, j] : mask.anchor_target)
        if (k == sg->anchor_index)
          r.anchor_target[{k, j}] += std::abs(rng.normal(0.0, sg->sigma_outlier));
    }
  }

  for (auto& [key, d] : r.sensor_target) d = std::max(d, kRangeFloor);
  for (auto& [key, d] : r.anchor_target) d = std::max(d, kRangeFloor);
  return r;
}

/// Sum of squared range residuals over the mask (Gaussian ML cost).
/// `n` is the sensor count, fixing how the stacked vector splits.
inline double cost_gaussian(const StackedCoords& x, std::size_t n,
                            const std::vector<Point2>& anchors, const RangeData& r) {
  double acc = 0.0;
  for (auto [key, d] : r.sensor_target) {
    const auto [i, j] = key;
    const double f = (sensor_at(x, i) - target_at(x, n, j)).norm();
    acc += (f - d) * (f - d);
  }
  for (auto [key, d] : r.anchor_target) {
    const auto [k, j] = key;
    const double g = (anchors[k] - target_at(x, n, j)).norm();
    acc += (g - d) * (g - d);
  }
  return acc;
}

/// Sum of absolute range residuals over the mask (Laplacian ML cost).
inline double cost_laplacian(const StackedCoords& x, std::size_t n,
                             const std::vector<Point2>& anchors, const RangeData& r) {
  double acc = 0.0;
  for (auto [key, d] : r.sensor_target) {
    const auto [i, j] = key;
    acc += std::abs((sensor_at(x, i) - target_at(x, n, j)).norm() - d);
  }
  for (auto [key, d] : r.anchor_target) {
    const auto [k, j] = key;
    acc += std::abs((anchors[k] - target_at(x, n, j)).norm() - d);
  }
  return acc;
}

/// sqrt( (1/K)(1/(n+m)) sum_k sum_i ||x_i - xhat_i^k||^2 )
inline double total_rmse(const std::vector<StackedCoords>& estimates,
                         const std::vector<StackedCoords>& truths) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw config_error("total_rmse needs K >= 1 matching runs");
  const Eigen::Index dim = estimates.front().size();
  const std::size_t points = static_cast<std::size_t>(dim) / 2;
  double acc = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    if (estimates[k].size() != dim || truths[k].size() != dim)
      throw config_error("total_rmse dimension mismatch");
    acc += (estimates[k] - truths[k]).squaredNorm();
  }
  return std::sqrt(acc / (static_cast<double>(estimates.size()) * static_cast<double>(points)));
}

}  // namespace slatkit
