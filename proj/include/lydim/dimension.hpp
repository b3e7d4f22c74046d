#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lydim/errors.hpp"
#include "lydim/systems.hpp"

namespace lydim {

enum class DimensionKind { lyapunov, caratheodory, box_lower, box_upper, local, ledrappier_young, bowen_root };

std::string to_string(DimensionKind kind);

struct DimensionReport {
  double value = 0.0;
  DimensionKind kind = DimensionKind::lyapunov;
  std::map<std::string, double> diagnostics;
  std::map<std::string, std::vector<double>> series;
};

/// Lyapunov dimension of a repeller measure with entropy h and positive
/// exponents sorted descending. Returns m0 when the exponents sum to h.
template <typename Derived>
typename Derived::Scalar lyapunov_dimension(typename Derived::Scalar h, const Eigen::MatrixBase<Derived>& lambda) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m0 = lambda.size();
  if (m0 < 1) throw ArgumentError("lyapunov_dimension: empty exponent vector");
  if (!(h >= 0) || !std::isfinite(h)) throw ArgumentError("lyapunov_dimension: entropy must be finite and >= 0");
  for (Eigen::Index i = 0; i < m0; ++i) {
    if (!(lambda(i) > 0) || !std::isfinite(lambda(i))) throw ArgumentError("lyapunov_dimension: exponents must be positive");
    if (i > 0 && lambda(i) > lambda(i - 1)) throw ArgumentError("lyapunov_dimension: exponents must be sorted descending");
  }
  if (h > lambda.sum() + Scalar(1e-9)) throw InconsistencyError("lyapunov_dimension: entropy exceeds the sum of exponents");
  if (h < lambda(m0 - 1)) return h / lambda(m0 - 1);
  Eigen::Index l = 0;
  Scalar s = 0;
  while (l < m0 && s + lambda(m0 - 1 - l) <= h) s += lambda(m0 - 1 - l++);
  if (l == m0) return static_cast<Scalar>(m0);
  return static_cast<Scalar>(l) + (h - s) / lambda(m0 - 1 - l);
}

/// h / lambda_u - h / lambda_s for a measure with exponents lambda_u > 0 > lambda_s.
double ledrappier_young(double h, double lambda_u, double lambda_s);

/// Root of a decreasing function on [0, m0] by bisection. Endpoint roots
/// (within tol) are returned exactly; the final bracket is in diagnostics.
DimensionReport bowen_root(const std::function<double(double)>& pressure, double m0, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Caratheodory singular dimension

struct WholeRepeller {};
struct CylinderUnion {
  std::vector<Word> prefixes;
};
struct MeasureTypical {
  ErgodicMeasureSpec measure;
  double delta = 0.1;
};
/// Free concatenations of equal-length blocks (a sub-repeller).
struct BlockConcatenation {
  std::vector<Word> blocks;
};
struct PeriodicOrbit {
  Word period;
};

using SetSpec = std::variant<WholeRepeller, CylinderUnion, MeasureTypical, BlockConcatenation, PeriodicOrbit>;

struct CaratheodoryOptions {
  int min_depth = 8;
  int max_depth = 8192;
  double tolerance = 3e-3;                 // stop when successive roots agree
  std::size_t word_budget = 1u << 20;      // explicit enumeration limit
  std::size_t class_budget = 2'000'000;    // composition-class limit
  unsigned threads = 0;
};

/// A group of depth-N cylinders sharing mass and derivative.
struct CylinderClass {
  double log_count = 0.0;
  double log_mass = 0.0;             // mass of one cylinder
  Eigen::VectorXd log_scales;        // log singular values, descending
};

/// Cylinder classes covering the set at depth n.
std::vector<CylinderClass> cover_classes(const ModelSystem& system, const SetSpec& set, int depth,
                                         const CaratheodoryOptions& options = {});

/// Number of extra symbols between a Bowen ball of radius r and the matching cylinder.
int bowen_depth_offset(const ModelSystem& system, double r);

/// dim_{C,r} from cylinder covers of growing depth.
DimensionReport caratheodory_dimension(const ModelSystem& system, const SetSpec& set, double r,
                                       const CaratheodoryOptions& options = {});

// ---------------------------------------------------------------------------
// Box counting

/// Occupied boxes of an origin-anchored grid of side delta.
std::size_t box_count(const std::vector<Point>& points, double delta);

struct BoxDimension {
  DimensionReport lower;
  DimensionReport upper;
  double slope = 0.0;     // regression over the full delta range
  double residual = 0.0;
  std::vector<double> deltas;
  std::vector<double> counts;
};

/// Box dimension from counts over `deltas` (>= 3 values spanning >= 2
/// decades, >= 1000 points). Lower/upper are extreme slopes over sliding
/// windows of `window` consecutive deltas (0 picks half the range).
BoxDimension box_dimension(const std::vector<Point>& points, std::span<const double> deltas, int window = 0,
                           unsigned threads = 0);

/// Anchors of all admissible cylinders of the given depth.
std::vector<Point> cylinder_points(const ModelSystem& system, int depth);
/// Anchors of the cylinders of a set spec (whole repeller, union, blocks, periodic).
std::vector<Point> set_points(const ModelSystem& system, const SetSpec& set, int depth);
/// All pairs (x_i, y_j) of two 1-D clouds.
std::vector<Point> product_points(const std::vector<Point>& xs, const std::vector<Point>& ys);

// ---------------------------------------------------------------------------
// Local dimension

/// mu(B(x, r)) in the sup norm by cylinder descent. Boundary cylinders
/// lighter than `resolution` times the mass of x's own cylinder inside the
/// ball are split by volume fraction.
double ball_mass(const ModelSystem& system, const ErgodicMeasureSpec& measure, const Point& x, double r,
                 double resolution = 1e-3);

/// Mean slope of log mu(B(x, r)) against log r over mu-typical points.
DimensionReport local_dimension(const ModelSystem& system, const ErgodicMeasureSpec& measure, std::span<const double> radii,
                                int samples, std::uint64_t seed, unsigned threads = 0);

}  // namespace lydim
