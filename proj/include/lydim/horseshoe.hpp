#pragma once

// Symbolic horseshoes built from measure-typical n-blocks, their affine
// realizations, and convergence of their dimensions to the measure's.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lydim/dimension.hpp"
#include "lydim/systems.hpp"

namespace lydim {

/// Blocks sharing one symbol-count vector.
struct FrequencyClass {
  Eigen::VectorXi counts;
  double log_count = 0.0;
};

struct SymbolicHorseshoe {
  int n = 0;                       // block length
  int alphabet_size = 0;
  bool markov = false;             // blocks start at the pivot and return to it
  int pivot = -1;
  std::vector<Word> blocks;        // sorted; empty when only counted by class
  std::vector<FrequencyClass> classes;
  double block_count = 0.0;
  double log_block_count = 0.0;

  bool enumerated() const { return !blocks.empty(); }
  /// Blocks concatenate freely, so the block shift is the full shift on B symbols.
  Eigen::MatrixXi block_transitions() const;
};

/// Largest k^n for which blocks are listed one by one.
inline constexpr double kEnumerationLimit = 16777216.0;  // 2^24

/// All admissible n-blocks whose symbol frequencies (Bernoulli) or cyclic
/// transition frequencies (Markov, blocks pinned at `pivot`) are within eps
/// of the measure in the sup norm. Throws InfeasibleError when none qualify.
SymbolicHorseshoe extract_horseshoe(const SymbolicCoding& base, const ErgodicMeasureSpec& measure, int n, double eps,
                                    int pivot = 0, unsigned threads = 0);

/// (1/n) log(number of blocks).
double horseshoe_entropy(const SymbolicHorseshoe& hs);

/// Upper entropy correction eps' with h_top(horseshoe) <= h_mu + eps'.
double entropy_correction(const SymbolicHorseshoe& hs, const ErgodicMeasureSpec& measure);

/// Fraction of admissible depth-d base words that occur as block prefixes.
double support_coverage(const SymbolicHorseshoe& hs, const SymbolicCoding& base, int depth);

/// Dimension of the horseshoe realized in `geometry` (a linear horseshoe or
/// an affine repeller on the same alphabet). With geometric_check the
/// realized slices are box-counted and reported in diagnostics.
DimensionReport horseshoe_dimension(const SymbolicHorseshoe& hs, const ModelSystem& geometry, bool geometric_check = false,
                                    unsigned threads = 0);

/// Points of the realization: concatenations of q blocks.
std::vector<Point> unstable_slice_points(const SymbolicHorseshoe& hs, const ModelSystem& geometry, int q);
std::vector<Point> stable_slice_points(const SymbolicHorseshoe& hs, const ModelSystem& geometry, int q);

/// Unstable and stable slices of a full linear horseshoe at the given depths.
std::vector<Point> horseshoe_unstable_slice(const ModelSystem& horseshoe, int depth);
std::vector<Point> horseshoe_stable_slice(const ModelSystem& horseshoe, int depth);

/// Largest deviation of realized cocycle exponents from the branch exponents
/// over random block concatenations (0 for affine geometry).
double realized_exponent_deviation(const SymbolicHorseshoe& hs, const ModelSystem& geometry, int q, int samples,
                                   std::uint64_t seed);

struct ConvergenceRow {
  int n = 0;
  double eps = 0.0;
  double blocks = 0.0;
  double entropy = 0.0;
  double dimension = 0.0;
  double target = 0.0;
  double target_entropy = 0.0;
  double correction = 0.0;
  bool feasible = true;
  std::string message;

  double gap() const { return std::abs(dimension - target); }
  double entropy_gap() const { return std::abs(target_entropy - entropy); }
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double target_dimension = 0.0;
  double target_entropy = 0.0;
  DimensionKind target_kind = DimensionKind::ledrappier_young;
};

/// Dimension of mu in the geometry: Ledrappier-Young for horseshoes,
/// Lyapunov dimension for repellers.
DimensionReport measure_dimension(const ModelSystem& geometry, const ErgodicMeasureSpec& measure);

/// One row per n (strictly increasing). Infeasible rows are marked and the run continues.
ConvergenceReport convergence_report(const SymbolicCoding& base, const ErgodicMeasureSpec& measure,
                                     const ModelSystem& geometry, const std::vector<int>& n_list, double eps,
                                     int pivot = 0, unsigned threads = 0);

}  // namespace lydim
