#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lydim/systems.hpp"

namespace lydim {

/// Phi_f(t) = {-phi^t(., f^n)}_n, the sub-additive singular-valued potential.
struct SingularValuedPotential {
  double t = 0.0;
};

/// Additive potential S_n w with w constant on first-symbol cylinders.
struct LocallyConstantPotential {
  Eigen::VectorXd weights;  // one log-weight per symbol
};

/// Additive potential S_n phi for an arbitrary continuous phi.
struct AdditivePotential {
  std::function<double(const Point&)> phi;
};

using Potential = std::variant<SingularValuedPotential, LocallyConstantPotential, AdditivePotential>;

/// phi_n evaluated along the coded orbit of anchor(word); `points` holds at
/// least n orbit points (as returned by coded_orbit).
double potential_sum(const ModelSystem& system, const Potential& potential, const Word& word,
                     const std::vector<Point>& points, int n);

/// Per-symbol weights w_j = -phi^t(branch j) such that Phi_f(t) is additive.
/// Valid for affine systems whose branch derivatives are sorted by the same
/// coordinate order; throws ArgumentError otherwise.
Eigen::VectorXd locally_constant_weights(const ModelSystem& system, double t);

// ---------------------------------------------------------------------------
// Separated sets

struct SeparatedSet {
  int n = 0;
  double epsilon = 0.0;
  std::vector<Point> points;
  std::vector<Word> words;  // coding of each point (points[i] = anchor(words[i]))
  int candidate_depth = 0;
  std::size_t candidates = 0;
};

/// Smallest candidate depth whose cylinders have d_n-diameter < eps/4.
int auto_candidate_depth(const ModelSystem& system, int n, double epsilon);

/// Greedy maximal (n, eps)-separated subset of the anchors of all
/// depth-`candidate_depth` cylinders, visited in coordinate order.
SeparatedSet separated_set(const ModelSystem& system, int n, double epsilon, int candidate_depth);

/// d_n(x, y) = max_{k<n} d(f^k x, f^k y) given both orbits.
double orbit_distance(const ModelSystem& system, std::span<const Point> a, std::span<const Point> b, double stop_above);

// ---------------------------------------------------------------------------
// Pressure estimates

enum class PressureMethod { separated_set, sft_exact, measure_identity };

std::string to_string(PressureMethod method);

struct PressureDiagnostics {
  std::vector<double> epsilons;
  int n_lo = 0;
  int n_hi = 0;
  std::vector<std::vector<double>> log_partition;  // [eps index][n - n_lo] = log P_n
  std::vector<double> slopes;                      // regression slope per eps
  std::vector<double> residuals;                   // regression RMS residual per eps
  std::vector<double> rate_at_n_lo;                // (1/n_lo) log P_{n_lo} per eps
  std::vector<double> rate_at_n_hi;                // (1/n_hi) log P_{n_hi} per eps
  std::vector<std::size_t> set_sizes;              // |F| at smallest eps, per n
  bool non_monotone_epsilon = false;
};

struct PressureEstimate {
  double value = 0.0;  // nats
  PressureMethod method = PressureMethod::separated_set;
  PressureDiagnostics diagnostics;

  /// Regression residual at the reported (smallest) epsilon; 0 for exact methods.
  double residual() const { return diagnostics.residuals.empty() ? 0.0 : diagnostics.residuals.back(); }
};

/// Regression estimate of P_top(f, Phi) from maximal separated sets.
/// `epsilons` must be strictly descending; the n window needs >= 4 values.
PressureEstimate pressure_estimate(const ModelSystem& system, const Potential& potential, std::span<const double> epsilons,
                                   int n_lo, int n_hi, unsigned threads = 0);

/// Same estimate for several potentials sharing one family of separated sets.
std::vector<PressureEstimate> pressure_estimates(const ModelSystem& system, std::span<const Potential> potentials,
                                                 std::span<const double> epsilons, int n_lo, int n_hi,
                                                 unsigned threads = 0);

/// log of the Perron root of A_ij exp(w_j).
PressureEstimate sft_pressure(const SymbolicCoding& coding, std::span<const double> log_weights);

struct PotentialAverage {
  double value = 0.0;
  double standard_error = 0.0;
  bool exact = false;
};

/// L_*(Phi, mu) = lim (1/n) int phi_n dmu. Closed form for locally constant
/// potentials and for singular-valued potentials on affine systems,
/// Monte-Carlo Birkhoff average at horizon n_limit otherwise.
PotentialAverage potential_average(const ModelSystem& system, const ErgodicMeasureSpec& measure,
                                   const Potential& potential, int n_limit = 200, int samples = 400,
                                   std::uint64_t seed = 0, unsigned threads = 0);

/// P_mu(f, Phi) = h_mu(f) + L_*(Phi, mu).
double measure_pressure(const ModelSystem& system, const ErgodicMeasureSpec& measure, const Potential& potential,
                        int n_limit = 200, int samples = 400, std::uint64_t seed = 0, unsigned threads = 0);

/// t -> P_mu(f, Phi_f(t)) built from the measure's exponents (exact for
/// affine systems, Monte-Carlo estimates otherwise).
std::function<double(double)> measure_pressure_function(const ModelSystem& system, const ErgodicMeasureSpec& measure,
                                                        int n_limit = 200, int samples = 400, std::uint64_t seed = 0,
                                                        unsigned threads = 0);

}  // namespace lydim
