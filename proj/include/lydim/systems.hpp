#pragma once

// Model dynamical systems with an exact Markov coding.
//
// Every shipped system is a uniformly expanding (or, for the horseshoe,
// uniformly hyperbolic) map whose invariant set is coded by a primitive
// subshift. Branches are orientation preserving, so each inverse branch
// maps boxes to boxes corner to corner; cylinder geometry is therefore
// computed exactly by composing inverse branches ("decode side") instead of
// iterating the expanding forward map in floating point.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace lydim {

using Point = Eigen::VectorXd;
using Word = std::vector<int>;

/// Absolute tolerance for membership tests on the coded invariant set.
inline constexpr double kCodingTolerance = 1e-12;

/// Axis-aligned box [lo, hi] (half-open on the right for periodic systems).
struct Box {
  Point lo;
  Point hi;

  Point width() const { return hi - lo; }
  double diameter() const { return (hi - lo).maxCoeff(); }
  bool contains(const Point& x, double tol = 0.0) const {
    return ((x.array() >= lo.array() - tol) && (x.array() <= hi.array() + tol)).all();
  }
  bool contains(const Box& inner, double tol = 0.0) const {
    return ((inner.lo.array() >= lo.array() - tol) && (inner.hi.array() <= hi.array() + tol)).all();
  }
};

/// Topological Markov chain coding a system's invariant set.
struct SymbolicCoding {
  Eigen::MatrixXi transitions;  // A(i,j) = 1 when j may follow i

  int alphabet_size() const { return static_cast<int>(transitions.rows()); }
  bool full_shift() const { return (transitions.array() == 1).all(); }
  bool admissible(const Word& w) const;

  static SymbolicCoding full(int k) { return {Eigen::MatrixXi::Ones(k, k)}; }
};

/// Calls fn(word) for every admissible word of the given length in
/// lexicographic order.
void for_each_word(const SymbolicCoding& coding, int depth, const std::function<void(const Word&)>& fn);

enum class SystemKind { expanding_circle, diagonal_torus, cantor_repeller, planar_affine_repeller, linear_horseshoe };

std::string to_string(SystemKind kind);

struct IntervalBranch {
  double left;   // left endpoint of the branch domain
  double slope;  // > 1; domain is [left, left + 1/slope]
};

struct RectBranch {
  Eigen::Vector2d origin;      // lower-left corner of the branch domain
  Eigen::Vector2d derivative;  // diagonal derivative (u, v), both > 1
};

class ModelSystem {
public:
  /// x -> m x + a sin(2 pi x) mod 1, requires m >= 2 and |2 pi a| < m - 1.
  static ModelSystem expanding_circle(int degree, double amplitude);
  /// (x, y) -> (d1 x, d2 y) mod 1 on the 2-torus.
  static ModelSystem diagonal_torus(int d1, int d2);
  /// Affine branches x -> s_j (x - left_j) onto [0, 1].
  static ModelSystem cantor_repeller(std::vector<IntervalBranch> branches);
  /// Affine branches (x, y) -> diag(u_j, v_j) ((x, y) - origin_j) onto [0, 1]^2.
  static ModelSystem planar_repeller(std::vector<RectBranch> branches);
  /// Two-branch affine horseshoe: unstable x expanded by beta from the strips
  /// [0, 1/beta] and [1 - 1/beta, 1]; stable y contracted by alpha into
  /// [0, alpha] and [1 - alpha, 1]. Requires beta > 2 and alpha < 1/2.
  static ModelSystem linear_horseshoe(double beta, double alpha);

  SystemKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int alphabet_size() const { return coding_.alphabet_size(); }
  const SymbolicCoding& coding() const { return coding_; }

  /// Circle and torus use the quotient metric on [0, 1)^m0.
  bool periodic() const { return kind_ == SystemKind::expanding_circle || kind_ == SystemKind::diagonal_torus; }
  /// Branch derivatives are constant diagonal matrices.
  bool affine() const { return !(kind_ == SystemKind::expanding_circle && amplitude_ != 0.0); }
  bool invertible() const { return kind_ == SystemKind::linear_horseshoe; }

  /// Bounds on the expansion of the expanding coordinates.
  double min_expansion() const;
  double max_expansion() const;
  /// Scale below which d(fx, fy) >= min_expansion * d(x, y) holds for every
  /// pair at distance <= the scale. Bowen-ball radii and separation scales
  /// must stay below it.
  double local_radius() const;

  /// Diagonal of the (constant) branch derivative as logs. Affine systems only.
  Eigen::VectorXd branch_log_scales(int symbol) const;
  /// Branch domain (closed box).
  Box branch_domain(int symbol) const;
  /// Inverse of branch `symbol` applied to y in the unit box. For the
  /// horseshoe only the unstable coordinate is pulled back.
  Point inverse_branch(int symbol, const Point& y) const;
  /// Box spanned by the coding: [0, 1]^m0.
  Box unit_box() const;
  /// A point of the invariant set well inside the unit box; cylinder anchors
  /// are its images under inverse-branch compositions.
  const Point& base_point() const { return base_; }

  /// Forward branch index of x (no domain check beyond tolerance).
  int branch_of(const Point& x) const;

  // Parameter access.
  int degree() const { return degree_; }
  double amplitude() const { return amplitude_; }
  double beta() const { return beta_; }
  double alpha() const { return alpha_; }
  const std::vector<IntervalBranch>& interval_branches() const { return intervals_; }
  const std::vector<RectBranch>& rect_branches() const { return rects_; }
  Eigen::Vector2i torus_diagonal() const { return {d1_, d2_}; }
  /// Offset of the stable image strip of horseshoe branch j.
  double stable_offset(int symbol) const { return symbol == 0 ? 0.0 : 1.0 - alpha_; }

  std::string describe() const;

private:
  ModelSystem() = default;
  void finish();
  double circle_lift(double x) const;
  double circle_inverse(double v) const;

  SystemKind kind_{SystemKind::expanding_circle};
  int dim_ = 1;
  SymbolicCoding coding_;
  int degree_ = 0;
  double amplitude_ = 0.0;
  int d1_ = 0, d2_ = 0;
  std::vector<IntervalBranch> intervals_;
  std::vector<RectBranch> rects_;
  double beta_ = 0.0, alpha_ = 0.0;
  Point base_;
};

/// f(x); circle/torus results are reduced into [0, 1)^m0.
Point eval(const ModelSystem& system, const Point& x);
/// Exact derivative matrix at x.
Eigen::MatrixXd jacobian(const ModelSystem& system, const Point& x);
/// [x, f(x), ..., f^n(x)]; throws EscapeError if the orbit leaves the domain.
std::vector<Point> orbit(const ModelSystem& system, const Point& x, int n);

/// Branch itinerary of length `depth`, found by nested cylinder search so
/// that rounding is never amplified by the forward map.
Word encode(const ModelSystem& system, const Point& x, int depth);
/// Exact extents of the cylinder of `word`.
Box decode(const ModelSystem& system, const Word& word);
/// Canonical point of the cylinder: image of the base point.
Point anchor(const ModelSystem& system, const Word& word);

/// Points f^k(x), k = 0..n-1, for x = anchor(word), computed as anchors of the
/// shifted words. Requires word.size() >= n.
std::vector<Point> coded_orbit(const ModelSystem& system, const Word& word, int n);
/// Derivative at step k of a coded orbit; uses the branch symbol on affine systems.
Eigen::MatrixXd coded_jacobian(const ModelSystem& system, int symbol, const Point& point);

/// Sup-norm distance; per-coordinate quotient distance on periodic systems.
double distance(const ModelSystem& system, const Point& x, const Point& y);

// ---------------------------------------------------------------------------
// Measures on the coding shift.

class ErgodicMeasureSpec {
public:
  /// i.i.d. symbols with probability vector p.
  static ErgodicMeasureSpec bernoulli(Eigen::VectorXd p);
  /// Stationary Markov chain with stochastic, primitive matrix q.
  static ErgodicMeasureSpec markov(Eigen::MatrixXd q);

  bool is_bernoulli() const { return bernoulli_; }
  int alphabet_size() const { return static_cast<int>(stationary_.size()); }
  /// Row-stochastic transition matrix (rows all equal p for Bernoulli).
  const Eigen::MatrixXd& transition() const { return transition_; }
  const Eigen::VectorXd& stationary() const { return stationary_; }
  /// Bernoulli probability vector (stationary vector for Markov).
  const Eigen::VectorXd& probabilities() const { return stationary_; }

  double log_mass(const Word& word) const;
  Word sample(std::mt19937_64& rng, int length) const;
  std::string describe() const;

private:
  ErgodicMeasureSpec() = default;
  bool bernoulli_ = true;
  Eigen::MatrixXd transition_;
  Eigen::VectorXd stationary_;
};

Eigen::VectorXd stationary_distribution(const ErgodicMeasureSpec& measure);
/// Entropy in nats; 0 log 0 = 0.
double measure_entropy(const ErgodicMeasureSpec& measure);
/// Throws ArgumentError unless the measure lives on the system's coding.
void check_compatible(const ModelSystem& system, const ErgodicMeasureSpec& measure);

/// Deterministic per-index random stream derived from (seed, index).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

}  // namespace lydim
