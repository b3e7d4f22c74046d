#include "lydim/systems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lydim/errors.hpp"
#include "lydim/numeric.hpp"

namespace lydim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string format_point(const Point& x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ")";
  return os.str();
}

double wrap_unit(double v) {
  double r = v - std::floor(v);
  if (r >= 1.0) r = 0.0;
  return r;
}

// Sup-norm distance from x to a box (0 inside).
double box_distance(const Box& b, const Point& x) {
  double d = 0.0;
  for (Eigen::Index c = 0; c < x.size(); ++c) d = std::max({d, b.lo(c) - x(c), x(c) - b.hi(c)});
  return d;
}

double box_gap(const Box& a, const Box& b) {
  double g = 0.0;
  for (Eigen::Index c = 0; c < a.lo.size(); ++c) g = std::max({g, a.lo(c) - b.hi(c), b.lo(c) - a.hi(c)});
  return g;
}

}  // namespace

bool SymbolicCoding::admissible(const Word& w) const {
  const int k = alphabet_size();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0 || w[i] >= k) return false;
    if (i > 0 && transitions(w[i - 1], w[i]) == 0) return false;
  }
  return true;
}

void for_each_word(const SymbolicCoding& coding, int depth, const std::function<void(const Word&)>& fn) {
  if (depth < 0) throw ArgumentError("for_each_word: negative depth");
  const int k = coding.alphabet_size();
  Word w(static_cast<std::size_t>(depth), 0);
  if (depth == 0) {
    fn(w);
    return;
  }
  // Iterative odometer with admissibility pruning.
  int pos = 0;
  w[0] = -1;
  while (pos >= 0) {
    ++w[pos];
    if (w[pos] >= k) {
      --pos;
      continue;
    }
    if (pos > 0 && coding.transitions(w[pos - 1], w[pos]) == 0) continue;
    if (pos + 1 == depth) {
      fn(w);
    } else {
      ++pos;
      w[pos] = -1;
    }
  }
}

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::expanding_circle: return "expanding-circle";
    case SystemKind::diagonal_torus: return "diagonal-torus";
    case SystemKind::cantor_repeller: return "cantor-repeller";
    case SystemKind::planar_affine_repeller: return "planar-affine-repeller";
    case SystemKind::linear_horseshoe: return "linear-horseshoe";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Construction

ModelSystem ModelSystem::expanding_circle(int degree, double amplitude) {
  if (degree < 2) throw ArgumentError("expanding-circle: degree must be >= 2");
  if (!std::isfinite(amplitude) || std::abs(kTwoPi * amplitude) >= degree - 1)
    throw ArgumentError("expanding-circle: need |2 pi a| < m - 1 for uniform expansion");
  ModelSystem s;
  s.kind_ = SystemKind::expanding_circle;
  s.dim_ = 1;
  s.degree_ = degree;
  s.amplitude_ = amplitude;
  s.coding_ = SymbolicCoding::full(degree);
  s.finish();
  return s;
}

ModelSystem ModelSystem::diagonal_torus(int d1, int d2) {
  if (d1 < 2 || d2 < 2) throw ArgumentError("diagonal-torus: diagonal entries must be >= 2");
  ModelSystem s;
  s.kind_ = SystemKind::diagonal_torus;
  s.dim_ = 2;
  s.d1_ = d1;
  s.d2_ = d2;
  s.coding_ = SymbolicCoding::full(d1 * d2);
  s.finish();
  return s;
}

ModelSystem ModelSystem::cantor_repeller(std::vector<IntervalBranch> branches) {
  if (branches.empty()) throw ArgumentError("cantor-repeller: no branches");
  std::sort(branches.begin(), branches.end(), [](const auto& a, const auto& b) { return a.left < b.left; });
  for (std::size_t j = 0; j < branches.size(); ++j) {
    const auto& b = branches[j];
    if (!(b.slope > 1.0) || !std::isfinite(b.slope)) throw ArgumentError("cantor-repeller: slopes must be > 1");
    if (b.left < -kCodingTolerance || b.left + 1.0 / b.slope > 1.0 + kCodingTolerance)
      throw ArgumentError("cantor-repeller: branch domain must lie in [0, 1]");
    if (j > 0) {
      const auto& prev = branches[j - 1];
      if (prev.left + 1.0 / prev.slope >= b.left) throw ArgumentError("cantor-repeller: branch domains overlap");
    }
  }
  ModelSystem s;
  s.kind_ = SystemKind::cantor_repeller;
  s.dim_ = 1;
  s.intervals_ = std::move(branches);
  s.coding_ = SymbolicCoding::full(static_cast<int>(s.intervals_.size()));
  s.finish();
  return s;
}

ModelSystem ModelSystem::planar_repeller(std::vector<RectBranch> branches) {
  if (branches.empty()) throw ArgumentError("planar-affine-repeller: no branches");
  std::sort(branches.begin(), branches.end(), [](const auto& a, const auto& b) {
    return a.origin.x() != b.origin.x() ? a.origin.x() < b.origin.x() : a.origin.y() < b.origin.y();
  });
  ModelSystem s;
  s.kind_ = SystemKind::planar_affine_repeller;
  s.dim_ = 2;
  s.rects_ = std::move(branches);
  for (const auto& b : s.rects_) {
    if (!(b.derivative.array() > 1.0).all() || !b.derivative.allFinite())
      throw ArgumentError("planar-affine-repeller: derivative entries must be > 1");
    const Eigen::Vector2d hi = b.origin + b.derivative.cwiseInverse();
    if ((b.origin.array() < -kCodingTolerance).any() || (hi.array() > 1.0 + kCodingTolerance).any())
      throw ArgumentError("planar-affine-repeller: branch domain must lie in [0, 1]^2");
  }
  s.coding_ = SymbolicCoding::full(static_cast<int>(s.rects_.size()));
  for (int i = 0; i < s.alphabet_size(); ++i)
    for (int j = i + 1; j < s.alphabet_size(); ++j)
      if (box_gap(s.branch_domain(i), s.branch_domain(j)) <= 0.0)
        throw ArgumentError("planar-affine-repeller: branch domains overlap");
  s.finish();
  return s;
}

ModelSystem ModelSystem::linear_horseshoe(double beta, double alpha) {
  if (!(beta > 2.0) || !std::isfinite(beta)) throw ArgumentError("linear-horseshoe: need beta > 2 for disjoint strips");
  if (!(alpha > 0.0 && alpha < 0.5)) throw ArgumentError("linear-horseshoe: need 0 < alpha < 1/2 for disjoint images");
  ModelSystem s;
  s.kind_ = SystemKind::linear_horseshoe;
  s.dim_ = 2;
  s.beta_ = beta;
  s.alpha_ = alpha;
  s.coding_ = SymbolicCoding::full(2);
  s.finish();
  return s;
}

void ModelSystem::finish() {
  // Base point: fixed point of g_0 o g_{k-1}, an interior point of the invariant set.
  const int k = alphabet_size();
  Point q = unit_box().lo + 0.5 * unit_box().width();
  for (int it = 0; it < 20000; ++it) {
    Point next = inverse_branch(0, inverse_branch(k - 1, q));
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change == 0.0) break;
  }
  if (kind_ == SystemKind::linear_horseshoe) {
    // Stable coordinate: fixed point of y -> h_0(h_1(y)), h_j(y) = alpha y + c_j.
    q(1) = alpha_ * (1.0 - alpha_) / (1.0 - alpha_ * alpha_);
  }
  base_ = q;
}

// ---------------------------------------------------------------------------
// Geometry

double ModelSystem::min_expansion() const {
  switch (kind_) {
    case SystemKind::expanding_circle: return degree_ - kTwoPi * std::abs(amplitude_);
    case SystemKind::diagonal_torus: return std::min(d1_, d2_);
    case SystemKind::cantor_repeller: {
      double m = intervals_.front().slope;
      for (const auto& b : intervals_) m = std::min(m, b.slope);
      return m;
    }
    case SystemKind::planar_affine_repeller: {
      double m = rects_.front().derivative.minCoeff();
      for (const auto& b : rects_) m = std::min(m, b.derivative.minCoeff());
      return m;
    }
    case SystemKind::linear_horseshoe: return beta_;
  }
  return 1.0;
}

double ModelSystem::max_expansion() const {
  switch (kind_) {
    case SystemKind::expanding_circle: return degree_ + kTwoPi * std::abs(amplitude_);
    case SystemKind::diagonal_torus: return std::max(d1_, d2_);
    case SystemKind::cantor_repeller: {
      double m = intervals_.front().slope;
      for (const auto& b : intervals_) m = std::max(m, b.slope);
      return m;
    }
    case SystemKind::planar_affine_repeller: {
      double m = rects_.front().derivative.maxCoeff();
      for (const auto& b : rects_) m = std::max(m, b.derivative.maxCoeff());
      return m;
    }
    case SystemKind::linear_horseshoe: return beta_;
  }
  return 1.0;
}

double ModelSystem::local_radius() const {
  if (periodic()) return 1.0 / (2.0 * max_expansion());
  double gap = 1.0;
  for (int i = 0; i < alphabet_size(); ++i)
    for (int j = i + 1; j < alphabet_size(); ++j) gap = std::min(gap, box_gap(branch_domain(i), branch_domain(j)));
  return gap;
}

Eigen::VectorXd ModelSystem::branch_log_scales(int symbol) const {
  if (!affine()) throw ArgumentError("branch_log_scales: system has non-constant derivative");
  if (symbol < 0 || symbol >= alphabet_size()) throw ArgumentError("branch_log_scales: symbol out of range");
  switch (kind_) {
    case SystemKind::expanding_circle: return Eigen::VectorXd::Constant(1, std::log(static_cast<double>(degree_)));
    case SystemKind::diagonal_torus: return Eigen::Vector2d(std::log(double(d1_)), std::log(double(d2_)));
    case SystemKind::cantor_repeller: return Eigen::VectorXd::Constant(1, std::log(intervals_[symbol].slope));
    case SystemKind::planar_affine_repeller: return rects_[symbol].derivative.array().log().matrix();
    case SystemKind::linear_horseshoe: return Eigen::Vector2d(std::log(beta_), std::log(alpha_));
  }
  return {};
}

Box ModelSystem::unit_box() const { return {Point::Zero(dim_), Point::Ones(dim_)}; }

Box ModelSystem::branch_domain(int symbol) const {
  if (symbol < 0 || symbol >= alphabet_size()) throw ArgumentError("branch_domain: symbol out of range");
  switch (kind_) {
    case SystemKind::expanding_circle: {
      Point lo = Point::Constant(1, circle_inverse(symbol));
      Point hi = Point::Constant(1, circle_inverse(symbol + 1.0));
      return {lo, hi};
    }
    case SystemKind::diagonal_torus: {
      const int i = symbol / d2_, j = symbol % d2_;
      return {Eigen::Vector2d(double(i) / d1_, double(j) / d2_), Eigen::Vector2d(double(i + 1) / d1_, double(j + 1) / d2_)};
    }
    case SystemKind::cantor_repeller: {
      const auto& b = intervals_[symbol];
      return {Point::Constant(1, b.left), Point::Constant(1, b.left + 1.0 / b.slope)};
    }
    case SystemKind::planar_affine_repeller: {
      const auto& b = rects_[symbol];
      return {b.origin, b.origin + b.derivative.cwiseInverse()};
    }
    case SystemKind::linear_horseshoe: {
      const double left = symbol == 0 ? 0.0 : 1.0 - 1.0 / beta_;
      return {Eigen::Vector2d(left, 0.0), Eigen::Vector2d(left + 1.0 / beta_, 1.0)};
    }
  }
  return {};
}

double ModelSystem::circle_lift(double x) const { return degree_ * x + amplitude_ * std::sin(kTwoPi * x); }

// Solves F(x) = v for the increasing lift F by safeguarded Newton.
double ModelSystem::circle_inverse(double v) const {
  if (amplitude_ == 0.0) return v / degree_;
  double lo = (v - std::abs(amplitude_)) / degree_;
  double hi = (v + std::abs(amplitude_)) / degree_;
  double x = v / degree_;
  for (int it = 0; it < 100; ++it) {
    const double fx = circle_lift(x) - v;
    if (fx == 0.0) return x;
    if (fx > 0) hi = x;
    else lo = x;
    const double d = degree_ + kTwoPi * amplitude_ * std::cos(kTwoPi * x);
    double next = x - fx / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-17 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

Point ModelSystem::inverse_branch(int symbol, const Point& y) const {
  switch (kind_) {
    case SystemKind::expanding_circle: return Point::Constant(1, circle_inverse(y(0) + symbol));
    case SystemKind::diagonal_torus: {
      const int i = symbol / d2_, j = symbol % d2_;
      return Eigen::Vector2d((y(0) + i) / d1_, (y(1) + j) / d2_);
    }
    case SystemKind::cantor_repeller: {
      const auto& b = intervals_[symbol];
      return Point::Constant(1, b.left + y(0) / b.slope);
    }
    case SystemKind::planar_affine_repeller: {
      const auto& b = rects_[symbol];
      return b.origin + y.cwiseQuotient(b.derivative);
    }
    case SystemKind::linear_horseshoe: {
      const double left = symbol == 0 ? 0.0 : 1.0 - 1.0 / beta_;
      return Eigen::Vector2d(left + y(0) / beta_, y(1));
    }
  }
  return y;
}

int ModelSystem::branch_of(const Point& x) const {
  switch (kind_) {
    case SystemKind::expanding_circle: {
      const double xr = wrap_unit(x(0));
      const int j = static_cast<int>(std::floor(circle_lift(xr)));
      return std::clamp(j, 0, degree_ - 1);
    }
    case SystemKind::diagonal_torus: {
      const int i = std::clamp(static_cast<int>(std::floor(wrap_unit(x(0)) * d1_)), 0, d1_ - 1);
      const int j = std::clamp(static_cast<int>(std::floor(wrap_unit(x(1)) * d2_)), 0, d2_ - 1);
      return i * d2_ + j;
    }
    default: {
      for (int j = 0; j < alphabet_size(); ++j)
        if (branch_domain(j).contains(x, kCodingTolerance)) return j;
      throw DomainError("point " + format_point(x) + " lies outside every branch domain of " + describe());
    }
  }
}

std::string ModelSystem::describe() const {
  std::ostringstream os;
  os.precision(9);
  os << to_string(kind_);
  switch (kind_) {
    case SystemKind::expanding_circle: os << "(m=" << degree_ << ", a=" << amplitude_ << ")"; break;
    case SystemKind::diagonal_torus: os << "(diag " << d1_ << "," << d2_ << ")"; break;
    case SystemKind::cantor_repeller:
      os << "(slopes";
      for (const auto& b : intervals_) os << " " << b.slope;
      os << ")";
      break;
    case SystemKind::planar_affine_repeller:
      os << "(";
      for (const auto& b : rects_) os << "[" << b.derivative.x() << "," << b.derivative.y() << "]";
      os << ")";
      break;
    case SystemKind::linear_horseshoe: os << "(beta=" << beta_ << ", alpha=" << alpha_ << ")"; break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Dynamics

Point eval(const ModelSystem& system, const Point& x) {
  if (x.size() != system.dim()) throw ArgumentError("eval: point has wrong dimension");
  switch (system.kind()) {
    case SystemKind::expanding_circle: {
      const double xr = wrap_unit(x(0));
      const double m = system.degree();
      return Point::Constant(1, wrap_unit(m * xr + system.amplitude() * std::sin(kTwoPi * xr)));
    }
    case SystemKind::diagonal_torus: {
      const Eigen::Vector2i d = system.torus_diagonal();
      return Eigen::Vector2d(wrap_unit(d(0) * wrap_unit(x(0))), wrap_unit(d(1) * wrap_unit(x(1))));
    }
    case SystemKind::cantor_repeller: {
      const int j = system.branch_of(x);
      const auto& b = system.interval_branches()[j];
      return Point::Constant(1, b.slope * (x(0) - b.left));
    }
    case SystemKind::planar_affine_repeller: {
      const int j = system.branch_of(x);
      const auto& b = system.rect_branches()[j];
      return (x - b.origin).cwiseProduct(b.derivative);
    }
    case SystemKind::linear_horseshoe: {
      const int j = system.branch_of(x);
      const Box dom = system.branch_domain(j);
      return Eigen::Vector2d(system.beta() * (x(0) - dom.lo(0)), system.alpha() * x(1) + system.stable_offset(j));
    }
  }
  return x;
}

namespace {

// Exact branch derivative of an affine system (diagonal, coordinate order).
Eigen::MatrixXd branch_derivative(const ModelSystem& system, int symbol) {
  switch (system.kind()) {
    case SystemKind::expanding_circle: return Eigen::MatrixXd::Constant(1, 1, system.degree());
    case SystemKind::diagonal_torus: return system.torus_diagonal().cast<double>().asDiagonal();
    case SystemKind::cantor_repeller: return Eigen::MatrixXd::Constant(1, 1, system.interval_branches()[symbol].slope);
    case SystemKind::planar_affine_repeller: return system.rect_branches()[symbol].derivative.asDiagonal();
    case SystemKind::linear_horseshoe: return Eigen::Vector2d(system.beta(), system.alpha()).asDiagonal();
  }
  return {};
}

}  // namespace

Eigen::MatrixXd jacobian(const ModelSystem& system, const Point& x) {
  if (x.size() != system.dim()) throw ArgumentError("jacobian: point has wrong dimension");
  if (system.kind() == SystemKind::expanding_circle) {
    const double xr = wrap_unit(x(0));
    return Eigen::MatrixXd::Constant(1, 1, system.degree() + kTwoPi * system.amplitude() * std::cos(kTwoPi * xr));
  }
  return branch_derivative(system, system.branch_of(x));
}

std::vector<Point> orbit(const ModelSystem& system, const Point& x, int n) {
  if (n < 0) throw ArgumentError("orbit: negative length");
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(x);
  for (int k = 0; k < n; ++k) {
    try {
      out.push_back(eval(system, out.back()));
    } catch (const DomainError& e) {
      throw EscapeError("orbit escaped the domain at step " + std::to_string(k) + ": " + e.what(), k);
    }
  }
  return out;
}

Box decode(const ModelSystem& system, const Word& word) {
  if (!system.coding().admissible(word)) throw CodingError("decode: word is not admissible");
  Box b = system.unit_box();
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    b.lo = system.inverse_branch(*it, b.lo);
    b.hi = system.inverse_branch(*it, b.hi);
  }
  return b;
}

Point anchor(const ModelSystem& system, const Word& word) {
  if (!system.coding().admissible(word)) throw CodingError("anchor: word is not admissible");
  Point q = system.base_point();
  for (auto it = word.rbegin(); it != word.rend(); ++it) q = system.inverse_branch(*it, q);
  return q;
}

Word encode(const ModelSystem& system, const Point& x_in, int depth) {
  if (depth < 0) throw ArgumentError("encode: negative depth");
  if (x_in.size() != system.dim()) throw ArgumentError("encode: point has wrong dimension");
  Point x = x_in;
  if (system.periodic())
    for (Eigen::Index c = 0; c < x.size(); ++c) x(c) = wrap_unit(x(c));
  const int k = system.alphabet_size();
  Word w;
  w.reserve(static_cast<std::size_t>(depth));
  for (int d = 0; d < depth; ++d) {
    int best = -1;
    int best_rank = 3;  // 0: closed & strictly below hi, 1: closed, 2: within tolerance
    double best_dist = 0.0;
    for (int s = 0; s < k; ++s) {
      if (d > 0 && system.coding().transitions(w.back(), s) == 0) continue;
      w.push_back(s);
      const Box child = decode(system, w);
      w.pop_back();
      const double dist = box_distance(child, x);
      int rank;
      if (dist == 0.0) rank = (x.array() < child.hi.array()).all() ? 0 : 1;
      else if (dist <= kCodingTolerance) rank = 2;
      else continue;
      if (rank < best_rank || (rank == best_rank && rank == 2 && dist < best_dist)) {
        best = s;
        best_rank = rank;
        best_dist = dist;
      }
    }
    if (best < 0)
      throw CodingError("encode: point " + format_point(x_in) + " is not in the coded invariant set (depth " +
                        std::to_string(d) + ")");
    w.push_back(best);
  }
  return w;
}

std::vector<Point> coded_orbit(const ModelSystem& system, const Word& word, int n) {
  if (n < 0 || static_cast<std::size_t>(n) > word.size()) throw ArgumentError("coded_orbit: word shorter than orbit");
  std::vector<Point> pts(static_cast<std::size_t>(n));
  Point q = system.base_point();
  for (int k = static_cast<int>(word.size()) - 1; k >= 0; --k) {
    q = system.inverse_branch(word[k], q);
    if (k < n) pts[k] = q;
  }
  if (system.kind() == SystemKind::linear_horseshoe && n > 0) {
    double y = system.base_point()(1);
    for (int k = 0; k < n; ++k) {
      pts[k](1) = y;
      y = system.alpha() * y + system.stable_offset(word[k]);
    }
  }
  return pts;
}

Eigen::MatrixXd coded_jacobian(const ModelSystem& system, int symbol, const Point& point) {
  if (system.affine()) {
    if (symbol < 0 || symbol >= system.alphabet_size()) throw ArgumentError("coded_jacobian: symbol out of range");
    return branch_derivative(system, symbol);
  }
  return jacobian(system, point);
}

double distance(const ModelSystem& system, const Point& x, const Point& y) {
  double d = 0.0;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    double dc = std::abs(x(c) - y(c));
    if (system.periodic()) {
      dc = dc - std::floor(dc);
      dc = std::min(dc, 1.0 - dc);
    }
    d = std::max(d, dc);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Measures

ErgodicMeasureSpec ErgodicMeasureSpec::bernoulli(Eigen::VectorXd p) {
  if (p.size() == 0) throw ArgumentError("bernoulli: empty probability vector");
  if (!p.allFinite() || (p.array() < 0).any()) throw ArgumentError("bernoulli: probabilities must be finite and >= 0");
  if (std::abs(p.sum() - 1.0) > 1e-12) throw ArgumentError("bernoulli: probabilities must sum to 1");
  ErgodicMeasureSpec m;
  m.bernoulli_ = true;
  m.stationary_ = p;
  m.transition_ = p.transpose().replicate(p.size(), 1);
  return m;
}

ErgodicMeasureSpec ErgodicMeasureSpec::markov(Eigen::MatrixXd q) {
  if (q.rows() == 0 || q.rows() != q.cols()) throw ArgumentError("markov: matrix must be square and non-empty");
  if (!q.allFinite() || (q.array() < 0).any()) throw ArgumentError("markov: entries must be finite and >= 0");
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    if (std::abs(q.row(i).sum() - 1.0) > 1e-12) throw ArgumentError("markov: rows must sum to 1");
  if (!is_primitive(q)) throw StructureError("markov: transition matrix is not primitive");
  const Eigen::Index k = q.rows();
  Eigen::MatrixXd a = q.transpose() - Eigen::MatrixXd::Identity(k, k);
  a.row(k - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  rhs(k - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
  if (((pi.transpose() * q) - pi.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw NumericalError("markov: stationary vector failed the 1e-12 residual check");
  ErgodicMeasureSpec m;
  m.bernoulli_ = false;
  m.transition_ = std::move(q);
  m.stationary_ = pi;
  return m;
}

double ErgodicMeasureSpec::log_mass(const Word& word) const {
  if (word.empty()) return 0.0;
  double lm = std::log(stationary_(word[0]));
  for (std::size_t i = 1; i < word.size(); ++i) lm += std::log(transition_(word[i - 1], word[i]));
  return lm;
}

Word ErgodicMeasureSpec::sample(std::mt19937_64& rng, int length) const {
  // Explicit 53-bit uniform so the stream is identical across standard libraries.
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto draw = [&](auto row) {
    const double u = uniform();
    double acc = 0.0;
    int last = 0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (row(j) <= 0) continue;
      acc += row(j);
      last = static_cast<int>(j);
      if (u < acc) return last;
    }
    return last;
  };
  Word w(static_cast<std::size_t>(std::max(0, length)));
  for (int i = 0; i < length; ++i) w[i] = i == 0 ? draw(stationary_) : draw(transition_.row(w[i - 1]));
  return w;
}

std::string ErgodicMeasureSpec::describe() const {
  std::ostringstream os;
  os.precision(9);
  if (bernoulli_) {
    os << "bernoulli(";
    for (Eigen::Index i = 0; i < stationary_.size(); ++i) os << (i ? "," : "") << stationary_(i);
    os << ")";
  } else {
    os << "markov(" << transition_.rows() << " states)";
  }
  return os.str();
}

Eigen::VectorXd stationary_distribution(const ErgodicMeasureSpec& measure) { return measure.stationary(); }

double measure_entropy(const ErgodicMeasureSpec& measure) {
  auto row_entropy = [](const auto& row) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j)
      if (row(j) > 0) h -= row(j) * std::log(row(j));
    return h;
  };
  if (measure.is_bernoulli()) return row_entropy(measure.stationary());
  double h = 0.0;
  for (Eigen::Index i = 0; i < measure.transition().rows(); ++i)
    h += measure.stationary()(i) * row_entropy(measure.transition().row(i));
  return h;
}

void check_compatible(const ModelSystem& system, const ErgodicMeasureSpec& measure) {
  if (measure.alphabet_size() != system.alphabet_size())
    throw ArgumentError("measure alphabet (" + std::to_string(measure.alphabet_size()) +
                        ") does not match the system coding (" + std::to_string(system.alphabet_size()) + ")");
  const auto& a = system.coding().transitions;
  for (int i = 0; i < system.alphabet_size(); ++i)
    for (int j = 0; j < system.alphabet_size(); ++j)
      if (measure.transition()(i, j) > 0 && a(i, j) == 0 && measure.stationary()(i) > 0)
        throw ArgumentError("measure charges a forbidden transition of the coding");
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x6c79u};
  return std::mt19937_64(seq);
}

}  // namespace lydim
