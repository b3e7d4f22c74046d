#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lydim/errors.hpp"
#include "lydim/systems.hpp"

namespace lydim {

/// Steps between re-orthogonalizations of the tangent frame.
inline constexpr int kReorthogonalizationBlock = 10;

struct CocycleResult {
  int n = 0;
  Eigen::VectorXd log_singular_values;  // log alpha_1 >= ... >= log alpha_m0
  int reorthogonalizations = 0;
};

/// Accumulates a product J_n ... J_1 of square matrices in QR form.
///
/// Products are taken over blocks of `block` factors and then re-factored as
/// Q R. The chain of R factors has the same singular values as the full
/// product; it is kept normalised with a separate log scale, and the sum of
/// log |diag R| gives log |det| exactly, which pins the smallest singular
/// value without underflow (dimension <= 2 is exact).
template <typename Scalar = double>
class QrCocycle {
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit QrCocycle(Eigen::Index dim, int block = kReorthogonalizationBlock)
      : q_(Matrix::Identity(dim, dim)),
        block_(Matrix::Identity(dim, dim)),
        r_acc_(Matrix::Identity(dim, dim)),
        log_diag_(Vector::Zero(dim)),
        block_len_(block) {
    if (dim < 1 || dim > 2) throw ArgumentError("QrCocycle: supported dimensions are 1 and 2");
    if (block < 1) throw ArgumentError("QrCocycle: block length must be positive");
  }

  template <typename Derived>
  void push(const Eigen::MatrixBase<Derived>& j) {
    block_ = j * block_;
    ++steps_;
    if (!block_.allFinite()) throw NumericalError("cocycle product became non-finite", steps_ - 1);
    if (++pending_ == block_len_) flush();
  }

  int steps() const { return steps_; }
  int reorthogonalizations() const { return reorth_; }

  /// Log singular values of the accumulated product, descending.
  Vector log_singular_values() {
    flush();
    const Eigen::Index m = q_.rows();
    Vector out(m);
    if (m == 1) {
      out(0) = log_diag_(0);
      return out;
    }
    Eigen::JacobiSVD<Matrix> svd(r_acc_);
    const Scalar top = svd.singularValues()(0);
    if (!(top > 0)) throw NumericalError("cocycle: degenerate R chain", steps_);
    out(0) = log_scale_ + std::log(top);
    out(1) = log_diag_.sum() - out(0);
    return out;
  }

private:
  void flush() {
    if (pending_ == 0) return;
    const Matrix m = block_ * q_;
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    Matrix r = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      if (r(i, i) < 0) {
        r.row(i) *= -1;
        q.col(i) *= -1;
      }
      if (!(r(i, i) > 0) || !std::isfinite(r(i, i))) throw NumericalError("cocycle: singular derivative product", steps_ - 1);
      log_diag_(i) += std::log(r(i, i));
    }
    r_acc_ = r * r_acc_;
    const Scalar s = r_acc_.cwiseAbs().maxCoeff();
    r_acc_ /= s;
    log_scale_ += std::log(s);
    q_ = q;
    block_.setIdentity();
    pending_ = 0;
    ++reorth_;
  }

  Matrix q_, block_, r_acc_;
  Vector log_diag_;
  Scalar log_scale_ = 0;
  int block_len_;
  int pending_ = 0;
  int steps_ = 0;
  int reorth_ = 0;
};

/// phi^t from descending log singular values: the smallest floor(t) logs plus
/// the fractional share of the next one. At t = m0 the fractional term is
/// absent, so index 0 is never read.
template <typename Derived>
typename Derived::Scalar singular_value_potential(const Eigen::MatrixBase<Derived>& log_sv, typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m0 = log_sv.size();
  if (!(t >= 0) || t > static_cast<Scalar>(m0)) throw ArgumentError("singular value potential: t outside [0, m0]");
  const auto whole = static_cast<Eigen::Index>(std::floor(t));
  const Scalar frac = t - static_cast<Scalar>(whole);
  Scalar sum = 0;
  for (Eigen::Index i = m0 - whole; i < m0; ++i) sum += log_sv(i);
  if (frac > 0) sum += frac * log_sv(m0 - whole - 1);
  return sum;
}

/// Cocycle along the floating-point orbit of x.
CocycleResult orbit_singular_values(const ModelSystem& system, const Point& x, int n);
/// Cocycle along the coded orbit of anchor(word); word.size() >= n.
CocycleResult coded_singular_values(const ModelSystem& system, const Word& word, int n);

/// phi^t(x, f^n).
double svp(const ModelSystem& system, const Point& x, int n, double t);
/// phi^t along a coded orbit.
double coded_svp(const ModelSystem& system, const Word& word, int n, double t);

/// Symbols appended to sampled words so coded orbit points are accurate to
/// double precision (0 for affine systems, which only need the symbols).
int coding_lookahead(const ModelSystem& system);

struct LyapunovEstimate {
  Eigen::VectorXd exponents;        // descending
  Eigen::VectorXd standard_errors;  // from the sample variance
  int n = 0;
  int samples = 0;
};

/// Monte-Carlo average of (1/n) log singular values over mu-distributed words.
LyapunovEstimate lyapunov_exponents(const ModelSystem& system, const ErgodicMeasureSpec& measure, int n, int samples,
                                    std::uint64_t seed, unsigned threads = 0);

/// Closed form for affine systems: per-coordinate measure averages of the
/// branch log-derivatives, sorted descending. Empty for non-affine systems.
std::optional<Eigen::VectorXd> exact_lyapunov_exponents(const ModelSystem& system, const ErgodicMeasureSpec& measure);

}  // namespace lydim
