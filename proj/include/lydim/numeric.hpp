#pragma once

// Small numeric kernels shared by the modules: log-sum-exp, least-squares
// slopes, Perron roots and primitivity of non-negative matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lydim/errors.hpp"

namespace lydim {

/// log(sum(exp(v))) without overflow. Empty input gives -inf.
template <typename Scalar>
Scalar log_sum_exp(std::span<const Scalar> v) {
  if (v.empty()) return -std::numeric_limits<Scalar>::infinity();
  const Scalar m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  Scalar s = 0;
  for (Scalar x : v) s += std::exp(x - m);
  return m + std::log(s);
}

template <typename Scalar>
struct LineFit {
  Scalar slope = 0;
  Scalar intercept = 0;
  Scalar residual = 0;  // root-mean-square residual
};

/// Ordinary least squares y = slope*x + intercept.
template <typename Scalar>
LineFit<Scalar> fit_line(std::span<const Scalar> x, std::span<const Scalar> y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("fit_line: need at least two paired samples");
  const auto n = static_cast<Scalar>(x.size());
  Scalar mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  Scalar sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) throw ArgumentError("fit_line: abscissae are all equal");
  LineFit<Scalar> fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  Scalar ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Scalar r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

/// True when some power of the non-negative square matrix is strictly positive.
/// Uses Wielandt's bound (k-1)^2 + 1 on the exponent.
template <typename Derived>
bool is_primitive(const Eigen::MatrixBase<Derived>& a) {
  const Eigen::Index k = a.rows();
  if (k == 0 || a.cols() != k) return false;
  using Bool = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  Bool pattern = (a.array() > 0).template cast<int>();
  Bool power = pattern;
  const Eigen::Index bound = (k - 1) * (k - 1) + 1;
  for (Eigen::Index p = 1; p <= bound; ++p) {
    if ((power.array() > 0).all()) return true;
    power = ((power * pattern).array() > 0).template cast<int>();
  }
  return (power.array() > 0).all();
}

/// Perron root of a primitive non-negative matrix.
template <typename Derived>
typename Derived::Scalar perron_root(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (!is_primitive(m)) throw StructureError("perron_root: matrix is not primitive");
  if (m.rows() == 1) return m(0, 0);
  Eigen::EigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(m.eval(), false);
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto ev = es.eigenvalues()(i);
    best = std::max(best, ev.real());
  }
  return best;
}

}  // namespace lydim
