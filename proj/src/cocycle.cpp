#include "lydim/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "lydim/parallel.hpp"

namespace lydim {

CocycleResult orbit_singular_values(const ModelSystem& system, const Point& x, int n) {
  if (n < 1) throw ArgumentError("orbit_singular_values: n must be >= 1");
  const auto pts = orbit(system, x, n - 1);
  QrCocycle<double> acc(system.dim());
  for (int k = 0; k < n; ++k) acc.push(jacobian(system, pts[k]));
  CocycleResult r;
  r.n = n;
  r.log_singular_values = acc.log_singular_values();
  r.reorthogonalizations = acc.reorthogonalizations();
  return r;
}

CocycleResult coded_singular_values(const ModelSystem& system, const Word& word, int n) {
  if (n < 1) throw ArgumentError("coded_singular_values: n must be >= 1");
  QrCocycle<double> acc(system.dim());
  if (system.affine()) {
    if (word.size() < static_cast<std::size_t>(n)) throw ArgumentError("coded_singular_values: word too short");
    for (int k = 0; k < n; ++k) acc.push(system.branch_log_scales(word[k]).array().exp().matrix().asDiagonal().toDenseMatrix());
  } else {
    const auto pts = coded_orbit(system, word, n);
    for (int k = 0; k < n; ++k) acc.push(jacobian(system, pts[k]));
  }
  CocycleResult r;
  r.n = n;
  r.log_singular_values = acc.log_singular_values();
  r.reorthogonalizations = acc.reorthogonalizations();
  return r;
}

double svp(const ModelSystem& system, const Point& x, int n, double t) {
  if (!(t >= 0.0) || t > system.dim()) throw ArgumentError("svp: t outside [0, m0]");
  return singular_value_potential(orbit_singular_values(system, x, n).log_singular_values, t);
}

double coded_svp(const ModelSystem& system, const Word& word, int n, double t) {
  if (!(t >= 0.0) || t > system.dim()) throw ArgumentError("svp: t outside [0, m0]");
  return singular_value_potential(coded_singular_values(system, word, n).log_singular_values, t);
}

int coding_lookahead(const ModelSystem& system) {
  if (system.affine()) return 0;
  return static_cast<int>(std::ceil(37.0 / std::log(system.min_expansion())));
}

LyapunovEstimate lyapunov_exponents(const ModelSystem& system, const ErgodicMeasureSpec& measure, int n, int samples,
                                    std::uint64_t seed, unsigned threads) {
  if (n < 1) throw ArgumentError("lyapunov_exponents: n must be >= 1");
  if (samples < 1) throw ArgumentError("lyapunov_exponents: need at least one sample");
  check_compatible(system, measure);
  const int m0 = system.dim();
  const int extra = coding_lookahead(system);
  std::vector<Eigen::VectorXd> per_sample(static_cast<std::size_t>(samples));
  parallel_for(per_sample.size(), threads, [&](std::size_t i) {
    auto rng = substream(seed, i);
    const Word w = measure.sample(rng, n + extra);
    per_sample[i] = coded_singular_values(system, w, n).log_singular_values / n;
  });
  LyapunovEstimate est;
  est.n = n;
  est.samples = samples;
  est.exponents = Eigen::VectorXd::Zero(m0);
  for (const auto& v : per_sample) est.exponents += v;
  est.exponents /= samples;
  est.standard_errors = Eigen::VectorXd::Zero(m0);
  if (samples > 1) {
    for (const auto& v : per_sample) est.standard_errors += (v - est.exponents).cwiseAbs2();
    est.standard_errors = (est.standard_errors / (samples - 1)).cwiseSqrt() / std::sqrt(static_cast<double>(samples));
  }
  return est;
}

std::optional<Eigen::VectorXd> exact_lyapunov_exponents(const ModelSystem& system, const ErgodicMeasureSpec& measure) {
  if (!system.affine()) return std::nullopt;
  check_compatible(system, measure);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(system.dim());
  const auto& pi = measure.stationary();
  for (int j = 0; j < system.alphabet_size(); ++j) lam += pi(j) * system.branch_log_scales(j);
  std::sort(lam.begin(), lam.end(), std::greater<>());
  return lam;
}

}  // namespace lydim
