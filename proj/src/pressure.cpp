#include "lydim/pressure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "lydim/cocycle.hpp"
#include "lydim/errors.hpp"
#include "lydim/numeric.hpp"
#include "lydim/parallel.hpp"

namespace lydim {

namespace {

constexpr std::size_t kMaxCandidates = 12'000'000;

// Per-coordinate lower bound on expansion (<= 1 means "not expanding").
Eigen::VectorXd coordinate_expansion(const ModelSystem& system) {
  if (!system.affine()) return Eigen::VectorXd::Constant(system.dim(), system.min_expansion());
  Eigen::VectorXd lo = system.branch_log_scales(0);
  for (int j = 1; j < system.alphabet_size(); ++j) lo = lo.cwiseMin(system.branch_log_scales(j));
  return lo.array().exp().matrix();
}

double domain_diameter(const ModelSystem& system) { return system.periodic() ? 0.5 : 1.0; }

Word decode_code(std::uint64_t code, int k, int depth) {
  Word w(static_cast<std::size_t>(depth));
  for (int i = depth - 1; i >= 0; --i) {
    w[i] = static_cast<int>(code % static_cast<std::uint64_t>(k));
    code /= static_cast<std::uint64_t>(k);
  }
  return w;
}

std::uint64_t encode_code(const Word& w, int k) {
  std::uint64_t c = 0;
  for (int s : w) c = c * static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(s);
  return c;
}

Word first_admissible_word(const SymbolicCoding& coding, int depth) {
  Word w;
  for (int i = 0; i < depth; ++i) {
    int s = 0;
    if (i > 0)
      while (s < coding.alphabet_size() && coding.transitions(w.back(), s) == 0) ++s;
    w.push_back(s);
  }
  return w;
}

// Depth-D candidate words. On the torus each coordinate gets its own depth
// (enough for eps/4 resolution at its own rate); the remaining digits of the
// shallower coordinate follow the base point's itinerary.
struct CandidateSpace {
  CandidateSpace(const ModelSystem& system, int n, int depth) : system_(system), depth_(depth) {
    const int k = system.alphabet_size();
    product = system.kind() == SystemKind::diagonal_torus;
    if (!product) {
      count = std::pow(static_cast<double>(k), depth);
      return;
    }
    const Eigen::Vector2i d = system.torus_diagonal();
    const double slow = std::log(static_cast<double>(d.minCoeff()));
    for (int c = 0; c < 2; ++c) {
      radix_[c] = d(c);
      coord_depth_[c] = n - 1 + static_cast<int>(std::ceil((depth - n + 1) * slow / std::log(static_cast<double>(d(c))) - 1e-12));
    }
    depth_ = std::max(coord_depth_[0], coord_depth_[1]);
    count = std::pow(double(radix_[0]), coord_depth_[0]) * std::pow(double(radix_[1]), coord_depth_[1]);
    span_y_ = 1;
    for (int i = 0; i < coord_depth_[1]; ++i) span_y_ *= static_cast<std::uint64_t>(radix_[1]);
  }

  Word word(std::uint64_t code) const {
    if (!product) return decode_code(code, system_.alphabet_size(), depth_);
    std::array<std::uint64_t, 2> digits_src{code / span_y_, code % span_y_};
    std::array<std::vector<int>, 2> digits;
    for (int c = 0; c < 2; ++c) {
      digits[c].assign(static_cast<std::size_t>(depth_), 0);
      for (int i = depth_ - 1; i >= coord_depth_[c]; --i) digits[c][i] = (i - coord_depth_[c]) % 2 == 0 ? 0 : radix_[c] - 1;
      for (int i = coord_depth_[c] - 1; i >= 0; --i) {
        digits[c][i] = static_cast<int>(digits_src[c] % static_cast<std::uint64_t>(radix_[c]));
        digits_src[c] /= static_cast<std::uint64_t>(radix_[c]);
      }
    }
    Word w(static_cast<std::size_t>(depth_));
    for (int i = 0; i < depth_; ++i) w[i] = digits[0][i] * radix_[1] + digits[1][i];
    return w;
  }

  bool product = false;
  double count = 0.0;

private:
  const ModelSystem& system_;
  int depth_;
  std::array<int, 2> radix_{0, 0};
  std::array<int, 2> coord_depth_{0, 0};
  std::uint64_t span_y_ = 1;
};

// Uniform grid over the ambient box used to find separation conflicts.
class ConflictGrid {
public:
  ConflictGrid(const ModelSystem& system, Eigen::VectorXd cell) : periodic_(system.periodic()), dim_(system.dim()) {
    for (int c = 0; c < dim_; ++c) {
      if (periodic_) {
        ncell_[c] = std::max<long>(1, static_cast<long>(std::floor(1.0 / cell(c))));
        width_[c] = 1.0 / static_cast<double>(ncell_[c]);
      } else {
        ncell_[c] = 0;
        width_[c] = cell(c);
      }
    }
  }

  std::array<long, 2> cell_of(const Point& x) const {
    std::array<long, 2> idx{0, 0};
    for (int c = 0; c < dim_; ++c) {
      long i = static_cast<long>(std::floor(x(c) / width_[c]));
      if (periodic_) i = ((i % ncell_[c]) + ncell_[c]) % ncell_[c];
      idx[c] = i;
    }
    return idx;
  }

  void insert(const Point& x, std::uint32_t id) { cells_[key(cell_of(x))].push_back(id); }

  // Calls fn(id) for ids in the 3^m0 neighbourhood; fn returns false to stop.
  template <typename Fn>
  bool visit_neighbours(const Point& x, Fn&& fn) const {
    const auto base = cell_of(x);
    std::array<std::vector<long>, 2> offs;
    for (int c = 0; c < 2; ++c) {
      if (c >= dim_) {
        offs[c] = {0};
        continue;
      }
      for (long d = -1; d <= 1; ++d) {
        long i = base[c] + d;
        if (periodic_) i = ((i % ncell_[c]) + ncell_[c]) % ncell_[c];
        if (std::find(offs[c].begin(), offs[c].end(), i) == offs[c].end()) offs[c].push_back(i);
      }
    }
    for (long i0 : offs[0])
      for (long i1 : offs[1]) {
        const auto it = cells_.find(key({i0, i1}));
        if (it == cells_.end()) continue;
        for (std::uint32_t id : it->second)
          if (!fn(id)) return false;
      }
    return true;
  }

private:
  static std::uint64_t key(std::array<long, 2> idx) {
    return (static_cast<std::uint64_t>(idx[0] + (1L << 30)) << 32) ^ static_cast<std::uint64_t>(idx[1] + (1L << 30));
  }

  bool periodic_;
  int dim_;
  std::array<long, 2> ncell_{0, 0};
  std::array<double, 2> width_{1.0, 1.0};
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace

double potential_sum(const ModelSystem& system, const Potential& potential, const Word& word,
                     const std::vector<Point>& points, int n) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SingularValuedPotential>) {
          QrCocycle<double> acc(system.dim());
          for (int k = 0; k < n; ++k) acc.push(coded_jacobian(system, word[k], points[k]));
          return -singular_value_potential(acc.log_singular_values(), p.t);
        } else if constexpr (std::is_same_v<T, LocallyConstantPotential>) {
          if (p.weights.size() != system.alphabet_size()) throw ArgumentError("potential: one weight per symbol required");
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += p.weights(word[k]);
          return s;
        } else {
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += p.phi(points[k]);
          return s;
        }
      },
      potential);
}

Eigen::VectorXd locally_constant_weights(const ModelSystem& system, double t) {
  if (!system.affine()) throw ArgumentError("locally_constant_weights: system is not affine");
  if (!(t >= 0.0) || t > system.dim()) throw ArgumentError("locally_constant_weights: t outside [0, m0]");
  const int k = system.alphabet_size();
  if (system.dim() == 2) {
    bool all_ge = true, all_le = true;
    for (int j = 0; j < k; ++j) {
      const Eigen::VectorXd s = system.branch_log_scales(j);
      all_ge = all_ge && s(0) >= s(1);
      all_le = all_le && s(0) <= s(1);
    }
    if (!all_ge && !all_le)
      throw ArgumentError("locally_constant_weights: branch derivatives disagree on the dominant direction");
  }
  Eigen::VectorXd w(k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd s = system.branch_log_scales(j);
    std::sort(s.begin(), s.end(), std::greater<>());
    w(j) = -singular_value_potential(s, t);
  }
  return w;
}

int auto_candidate_depth(const ModelSystem& system, int n, double epsilon) {
  if (!(epsilon > 0.0)) throw ArgumentError("candidate depth: epsilon must be positive");
  const double kappa = system.min_expansion();
  const int extra = static_cast<int>(std::floor(std::log(4.0 / epsilon) / std::log(kappa))) + 1;
  return n - 1 + std::max(1, extra);
}

double orbit_distance(const ModelSystem& system, std::span<const Point> a, std::span<const Point> b, double stop_above) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
    d = std::max(d, distance(system, a[k], b[k]));
    if (d > stop_above) return d;
  }
  return d;
}

SeparatedSet separated_set(const ModelSystem& system, int n, double epsilon, int candidate_depth) {
  if (n < 1) throw ArgumentError("separated_set: n must be >= 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ArgumentError("separated_set: epsilon must be positive");
  if (candidate_depth < n) throw PrecisionError("separated_set: candidate depth must be at least n");
  const int k = system.alphabet_size();

  SeparatedSet out;
  out.n = n;
  out.epsilon = epsilon;
  out.candidate_depth = candidate_depth;

  if (epsilon >= domain_diameter(system)) {
    Word w = first_admissible_word(system.coding(), candidate_depth);
    out.points.push_back(anchor(system, w));
    out.words.push_back(std::move(w));
    out.candidates = 1;
    return out;
  }
  const double cyl_diam = std::pow(system.min_expansion(), -(candidate_depth - n + 1));
  if (!(cyl_diam < epsilon / 4.0))
    throw PrecisionError("separated_set: candidate depth " + std::to_string(candidate_depth) +
                         " leaves cylinders wider than eps/4 in the d_n metric");

  const CandidateSpace space(system, n, candidate_depth);
  if (space.count > static_cast<double>(kMaxCandidates))
    throw PrecisionError("separated_set: candidate set exceeds " + std::to_string(kMaxCandidates) + " points");

  // Candidates in coordinate order of their anchors.
  std::vector<std::uint64_t> codes;
  if (space.product) {
    codes.resize(static_cast<std::size_t>(space.count));
    std::iota(codes.begin(), codes.end(), std::uint64_t{0});
  } else {
    for_each_word(system.coding(), candidate_depth, [&](const Word& w) { codes.push_back(encode_code(w, k)); });
  }
  std::vector<std::array<double, 2>> anchors(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const Point a = anchor(system, space.word(codes[i]));
    anchors[i] = {a(0), a.size() > 1 ? a(1) : 0.0};
  }
  std::vector<std::uint32_t> order(codes.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (anchors[a] != anchors[b]) return anchors[a] < anchors[b];
    return codes[a] < codes[b];
  });
  anchors.clear();
  anchors.shrink_to_fit();
  out.candidates = codes.size();

  // Conflicting pairs (d_n <= eps) are within eps * kappa_c^{-(n-1)} at time 0
  // per coordinate when eps is below the local expansion radius.
  Eigen::VectorXd cell = Eigen::VectorXd::Constant(system.dim(), epsilon);
  if (epsilon <= system.local_radius()) {
    const Eigen::VectorXd kappa = coordinate_expansion(system);
    for (int c = 0; c < system.dim(); ++c)
      if (kappa(c) > 1.0) cell(c) = epsilon * std::pow(kappa(c), -(n - 1));
  }
  ConflictGrid grid(system, cell);
  std::vector<std::vector<Point>> accepted_orbits;

  for (std::uint32_t idx : order) {
    Word w = space.word(codes[idx]);
    std::vector<Point> orb = coded_orbit(system, w, n);
    bool separated = grid.visit_neighbours(orb[0], [&](std::uint32_t id) {
      return orbit_distance(system, orb, accepted_orbits[id], epsilon) > epsilon;
    });
    if (!separated) continue;
    const auto id = static_cast<std::uint32_t>(accepted_orbits.size());
    grid.insert(orb[0], id);
    out.points.push_back(orb[0]);
    out.words.push_back(std::move(w));
    accepted_orbits.push_back(std::move(orb));
  }
  return out;
}

std::string to_string(PressureMethod method) {
  switch (method) {
    case PressureMethod::separated_set: return "separated-set";
    case PressureMethod::sft_exact: return "sft-exact";
    case PressureMethod::measure_identity: return "measure-identity";
  }
  return "unknown";
}

std::vector<PressureEstimate> pressure_estimates(const ModelSystem& system, std::span<const Potential> potentials,
                                                 std::span<const double> epsilons, int n_lo, int n_hi,
                                                 unsigned threads) {
  if (epsilons.empty()) throw ArgumentError("pressure_estimate: empty epsilon list");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw ArgumentError("pressure_estimate: epsilons must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw ArgumentError("pressure_estimate: epsilons must be descending");
  }
  if (n_lo < 1 || n_hi - n_lo + 1 < 4) throw ArgumentError("pressure_estimate: n window needs at least 4 values");

  const std::size_t np = potentials.size();
  std::vector<PressureEstimate> out(np);
  for (auto& e : out) {
    e.method = PressureMethod::separated_set;
    e.diagnostics.epsilons.assign(epsilons.begin(), epsilons.end());
    e.diagnostics.n_lo = n_lo;
    e.diagnostics.n_hi = n_hi;
  }
  const bool any_svp = std::any_of(potentials.begin(), potentials.end(),
                                   [](const Potential& p) { return std::holds_alternative<SingularValuedPotential>(p); });

  for (std::size_t ei = 0; ei < epsilons.size(); ++ei) {
    const double eps = epsilons[ei];
    std::vector<std::vector<double>> logp(np);
    std::vector<std::size_t> sizes;
    for (int n = n_lo; n <= n_hi; ++n) {
      const SeparatedSet set = separated_set(system, n, eps, auto_candidate_depth(system, n, eps));
      sizes.push_back(set.points.size());
      // values[p][i] for point i
      std::vector<std::vector<double>> values(np, std::vector<double>(set.points.size()));
      parallel_for(set.points.size(), threads, [&](std::size_t i) {
        const auto pts = coded_orbit(system, set.words[i], n);
        Eigen::VectorXd log_sv;
        if (any_svp) {
          QrCocycle<double> acc(system.dim());
          for (int s = 0; s < n; ++s) acc.push(coded_jacobian(system, set.words[i][s], pts[s]));
          log_sv = acc.log_singular_values();
        }
        for (std::size_t p = 0; p < np; ++p) {
          if (const auto* svp_pot = std::get_if<SingularValuedPotential>(&potentials[p]))
            values[p][i] = -singular_value_potential(log_sv, svp_pot->t);
          else
            values[p][i] = potential_sum(system, potentials[p], set.words[i], pts, n);
        }
      });
      for (std::size_t p = 0; p < np; ++p) logp[p].push_back(log_sum_exp<double>(values[p]));
    }
    std::vector<double> ns;
    for (int n = n_lo; n <= n_hi; ++n) ns.push_back(n);
    for (std::size_t p = 0; p < np; ++p) {
      auto& d = out[p].diagnostics;
      const auto fit = fit_line<double>(ns, logp[p]);
      d.log_partition.push_back(logp[p]);
      d.slopes.push_back(fit.slope);
      d.residuals.push_back(fit.residual);
      d.rate_at_n_lo.push_back(logp[p].front() / n_lo);
      d.rate_at_n_hi.push_back(logp[p].back() / n_hi);
      if (ei + 1 == epsilons.size()) d.set_sizes = sizes;
    }
  }
  constexpr double kMonotoneTolerance = 0.02;
  for (auto& e : out) {
    auto& d = e.diagnostics;
    e.value = d.slopes.back();
    for (std::size_t i = 1; i < d.slopes.size(); ++i)
      if (d.slopes[i] < d.slopes[i - 1] - kMonotoneTolerance) d.non_monotone_epsilon = true;
    if (!std::isfinite(e.value)) throw NumericalError("pressure_estimate: non-finite slope");
  }
  return out;
}

PressureEstimate pressure_estimate(const ModelSystem& system, const Potential& potential, std::span<const double> epsilons,
                                   int n_lo, int n_hi, unsigned threads) {
  const std::vector<Potential> one{potential};
  return pressure_estimates(system, one, epsilons, n_lo, n_hi, threads).front();
}

PressureEstimate sft_pressure(const SymbolicCoding& coding, std::span<const double> log_weights) {
  const int k = coding.alphabet_size();
  if (static_cast<int>(log_weights.size()) != k) throw ArgumentError("sft_pressure: one weight per symbol required");
  for (double w : log_weights)
    if (!std::isfinite(w)) throw ArgumentError("sft_pressure: weights must be finite");
  if (!is_primitive(coding.transitions)) throw StructureError("sft_pressure: transition matrix is not primitive");
  Eigen::MatrixXd m(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = coding.transitions(i, j) * std::exp(log_weights[j]);
  PressureEstimate e;
  e.method = PressureMethod::sft_exact;
  e.value = std::log(perron_root(m));
  return e;
}

PotentialAverage potential_average(const ModelSystem& system, const ErgodicMeasureSpec& measure,
                                   const Potential& potential, int n_limit, int samples, std::uint64_t seed,
                                   unsigned threads) {
  check_compatible(system, measure);
  PotentialAverage out;
  if (const auto* lc = std::get_if<LocallyConstantPotential>(&potential)) {
    if (lc->weights.size() != system.alphabet_size()) throw ArgumentError("potential: one weight per symbol required");
    out.value = measure.stationary().dot(lc->weights);
    out.exact = true;
  } else if (const auto* sv = std::get_if<SingularValuedPotential>(&potential); sv && system.affine()) {
    out.value = -singular_value_potential(*exact_lyapunov_exponents(system, measure), sv->t);
    out.exact = true;
  } else {
    if (n_limit < 1 || samples < 1) throw ArgumentError("potential_average: need n_limit >= 1 and samples >= 1");
    const int extra = coding_lookahead(system);
    std::vector<double> vals(static_cast<std::size_t>(samples));
    parallel_for(vals.size(), threads, [&](std::size_t i) {
      auto rng = substream(seed, i);
      const Word w = measure.sample(rng, n_limit + extra);
      const auto pts = coded_orbit(system, w, n_limit);
      vals[i] = potential_sum(system, potential, w, pts, n_limit) / n_limit;
    });
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / samples;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    out.value = mean;
    out.standard_error = samples > 1 ? std::sqrt(ss / (samples - 1) / samples) : 0.0;
  }
  if (!std::isfinite(out.value)) throw NumericalError("potential_average: divergent estimate");
  return out;
}

double measure_pressure(const ModelSystem& system, const ErgodicMeasureSpec& measure, const Potential& potential,
                        int n_limit, int samples, std::uint64_t seed, unsigned threads) {
  return measure_entropy(measure) + potential_average(system, measure, potential, n_limit, samples, seed, threads).value;
}

std::function<double(double)> measure_pressure_function(const ModelSystem& system, const ErgodicMeasureSpec& measure,
                                                        int n_limit, int samples, std::uint64_t seed,
                                                        unsigned threads) {
  check_compatible(system, measure);
  Eigen::VectorXd exps;
  if (auto exact = exact_lyapunov_exponents(system, measure)) exps = *exact;
  else exps = lyapunov_exponents(system, measure, n_limit, samples, seed, threads).exponents;
  const double h = measure_entropy(measure);
  return [h, exps](double t) { return h - singular_value_potential(exps, t); };
}

}  // namespace lydim
