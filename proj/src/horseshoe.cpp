#include "lydim/horseshoe.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "lydim/cocycle.hpp"
#include "lydim/numeric.hpp"
#include "lydim/parallel.hpp"

namespace lydim {

namespace {

constexpr double kFrequencySlack = 1e-12;
constexpr double kMaxRealizedPoints = 2e7;

void for_each_composition(int n, int k, const std::function<void(const Eigen::VectorXi&)>& fn) {
  Eigen::VectorXi c = Eigen::VectorXi::Zero(k);
  std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == k - 1) {
      c(idx) = left;
      fn(c);
      return;
    }
    for (int v = left; v >= 0; --v) {
      c(idx) = v;
      rec(idx + 1, left - v);
    }
  };
  rec(0, n);
}

double log_multinomial(const Eigen::VectorXi& c) {
  double s = std::lgamma(c.sum() + 1.0);
  for (Eigen::Index i = 0; i < c.size(); ++i) s -= std::lgamma(c(i) + 1.0);
  return s;
}

// Exact multinomial coefficient when it fits in a double without rounding.
std::optional<double> exact_multinomial(const Eigen::VectorXi& c) {
  unsigned __int128 acc = 1;
  int total = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    for (int j = 1; j <= c(i); ++j) {
      ++total;
      acc = acc * static_cast<unsigned __int128>(total) / static_cast<unsigned __int128>(j);
      if (acc > (static_cast<unsigned __int128>(1) << 53)) return std::nullopt;
    }
  }
  return static_cast<double>(acc);
}

double entropy_of(const Eigen::VectorXd& f) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    if (f(i) > 0.0) h -= f(i) * std::log(f(i));
  return h;
}

void finish_counts(SymbolicHorseshoe& hs) {
  std::vector<double> logs;
  double exact = 0.0;
  bool all_exact = true;
  for (const auto& c : hs.classes) {
    logs.push_back(c.log_count);
    if (auto e = exact_multinomial(c.counts); e && all_exact) exact += *e;
    else all_exact = false;
  }
  if (hs.markov) {
    hs.block_count = static_cast<double>(hs.blocks.size());
    hs.log_block_count = std::log(hs.block_count);
  } else if (all_exact && exact < 9e15) {
    hs.block_count = exact;
    hs.log_block_count = std::log(exact);
  } else {
    hs.log_block_count = log_sum_exp<double>(logs);
    hs.block_count = std::exp(hs.log_block_count);
  }
}

SymbolicHorseshoe extract_bernoulli(const SymbolicCoding& base, const ErgodicMeasureSpec& measure, int n, double eps,
                                    unsigned threads) {
  const int k = base.alphabet_size();
  if (!base.full_shift()) throw ArgumentError("extract_horseshoe: a Bernoulli base must be a full shift");
  const Eigen::VectorXd& p = measure.probabilities();
  SymbolicHorseshoe hs;
  hs.n = n;
  hs.alphabet_size = k;
  for_each_composition(n, k, [&](const Eigen::VectorXi& c) {
    const double dev = (c.cast<double>() / n - p).cwiseAbs().maxCoeff();
    if (dev <= eps + kFrequencySlack) hs.classes.push_back({c, log_multinomial(c)});
  });
  if (hs.classes.empty())
    throw InfeasibleError("extract_horseshoe: no " + std::to_string(n) + "-block has symbol frequencies within " +
                          std::to_string(eps) + " of the measure; increase n or eps");
  finish_counts(hs);
  if (std::pow(static_cast<double>(k), n) <= kEnumerationLimit) {
    std::vector<std::vector<Word>> per_class(hs.classes.size());
    parallel_for(hs.classes.size(), threads, [&](std::size_t i) {
      Word w;
      for (int s = 0; s < k; ++s) w.insert(w.end(), static_cast<std::size_t>(hs.classes[i].counts(s)), s);
      do per_class[i].push_back(w);
      while (std::next_permutation(w.begin(), w.end()));
    });
    for (auto& v : per_class) hs.blocks.insert(hs.blocks.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    std::sort(hs.blocks.begin(), hs.blocks.end());
  }
  return hs;
}

SymbolicHorseshoe extract_markov(const SymbolicCoding& base, const ErgodicMeasureSpec& measure, int n, double eps,
                                 int pivot) {
  const int k = base.alphabet_size();
  if (pivot < 0 || pivot >= k) throw ArgumentError("extract_horseshoe: pivot symbol out of range");
  if (std::pow(static_cast<double>(k), n - 1) > kEnumerationLimit)
    throw PrecisionError("extract_horseshoe: Markov blocks of length " + std::to_string(n) + " exceed the enumeration limit");
  const Eigen::MatrixXd target = measure.stationary().asDiagonal() * measure.transition();
  const auto& a = base.transitions;
  SymbolicHorseshoe hs;
  hs.n = n;
  hs.alphabet_size = k;
  hs.markov = true;
  hs.pivot = pivot;
  Word w(static_cast<std::size_t>(n), pivot);
  std::function<void(int)> rec = [&](int pos) {
    if (pos == n) {
      if (a(w.back(), pivot) == 0) return;
      Eigen::MatrixXd f = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < n; ++i) f(w[i], w[(i + 1) % n]) += 1.0 / n;
      if ((f - target).cwiseAbs().maxCoeff() <= eps + kFrequencySlack) hs.blocks.push_back(w);
      return;
    }
    for (int s = 0; s < k; ++s) {
      if (a(w[pos - 1], s) == 0) continue;
      w[pos] = s;
      rec(pos + 1);
    }
  };
  rec(1);
  if (hs.blocks.empty())
    throw InfeasibleError("extract_horseshoe: no pivot-anchored " + std::to_string(n) +
                          "-block has transition frequencies within " + std::to_string(eps) +
                          " of the measure; increase n or eps");
  std::sort(hs.blocks.begin(), hs.blocks.end());
  for (const auto& b : hs.blocks) {
    Eigen::VectorXi c = Eigen::VectorXi::Zero(k);
    for (int s : b) ++c(s);
    auto it = std::find_if(hs.classes.begin(), hs.classes.end(), [&](const FrequencyClass& fc) { return fc.counts == c; });
    if (it == hs.classes.end()) hs.classes.push_back({c, 0.0});
    else it->log_count = std::log(std::exp(it->log_count) + 1.0);
  }
  finish_counts(hs);
  return hs;
}

Word concatenation(const SymbolicHorseshoe& hs, std::size_t code, int q) {
  Word w;
  std::vector<std::size_t> idx(static_cast<std::size_t>(q));
  for (int i = q - 1; i >= 0; --i) {
    idx[i] = code % hs.blocks.size();
    code /= hs.blocks.size();
  }
  for (std::size_t i : idx) w.insert(w.end(), hs.blocks[i].begin(), hs.blocks[i].end());
  return w;
}

std::size_t concatenation_count(const SymbolicHorseshoe& hs, int q) {
  if (!hs.enumerated()) throw ArgumentError("horseshoe realization needs enumerated blocks");
  if (q < 1) throw ArgumentError("horseshoe realization: q must be >= 1");
  const double count = std::pow(static_cast<double>(hs.blocks.size()), q);
  if (count > kMaxRealizedPoints) throw PrecisionError("horseshoe realization: too many points");
  return static_cast<std::size_t>(count);
}

double stable_coordinate(const ModelSystem& geometry, const Word& w) {
  double y = geometry.base_point()(1);
  for (auto it = w.rbegin(); it != w.rend(); ++it) y = geometry.alpha() * y + geometry.stable_offset(*it);
  return y;
}

void check_geometry(const SymbolicHorseshoe& hs, const ModelSystem& geometry) {
  if (geometry.alphabet_size() != hs.alphabet_size)
    throw ArgumentError("horseshoe geometry has " + std::to_string(geometry.alphabet_size()) +
                        " branches but the horseshoe alphabet has " + std::to_string(hs.alphabet_size));
  if (!geometry.affine()) throw ArgumentError("horseshoe geometry must be affine");
  for (const auto& b : hs.blocks)
    if (!geometry.coding().admissible(b)) throw ArgumentError("horseshoe block is not admissible in the geometry");
}

// Box slope of a realized slice at scales kappa^{-j}, j = 1..levels.
std::optional<BoxDimension> slice_box(const std::vector<Point>& pts, double kappa, int levels, unsigned threads) {
  if (pts.size() < 1000 || levels < 3) return std::nullopt;
  std::vector<double> deltas;
  for (int j = 1; j <= levels; ++j) deltas.push_back(std::pow(kappa, -j));
  if (deltas.front() / deltas.back() < 100.0) return std::nullopt;
  return box_dimension(pts, deltas, 0, threads);
}

}  // namespace

Eigen::MatrixXi SymbolicHorseshoe::block_transitions() const {
  const auto b = static_cast<Eigen::Index>(std::llround(block_count));
  return Eigen::MatrixXi::Ones(b, b);
}

SymbolicHorseshoe extract_horseshoe(const SymbolicCoding& base, const ErgodicMeasureSpec& measure, int n, double eps,
                                    int pivot, unsigned threads) {
  if (n < 1) throw ArgumentError("extract_horseshoe: n must be >= 1");
  if (!(eps >= 0.0 && eps <= 1.0)) throw ArgumentError("extract_horseshoe: eps must lie in [0, 1]");
  if (measure.alphabet_size() != base.alphabet_size())
    throw ArgumentError("extract_horseshoe: measure and coding alphabets differ");
  if (measure.is_bernoulli()) return extract_bernoulli(base, measure, n, eps, threads);
  return extract_markov(base, measure, n, eps, pivot);
}

double horseshoe_entropy(const SymbolicHorseshoe& hs) {
  if (hs.n < 1 || !(hs.block_count >= 1.0)) throw ArgumentError("horseshoe_entropy: empty horseshoe");
  return hs.log_block_count / hs.n;
}

double entropy_correction(const SymbolicHorseshoe& hs, const ErgodicMeasureSpec& measure) {
  const int k = hs.alphabet_size;
  const double h_mu = measure_entropy(measure);
  double h_max = 0.0;
  double types = 0.0;
  if (!hs.markov) {
    for (const auto& c : hs.classes) h_max = std::max(h_max, entropy_of(c.counts.cast<double>() / hs.n));
    types = (k - 1) * std::log(hs.n + 1.0);
  } else {
    for (const auto& b : hs.blocks) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < hs.n; ++i) t(b[i], b[(i + 1) % hs.n]) += 1.0;
      double h = 0.0;
      for (int i = 0; i < k; ++i) {
        const double row = t.row(i).sum();
        if (row > 0.0) h += row / hs.n * entropy_of(t.row(i).transpose() / row);
      }
      h_max = std::max(h_max, h);
    }
    types = k * k * std::log(hs.n + 1.0);
  }
  return std::max(0.0, h_max - h_mu) + types / hs.n;
}

double support_coverage(const SymbolicHorseshoe& hs, const SymbolicCoding& base, int depth) {
  if (depth < 1 || depth > hs.n) throw ArgumentError("support_coverage: depth must lie in [1, n]");
  if (std::pow(static_cast<double>(base.alphabet_size()), depth) > kEnumerationLimit)
    throw PrecisionError("support_coverage: depth too large");
  double total = 0.0, hit = 0.0;
  std::vector<Word> prefixes;
  if (hs.enumerated()) {
    for (const auto& b : hs.blocks) prefixes.emplace_back(b.begin(), b.begin() + depth);
    std::sort(prefixes.begin(), prefixes.end());
    prefixes.erase(std::unique(prefixes.begin(), prefixes.end()), prefixes.end());
  }
  for_each_word(base, depth, [&](const Word& u) {
    total += 1.0;
    if (hs.enumerated()) {
      if (std::binary_search(prefixes.begin(), prefixes.end(), u)) hit += 1.0;
      return;
    }
    Eigen::VectorXi c = Eigen::VectorXi::Zero(hs.alphabet_size);
    for (int s : u) ++c(s);
    for (const auto& fc : hs.classes)
      if ((fc.counts.array() >= c.array()).all()) {
        hit += 1.0;
        return;
      }
  });
  return hit / total;
}

std::vector<Point> unstable_slice_points(const SymbolicHorseshoe& hs, const ModelSystem& geometry, int q) {
  check_geometry(hs, geometry);
  const std::size_t count = concatenation_count(hs, q);
  std::vector<Point> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Point a = anchor(geometry, concatenation(hs, i, q));
    out[i] = geometry.invertible() ? Point::Constant(1, a(0)) : a;
  }
  return out;
}

std::vector<Point> stable_slice_points(const SymbolicHorseshoe& hs, const ModelSystem& geometry, int q) {
  check_geometry(hs, geometry);
  if (!geometry.invertible()) throw ArgumentError("stable_slice_points: geometry has no stable direction");
  const std::size_t count = concatenation_count(hs, q);
  std::vector<Point> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = Point::Constant(1, stable_coordinate(geometry, concatenation(hs, i, q)));
  return out;
}

std::vector<Point> horseshoe_unstable_slice(const ModelSystem& horseshoe, int depth) {
  if (!horseshoe.invertible()) throw ArgumentError("horseshoe_unstable_slice: not a horseshoe");
  std::vector<Point> out;
  for_each_word(horseshoe.coding(), depth, [&](const Word& w) { out.push_back(Point::Constant(1, anchor(horseshoe, w)(0))); });
  return out;
}

std::vector<Point> horseshoe_stable_slice(const ModelSystem& horseshoe, int depth) {
  if (!horseshoe.invertible()) throw ArgumentError("horseshoe_stable_slice: not a horseshoe");
  std::vector<Point> out;
  for_each_word(horseshoe.coding(), depth, [&](const Word& w) { out.push_back(Point::Constant(1, stable_coordinate(horseshoe, w))); });
  return out;
}

DimensionReport horseshoe_dimension(const SymbolicHorseshoe& hs, const ModelSystem& geometry, bool geometric_check,
                                    unsigned threads) {
  check_geometry(hs, geometry);
  const double h = horseshoe_entropy(hs);
  DimensionReport rep;
  rep.diagnostics["entropy"] = h;
  rep.diagnostics["blocks"] = hs.block_count;
  if (geometry.invertible()) {
    const double lu = std::log(geometry.beta());
    const double ls = std::log(geometry.alpha());
    if (!(lu > 0.0) || !(ls < 0.0)) throw ArgumentError("horseshoe_dimension: geometry is not hyperbolic");
    rep.kind = DimensionKind::ledrappier_young;
    rep.diagnostics["unstable"] = h / lu;
    rep.diagnostics["stable"] = -h / ls;
    rep.value = ledrappier_young(h, lu, ls);
  } else {
    // Moran equation sum over blocks of exp(-phi^t) = 1.
    std::vector<double> log_counts;
    std::vector<Eigen::VectorXd> scales;
    for (const auto& c : hs.classes) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(geometry.dim());
      for (int j = 0; j < hs.alphabet_size; ++j) s += c.counts(j) * geometry.branch_log_scales(j);
      std::sort(s.begin(), s.end(), std::greater<>());
      log_counts.push_back(c.log_count);
      scales.push_back(s);
    }
    std::vector<double> buf(log_counts.size());
    auto moran = [&](double t) {
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = log_counts[i] - singular_value_potential(scales[i], t);
      return log_sum_exp<double>(buf);
    };
    rep.kind = DimensionKind::bowen_root;
    rep.value = moran(geometry.dim()) >= 0.0 ? geometry.dim() : bowen_root(moran, geometry.dim(), 1e-13).value;
    rep.diagnostics["unstable"] = rep.value;
  }
  if (geometric_check) {
    bool done = false;
    if (hs.enumerated() && hs.blocks.size() > 1) {
      const double b = static_cast<double>(hs.blocks.size());
      const int q = std::max(1, static_cast<int>(std::floor(std::log(3e5) / std::log(b))));
      const auto xs = unstable_slice_points(hs, geometry, q);
      if (auto bd = slice_box(xs, geometry.min_expansion(), hs.n * q, threads)) {
        rep.diagnostics["box_unstable"] = bd->slope;
        rep.diagnostics["box_unstable_residual"] = bd->residual;
        done = true;
        if (geometry.invertible()) {
          const auto ys = stable_slice_points(hs, geometry, q);
          if (auto bs = slice_box(ys, 1.0 / geometry.alpha(), hs.n * q, threads)) {
            rep.diagnostics["box_stable"] = bs->slope;
            rep.diagnostics["box_stable_residual"] = bs->residual;
            rep.diagnostics["box_total"] = bd->slope + bs->slope;
          }
        }
      }
    }
    rep.diagnostics["geometric_check"] = done ? 1.0 : 0.0;
  }
  return rep;
}

double realized_exponent_deviation(const SymbolicHorseshoe& hs, const ModelSystem& geometry, int q, int samples,
                                   std::uint64_t seed) {
  check_geometry(hs, geometry);
  if (!hs.enumerated()) throw ArgumentError("realized_exponent_deviation: needs enumerated blocks");
  if (q < 1 || samples < 1) throw ArgumentError("realized_exponent_deviation: q and samples must be >= 1");
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    auto rng = substream(seed, static_cast<std::uint64_t>(s));
    std::uniform_int_distribution<std::size_t> pick(0, hs.blocks.size() - 1);
    Word w;
    for (int i = 0; i < q; ++i) {
      const auto& b = hs.blocks[pick(rng)];
      w.insert(w.end(), b.begin(), b.end());
    }
    const int len = static_cast<int>(w.size());
    const auto pts = coded_orbit(geometry, w, len);
    QrCocycle<double> acc(geometry.dim());
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(geometry.dim());
    for (int i = 0; i < len; ++i) {
      acc.push(jacobian(geometry, pts[i]));
      expected += geometry.branch_log_scales(w[i]);
    }
    std::sort(expected.begin(), expected.end(), std::greater<>());
    worst = std::max(worst, ((acc.log_singular_values() - expected) / len).cwiseAbs().maxCoeff());
  }
  return worst;
}

DimensionReport measure_dimension(const ModelSystem& geometry, const ErgodicMeasureSpec& measure) {
  check_compatible(geometry, measure);
  const double h = measure_entropy(measure);
  Eigen::VectorXd lam;
  if (auto exact = exact_lyapunov_exponents(geometry, measure)) lam = *exact;
  else lam = lyapunov_exponents(geometry, measure, 200, 400, 0).exponents;
  DimensionReport rep;
  rep.diagnostics["entropy"] = h;
  if (geometry.invertible()) {
    rep.kind = DimensionKind::ledrappier_young;
    rep.value = ledrappier_young(h, lam(0), lam(1));
  } else {
    rep.kind = DimensionKind::lyapunov;
    rep.value = lyapunov_dimension(h, lam);
  }
  return rep;
}

ConvergenceReport convergence_report(const SymbolicCoding& base, const ErgodicMeasureSpec& measure,
                                     const ModelSystem& geometry, const std::vector<int>& n_list, double eps, int pivot,
                                     unsigned threads) {
  if (n_list.empty()) throw ArgumentError("convergence_report: empty n list");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw ArgumentError("convergence_report: n list must be strictly increasing");
  ConvergenceReport rep;
  const auto target = measure_dimension(geometry, measure);
  rep.target_dimension = target.value;
  rep.target_kind = target.kind;
  rep.target_entropy = measure_entropy(measure);
  for (int n : n_list) {
    ConvergenceRow row;
    row.n = n;
    row.eps = eps;
    row.target = rep.target_dimension;
    row.target_entropy = rep.target_entropy;
    try {
      const auto hs = extract_horseshoe(base, measure, n, eps, pivot, threads);
      row.blocks = hs.block_count;
      row.entropy = horseshoe_entropy(hs);
      row.dimension = horseshoe_dimension(hs, geometry, false, threads).value;
      row.correction = entropy_correction(hs, measure);
    } catch (const InfeasibleError& e) {
      row.feasible = false;
      row.message = e.what();
    } catch (const PrecisionError& e) {
      row.feasible = false;
      row.message = e.what();
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace lydim
