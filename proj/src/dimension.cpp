#include "lydim/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "lydim/cocycle.hpp"
#include "lydim/numeric.hpp"
#include "lydim/parallel.hpp"

namespace lydim {

std::string to_string(DimensionKind kind) {
  switch (kind) {
    case DimensionKind::lyapunov: return "lyapunov";
    case DimensionKind::caratheodory: return "caratheodory";
    case DimensionKind::box_lower: return "box-lower";
    case DimensionKind::box_upper: return "box-upper";
    case DimensionKind::local: return "local";
    case DimensionKind::ledrappier_young: return "ledrappier-young";
    case DimensionKind::bowen_root: return "bowen-root";
  }
  return "unknown";
}

double ledrappier_young(double h, double lambda_u, double lambda_s) {
  if (!(h >= 0.0) || !std::isfinite(h)) throw ArgumentError("ledrappier_young: entropy must be finite and >= 0");
  if (!(lambda_u > 0.0) || !std::isfinite(lambda_u)) throw ArgumentError("ledrappier_young: unstable exponent must be positive");
  if (!(lambda_s < 0.0) || !std::isfinite(lambda_s)) throw ArgumentError("ledrappier_young: stable exponent must be negative");
  return h / lambda_u - h / lambda_s;
}

DimensionReport bowen_root(const std::function<double(double)>& pressure, double m0, double tol) {
  if (!(m0 > 0.0)) throw ArgumentError("bowen_root: m0 must be positive");
  if (!(tol > 0.0)) throw ArgumentError("bowen_root: tolerance must be positive");
  DimensionReport rep;
  rep.kind = DimensionKind::bowen_root;
  const double p_lo = pressure(0.0);
  const double p_hi = pressure(m0);
  if (!std::isfinite(p_lo) || !std::isfinite(p_hi)) throw NumericalError("bowen_root: pressure is not finite at an endpoint");
  auto finish = [&](double t, double lo, double hi) {
    rep.value = t;
    rep.diagnostics["bracket_lo"] = lo;
    rep.diagnostics["bracket_hi"] = hi;
    rep.diagnostics["pressure_at_root"] = pressure(t);
    return rep;
  };
  if (std::abs(p_hi) <= tol) return finish(m0, m0, m0);
  if (std::abs(p_lo) <= tol) return finish(0.0, 0.0, 0.0);
  if ((p_lo > 0.0) == (p_hi > 0.0))
    throw BracketError("bowen_root: P(0) = " + std::to_string(p_lo) + " and P(m0) = " + std::to_string(p_hi) +
                       " have the same sign");
  double lo = 0.0, hi = m0;
  const bool decreasing = p_lo > 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-3 * tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double pm = pressure(mid);
    if (pm == 0.0) return finish(mid, mid, mid);
    if ((pm > 0.0) == decreasing) lo = mid;
    else hi = mid;
  }
  return finish(0.5 * (lo + hi), lo, hi);
}

// ---------------------------------------------------------------------------
// Cylinder classes

namespace {

Eigen::VectorXd sorted_desc(Eigen::VectorXd v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

// Symbols (or blocks) that share a derivative and a mass.
struct Group {
  int size = 0;
  double log_p = 0.0;
  Eigen::VectorXd scales;
};

std::vector<Group> group_items(const std::vector<Eigen::VectorXd>& scales, const std::vector<double>& log_p) {
  std::vector<Group> groups;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.log_p == log_p[i] && g.scales == scales[i];
    });
    if (it == groups.end()) groups.push_back({1, log_p[i], scales[i]});
    else ++it->size;
  }
  return groups;
}

double log_binomial_count(int n, const std::vector<int>& parts) {
  double c = std::lgamma(n + 1.0);
  for (int p : parts) c -= std::lgamma(p + 1.0);
  return c;
}

double count_compositions(int n, int groups) {
  // C(n + g - 1, g - 1) in floating point
  return std::exp(std::lgamma(n + groups) - std::lgamma(groups) - std::lgamma(n + 1.0));
}

// Appends one class per composition of n over the groups, offset by a prefix.
void append_compositions(const std::vector<Group>& groups, int n, const Eigen::VectorXd& prefix_scales,
                         double prefix_log_mass, std::size_t budget, std::vector<CylinderClass>& out) {
  const int g = static_cast<int>(groups.size());
  if (count_compositions(n, g) + static_cast<double>(out.size()) > static_cast<double>(budget))
    throw PrecisionError("cover_classes: composition classes exceed the budget");
  std::vector<int> parts(static_cast<std::size_t>(g), 0);
  std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == g - 1) {
      parts[idx] = left;
      CylinderClass c;
      c.log_count = log_binomial_count(n, parts);
      c.log_mass = prefix_log_mass;
      Eigen::VectorXd s = prefix_scales;
      for (int i = 0; i < g; ++i) {
        c.log_count += parts[i] * std::log(static_cast<double>(groups[i].size));
        c.log_mass += parts[i] == 0 ? 0.0 : parts[i] * groups[i].log_p;
        s += parts[i] * groups[i].scales;
      }
      c.log_scales = sorted_desc(s);
      out.push_back(std::move(c));
      return;
    }
    for (int c = left; c >= 0; --c) {
      parts[idx] = c;
      rec(idx + 1, left - c);
    }
  };
  rec(0, n);
}

double admissible_word_count(const SymbolicCoding& coding, int depth) {
  const Eigen::MatrixXd a = coding.transitions.cast<double>();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.rows());
  for (int i = 1; i < depth; ++i) v = a * v;
  return v.sum();
}

Eigen::VectorXd word_log_scales(const ModelSystem& system, const Word& word) {
  if (system.affine()) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(system.dim());
    for (int j : word) s += system.branch_log_scales(j);
    return sorted_desc(s);
  }
  return coded_singular_values(system, word, static_cast<int>(word.size())).log_singular_values;
}

void check_block_set(const ModelSystem& system, const std::vector<Word>& blocks) {
  if (blocks.empty()) throw ArgumentError("block concatenation: no blocks");
  const std::size_t len = blocks.front().size();
  if (len == 0) throw ArgumentError("block concatenation: empty block");
  const auto& a = system.coding().transitions;
  for (const auto& b : blocks) {
    if (b.size() != len) throw ArgumentError("block concatenation: blocks must have equal length");
    if (!system.coding().admissible(b)) throw ArgumentError("block concatenation: block is not admissible");
  }
  for (const auto& b : blocks)
    for (const auto& c : blocks)
      if (a(b.back(), c.front()) == 0) throw ArgumentError("block concatenation: blocks do not concatenate freely");
}

std::vector<Word> dedupe_prefixes(const ModelSystem& system, std::vector<Word> prefixes) {
  if (prefixes.empty()) throw ArgumentError("cylinder union: no prefixes");
  for (const auto& p : prefixes)
    if (!system.coding().admissible(p)) throw ArgumentError("cylinder union: prefix is not admissible");
  std::sort(prefixes.begin(), prefixes.end(),
            [](const Word& a, const Word& b) { return a.size() != b.size() ? a.size() < b.size() : a < b; });
  prefixes.erase(std::unique(prefixes.begin(), prefixes.end()), prefixes.end());
  std::vector<Word> kept;
  for (const auto& p : prefixes) {
    const bool covered = std::any_of(kept.begin(), kept.end(), [&](const Word& q) {
      return q.size() <= p.size() && std::equal(q.begin(), q.end(), p.begin());
    });
    if (!covered) kept.push_back(p);
  }
  return kept;
}

bool has_prefix(const Word& w, const std::vector<Word>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const Word& p) {
    return p.size() <= w.size() && std::equal(p.begin(), p.end(), w.begin());
  });
}

Word periodic_word(const Word& period, int depth, std::size_t shift) {
  Word w(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) w[i] = period[(shift + static_cast<std::size_t>(i)) % period.size()];
  return w;
}

void check_period(const ModelSystem& system, const Word& period) {
  if (period.empty()) throw ArgumentError("periodic orbit: empty period");
  Word twice = period;
  twice.insert(twice.end(), period.begin(), period.end());
  if (!system.coding().admissible(twice)) throw ArgumentError("periodic orbit: period is not cyclically admissible");
}

// Keeps the fewest, highest-mass cylinders reaching mass 1 - delta.
std::vector<CylinderClass> select_typical(std::vector<CylinderClass> classes, double delta) {
  std::sort(classes.begin(), classes.end(), [](const CylinderClass& a, const CylinderClass& b) {
    if (a.log_mass != b.log_mass) return a.log_mass > b.log_mass;
    return a.log_scales.sum() > b.log_scales.sum();
  });
  const double target = 1.0 - delta;
  double cum = 0.0;
  std::vector<CylinderClass> out;
  for (auto& c : classes) {
    if (!std::isfinite(c.log_mass)) break;
    const double total = std::exp(c.log_count + c.log_mass);
    if (cum + total >= target) {
      double log_need = std::log(std::max(target - cum, 0.0)) - c.log_mass;
      if (log_need < 40.0) log_need = std::log(std::max(1.0, std::ceil(std::exp(log_need) - 1e-9)));
      c.log_count = std::min(c.log_count, std::max(0.0, log_need));
      out.push_back(std::move(c));
      return out;
    }
    cum += total;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

std::vector<CylinderClass> cover_classes(const ModelSystem& system, const SetSpec& set, int depth,
                                         const CaratheodoryOptions& options) {
  if (depth < 1) throw ArgumentError("cover_classes: depth must be >= 1");
  const int k = system.alphabet_size();
  const bool full = system.coding().full_shift();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(system.dim());
  std::vector<CylinderClass> out;

  auto explicit_words = [&](auto&& accept, auto&& log_mass) {
    if (admissible_word_count(system.coding(), depth) > static_cast<double>(options.word_budget))
      throw PrecisionError("cover_classes: explicit enumeration exceeds the word budget");
    for_each_word(system.coding(), depth, [&](const Word& w) {
      if (!accept(w)) return;
      out.push_back({0.0, log_mass(w), word_log_scales(system, w)});
    });
  };

  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, WholeRepeller>) {
          if (system.affine() && full) {
            std::vector<Eigen::VectorXd> sc;
            for (int j = 0; j < k; ++j) sc.push_back(system.branch_log_scales(j));
            append_compositions(group_items(sc, std::vector<double>(k, 0.0)), depth, zero, 0.0, options.class_budget, out);
          } else {
            explicit_words([](const Word&) { return true; }, [](const Word&) { return 0.0; });
          }
        } else if constexpr (std::is_same_v<T, CylinderUnion>) {
          const auto prefixes = dedupe_prefixes(system, spec.prefixes);
          if (prefixes.back().size() > static_cast<std::size_t>(depth))
            throw ArgumentError("cover_classes: depth shorter than a prefix");
          if (system.affine() && full) {
            std::vector<Eigen::VectorXd> sc;
            for (int j = 0; j < k; ++j) sc.push_back(system.branch_log_scales(j));
            const auto groups = group_items(sc, std::vector<double>(k, 0.0));
            for (const auto& p : prefixes) {
              Eigen::VectorXd ps = zero;
              for (int j : p) ps += system.branch_log_scales(j);
              append_compositions(groups, depth - static_cast<int>(p.size()), ps, 0.0, options.class_budget, out);
            }
          } else {
            explicit_words([&](const Word& w) { return has_prefix(w, prefixes); }, [](const Word&) { return 0.0; });
          }
        } else if constexpr (std::is_same_v<T, MeasureTypical>) {
          check_compatible(system, spec.measure);
          if (!(spec.delta > 0.0 && spec.delta < 1.0)) throw ArgumentError("measure-typical: delta must lie in (0, 1)");
          if (system.affine() && full && spec.measure.is_bernoulli()) {
            std::vector<Eigen::VectorXd> sc;
            std::vector<double> lp;
            for (int j = 0; j < k; ++j) {
              const double p = spec.measure.probabilities()(j);
              if (p <= 0.0) continue;
              sc.push_back(system.branch_log_scales(j));
              lp.push_back(std::log(p));
            }
            append_compositions(group_items(sc, lp), depth, zero, 0.0, options.class_budget, out);
          } else {
            explicit_words([](const Word&) { return true; },
                           [&](const Word& w) { return spec.measure.log_mass(w); });
          }
          out = select_typical(std::move(out), spec.delta);
        } else if constexpr (std::is_same_v<T, BlockConcatenation>) {
          check_block_set(system, spec.blocks);
          const int len = static_cast<int>(spec.blocks.front().size());
          if (depth % len != 0) throw ArgumentError("cover_classes: depth must be a multiple of the block length");
          std::vector<Word> blocks = spec.blocks;
          std::sort(blocks.begin(), blocks.end());
          blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
          const int q = depth / len;
          if (system.affine()) {
            std::vector<Eigen::VectorXd> sc;
            for (const auto& b : blocks) {
              Eigen::VectorXd s = zero;
              for (int j : b) s += system.branch_log_scales(j);
              sc.push_back(s);
            }
            append_compositions(group_items(sc, std::vector<double>(blocks.size(), 0.0)), q, zero, 0.0,
                                options.class_budget, out);
          } else {
            if (std::pow(static_cast<double>(blocks.size()), q) > static_cast<double>(options.word_budget))
              throw PrecisionError("cover_classes: block words exceed the word budget");
            std::vector<std::size_t> idx(static_cast<std::size_t>(q), 0);
            while (true) {
              Word w;
              for (std::size_t i : idx) w.insert(w.end(), blocks[i].begin(), blocks[i].end());
              out.push_back({0.0, 0.0, word_log_scales(system, w)});
              int pos = q - 1;
              while (pos >= 0 && ++idx[pos] == blocks.size()) idx[pos--] = 0;
              if (pos < 0) break;
            }
          }
        } else {
          check_period(system, spec.period);
          for (std::size_t s = 0; s < spec.period.size(); ++s)
            out.push_back({0.0, 0.0, word_log_scales(system, periodic_word(spec.period, depth, s))});
        }
      },
      set);
  return out;
}

int bowen_depth_offset(const ModelSystem& system, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ArgumentError("caratheodory: r must be positive");
  const int d = static_cast<int>(std::ceil(std::log(1.0 / r) / std::log(system.min_expansion()))) - 1;
  return std::max(0, d);
}

DimensionReport caratheodory_dimension(const ModelSystem& system, const SetSpec& set, double r,
                                       const CaratheodoryOptions& options) {
  if (system.invertible()) throw ArgumentError("caratheodory_dimension: defined for repellers");
  if (!(r > 0.0)) throw ArgumentError("caratheodory_dimension: r must be positive");
  if (r >= system.local_radius())
    throw PrecisionError("caratheodory_dimension: r = " + std::to_string(r) +
                         " is not below the Lebesgue number of the branch partition (" +
                         std::to_string(system.local_radius()) + ")");
  if (options.min_depth < 1 || options.max_depth < options.min_depth)
    throw ArgumentError("caratheodory_dimension: invalid depth schedule");
  const int m0 = system.dim();
  const int d_r = bowen_depth_offset(system, r);

  std::vector<Eigen::VectorXd> branch_scales;
  if (system.affine())
    for (int j = 0; j < system.alphabet_size(); ++j) branch_scales.push_back(sorted_desc(system.branch_log_scales(j)));
  auto max_branch_phi = [&](double t) {
    if (branch_scales.empty()) return t * std::log(system.max_expansion());
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& s : branch_scales) m = std::max(m, singular_value_potential(s, t));
    return m;
  };

  int step = 1;
  int start = options.min_depth;
  if (const auto* b = std::get_if<BlockConcatenation>(&set)) {
    if (b->blocks.empty() || b->blocks.front().empty()) throw ArgumentError("block concatenation: no blocks");
    step = static_cast<int>(b->blocks.front().size());
  }
  if (const auto* u = std::get_if<CylinderUnion>(&set))
    for (const auto& p : u->prefixes) start = std::max(start, static_cast<int>(p.size()));
  start = (start + step - 1) / step * step;

  DimensionReport rep;
  rep.kind = DimensionKind::caratheodory;
  rep.diagnostics["r"] = r;
  rep.diagnostics["depth_offset"] = d_r;
  rep.diagnostics["c1"] = system.local_radius() * std::pow(system.max_expansion(), -d_r) / r;
  rep.diagnostics["c2"] = std::pow(system.min_expansion(), -d_r) / r;
  auto& depths = rep.series["depths"];
  auto& roots = rep.series["roots"];
  auto& cover = rep.series["log_cover_size"];

  bool converged = false;
  for (int depth = start; depth <= options.max_depth; depth *= 2) {
    std::vector<CylinderClass> classes;
    try {
      classes = cover_classes(system, set, depth, options);
    } catch (const PrecisionError&) {
      if (depths.empty()) throw;
      break;
    }
    if (classes.empty()) throw ArgumentError("caratheodory_dimension: empty cover");
    std::vector<double> buf(classes.size());
    auto g = [&](double t) {
      for (std::size_t i = 0; i < classes.size(); ++i)
        buf[i] = classes[i].log_count - singular_value_potential(classes[i].log_scales, t);
      return log_sum_exp<double>(buf) + d_r * max_branch_phi(t);
    };
    double root;
    if (g(static_cast<double>(m0)) >= 0.0) root = m0;
    else {
      double lo = 0.0, hi = m0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) >= 0.0 ? lo : hi) = mid;
      }
      root = 0.5 * (lo + hi);
    }
    std::vector<double> counts(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) counts[i] = classes[i].log_count;
    depths.push_back(depth);
    roots.push_back(root);
    cover.push_back(log_sum_exp<double>(counts));
    if (roots.size() >= 2 && std::abs(roots.back() - roots[roots.size() - 2]) <= options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    const double a = roots.back();
    const double b = roots.size() >= 2 ? roots[roots.size() - 2] : static_cast<double>(m0);
    throw UnresolvedError("caratheodory_dimension: cover sums did not stabilise by depth " +
                              std::to_string(static_cast<int>(depths.back())),
                          std::min(a, b), std::max(a, b));
  }
  rep.value = roots.back();
  rep.diagnostics["depth"] = depths.back();
  rep.diagnostics["previous_root"] = roots[roots.size() - 2];
  return rep;
}

// ---------------------------------------------------------------------------
// Box counting

std::size_t box_count(const std::vector<Point>& points, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("box_count: delta must be positive");
  if (points.empty()) return 0;
  const Eigen::Index m = points.front().size();
  if (m < 1 || m > 2) throw ArgumentError("box_count: points must be 1- or 2-dimensional");
  std::vector<std::pair<long long, long long>> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != m) throw ArgumentError("box_count: mixed point dimensions");
    keys[i].first = static_cast<long long>(std::floor(points[i](0) / delta));
    keys[i].second = m == 2 ? static_cast<long long>(std::floor(points[i](1) / delta)) : 0;
  }
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

BoxDimension box_dimension(const std::vector<Point>& points, std::span<const double> deltas_in, int window,
                           unsigned threads) {
  if (deltas_in.size() < 3) throw ArgumentError("box_dimension: need at least 3 deltas");
  std::vector<double> deltas(deltas_in.begin(), deltas_in.end());
  for (double d : deltas)
    if (!(d > 0.0) || !std::isfinite(d)) throw ArgumentError("box_dimension: deltas must be positive");
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  if (std::adjacent_find(deltas.begin(), deltas.end()) != deltas.end())
    throw ArgumentError("box_dimension: repeated delta");
  if (deltas.front() / deltas.back() < 100.0) throw ArgumentError("box_dimension: delta range spans less than 2 decades");
  if (points.size() < 1000) throw ArgumentError("box_dimension: need at least 1000 points");
  const int len = static_cast<int>(deltas.size());
  if (window == 0) window = std::max(3, (len + 1) / 2);
  if (window < 2 || window > len) throw ArgumentError("box_dimension: window outside [2, number of deltas]");

  BoxDimension out;
  out.deltas = deltas;
  out.counts.assign(deltas.size(), 0.0);
  parallel_for(deltas.size(), threads, [&](std::size_t i) { out.counts[i] = static_cast<double>(box_count(points, deltas[i])); });
  std::vector<double> x(deltas.size()), y(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    x[i] = -std::log(deltas[i]);
    y[i] = std::log(out.counts[i]);
  }
  const auto fit = fit_line<double>(x, y);
  out.slope = fit.slope;
  out.residual = fit.residual;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int s = 0; s + window <= len; ++s) {
    const auto f = fit_line<double>(std::span<const double>(x).subspan(s, window), std::span<const double>(y).subspan(s, window));
    lo = std::min(lo, f.slope);
    hi = std::max(hi, f.slope);
  }
  for (auto* r : {&out.lower, &out.upper}) {
    r->diagnostics["residual"] = fit.residual;
    r->diagnostics["delta_min"] = deltas.back();
    r->diagnostics["delta_max"] = deltas.front();
    r->diagnostics["window"] = window;
    r->diagnostics["points"] = static_cast<double>(points.size());
    r->series["counts"] = out.counts;
  }
  out.lower.kind = DimensionKind::box_lower;
  out.lower.value = lo;
  out.upper.kind = DimensionKind::box_upper;
  out.upper.value = hi;
  return out;
}

std::vector<Point> cylinder_points(const ModelSystem& system, int depth) {
  return set_points(system, WholeRepeller{}, depth);
}

std::vector<Point> set_points(const ModelSystem& system, const SetSpec& set, int depth) {
  if (depth < 0) throw ArgumentError("set_points: negative depth");
  std::vector<Point> out;
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, WholeRepeller>) {
          for_each_word(system.coding(), depth, [&](const Word& w) { out.push_back(anchor(system, w)); });
        } else if constexpr (std::is_same_v<T, CylinderUnion>) {
          const auto prefixes = dedupe_prefixes(system, spec.prefixes);
          for_each_word(system.coding(), depth, [&](const Word& w) {
            if (has_prefix(w, prefixes)) out.push_back(anchor(system, w));
          });
        } else if constexpr (std::is_same_v<T, MeasureTypical>) {
          throw ArgumentError("set_points: a measure-typical set has no finite realization");
        } else if constexpr (std::is_same_v<T, BlockConcatenation>) {
          check_block_set(system, spec.blocks);
          const int len = static_cast<int>(spec.blocks.front().size());
          if (depth % len != 0) throw ArgumentError("set_points: depth must be a multiple of the block length");
          const int q = depth / len;
          std::vector<std::size_t> idx(static_cast<std::size_t>(q), 0);
          while (true) {
            Word w;
            for (std::size_t i : idx) w.insert(w.end(), spec.blocks[i].begin(), spec.blocks[i].end());
            out.push_back(anchor(system, w));
            int pos = q - 1;
            while (pos >= 0 && ++idx[pos] == spec.blocks.size()) idx[pos--] = 0;
            if (pos < 0) break;
          }
        } else {
          check_period(system, spec.period);
          for (std::size_t s = 0; s < spec.period.size(); ++s)
            out.push_back(anchor(system, periodic_word(spec.period, std::max<int>(depth, 1), s)));
        }
      },
      set);
  return out;
}

std::vector<Point> product_points(const std::vector<Point>& xs, const std::vector<Point>& ys) {
  std::vector<Point> out;
  out.reserve(xs.size() * ys.size());
  for (const auto& x : xs)
    for (const auto& y : ys) {
      if (x.size() != 1 || y.size() != 1) throw ArgumentError("product_points: factors must be 1-dimensional");
      out.push_back(Eigen::Vector2d(x(0), y(0)));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Local dimension

namespace {

constexpr int kMaxDescent = 64;

// Overlap fraction of box b with the closed box [lo, hi].
double overlap_fraction(const Box& b, const Point& lo, const Point& hi) {
  double f = 1.0;
  for (Eigen::Index c = 0; c < lo.size(); ++c) {
    const double w = b.hi(c) - b.lo(c);
    const double o = std::min(b.hi(c), hi(c)) - std::max(b.lo(c), lo(c));
    if (o <= 0.0) return 0.0;
    f *= w > 0.0 ? std::min(1.0, o / w) : 1.0;
  }
  return f;
}

}  // namespace

double ball_mass(const ModelSystem& system, const ErgodicMeasureSpec& measure, const Point& x, double r,
                 double resolution) {
  if (system.invertible()) throw ArgumentError("ball_mass: defined for repellers");
  check_compatible(system, measure);
  if (!(r > 0.0)) throw ArgumentError("ball_mass: radius must be positive");
  if (r < 1e-12) throw PrecisionError("ball_mass: radius below coding resolution");
  if (system.periodic() && r >= 0.5) return 1.0;
  if (!(resolution > 0.0 && resolution < 1.0)) throw ArgumentError("ball_mass: resolution must lie in (0, 1)");
  if (x.size() != system.dim()) throw ArgumentError("ball_mass: point has wrong dimension");
  const int k = system.alphabet_size();
  const int m = system.dim();

  // Periodic balls are split into translates lying over [0, 1]^m.
  std::vector<Point> centres;
  if (system.periodic()) {
    for (int a = -1; a <= 1; ++a)
      for (int b = (m == 2 ? -1 : 0); b <= (m == 2 ? 1 : 0); ++b) {
        Point c = x;
        c(0) += a;
        if (m == 2) c(1) += b;
        if (((c.array() + r) >= 0.0).all() && ((c.array() - r) <= 1.0).all()) centres.push_back(c);
      }
  } else {
    centres.push_back(x);
  }

  struct Node {
    Box box;
    double log_mass;
    Word word;
  };
  auto child_box = [&](const Box& parent, const Word& word) {
    if (!system.affine()) return decode(system, word);
    const Box dj = system.branch_domain(word.back());
    const Point w = parent.width();
    return Box{parent.lo + w.cwiseProduct(dj.lo), parent.lo + w.cwiseProduct(dj.hi)};
  };

  // Mass of the largest cylinder around x inside the ball sets the leaf scale.
  double core = 0.0;
  {
    const Point lo = x.array() - r, hi = x.array() + r;
    Box box = system.unit_box();
    Word word;
    double lm = 0.0;
    for (int d = 0; d < kMaxDescent; ++d) {
      int pick = -1;
      for (int j = 0; j < k && pick < 0; ++j) {
        const double q = d == 0 ? measure.stationary()(j) : measure.transition()(word.back(), j);
        if (q <= 0.0 || (d > 0 && system.coding().transitions(word.back(), j) == 0)) continue;
        word.push_back(j);
        const Box b = child_box(box, word);
        if (b.contains(x, kCodingTolerance)) {
          pick = j;
          box = b;
          lm += std::log(q);
        } else {
          word.pop_back();
        }
      }
      if (pick < 0) break;
      core = std::exp(lm);
      if ((box.lo.array() >= lo.array()).all() && (box.hi.array() <= hi.array()).all()) break;
    }
  }
  if (!(core > 0.0)) throw CodingError("ball_mass: centre is not in the support of the measure");
  const double leaf_mass = resolution * core;

  double total = 0.0;
  for (const auto& c : centres) {
    const Point lo = c.array() - r, hi = c.array() + r;
    std::vector<Node> stack;
    for (int j = 0; j < k; ++j) {
      const double p = measure.stationary()(j);
      if (p > 0.0) stack.push_back({system.branch_domain(j), std::log(p), Word{j}});
    }
    while (!stack.empty()) {
      Node node = std::move(stack.back());
      stack.pop_back();
      const double frac = overlap_fraction(node.box, lo, hi);
      if (frac <= 0.0) continue;
      const bool inside = (node.box.lo.array() >= lo.array()).all() && (node.box.hi.array() <= hi.array()).all();
      if (inside) {
        total += std::exp(node.log_mass);
        continue;
      }
      if (std::exp(node.log_mass) < leaf_mass || static_cast<int>(node.word.size()) >= kMaxDescent) {
        total += frac * std::exp(node.log_mass);
        continue;
      }
      const int last = node.word.back();
      for (int j = 0; j < k; ++j) {
        const double q = measure.transition()(last, j);
        if (q <= 0.0 || system.coding().transitions(last, j) == 0) continue;
        Node child;
        child.word = node.word;
        child.word.push_back(j);
        child.log_mass = node.log_mass + std::log(q);
        child.box = child_box(node.box, child.word);
        stack.push_back(std::move(child));
      }
    }
  }
  return std::min(1.0, total);
}

DimensionReport local_dimension(const ModelSystem& system, const ErgodicMeasureSpec& measure, std::span<const double> radii_in,
                                int samples, std::uint64_t seed, unsigned threads) {
  if (system.invertible()) throw ArgumentError("local_dimension: defined for repellers");
  check_compatible(system, measure);
  if (samples < 1) throw ArgumentError("local_dimension: need at least one sample");
  if (radii_in.size() < 2) throw ArgumentError("local_dimension: need at least two radii");
  std::vector<double> radii(radii_in.begin(), radii_in.end());
  for (double r : radii)
    if (!(r > 0.0) || !std::isfinite(r)) throw ArgumentError("local_dimension: radii must be positive");
  std::sort(radii.begin(), radii.end(), std::greater<>());
  if (radii.front() / radii.back() < 100.0) throw ArgumentError("local_dimension: radii span less than 2 decades");
  constexpr int kSampleDepth = 48;
  const double resolution = std::pow(system.min_expansion(), -kSampleDepth);
  if (radii.back() < 1e-12 || radii.back() < 1e3 * resolution)
    throw PrecisionError("local_dimension: radius " + std::to_string(radii.back()) + " is below coding resolution");

  std::vector<double> log_r(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) log_r[i] = std::log(radii[i]);
  std::vector<double> slopes(static_cast<std::size_t>(samples));
  parallel_for(slopes.size(), threads, [&](std::size_t s) {
    auto rng = substream(seed, s);
    const Point x = anchor(system, measure.sample(rng, kSampleDepth));
    std::vector<double> log_m(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) log_m[i] = std::log(ball_mass(system, measure, x, radii[i]));
    slopes[s] = fit_line<double>(log_r, log_m).slope;
  });
  const double mean = std::accumulate(slopes.begin(), slopes.end(), 0.0) / samples;
  double ss = 0.0;
  for (double v : slopes) ss += (v - mean) * (v - mean);
  const double sd = samples > 1 ? std::sqrt(ss / (samples - 1)) : 0.0;

  DimensionReport rep;
  rep.kind = DimensionKind::local;
  rep.value = mean;
  rep.diagnostics["dispersion"] = sd;
  rep.diagnostics["standard_error"] = sd / std::sqrt(static_cast<double>(samples));
  rep.diagnostics["samples"] = samples;
  rep.diagnostics["r_min"] = radii.back();
  rep.diagnostics["r_max"] = radii.front();
  rep.series["slopes"] = slopes;
  return rep;
}

}  // namespace lydim
