#include "lydim/identities.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lydim/cocycle.hpp"
#include "lydim/dimension.hpp"
#include "lydim/horseshoe.hpp"
#include "lydim/numeric.hpp"
#include "lydim/parallel.hpp"
#include "lydim/pressure.hpp"

namespace lydim {

std::vector<NamedSystem> shipped_systems() {
  using V = Eigen::Vector2d;
  std::vector<NamedSystem> out;
  out.push_back({"doubling", ModelSystem::expanding_circle(2, 0.0)});
  out.push_back({"perturbed-circle", ModelSystem::expanding_circle(3, 0.1)});
  out.push_back({"cantor-3-3", ModelSystem::cantor_repeller({{0.0, 3.0}, {2.0 / 3.0, 3.0}})});
  out.push_back({"cantor-2-4", ModelSystem::cantor_repeller({{0.0, 2.0}, {0.75, 4.0}})});
  out.push_back({"torus-2-3", ModelSystem::diagonal_torus(2, 3)});
  out.push_back({"planar-3-4", ModelSystem::planar_repeller({{V(0, 0), V(3, 4)}, {V(2.0 / 3.0, 0.75), V(3, 4)}})});
  out.push_back({"planar-mixed", ModelSystem::planar_repeller({{V(0, 0), V(3, 5)}, {V(0.75, 0.6), V(4, 2.5)}})});
  out.push_back({"horseshoe-3-0.25", ModelSystem::linear_horseshoe(3.0, 0.25)});
  return out;
}

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

const ModelSystem& find_system(const std::vector<NamedSystem>& systems, const std::string& name) {
  for (const auto& s : systems)
    if (s.name == name) return s.system;
  throw ArgumentError("unknown shipped system " + name);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

IdentityCheck check(std::string name, double value, double tolerance, std::string detail = {}) {
  return {std::move(name), value <= tolerance && std::isfinite(value), value, tolerance, std::move(detail)};
}

Word random_word(std::mt19937_64& rng, int k, int length) {
  Word w(static_cast<std::size_t>(length));
  for (auto& s : w) s = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
  return w;
}

void super_additivity(const std::vector<NamedSystem>& systems, const IdentityOptions& opt, std::vector<IdentityCheck>& out) {
  const auto n_triples = static_cast<std::size_t>(std::max(0, opt.triples));
  std::vector<double> violation(n_triples, 0.0);
  std::vector<std::size_t> which(n_triples, 0);
  parallel_for(n_triples, opt.threads, [&](std::size_t i) {
    auto rng = substream(opt.seed, 0x5a00000000ull + i);
    const std::size_t si = rng() % systems.size();
    const auto& sys = systems[si].system;
    const int n = 1 + static_cast<int>(rng() % 50);
    const int l = 1 + static_cast<int>(rng() % 50);
    const double t = static_cast<double>(rng() >> 11) * 0x1.0p-53 * sys.dim();
    const Word w = random_word(rng, sys.alphabet_size(), n + l + coding_lookahead(sys));
    const Word tail(w.begin() + n, w.end());
    const double whole = coded_svp(sys, w, n + l, t);
    const double head = coded_svp(sys, w, n, t);
    const double rest = coded_svp(sys, tail, l, t);
    which[i] = si;
    violation[i] = head + rest - whole;
  });
  double worst = 0.0;
  std::size_t failures = 0;
  std::string at;
  for (std::size_t i = 0; i < n_triples; ++i) {
    if (violation[i] > 1e-9) ++failures;
    if (violation[i] > worst) {
      worst = violation[i];
      at = systems[which[i]].name;
    }
  }
  out.push_back(check("super-additivity", worst, 1e-9,
                      std::to_string(n_triples) + " triples, " + std::to_string(failures) + " violations" +
                          (at.empty() ? "" : ", worst on " + at)));
}

// (1/N) log sum over depth-N cylinders of exp(-phi^t) on a t-grid.
void pressure_monotonicity(const std::vector<NamedSystem>& systems, const IdentityOptions& opt,
                           std::vector<IdentityCheck>& out) {
  for (const auto& [name, sys] : systems) {
    if (sys.invertible()) continue;
    const int k = sys.alphabet_size();
    const int depth = std::max(2, static_cast<int>(std::floor(17.0 * std::log(2.0) / std::log(k))));
    std::vector<Word> words;
    for_each_word(sys.coding(), depth, [&](const Word& w) { words.push_back(w); });
    const int pad = coding_lookahead(sys);
    std::vector<Eigen::VectorXd> logs(words.size());
    parallel_for(words.size(), opt.threads, [&](std::size_t i) {
      Word w = words[i];
      w.resize(w.size() + static_cast<std::size_t>(pad), 0);
      logs[i] = coded_singular_values(sys, w, depth).log_singular_values;
    });
    const int steps = 20;
    std::vector<double> ts, p;
    std::vector<double> terms(words.size());
    for (int s = 0; s <= steps; ++s) {
      const double t = sys.dim() * static_cast<double>(s) / steps;
      for (std::size_t i = 0; i < words.size(); ++i) terms[i] = -singular_value_potential(logs[i], t);
      ts.push_back(t);
      p.push_back(log_sum_exp<double>(terms) / depth);
    }
    const double kappa = std::log(sys.min_expansion());
    double worst = -INFINITY;
    for (int s = 0; s < steps; ++s) worst = std::max(worst, (p[s + 1] - p[s]) + kappa * (ts[s + 1] - ts[s]));
    out.push_back(check("pressure-monotone/" + name, std::max(worst, 0.0), 1e-9,
                        "max of dP + log(kappa) dt = " + fmt(worst) + " at depth " + std::to_string(depth)));
    try {
      locally_constant_weights(sys, 0.0);
    } catch (const ArgumentError&) {
      continue;
    }
    double err = 0.0;
    for (std::size_t s = 0; s < ts.size(); ++s) {
      const Eigen::VectorXd lw = locally_constant_weights(sys, ts[s]);
      err = std::max(err, std::abs(sft_pressure(sys.coding(), std::span<const double>(lw.data(), lw.size())).value - p[s]));
    }
    out.push_back(check("pressure-sft/" + name, err, 1e-9, "cylinder sums vs Perron root"));
  }
}

void qr_vs_svd(const std::vector<NamedSystem>& systems, const IdentityOptions& opt, std::vector<IdentityCheck>& out) {
  const int n = opt.horizon;
  const int per_system = 16;
  for (std::size_t si = 0; si < systems.size(); ++si) {
    const auto& [name, sys] = systems[si];
    std::vector<double> err(per_system, 0.0);
    parallel_for(per_system, opt.threads, [&](std::size_t i) {
      auto rng = substream(opt.seed, 0x9b00000000ull + si * 1000 + i);
      const Word w = random_word(rng, sys.alphabet_size(), n + coding_lookahead(sys));
      const auto pts = coded_orbit(sys, w, n);
      Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(sys.dim(), sys.dim());
      for (int j = 0; j < n; ++j) prod = coded_jacobian(sys, w[j], pts[j]) * prod;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(prod);
      const Eigen::VectorXd direct = svd.singularValues().array().log();
      const Eigen::VectorXd qr = coded_singular_values(sys, w, n).log_singular_values;
      err[i] = (direct - qr).cwiseAbs().maxCoeff();
    });
    out.push_back(check("qr-vs-svd/" + name, *std::max_element(err.begin(), err.end()), 1e-8,
                        std::to_string(per_system) + " orbits, n = " + std::to_string(n)));
  }
}

void exponent_exactness(const std::vector<NamedSystem>& systems, const IdentityOptions& opt,
                        std::vector<IdentityCheck>& out) {
  const std::vector<std::pair<std::string, ErgodicMeasureSpec>> cases = {
      {"doubling", ErgodicMeasureSpec::bernoulli(vec({0.5, 0.5}))},
      {"doubling", ErgodicMeasureSpec::bernoulli(vec({0.7, 0.3}))},
      {"cantor-3-3", ErgodicMeasureSpec::bernoulli(vec({0.7, 0.3}))},
      {"cantor-2-4", ErgodicMeasureSpec::bernoulli(vec({0.5, 0.5}))},
      {"cantor-2-4", ErgodicMeasureSpec::markov((Eigen::MatrixXd(2, 2) << 0.9, 0.1, 0.5, 0.5).finished())},
      {"torus-2-3", ErgodicMeasureSpec::bernoulli(vec({0.3, 0.1, 0.1, 0.2, 0.2, 0.1}))},
      {"planar-3-4", ErgodicMeasureSpec::bernoulli(vec({0.3, 0.7}))},
  };
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& sys = find_system(systems, cases[c].first);
    const auto& mu = cases[c].second;
    const auto exact = exact_lyapunov_exponents(sys, mu);
    const auto mc = lyapunov_exponents(sys, mu, 64, 256, opt.seed + c, opt.threads);
    const double err = (mc.exponents - *exact).cwiseAbs().maxCoeff();
    const double se = mc.standard_errors.maxCoeff();
    out.push_back(check("exponents/" + cases[c].first + "/" + mu.describe(), err, 1e-12 + 5.0 * se,
                        "sampled vs closed form, standard error " + fmt(se)));
  }
  const auto& hs_geom = find_system(systems, "horseshoe-3-0.25");
  const auto hs = extract_horseshoe(hs_geom.coding(), ErgodicMeasureSpec::bernoulli(vec({0.7, 0.3})), 10, 0.05, 0,
                                    opt.threads);
  out.push_back(check("exponents/horseshoe-realization", realized_exponent_deviation(hs, hs_geom, 4, 64, opt.seed),
                      1e-12, "branch exponents along block concatenations"));
}

void bowen_identity(const std::vector<NamedSystem>& systems, const IdentityOptions& opt, std::vector<IdentityCheck>& out) {
  for (const auto& [name, sys_name, mu] : bowen_pairs()) {
    const auto& sys = find_system(systems, sys_name);
    const double h = measure_entropy(mu);
    const auto lambda = *exact_lyapunov_exponents(sys, mu);
    const double dl = lyapunov_dimension(h, lambda);
    const double root = bowen_root(measure_pressure_function(sys, mu, 200, 400, opt.seed, opt.threads), sys.dim(), 1e-12).value;
    out.push_back(check("bowen/" + name, std::abs(root - dl), 1e-6,
                        "root " + fmt(root) + ", Lyapunov dimension " + fmt(dl)));
  }
}

void caratheodory_agreement(const std::vector<NamedSystem>& systems, const IdentityOptions& opt,
                            std::vector<IdentityCheck>& out) {
  CaratheodoryOptions co;
  co.threads = opt.threads;
  for (const auto& [name, sys_name, mu] : bowen_pairs()) {
    if (sys_name == "torus-2-3") continue;
    const auto& sys = find_system(systems, sys_name);
    const double dl = lyapunov_dimension(measure_entropy(mu), *exact_lyapunov_exponents(sys, mu));
    const double dc = caratheodory_dimension(sys, MeasureTypical{mu, 0.1}, 0.05, co).value;
    out.push_back(check("caratheodory/" + name, std::abs(dc - dl), sys.dim() == 1 ? 0.05 : 0.08,
                        "measure-typical " + fmt(dc) + ", Lyapunov dimension " + fmt(dl)));
  }
}

std::vector<double> geometric(double base, int k_lo, int k_hi) {
  std::vector<double> d;
  for (int k = k_lo; k <= k_hi; ++k) d.push_back(std::pow(base, -k));
  return d;
}

void box_chains(const std::vector<NamedSystem>& systems, const IdentityOptions& opt, std::vector<IdentityCheck>& out) {
  struct Case {
    std::string name;
    std::vector<Point> points;
    std::vector<double> deltas;
    double exact;  // analytic value on exactly aligned grids, NaN otherwise
  };
  const auto& hs = find_system(systems, "horseshoe-3-0.25");
  std::vector<Case> cases;
  cases.push_back({"doubling", cylinder_points(find_system(systems, "doubling"), 12), geometric(2, 1, 11), 1.0});
  cases.push_back({"cantor-3-3", cylinder_points(find_system(systems, "cantor-3-3"), 12), geometric(3, 1, 11),
                   std::log(2.0) / std::log(3.0)});
  cases.push_back({"cantor-2-4", cylinder_points(find_system(systems, "cantor-2-4"), 14), geometric(2, 2, 13), NAN});
  cases.push_back({"planar-3-4", cylinder_points(find_system(systems, "planar-3-4"), 12), geometric(2, 2, 14), NAN});
  cases.push_back({"horseshoe-unstable", horseshoe_unstable_slice(hs, 12), geometric(3, 1, 11), std::log(2.0) / std::log(3.0)});
  cases.push_back({"horseshoe-stable", horseshoe_stable_slice(hs, 12), geometric(4, 1, 11), 0.5});
  std::map<std::string, double> lower;
  for (const auto& c : cases) {
    const auto bd = box_dimension(c.points, c.deltas, 0, opt.threads);
    lower[c.name] = bd.lower.value;
    out.push_back(check("box-chain/" + c.name, std::max(0.0, bd.lower.value - bd.upper.value), 1e-12,
                        "lower " + fmt(bd.lower.value) + ", upper " + fmt(bd.upper.value)));
    if (std::isfinite(c.exact))
      out.push_back(check("box-exact/" + c.name,
                          std::max(std::abs(bd.lower.value - c.exact), std::abs(bd.upper.value - c.exact)), 1e-9,
                          "aligned grid, analytic " + fmt(c.exact)));
  }
  // Lyapunov dimension of a measure never exceeds the box dimension of its support.
  for (const auto& [name, sys_name, mu] : bowen_pairs()) {
    if (!lower.count(sys_name)) continue;
    const auto& sys = find_system(systems, sys_name);
    const double dl = lyapunov_dimension(measure_entropy(mu), *exact_lyapunov_exponents(sys, mu));
    // Box estimates of the planar set approach log 2 / log 3 from below.
    const double tol = sys_name == "cantor-3-3" ? 1e-9 : 0.05;
    out.push_back(check("dimension-chain/" + name, std::max(0.0, dl - lower[sys_name]), tol,
                        "Lyapunov " + fmt(dl) + " <= lower box " + fmt(lower[sys_name])));
  }
}

}  // namespace

std::vector<NamedMeasure> bowen_pairs() {
  const Eigen::VectorXd uniform6 = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
  return {
      {"cantor-3-3/bernoulli(0.5)", "cantor-3-3", ErgodicMeasureSpec::bernoulli(vec({0.5, 0.5}))},
      {"cantor-3-3/bernoulli(0.7)", "cantor-3-3", ErgodicMeasureSpec::bernoulli(vec({0.7, 0.3}))},
      {"torus-2-3/uniform", "torus-2-3", ErgodicMeasureSpec::bernoulli(uniform6)},
      {"torus-2-3/bernoulli(0.3,0.1,0.1,0.2,0.2,0.1)", "torus-2-3",
       ErgodicMeasureSpec::bernoulli(vec({0.3, 0.1, 0.1, 0.2, 0.2, 0.1}))},
      {"planar-3-4/bernoulli(0.5)", "planar-3-4", ErgodicMeasureSpec::bernoulli(vec({0.5, 0.5}))},
      {"planar-3-4/bernoulli(0.3)", "planar-3-4", ErgodicMeasureSpec::bernoulli(vec({0.3, 0.7}))},
  };
}

std::vector<IdentityCheck> verify_identities(const IdentityOptions& options) {
  if (options.triples < 1) throw ArgumentError("verify_identities: triples must be positive");
  if (options.horizon < 1) throw ArgumentError("verify_identities: horizon must be positive");
  const auto systems = shipped_systems();
  std::vector<IdentityCheck> out;
  super_additivity(systems, options, out);
  pressure_monotonicity(systems, options, out);
  qr_vs_svd(systems, options, out);
  exponent_exactness(systems, options, out);
  bowen_identity(systems, options, out);
  if (options.caratheodory) caratheodory_agreement(systems, options, out);
  box_chains(systems, options, out);
  return out;
}

}  // namespace lydim
