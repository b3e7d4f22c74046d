#include "lydim/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "lydim/cocycle.hpp"
#include "lydim/dimension.hpp"
#include "lydim/horseshoe.hpp"
#include "lydim/identities.hpp"
#include "lydim/pressure.hpp"

#ifndef LYDIM_VERSION
#define LYDIM_VERSION "0.0.0"
#endif

namespace lydim {

using nlohmann::json;

std::string to_string(Command command) {
  switch (command) {
    case Command::pressure_curve: return "pressure-curve";
    case Command::dimension: return "dimension";
    case Command::lyapunov: return "lyapunov";
    case Command::box_count: return "box-count";
    case Command::horseshoe_approx: return "horseshoe-approx";
    case Command::verify_identities: return "verify-identities";
  }
  return "?";
}

std::string tool_version() { return LYDIM_VERSION; }

namespace {

// ---------------------------------------------------------------------------
// Schema helpers

std::string field(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string item(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
}

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(field(path, k), "unknown key");
  }
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

long long as_int(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  throw ConfigError(path, "expected an integer");
}

std::vector<double> as_numbers(const json& j, const std::string& path, std::size_t min_size = 1) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  if (j.size() < min_size) throw ConfigError(path, "needs at least " + std::to_string(min_size) + " entries");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], item(path, i)));
  return out;
}

std::vector<long long> as_ints(const json& j, const std::string& path, std::size_t min_size = 1) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of integers");
  if (j.size() < min_size) throw ConfigError(path, "needs at least " + std::to_string(min_size) + " entries");
  std::vector<long long> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_int(j[i], item(path, i)));
  return out;
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& need(const json& obj, const std::string& path, const char* key) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError(field(path, key), "required");
  return *v;
}

void positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, "must be > 0");
}

// Equal gaps between consecutive branch intervals of lengths 1/s_j.
std::vector<double> packed_lefts(const std::vector<double>& lengths, const std::string& path) {
  const double total = std::accumulate(lengths.begin(), lengths.end(), 0.0);
  if (total > 1.0 + kCodingTolerance) throw ConfigError(path, "branch intervals do not fit in [0, 1]");
  const std::size_t k = lengths.size();
  const double gap = k > 1 ? (1.0 - total) / static_cast<double>(k - 1) : 0.0;
  std::vector<double> out;
  double x = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back(i + 1 == k && k > 1 ? 1.0 - lengths[i] : x);
    x += lengths[i] + gap;
  }
  return out;
}

// Resolves a system spec in place and returns the built system.
ModelSystem resolve_system(json& spec, const std::string& path) {
  require_object(spec, path);
  const std::string kind = as_string(need(spec, path, "kind"), field(path, "kind"));
  try {
    if (kind == "expanding-circle") {
      allow_keys(spec, path, {"kind", "degree", "amplitude"});
      const auto degree = as_int(need(spec, path, "degree"), field(path, "degree"));
      if (degree < 2 || degree > 64) throw ConfigError(field(path, "degree"), "must be in [2, 64]");
      const double amp = find(spec, "amplitude") ? as_number(spec["amplitude"], field(path, "amplitude")) : 0.0;
      spec["amplitude"] = amp;
      return ModelSystem::expanding_circle(static_cast<int>(degree), amp);
    }
    if (kind == "diagonal-torus") {
      allow_keys(spec, path, {"kind", "diagonal"});
      const auto d = as_ints(need(spec, path, "diagonal"), field(path, "diagonal"), 2);
      if (d.size() != 2) throw ConfigError(field(path, "diagonal"), "expected two integers");
      for (std::size_t i = 0; i < 2; ++i)
        if (d[i] < 2 || d[i] > 64) throw ConfigError(item(field(path, "diagonal"), i), "must be in [2, 64]");
      return ModelSystem::diagonal_torus(static_cast<int>(d[0]), static_cast<int>(d[1]));
    }
    if (kind == "cantor-repeller") {
      allow_keys(spec, path, {"kind", "slopes", "lefts"});
      const auto slopes = as_numbers(need(spec, path, "slopes"), field(path, "slopes"));
      std::vector<double> lengths;
      for (std::size_t i = 0; i < slopes.size(); ++i) {
        if (!(slopes[i] > 1.0)) throw ConfigError(item(field(path, "slopes"), i), "must be > 1");
        lengths.push_back(1.0 / slopes[i]);
      }
      std::vector<double> lefts;
      if (find(spec, "lefts")) {
        lefts = as_numbers(spec["lefts"], field(path, "lefts"));
        if (lefts.size() != slopes.size()) throw ConfigError(field(path, "lefts"), "must match slopes in length");
      } else {
        lefts = packed_lefts(lengths, field(path, "slopes"));
        spec["lefts"] = lefts;
      }
      std::vector<IntervalBranch> br;
      for (std::size_t i = 0; i < slopes.size(); ++i) br.push_back({lefts[i], slopes[i]});
      return ModelSystem::cantor_repeller(std::move(br));
    }
    if (kind == "planar-repeller") {
      allow_keys(spec, path, {"kind", "derivatives", "origins"});
      const std::string dpath = field(path, "derivatives");
      const json& dj = need(spec, path, "derivatives");
      if (!dj.is_array() || dj.empty()) throw ConfigError(dpath, "expected a non-empty array of [u, v] pairs");
      std::vector<Eigen::Vector2d> der;
      for (std::size_t i = 0; i < dj.size(); ++i) {
        const auto uv = as_numbers(dj[i], item(dpath, i), 2);
        if (uv.size() != 2) throw ConfigError(item(dpath, i), "expected [u, v]");
        if (!(uv[0] > 1.0 && uv[1] > 1.0)) throw ConfigError(item(dpath, i), "entries must be > 1");
        der.emplace_back(uv[0], uv[1]);
      }
      std::vector<Eigen::Vector2d> org;
      if (find(spec, "origins")) {
        const std::string opath = field(path, "origins");
        const json& oj = spec["origins"];
        if (!oj.is_array() || oj.size() != dj.size()) throw ConfigError(opath, "must match derivatives in length");
        for (std::size_t i = 0; i < oj.size(); ++i) {
          const auto xy = as_numbers(oj[i], item(opath, i), 2);
          if (xy.size() != 2) throw ConfigError(item(opath, i), "expected [x, y]");
          org.emplace_back(xy[0], xy[1]);
        }
      } else {
        std::vector<double> lx, ly;
        for (const auto& d : der) {
          lx.push_back(1.0 / d.x());
          ly.push_back(1.0 / d.y());
        }
        const auto ox = packed_lefts(lx, dpath);
        const auto oy = packed_lefts(ly, dpath);
        json arr = json::array();
        for (std::size_t i = 0; i < der.size(); ++i) {
          org.emplace_back(ox[i], oy[i]);
          arr.push_back({ox[i], oy[i]});
        }
        spec["origins"] = arr;
      }
      std::vector<RectBranch> br;
      for (std::size_t i = 0; i < der.size(); ++i) br.push_back({org[i], der[i]});
      return ModelSystem::planar_repeller(std::move(br));
    }
    if (kind == "linear-horseshoe") {
      allow_keys(spec, path, {"kind", "beta", "alpha"});
      const double beta = as_number(need(spec, path, "beta"), field(path, "beta"));
      const double alpha = as_number(need(spec, path, "alpha"), field(path, "alpha"));
      return ModelSystem::linear_horseshoe(beta, alpha);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(field(path, "kind"),
                    "unknown system kind '" + kind +
                        "' (expanding-circle, diagonal-torus, cantor-repeller, planar-repeller, linear-horseshoe)");
}

ErgodicMeasureSpec resolve_measure(json& spec, const std::string& path, int alphabet) {
  require_object(spec, path);
  const std::string type = as_string(need(spec, path, "type"), field(path, "type"));
  try {
    if (type == "uniform") {
      allow_keys(spec, path, {"type"});
      return ErgodicMeasureSpec::bernoulli(Eigen::VectorXd::Constant(alphabet, 1.0 / alphabet));
    }
    if (type == "bernoulli") {
      allow_keys(spec, path, {"type", "p"});
      const auto p = as_numbers(need(spec, path, "p"), field(path, "p"));
      if (static_cast<int>(p.size()) != alphabet)
        throw ConfigError(field(path, "p"), "needs " + std::to_string(alphabet) + " entries (one per symbol)");
      for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] < 0.0) throw ConfigError(item(field(path, "p"), i), "must be >= 0");
      return ErgodicMeasureSpec::bernoulli(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
    }
    if (type == "markov") {
      allow_keys(spec, path, {"type", "q"});
      const std::string qpath = field(path, "q");
      const json& qj = need(spec, path, "q");
      if (!qj.is_array() || static_cast<int>(qj.size()) != alphabet)
        throw ConfigError(qpath, "needs " + std::to_string(alphabet) + " rows (one per symbol)");
      Eigen::MatrixXd q(alphabet, alphabet);
      for (int i = 0; i < alphabet; ++i) {
        const auto row = as_numbers(qj[i], item(qpath, i));
        if (static_cast<int>(row.size()) != alphabet)
          throw ConfigError(item(qpath, i), "needs " + std::to_string(alphabet) + " entries");
        for (int j = 0; j < alphabet; ++j) q(i, j) = row[j];
      }
      return ErgodicMeasureSpec::markov(q);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(field(path, "type"), "unknown measure type '" + type + "' (uniform, bernoulli, markov)");
}

// Reads an optional parameter, writing the resolved value back.
template <typename Read, typename Default>
auto param(json& params, const char* key, Read read, Default def) {
  const std::string path = field("params", key);
  if (const json* v = find(params, key)) return read(*v, path);
  auto value = def();
  params[key] = value;
  return value;
}

std::vector<double> descending_positive(const json& j, const std::string& path, std::size_t min_size) {
  auto v = as_numbers(j, path, min_size);
  for (std::size_t i = 0; i < v.size(); ++i) {
    positive(v[i], item(path, i));
    if (i > 0 && !(v[i] < v[i - 1])) throw ConfigError(item(path, i), "must be strictly below the previous entry");
  }
  return v;
}

void resolve_params(ExperimentConfig& cfg, const ModelSystem* sys) {
  json& p = cfg.params;
  const auto num = [](const json& j, const std::string& path) { return as_number(j, path); };
  const auto integer = [](const json& j, const std::string& path) { return as_int(j, path); };
  const int m0 = sys ? sys->dim() : 0;
  switch (cfg.command) {
    case Command::pressure_curve: {
      allow_keys(p, "params", {"t", "epsilons", "n_range", "methods", "root_tolerance", "mc_horizon", "mc_samples"});
      const auto t = param(p, "t", [&](const json& j, const std::string& path) {
        auto v = as_numbers(j, path);
        for (std::size_t i = 0; i < v.size(); ++i)
          if (v[i] < 0.0 || v[i] > m0) throw ConfigError(item(path, i), "must lie in [0, " + std::to_string(m0) + "]");
        return v;
      }, [&] {
        std::vector<double> v;
        for (int i = 0; i <= 10; ++i) v.push_back(m0 * i / 10.0);
        return v;
      });
      (void)t;
      param(p, "epsilons", [](const json& j, const std::string& path) { return descending_positive(j, path, 1); },
            [] { return std::vector<double>{0.1, 0.05}; });
      param(p, "n_range", [](const json& j, const std::string& path) {
        auto v = as_ints(j, path, 2);
        if (v.size() != 2) throw ConfigError(path, "expected [n_lo, n_hi]");
        if (v[0] < 1) throw ConfigError(item(path, 0), "must be >= 1");
        if (v[1] - v[0] < 3) throw ConfigError(item(path, 1), "window needs at least 4 values of n");
        return v;
      }, [] { return std::vector<long long>{4, 8}; });
      bool sft_ok = true;
      try {
        locally_constant_weights(*sys, 0.0);
      } catch (const Error&) {
        sft_ok = false;
      }
      param(p, "methods", [&](const json& j, const std::string& path) {
        if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of method names");
        std::vector<std::string> v;
        for (std::size_t i = 0; i < j.size(); ++i) {
          const auto m = as_string(j[i], item(path, i));
          if (m != "separated-set" && m != "sft-exact" && m != "measure-identity")
            throw ConfigError(item(path, i), "unknown method '" + m + "' (separated-set, sft-exact, measure-identity)");
          if (m == "sft-exact" && !sft_ok) throw ConfigError(item(path, i), "sft-exact needs co-ordered affine branches");
          if (m == "measure-identity" && cfg.measure.is_null()) throw ConfigError(item(path, i), "measure-identity needs a measure");
          if (std::find(v.begin(), v.end(), m) != v.end()) throw ConfigError(item(path, i), "duplicate method");
          v.push_back(m);
        }
        return v;
      }, [&] {
        std::vector<std::string> v{"separated-set"};
        if (sft_ok) v.push_back("sft-exact");
        if (!cfg.measure.is_null()) v.push_back("measure-identity");
        return v;
      });
      const double tol = param(p, "root_tolerance", num, [] { return 0.02; });
      positive(tol, "params.root_tolerance");
      if (param(p, "mc_horizon", integer, [] { return 200LL; }) < 1) throw ConfigError("params.mc_horizon", "must be >= 1");
      if (param(p, "mc_samples", integer, [] { return 400LL; }) < 1) throw ConfigError("params.mc_samples", "must be >= 1");
      break;
    }
    case Command::dimension: {
      allow_keys(p, "params", {"caratheodory_radii", "delta", "local_radii", "local_samples", "mc_horizon", "mc_samples"});
      const bool hs = sys->invertible();
      const auto radii = param(p, "caratheodory_radii",
                               [](const json& j, const std::string& path) { return descending_positive(j, path, 0); },
                               [&] { return hs ? std::vector<double>{} : std::vector<double>{0.05, 0.02}; });
      const double delta = param(p, "delta", num, [] { return 0.1; });
      if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("params.delta", "must lie in (0, 1)");
      const auto local = param(p, "local_radii",
                               [](const json& j, const std::string& path) { return descending_positive(j, path, 0); },
                               [] { return std::vector<double>{}; });
      if (hs && !radii.empty()) throw ConfigError("params.caratheodory_radii", "not available for linear-horseshoe");
      if (hs && !local.empty()) throw ConfigError("params.local_radii", "not available for linear-horseshoe");
      if (local.size() == 1) throw ConfigError("params.local_radii", "needs at least 2 radii");
      if (param(p, "local_samples", integer, [] { return 200LL; }) < 1) throw ConfigError("params.local_samples", "must be >= 1");
      if (param(p, "mc_horizon", integer, [] { return 200LL; }) < 1) throw ConfigError("params.mc_horizon", "must be >= 1");
      if (param(p, "mc_samples", integer, [] { return 400LL; }) < 1) throw ConfigError("params.mc_samples", "must be >= 1");
      break;
    }
    case Command::lyapunov: {
      allow_keys(p, "params", {"n", "samples"});
      if (param(p, "n", integer, [] { return 200LL; }) < 1) throw ConfigError("params.n", "must be >= 1");
      if (param(p, "samples", integer, [] { return 400LL; }) < 2) throw ConfigError("params.samples", "must be >= 2");
      break;
    }
    case Command::box_count: {
      allow_keys(p, "params", {"set", "depth", "stable_depth", "deltas", "delta_base", "k_range", "window"});
      const bool hs = sys->invertible();
      const auto set = param(p, "set", [](const json& j, const std::string& path) { return as_string(j, path); },
                             [&] { return std::string(hs ? "horseshoe" : "repeller"); });
      if (hs ? (set != "horseshoe" && set != "unstable-slice" && set != "stable-slice") : set != "repeller")
        throw ConfigError("params.set", hs ? "expected horseshoe, unstable-slice or stable-slice" : "expected repeller");
      const auto depth = param(p, "depth", integer, [&] { return hs && set == "horseshoe" ? 10LL : 12LL; });
      if (depth < 1) throw ConfigError("params.depth", "must be >= 1");
      const double words = std::pow(static_cast<double>(sys->alphabet_size()), static_cast<double>(depth));
      if (words > kEnumerationLimit) throw ConfigError("params.depth", "more than 2^24 cylinders");
      if (hs && set == "horseshoe") {
        const auto sd = param(p, "stable_depth", integer, [] { return 8LL; });
        if (sd < 1) throw ConfigError("params.stable_depth", "must be >= 1");
        if (words * std::pow(2.0, static_cast<double>(sd)) > kEnumerationLimit)
          throw ConfigError("params.stable_depth", "more than 2^24 points");
      } else if (find(p, "stable_depth")) {
        throw ConfigError("params.stable_depth", "only used for the horseshoe set");
      }
      if (find(p, "deltas")) {
        if (find(p, "delta_base") || find(p, "k_range"))
          throw ConfigError("params.deltas", "give either deltas or delta_base with k_range");
        descending_positive(p["deltas"], "params.deltas", 3);
      } else {
        const double base = param(p, "delta_base", num, [] { return 2.0; });
        if (!(base > 1.0)) throw ConfigError("params.delta_base", "must be > 1");
        const auto k = param(p, "k_range", [](const json& j, const std::string& path) {
          auto v = as_ints(j, path, 2);
          if (v.size() != 2) throw ConfigError(path, "expected [k_lo, k_hi]");
          if (v[1] - v[0] < 2) throw ConfigError(item(path, 1), "needs at least 3 scales");
          return v;
        }, [] { return std::vector<long long>{2, 12}; });
        (void)k;
      }
      if (param(p, "window", integer, [] { return 0LL; }) < 0) throw ConfigError("params.window", "must be >= 0");
      break;
    }
    case Command::horseshoe_approx: {
      allow_keys(p, "params", {"n_list", "eps", "pivot", "geometry"});
      param(p, "n_list", [](const json& j, const std::string& path) {
        auto v = as_ints(j, path);
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (v[i] < 1) throw ConfigError(item(path, i), "must be >= 1");
          if (i > 0 && v[i] <= v[i - 1]) throw ConfigError(item(path, i), "must be strictly increasing");
        }
        return v;
      }, [] { return std::vector<long long>{10, 20}; });
      positive(param(p, "eps", num, [] { return 0.05; }), "params.eps");
      const auto pivot = param(p, "pivot", integer, [] { return 0LL; });
      if (pivot < 0 || pivot >= sys->alphabet_size()) throw ConfigError("params.pivot", "not a symbol of the coding");
      if (find(p, "geometry")) {
        const auto geom = resolve_system(p["geometry"], "params.geometry");
        if (geom.alphabet_size() != sys->alphabet_size())
          throw ConfigError("params.geometry", "alphabet differs from the system coding");
      } else {
        p["geometry"] = cfg.system;
      }
      break;
    }
    case Command::verify_identities: {
      allow_keys(p, "params", {"triples", "horizon", "caratheodory"});
      if (param(p, "triples", integer, [] { return 1000LL; }) < 1) throw ConfigError("params.triples", "must be >= 1");
      if (param(p, "horizon", integer, [] { return 30LL; }) < 1) throw ConfigError("params.horizon", "must be >= 1");
      param(p, "caratheodory", [](const json& j, const std::string& path) { return as_bool(j, path); }, [] { return true; });
      break;
    }
  }
}

}  // namespace

json ExperimentConfig::resolved() const {
  json doc;
  doc["command"] = to_string(command);
  if (!system.is_null()) doc["system"] = system;
  if (!measure.is_null()) doc["measure"] = measure;
  doc["params"] = params;
  if (seed) doc["seed"] = *seed;
  if (!output_dir.empty()) doc["output_dir"] = output_dir;
  return doc;
}

ModelSystem build_system(const json& spec, const std::string& path) {
  json copy = spec;
  return resolve_system(copy, path);
}

ErgodicMeasureSpec build_measure(const json& spec, int alphabet, const std::string& path) {
  json copy = spec;
  return resolve_measure(copy, path, alphabet);
}

bool needs_seed(const ExperimentConfig& cfg) {
  switch (cfg.command) {
    case Command::lyapunov:
    case Command::verify_identities:
      return true;
    case Command::dimension: {
      const auto sys = build_system(cfg.system);
      return !sys.affine() || !cfg.params.value("local_radii", json::array()).empty();
    }
    case Command::pressure_curve: {
      const auto methods = cfg.params.value("methods", json::array());
      const bool mi = std::find(methods.begin(), methods.end(), "measure-identity") != methods.end();
      return mi && !build_system(cfg.system).affine();
    }
    default:
      return false;
  }
}

ExperimentConfig parse_config(const json& doc) {
  require_object(doc, "");
  allow_keys(doc, "", {"command", "system", "measure", "params", "seed", "output_dir"});
  ExperimentConfig cfg;
  const std::string cmd = as_string(need(doc, "", "command"), "command");
  const std::vector<Command> all = {Command::pressure_curve, Command::dimension, Command::lyapunov,
                                    Command::box_count, Command::horseshoe_approx, Command::verify_identities};
  auto it = std::find_if(all.begin(), all.end(), [&](Command c) { return to_string(c) == cmd; });
  if (it == all.end())
    throw ConfigError("command", "unknown command '" + cmd +
                                     "' (pressure-curve, dimension, lyapunov, box-count, horseshoe-approx, verify-identities)");
  cfg.command = *it;

  std::optional<ModelSystem> sys;
  if (cfg.command == Command::verify_identities) {
    if (find(doc, "system")) throw ConfigError("system", "not used by verify-identities");
    if (find(doc, "measure")) throw ConfigError("measure", "not used by verify-identities");
  } else {
    cfg.system = need(doc, "", "system");
    sys = resolve_system(cfg.system, "system");
    const bool wants = cfg.command == Command::dimension || cfg.command == Command::lyapunov ||
                       cfg.command == Command::horseshoe_approx;
    if (const json* m = find(doc, "measure")) {
      if (cfg.command == Command::box_count) throw ConfigError("measure", "not used by box-count");
      cfg.measure = *m;
      const auto mu = resolve_measure(cfg.measure, "measure", sys->alphabet_size());
      try {
        check_compatible(*sys, mu);
      } catch (const Error& e) {
        throw ConfigError("measure", e.what());
      }
    } else if (wants) {
      throw ConfigError("measure", "required by " + cmd);
    }
  }

  if (const json* p = find(doc, "params")) {
    require_object(*p, "params");
    cfg.params = *p;
  } else {
    cfg.params = json::object();
  }
  resolve_params(cfg, sys ? &*sys : nullptr);

  if (const json* s = find(doc, "seed")) {
    if (!s->is_number_unsigned()) throw ConfigError("seed", "expected a non-negative 64-bit integer");
    cfg.seed = s->get<std::uint64_t>();
  }
  if (const json* o = find(doc, "output_dir")) {
    cfg.output_dir = as_string(*o, "output_dir");
    if (cfg.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

std::string config_hash(const ExperimentConfig& config, bool geometric_check) {
  json doc = config.resolved();
  doc.erase("output_dir");
  doc.erase("seed");
  std::string text = doc.dump();
  text += "\nseed=" + (config.seed ? std::to_string(*config.seed) : std::string("none"));
  text += "\nversion=" + tool_version();
  text += "\ngeometric_check=" + std::string(geometric_check ? "true" : "false");
  return sha256_hex(text);
}

namespace {

// ---------------------------------------------------------------------------
// Commands

Cell num(double v) { return v; }
Cell text(std::string s) { return s; }

Table quantity_table(std::string name) { return Table{std::move(name), {"quantity", "value"}, {}}; }

std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }

void pressure_curve(const ExperimentConfig& cfg, const RunOptions& opt, std::vector<Table>& out) {
  const auto sys = build_system(cfg.system);
  const json& p = cfg.params;
  const auto ts = doubles(p["t"]);
  const auto eps = doubles(p["epsilons"]);
  const int n_lo = p["n_range"][0].get<int>();
  const int n_hi = p["n_range"][1].get<int>();
  const double root_tol = p["root_tolerance"].get<double>();
  const auto methods = p["methods"].get<std::vector<std::string>>();

  Table curve{"pressure_curve.csv", {"t", "P", "method", "epsilon", "n_lo", "n_hi", "residual"}, {}};
  Table roots{"pressure_roots.csv", {"method", "root", "bracket_lo", "bracket_hi", "status"}, {}};
  Table parts{"pressure_partition.csv", {"t", "epsilon", "n", "log_partition", "slope", "residual"}, {}};

  // Sorted copy of the grid for root location on tabulated curves.
  std::vector<std::size_t> order(ts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ts[a] < ts[b]; });

  for (const auto& m : methods) {
    if (m == "separated-set") {
      std::vector<Potential> pots;
      for (double t : ts) pots.push_back(SingularValuedPotential{t});
      const auto est = pressure_estimates(sys, pots, eps, n_lo, n_hi, opt.threads);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto& d = est[i].diagnostics;
        curve.add({num(ts[i]), num(est[i].value), text(m), num(d.epsilons.back()), num(n_lo), num(n_hi),
                   num(est[i].residual())});
        for (std::size_t e = 0; e < d.epsilons.size(); ++e)
          for (int n = n_lo; n <= n_hi; ++n)
            parts.add({num(ts[i]), num(d.epsilons[e]), num(n), num(d.log_partition[e][n - n_lo]), num(d.slopes[e]),
                       num(d.residuals[e])});
      }
      // Root of the tabulated curve: grid points within tolerance win, else linear interpolation.
      std::optional<std::array<double, 3>> root;
      for (auto it = order.rbegin(); it != order.rend() && !root; ++it)
        if (std::abs(est[*it].value) <= root_tol) root = std::array<double, 3>{ts[*it], ts[*it], ts[*it]};
      for (std::size_t k = 0; k + 1 < order.size() && !root; ++k) {
        const double t0 = ts[order[k]], t1 = ts[order[k + 1]];
        const double p0 = est[order[k]].value, p1 = est[order[k + 1]].value;
        if ((p0 > 0) != (p1 > 0)) root = std::array<double, 3>{t0 + (t1 - t0) * p0 / (p0 - p1), t0, t1};
      }
      if (root) roots.add({text(m), num((*root)[0]), num((*root)[1]), num((*root)[2]), text("ok")});
      else roots.add({text(m), {}, {}, {}, text("no sign change on the t grid")});
    } else {
      std::function<double(double)> fn;
      if (m == "sft-exact") {
        fn = [&sys](double t) {
          const Eigen::VectorXd w = locally_constant_weights(sys, t);
          return sft_pressure(sys.coding(), std::span<const double>(w.data(), w.size())).value;
        };
      } else {
        const auto mu = build_measure(cfg.measure, sys.alphabet_size());
        fn = measure_pressure_function(sys, mu, p["mc_horizon"].get<int>(), p["mc_samples"].get<int>(),
                                       cfg.seed.value_or(0), opt.threads);
      }
      for (double t : ts) curve.add({num(t), num(fn(t)), text(m), {}, {}, {}, num(0.0)});
      try {
        const auto r = bowen_root(fn, sys.dim(), 1e-10);
        roots.add({text(m), num(r.value), num(r.diagnostics.at("bracket_lo")), num(r.diagnostics.at("bracket_hi")),
                   text("ok")});
      } catch (const BracketError&) {
        roots.add({text(m), {}, {}, {}, text("no sign change on [0, m0]")});
      }
    }
  }
  out.push_back(std::move(curve));
  out.push_back(std::move(roots));
  if (!parts.rows.empty()) out.push_back(std::move(parts));
}


void dimension_command(const ExperimentConfig& cfg, const RunOptions& opt, std::vector<Table>& out) {
  const auto sys = build_system(cfg.system);
  const auto mu = build_measure(cfg.measure, sys.alphabet_size());
  const json& p = cfg.params;
  const int horizon = p["mc_horizon"].get<int>();
  const int samples = p["mc_samples"].get<int>();
  const std::uint64_t seed = cfg.seed.value_or(0);
  Table t = quantity_table("dimension.csv");

  const double h = measure_entropy(mu);
  t.add({text("entropy"), num(h)});
  Eigen::VectorXd lam;
  if (auto exact = exact_lyapunov_exponents(sys, mu)) {
    lam = *exact;
    for (Eigen::Index i = 0; i < lam.size(); ++i) t.add({text("lambda_" + std::to_string(i + 1)), num(lam(i))});
  } else {
    const auto est = lyapunov_exponents(sys, mu, horizon, samples, seed, opt.threads);
    lam = est.exponents;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      t.add({text("lambda_" + std::to_string(i + 1)), num(lam(i))});
      t.add({text("lambda_" + std::to_string(i + 1) + "_stderr"), num(est.standard_errors(i))});
    }
  }

  if (sys.invertible()) {
    const double hu = h / lam(0), hs = -h / lam(1);
    t.add({text("unstable_part"), num(hu)});
    t.add({text("stable_part"), num(hs)});
    t.add({text("ledrappier_young"), num(ledrappier_young(h, lam(0), lam(1)))});
    out.push_back(std::move(t));
    return;
  }

  const double dl = lyapunov_dimension(h, lam);
  t.add({text("lyapunov_dimension"), num(dl)});
  const auto root = bowen_root(measure_pressure_function(sys, mu, horizon, samples, seed, opt.threads), sys.dim(), 1e-12);
  t.add({text("bowen_root"), num(root.value)});
  t.add({text("bowen_gap"), num(std::abs(root.value - dl))});

  const auto radii = doubles(p["caratheodory_radii"]);
  if (!radii.empty()) {
    CaratheodoryOptions co;
    co.threads = opt.threads;
    const double delta = p["delta"].get<double>();
    double lo = INFINITY, hi = -INFINITY;
    for (double r : radii) {
      const auto rep = caratheodory_dimension(sys, MeasureTypical{mu, delta}, r, co);
      t.add({text("caratheodory(r=" + format_number(r) + ")"), num(rep.value)});
      t.add({text("caratheodory_depth(r=" + format_number(r) + ")"), num(rep.diagnostics.at("depth"))});
      lo = std::min(lo, rep.value);
      hi = std::max(hi, rep.value);
    }
    t.add({text("caratheodory_spread"), num(hi - lo)});
  }

  const auto local = doubles(p["local_radii"]);
  if (!local.empty()) {
    const auto rep = local_dimension(sys, mu, local, p["local_samples"].get<int>(), seed, opt.threads);
    t.add({text("local_dimension"), num(rep.value)});
    t.add({text("local_dispersion"), num(rep.diagnostics.at("dispersion"))});
    t.add({text("local_standard_error"), num(rep.diagnostics.at("standard_error"))});
  }
  out.push_back(std::move(t));
}

void lyapunov_command(const ExperimentConfig& cfg, const RunOptions& opt, std::vector<Table>& out) {
  const auto sys = build_system(cfg.system);
  const auto mu = build_measure(cfg.measure, sys.alphabet_size());
  const int n = cfg.params["n"].get<int>();
  const int samples = cfg.params["samples"].get<int>();
  const auto est = lyapunov_exponents(sys, mu, n, samples, cfg.seed.value_or(0), opt.threads);
  const auto exact = exact_lyapunov_exponents(sys, mu);
  Table t{"lyapunov.csv", {"index", "exponent", "standard_error", "exact", "abs_error", "n", "samples"}, {}};
  for (Eigen::Index i = 0; i < est.exponents.size(); ++i) {
    Cell ex, err;
    if (exact) {
      ex = (*exact)(i);
      err = std::abs((*exact)(i) - est.exponents(i));
    }
    t.add({num(static_cast<double>(i + 1)), num(est.exponents(i)), num(est.standard_errors(i)), ex, err, num(n),
           num(samples)});
  }
  out.push_back(std::move(t));
}

void box_count_command(const ExperimentConfig& cfg, const RunOptions& opt, std::vector<Table>& out) {
  const auto sys = build_system(cfg.system);
  const json& p = cfg.params;
  const std::string set = p["set"].get<std::string>();
  const int depth = p["depth"].get<int>();
  std::vector<double> deltas;
  if (p.contains("deltas")) {
    deltas = doubles(p["deltas"]);
  } else {
    const double base = p["delta_base"].get<double>();
    for (int k = p["k_range"][0].get<int>(); k <= p["k_range"][1].get<int>(); ++k) deltas.push_back(std::pow(base, -k));
  }
  std::vector<Point> pts;
  if (set == "repeller") pts = cylinder_points(sys, depth);
  else if (set == "unstable-slice") pts = horseshoe_unstable_slice(sys, depth);
  else if (set == "stable-slice") pts = horseshoe_stable_slice(sys, depth);
  else pts = product_points(horseshoe_unstable_slice(sys, depth), horseshoe_stable_slice(sys, p["stable_depth"].get<int>()));

  const auto bd = box_dimension(pts, deltas, p["window"].get<int>(), opt.threads);
  Table counts{"box_counts.csv", {"delta", "count", "log_inverse_delta", "log_count"}, {}};
  for (std::size_t i = 0; i < bd.deltas.size(); ++i)
    counts.add({num(bd.deltas[i]), num(bd.counts[i]), num(-std::log(bd.deltas[i])), num(std::log(bd.counts[i]))});
  Table dim = quantity_table("box_dimension.csv");
  dim.add({text("points"), num(static_cast<double>(pts.size()))});
  dim.add({text("lower"), num(bd.lower.value)});
  dim.add({text("upper"), num(bd.upper.value)});
  dim.add({text("slope"), num(bd.slope)});
  dim.add({text("residual"), num(bd.residual)});
  out.push_back(std::move(counts));
  out.push_back(std::move(dim));
}

void horseshoe_command(const ExperimentConfig& cfg, const RunOptions& opt, std::vector<Table>& out) {
  const auto sys = build_system(cfg.system);
  const auto mu = build_measure(cfg.measure, sys.alphabet_size());
  const json& p = cfg.params;
  const auto geom = build_system(p["geometry"], "params.geometry");
  const auto n_list = p["n_list"].get<std::vector<int>>();
  const double eps = p["eps"].get<double>();
  const int pivot = p["pivot"].get<int>();
  const auto rep = convergence_report(sys.coding(), mu, geom, n_list, eps, pivot, opt.threads);

  Table t{"horseshoe.csv",
          {"n", "eps", "blocks", "entropy", "dimension", "target", "gap", "entropy_gap", "correction", "status"},
          {}};
  for (const auto& r : rep.rows) {
    if (r.feasible)
      t.add({num(r.n), num(r.eps), num(r.blocks), num(r.entropy), num(r.dimension), num(r.target), num(r.gap()),
             num(r.entropy_gap()), num(r.correction), text("ok")});
    else
      t.add({num(r.n), num(r.eps), {}, {}, {}, num(r.target), {}, {}, {}, text(r.message)});
  }
  out.push_back(std::move(t));

  if (!opt.geometric_check) return;
  Table g{"geometric_check.csv", {"n", "dimension", "box_unstable", "box_stable", "box_total", "status"}, {}};
  auto diag = [](const DimensionReport& d, const char* key) -> Cell {
    auto it = d.diagnostics.find(key);
    return it == d.diagnostics.end() ? Cell{} : Cell{it->second};
  };
  for (const auto& r : rep.rows) {
    if (!r.feasible) continue;
    try {
      const auto hs = extract_horseshoe(sys.coding(), mu, r.n, eps, pivot, opt.threads);
      const auto d = horseshoe_dimension(hs, geom, true, opt.threads);
      const bool done = d.diagnostics.at("geometric_check") > 0.0;
      g.add({num(r.n), num(d.value), diag(d, "box_unstable"), diag(d, "box_stable"), diag(d, "box_total"),
             text(done ? "ok" : "skipped: blocks not enumerated or too few points")});
    } catch (const Error& e) {
      g.add({num(r.n), {}, {}, {}, {}, text(e.what())});
    }
  }
  out.push_back(std::move(g));
}

bool identities_command(const ExperimentConfig& cfg, const RunOptions& opt, std::vector<Table>& out) {
  IdentityOptions io;
  io.triples = cfg.params["triples"].get<int>();
  io.horizon = cfg.params["horizon"].get<int>();
  io.caratheodory = cfg.params["caratheodory"].get<bool>();
  io.seed = cfg.seed.value_or(0);
  io.threads = opt.threads;
  const auto checks = verify_identities(io);
  Table t{"identities.csv", {"check", "passed", "value", "tolerance", "detail"}, {}};
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    t.add({text(c.name), text(c.passed ? "true" : "false"), num(c.value), num(c.tolerance), text(c.detail)});
  }
  out.push_back(std::move(t));
  return ok;
}

}  // namespace

ReportBundle compute_experiment(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentConfig cfg = config;
  if (options.seed) cfg.seed = options.seed;
  if (needs_seed(cfg) && !cfg.seed) throw ConfigError("seed", "required by " + to_string(cfg.command) + " (or pass --seed)");
  ReportBundle b;
  switch (cfg.command) {
    case Command::pressure_curve: pressure_curve(cfg, options, b.tables); break;
    case Command::dimension: dimension_command(cfg, options, b.tables); break;
    case Command::lyapunov: lyapunov_command(cfg, options, b.tables); break;
    case Command::box_count: box_count_command(cfg, options, b.tables); break;
    case Command::horseshoe_approx: horseshoe_command(cfg, options, b.tables); break;
    case Command::verify_identities: b.passed = identities_command(cfg, options, b.tables); break;
  }
  for (const auto& t : b.tables) check_finite(t);

  json manifest;
  manifest["command"] = to_string(cfg.command);
  manifest["config"] = cfg.resolved();
  manifest["config"].erase("output_dir");
  manifest["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
  manifest["version"] = tool_version();
  manifest["geometric_check"] = options.geometric_check;
  manifest["config_hash"] = config_hash(cfg, options.geometric_check);
  json files = json::object();
  for (const auto& t : b.tables) files[t.name] = sha256_hex(to_csv(t));
  manifest["files"] = files;
  if (cfg.command == Command::verify_identities) manifest["passed"] = b.passed;
  b.manifest = std::move(manifest);
  return b;
}

void write_bundle(ReportBundle& bundle, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& body) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << body;
    f.close();
    if (!f) throw IoError("write to " + path.string() + " failed");
  };
  for (const auto& t : bundle.tables) write(t.name, to_csv(t));
  write("manifest.json", bundle.manifest.dump(2) + "\n");
}

ReportBundle run_experiment(ExperimentConfig config, const RunOptions& options) {
  std::filesystem::path dir;
  if (options.out) dir = *options.out;
  else if (!config.output_dir.empty()) dir = config.output_dir;
  else throw ConfigError("output_dir", "required (or pass --out)");
  auto bundle = compute_experiment(config, options);
  write_bundle(bundle, dir);
  return bundle;
}

}  // namespace lydim
