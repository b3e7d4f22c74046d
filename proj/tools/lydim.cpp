// lydim: run a config-driven experiment and write CSV tables plus manifest.json.
//
// Exit codes: 0 ok, 1 verify-identities failure, 2 config or usage error,
// 3 computation error, 4 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "lydim/errors.hpp"
#include "lydim/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov, Caratheodory and box dimensions of model repellers and horseshoes"};
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool geometric_check = false;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides seed)");
  app.add_option("--threads", threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  app.add_flag("--geometric-check", geometric_check, "Box-count realized horseshoes");
  app.set_version_flag("--version", lydim::tool_version());

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  lydim::RunOptions opt;
  if (*out_opt) opt.out = out_dir;
  if (*seed_opt) opt.seed = seed;
  opt.threads = threads;
  opt.geometric_check = geometric_check;

  try {
    const auto config = lydim::load_config(config_path);
    const auto bundle = lydim::run_experiment(config, opt);
    for (const auto& t : bundle.tables) std::cout << t.name << ": " << t.rows.size() << " rows\n";
    if (!bundle.passed) {
      std::cerr << "lydim: identity checks failed (see identities.csv)\n";
      return 1;
    }
    return 0;
  } catch (const lydim::ConfigError& e) {
    std::cerr << "lydim: config error: " << e.what() << "\n";
    return 2;
  } catch (const lydim::IoError& e) {
    std::cerr << "lydim: I/O error: " << e.what() << "\n";
    return 4;
  } catch (const lydim::Error& e) {
    std::cerr << "lydim: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "lydim: " << e.what() << "\n";
    return 3;
  }
}
