#include <chrono>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ncdp/common.hpp"
#include "ncdp/experiment.hpp"

namespace {

int run_command(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_path, const std::string& seed) {
  ncdp::ExperimentConfig cfg = ncdp::load_config(config_path);
  for (const auto& o : overrides) ncdp::apply_override(cfg, o);
  if (!seed.empty()) cfg.set("seed", seed);

  bool failed = false;
  for (const auto& d : ncdp::validate(cfg)) {
    const bool err = d.level == ncdp::Diagnostic::Level::Error;
    failed |= err;
    std::cerr << (err ? "error: " : "warning: ") << d.field << ": " << d.message << '\n';
  }
  if (failed) return 2;

  const auto start = std::chrono::steady_clock::now();
  std::cerr << "running " << cfg.experiment << " (seed " << cfg.seed << ")\n";
  const auto result = ncdp::run(cfg, [](const std::string& msg) { std::cerr << msg << '\n'; });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (out_path.empty()) {
    ncdp::write_csv(result, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "error: cannot write '" << out_path << "'\n";
      return 1;
    }
    ncdp::write_csv(result, out);
    if (!out.flush()) {
      std::cerr << "error: write to '" << out_path << "' failed\n";
      return 1;
    }
  }
  std::cerr << result.rows.size() << " rows in " << secs << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network-coded diversity protocol simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, seed;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "key = value experiment file")->required();
  run->add_option("--set", overrides, "Override a config entry (key=value), repeatable");
  run->add_option("--out", out_path, "CSV output file (default: standard output)");
  run->add_option("--seed", seed, "Master seed, overrides the config");

  auto* list = app.add_subcommand("list", "List experiment names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (list->parsed()) {
    for (const auto& n : ncdp::experiment_names()) std::cout << n << '\n';
    return 0;
  }
  try {
    return run_command(config_path, overrides, out_path, seed);
  } catch (const ncdp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
