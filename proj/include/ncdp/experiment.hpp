#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ncdp {

/// Flat key=value experiment description. Keys are validated when the
/// experiment is resolved, so `entries` may hold anything.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 picks the hardware concurrency
  std::map<std::string, std::string> entries;

  void set(const std::string& key, const std::string& value);
};

/// Lines of `key = value`; `#` starts a comment. Throws ConfigError naming
/// the line on malformed input.
ExperimentConfig parse_config(std::istream& in, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);
/// Apply one `key=value` override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

struct Diagnostic {
  enum class Level { Warning, Error } level = Level::Error;
  std::string field;
  std::string message;
};

std::vector<Diagnostic> validate(const ExperimentConfig& cfg);

struct ResultRow {
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string series;
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t trials = 0;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<ResultRow> rows;

  /// First row matching series and metric at a sweep value; throws if absent.
  const ResultRow& find(const std::string& series, const std::string& metric, double sweep_value) const;
  std::vector<ResultRow> select(const std::string& series, const std::string& metric) const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Runs a validated experiment; throws ConfigError listing every error otherwise.
ExperimentResult run(const ExperimentConfig& cfg, const ProgressFn& progress = {});

void write_csv(const ExperimentResult& result, std::ostream& out);

/// Names accepted in the `experiment` field.
const std::vector<std::string>& experiment_names();

/// Runs f(0..n-1) on a pool of threads. Work is claimed dynamically but each
/// index writes only its own result, so output never depends on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f);

}  // namespace ncdp
