#include <sstream>
#include <string>

#include "doctest.h"
#include "ncdp/analytic.hpp"
#include "ncdp/common.hpp"
#include "ncdp/experiment.hpp"

using namespace ncdp;

namespace {

ExperimentConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string csv_of(const ExperimentConfig& cfg) {
  std::ostringstream out;
  write_csv(run(cfg), out);
  return out.str();
}

bool has_error(const std::vector<Diagnostic>& d, const std::string& field, const std::string& text = "") {
  for (const auto& x : d) {
    if (x.level == Diagnostic::Level::Error && x.field == field && x.message.find(text) != std::string::npos)
      return true;
  }
  return false;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = from_text(
      "# comment\n"
      "experiment = throughput-nofeedback\n"
      "\n"
      "S=20   # trailing comment\n"
      "seed = 0x10\n"
      "threads = 3\n"
      "G = 0.2:0.6:0.2, 1.0\n");
  CHECK(cfg.experiment == "throughput-nofeedback");
  CHECK(cfg.seed == 16);
  CHECK(cfg.threads == 3);
  CHECK(cfg.entries.at("S") == "20");
  CHECK(cfg.entries.at("G") == "0.2:0.6:0.2, 1.0");

  CHECK_THROWS_AS(from_text("experiment\n"), ConfigError);
  CHECK_THROWS_AS(from_text("= 3\n"), ConfigError);
  CHECK_THROWS_AS(from_text("seed = -1\n"), ConfigError);
  try {
    from_text("S = 3\nthreads = x\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("config:2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/ncdp.cfg"), ConfigError);
}

TEST_CASE("overrides replace file values") {
  auto cfg = from_text("experiment = analytic-sweep\nS = 50\n");
  apply_override(cfg, "S=100");
  apply_override(cfg, "seed=7");
  apply_override(cfg, " n = 4 ");
  CHECK(cfg.entries.at("S") == "100");
  CHECK(cfg.entries.at("n") == "4");
  CHECK(cfg.seed == 7);
  CHECK_THROWS_AS(apply_override(cfg, "S"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "=1"), ConfigError);
}

TEST_CASE("validation diagnostics") {
  SUBCASE("valid configs are clean") {
    for (const auto& name : experiment_names()) {
      ExperimentConfig cfg;
      cfg.experiment = name;
      if (name == "fer" || name == "async-fer") cfg.set("ebn0", "8");
      CHECK_MESSAGE(validate(cfg).empty(), name);
    }
  }
  SUBCASE("replicas exceed slots") {
    auto cfg = from_text("experiment = throughput-arq\nd = 5\nS = 4\n");
    CHECK(has_error(validate(cfg), "d", "replicas exceed slots"));
  }
  SUBCASE("full-PHY runs need an Eb/N0 grid") {
    CHECK(has_error(validate(from_text("experiment = fer\n")), "ebn0"));
    CHECK(has_error(validate(from_text("experiment = async-fer\n")), "ebn0"));
  }
  SUBCASE("collision size cap") {
    CHECK(has_error(validate(from_text("experiment = fer\nebn0 = 8\nk = 9\n")), "k"));
  }
  SUBCASE("bad names and values") {
    CHECK(has_error(validate(from_text("experiment = nope\n")), "experiment"));
    CHECK(has_error(validate(ExperimentConfig{}), "experiment"));
    CHECK(has_error(validate(from_text("experiment = energy\nfoo = 1\n")), "foo"));
    CHECK(has_error(validate(from_text("experiment = energy\nG = a\n")), "G"));
    CHECK(has_error(validate(from_text("experiment = energy\nG = 1:0:0.1\n")), "G"));
    CHECK(has_error(validate(from_text("experiment = energy\npolicy = fixed-p\np = 1.5\n")), "p"));
    CHECK(has_error(validate(from_text("experiment = energy\nseries = ncdp-x\n")), "series"));
    CHECK(has_error(validate(from_text("experiment = fer\nebn0 = 8\nstrategy = XY\n")), "strategy"));
    CHECK(has_error(validate(from_text("experiment = fer\nebn0 = 8\nrolloff = 2\n")), "link"));
  }
  SUBCASE("run refuses invalid configs and names the field") {
    try {
      run(from_text("experiment = throughput-arq\nd = 5\nS = 4\n"));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("d: replicas exceed slots") != std::string::npos);
    }
  }
}

TEST_CASE("analytic sweep reproduces the closed form exactly") {
  const auto cfg = from_text("experiment = analytic-sweep\nS = 100\nn = 8\nG = 0.1:1.5:0.1\n");
  const auto res = run(cfg);
  const auto rows = res.select("analytic", "throughput");
  REQUIRE(rows.size() == 15);
  for (const auto& r : rows) {
    CHECK(r.value == analytic::throughput(r.sweep_value, 100, 8));
    CHECK(r.std_error == 0.0);
  }
  CHECK(res.find("analytic", "prob_active_le_S", 0.8).value == analytic::prob_active_at_most_slots(0.8, 100));
  const std::string csv = csv_of(cfg);
  CHECK(csv.rfind("sweep_var,sweep_value,series,metric,value,std_error,trials\n", 0) == 0);
}

TEST_CASE("protocol runs are reproducible and thread-count independent") {
  auto cfg = from_text(
      "experiment = throughput-nofeedback\nS = 20\ntrials = 40\nG = 0.4, 0.9\n"
      "series = sa, ncdp-uniform, ncdp-p0.1, ncdp-d2, crdsa-d2\n");
  cfg.threads = 1;
  const std::string one = csv_of(cfg);
  CHECK(one == csv_of(cfg));
  cfg.threads = 4;
  CHECK(one == csv_of(cfg));
  cfg.seed = 2;
  CHECK(one != csv_of(cfg));

  const auto res = run(cfg);
  for (const auto& s : {"sa", "ncdp-uniform", "ncdp-p0.1", "ncdp-d2", "crdsa-d2"}) {
    const auto& phi = res.find(s, "throughput", 0.9);
    CHECK(phi.trials == 40);
    CHECK(phi.std_error > 0.0);
    const double load = res.find(s, "offered_load", 0.9).value;
    CHECK(load == doctest::Approx(0.9).epsilon(0.1));
    CHECK(phi.value == doctest::Approx(load * (1 - res.find(s, "loss_rate", 0.9).value)).epsilon(1e-9));
  }
}

TEST_CASE("physical-layer runs are reproducible and thread-count independent") {
  auto fer = from_text(
      "experiment = async-fer\nebn0 = 10\ntrials = 6\nchunk = 2\nk = 2\nstrategy = MD, EC, ideal\n");
  fer.threads = 1;
  const std::string a = csv_of(fer);
  fer.threads = 3;
  CHECK(a == csv_of(fer));
  const auto res = run(fer);
  CHECK(res.rows.size() == 3);
  CHECK(res.find("ideal", "fer", 10).trials == 6);

  auto mse = from_text("experiment = estimation-mse\nesn0 = 10\ntrials = 4\nchunk = 3\nk = 1, 2\n");
  mse.threads = 1;
  const std::string b = csv_of(mse);
  mse.threads = 2;
  CHECK(b == csv_of(mse));
  const auto est = run(mse);
  CHECK(est.find("k1", "mse_freq", 10).trials == 4);
  CHECK(est.find("k2", "mse_amp", 10).trials == 8);
  CHECK(est.find("k1", "mse_freq", 10).value < 1e-4);
}

TEST_CASE("parallel_for visits every index once and propagates failures") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw ParameterError("boom");
                               }),
                  ParameterError);
}
