#include "ncdp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ncdp/analytic.hpp"
#include "ncdp/common.hpp"
#include "ncdp/estimation.hpp"
#include "ncdp/link.hpp"
#include "ncdp/mac.hpp"

namespace ncdp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& s, long long& out) {
  try {
    std::size_t used = 0;
    out = std::stoll(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "experiment", "seed",      "threads",   "S",        "n",         "p",          "d",
      "B",          "G",         "trials",    "warmup",   "protocol",  "series",     "policy",
      "feedback",   "decode",    "max_active", "crdsa_iterations", "k", "ebn0",    "esn0",
      "delay_max",  "strategy",  "csi",       "rolloff",  "span",      "oversampling", "freq_max",
      "amplitude_sigma_db", "beta", "em_iterations", "restarts", "chunk"};
  return keys;
}

// Reads typed values from the entries, collecting every problem instead of
// stopping at the first one.
class Reader {
 public:
  Reader(const ExperimentConfig& cfg, std::vector<Diagnostic>& diags) : cfg_(cfg), diags_(diags) {}

  bool has(const std::string& key) const { return cfg_.entries.count(key) > 0; }

  void error(const std::string& field, const std::string& msg) {
    diags_.push_back({Diagnostic::Level::Error, field, msg});
  }
  void warning(const std::string& field, const std::string& msg) {
    diags_.push_back({Diagnostic::Level::Warning, field, msg});
  }

  std::string text(const std::string& key, const std::string& def) const {
    auto it = cfg_.entries.find(key);
    return it == cfg_.entries.end() ? def : it->second;
  }

  double real(const std::string& key, double def) {
    auto it = cfg_.entries.find(key);
    if (it == cfg_.entries.end()) return def;
    double v = 0;
    if (!parse_double(it->second, v)) {
      error(key, "'" + it->second + "' is not a number");
      return def;
    }
    return v;
  }

  long long integer(const std::string& key, long long def) {
    auto it = cfg_.entries.find(key);
    if (it == cfg_.entries.end()) return def;
    long long v = 0;
    if (!parse_int(it->second, v)) {
      error(key, "'" + it->second + "' is not an integer");
      return def;
    }
    return v;
  }

  // Comma list whose items may be ranges start:stop:step (stop inclusive).
  std::vector<double> reals(const std::string& key, const std::vector<double>& def) {
    auto it = cfg_.entries.find(key);
    if (it == cfg_.entries.end()) return def;
    std::vector<double> out;
    for (const auto& item : split(it->second, ',')) {
      const auto parts = split(item, ':');
      std::vector<double> v(parts.size());
      bool ok = !parts.empty() && parts.size() != 2 && parts.size() <= 3;
      for (std::size_t i = 0; ok && i < parts.size(); ++i) ok = parse_double(parts[i], v[i]);
      if (!ok) {
        error(key, "'" + item + "' is neither a number nor a start:stop:step range");
        continue;
      }
      if (v.size() == 1) {
        out.push_back(v[0]);
        continue;
      }
      if (!(v[2] > 0) || v[1] < v[0]) {
        error(key, "range '" + item + "' needs a positive step and stop >= start");
        continue;
      }
      const auto count = static_cast<long long>(std::floor((v[1] - v[0]) / v[2] + 1e-9));
      if (count > 100000) {
        error(key, "range '" + item + "' has too many points");
        continue;
      }
      for (long long i = 0; i <= count; ++i) out.push_back(v[0] + static_cast<double>(i) * v[2]);
    }
    if (out.empty()) error(key, "empty list");
    return out;
  }

  std::vector<int> ints(const std::string& key, const std::vector<int>& def) {
    std::vector<int> out;
    for (double v : reals(key, std::vector<double>(def.begin(), def.end()))) {
      if (v != std::floor(v)) {
        error(key, "expected integers");
        break;
      }
      out.push_back(static_cast<int>(v));
    }
    return out;
  }

  std::vector<std::string> words(const std::string& key, const std::vector<std::string>& def) const {
    auto it = cfg_.entries.find(key);
    return it == cfg_.entries.end() ? def : split(it->second, ',');
  }

 private:
  const ExperimentConfig& cfg_;
  std::vector<Diagnostic>& diags_;
};

enum class Protocol { Ncdp, Crdsa, Sa };

struct Series {
  std::string name;
  Protocol protocol = Protocol::Ncdp;
  ProtocolConfig cfg;
};

std::string format_value(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

struct Plan {
  std::string experiment;
  std::uint64_t seed = 1;
  int threads = 0;
  int trials = 0;
  int chunk = 0;

  // Protocol experiments.
  std::vector<double> loads;
  std::vector<Series> series;

  // Physical-layer experiments.
  LinkConfig link;
  std::vector<int> sizes;
  std::vector<double> snr;
  std::vector<ReceiverMode> modes;
  std::vector<std::string> mode_names;

  // Analytic sweep.
  int slots = 100;
  int degree = 8;
};

bool is_protocol_experiment(const std::string& e) {
  return e == "throughput-nofeedback" || e == "throughput-arq" || e == "energy";
}

Plan resolve(const ExperimentConfig& cfg, std::vector<Diagnostic>& diags) {
  Reader r(cfg, diags);
  Plan plan;
  plan.experiment = cfg.experiment;
  plan.seed = cfg.seed;
  plan.threads = cfg.threads;

  for (const auto& [key, value] : cfg.entries) {
    if (!known_keys().count(key)) r.error(key, "unknown key");
  }
  const auto& names = experiment_names();
  if (cfg.experiment.empty()) {
    r.error("experiment", "missing experiment name");
    return plan;
  }
  if (std::find(names.begin(), names.end(), cfg.experiment) == names.end()) {
    r.error("experiment", "unknown experiment '" + cfg.experiment + "'");
    return plan;
  }
  const std::string& e = cfg.experiment;
  if (cfg.threads < 0) r.error("threads", "must be >= 0");

  // Fields shared by the protocol experiments and the analytic sweep.
  const bool protocol = is_protocol_experiment(e);
  plan.slots = static_cast<int>(r.integer("S", protocol ? 150 : 100));
  plan.degree = static_cast<int>(r.integer("n", 8));
  if (plan.slots < 1) r.error("S", "slots per frame must be >= 1");
  if (plan.degree < 1 || plan.degree > 16) r.error("n", "field degree must lie in [1, 16]");

  if (e == "analytic-sweep") {
    plan.loads = r.reals("G", {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2});
    for (double g : plan.loads)
      if (g < 0) r.error("G", "load must be >= 0");
    return plan;
  }

  if (protocol) {
    const bool arq = e != "throughput-nofeedback";
    plan.trials = static_cast<int>(r.integer("trials", arq ? 300 : 500));
    plan.loads = r.reals("G", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
    for (double g : plan.loads)
      if (g < 0) r.error("G", "load must be >= 0");
    if (plan.trials < 1) r.error("trials", "must be >= 1");

    ProtocolConfig base;
    base.slots = plan.slots;
    base.field_degree = plan.degree;
    base.backlog = static_cast<int>(r.integer("B", 50));
    base.warmup_frames = static_cast<int>(r.integer("warmup", -1));
    base.max_active = static_cast<int>(r.integer("max_active", kPreambleLength - 1));
    base.crdsa_iterations = static_cast<int>(r.integer("crdsa_iterations", 20));
    const std::string fb = r.text("feedback", arq ? "arq" : "none");
    if (fb == "arq")
      base.feedback = Feedback::Arq;
    else if (fb == "none")
      base.feedback = Feedback::None;
    else
      r.error("feedback", "expected 'none' or 'arq'");
    const std::string dec = r.text("decode", "gaussian");
    if (dec == "gaussian")
      base.decode = DecodeMode::Gaussian;
    else if (dec == "full-rank")
      base.decode = DecodeMode::FullRankOnly;
    else
      r.error("decode", "expected 'gaussian' or 'full-rank'");
    if (base.backlog < 1) r.error("B", "backlog must be >= 1 frame");
    if (base.max_active < 1) r.error("max_active", "must be >= 1");
    if (base.crdsa_iterations < 1) r.error("crdsa_iterations", "must be >= 1");

    const auto ncdp_p = [&](double p) {
      Series s{"ncdp-p" + format_value(p), Protocol::Ncdp, base};
      s.cfg.policy = CoefficientPolicy::FixedProbability;
      s.cfg.tx_probability = p;
      if (!(p > 0 && p <= 1)) r.error("p", "transmit probability must lie in (0, 1]");
      return s;
    };
    const auto with_d = [&](Protocol proto, int d) {
      Series s{(proto == Protocol::Crdsa ? "crdsa-d" : "ncdp-d") + std::to_string(d), proto, base};
      s.cfg.policy = CoefficientPolicy::FixedReplicas;
      s.cfg.replicas = d;
      if (d > base.slots) r.error("d", "replicas exceed slots");
      if (d < 1) r.error("d", "replicas must be >= 1");
      if (proto == Protocol::Crdsa && d < 2) r.error("d", "CRDSA needs at least two replicas");
      return s;
    };
    const auto uniform = [&] {
      Series s{"ncdp-uniform", Protocol::Ncdp, base};
      s.cfg.policy = CoefficientPolicy::Uniform;
      return s;
    };

    if (r.has("series")) {
      for (const auto& tok : r.words("series", {})) {
        long long d = 0;
        double p = 0;
        if (tok == "sa") {
          plan.series.push_back({"sa", Protocol::Sa, base});
        } else if (tok == "ncdp-uniform") {
          plan.series.push_back(uniform());
        } else if (tok.rfind("ncdp-p", 0) == 0 && parse_double(tok.substr(6), p)) {
          plan.series.push_back(ncdp_p(p));
        } else if (tok.rfind("ncdp-d", 0) == 0 && parse_int(tok.substr(6), d)) {
          plan.series.push_back(with_d(Protocol::Ncdp, static_cast<int>(d)));
        } else if (tok.rfind("crdsa-d", 0) == 0 && parse_int(tok.substr(7), d)) {
          plan.series.push_back(with_d(Protocol::Crdsa, static_cast<int>(d)));
        } else {
          r.error("series", "unknown series '" + tok + "'");
        }
      }
    } else {
      const std::string policy = r.text("policy", r.has("p") ? "fixed-p" : r.has("d") ? "fixed-d" : "uniform");
      for (const auto& proto : r.words("protocol", {"ncdp"})) {
        if (proto == "sa") {
          plan.series.push_back({"sa", Protocol::Sa, base});
        } else if (proto == "crdsa") {
          for (int d : r.ints("d", {2})) plan.series.push_back(with_d(Protocol::Crdsa, d));
        } else if (proto == "ncdp") {
          if (policy == "fixed-p") {
            for (double p : r.reals("p", {0.0453})) plan.series.push_back(ncdp_p(p));
          } else if (policy == "fixed-d") {
            for (int d : r.ints("d", {2})) plan.series.push_back(with_d(Protocol::Ncdp, d));
          } else if (policy == "uniform") {
            plan.series.push_back(uniform());
          } else {
            r.error("policy", "expected 'uniform', 'fixed-p' or 'fixed-d'");
          }
        } else {
          r.error("protocol", "unknown protocol '" + proto + "'");
        }
      }
    }
    if (plan.series.empty()) r.error("series", "no series to simulate");
    return plan;
  }

  // Physical-layer experiments.
  LinkConfig& link = plan.link;
  link.shape.rolloff = r.real("rolloff", 0.35);
  link.shape.span = static_cast<int>(r.integer("span", 12));
  link.shape.oversampling = static_cast<int>(r.integer("oversampling", 8));
  link.freq_max = r.real("freq_max", kMaxFreqOffset);
  link.em.beta = r.real("beta", 0.8);
  link.em.iterations = static_cast<int>(r.integer("em_iterations", 6));
  link.em.restarts = static_cast<int>(r.integer("restarts", 2));
  link.em.freq_max = link.freq_max;
  plan.chunk = static_cast<int>(r.integer("chunk", 50));
  if (plan.chunk < 1) r.error("chunk", "must be >= 1");

  const std::string grid_key = e == "estimation-mse" ? "esn0" : "ebn0";
  if (e == "estimation-mse") {
    link.amplitude_sigma_db = r.real("amplitude_sigma_db", 1.0);
    plan.snr = r.reals("esn0", {0, 4, 8, 12, 16});
    plan.sizes = r.ints("k", {1, 2, 4});
    plan.trials = static_cast<int>(r.integer("trials", 500));
  } else {
    link.amplitude_sigma_db = r.real("amplitude_sigma_db", 0.0);
    if (!r.has("ebn0")) {
      r.error("ebn0", e + " experiment requires an ebn0 grid");
    } else {
      plan.snr = r.reals("ebn0", {});
    }
    const bool async = e == "async-fer";
    plan.sizes = r.ints("k", async ? std::vector<int>{5} : std::vector<int>{2, 4});
    plan.trials = static_cast<int>(r.integer("trials", 2000));
    link.delay_max = r.real("delay_max", async ? 0.25 : 0.0);

    const std::string csi = r.text("csi", "perfect");
    std::vector<bool> est;
    if (csi == "perfect")
      est = {false};
    else if (csi == "estimated")
      est = {true};
    else if (csi == "both")
      est = {false, true};
    else
      r.error("csi", "expected 'perfect', 'estimated' or 'both'");
    const auto strategies =
        r.words("strategy", async ? std::vector<std::string>{"MD", "ML", "MS", "US", "EC", "ideal"}
                                  : std::vector<std::string>{"MD"});
    for (const auto& name : strategies) {
      for (bool x : est) {
        const std::string suffix = est.size() > 1 ? (x ? "-estimated" : "-perfect") : (x ? "-estimated" : "");
        if (name == "ideal") {
          plan.modes.push_back({SamplingStrategy::MD, x, true});
        } else if (auto s = parse_strategy(name)) {
          plan.modes.push_back({*s, x, false});
        } else {
          r.error("strategy", "unknown strategy '" + name + "'");
          continue;
        }
        plan.mode_names.push_back(name + suffix);
      }
    }
  }
  for (int k : plan.sizes) {
    if (k < 1 || k > kMaxCollisionSize) r.error("k", "collision size must lie in [1, 8]");
  }
  if (plan.trials < 1) r.error("trials", "must be >= 1");
  try {
    link.validate();
  } catch (const ParameterError& ex) {
    r.error("link", ex.what());
  }
  (void)grid_key;
  return plan;
}

std::uint64_t parse_seed(const std::string& v) {
  if (v.empty() || v[0] == '-' || v[0] == '+') throw ConfigError("seed: '" + v + "' is not an unsigned 64-bit integer");
  try {
    std::size_t used = 0;
    const unsigned long long s = std::stoull(v, &used, 0);
    if (used == v.size()) return s;
  } catch (const std::exception&) {
  }
  throw ConfigError("seed: '" + v + "' is not an unsigned 64-bit integer");
}

struct Moments {
  double sum = 0, sumsq = 0;
  std::int64_t n = 0;
  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  void merge(const Moments& o) {
    sum += o.sum;
    sumsq += o.sumsq;
    n += o.n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double se() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

ExperimentResult run_analytic(const Plan& plan) {
  ExperimentResult res{plan.experiment, {}};
  for (double g : plan.loads) {
    res.rows.push_back({"G", g, "analytic", "throughput", analytic::throughput(g, plan.slots, plan.degree), 0, 0});
    res.rows.push_back({"G", g, "analytic", "throughput_limit", analytic::throughput_limit(g, plan.slots), 0, 0});
    res.rows.push_back(
        {"G", g, "analytic", "prob_active_le_S", analytic::prob_active_at_most_slots(g, plan.slots), 0, 0});
  }
  return res;
}

ExperimentResult run_protocols(const Plan& plan, const ProgressFn& progress) {
  const std::size_t ns = plan.series.size(), np = plan.loads.size();
  std::vector<Metrics> out(ns * np);
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  parallel_for(ns * np, plan.threads, [&](std::size_t t) {
    const std::size_t point = t / ns, s = t % ns;
    const Series& series = plan.series[s];
    // Every series sees the same arrival stream at a given load.
    Rng rng = make_stream(plan.seed, point);
    const TrafficModel traffic{plan.loads[point]};
    switch (series.protocol) {
      case Protocol::Ncdp: out[t] = simulate_ncdp(series.cfg, traffic, plan.trials, rng); break;
      case Protocol::Crdsa: out[t] = simulate_crdsa(series.cfg, traffic, plan.trials, rng); break;
      case Protocol::Sa: out[t] = simulate_sa(series.cfg, traffic, plan.trials, rng); break;
    }
    if (progress) {
      std::lock_guard<std::mutex> lock(mu);
      progress(plan.experiment + ": " + std::to_string(++done) + "/" + std::to_string(ns * np) + " (" +
               series.name + ", G=" + format_value(plan.loads[point]) + ")");
    }
  });
  ExperimentResult res{plan.experiment, {}};
  for (std::size_t point = 0; point < np; ++point) {
    for (std::size_t s = 0; s < ns; ++s) {
      const Metrics& m = out[point * ns + s];
      const std::string& name = plan.series[s].name;
      const double g = plan.loads[point];
      const std::int64_t n = m.frames;
      res.rows.push_back({"G", g, name, "throughput", m.throughput, m.throughput_se, n});
      res.rows.push_back(
          {"G", g, name, "loss_rate", m.loss_rate, m.load > 0 ? m.throughput_se / m.load : 0.0, n});
      res.rows.push_back({"G", g, name, "energy", m.energy, m.energy_se, n});
      res.rows.push_back({"G", g, name, "offered_load", m.load, 0.0, n});
    }
  }
  return res;
}

ExperimentResult run_fer(const Plan& plan, const ProgressFn& progress) {
  const std::size_t chunks = static_cast<std::size_t>((plan.trials + plan.chunk - 1) / plan.chunk);
  const std::size_t nm = plan.modes.size(), nk = plan.sizes.size(), np = plan.snr.size();
  const std::size_t tasks = np * nk * chunks;
  std::vector<std::vector<std::int64_t>> errors(tasks, std::vector<std::int64_t>(nm, 0));
  std::vector<std::int64_t> frames(tasks, 0);
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const std::size_t c = t % chunks, ki = (t / chunks) % nk, pi = t / (chunks * nk);
    LinkConfig link = plan.link;
    link.ebn0_db = plan.snr[pi];
    const int begin = static_cast<int>(c) * plan.chunk;
    const int end = std::min(plan.trials, begin + plan.chunk);
    for (int f = begin; f < end; ++f) {
      Rng rng = make_stream(plan.seed, pi, ki, static_cast<std::uint64_t>(f));
      const auto e = simulate_link_frame(plan.sizes[ki], link, plan.modes, rng);
      for (std::size_t m = 0; m < nm; ++m) errors[t][m] += e[m];
      ++frames[t];
    }
    if (progress && c + 1 == chunks) {
      std::lock_guard<std::mutex> lock(mu);
      progress(plan.experiment + ": k=" + std::to_string(plan.sizes[ki]) + " Eb/N0=" + format_value(plan.snr[pi]) +
               " dB finished (" + std::to_string(++done) + "/" + std::to_string(np * nk) + ")");
    }
  });
  ExperimentResult res{plan.experiment, {}};
  for (std::size_t pi = 0; pi < np; ++pi) {
    for (std::size_t ki = 0; ki < nk; ++ki) {
      for (std::size_t m = 0; m < nm; ++m) {
        std::int64_t err = 0, n = 0;
        for (std::size_t c = 0; c < chunks; ++c) {
          const std::size_t t = (pi * nk + ki) * chunks + c;
          err += errors[t][m];
          n += frames[t];
        }
        const double fer = static_cast<double>(err) / static_cast<double>(n);
        const std::string series =
            plan.experiment == "async-fer" && nk == 1 ? plan.mode_names[m]
                                                      : "k" + std::to_string(plan.sizes[ki]) + "-" + plan.mode_names[m];
        res.rows.push_back({"ebn0", plan.snr[pi], series, "fer", fer,
                            std::sqrt(fer * (1 - fer) / static_cast<double>(n)), n});
      }
    }
  }
  return res;
}

ExperimentResult run_estimation(const Plan& plan, const ProgressFn& progress) {
  const std::size_t chunks = static_cast<std::size_t>((plan.trials + plan.chunk - 1) / plan.chunk);
  const std::size_t nk = plan.sizes.size(), np = plan.snr.size();
  const std::size_t tasks = np * nk * chunks;
  struct Acc {
    Moments freq, phase, amp;
  };
  std::vector<Acc> acc(tasks);
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const std::size_t c = t % chunks, ki = (t / chunks) % nk, pi = t / (chunks * nk);
    const int k = plan.sizes[ki];
    LinkConfig link = plan.link;
    const double n0 = noise_var_from_esn0(1.0, plan.snr[pi]);
    const int begin = static_cast<int>(c) * plan.chunk;
    const int end = std::min(plan.trials, begin + plan.chunk);
    for (int f = begin; f < end; ++f) {
      Rng rng = make_stream(plan.seed, pi, ki, static_cast<std::uint64_t>(f));
      const auto users = draw_users(k, link, rng);
      std::vector<Transmission> tx;
      std::vector<RVector> words;
      for (const auto& u : users) {
        Transmission x;
        x.burst = make_burst(u.preamble, {}, link.preamble_length);
        x.channel = u.channel;
        tx.push_back(std::move(x));
        words.push_back(walsh_hadamard_row(u.preamble, link.preamble_length));
      }
      const CollisionSlot slot = synthesize_collision(tx, n0, link.shape, rng);
      const CVector r = MatchedFilter(slot, link.shape).sample(0.0);
      const ChannelEstimate est = em_estimate(r, words, link.em, rng);
      for (int i = 0; i < k; ++i) {
        const auto& truth = users[static_cast<std::size_t>(i)].channel;
        const auto& e = est.users[static_cast<std::size_t>(i)];
        acc[t].freq.add(std::pow(e.freq_offset - truth.freq_offset, 2));
        acc[t].phase.add(std::pow(std::remainder(e.phase - truth.phase, 2 * kPi) / kPi, 2));
        acc[t].amp.add(std::pow((e.amplitude - truth.amplitude) / truth.amplitude, 2));
      }
    }
    if (progress && c + 1 == chunks) {
      std::lock_guard<std::mutex> lock(mu);
      progress(plan.experiment + ": k=" + std::to_string(k) + " Es/N0=" + format_value(plan.snr[pi]) +
               " dB finished (" + std::to_string(++done) + "/" + std::to_string(np * nk) + ")");
    }
  });
  ExperimentResult res{plan.experiment, {}};
  for (std::size_t pi = 0; pi < np; ++pi) {
    for (std::size_t ki = 0; ki < nk; ++ki) {
      Acc total;
      for (std::size_t c = 0; c < chunks; ++c) {
        const Acc& a = acc[(pi * nk + ki) * chunks + c];
        total.freq.merge(a.freq);
        total.phase.merge(a.phase);
        total.amp.merge(a.amp);
      }
      const std::string series = "k" + std::to_string(plan.sizes[ki]);
      const double s = plan.snr[pi];
      res.rows.push_back({"esn0", s, series, "mse_freq", total.freq.mean(), total.freq.se(), total.freq.n});
      res.rows.push_back({"esn0", s, series, "mse_phase", total.phase.mean(), total.phase.se(), total.phase.n});
      res.rows.push_back({"esn0", s, series, "mse_amp", total.amp.mean(), total.amp.se(), total.amp.n});
    }
  }
  return res;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "experiment") {
    experiment = value;
  } else if (key == "seed") {
    seed = parse_seed(value);
  } else if (key == "threads") {
    long long t = 0;
    if (!parse_int(value, t) || t < 0) throw ConfigError("threads: '" + value + "' is not a non-negative integer");
    threads = static_cast<int>(t);
  } else {
    entries[key] = value;
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
  cfg.set(key, trim(assignment.substr(eq + 1)));
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"throughput-nofeedback", "throughput-arq", "energy", "fer",
                                              "estimation-mse",        "async-fer",      "analytic-sweep"};
  return names;
}

std::vector<Diagnostic> validate(const ExperimentConfig& cfg) {
  std::vector<Diagnostic> diags;
  resolve(cfg, diags);
  return diags;
}

ExperimentResult run(const ExperimentConfig& cfg, const ProgressFn& progress) {
  std::vector<Diagnostic> diags;
  const Plan plan = resolve(cfg, diags);
  std::string msg;
  for (const auto& d : diags) {
    if (d.level != Diagnostic::Level::Error) continue;
    msg += (msg.empty() ? "" : "; ") + d.field + ": " + d.message;
  }
  if (!msg.empty()) throw ConfigError(msg);
  const std::string& e = plan.experiment;
  if (e == "analytic-sweep") return run_analytic(plan);
  if (is_protocol_experiment(e)) return run_protocols(plan, progress);
  if (e == "estimation-mse") return run_estimation(plan, progress);
  return run_fer(plan, progress);
}

const ResultRow& ExperimentResult::find(const std::string& series, const std::string& metric,
                                        double sweep_value) const {
  for (const auto& r : rows) {
    if (r.series == series && r.metric == metric && std::abs(r.sweep_value - sweep_value) < 1e-9) return r;
  }
  throw Error("no row for " + series + "/" + metric + " at " + format_value(sweep_value));
}

std::vector<ResultRow> ExperimentResult::select(const std::string& series, const std::string& metric) const {
  std::vector<ResultRow> out;
  for (const auto& r : rows) {
    if (r.series == series && r.metric == metric) out.push_back(r);
  }
  return out;
}

void write_csv(const ExperimentResult& result, std::ostream& out) {
  out << "sweep_var,sweep_value,series,metric,value,std_error,trials\n";
  out << std::setprecision(17);
  for (const auto& r : result.rows) {
    out << r.sweep_var << ',' << format_value(r.sweep_value) << ',' << r.series << ',' << r.metric << ',' << r.value << ','
        << r.std_error << ',' << r.trials << '\n';
  }
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ncdp
