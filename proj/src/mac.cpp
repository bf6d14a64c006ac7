#include "ncdp/mac.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

namespace ncdp {

const char* to_string(CoefficientPolicy p) {
  switch (p) {
    case CoefficientPolicy::Uniform: return "uniform";
    case CoefficientPolicy::FixedProbability: return "fixed-p";
    case CoefficientPolicy::FixedReplicas: return "fixed-d";
  }
  return "?";
}

void ProtocolConfig::validate() const {
  if (slots < 1) throw ParameterError("slots per frame must be >= 1");
  if (field_degree < 1 || field_degree > 16) throw ParameterError("field degree must lie in [1, 16]");
  if (!(tx_probability >= 0.0 && tx_probability <= 1.0)) throw ParameterError("transmit probability outside [0, 1]");
  if (policy == CoefficientPolicy::FixedReplicas && (replicas < 1 || replicas > slots))
    throw ParameterError("replicas exceed slots");
  if (backlog < 1) throw ParameterError("backlog must be >= 1 frame");
  if (max_active < 1) throw ParameterError("max_active must be >= 1");
  if (crdsa_iterations < 1) throw ParameterError("CRDSA needs >= 1 iteration");
  if (!ideal_phy) phy.validate();
}

double ProtocolConfig::transmit_probability() const {
  switch (policy) {
    case CoefficientPolicy::Uniform: return 1.0 - std::ldexp(1.0, -field_degree);
    case CoefficientPolicy::FixedProbability: return tx_probability;
    case CoefficientPolicy::FixedReplicas: return static_cast<double>(replicas) / slots;
  }
  return 0.0;
}

void TrafficModel::validate() const {
  if (!(load >= 0.0)) throw ParameterError("load must be >= 0");
}

SymbolVector coefficient_column(std::uint64_t seed, const ProtocolConfig& cfg) {
  SplitMix64 gen(seed);
  const std::uint64_t q = std::uint64_t{1} << cfg.field_degree;
  const auto s = static_cast<std::size_t>(cfg.slots);
  SymbolVector col(s, 0);
  const auto nonzero = [&] { return static_cast<Symbol>(1 + gen() % (q - 1)); };
  switch (cfg.policy) {
    case CoefficientPolicy::Uniform:
      for (auto& c : col) c = static_cast<Symbol>(gen() & (q - 1));
      break;
    case CoefficientPolicy::FixedProbability:
      for (auto& c : col) {
        const bool send = gen.uniform() < cfg.tx_probability;
        const Symbol v = nonzero();
        c = send ? v : 0;
      }
      break;
    case CoefficientPolicy::FixedReplicas: {
      if (cfg.replicas > cfg.slots) throw ParameterError("replicas exceed slots");
      std::vector<std::size_t> idx(s);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.replicas); ++i) {
        std::swap(idx[i], idx[i + gen() % (s - i)]);
        col[idx[i]] = nonzero();
      }
      break;
    }
  }
  return col;
}

FieldMatrix generate_pattern(int active, const ProtocolConfig& cfg, std::span<const std::uint64_t> seeds) {
  if (active < 0) throw ParameterError("active count must be >= 0");
  if (seeds.size() != static_cast<std::size_t>(active)) throw DimensionError("one seed per terminal required");
  FieldMatrix m(make_field(cfg.field_degree, cfg.field_polynomial), cfg.slots, active);
  for (int i = 0; i < active; ++i) {
    const SymbolVector col = coefficient_column(seeds[static_cast<std::size_t>(i)], cfg);
    for (int j = 0; j < cfg.slots; ++j) m.set(j, i, col[static_cast<std::size_t>(j)]);
  }
  return m;
}

namespace {

FieldMatrix usable_rows(const FrameState& f) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < f.pattern.rows(); ++j) {
    if (f.row_decoded.empty() || f.row_decoded[static_cast<std::size_t>(j)]) keep.push_back(j);
  }
  SymbolMatrix e(static_cast<Eigen::Index>(keep.size()), f.pattern.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) e.row(static_cast<Eigen::Index>(r)) = f.pattern.entries().row(keep[r]);
  return FieldMatrix(f.pattern.field(), std::move(e));
}

}  // namespace

std::vector<bool> decode_frame(const FrameState& frame, const ProtocolConfig& cfg) {
  const auto n = static_cast<std::size_t>(frame.pattern.cols());
  if (n == 0) return {};
  const FieldMatrix a = usable_rows(frame);
  std::vector<bool> got;
  if (frame.rows.empty()) {
    got = determined_variables(a);
  } else {
    std::vector<SymbolVector> rhs;
    for (std::size_t j = 0; j < frame.rows.size(); ++j) {
      if (frame.row_decoded[j]) rhs.push_back(frame.rows[j]);
    }
    const Reduction red = solve_or_reduce(a, rhs);
    got.assign(n, false);
    for (const auto& [i, msg] : red.recovered) {
      // A wrong equation that slipped past the CRC shows up here.
      got[i] = frame.messages.empty() || msg == frame.messages[i];
    }
  }
  if (cfg.decode == DecodeMode::FullRankOnly && !std::all_of(got.begin(), got.end(), [](bool b) { return b; }))
    got.assign(n, false);
  return got;
}

std::vector<bool> crdsa_peel(const FieldMatrix& pattern, int iterations) {
  const auto s = static_cast<std::size_t>(pattern.rows());
  const auto n = static_cast<std::size_t>(pattern.cols());
  std::vector<std::vector<std::size_t>> in_slot(s), of_burst(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (pattern(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))) {
        in_slot[j].push_back(i);
        of_burst[i].push_back(j);
      }
    }
  }
  std::vector<std::size_t> load(s);
  for (std::size_t j = 0; j < s; ++j) load[j] = in_slot[j].size();
  std::vector<bool> done(n, false);
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::size_t> clean;
    for (std::size_t j = 0; j < s; ++j) {
      if (load[j] != 1) continue;
      for (std::size_t i : in_slot[j]) {
        if (!done[i]) clean.push_back(i);
      }
    }
    if (clean.empty()) break;
    for (std::size_t i : clean) {
      if (done[i]) continue;
      done[i] = true;
      for (std::size_t j : of_burst[i]) --load[j];
    }
  }
  return done;
}

Metrics run_protocol(const FrameReceiver& receiver, const ProtocolConfig& cfg, const TrafficModel& traffic,
                     int frames, Rng& rng, bool preamble_limit) {
  cfg.validate();
  traffic.validate();
  if (frames < 1) throw ParameterError("frames must be >= 1");
  const bool arq = cfg.feedback == Feedback::Arq;
  const int warmup = arq ? cfg.warmup() : 0;
  const int total = warmup + frames;
  std::poisson_distribution<int> arrivals(traffic.load * cfg.slots);
  std::uniform_int_distribution<int> delay(1, cfg.backlog);

  // Each pending message carries its transmission count so far.
  struct Message {
    std::int64_t sent = 0;
  };
  std::deque<std::vector<Message>> schedule(static_cast<std::size_t>(cfg.backlog) + 1);

  Metrics m;
  std::int64_t tx_of_delivered = 0;
  const int batches = arq ? std::min(10, frames) : frames;
  std::vector<double> batch_delivered(static_cast<std::size_t>(batches), 0.0),
      batch_tx(static_cast<std::size_t>(batches), 0.0), batch_msgs(static_cast<std::size_t>(batches), 0.0);

  for (int f = 0; f < total; ++f) {
    const bool measured = f >= warmup;
    const auto batch = measured ? static_cast<std::size_t>(
                                      static_cast<std::int64_t>(f - warmup) * batches / frames)
                                : 0;
    std::vector<Message> active = std::move(schedule.front());
    schedule.pop_front();
    schedule.emplace_back();
    const int fresh = arrivals(rng);
    m.total_arrivals += fresh;
    if (measured) m.arrivals += fresh;
    active.resize(active.size() + static_cast<std::size_t>(fresh));

    std::vector<Message> refused;
    if (preamble_limit && static_cast<int>(active.size()) > cfg.max_active) {
      refused.assign(active.begin() + cfg.max_active, active.end());
      active.resize(static_cast<std::size_t>(cfg.max_active));
      if (measured) {
        m.refused += static_cast<std::int64_t>(refused.size());
        if (!arq) batch_msgs[batch] += static_cast<double>(refused.size());
      }
    }

    const FrameOutcome out = receiver(static_cast<int>(active.size()), rng);
    std::vector<Message> failed = std::move(refused);
    for (std::size_t i = 0; i < active.size(); ++i) {
      active[i].sent += out.transmissions[i];
      if (measured) {
        m.transmissions += out.transmissions[i];
        if (!arq) {
          batch_tx[batch] += out.transmissions[i];
          batch_msgs[batch] += 1;
        }
      }
      if (out.delivered[i]) {
        ++m.total_delivered;
        if (measured) {
          ++m.delivered;
          tx_of_delivered += active[i].sent;
          batch_delivered[batch] += 1;
          if (arq) {
            batch_tx[batch] += static_cast<double>(active[i].sent);
            batch_msgs[batch] += 1;
          }
        }
      } else {
        failed.push_back(active[i]);
      }
    }
    for (const auto& msg : failed) {
      if (arq) {
        schedule[static_cast<std::size_t>(delay(rng)) - 1].push_back(msg);
      } else {
        ++m.total_lost;
        if (measured) ++m.lost;
      }
    }
  }
  for (const auto& v : schedule) m.in_flight += static_cast<std::int64_t>(v.size());

  m.frames = frames;
  m.slots = static_cast<std::int64_t>(frames) * cfg.slots;
  m.load = static_cast<double>(m.arrivals) / static_cast<double>(m.slots);
  const double good = static_cast<double>(std::min(m.delivered, m.arrivals));
  m.loss_rate = m.arrivals > 0 ? 1.0 - good / static_cast<double>(m.arrivals) : 0.0;
  m.throughput = m.load * (1.0 - m.loss_rate);
  if (arq) {
    m.energy = m.delivered > 0 ? static_cast<double>(tx_of_delivered) / static_cast<double>(m.delivered) : 0.0;
  } else {
    const std::int64_t msgs = m.arrivals;
    m.energy = msgs > 0 ? static_cast<double>(m.transmissions) / static_cast<double>(msgs) : 0.0;
  }

  // Standard errors: per-frame values without feedback, batch means with.
  const double frames_per_batch = static_cast<double>(frames) / batches;
  const auto se = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  };
  std::vector<double> phi(batch_delivered.size()), eta;
  for (std::size_t b = 0; b < phi.size(); ++b) {
    phi[b] = batch_delivered[b] / (frames_per_batch * cfg.slots);
    if (batch_msgs[b] > 0) eta.push_back(batch_tx[b] / batch_msgs[b]);
  }
  m.throughput_se = se(phi);
  m.energy_se = se(eta);
  return m;
}

namespace {

std::vector<std::uint64_t> draw_seeds(int active, Rng& rng) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(active));
  for (auto& s : seeds) s = rng();
  return seeds;
}

std::vector<int> column_weights(const FieldMatrix& a) {
  std::vector<int> w(static_cast<std::size_t>(a.cols()), 0);
  for (Eigen::Index i = 0; i < a.cols(); ++i) w[static_cast<std::size_t>(i)] = static_cast<int>((a.entries().col(i).array() != 0).count());
  return w;
}

}  // namespace

FrameOutcome ncdp_full_phy_frame(int active, const ProtocolConfig& cfg, Rng& rng) {
  const LinkConfig& phy = cfg.phy;
  const int n = cfg.field_degree;
  const int payload = phy.payload_bits();
  if (payload % n != 0) throw ParameterError("payload length is not a whole number of field symbols");
  const auto symbols = static_cast<std::size_t>(payload / n);

  FrameState f(generate_pattern(active, cfg, draw_seeds(active, rng)));
  const GaloisField& field = *f.pattern.field();
  std::uniform_int_distribution<int> sym(0, static_cast<int>(field.order()) - 1);
  for (int i = 0; i < active; ++i) {
    SymbolVector msg(symbols);
    for (auto& s : msg) s = static_cast<Symbol>(sym(rng));
    f.messages.push_back(std::move(msg));
  }

  // Amplitude and frequency are fixed over the frame; phase and delay are per slot.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<ChannelParams> frame_ch(static_cast<std::size_t>(active));
  for (auto& c : frame_ch) {
    c.amplitude = phy.amplitude_sigma_db > 0 ? std::pow(10.0, phy.amplitude_sigma_db * g(rng) / 20.0) : 1.0;
    c.freq_offset = phy.freq_max * u(rng);
  }
  std::vector<int> preamble(static_cast<std::size_t>(active));
  {
    std::vector<int> ids(static_cast<std::size_t>(phy.preamble_length - 1));
    std::iota(ids.begin(), ids.end(), 1);
    std::shuffle(ids.begin(), ids.end(), rng);
    for (int i = 0; i < active; ++i) preamble[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(i)];
  }

  const auto to_bits = [&](const SymbolVector& v) {
    BitVector b(static_cast<std::size_t>(payload));
    for (std::size_t s = 0; s < v.size(); ++s)
      for (int k = 0; k < n; ++k) b[s * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] = (v[s] >> k) & 1u;
    return b;
  };
  const auto to_symbols = [&](const BitVector& b) {
    SymbolVector v(symbols, 0);
    for (std::size_t s = 0; s < symbols; ++s)
      for (int k = 0; k < n; ++k) v[s] |= static_cast<Symbol>(b[s * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] << k);
    return v;
  };

  const auto slots = static_cast<std::size_t>(cfg.slots);
  f.row_decoded.assign(slots, false);
  f.rows.assign(slots, SymbolVector(symbols, 0));
  const ReceiverMode mode{SamplingStrategy::MD, false, false};
  for (std::size_t j = 0; j < slots; ++j) {
    std::vector<SlotUser> users;
    for (int i = 0; i < active; ++i) {
      const Symbol a = f.pattern(static_cast<Eigen::Index>(j), i);
      if (!a) continue;
      SymbolVector pre = f.messages[static_cast<std::size_t>(i)];
      for (auto& s : pre) s = field.mul(a, s);
      ChannelParams c = frame_ch[static_cast<std::size_t>(i)];
      c.phase = kPi * (2.0 * u(rng) - 1.0);
      c.delay = phy.delay_max * u(rng);
      users.push_back(make_user(preamble[static_cast<std::size_t>(i)], to_bits(pre), c, phy));
    }
    if (users.empty()) {
      f.row_decoded[j] = true;  // an empty slot is the trivial equation 0 = 0
      continue;
    }
    if (static_cast<int>(users.size()) > kMaxCollisionSize) continue;
    CollisionSlot slot = transmit(users, phy);
    add_awgn(slot, phy.noise_var(), rng);
    const XorDecision d = decode_xor(slot, users, mode, phy, rng);
    if (!d.crc_ok) continue;
    f.row_decoded[j] = true;
    f.rows[j] = to_symbols(BitVector(d.bits.begin(), d.bits.begin() + payload));
  }
  return {column_weights(f.pattern), decode_frame(f, cfg)};
}

Metrics simulate_ncdp(const ProtocolConfig& cfg, const TrafficModel& traffic, int frames, Rng& rng) {
  FrameReceiver rx = [&cfg](int active, Rng& r) -> FrameOutcome {
    if (!cfg.ideal_phy) return ncdp_full_phy_frame(active, cfg, r);
    const FrameState f(generate_pattern(active, cfg, draw_seeds(active, r)));
    return {column_weights(f.pattern), decode_frame(f, cfg)};
  };
  return run_protocol(rx, cfg, traffic, frames, rng, true);
}

Metrics simulate_crdsa(const ProtocolConfig& cfg, const TrafficModel& traffic, int frames, Rng& rng) {
  if (cfg.replicas < 2) throw ParameterError("CRDSA needs at least two replicas");
  ProtocolConfig c = cfg;
  c.policy = CoefficientPolicy::FixedReplicas;
  FrameReceiver rx = [c](int active, Rng& r) -> FrameOutcome {
    const auto seeds = draw_seeds(active, r);
    const FieldMatrix a = generate_pattern(active, c, seeds);
    return {column_weights(a), crdsa_peel(a, c.crdsa_iterations)};
  };
  return run_protocol(rx, c, traffic, frames, rng, false);
}

Metrics simulate_sa(const ProtocolConfig& cfg, const TrafficModel& traffic, int frames, Rng& rng) {
  const int slots = cfg.slots;
  FrameReceiver rx = [slots](int active, Rng& r) -> FrameOutcome {
    std::uniform_int_distribution<int> pick(0, slots - 1);
    std::vector<int> slot(static_cast<std::size_t>(active));
    std::vector<int> count(static_cast<std::size_t>(slots), 0);
    for (auto& s : slot) ++count[static_cast<std::size_t>(s = pick(r))];
    FrameOutcome out{std::vector<int>(static_cast<std::size_t>(active), 1), {}};
    for (int s : slot) out.delivered.push_back(count[static_cast<std::size_t>(s)] == 1);
    return out;
  };
  return run_protocol(rx, cfg, traffic, frames, rng, false);
}

}  // namespace ncdp
