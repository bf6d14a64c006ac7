#include "ncdp/link.hpp"

#include <algorithm>

namespace ncdp {

int LinkConfig::payload_bits() const { return code.info_bits - crc.width; }

double LinkConfig::noise_var() const { return noise_var_from_ebn0(ebn0_db, code.rate()); }

void LinkConfig::validate() const {
  shape.validate();
  code.validate();
  em.validate();
  if (payload_bits() < 1) throw ParameterError("code too short for the CRC");
  if (delay_max < 0.0 || delay_max > 0.5) throw ParameterError("delay_max must lie in [0, 0.5]");
  if (freq_max < 0.0 || freq_max > kMaxFreqOffset) throw ParameterError("freq_max must lie in [0, 0.01]");
  if (amplitude_sigma_db < 0.0) throw ParameterError("amplitude spread must be >= 0");
}

SlotUser make_user(int preamble, std::span<const std::uint8_t> payload, const ChannelParams& channel,
                   const LinkConfig& cfg) {
  if (static_cast<int>(payload.size()) != cfg.payload_bits())
    throw DimensionError("payload length differs from the code");
  return {preamble, crc_append(payload, cfg.crc), channel};
}

std::vector<SlotUser> draw_users(int k, const LinkConfig& cfg, Rng& rng) {
  if (k < 1 || k >= cfg.preamble_length) throw ParameterError("collision size out of range");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<int> ids;
  while (static_cast<int>(ids.size()) < k) {
    const int mu = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.preamble_length - 1));
    if (std::find(ids.begin(), ids.end(), mu) == ids.end()) ids.push_back(mu);
  }
  std::vector<SlotUser> users;
  BitVector payload(static_cast<std::size_t>(cfg.payload_bits()));
  for (int mu : ids) {
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng() & 1u);
    ChannelParams c;
    c.amplitude = cfg.amplitude_sigma_db > 0 ? std::pow(10.0, cfg.amplitude_sigma_db * g(rng) / 20.0) : 1.0;
    c.freq_offset = cfg.freq_max * u(rng);
    c.phase = kPi * (2.0 * u(rng) - 1.0);
    c.delay = cfg.delay_max * u(rng);
    users.push_back(make_user(mu, payload, c, cfg));
  }
  return users;
}

CollisionSlot transmit(std::span<const SlotUser> users, const LinkConfig& cfg, bool synchronous) {
  std::vector<Transmission> tx;
  tx.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    Transmission t;
    t.burst = make_burst(users[i].preamble, encode(users[i].info, cfg.code), cfg.preamble_length);
    t.channel = users[i].channel;
    if (synchronous) t.channel.delay = 0.0;
    t.terminal = static_cast<int>(i);
    tx.push_back(std::move(t));
  }
  return superpose(tx, cfg.shape);
}

XorDecision decode_xor(const CollisionSlot& slot, std::span<const SlotUser> users, const ReceiverMode& mode,
                       const LinkConfig& cfg, Rng& rng) {
  const auto k = static_cast<int>(users.size());
  if (k < 1) throw ParameterError("nothing to decode");
  const int pre = cfg.preamble_length;
  const int n = cfg.code.code_bits();
  if (slot.symbols != pre + n) throw DimensionError("slot length differs from preamble plus codeword");

  std::vector<ChannelParams> ch;
  std::vector<double> delays;
  for (const auto& u : users) {
    ch.push_back(u.channel);
    if (mode.synchronous) ch.back().delay = 0.0;
    delays.push_back(ch.back().delay);
  }
  const double n0 = slot.noise_var > 0.0 ? slot.noise_var : cfg.noise_var();
  const MatchedFilter mf(slot, cfg.shape);

  if (mode.estimated_csi) {
    const auto md = sampling_offsets(SamplingStrategy::MD, delays, cfg.delay_max);
    const CVector r = mf.sample(md.front()).head(pre);
    std::vector<RVector> words;
    for (const auto& u : users) words.push_back(walsh_hadamard_row(u.preamble, pre));
    const ChannelEstimate est = em_estimate(r, words, cfg.em, rng);
    for (int q = 0; q < k; ++q) {
      ch[q].amplitude = std::max(est.users[q].amplitude, 1e-9);
      ch[q].freq_offset = est.users[q].freq_offset;
      ch[q].phase = est.users[q].phase;
    }
  }

  const double dmax = mode.synchronous ? 0.0 : cfg.delay_max;
  SampleSet set = matched_filter_and_sample(mf, mode.strategy, delays, dmax);
  for (auto& s : set.samples) s = CVector(s.tail(n));
  if (set.mean) set.mean = CVector(set.mean->tail(n));

  CMatrix h(n, k);
  for (int l = 0; l < n; ++l) {
    for (int q = 0; q < k; ++q) h(l, q) = channel_at(ch[q], static_cast<double>(pre + l));
  }
  std::vector<CMatrix> eq;
  if (mode.strategy == SamplingStrategy::EC) {
    for (double off : set.offsets) {
      CMatrix m(n, k);
      for (int q = 0; q < k; ++q) {
        const double p = raised_cosine(off - ch[q].delay, cfg.shape.rolloff);
        for (int l = 0; l < n; ++l) m(l, q) = channel_at(ch[q], pre + l + off) * p;
      }
      eq.push_back(std::move(m));
    }
  }
  const LlrVector llr = llr_multi_sample(set, mode.strategy, h, eq.empty() ? nullptr : &eq, n0);
  XorDecision d;
  d.bits = decode_soft(llr, cfg.code).bits;
  d.crc_ok = crc_check(d.bits, cfg.crc);
  return d;
}

std::vector<bool> simulate_link_frame(int k, const LinkConfig& cfg, std::span<const ReceiverMode> modes,
                                      Rng& rng) {
  cfg.validate();
  const std::vector<SlotUser> users = draw_users(k, cfg, rng);
  BitVector truth = users.front().info;
  for (std::size_t i = 1; i < users.size(); ++i) truth = xor_bits(truth, users[i].info);

  std::optional<CollisionSlot> async, sync;
  const double n0 = cfg.noise_var();
  CollisionSlot noise;
  std::vector<bool> errors;
  for (const auto& mode : modes) {
    auto& slot = mode.synchronous ? sync : async;
    if (!slot) {
      slot = transmit(users, cfg, mode.synchronous);
      // Both variants see the same noise realization.
      if (noise.samples.size() == 0) {
        noise = *slot;
        noise.samples.setZero();
        add_awgn(noise, n0, rng);
      }
      slot->samples += noise.samples;
      slot->noise_var = n0;
    }
    const XorDecision d = decode_xor(*slot, users, mode, cfg, rng);
    errors.push_back(d.bits != truth);
  }
  return errors;
}

}  // namespace ncdp
