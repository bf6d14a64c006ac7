#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ncdp/galois.hpp"
#include "ncdp/link.hpp"
#include "ncdp/rng.hpp"

namespace ncdp {

enum class CoefficientPolicy { Uniform, FixedProbability, FixedReplicas };
enum class Feedback { None, Arq };
/// Gaussian recovers every uniquely determined message; FullRankOnly
/// delivers a frame only when the whole pattern has full column rank.
enum class DecodeMode { Gaussian, FullRankOnly };

struct ProtocolConfig {
  int slots = 150;
  int field_degree = 8;
  std::uint32_t field_polynomial = 0;
  CoefficientPolicy policy = CoefficientPolicy::FixedReplicas;
  double tx_probability = 0.0453;  // FixedProbability
  int replicas = 2;                // FixedReplicas and CRDSA
  Feedback feedback = Feedback::None;
  int backlog = 50;         // B, frames
  int warmup_frames = -1;   // ARQ only; negative means B
  DecodeMode decode = DecodeMode::Gaussian;
  int max_active = kPreambleLength - 1;  // distinct preambles per frame
  int crdsa_iterations = 20;
  bool ideal_phy = true;
  LinkConfig phy;  // used when ideal_phy is false

  void validate() const;
  /// Per-slot probability of a nonzero coefficient.
  double transmit_probability() const;
  int warmup() const { return warmup_frames < 0 ? backlog : warmup_frames; }
};

struct TrafficModel {
  double load = 0.5;  // G, new messages per slot
  void validate() const;
};

struct Metrics {
  double load = 0.0;        // empirical G over the measured window
  double throughput = 0.0;  // Phi
  double loss_rate = 0.0;   // Upsilon
  double energy = 0.0;      // eta
  double throughput_se = 0.0;
  double energy_se = 0.0;

  std::int64_t frames = 0, slots = 0;
  std::int64_t arrivals = 0, delivered = 0, lost = 0, in_flight = 0;
  std::int64_t transmissions = 0;  // bursts sent during the window
  std::int64_t refused = 0;        // terminals beyond the preamble limit
  // Whole-run accounting: arrivals = delivered + in flight + lost.
  std::int64_t total_arrivals = 0, total_delivered = 0, total_lost = 0;
};

/// Column of coefficients for one terminal: the first S outputs of the
/// seeded generator mapped through the policy.
SymbolVector coefficient_column(std::uint64_t seed, const ProtocolConfig& cfg);
FieldMatrix generate_pattern(int active, const ProtocolConfig& cfg, std::span<const std::uint64_t> seeds);

struct FrameState {
  explicit FrameState(FieldMatrix a) : pattern(std::move(a)) {}

  FieldMatrix pattern;
  std::vector<bool> row_decoded;          // slot equation available
  std::vector<SymbolVector> rows;         // decoded XOR per slot (full PHY), else empty
  std::vector<SymbolVector> messages;     // transmitted messages (full PHY)
};

/// Recovered flags per terminal from the usable slot equations.
std::vector<bool> decode_frame(const FrameState& frame, const ProtocolConfig& cfg);

/// MAC-abstract successive interference cancellation over the occupied
/// slots of a pattern, at most `iterations` rounds.
std::vector<bool> crdsa_peel(const FieldMatrix& pattern, int iterations);

/// Per-frame receiver: given the number of active terminals, returns the
/// bursts each one sent and whether it was recovered.
struct FrameOutcome {
  std::vector<int> transmissions;
  std::vector<bool> delivered;
};
using FrameReceiver = std::function<FrameOutcome(int active, Rng& rng)>;

/// Arrival, backlog and metric bookkeeping shared by every protocol.
Metrics run_protocol(const FrameReceiver& receiver, const ProtocolConfig& cfg, const TrafficModel& traffic,
                     int frames, Rng& rng, bool preamble_limit);

Metrics simulate_ncdp(const ProtocolConfig& cfg, const TrafficModel& traffic, int frames, Rng& rng);
Metrics simulate_crdsa(const ProtocolConfig& cfg, const TrafficModel& traffic, int frames, Rng& rng);
Metrics simulate_sa(const ProtocolConfig& cfg, const TrafficModel& traffic, int frames, Rng& rng);

/// One NCDP frame through the full physical layer: every occupied slot is
/// synthesized, XOR-decoded and CRC-checked; failed slots drop out of the system.
FrameOutcome ncdp_full_phy_frame(int active, const ProtocolConfig& cfg, Rng& rng);

const char* to_string(CoefficientPolicy p);

}  // namespace ncdp
