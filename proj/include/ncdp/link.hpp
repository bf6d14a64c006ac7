#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ncdp/estimation.hpp"
#include "ncdp/fec.hpp"
#include "ncdp/waveform.hpp"
#include "ncdp/xorllr.hpp"

namespace ncdp {

/// Physical layer of one slot: k terminals send coded BPSK bursts and the
/// receiver decodes the XOR of their messages.
struct LinkConfig {
  PulseShape shape;
  CodeSpec code;
  CrcSpec crc;
  EmConfig em;
  double ebn0_db = 8.0;
  double delay_max = 0.0;  // relative delays uniform on [0, delay_max] symbols
  double freq_max = kMaxFreqOffset;
  double amplitude_sigma_db = 0.0;  // lognormal spread; 0 gives unit amplitudes
  int preamble_length = kPreambleLength;

  int payload_bits() const;  // info bits minus the CRC
  double noise_var() const;
  void validate() const;
};

/// How the receiver turns a slot into LLRs.
struct ReceiverMode {
  SamplingStrategy strategy = SamplingStrategy::MD;
  bool estimated_csi = false;
  bool synchronous = false;  // same frame with every delay forced to zero
};

struct SlotUser {
  int preamble = 1;
  BitVector info;  // payload followed by its CRC, code.info_bits long
  ChannelParams channel;
};

/// Random payloads, distinct preambles and channels for k terminals.
std::vector<SlotUser> draw_users(int k, const LinkConfig& cfg, Rng& rng);
SlotUser make_user(int preamble, std::span<const std::uint8_t> payload, const ChannelParams& channel,
                   const LinkConfig& cfg);

/// Noiseless superposition of the users' coded bursts.
CollisionSlot transmit(std::span<const SlotUser> users, const LinkConfig& cfg, bool synchronous = false);

struct XorDecision {
  BitVector bits;  // decoded info bits (payload + CRC of the XOR)
  bool crc_ok = false;
};

/// Decode the XOR of the users' info bits. Delays and identities are known;
/// amplitudes, frequencies and phases come from `users` or from the EM.
XorDecision decode_xor(const CollisionSlot& slot, std::span<const SlotUser> users, const ReceiverMode& mode,
                       const LinkConfig& cfg, Rng& rng);

/// One collision decoded by several receivers over a shared noise
/// realization. Entry i is true when receiver i got the XOR wrong.
std::vector<bool> simulate_link_frame(int k, const LinkConfig& cfg, std::span<const ReceiverMode> modes,
                                      Rng& rng);

}  // namespace ncdp
