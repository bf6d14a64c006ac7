#include "ncdp/fec.hpp"

#include <bit>
#include <limits>
#include <string>
#include <vector>

namespace ncdp {

void CodeSpec::validate() const {
  if (constraint_length < 2 || constraint_length > 16)
    throw ParameterError("constraint length must lie in [2, 16]");
  if (info_bits < 1) throw ParameterError("info_bits must be >= 1");
  if (tail_bits < constraint_length - 1)
    throw ParameterError("tail must flush the encoder memory");
  for (unsigned g : generators) {
    if (g == 0 || g >= (1u << constraint_length)) throw ParameterError("generator out of range");
  }
}

namespace {

inline unsigned parity(unsigned x) { return static_cast<unsigned>(std::popcount(x) & 1); }

// Register holds the newest bit in the most significant position.
inline unsigned shift_in(unsigned state, unsigned bit, int memory) {
  return (bit << memory) | state;
}

}  // namespace

BitVector encode(std::span<const std::uint8_t> info, const CodeSpec& spec) {
  spec.validate();
  if (static_cast<int>(info.size()) != spec.info_bits)
    throw ParameterError("encode: expected " + std::to_string(spec.info_bits) + " bits, got " +
                         std::to_string(info.size()));
  const int memory = spec.constraint_length - 1;
  BitVector out;
  out.reserve(static_cast<std::size_t>(spec.code_bits()));
  unsigned state = 0;
  for (int t = 0; t < spec.steps(); ++t) {
    const unsigned bit = t < spec.info_bits ? (info[static_cast<std::size_t>(t)] & 1u) : 0u;
    const unsigned reg = shift_in(state, bit, memory);
    out.push_back(static_cast<std::uint8_t>(parity(reg & spec.generators[0])));
    out.push_back(static_cast<std::uint8_t>(parity(reg & spec.generators[1])));
    state = reg >> 1;
  }
  return out;
}

DecodeResult decode_soft(const LlrVector& llrs, const CodeSpec& spec) {
  spec.validate();
  if (llrs.size() != spec.code_bits())
    throw ParameterError("decode_soft: expected " + std::to_string(spec.code_bits()) + " LLRs");
  const int memory = spec.constraint_length - 1;
  const unsigned states = 1u << memory;
  const int steps = spec.steps();
  constexpr double kNeg = -std::numeric_limits<double>::infinity();

  // Branch output pair for (state, input).
  std::vector<unsigned> out_bits(2 * states);
  for (unsigned s = 0; s < states; ++s) {
    for (unsigned b = 0; b < 2; ++b) {
      const unsigned reg = shift_in(s, b, memory);
      out_bits[2 * s + b] = parity(reg & spec.generators[0]) | (parity(reg & spec.generators[1]) << 1);
    }
  }

  std::vector<double> metric(states, kNeg), next(states);
  metric[0] = 0.0;
  // decision[t][s'] = predecessor state chosen for s'.
  std::vector<std::uint16_t> decision(static_cast<std::size_t>(steps) * states);

  for (int t = 0; t < steps; ++t) {
    const double l0 = 0.5 * llrs[2 * t], l1 = 0.5 * llrs[2 * t + 1];
    const double gain[4] = {-l0 - l1, l0 - l1, -l0 + l1, l0 + l1};
    std::fill(next.begin(), next.end(), kNeg);
    std::uint16_t* dec = decision.data() + static_cast<std::size_t>(t) * states;
    const unsigned max_bit = t < spec.info_bits ? 1u : 0u;
    for (unsigned s = 0; s < states; ++s) {
      if (metric[s] == kNeg) continue;
      for (unsigned b = 0; b <= max_bit; ++b) {
        const unsigned ns = shift_in(s, b, memory) >> 1;
        const double m = metric[s] + gain[out_bits[2 * s + b]];
        if (m > next[ns]) {
          next[ns] = m;
          dec[ns] = static_cast<std::uint16_t>(s);
        }
      }
    }
    metric.swap(next);
  }

  DecodeResult result;
  result.bits.assign(static_cast<std::size_t>(spec.info_bits), 0);
  unsigned s = 0;
  for (int t = steps - 1; t >= 0; --t) {
    if (t < spec.info_bits) result.bits[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>((s >> (memory - 1)) & 1u);
    s = decision[static_cast<std::size_t>(t) * states + s];
  }
  const double total = 0.5 * llrs.cwiseAbs().sum();
  result.metric = total > 0.0 ? metric[0] / total : 0.0;
  return result;
}

std::uint32_t crc_compute(std::span<const std::uint8_t> bits, const CrcSpec& spec) {
  if (spec.width < 1 || spec.width > 32) throw ParameterError("CRC width must lie in [1, 32]");
  const std::uint32_t top = 1u << (spec.width - 1);
  const std::uint32_t mask = spec.width == 32 ? 0xFFFFFFFFu : ((1u << spec.width) - 1u);
  std::uint32_t reg = 0;
  for (std::uint8_t b : bits) {
    const bool feedback = ((reg & top) != 0) ^ ((b & 1u) != 0);
    reg = (reg << 1) & mask;
    if (feedback) reg ^= spec.polynomial & mask;
  }
  return reg;
}

BitVector crc_append(std::span<const std::uint8_t> bits, const CrcSpec& spec) {
  const std::uint32_t crc = crc_compute(bits, spec);
  BitVector out(bits.begin(), bits.end());
  for (int i = spec.width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((crc >> i) & 1u));
  return out;
}

bool crc_check(std::span<const std::uint8_t> bits, const CrcSpec& spec) {
  if (static_cast<int>(bits.size()) < spec.width) return false;
  const auto body = bits.first(bits.size() - static_cast<std::size_t>(spec.width));
  std::uint32_t field = 0;
  for (std::size_t i = body.size(); i < bits.size(); ++i) field = (field << 1) | (bits[i] & 1u);
  return crc_compute(body, spec) == field;
}

RVector bpsk_modulate(std::span<const std::uint8_t> bits) {
  RVector out(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) out[static_cast<Eigen::Index>(i)] = bits[i] ? 1.0 : -1.0;
  return out;
}

}  // namespace ncdp
