#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "ncdp/common.hpp"

namespace ncdp {

/// LLRs, one per code bit. Positive means the bit is more likely a 1.
using LlrVector = Eigen::VectorXd;

/// Zero-terminated rate-1/2 feedforward convolutional code. The tail holds
/// at least constraint_length - 1 zeros; extra zeros pad the codeword to a
/// chosen length and keep the code linear.
struct CodeSpec {
  int info_bits = 744;
  int tail_bits = 8;
  int constraint_length = 7;
  std::array<unsigned, 2> generators{0133, 0171};

  int steps() const { return info_bits + tail_bits; }
  int code_bits() const { return 2 * steps(); }
  double rate() const { return static_cast<double>(info_bits) / code_bits(); }
  void validate() const;
};

BitVector encode(std::span<const std::uint8_t> info, const CodeSpec& spec);

struct DecodeResult {
  BitVector bits;
  /// Correlation of the chosen codeword with the LLRs, normalized by
  /// sum |L| / 2. 1 means every hard decision agrees; 0 for pure erasures.
  double metric = 0.0;
};

/// Soft-input Viterbi decoding (maximum likelihood over the terminated trellis).
DecodeResult decode_soft(const LlrVector& llrs, const CodeSpec& spec);

/// CRC with zero initial register and no output XOR, so the checksum is a
/// linear map over GF(2).
struct CrcSpec {
  std::uint32_t polynomial = 0x1021;
  int width = 16;
};

std::uint32_t crc_compute(std::span<const std::uint8_t> bits, const CrcSpec& spec = {});
BitVector crc_append(std::span<const std::uint8_t> bits, const CrcSpec& spec = {});
bool crc_check(std::span<const std::uint8_t> bits, const CrcSpec& spec = {});

/// BPSK mapping 0 -> -1, 1 -> +1.
RVector bpsk_modulate(std::span<const std::uint8_t> bits);

}  // namespace ncdp
