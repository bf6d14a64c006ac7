#pragma once

#include <span>
#include <vector>

#include "ncdp/common.hpp"
#include "ncdp/fec.hpp"
#include "ncdp/waveform.hpp"

namespace ncdp {

inline constexpr int kMaxCollisionSize = 8;
inline constexpr double kLlrClamp = 50.0;

/// All 2^k antipodal vectors d, split by the parity of their +1 count.
/// Row j of `symbols` is the vector whose +1 positions are the set bits of j.
struct HypothesisSet {
  int k = 0;
  Eigen::MatrixXd symbols;  // 2^k x k
  std::vector<int> odd, even;
};

HypothesisSet make_hypotheses(int k);

/// LLR of the XOR of k BPSK bits from one sample r with channels h;
/// positive means the XOR is 1.
double llr_xor(Complex r, std::span<const Complex> h, double n0);

/// One LLR per symbol: samples has N entries, channels is N x k.
LlrVector llr_xor(const CVector& samples, const CMatrix& channels, double n0);

/// Combine the per-offset sample sets of a strategy into one LLR per symbol.
/// `channels` holds h(t_l) (N x k). For EC, `eq_channels` holds one N x k
/// matrix of equivalent channels per sampling offset.
LlrVector llr_multi_sample(const SampleSet& set, SamplingStrategy strategy, const CMatrix& channels,
                           const std::vector<CMatrix>* eq_channels, double n0);

}  // namespace ncdp
