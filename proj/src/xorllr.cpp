#include "ncdp/xorllr.hpp"

#include <algorithm>
#include <bit>

namespace ncdp {

namespace {

void check_args(int k, double n0) {
  if (k < 1) throw ParameterError("collision size must be >= 1");
  if (k > kMaxCollisionSize) throw ParameterError("collision size above the enumeration cap of 8");
  if (!(n0 > 0.0)) throw ParameterError("noise variance must be positive");
}

double log_sum_exp(const double* v, std::size_t n) {
  const double m = *std::max_element(v, v + n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// Metric -|r - d.h|^2 / (2 n0) for every hypothesis, split by parity.
double llr_one(Complex r, const Complex* h, const HypothesisSet& hs, double n0, double* odd, double* even) {
  const double scale = -0.5 / n0;
  std::size_t no = 0, ne = 0;
  for (Eigen::Index j = 0; j < hs.symbols.rows(); ++j) {
    Complex s(0.0, 0.0);
    for (int q = 0; q < hs.k; ++q) s += hs.symbols(j, q) * h[q];
    const double metric = scale * std::norm(r - s);
    if (std::popcount(static_cast<unsigned>(j)) & 1)
      odd[no++] = metric;
    else
      even[ne++] = metric;
  }
  const double l = log_sum_exp(odd, no) - log_sum_exp(even, ne);
  return std::clamp(l, -kLlrClamp, kLlrClamp);
}

const HypothesisSet& cached_hypotheses(int k) {
  thread_local std::vector<HypothesisSet> cache(kMaxCollisionSize + 1);
  if (cache[k].k != k) cache[k] = make_hypotheses(k);
  return cache[k];
}

}  // namespace

HypothesisSet make_hypotheses(int k) {
  if (k < 1 || k > kMaxCollisionSize) throw ParameterError("collision size outside [1, 8]");
  HypothesisSet hs;
  hs.k = k;
  const int count = 1 << k;
  hs.symbols.resize(count, k);
  for (int j = 0; j < count; ++j) {
    for (int q = 0; q < k; ++q) hs.symbols(j, q) = (j >> q) & 1 ? 1.0 : -1.0;
    (std::popcount(static_cast<unsigned>(j)) & 1 ? hs.odd : hs.even).push_back(j);
  }
  return hs;
}

double llr_xor(Complex r, std::span<const Complex> h, double n0) {
  const int k = static_cast<int>(h.size());
  check_args(k, n0);
  double odd[1 << (kMaxCollisionSize - 1)], even[1 << (kMaxCollisionSize - 1)];
  return llr_one(r, h.data(), cached_hypotheses(k), n0, odd, even);
}

LlrVector llr_xor(const CVector& samples, const CMatrix& channels, double n0) {
  const int k = static_cast<int>(channels.cols());
  check_args(k, n0);
  if (channels.rows() != samples.size()) throw DimensionError("one channel row per sample required");
  const HypothesisSet& hs = cached_hypotheses(k);
  double odd[1 << (kMaxCollisionSize - 1)], even[1 << (kMaxCollisionSize - 1)];
  LlrVector out(samples.size());
  Complex h[kMaxCollisionSize];
  for (Eigen::Index l = 0; l < samples.size(); ++l) {
    for (int q = 0; q < k; ++q) h[q] = channels(l, q);
    out[l] = llr_one(samples[l], h, hs, n0, odd, even);
  }
  return out;
}

LlrVector llr_multi_sample(const SampleSet& set, SamplingStrategy strategy, const CMatrix& channels,
                           const std::vector<CMatrix>* eq_channels, double n0) {
  if (set.samples.empty()) throw ParameterError("empty sample set");
  const auto mean_sample = [&] {
    if (set.mean) return *set.mean;
    CVector m = CVector::Zero(set.samples.front().size());
    for (const auto& s : set.samples) m += s;
    return CVector(m / static_cast<double>(set.samples.size()));
  };
  switch (strategy) {
    case SamplingStrategy::MD:
      return llr_xor(set.samples.front(), channels, n0);
    case SamplingStrategy::ML: {
      LlrVector acc = LlrVector::Zero(set.samples.front().size());
      for (const auto& s : set.samples) acc += llr_xor(s, channels, n0);
      return acc / static_cast<double>(set.samples.size());
    }
    case SamplingStrategy::MS:
    case SamplingStrategy::US:
      return llr_xor(mean_sample(), channels, n0);
    case SamplingStrategy::EC: {
      if (eq_channels == nullptr || eq_channels->size() != set.samples.size())
        throw ParameterError("EC needs one equivalent-channel matrix per sampling offset");
      CMatrix heq = CMatrix::Zero(channels.rows(), channels.cols());
      for (const auto& m : *eq_channels) {
        if (m.rows() != channels.rows() || m.cols() != channels.cols())
          throw DimensionError("equivalent-channel matrix has the wrong shape");
        heq += m;
      }
      heq /= static_cast<double>(eq_channels->size());
      return llr_xor(mean_sample(), heq, n0);
    }
  }
  throw ParameterError("unknown sampling strategy");
}

}  // namespace ncdp
