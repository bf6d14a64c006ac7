#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <span>
#include <utility>
#include <vector>

#include "ncdp/common.hpp"
#include "ncdp/rng.hpp"

namespace ncdp {

// Time is measured in symbol periods (T_s = 1) and frequency in cycles per
// symbol, so a frequency offset of 0.01 is 1% of the symbol rate.

struct PulseShape {
  double rolloff = 0.35;
  int span = 12;         // symbols; period of srrc_pulse() and twice the slot guard
  int oversampling = 8;  // samples per symbol

  void validate() const;
};

/// Raised-cosine pulse p(t), the SRRC convolved with its matched filter.
template <typename Scalar>
Scalar raised_cosine(Scalar t, Scalar rolloff) {
  using std::abs;
  using std::cos;
  using std::sin;
  const Scalar pi = Scalar(kPi);
  const Scalar sinc = abs(t) < Scalar(1e-12) ? Scalar(1) : sin(pi * t) / (pi * t);
  if (rolloff == Scalar(0)) return sinc;
  const Scalar x = Scalar(2) * rolloff * t;
  if (abs(abs(x) - Scalar(1)) < Scalar(1e-9)) return pi / Scalar(4) * sinc;
  return sinc * cos(pi * rolloff * t) / (Scalar(1) - x * x);
}

/// Raised-cosine spectrum, unit height in the pass band.
double raised_cosine_spectrum(double f, double rolloff);

/// One period (span * oversampling taps) of the periodic SRRC with unit
/// energy, peak at index span * oversampling / 2. Its circular
/// autocorrelation is exactly zero at nonzero multiples of the oversampling.
RVector srrc_pulse(const PulseShape& shape);

/// Row `index` of the Sylvester Walsh-Hadamard matrix of the given order, as +-1.
RVector walsh_hadamard_row(int index, int order = 128);

inline constexpr int kPreambleLength = 128;
inline constexpr double kMaxFreqOffset = 0.01;

struct ChannelParams {
  double amplitude = 1.0;
  double freq_offset = 0.0;  // cycles per symbol, constant over a frame
  double phase = 0.0;        // radians, redrawn every slot
  double delay = 0.0;        // symbols, relative to the earliest burst

  void validate(double max_delay = 0.5, double max_freq = kMaxFreqOffset) const;
};

/// h(t) = A e^{j(2 pi dnu t + phi)}, t in symbols from the first preamble peak.
inline Complex channel_at(const ChannelParams& c, double t) {
  return std::polar(c.amplitude, 2.0 * kPi * c.freq_offset * t + c.phase);
}

/// Preamble followed by payload, as +-1 symbols.
struct Burst {
  int preamble_index = 0;
  int preamble_length = 0;
  RVector symbols;

  Eigen::Index payload_length() const { return symbols.size() - preamble_length; }
};

Burst make_burst(int preamble_index, std::span<const std::uint8_t> payload_bits,
                 int preamble_length = kPreambleLength);

struct Transmission {
  Burst burst;
  ChannelParams channel;
  int terminal = 0;
};

/// Superposed baseband samples of one slot. The slot is a cyclic block of
/// `period` symbols with `guard` empty symbols ahead of the bursts; symbol l
/// of a burst with zero delay peaks at sample (guard + l) * oversampling.
struct CollisionSlot {
  CVector samples;
  std::vector<std::pair<int, ChannelParams>> truth;
  double noise_var = 0.0;  // per component, at the samples and after matched filtering
  int symbols = 0;
  int guard = 0;
  int period = 0;
  int oversampling = 0;
};

CollisionSlot superpose(std::span<const Transmission> bursts, const PulseShape& shape);
void add_awgn(CollisionSlot& slot, double noise_var, Rng& rng);
CollisionSlot synthesize_collision(std::span<const Transmission> bursts, double noise_var,
                                   const PulseShape& shape, Rng& rng);

/// Matched filter evaluated at arbitrary continuous offsets. The filtered
/// spectrum is computed once; each sample() call costs one short inverse FFT.
class MatchedFilter {
 public:
  MatchedFilter(const CollisionSlot& slot, const PulseShape& shape);

  /// r(l + offset) for every symbol l of the burst.
  CVector sample(double offset) const;
  int symbols() const { return symbols_; }

 private:
  int symbols_, guard_, period_, oversampling_;
  std::vector<int> bins_;     // DFT bins inside the pulse bandwidth
  std::vector<Complex> filtered_;  // Y[k] G[k] on those bins
  std::vector<double> freq_;  // cycles per symbol of each bin
};

enum class SamplingStrategy { MD, ML, MS, US, EC };

const char* to_string(SamplingStrategy s);
std::optional<SamplingStrategy> parse_strategy(const std::string& name);

/// Sampling instants relative to the symbol grid for a strategy.
std::vector<double> sampling_offsets(SamplingStrategy strategy, std::span<const double> delays,
                                     double delay_max);

struct SampleSet {
  std::vector<double> offsets;
  std::vector<CVector> samples;  // one per offset, one entry per symbol
  std::optional<CVector> mean;   // MS, US and EC
};

SampleSet matched_filter_and_sample(const MatchedFilter& mf, SamplingStrategy strategy,
                                    std::span<const double> delays, double delay_max);
SampleSet matched_filter_and_sample(const CollisionSlot& slot, const PulseShape& shape,
                                    SamplingStrategy strategy, std::span<const double> delays,
                                    double delay_max);

/// Channel of burst q seen by a sample taken sample_delay after the symbol
/// peak at symbol_time: A e^{j(2 pi dnu (symbol_time + sample_delay) + phi)} p(sample_delay - delay_q).
Complex equivalent_channel(const ChannelParams& q, double sample_delay, const PulseShape& shape,
                           double symbol_time = 0.0);

}  // namespace ncdp
