#include "ncdp/waveform.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <tuple>

#include <unsupported/Eigen/FFT>

namespace ncdp {

void PulseShape::validate() const {
  if (!(rolloff >= 0.0 && rolloff <= 1.0)) throw ParameterError("roll-off must lie in [0, 1]");
  if (span < 2) throw ParameterError("pulse span must be >= 2 symbols");
  if (oversampling < 2) throw ParameterError("oversampling must be >= 2");
}

void ChannelParams::validate(double max_delay, double max_freq) const {
  if (!(amplitude > 0.0)) throw ParameterError("amplitude must be positive");
  if (max_delay > 0.5) throw ParameterError("maximum relative delay exceeds T_s/2");
  if (delay < 0.0 || delay > max_delay) throw ParameterError("relative delay outside [0, max]");
  if (std::abs(freq_offset) > max_freq) throw ParameterError("frequency offset too large");
}

double raised_cosine_spectrum(double f, double rolloff) {
  const double a = std::abs(f);
  const double lo = 0.5 * (1.0 - rolloff), hi = 0.5 * (1.0 + rolloff);
  if (a <= lo) return 1.0;
  if (a >= hi) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi / rolloff * (a - lo)));
}

namespace {

Eigen::FFT<double>& fft() {
  thread_local Eigen::FFT<double> instance;
  return instance;
}

bool smooth(int n) {
  for (int p : {2, 3, 5}) {
    while (n % p == 0) n /= p;
  }
  return n == 1;
}

// Discrete SRRC spectrum of a cyclic block: period symbols, ovs samples per
// symbol. Only in-band bins are kept.
struct PulseSpectrum {
  std::vector<int> bins;
  std::vector<double> freq;
  std::vector<double> gain;
};

const PulseSpectrum& pulse_spectrum(int period, int ovs, double rolloff) {
  thread_local std::map<std::tuple<int, int, double>, PulseSpectrum> cache;
  auto key = std::make_tuple(period, ovs, rolloff);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  const int m = period * ovs;
  PulseSpectrum s;
  double total = 0.0;
  for (int k = 0; k < m; ++k) {
    const int ks = k < m / 2 ? k : k - m;
    const double f = static_cast<double>(ks) / period;
    const double rc = raised_cosine_spectrum(f, rolloff);
    if (rc <= 0.0) continue;
    s.bins.push_back(k);
    s.freq.push_back(f);
    s.gain.push_back(rc);
    total += rc;
  }
  // Unit tap energy: sum g^2 = (1/M) sum |G|^2 = 1.
  const double c = std::sqrt(m / total);
  for (double& g : s.gain) g = c * std::sqrt(g);
  if (cache.size() > 16) cache.clear();
  return cache.emplace(key, std::move(s)).first->second;
}

}  // namespace

RVector srrc_pulse(const PulseShape& shape) {
  shape.validate();
  const int m = shape.span * shape.oversampling;
  const PulseSpectrum& ps = pulse_spectrum(shape.span, shape.oversampling, shape.rolloff);
  CVector spec = CVector::Zero(m);
  // Centre the peak at m/2.
  for (std::size_t i = 0; i < ps.bins.size(); ++i)
    spec[ps.bins[i]] = std::polar(ps.gain[i], -2.0 * kPi * ps.freq[i] * (shape.span / 2));
  CVector taps(m);
  fft().inv(taps, spec);
  return taps.real();
}

RVector walsh_hadamard_row(int index, int order) {
  if (order < 1 || !std::has_single_bit(static_cast<unsigned>(order)))
    throw ParameterError("Walsh-Hadamard order must be a power of two");
  if (index < 0 || index >= order) throw ParameterError("Walsh-Hadamard row out of range");
  RVector row(order);
  for (int j = 0; j < order; ++j)
    row[j] = (std::popcount(static_cast<unsigned>(index & j)) & 1) ? -1.0 : 1.0;
  return row;
}

Burst make_burst(int preamble_index, std::span<const std::uint8_t> payload_bits, int preamble_length) {
  if (preamble_length > 0 && (preamble_index < 1 || preamble_index >= preamble_length))
    throw ParameterError("preamble index must lie in [1, preamble_length)");
  Burst b;
  b.preamble_index = preamble_index;
  b.preamble_length = preamble_length;
  b.symbols.resize(preamble_length + static_cast<Eigen::Index>(payload_bits.size()));
  if (preamble_length > 0) b.symbols.head(preamble_length) = walsh_hadamard_row(preamble_index, preamble_length);
  for (std::size_t i = 0; i < payload_bits.size(); ++i)
    b.symbols[preamble_length + static_cast<Eigen::Index>(i)] = payload_bits[i] ? 1.0 : -1.0;
  return b;
}

CollisionSlot superpose(std::span<const Transmission> bursts, const PulseShape& shape) {
  shape.validate();
  if (bursts.empty()) throw ParameterError("collision needs at least one burst");
  const auto n = static_cast<int>(bursts.front().burst.symbols.size());
  for (const auto& t : bursts) {
    if (t.burst.symbols.size() != n) throw ParameterError("colliding bursts differ in length");
    t.channel.validate();
  }

  CollisionSlot slot;
  slot.symbols = n;
  slot.guard = std::max(1, shape.span / 2);
  slot.oversampling = shape.oversampling;
  slot.period = n + 2 * slot.guard;
  while (!smooth(slot.period)) ++slot.period;
  const int p = slot.period;
  const int m = p * shape.oversampling;
  const PulseSpectrum& ps = pulse_spectrum(p, shape.oversampling, shape.rolloff);

  slot.samples = CVector::Zero(m);
  CVector symbols(p), sym_spec(p), spec(m), wave(m);
  for (const auto& t : bursts) {
    symbols.setZero();
    symbols.segment(slot.guard, n) = t.burst.symbols.cast<Complex>();
    fft().fwd(sym_spec, symbols);
    // The DFT of the upsampled impulse train repeats the P-point DFT.
    spec.setZero();
    for (std::size_t i = 0; i < ps.bins.size(); ++i) {
      const int k = ps.bins[i];
      spec[k] = sym_spec[k % p] * std::polar(ps.gain[i], -2.0 * kPi * ps.freq[i] * t.channel.delay);
    }
    fft().inv(wave, spec);

    const double step = 2.0 * kPi * t.channel.freq_offset / shape.oversampling;
    const double t0 = -static_cast<double>(slot.guard);
    Complex rot = std::polar(t.channel.amplitude, 2.0 * kPi * t.channel.freq_offset * t0 + t.channel.phase);
    const Complex inc = std::polar(1.0, step);
    for (int i = 0; i < m; ++i) {
      if (i % 1024 == 0)
        rot = std::polar(t.channel.amplitude,
                         2.0 * kPi * t.channel.freq_offset * (t0 + static_cast<double>(i) / shape.oversampling) +
                             t.channel.phase);
      slot.samples[i] += rot * wave[i];
      rot *= inc;
    }
    slot.truth.emplace_back(t.terminal, t.channel);
  }
  return slot;
}

void add_awgn(CollisionSlot& slot, double noise_var, Rng& rng) {
  if (noise_var < 0.0) throw ParameterError("noise variance must be >= 0");
  slot.noise_var = noise_var;
  if (noise_var == 0.0) return;
  std::normal_distribution<double> n(0.0, std::sqrt(noise_var));
  for (Eigen::Index i = 0; i < slot.samples.size(); ++i) {
    const double re = n(rng);
    const double im = n(rng);
    slot.samples[i] += Complex(re, im);
  }
}

CollisionSlot synthesize_collision(std::span<const Transmission> bursts, double noise_var,
                                   const PulseShape& shape, Rng& rng) {
  CollisionSlot slot = superpose(bursts, shape);
  add_awgn(slot, noise_var, rng);
  return slot;
}

MatchedFilter::MatchedFilter(const CollisionSlot& slot, const PulseShape& shape)
    : symbols_(slot.symbols), guard_(slot.guard), period_(slot.period), oversampling_(slot.oversampling) {
  shape.validate();
  if (shape.oversampling != slot.oversampling) throw ParameterError("oversampling differs from the slot's");
  if (slot.samples.size() != static_cast<Eigen::Index>(period_) * oversampling_)
    throw DimensionError("slot sample count inconsistent with its layout");
  const PulseSpectrum& ps = pulse_spectrum(period_, oversampling_, shape.rolloff);
  CVector y(slot.samples.size());
  fft().fwd(y, slot.samples);
  bins_ = ps.bins;
  freq_ = ps.freq;
  filtered_.resize(bins_.size());
  for (std::size_t i = 0; i < bins_.size(); ++i) filtered_[i] = y[bins_[i]] * ps.gain[i];
}

CVector MatchedFilter::sample(double offset) const {
  // Sampling every oversampling-th point of the M-point inverse DFT equals a
  // P-point inverse DFT of the spectrum folded modulo P.
  CVector folded = CVector::Zero(period_);
  for (std::size_t i = 0; i < bins_.size(); ++i)
    folded[bins_[i] % period_] += filtered_[i] * std::polar(1.0, 2.0 * kPi * freq_[i] * offset);
  CVector r(period_);
  fft().inv(r, folded);
  return r.segment(guard_, symbols_) / static_cast<double>(oversampling_);
}

const char* to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::MD: return "MD";
    case SamplingStrategy::ML: return "ML";
    case SamplingStrategy::MS: return "MS";
    case SamplingStrategy::US: return "US";
    case SamplingStrategy::EC: return "EC";
  }
  return "?";
}

std::optional<SamplingStrategy> parse_strategy(const std::string& name) {
  for (auto s : {SamplingStrategy::MD, SamplingStrategy::ML, SamplingStrategy::MS, SamplingStrategy::US,
                 SamplingStrategy::EC}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

std::vector<double> sampling_offsets(SamplingStrategy strategy, std::span<const double> delays,
                                     double delay_max) {
  if (delays.empty()) throw ParameterError("sampling needs at least one delay");
  const auto k = delays.size();
  switch (strategy) {
    case SamplingStrategy::MD:
      return {std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(k)};
    case SamplingStrategy::US: {
      if (k == 1) return {0.5 * delay_max};
      std::vector<double> out(k);
      for (std::size_t i = 0; i < k; ++i) out[i] = delay_max * static_cast<double>(i) / static_cast<double>(k - 1);
      return out;
    }
    default:
      return {delays.begin(), delays.end()};
  }
}

SampleSet matched_filter_and_sample(const MatchedFilter& mf, SamplingStrategy strategy,
                                    std::span<const double> delays, double delay_max) {
  SampleSet set;
  set.offsets = sampling_offsets(strategy, delays, delay_max);
  for (double off : set.offsets) set.samples.push_back(mf.sample(off));
  if (strategy == SamplingStrategy::MS || strategy == SamplingStrategy::US || strategy == SamplingStrategy::EC) {
    CVector mean = CVector::Zero(mf.symbols());
    for (const auto& s : set.samples) mean += s;
    set.mean = mean / static_cast<double>(set.samples.size());
  }
  return set;
}

SampleSet matched_filter_and_sample(const CollisionSlot& slot, const PulseShape& shape,
                                    SamplingStrategy strategy, std::span<const double> delays,
                                    double delay_max) {
  return matched_filter_and_sample(MatchedFilter(slot, shape), strategy, delays, delay_max);
}

Complex equivalent_channel(const ChannelParams& q, double sample_delay, const PulseShape& shape,
                           double symbol_time) {
  return channel_at(q, symbol_time + sample_delay) *
         raised_cosine(sample_delay - q.delay, shape.rolloff);
}

}  // namespace ncdp
