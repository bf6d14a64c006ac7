#pragma once

#include <set>
#include <span>
#include <vector>

#include "ncdp/common.hpp"
#include "ncdp/rng.hpp"
#include "ncdp/waveform.hpp"

namespace ncdp {

/// Walsh-Hadamard preambles. Row 0 (all ones) is reserved, so valid indices
/// are 1 .. length-1.
class PreambleBank {
 public:
  explicit PreambleBank(int length = kPreambleLength);

  int length() const { return length_; }
  int size() const { return length_ - 1; }
  const RVector& word(int index) const;
  /// Gram matrix of the usable words, size() x size().
  Eigen::MatrixXd correlation_matrix() const;

 private:
  int length_;
  std::vector<RVector> words_;
};

/// Matched-filter samples of the preamble region at the given offset.
CVector preamble_samples(const CollisionSlot& slot, const PulseShape& shape, int preamble_length,
                         double offset = 0.0);

/// |sum_t r(t) w_mu(t) e^{-j 2 pi nu t}| / length, maximised over `freq_points`
/// frequencies evenly spread on [0, freq_max]; entry mu - 1 belongs to index mu.
RVector preamble_correlations(const CVector& preamble, const PreambleBank& bank, int freq_points = 1,
                              double freq_max = kMaxFreqOffset);

std::set<int> identify_nodes(const CollisionSlot& slot, const PreambleBank& bank, double threshold,
                             const PulseShape& shape = {}, int freq_points = 1);

struct EmConfig {
  double beta = 0.8;
  int iterations = 6;
  int restarts = 2;
  double freq_max = kMaxFreqOffset;
  int freq_grid = 64;

  void validate() const;
};

struct UserEstimate {
  double amplitude = 0.0;
  double freq_offset = 0.0;
  double phase = 0.0;
  double residual = 0.0;  // final M-step objective of this user
};

struct ChannelEstimate {
  std::vector<UserEstimate> users;
  double residual = 0.0;                // |r - sum of fitted signals|^2 after the last iteration
  std::vector<double> objective_trace;  // summed M-step objective per iteration, selected run
};

/// Fit A e^{j(2 pi nu t + phi)}, t = 0..N-1, to z in the least-squares sense
/// with nu restricted to [0, freq_max].
UserEstimate fit_tone(const CVector& z, double freq_max, int freq_grid);

/// EM estimation of the channels of the users whose preamble symbols are
/// given, from the superposed preamble samples r(t), t = 0..N-1.
ChannelEstimate em_estimate(const CVector& samples, std::span<const RVector> preambles, const EmConfig& cfg,
                            Rng& rng);
ChannelEstimate em_estimate(const CollisionSlot& slot, const std::vector<int>& active,
                            const PreambleBank& bank, const EmConfig& cfg, Rng& rng,
                            const PulseShape& shape = {});

/// Merge estimates of one user from several slots: amplitude and frequency
/// become the residual-weighted mean, the per-slot phases are kept.
std::vector<UserEstimate> combine_estimates(std::span<const UserEstimate> estimates);

}  // namespace ncdp
