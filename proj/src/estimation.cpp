#include "ncdp/estimation.hpp"

#include <algorithm>
#include <limits>

namespace ncdp {

PreambleBank::PreambleBank(int length) : length_(length) {
  if (length < 2) throw ParameterError("preamble length must be >= 2");
  for (int i = 1; i < length; ++i) words_.push_back(walsh_hadamard_row(i, length));
}

const RVector& PreambleBank::word(int index) const {
  if (index < 1 || index >= length_) throw ParameterError("preamble index out of range");
  return words_[static_cast<std::size_t>(index - 1)];
}

Eigen::MatrixXd PreambleBank::correlation_matrix() const {
  Eigen::MatrixXd w(size(), length_);
  for (int i = 0; i < size(); ++i) w.row(i) = words_[static_cast<std::size_t>(i)].transpose();
  return w * w.transpose();
}

CVector preamble_samples(const CollisionSlot& slot, const PulseShape& shape, int preamble_length,
                         double offset) {
  if (preamble_length > slot.symbols) throw DimensionError("slot shorter than the preamble");
  return MatchedFilter(slot, shape).sample(offset).head(preamble_length);
}

RVector preamble_correlations(const CVector& preamble, const PreambleBank& bank, int freq_points,
                              double freq_max) {
  if (preamble.size() != bank.length()) throw DimensionError("preamble length differs from the bank");
  if (freq_points < 1) throw ParameterError("need at least one frequency point");
  RVector best = RVector::Zero(bank.size());
  CVector derotated(preamble.size());
  for (int f = 0; f < freq_points; ++f) {
    const double nu = freq_points == 1 ? 0.0 : freq_max * f / (freq_points - 1);
    for (Eigen::Index t = 0; t < preamble.size(); ++t)
      derotated[t] = preamble[t] * std::polar(1.0, -2.0 * kPi * nu * static_cast<double>(t));
    for (int mu = 1; mu <= bank.size(); ++mu) {
      const double c = std::abs(derotated.dot(bank.word(mu).cast<Complex>()));
      best[mu - 1] = std::max(best[mu - 1], c / bank.length());
    }
  }
  return best;
}

std::set<int> identify_nodes(const CollisionSlot& slot, const PreambleBank& bank, double threshold,
                             const PulseShape& shape, int freq_points) {
  const RVector c = preamble_correlations(preamble_samples(slot, shape, bank.length()), bank, freq_points);
  std::set<int> found;
  for (int mu = 1; mu <= bank.size(); ++mu) {
    if (c[mu - 1] > threshold) found.insert(mu);
  }
  return found;
}

void EmConfig::validate() const {
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("EM relaxation must lie in (0, 1]");
  if (iterations < 1 || restarts < 1) throw ParameterError("EM needs >= 1 iteration and restart");
  if (!(freq_max >= 0.0)) throw ParameterError("frequency range must be non-negative");
  if (freq_grid < 3) throw ParameterError("frequency grid needs >= 3 points");
}

namespace {

// e^{-j 2 pi nu t} correlation with z.
Complex tone_corr(const CVector& z, double nu) {
  const Complex step = std::polar(1.0, -2.0 * kPi * nu);
  Complex rot(1.0, 0.0), acc(0.0, 0.0);
  for (Eigen::Index t = 0; t < z.size(); ++t) {
    acc += z[t] * rot;
    rot *= step;
  }
  return acc;
}

void tone(const UserEstimate& u, CVector& out) {
  const Complex step = std::polar(1.0, 2.0 * kPi * u.freq_offset);
  Complex rot = std::polar(u.amplitude, u.phase);
  for (Eigen::Index t = 0; t < out.size(); ++t) {
    out[t] = rot;
    rot *= step;
  }
}

}  // namespace

UserEstimate fit_tone(const CVector& z, double freq_max, int freq_grid) {
  const auto n = static_cast<double>(z.size());
  if (z.size() == 0) throw DimensionError("empty signal");
  // For fixed nu the optimum is A e^{j phi} = c(nu) / N, leaving
  // |z|^2 - |c(nu)|^2 / N; so maximise |c(nu)|.
  std::vector<double> power(static_cast<std::size_t>(freq_grid));
  const double step = freq_max / (freq_grid - 1);
  std::size_t best = 0;
  for (std::size_t g = 0; g < power.size(); ++g) {
    power[g] = std::norm(tone_corr(z, step * static_cast<double>(g)));
    if (power[g] > power[best]) best = g;
  }
  double nu = step * static_cast<double>(best);
  if (best > 0 && best + 1 < power.size()) {
    const double a = power[best - 1], b = power[best], c = power[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) nu += step * std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }
  const Complex c = tone_corr(z, nu);
  UserEstimate u;
  u.freq_offset = nu;
  u.amplitude = std::abs(c) / n;
  u.phase = std::arg(c);
  u.residual = std::max(0.0, z.squaredNorm() - std::norm(c) / n);
  return u;
}

ChannelEstimate em_estimate(const CVector& samples, std::span<const RVector> preambles, const EmConfig& cfg,
                            Rng& rng) {
  cfg.validate();
  const auto k = preambles.size();
  if (k == 0) throw ParameterError("EM needs at least one active user");
  const Eigen::Index n = samples.size();
  for (const auto& p : preambles) {
    if (p.size() != n) throw DimensionError("preamble length differs from the samples");
  }

  std::uniform_real_distribution<double> amp(0.0, 2.0), ph(-kPi, kPi), fr(0.0, cfg.freq_max);
  ChannelEstimate best;
  best.residual = std::numeric_limits<double>::infinity();
  std::vector<CVector> fitted(k, CVector(n));
  CVector z(n);
  for (int run = 0; run < cfg.restarts; ++run) {
    ChannelEstimate est;
    est.users.resize(k);
    for (auto& u : est.users) {
      u.amplitude = 2.0 - amp(rng);  // (0, 2]
      u.phase = ph(rng);
      u.freq_offset = fr(rng);
    }
    for (int it = 0; it < cfg.iterations; ++it) {
      CVector residual = samples;
      for (std::size_t i = 0; i < k; ++i) {
        tone(est.users[i], fitted[i]);
        fitted[i].array() *= preambles[i].array().cast<Complex>();
        residual -= fitted[i];
      }
      double objective = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        z = (fitted[i] + cfg.beta * residual).cwiseProduct(preambles[i].cast<Complex>());
        est.users[i] = fit_tone(z, cfg.freq_max, cfg.freq_grid);
        objective += est.users[i].residual;
      }
      est.objective_trace.push_back(objective);
    }
    CVector residual = samples;
    for (std::size_t i = 0; i < k; ++i) {
      tone(est.users[i], fitted[i]);
      residual -= fitted[i].cwiseProduct(preambles[i].cast<Complex>());
    }
    est.residual = residual.squaredNorm();
    if (est.residual < best.residual) best = std::move(est);
  }
  return best;
}

ChannelEstimate em_estimate(const CollisionSlot& slot, const std::vector<int>& active,
                            const PreambleBank& bank, const EmConfig& cfg, Rng& rng,
                            const PulseShape& shape) {
  if (active.empty()) throw ParameterError("EM needs at least one active user");
  std::vector<RVector> pre;
  for (int mu : active) pre.push_back(bank.word(mu));
  return em_estimate(preamble_samples(slot, shape, bank.length()), pre, cfg, rng);
}

std::vector<UserEstimate> combine_estimates(std::span<const UserEstimate> estimates) {
  if (estimates.empty()) throw ParameterError("nothing to combine");
  if (estimates.size() == 1) return {estimates.begin(), estimates.end()};
  double wsum = 0.0, amp = 0.0, freq = 0.0;
  for (const auto& e : estimates) {
    const double w = 1.0 / std::max(e.residual, 1e-12);
    wsum += w;
    amp += w * e.amplitude;
    freq += w * e.freq_offset;
  }
  std::vector<UserEstimate> out(estimates.begin(), estimates.end());
  for (auto& e : out) {
    e.amplitude = amp / wsum;
    e.freq_offset = freq / wsum;
  }
  return out;
}

}  // namespace ncdp
