#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ncdp/estimation.hpp"

using namespace ncdp;

namespace {

Transmission preamble_only(int mu, ChannelParams c) {
  Transmission t;
  t.burst = make_burst(mu, {});
  t.channel = c;
  return t;
}

// r(t) = sum_i b_i(t) A_i e^{j(2 pi nu_i t + phi_i)} + noise, sampled directly.
CVector symbol_model(const std::vector<RVector>& pre, const std::vector<ChannelParams>& ch, double n0,
                     Rng& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(n0));
  CVector r = CVector::Zero(pre.front().size());
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    for (std::size_t i = 0; i < pre.size(); ++i) r[t] += pre[i][t] * channel_at(ch[i], static_cast<double>(t));
    if (n0 > 0) r[t] += Complex(n(rng), n(rng));
  }
  return r;
}

struct Mse {
  double freq = 0, phase = 0, amp = 0;
};

Mse em_mse(int k, double esn0_db, int trials, std::uint64_t seed) {
  PreambleBank bank;
  EmConfig cfg;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Mse m;
  const double n0 = noise_var_from_esn0(1.0, esn0_db);
  for (int t = 0; t < trials; ++t) {
    std::vector<int> ids;
    while (static_cast<int>(ids.size()) < k) {
      const int mu = 1 + static_cast<int>(rng() % 127);
      if (std::find(ids.begin(), ids.end(), mu) == ids.end()) ids.push_back(mu);
    }
    std::vector<RVector> pre;
    std::vector<ChannelParams> ch;
    for (int mu : ids) {
      pre.push_back(bank.word(mu));
      ch.push_back({std::pow(10.0, g(rng) / 20.0), 0.01 * u(rng), kPi * (2 * u(rng) - 1), 0.0});
    }
    const ChannelEstimate est = em_estimate(symbol_model(pre, ch, n0, rng), pre, cfg, rng);
    for (int i = 0; i < k; ++i) {
      const auto& e = est.users[static_cast<std::size_t>(i)];
      m.freq += std::pow(e.freq_offset - ch[i].freq_offset, 2);
      m.phase += std::pow(std::remainder(e.phase - ch[i].phase, 2 * kPi) / kPi, 2);
      m.amp += std::pow((e.amplitude - ch[i].amplitude) / ch[i].amplitude, 2);
    }
  }
  const double n = static_cast<double>(trials * k);
  return {m.freq / n, m.phase / n, m.amp / n};
}

}  // namespace

TEST_CASE("preamble bank is orthogonal") {
  PreambleBank bank;
  CHECK(bank.size() == 127);
  const Eigen::MatrixXd c = bank.correlation_matrix();
  CHECK((c - 128.0 * Eigen::MatrixXd::Identity(127, 127)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(bank.word(0), ParameterError);
  CHECK_THROWS_AS(bank.word(128), ParameterError);
}

TEST_CASE("node identification") {
  PreambleBank bank;
  PulseShape shape;
  Rng rng(1);
  SUBCASE("single clean burst") {
    std::vector<Transmission> t{preamble_only(17, {0.8, 0.0, 0.4, 0.0})};
    const CollisionSlot slot = superpose(t, shape);
    const RVector c = preamble_correlations(preamble_samples(slot, shape, 128), bank);
    CHECK(c[16] * 128 == doctest::Approx(0.8 * 128).epsilon(1e-6));
    CHECK(identify_nodes(slot, bank, 0.5, shape) == std::set<int>{17});
  }
  SUBCASE("three distinct preambles") {
    std::vector<Transmission> t{preamble_only(3, {1, 0, 0.1, 0}), preamble_only(64, {1, 0, 2.0, 0}),
                                preamble_only(100, {1, 0, -1.0, 0})};
    const CollisionSlot slot = superpose(t, shape);
    CHECK(identify_nodes(slot, bank, 0.5, shape) == std::set<int>{3, 64, 100});
  }
  SUBCASE("noise only at 10 dB") {
    std::vector<Transmission> t{preamble_only(5, {})};
    CollisionSlot slot = superpose(t, shape);
    int empty = 0;
    const int trials = 200;
    for (int i = 0; i < trials; ++i) {
      slot.samples.setZero();
      add_awgn(slot, noise_var_from_esn0(1.0, 10.0), rng);
      empty += identify_nodes(slot, bank, 0.5, shape).empty();
    }
    CHECK(empty >= 0.99 * trials);
  }
  SUBCASE("frequency search recovers a rotated preamble") {
    std::vector<Transmission> t{preamble_only(9, {1, 0.01, 0, 0})};
    const CollisionSlot slot = superpose(t, shape);
    const CVector pre = preamble_samples(slot, shape, 128);
    Eigen::Index best;
    CHECK(preamble_correlations(pre, bank)[8] < 0.5);
    CHECK(preamble_correlations(pre, bank, 21).maxCoeff(&best) > 0.99);
    CHECK(best == 8);
    CHECK(identify_nodes(slot, bank, 0.5, shape, 21).count(9) == 1);
  }
}

TEST_CASE("tone fit recovers a clean tone") {
  CVector z(128);
  for (int t = 0; t < 128; ++t) z[t] = std::polar(1.7, 2 * kPi * 0.0063 * t - 0.9);
  const UserEstimate u = fit_tone(z, 0.01, 64);
  CHECK(std::abs(u.freq_offset - 0.0063) < 0.01 / 63 / 2);
  CHECK(u.amplitude == doctest::Approx(1.7).epsilon(1e-3));
  CHECK(u.phase == doctest::Approx(-0.9).epsilon(1e-2));
  CHECK(u.residual < 1e-3);
}

TEST_CASE("single noiseless user without offset") {
  PreambleBank bank;
  PulseShape shape;
  Rng rng(2);
  for (double phase : {-2.5, 0.0, 1.2}) {
    std::vector<Transmission> t{preamble_only(40, {1.3, 0.0, phase, 0.0})};
    const CollisionSlot slot = superpose(t, shape);
    const ChannelEstimate e = em_estimate(slot, {40}, bank, EmConfig{}, rng, shape);
    REQUIRE(e.users.size() == 1);
    CHECK(std::abs(e.users[0].amplitude - 1.3) < 1e-3);
    CHECK(std::abs(std::remainder(e.users[0].phase - phase, 2 * kPi)) < 1e-3);
    CHECK(e.objective_trace.size() == 6);
  }
  CHECK_THROWS_AS(em_estimate(CollisionSlot{}, {}, bank, EmConfig{}, rng, shape), ParameterError);
  EmConfig bad;
  bad.beta = 0.0;
  std::vector<RVector> pre{bank.word(1)};
  CHECK_THROWS_AS(em_estimate(CVector::Zero(128), pre, bad, rng), ParameterError);
}

TEST_CASE("summed objective does not increase for noiseless collisions") {
  PreambleBank bank;
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 2; k <= 4; ++k) {
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<RVector> pre;
      std::vector<ChannelParams> ch;
      for (int i = 0; i < k; ++i) {
        pre.push_back(bank.word(1 + 31 * i + trial % 31));
        ch.push_back({0.5 + u(rng), 0.01 * u(rng), kPi * (2 * u(rng) - 1), 0.0});
      }
      const ChannelEstimate e = em_estimate(symbol_model(pre, ch, 0.0, rng), pre, EmConfig{}, rng);
      for (std::size_t i = 1; i < e.objective_trace.size(); ++i)
        CHECK(e.objective_trace[i] <= e.objective_trace[i - 1] * (1 + 1e-9) + 1e-9);
    }
  }
}

TEST_CASE("estimation error falls with SNR") {
  const Mse lo = em_mse(1, 0.0, 150, 10);
  const Mse mid = em_mse(1, 5.0, 150, 11);
  const Mse hi = em_mse(1, 10.0, 150, 12);
  CHECK(mid.freq < lo.freq);
  CHECK(hi.freq < mid.freq);
  CHECK(hi.phase < lo.phase);
  CHECK(hi.amp < lo.amp);
  const Mse k4_6 = em_mse(4, 6.0, 60, 13);
  const Mse k4_14 = em_mse(4, 14.0, 60, 14);
  CHECK(std::isfinite(k4_14.freq));
  CHECK(k4_14.freq < k4_6.freq);
}

TEST_CASE("combining estimates across slots") {
  UserEstimate a{1.1, 0.004, 0.3, 2.0};
  const std::vector<UserEstimate> one{a};
  const auto same = combine_estimates(one);
  CHECK(same[0].amplitude == a.amplitude);
  CHECK(same[0].freq_offset == a.freq_offset);
  const std::vector<UserEstimate> twin{a, a};
  const auto t = combine_estimates(twin);
  CHECK(t[1].amplitude == doctest::Approx(a.amplitude));
  CHECK(t[1].freq_offset == doctest::Approx(a.freq_offset));
  const std::vector<UserEstimate> two{a, {0.9, 0.006, -1.0, 2.0}};
  const auto c = combine_estimates(two);
  CHECK(c[0].amplitude == doctest::Approx(1.0));
  CHECK(c[0].phase == 0.3);
  CHECK(c[1].phase == -1.0);
  CHECK_THROWS_AS(combine_estimates(std::span<const UserEstimate>{}), ParameterError);

  // Two slot estimates of the same user: the merged error is no worse than
  // the worse of the two.
  PreambleBank bank;
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double mse1 = 0, mse2 = 0, msec = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const ChannelParams truth{1.0, 0.01 * u(rng), 0.0, 0.0};
    std::vector<UserEstimate> slots;
    for (int s = 0; s < 2; ++s) {
      ChannelParams c = truth;
      c.phase = kPi * (2 * u(rng) - 1);
      std::vector<RVector> pre{bank.word(7), bank.word(90)};
      std::vector<ChannelParams> ch{c, {1.0, 0.01 * u(rng), kPi * (2 * u(rng) - 1), 0.0}};
      slots.push_back(em_estimate(symbol_model(pre, ch, noise_var_from_esn0(1.0, 3.0), rng), pre, EmConfig{}, rng)
                          .users[0]);
    }
    const auto merged = combine_estimates(slots);
    mse1 += std::pow(slots[0].freq_offset - truth.freq_offset, 2);
    mse2 += std::pow(slots[1].freq_offset - truth.freq_offset, 2);
    msec += std::pow(merged[0].freq_offset - truth.freq_offset, 2);
  }
  CHECK(msec <= std::max(mse1, mse2));
}
