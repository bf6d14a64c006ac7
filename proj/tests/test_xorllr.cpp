#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ncdp/xorllr.hpp"

using namespace ncdp;

namespace {

// Direct evaluation of the likelihood ratio without log-sum-exp.
double naive_llr(Complex r, const std::vector<Complex>& h, double n0) {
  const int k = static_cast<int>(h.size());
  double odd = 0.0, even = 0.0;
  for (int mask = 0; mask < (1 << k); ++mask) {
    Complex s(0, 0);
    int ones = 0;
    for (int q = 0; q < k; ++q) {
      const bool plus = (mask >> q) & 1;
      ones += plus;
      s += (plus ? 1.0 : -1.0) * h[q];
    }
    const double w = std::exp(-std::norm(r - s) / (2.0 * n0));
    (ones % 2 ? odd : even) += w;
  }
  return std::log(odd / even);
}

}  // namespace

TEST_CASE("hypothesis partition is exact") {
  for (int k = 1; k <= kMaxCollisionSize; ++k) {
    const HypothesisSet hs = make_hypotheses(k);
    CHECK(hs.odd.size() + hs.even.size() == (std::size_t{1} << k));
    CHECK(hs.odd.size() == hs.even.size());
    // The all -1 vector has zero +1 entries, hence even.
    CHECK(hs.even.front() == 0);
    CHECK((hs.symbols.row(0).array() == -1.0).all());
  }
  CHECK_THROWS_AS(make_hypotheses(0), ParameterError);
  CHECK_THROWS_AS(make_hypotheses(9), ParameterError);
}

TEST_CASE("hand-enumerated examples") {
  const std::vector<Complex> one{1.0};
  CHECK(llr_xor(Complex(1, 0), one, 1.0) == doctest::Approx(2.0));
  const std::vector<Complex> two{1.0, 1.0};
  CHECK(llr_xor(Complex(0, 0), two, 1.0) == doctest::Approx(2.0));
  const double want = std::log(2.0 * std::exp(-2.0) / (1.0 + std::exp(-8.0)));
  CHECK(llr_xor(Complex(2, 0), two, 1.0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(-1.3072).epsilon(1e-4));
}

TEST_CASE("invalid arguments") {
  CHECK_THROWS_AS(llr_xor(Complex(0, 0), std::span<const Complex>{}, 1.0), ParameterError);
  const std::vector<Complex> h{1.0};
  CHECK_THROWS_AS(llr_xor(Complex(0, 0), h, 0.0), ParameterError);
  CHECK_THROWS_AS(llr_xor(Complex(0, 0), h, -1.0), ParameterError);
  const std::vector<Complex> nine(9, Complex(1, 0));
  CHECK_THROWS_AS(llr_xor(Complex(0, 0), nine, 1.0), ParameterError);
  CHECK_THROWS_AS(llr_xor(CVector::Zero(3), CMatrix::Ones(2, 1), 1.0), DimensionError);
}

TEST_CASE("single user reduces to the BPSK LLR") {
  std::mt19937_64 g(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int t = 0; t < 200; ++t) {
    const Complex r(n(g), n(g));
    const std::vector<Complex> h{Complex(n(g), n(g))};
    const double n0 = u(g);
    const double ref = std::clamp(2.0 * (r * std::conj(h[0])).real() / n0, -kLlrClamp, kLlrClamp);
    CHECK(std::abs(llr_xor(r, h, n0) - ref) < 1e-9);
  }
}

TEST_CASE("matches the direct ratio and is stable at high SNR") {
  std::mt19937_64 g(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 1; k <= 5; ++k) {
    for (int t = 0; t < 40; ++t) {
      std::vector<Complex> h(k);
      for (auto& x : h) x = Complex(n(g), n(g));
      const Complex r(2 * n(g), 2 * n(g));
      CHECK(llr_xor(r, h, 2.0) == doctest::Approx(naive_llr(r, h, 2.0)).epsilon(1e-9));
    }
  }
  const std::vector<Complex> h{1.0, 0.5};
  const double l = llr_xor(Complex(1.5, 0), h, 1e-6);
  CHECK(std::isfinite(l));
  CHECK(l == -kLlrClamp);
}

TEST_CASE("noiseless parity decisions for k up to four") {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> ph(-kPi, kPi);
  for (int k = 1; k <= 4; ++k) {
    for (int trial = 0; trial < 3; ++trial) {
      // Unit channels, plus random phases that make the parity identifiable.
      std::vector<Complex> h(k, Complex(1, 0));
      if (trial > 0)
        for (auto& x : h) x = std::polar(1.0, ph(g));
      std::vector<Complex> sums(1 << k);
      for (int mask = 0; mask < (1 << k); ++mask) {
        for (int q = 0; q < k; ++q) sums[mask] += ((mask >> q) & 1 ? 1.0 : -1.0) * h[q];
      }
      for (int mask = 0; mask < (1 << k); ++mask) {
        const int parity = std::popcount(static_cast<unsigned>(mask)) & 1;
        bool ambiguous = false;
        for (int other = 0; other < (1 << k); ++other) {
          if ((std::popcount(static_cast<unsigned>(other)) & 1) != parity &&
              std::abs(sums[other] - sums[mask]) < 1e-9)
            ambiguous = true;
        }
        if (ambiguous) continue;
        const double l = llr_xor(sums[mask], h, 0.05);
        CHECK((l > 0) == (parity == 1));
      }
    }
  }
}

TEST_CASE("conjugation symmetry and monotonicity in noise") {
  std::mt19937_64 g(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<Complex> h(3), hc(3);
    for (int q = 0; q < 3; ++q) {
      h[q] = Complex(n(g), n(g));
      hc[q] = std::conj(h[q]);
    }
    const Complex r(n(g), n(g));
    CHECK(llr_xor(r, h, 0.7) == doctest::Approx(llr_xor(std::conj(r), hc, 0.7)).epsilon(1e-12));
  }
  const std::vector<Complex> h{1.0, Complex(0, 1.0)};
  const Complex r(2.0, 0.1);
  double prev = std::abs(llr_xor(r, h, 0.05));
  for (double n0 = 0.1; n0 < 10.0; n0 *= 1.5) {
    const double cur = std::abs(llr_xor(r, h, n0));
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("multi-sample combining") {
  std::mt19937_64 g(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const int len = 16, k = 3;
  CMatrix h(len, k);
  CVector r(len);
  for (int l = 0; l < len; ++l) {
    r[l] = Complex(n(g), n(g));
    for (int q = 0; q < k; ++q) h(l, q) = Complex(n(g), n(g));
  }
  const LlrVector ideal = llr_xor(r, h, 0.5);

  SampleSet same;
  same.offsets = {0.0, 0.0, 0.0};
  same.samples = {r, r, r};
  same.mean = r;
  const std::vector<CMatrix> eq{h, h, h};
  for (auto s : {SamplingStrategy::MD, SamplingStrategy::ML, SamplingStrategy::MS, SamplingStrategy::US,
                 SamplingStrategy::EC}) {
    const LlrVector l = llr_multi_sample(same, s, h, &eq, 0.5);
    CHECK((l - ideal).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(llr_multi_sample(same, SamplingStrategy::EC, h, nullptr, 0.5), ParameterError);

  // ML averages LLRs; MS averages the samples first.
  SampleSet two;
  two.offsets = {0.0, 0.2};
  const CVector r2 = r * 0.5;
  two.samples = {r, r2};
  const LlrVector ml = llr_multi_sample(two, SamplingStrategy::ML, h, nullptr, 0.5);
  CHECK((ml - 0.5 * (llr_xor(r, h, 0.5) + llr_xor(r2, h, 0.5))).cwiseAbs().maxCoeff() < 1e-12);
  const LlrVector ms = llr_multi_sample(two, SamplingStrategy::MS, h, nullptr, 0.5);
  CHECK((ms - llr_xor(CVector(0.75 * r), h, 0.5)).cwiseAbs().maxCoeff() < 1e-12);
  // EC averages the equivalent channels over the offsets.
  const std::vector<CMatrix> eq2{h, CMatrix(0.5 * h)};
  const LlrVector ec = llr_multi_sample(two, SamplingStrategy::EC, h, &eq2, 0.5);
  CHECK((ec - llr_xor(CVector(0.75 * r), CMatrix(0.75 * h), 0.5)).cwiseAbs().maxCoeff() < 1e-12);
}
