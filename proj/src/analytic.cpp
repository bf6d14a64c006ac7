#include "ncdp/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ncdp/common.hpp"

namespace ncdp::analytic {

namespace {

void check_inputs(double load, int slots) {
  if (slots < 1) throw ParameterError("slots must be >= 1");
  if (!(load >= 0.0)) throw ParameterError("load must be >= 0");
}

double log_sum_exp(const std::vector<double>& terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

// ln(1 - 2^{-e}), exact for large e.
double log_one_minus_pow2(double e) { return std::log1p(-std::exp2(-e)); }

}  // namespace

double log_poisson_pmf(int m, double mean) {
  if (mean == 0.0) return m == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return m * std::log(mean) - mean - std::lgamma(m + 1.0);
}

double prob_active_at_most_slots(double load, int slots) {
  check_inputs(load, slots);
  const double mean = load * slots;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(slots) + 1);
  for (int m = 0; m <= slots; ++m) terms.push_back(log_poisson_pmf(m, mean));
  return std::clamp(std::exp(log_sum_exp(terms)), 0.0, 1.0);
}

double prob_full_rank(int slots, int active, int degree) {
  if (slots < 1 || active < 0 || degree < 1) throw ParameterError("prob_full_rank: invalid inputs");
  if (active > slots) return 0.0;
  double lp = 0.0;
  for (int k = 0; k < active; ++k) lp += log_one_minus_pow2(static_cast<double>(degree) * (slots - k));
  return std::exp(lp);
}

double throughput(double load, int slots, int degree) {
  check_inputs(load, slots);
  if (degree < 1) throw ParameterError("degree must be >= 1");
  if (load == 0.0) return 0.0;
  const double mean = load * slots;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(slots));
  double log_rank = 0.0;
  for (int m = 0; m < slots; ++m) {
    log_rank += log_one_minus_pow2(static_cast<double>(degree) * (slots - m));
    terms.push_back(log_poisson_pmf(m, mean) + log_rank);
  }
  return load * std::min(1.0, std::exp(log_sum_exp(terms)));
}

double throughput_limit(double load, int slots) {
  check_inputs(load, slots);
  if (load == 0.0) return 0.0;
  std::vector<double> terms;
  for (int m = 0; m < slots; ++m) terms.push_back(log_poisson_pmf(m, load * slots));
  return load * std::min(1.0, std::exp(log_sum_exp(terms)));
}

double sparsity_threshold(int slots) {
  if (slots < 2) throw ParameterError("sparsity threshold needs S >= 2");
  return std::log(static_cast<double>(slots)) / slots;
}

double expected_replicas(int slots, double p) {
  if (slots < 1 || p < 0.0 || p > 1.0) throw ParameterError("expected_replicas: invalid inputs");
  return slots * p;
}

}  // namespace ncdp::analytic
