#pragma once

// Closed-form throughput and energy expressions for NCDP with uniformly
// drawn GF(2^n) coefficients. Time unit is one slot; G is new messages per slot.

namespace ncdp::analytic {

/// P{N_tx <= S} for N_tx ~ Poisson(G S), including N_tx = 0.
double prob_active_at_most_slots(double load, int slots);

/// Probability that an S x N_tx matrix with i.i.d. uniform GF(2^n) entries
/// has full column rank. Zero when N_tx > S.
double prob_full_rank(int slots, int active, int degree);

/// Normalized throughput of NCDP when a frame decodes only at full rank.
double throughput(double load, int slots, int degree);

/// n -> infinity limit of throughput(): G P{N_tx <= S - 1}.
double throughput_limit(double load, int slots);

/// ln(S)/S, the smallest per-slot transmit probability that still gives a
/// nearly full-rank sparse access matrix.
double sparsity_threshold(int slots);

/// Mean number of transmissions per message, S p.
double expected_replicas(int slots, double p);

/// Natural log of the Poisson pmf, stable for large means.
double log_poisson_pmf(int m, double mean);

}  // namespace ncdp::analytic
