#pragma once

#include <cstdint>
#include <vector>

#include "cdiff/rng.hpp"
#include "cdiff/sequences.hpp"

namespace cdiff {

// The four impact kernel shapes coupling one event type onto another.
enum class ImpactKind : int { a = 0, b = 1, c = 2, d = 3 };

char impact_kind_char(ImpactKind k);
ImpactKind impact_kind_from_char(char c);

// Kernel value at elapsed time y >= 0. Kind d grows near the origin and
// is capped at four times its origin value, decaying exponentially past
// the cap; the other kinds are the plain closed forms.
double impact(ImpactKind kind, double y);

// Non-increasing upper bound on impact(kind, y' ) for all y' >= y; the
// thinning proposal rate is built from these.
double impact_envelope(ImpactKind kind, double y);

// Integral of the (capped) kernel over [0, inf); used by the stability
// check.
double impact_integral(ImpactKind kind);

struct HawkesSpec {
    int num_types = 5;
    std::vector<double> base_rates;          // per type, > 0
    std::vector<std::vector<ImpactKind>> impact_ids; // [target j][source i]
    double impact_scale = 0.1;               // multiplier on every kernel
    std::uint64_t seed = 0;
};

// Spectral radius of the matrix of scaled kernel integrals.
double branching_radius(const HawkesSpec& spec);

// Draws the impact matrix uniformly per entry under the seed, redrawing
// until the branching radius is < 1. Throws if no stable draw is found
// within a bounded number of attempts (raise impact_scale down instead).
HawkesSpec make_hawkes_spec(int num_types, std::vector<double> base_rates, double impact_scale,
                            std::uint64_t seed);

// Throws unless rates are positive and the branching radius is < 1.
void validate_spec(const HawkesSpec& spec);

// Ogata thinning until n_events events are accepted. The proposal bound
// dominates the true intensity at every candidate point; a violated bound
// or a runaway intensity raises an error.
EventSequence simulate(const HawkesSpec& spec, int n_events, Rng& rng);

// Full synthetic corpus with train/val/test tags; sequence s uses the RNG
// stream (spec.seed, s).
Dataset generate_hawkes_dataset(const HawkesSpec& spec, int n_train, int n_val, int n_test,
                                int seq_len, const std::string& unit = "s");

// --------------------------------------------------------------------------
// Naive baseline
// --------------------------------------------------------------------------

struct PoissonBaseline {
    double rate = 1.0;               // events per unit time
    std::vector<double> type_probs;  // marginal type distribution
};

// Constant-rate fit: reciprocal mean training delta and empirical type
// frequencies.
PoissonBaseline fit_poisson(const Dataset& data);

EventSequence poisson_forecast_n(const PoissonBaseline& b, int n, Rng& rng);
EventSequence poisson_forecast_interval(const PoissonBaseline& b, double t_prime, Rng& rng);

} // namespace cdiff
