#pragma once

#include <cstdint>

#include "cdiff/cross_diffusion.hpp"

namespace cdiff {

struct SamplerConfig {
    int steps = -1;         // -1 means all diffusion steps
    bool eta_zero = false;  // deterministic time updates (no fresh noise)
    int num_samples = 5;    // sequences averaged per forecast
    Order order = Order::type_first;
    // Clamp range for the implied clean time estimate; inactive by
    // default, set from the fitted scaler by the forecast entry points.
    double clip_lo = -1e300;
    double clip_hi = 1e300;

    int resolved_steps(int total) const { return steps < 0 ? total : steps; }
};

// Everything needed to run the model at inference time.
struct ModelBundle {
    const CDiffModel& model;
    const DiffusionSchedule& sched;
    const TimeScaler& scaler;
};

// One reverse-diffusion pass from pure noise down to a clean sequence
// (times stay in the transformed space). Iterates the step subsequence
// ddim_subsequence(T, steps); each iteration resamples types from the
// jump mixture and updates times either deterministically (eta_zero) or
// with per-jump Gaussian noise. Throws on non-finite intermediates.
NoisyState sample_sequence(const ContextEmbedding& ctx, const CDiffModel& model,
                           const DiffusionSchedule& sched, const SamplerConfig& scfg, Rng& rng);

// Aggregated forecast of the next horizon events: transformed times are
// averaged across samples before inversion; types take the per-position
// majority (ties break to the smallest type index).
EventSequence forecast_n(const EventSequence& context, const ModelBundle& bundle,
                         const SamplerConfig& scfg, std::uint64_t seed);

// Repeatedly forecasts horizon-sized blocks, folding each block into the
// context, until the cumulative time exceeds t_prime; the result is
// truncated to the last event at or before t_prime.
EventSequence forecast_interval(const EventSequence& context, const ModelBundle& bundle,
                                const SamplerConfig& scfg, double t_prime, std::uint64_t seed);

} // namespace cdiff
