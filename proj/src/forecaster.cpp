#include "cdiff/forecaster.hpp"

#include <algorithm>
#include <cmath>

namespace cdiff {

namespace {

// Reverse update of the time vector for one jump t_hi -> t_lo. The
// implied clean estimate is clamped to the configured range before the
// step is formed; with the default infinite range this is the plain
// update.
void time_jump(std::vector<double>& x, const std::vector<double>& eps_hat, int t_hi, int t_lo,
               const DiffusionSchedule& sched, const SamplerConfig& scfg, Rng& rng) {
    double bar_hi = sched.alpha_bar_at(t_hi);
    double bar_lo = sched.alpha_bar_at(t_lo);
    double sig_hi = std::sqrt(bar_hi);
    double noise_hi = std::sqrt(1.0 - bar_hi);
    double ratio = std::sqrt(bar_lo / bar_hi);
    double jump_beta = 1.0 - bar_hi / bar_lo;
    double coef = ratio * jump_beta / std::sqrt(1.0 - bar_hi);
    double sigma = std::sqrt(jump_beta);
    for (size_t i = 0; i < x.size(); ++i) {
        double x0_hat = (x[i] - noise_hi * eps_hat[i]) / sig_hi;
        double clamped = std::min(std::max(x0_hat, scfg.clip_lo), scfg.clip_hi);
        // Noise prediction consistent with the clamped clean estimate.
        double eps_c = clamped == x0_hat ? eps_hat[i] : (x[i] - sig_hi * clamped) / noise_hi;
        if (scfg.eta_zero) {
            // Deterministic path: re-noise the clean estimate down to the
            // target level with the same predicted noise.
            x[i] = std::sqrt(bar_lo) * clamped + std::sqrt(1.0 - bar_lo) * eps_c;
        } else {
            // Ancestral step generalized to jumps: with adjacent steps
            // this is exactly mu_theta plus noise of variance beta_t.
            x[i] = ratio * x[i] - coef * eps_c + sigma * rng.normal();
        }
    }
}

std::vector<double> eps_column(const Mat& head_out) {
    std::vector<double> out(head_out.rows);
    for (int i = 0; i < head_out.rows; ++i) out[i] = head_out(i, 0);
    return out;
}

} // namespace

NoisyState sample_sequence(const ContextEmbedding& ctx, const CDiffModel& model,
                           const DiffusionSchedule& sched, const SamplerConfig& scfg, Rng& rng) {
    const ModelConfig& cfg = model.cfg;
    const int n = cfg.horizon;
    const int k = cfg.num_types;
    const int steps = scfg.resolved_steps(sched.total_steps);

    NoisyState state;
    state.step = sched.total_steps;
    state.times.resize(n);
    state.types.resize(n);
    for (int i = 0; i < n; ++i) state.times[i] = rng.normal();
    for (int i = 0; i < n; ++i) state.types[i] = rng.uniform_int(0, k - 1);

    std::vector<int> tau = ddim_subsequence(sched.total_steps, steps);
    for (size_t s = 0; s < tau.size(); ++s) {
        int t = tau[s];
        int t_next = (s + 1 < tau.size()) ? tau[s + 1] : 0;

        auto type_step = [&](const std::vector<double>& times_for_types) {
            TypeDistribution pred =
                predict_e0(times_for_types, state.types, t, ctx, model);
            for (int i = 0; i < n; ++i) {
                std::vector<double> row(pred.probs.row(i), pred.probs.row(i) + k);
                std::vector<double> mix = type_mixture_jump(state.types[i], row, t, t_next, sched);
                state.types[i] = rng.categorical(mix);
            }
        };
        auto time_step = [&](const std::vector<int>& types_for_times) {
            DenoiserCache cache;
            Mat head = model.time_denoiser.forward(state.times, types_for_times, t, ctx, cache);
            time_jump(state.times, eps_column(head), t, t_next, sched, scfg, rng);
        };

        switch (scfg.order) {
            case Order::type_first:
                type_step(state.times);
                time_step(state.types);
                break;
            case Order::time_first: {
                std::vector<int> old_types = state.types;
                time_step(old_types);
                type_step(state.times);
                break;
            }
            case Order::independent: {
                std::vector<int> old_types = state.types;
                type_step(state.times); // time slot is severed; value unused
                time_step(old_types);   // type slot is severed; value unused
                break;
            }
        }

        for (double v : state.times)
            require(std::isfinite(v),
                    "sample_sequence: diverged at step t=" + std::to_string(t));
        state.step = t_next;
    }
    return state;
}

EventSequence forecast_n(const EventSequence& context, const ModelBundle& bundle,
                         const SamplerConfig& scfg, std::uint64_t seed) {
    require(context.length() >= 1, "forecast_n: empty context");
    require(scfg.num_samples >= 1, "forecast_n: need at least one sample");
    const ModelConfig& cfg = bundle.model.cfg;
    const int n = cfg.horizon;
    const int k = cfg.num_types;

    ContextEmbedding ctx = encode_history(context, bundle.scaler, bundle.model.encoder);

    SamplerConfig clamped = scfg;
    clamped.clip_lo = bundle.scaler.z_lo;
    clamped.clip_hi = bundle.scaler.z_hi;

    std::vector<double> mean_times(n, 0.0);
    std::vector<std::vector<int>> votes(n, std::vector<int>(k, 0));
    for (int a = 0; a < scfg.num_samples; ++a) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(a));
        NoisyState sample = sample_sequence(ctx, bundle.model, bundle.sched, clamped, rng);
        for (int i = 0; i < n; ++i) {
            mean_times[i] += sample.times[i];
            votes[i][sample.types[i]] += 1;
        }
    }

    // Vote ties break uniformly among the tied types under a seed-derived
    // stream; a fixed-index rule would skew the type counts.
    Rng tie_rng = Rng::stream(seed, 0x7E1BULL);
    EventSequence out;
    out.num_types = k;
    out.deltas.resize(n);
    out.types.resize(n);
    for (int i = 0; i < n; ++i) {
        out.deltas[i] = from_diffusion_space(mean_times[i] / scfg.num_samples, bundle.scaler);
        int top = 0;
        for (int j = 1; j < k; ++j)
            if (votes[i][j] > votes[i][top]) top = j;
        std::vector<int> tied;
        for (int j = 0; j < k; ++j)
            if (votes[i][j] == votes[i][top]) tied.push_back(j);
        out.types[i] = tied.size() == 1
                           ? tied[0]
                           : tied[tie_rng.uniform_int(0, static_cast<int>(tied.size()) - 1)];
    }
    return out;
}

EventSequence forecast_interval(const EventSequence& context, const ModelBundle& bundle,
                                const SamplerConfig& scfg, double t_prime, std::uint64_t seed) {
    require(t_prime > 0.0, "forecast_interval: t_prime must be > 0");
    const int k = bundle.model.cfg.num_types;

    EventSequence result;
    result.num_types = k;
    EventSequence work = context;
    double total = 0.0;
    int stalled_rounds = 0;
    std::uint64_t block = 0;
    while (total <= t_prime) {
        EventSequence fc = forecast_n(work, bundle, scfg, Rng::mix(seed, block));
        ++block;
        bool all_clamped = true;
        for (size_t i = 0; i < fc.deltas.size(); ++i) {
            result.deltas.push_back(fc.deltas[i]);
            result.types.push_back(fc.types[i]);
            work.deltas.push_back(fc.deltas[i]);
            work.types.push_back(fc.types[i]);
            total += fc.deltas[i];
            if (fc.deltas[i] > 1e-12) all_clamped = false;
        }
        stalled_rounds = all_clamped ? stalled_rounds + 1 : 0;
        require(stalled_rounds < 100, "forecast_interval: sampler stalled (all deltas clamped)");
    }

    // Keep the longest prefix within the window.
    EventSequence trimmed;
    trimmed.num_types = k;
    double acc = 0.0;
    for (size_t i = 0; i < result.deltas.size(); ++i) {
        acc += result.deltas[i];
        if (acc > t_prime) break;
        trimmed.deltas.push_back(result.deltas[i]);
        trimmed.types.push_back(result.types[i]);
    }
    return trimmed;
}

} // namespace cdiff
