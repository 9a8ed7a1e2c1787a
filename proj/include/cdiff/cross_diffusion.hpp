#pragma once

#include <vector>

#include "cdiff/encoder.hpp"
#include "cdiff/model.hpp"
#include "cdiff/schedule.hpp"

namespace cdiff {

// State of the diffusion chain at one step: transformed times plus one
// event type per position (rows of the conceptual one-hot matrix).
struct NoisyState {
    std::vector<double> times;
    std::vector<int> types;
    int step = 0;
};

// Per-position categorical distributions over event types.
struct TypeDistribution {
    Mat probs; // horizon x num_types, rows sum to 1
};

Mat one_hot(const std::vector<int>& types, int num_types);

// --------------------------------------------------------------------------
// Denoiser networks
// --------------------------------------------------------------------------

struct DenoiserCache {
    Mat tokens_in;
    std::vector<int> types;
    bool type_slot_active = true;
    std::vector<TransformerBlockCache> self_blocks;
    std::vector<TransformerBlockCache> cross_blocks;
    Mat head_in;
    Mat head_out;
};

// Shared shape of the two denoisers. Per-position tokens concatenate a
// diffusion-step encoding, an inter-arrival slot and a type slot to
// width 4M, get an index encoding (offset by the context end time) added,
// then run `layers` pairs of self-attention and cross-attention blocks
// onto the history tokens. The output head is per position.
struct DenoiserNet {
    ModelConfig cfg;
    int time_width = 0;
    int type_width = 0;
    int out_width = 0;
    bool zero_time_slot = false; // independent mode, type denoiser
    bool zero_type_slot = false; // independent mode, time denoiser
    Param* type_emb = nullptr;
    std::vector<TransformerBlock> self_blocks;
    std::vector<TransformerBlock> cross_blocks;
    Linear head;

    static DenoiserNet create(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                              int time_width, int type_width, int out_width, Rng& rng);
    static DenoiserNet bind(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                            int time_width, int type_width, int out_width);

    // times/types hold one entry per forecast position; t is the
    // diffusion step. Returns horizon x out_width head outputs.
    Mat forward(const std::vector<double>& times, const std::vector<int>& types, int t,
                const ContextEmbedding& ctx, DenoiserCache& cache) const;
    // Returns the gradient w.r.t. the context tokens.
    Mat backward(const DenoiserCache& cache, const Mat& d_head_out) const;
};

// The full model: a history encoder and the two denoisers sharing one
// parameter store.
struct CDiffModel {
    ModelConfig cfg;
    ParamStore params;
    HistoryEncoder encoder;
    DenoiserNet time_denoiser; // predicts the injected Gaussian noise
    DenoiserNet type_denoiser; // predicts the clean type distribution

    CDiffModel(const CDiffModel&) = delete;
    CDiffModel& operator=(const CDiffModel&) = delete;
    CDiffModel(CDiffModel&&) = default;

    static CDiffModel create(const ModelConfig& cfg, std::uint64_t seed);
    // Restore parameter values (shapes must match the config).
    void load_values(const std::map<std::string, Mat>& values);

private:
    CDiffModel() = default;
};

// --------------------------------------------------------------------------
// Forward (noising) process
// --------------------------------------------------------------------------

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps; returns (x_t, eps).
std::pair<std::vector<double>, std::vector<double>> forward_time(const std::vector<double>& x0,
                                                                 int t,
                                                                 const DiffusionSchedule& sched,
                                                                 Rng& rng);

// Each position resampled from Cat(alpha_bar_t e0 + (1 - alpha_bar_t)/K).
std::vector<int> forward_type(const std::vector<int>& types0, int t, int num_types,
                              const DiffusionSchedule& sched, Rng& rng);

// Marginal row of the forward type kernel after t steps (probability
// vector over K types given a clean type).
std::vector<double> forward_type_marginal(int type0, int t, int num_types,
                                          const DiffusionSchedule& sched);

// --------------------------------------------------------------------------
// Reverse parameterization
// --------------------------------------------------------------------------

// Posterior mixture for one position: the single-step kernel around e_t
// times the t-1 marginal around e0_probs, normalized. Accepts t = 1
// (alpha_bar_0 = 1). e0_probs must sum to 1 within 1e-6.
std::vector<double> type_mixture(int noisy_type, const std::vector<double>& e0_probs, int t,
                                 const DiffusionSchedule& sched);

// Generalization used for accelerated sampling: jump from step t_hi down
// to step t_lo < t_hi in one draw. type_mixture(e, p, t) equals
// type_mixture_jump(e, p, t, t-1).
std::vector<double> type_mixture_jump(int noisy_type, const std::vector<double>& e0_probs,
                                      int t_hi, int t_lo, const DiffusionSchedule& sched);

// Clean-type distribution predicted by the type denoiser (softmax rows).
TypeDistribution predict_e0(const std::vector<double>& times, const std::vector<int>& types,
                            int t, const ContextEmbedding& ctx, const CDiffModel& model);

// Mean of the reverse Gaussian step computed from the predicted noise:
// mu = x_t / sqrt(alpha_t) - beta_t eps_hat / (sqrt(alpha_t) sqrt(1 - alpha_bar_t)).
std::vector<double> denoise_mu(const std::vector<double>& times, const std::vector<int>& prev_types,
                               int t, const ContextEmbedding& ctx, const CDiffModel& model,
                               const DiffusionSchedule& sched);

// --------------------------------------------------------------------------
// Losses
// --------------------------------------------------------------------------

// KL(posterior-with-true-e0 || predicted) summed over positions; t >= 2.
double loss_type(const std::vector<int>& types0, const std::vector<int>& noisy_types,
                 const std::vector<double>& noisy_times, int t, const ContextEmbedding& ctx,
                 const CDiffModel& model, const DiffusionSchedule& sched);

// Squared error between the drawn noise and the prediction, summed over
// positions. Draws eps internally; x0 lives in the transformed space.
double loss_time(const std::vector<double>& x0, int t, const std::vector<int>& prev_types,
                 const ContextEmbedding& ctx, const CDiffModel& model,
                 const DiffusionSchedule& sched, Rng& rng);

// Frozen randomness for one loss evaluation; lets gradient checks and
// ablations re-evaluate an identical objective.
struct LossDraws {
    int t = 1;
    std::vector<double> eps;
    std::vector<int> noisy_types;
    std::vector<int> prev_types;
};

struct LossBreakdown {
    double type_term = 0.0;
    double time_term = 0.0;
    double total = 0.0;
    int t = 1;
};

// Single-timestep training objective for one task. Draws t uniformly from
// {1..T} (plus all noise) from `rng` unless `frozen` is given. t >= 2
// pairs the type KL with the noise MSE; t = 1 uses the reconstruction
// form (type cross-entropy plus the same MSE). With `backward` set,
// gradients accumulate into the model parameters. `record`, when non-null,
// captures the draws actually used.
LossBreakdown loss_total(const ForecastTask& task, const CDiffModel& model,
                         const DiffusionSchedule& sched, const TimeScaler& scaler, Rng* rng,
                         const LossDraws* frozen, bool backward, LossDraws* record = nullptr);

} // namespace cdiff
