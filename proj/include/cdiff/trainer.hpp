#pragma once

#include <functional>
#include <map>

#include "cdiff/forecaster.hpp"
#include "cdiff/hawkes.hpp"
#include "cdiff/metrics.hpp"

namespace cdiff {

struct TrainConfig {
    int epochs_max = 500;
    int batch = 16;
    double learning_rate = 0.0025;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 5.0; // global L2 norm
    int patience = 50;      // epochs without validation improvement
    int val_draws = 4;      // frozen noise draws averaged per validation task
    std::uint64_t seed = 0;

    // Test hook, invoked after each epoch's updates and before validation.
    std::function<void(int, ParamStore&)> epoch_hook;
};

struct Checkpoint {
    ModelConfig cfg;
    TimeScaler scaler;
    int schedule_steps = 0; // cosine schedule, regenerated on load
    int interval_n = 0;     // block size for interval forecasting
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::uint64_t seed = 0;
    std::map<std::string, Mat> params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
CDiffModel model_from_checkpoint(const Checkpoint& ckpt);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double elapsed_s = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
};

// Adam over shuffled minibatches, one uniformly drawn diffusion step per
// task per visit; gradients are averaged over the batch and clipped by
// global norm. Validation uses a per-epoch frozen noise stream and the
// best-validation parameters are returned (early stop on patience).
TrainResult train(const Dataset& data, const ModelConfig& cfg, const TrainConfig& tcfg);

enum class EvalMode { next_n, interval };

struct EvalResult {
    MetricsReport report;
    std::vector<TaskPair> pairs; // (pred, truth) per test task
};

// Forecasts every test sequence and aggregates the metrics. Time metrics
// only apply to next-N evaluation, count metrics only to interval
// evaluation; OTD and the type-count RMSE are reported in both.
EvalResult evaluate(const ModelBundle& bundle, const Dataset& data, const SamplerConfig& scfg,
                    EvalMode mode, double t_prime, std::uint64_t seed, int threads = 1);

// The naive baseline evaluated on the same task layout.
EvalResult evaluate_poisson(const PoissonBaseline& baseline, const Dataset& data, int horizon,
                            EvalMode mode, double t_prime, std::uint64_t seed);

// Largest number of events falling inside any window of length t_prime
// over the train split (interval-forecasting block size rule).
int max_events_in_window(const Dataset& data, double t_prime);

} // namespace cdiff
