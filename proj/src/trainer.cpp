#include "cdiff/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace cdiff {

namespace {

struct AdamState {
    std::map<std::string, Mat> m, v;
    long step = 0;

    explicit AdamState(const ParamStore& params) {
        for (const auto& [name, p] : params) {
            m.emplace(name, Mat(p.value.rows, p.value.cols));
            v.emplace(name, Mat(p.value.rows, p.value.cols));
        }
    }

    void update(ParamStore& params, const TrainConfig& tcfg) {
        ++step;
        double c1 = 1.0 - std::pow(tcfg.adam_beta1, static_cast<double>(step));
        double c2 = 1.0 - std::pow(tcfg.adam_beta2, static_cast<double>(step));
        for (auto& [name, p] : params) {
            Mat& mm = m.at(name);
            Mat& vv = v.at(name);
            for (size_t i = 0; i < p.value.size(); ++i) {
                double g = p.grad.a[i];
                mm.a[i] = tcfg.adam_beta1 * mm.a[i] + (1.0 - tcfg.adam_beta1) * g;
                vv.a[i] = tcfg.adam_beta2 * vv.a[i] + (1.0 - tcfg.adam_beta2) * g * g;
                double mhat = mm.a[i] / c1;
                double vhat = vv.a[i] / c2;
                p.value.a[i] -= tcfg.learning_rate * mhat / (std::sqrt(vhat) + tcfg.adam_eps);
            }
        }
    }
};

std::map<std::string, Mat> snapshot_values(const ParamStore& params) {
    std::map<std::string, Mat> out;
    for (const auto& [name, p] : params) out.emplace(name, p.value);
    return out;
}

std::vector<ForecastTask> build_tasks(const Dataset& data, Split split, int horizon) {
    std::vector<ForecastTask> tasks;
    for (int idx : data.indices_of(split)) {
        const EventSequence& seq = data.sequences[idx];
        require(seq.length() > horizon,
                "train: sequence " + std::to_string(idx) + " has " +
                    std::to_string(seq.length()) + " events, need more than " +
                    std::to_string(horizon));
        tasks.push_back(split_context_target(seq, horizon));
    }
    return tasks;
}

} // namespace

TrainResult train(const Dataset& data, const ModelConfig& cfg, const TrainConfig& tcfg) {
    cfg.validate();
    require(tcfg.epochs_max >= 1 && tcfg.batch >= 1 && tcfg.learning_rate > 0.0,
            "train: bad training configuration");

    std::vector<ForecastTask> train_tasks = build_tasks(data, Split::train, cfg.horizon);
    std::vector<ForecastTask> val_tasks = build_tasks(data, Split::val, cfg.horizon);
    require(!train_tasks.empty(), "train: empty train split");
    require(!val_tasks.empty(), "train: empty val split");

    std::vector<double> all_train_deltas;
    for (int idx : data.indices_of(Split::train))
        for (double d : data.sequences[idx].deltas) all_train_deltas.push_back(d);
    TimeScaler scaler = fit_time_scaler(all_train_deltas);

    DiffusionSchedule sched = cosine_schedule(cfg.diffusion_steps);
    CDiffModel model = CDiffModel::create(cfg, tcfg.seed);
    AdamState adam(model.params);

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::map<std::string, Mat> best_values = snapshot_values(model.params);
    int best_epoch = 0;
    auto start = std::chrono::steady_clock::now();

    std::vector<int> order(train_tasks.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= tcfg.epochs_max; ++epoch) {
        Rng epoch_rng = Rng::stream(tcfg.seed, static_cast<std::uint64_t>(epoch));
        epoch_rng.shuffle(order);

        double epoch_loss = 0.0;
        size_t cursor = 0;
        int batch_index = 0;
        while (cursor < order.size()) {
            size_t batch_end = std::min(cursor + static_cast<size_t>(tcfg.batch), order.size());
            model.params.zero_grad();
            for (size_t b = cursor; b < batch_end; ++b) {
                try {
                    LossBreakdown lb = loss_total(train_tasks[order[b]], model, sched, scaler,
                                                  &epoch_rng, nullptr, true);
                    epoch_loss += lb.total;
                } catch (const Error& e) {
                    throw Error("train: epoch " + std::to_string(epoch) + " batch " +
                                std::to_string(batch_index) + ": " + e.what());
                }
            }
            model.params.scale_grad(1.0 / static_cast<double>(batch_end - cursor));
            double norm = std::sqrt(model.params.grad_sq_norm());
            if (norm > tcfg.grad_clip && norm > 0.0)
                model.params.scale_grad(tcfg.grad_clip / norm);
            adam.update(model.params, tcfg);
            cursor = batch_end;
            ++batch_index;
        }
        epoch_loss /= static_cast<double>(train_tasks.size());

        if (tcfg.epoch_hook) tcfg.epoch_hook(epoch, model.params);

        // Frozen validation stream: every epoch sees identical noise, so
        // epoch-to-epoch differences come from the parameters alone.
        // Several draws per task tighten the selection estimate.
        Rng val_rng = Rng::stream(tcfg.seed, 0x56414C4944ULL);
        double val_loss = 0.0;
        for (int draw = 0; draw < std::max(1, tcfg.val_draws); ++draw)
            for (const ForecastTask& task : val_tasks)
                val_loss += loss_total(task, model, sched, scaler, &val_rng, nullptr, false).total;
        val_loss /= static_cast<double>(val_tasks.size() * std::max(1, tcfg.val_draws));

        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back({epoch, epoch_loss, val_loss, elapsed});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_values = snapshot_values(model.params);
            best_epoch = epoch;
        }
        if (epoch - best_epoch >= tcfg.patience) break;
    }

    Checkpoint ckpt;
    ckpt.cfg = cfg;
    ckpt.scaler = scaler;
    ckpt.schedule_steps = cfg.diffusion_steps;
    ckpt.interval_n = cfg.horizon;
    ckpt.best_epoch = best_epoch;
    ckpt.best_val_loss = best_val;
    ckpt.seed = tcfg.seed;
    ckpt.params = std::move(best_values);
    result.checkpoint = std::move(ckpt);
    return result;
}

CDiffModel model_from_checkpoint(const Checkpoint& ckpt) {
    CDiffModel model = CDiffModel::create(ckpt.cfg, ckpt.seed);
    model.load_values(ckpt.params);
    return model;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

// Truth for interval mode: the longest prefix of the held-out tail that
// fits inside the window.
EventSequence truncate_to_window(const EventSequence& target, double t_prime) {
    EventSequence out;
    out.num_types = target.num_types;
    double acc = 0.0;
    for (int i = 0; i < target.length(); ++i) {
        acc += target.deltas[i];
        if (acc > t_prime) break;
        out.deltas.push_back(target.deltas[i]);
        out.types.push_back(target.types[i]);
    }
    return out;
}

void parallel_tasks(int n, int threads, const std::function<void(int)>& work) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) work(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic_int next{0};
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace

EvalResult evaluate(const ModelBundle& bundle, const Dataset& data, const SamplerConfig& scfg,
                    EvalMode mode, double t_prime, std::uint64_t seed, int threads) {
    const int horizon = bundle.model.cfg.horizon;
    std::vector<int> test_idx = data.indices_of(Split::test);
    require(!test_idx.empty(), "evaluate: empty test split");
    if (mode == EvalMode::interval)
        require(t_prime > 0.0, "evaluate: interval mode needs t_prime > 0");

    EvalResult result;
    result.pairs.resize(test_idx.size());
    parallel_tasks(static_cast<int>(test_idx.size()), threads, [&](int i) {
        ForecastTask task = split_context_target(data.sequences[test_idx[i]], horizon);
        std::uint64_t task_seed = Rng::mix(seed, static_cast<std::uint64_t>(i));
        if (mode == EvalMode::next_n) {
            EventSequence pred = forecast_n(task.context, bundle, scfg, task_seed);
            result.pairs[i] = {std::move(pred), task.target};
        } else {
            EventSequence pred = forecast_interval(task.context, bundle, scfg, t_prime, task_seed);
            result.pairs[i] = {std::move(pred), truncate_to_window(task.target, t_prime)};
        }
    });
    result.report = compute_report(result.pairs, data.num_types, mode == EvalMode::next_n,
                                   mode == EvalMode::interval);
    return result;
}

EvalResult evaluate_poisson(const PoissonBaseline& baseline, const Dataset& data, int horizon,
                            EvalMode mode, double t_prime, std::uint64_t seed) {
    std::vector<int> test_idx = data.indices_of(Split::test);
    require(!test_idx.empty(), "evaluate: empty test split");

    EvalResult result;
    result.pairs.resize(test_idx.size());
    for (size_t i = 0; i < test_idx.size(); ++i) {
        ForecastTask task = split_context_target(data.sequences[test_idx[i]], horizon);
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        if (mode == EvalMode::next_n) {
            result.pairs[i] = {poisson_forecast_n(baseline, horizon, rng), task.target};
        } else {
            result.pairs[i] = {poisson_forecast_interval(baseline, t_prime, rng),
                               truncate_to_window(task.target, t_prime)};
        }
    }
    result.report = compute_report(result.pairs, data.num_types, mode == EvalMode::next_n,
                                   mode == EvalMode::interval);
    return result;
}

int max_events_in_window(const Dataset& data, double t_prime) {
    require(t_prime > 0.0, "max_events_in_window: t_prime must be > 0");
    int best = 0;
    for (int idx : data.indices_of(Split::train)) {
        std::vector<double> arr = arrival_times(data.sequences[idx]);
        size_t lo = 0;
        for (size_t hi = 0; hi < arr.size(); ++hi) {
            while (arr[hi] - arr[lo] > t_prime) ++lo;
            best = std::max(best, static_cast<int>(hi - lo + 1));
        }
    }
    require(best > 0, "max_events_in_window: empty train split");
    return best;
}

} // namespace cdiff
