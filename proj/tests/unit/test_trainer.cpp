#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "cdiff/trainer.hpp"

using namespace cdiff;

namespace {

ModelConfig smoke_config() {
    ModelConfig cfg;
    cfg.embed_dim = 4;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    cfg.ff_dim = 8;
    cfg.num_types = 3;
    cfg.horizon = 3;
    cfg.diffusion_steps = 50;
    return cfg;
}

// Small deterministic corpus with learnable structure.
Dataset smoke_dataset(int n_train, int n_val, int n_test, int len, int k, std::uint64_t seed) {
    Dataset data;
    data.num_types = k;
    data.unit = "s";
    int total = n_train + n_val + n_test;
    for (int s = 0; s < total; ++s) {
        Rng rng = Rng::stream(seed, s);
        EventSequence seq;
        seq.num_types = k;
        for (int i = 0; i < len; ++i) {
            int type = (i + s) % k;
            seq.types.push_back(type);
            seq.deltas.push_back(0.2 + 0.3 * type + 0.05 * rng.uniform());
        }
        data.sequences.push_back(std::move(seq));
        data.splits.push_back(s < n_train ? Split::train
                                          : (s < n_train + n_val ? Split::val : Split::test));
    }
    return data;
}

bool params_equal(const std::map<std::string, Mat>& a, const std::map<std::string, Mat>& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, mat] : a) {
        auto it = b.find(name);
        if (it == b.end() || mat.a != it->second.a) return false;
    }
    return true;
}

} // namespace

TEST_CASE("overfit smoke run halves the training loss") {
    ModelConfig cfg = smoke_config();
    Dataset data = smoke_dataset(10, 2, 2, 10, cfg.num_types, 4);

    TrainConfig tcfg;
    tcfg.epochs_max = 200;
    tcfg.batch = 5;
    tcfg.learning_rate = 0.005;
    tcfg.patience = 200;
    tcfg.seed = 12;

    TrainResult result = train(data, cfg, tcfg);
    REQUIRE(!result.log.empty());
    double initial = result.log.front().train_loss;
    double final = result.log.back().train_loss;
    CHECK(final < 0.5 * initial);
}

TEST_CASE("training is bitwise deterministic under the seed") {
    ModelConfig cfg = smoke_config();
    Dataset data = smoke_dataset(6, 2, 2, 9, cfg.num_types, 5);

    TrainConfig tcfg;
    tcfg.epochs_max = 8;
    tcfg.batch = 4;
    tcfg.patience = 50;
    tcfg.seed = 31;

    TrainResult a = train(data, cfg, tcfg);
    TrainResult b = train(data, cfg, tcfg);
    CHECK(params_equal(a.checkpoint.params, b.checkpoint.params));
    CHECK(a.checkpoint.best_epoch == b.checkpoint.best_epoch);
    CHECK(a.checkpoint.best_val_loss == b.checkpoint.best_val_loss);

    tcfg.seed = 32;
    TrainResult c = train(data, cfg, tcfg);
    CHECK_FALSE(params_equal(a.checkpoint.params, c.checkpoint.params));
}

TEST_CASE("the best-validation epoch wins, not the last one") {
    ModelConfig cfg = smoke_config();
    Dataset data = smoke_dataset(6, 2, 2, 9, cfg.num_types, 6);

    TrainConfig tcfg;
    tcfg.epochs_max = 12;
    tcfg.batch = 4;
    tcfg.patience = 50;
    tcfg.seed = 77;

    // Capture the parameters at the end of epoch 5, then wreck them.
    std::map<std::string, Mat> epoch5;
    tcfg.epoch_hook = [&](int epoch, ParamStore& params) {
        if (epoch == 5) {
            for (const auto& [name, p] : params) epoch5.emplace(name, p.value);
        }
        if (epoch > 5) {
            for (auto& [name, p] : params)
                for (double& v : p.value.a) v += 10.0; // validation loss explodes
        }
    };

    TrainResult result = train(data, cfg, tcfg);
    CHECK(result.checkpoint.best_epoch <= 5);
    REQUIRE(!epoch5.empty());
    // The returned checkpoint must predate the injected damage.
    for (const auto& [name, mat] : result.checkpoint.params)
        for (double v : mat.a) CHECK(std::abs(v) < 9.0);
    // Validation loss of the checkpoint is the minimum of the logged curve.
    for (const EpochLog& e : result.log)
        CHECK(result.checkpoint.best_val_loss <= e.val_loss + 1e-15);
}

TEST_CASE("training rejects sequences shorter than the horizon") {
    ModelConfig cfg = smoke_config();
    Dataset data = smoke_dataset(3, 1, 1, cfg.horizon, cfg.num_types, 7); // too short
    TrainConfig tcfg;
    tcfg.seed = 1;
    CHECK_THROWS_AS(train(data, cfg, tcfg), Error);
}

TEST_CASE("checkpoint save/load restores an identical model") {
    ModelConfig cfg = smoke_config();
    Dataset data = smoke_dataset(6, 2, 2, 9, cfg.num_types, 8);
    TrainConfig tcfg;
    tcfg.epochs_max = 4;
    tcfg.batch = 4;
    tcfg.seed = 9;

    TrainResult result = train(data, cfg, tcfg);
    std::string path = "/tmp/cdiff_test_ckpt.json";
    save_checkpoint(result.checkpoint, path);
    Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.cfg.embed_dim == cfg.embed_dim);
    CHECK(loaded.cfg.order == cfg.order);
    CHECK(loaded.best_epoch == result.checkpoint.best_epoch);
    CHECK(loaded.best_val_loss == result.checkpoint.best_val_loss);
    CHECK(loaded.scaler.boxcox.lambda == result.checkpoint.scaler.boxcox.lambda);
    CHECK(loaded.scaler.center == result.checkpoint.scaler.center);
    CHECK(loaded.scaler.spread == result.checkpoint.scaler.spread);
    CHECK(params_equal(loaded.params, result.checkpoint.params));

    // Bit-identical evaluation through the restored model.
    CDiffModel m1 = model_from_checkpoint(result.checkpoint);
    CDiffModel m2 = model_from_checkpoint(loaded);
    DiffusionSchedule sched = cosine_schedule(loaded.schedule_steps);
    SamplerConfig scfg;
    scfg.num_samples = 2;
    scfg.steps = 10;
    ModelBundle b1{m1, sched, result.checkpoint.scaler};
    ModelBundle b2{m2, sched, loaded.scaler};
    EvalResult e1 = evaluate(b1, data, scfg, EvalMode::next_n, 0.0, 2025);
    EvalResult e2 = evaluate(b2, data, scfg, EvalMode::next_n, 0.0, 2025);
    CHECK(e1.report.otd_avg == e2.report.otd_avg);
    CHECK(e1.report.rmse_e == e2.report.rmse_e);
    CHECK(e1.report.time->smape == e2.report.time->smape);
}

TEST_CASE("evaluation fills per-mode fields and an oracle prediction scores zero") {
    ModelConfig cfg = smoke_config();
    Dataset data = smoke_dataset(4, 1, 3, 9, cfg.num_types, 10);

    // Oracle injection: score truth against truth through the metric path.
    std::vector<TaskPair> oracle_pairs;
    for (int idx : data.indices_of(Split::test)) {
        ForecastTask task = split_context_target(data.sequences[idx], cfg.horizon);
        oracle_pairs.push_back({task.target, task.target});
    }
    MetricsReport oracle = compute_report(oracle_pairs, cfg.num_types, true, false);
    CHECK(oracle.otd_avg == 0.0);
    CHECK(oracle.rmse_e == 0.0);
    CHECK(oracle.time->smape == 0.0);

    // Model evaluation produces the right field shape per mode.
    TrainConfig tcfg;
    tcfg.epochs_max = 2;
    tcfg.batch = 4;
    tcfg.seed = 11;
    TrainResult result = train(data, cfg, tcfg);
    CDiffModel model = model_from_checkpoint(result.checkpoint);
    DiffusionSchedule sched = cosine_schedule(result.checkpoint.schedule_steps);
    ModelBundle bundle{model, sched, result.checkpoint.scaler};
    SamplerConfig scfg;
    scfg.num_samples = 1;
    scfg.steps = 5;

    EvalResult next_n = evaluate(bundle, data, scfg, EvalMode::next_n, 0.0, 1);
    CHECK(next_n.report.time.has_value());
    CHECK_FALSE(next_n.report.counts.has_value());
    CHECK(next_n.report.n_tasks == 3);

    EvalResult interval = evaluate(bundle, data, scfg, EvalMode::interval, 1.5, 1);
    CHECK_FALSE(interval.report.time.has_value());
    CHECK(interval.report.counts.has_value());

    // Multithreaded evaluation must agree with the single-threaded path.
    EvalResult threaded = evaluate(bundle, data, scfg, EvalMode::next_n, 0.0, 1, 3);
    CHECK(threaded.report.otd_avg == next_n.report.otd_avg);
    CHECK(threaded.report.rmse_e == next_n.report.rmse_e);
}

TEST_CASE("poisson baseline scores above zero on structured data") {
    ModelConfig cfg = smoke_config();
    Dataset data = smoke_dataset(6, 1, 3, 9, cfg.num_types, 12);
    PoissonBaseline baseline = fit_poisson(data);
    EvalResult result = evaluate_poisson(baseline, data, cfg.horizon, EvalMode::next_n, 0.0, 3);
    CHECK(result.report.otd_avg > 0.0);
    CHECK(result.report.n_tasks == 3);
}

TEST_CASE("interval block size follows the densest training window") {
    Dataset data;
    data.num_types = 1;
    EventSequence s;
    s.num_types = 1;
    s.deltas = {1.0, 0.1, 0.1, 0.1, 5.0, 1.0};
    s.types = {0, 0, 0, 0, 0, 0};
    data.sequences.push_back(s);
    data.splits.push_back(Split::train);
    // Window 0.35 covers the three 0.1 gaps plus the anchor event.
    CHECK(max_events_in_window(data, 0.35) == 4);
    CHECK(max_events_in_window(data, 0.05) == 1);
    CHECK(max_events_in_window(data, 100.0) == 6);
}
