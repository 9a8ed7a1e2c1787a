// Command-line front end: gen-data, train, evaluate, forecast.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "cdiff/trainer.hpp"

using nlohmann::json;
using namespace cdiff;

namespace {

// Exit codes: 0 success, 1 internal error, 2 usage or I/O error.
struct UsageError : Error {
    using Error::Error;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SamplerConfig sampler;
    // synthetic data defaults
    int hawkes_types = 5;
    std::vector<double> base_rates;
    double impact_scale = 0.1;
    int n_train = 1500, n_val = 400, n_test = 500;
    int seq_len = 60;
    std::string unit = "s";
    double interval_t_prime = 0.0; // > 0 resizes the horizon from train data
    bool has_seed = false;
    std::uint64_t seed = 0;
};

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw UsageError("config: unknown key \"" + key + "\" in " + where);
    }
}

RunConfig parse_config(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    std::ifstream in(path);
    if (!in.good()) throw UsageError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw UsageError("config parse error in " + path + ": " + e.what());
    }
    check_keys(j, "top level", {"model", "train", "sampler", "hawkes", "interval_t_prime", "seed"});
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, "model",
                   {"embed_dim", "num_heads", "num_layers", "ff_dim", "num_types", "horizon",
                    "diffusion_steps", "learning_rate", "order"});
        if (m.contains("embed_dim")) rc.model.embed_dim = m["embed_dim"].get<int>();
        if (m.contains("num_heads")) rc.model.num_heads = m["num_heads"].get<int>();
        if (m.contains("num_layers")) rc.model.num_layers = m["num_layers"].get<int>();
        if (m.contains("ff_dim")) rc.model.ff_dim = m["ff_dim"].get<int>();
        if (m.contains("num_types")) rc.model.num_types = m["num_types"].get<int>();
        if (m.contains("horizon")) rc.model.horizon = m["horizon"].get<int>();
        if (m.contains("diffusion_steps"))
            rc.model.diffusion_steps = m["diffusion_steps"].get<int>();
        if (m.contains("learning_rate")) {
            rc.model.learning_rate = m["learning_rate"].get<double>();
            rc.train.learning_rate = rc.model.learning_rate;
        }
        if (m.contains("order")) rc.model.order = order_from_name(m["order"].get<std::string>());
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        check_keys(t, "train",
                   {"epochs_max", "batch", "learning_rate", "grad_clip", "patience"});
        if (t.contains("epochs_max")) rc.train.epochs_max = t["epochs_max"].get<int>();
        if (t.contains("batch")) rc.train.batch = t["batch"].get<int>();
        if (t.contains("learning_rate")) rc.train.learning_rate = t["learning_rate"].get<double>();
        if (t.contains("grad_clip")) rc.train.grad_clip = t["grad_clip"].get<double>();
        if (t.contains("patience")) rc.train.patience = t["patience"].get<int>();
    }
    if (j.contains("sampler")) {
        const json& s = j["sampler"];
        check_keys(s, "sampler", {"steps", "eta_zero", "num_samples"});
        if (s.contains("steps")) rc.sampler.steps = s["steps"].get<int>();
        if (s.contains("eta_zero")) rc.sampler.eta_zero = s["eta_zero"].get<bool>();
        if (s.contains("num_samples")) rc.sampler.num_samples = s["num_samples"].get<int>();
    }
    if (j.contains("hawkes")) {
        const json& h = j["hawkes"];
        check_keys(h, "hawkes",
                   {"num_types", "base_rate", "base_rates", "impact_scale", "n_train", "n_val",
                    "n_test", "seq_len", "unit"});
        if (h.contains("num_types")) rc.hawkes_types = h["num_types"].get<int>();
        if (h.contains("base_rate"))
            rc.base_rates.assign(rc.hawkes_types, h["base_rate"].get<double>());
        if (h.contains("base_rates")) rc.base_rates = h["base_rates"].get<std::vector<double>>();
        if (h.contains("impact_scale")) rc.impact_scale = h["impact_scale"].get<double>();
        if (h.contains("n_train")) rc.n_train = h["n_train"].get<int>();
        if (h.contains("n_val")) rc.n_val = h["n_val"].get<int>();
        if (h.contains("n_test")) rc.n_test = h["n_test"].get<int>();
        if (h.contains("seq_len")) rc.seq_len = h["seq_len"].get<int>();
        if (h.contains("unit")) rc.unit = h["unit"].get<std::string>();
    }
    if (j.contains("interval_t_prime")) rc.interval_t_prime = j["interval_t_prime"].get<double>();
    if (j.contains("seed")) {
        rc.seed = j["seed"].get<std::uint64_t>();
        rc.has_seed = true;
    }
    return rc;
}

std::uint64_t resolve_seed(const RunConfig& rc, bool flag_given, std::uint64_t flag_seed) {
    if (flag_given) return flag_seed;
    if (rc.has_seed) return rc.seed;
    if (const char* env = std::getenv("CDIFF_SEED")) return std::strtoull(env, nullptr, 10);
    return 1;
}

Dataset load_dataset_or_usage(const std::string& path) {
    std::ifstream probe(path);
    if (!probe.good()) throw UsageError("data file not found: " + path);
    probe.close();
    return load_jsonl(path);
}

int cmd_gen_data(const RunConfig& rc, const std::string& out_path, std::uint64_t seed) {
    std::vector<double> rates = rc.base_rates;
    if (rates.empty()) rates.assign(rc.hawkes_types, 0.1);
    HawkesSpec spec = make_hawkes_spec(rc.hawkes_types, rates, rc.impact_scale, seed);
    std::cout << "seed: " << seed << "\n";
    std::cout << "impact kernels:";
    for (const auto& row : spec.impact_ids) {
        std::cout << " ";
        for (ImpactKind k : row) std::cout << impact_kind_char(k);
    }
    std::cout << "\nbranching radius: " << branching_radius(spec) << "\n";

    Dataset data = generate_hawkes_dataset(spec, rc.n_train, rc.n_val, rc.n_test, rc.seq_len,
                                           rc.unit);
    write_jsonl(data, out_path);

    double total_events = 0.0;
    std::vector<long> counts(data.num_types, 0);
    for (const EventSequence& seq : data.sequences) {
        total_events += seq.length();
        for (int t : seq.types) counts[t] += 1;
    }
    std::cout << "sequences: " << data.sequences.size() << " (train " << rc.n_train << ", val "
              << rc.n_val << ", test " << rc.n_test << ")\n";
    std::cout << "mean length: " << total_events / data.sequences.size() << "\n";
    std::cout << "type marginals:";
    for (long c : counts) std::cout << " " << c / total_events;
    std::cout << "\nwrote " << out_path << "\n";
    return 0;
}

int cmd_train(RunConfig rc, const std::string& data_path, const std::string& ckpt_path,
              const std::string& log_path, std::uint64_t seed) {
    Dataset data = load_dataset_or_usage(data_path);
    rc.model.num_types = data.num_types;
    rc.train.seed = seed;
    if (rc.interval_t_prime > 0.0) {
        rc.model.horizon = max_events_in_window(data, rc.interval_t_prime);
        std::cout << "horizon from interval window " << rc.interval_t_prime << ": "
                  << rc.model.horizon << "\n";
    }
    std::cout << "seed: " << seed << "\n";
    std::cout << "training on " << data.indices_of(Split::train).size() << " sequences, K="
              << data.num_types << ", horizon=" << rc.model.horizon << ", T="
              << rc.model.diffusion_steps << ", order=" << order_name(rc.model.order) << "\n";

    TrainResult result = train(data, rc.model, rc.train);
    save_checkpoint(result.checkpoint, ckpt_path);

    if (!log_path.empty()) {
        std::ofstream log(log_path);
        require(log.good(), "cannot open log file: " + log_path);
        log << "epoch,train_loss,val_loss,elapsed_s\n";
        char buf[128];
        for (const EpochLog& e : result.log) {
            std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.3f\n", e.epoch, e.train_loss,
                          e.val_loss, e.elapsed_s);
            log << buf;
        }
    }
    std::cout << "best epoch " << result.checkpoint.best_epoch << ", val loss "
              << result.checkpoint.best_val_loss << "\n";
    std::cout << "wrote " << ckpt_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_path,
                 const std::string& mode_name, double t_prime, bool with_poisson,
                 const SamplerConfig& scfg, const std::string& out_path,
                 const std::string& errors_path, std::uint64_t seed, int threads) {
    if (mode_name != "next-n" && mode_name != "interval")
        throw UsageError("--mode must be next-n or interval");
    EvalMode mode = mode_name == "next-n" ? EvalMode::next_n : EvalMode::interval;
    if (mode == EvalMode::interval && t_prime <= 0.0)
        throw UsageError("interval mode requires --t-prime > 0");

    std::ifstream probe(ckpt_path);
    if (!probe.good()) throw UsageError("checkpoint file not found: " + ckpt_path);
    probe.close();
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Dataset data = load_dataset_or_usage(data_path);
    require(data.num_types == ckpt.cfg.num_types, "evaluate: dataset K differs from checkpoint");

    CDiffModel model = model_from_checkpoint(ckpt);
    DiffusionSchedule sched = cosine_schedule(ckpt.schedule_steps);
    ModelBundle bundle{model, sched, ckpt.scaler};
    SamplerConfig sampler = scfg;
    sampler.order = ckpt.cfg.order;

    std::cout << "seed: " << seed << "\n";
    EvalResult cdiff_result = evaluate(bundle, data, sampler, mode, t_prime, seed, threads);

    std::string csv = report_csv_header() + "\n";
    csv += report_csv_row("cdiff", cdiff_result.report) + "\n";
    if (with_poisson) {
        PoissonBaseline baseline = fit_poisson(data);
        EvalResult poisson_result =
            evaluate_poisson(baseline, data, ckpt.cfg.horizon, mode, t_prime, seed);
        csv += report_csv_row("poisson", poisson_result.report) + "\n";
    }
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_path);
        require(out.good(), "cannot open output file: " + out_path);
        out << csv;
        std::cout << "wrote " << out_path << "\n";
    }

    if (!errors_path.empty()) {
        require(mode == EvalMode::next_n, "--per-position-errors needs next-n mode");
        std::ofstream out(errors_path);
        require(out.good(), "cannot open output file: " + errors_path);
        out << "task,position,abs_error\n";
        char buf[96];
        for (size_t i = 0; i < cdiff_result.pairs.size(); ++i) {
            const auto& [pred, truth] = cdiff_result.pairs[i];
            for (int p = 0; p < truth.length(); ++p) {
                std::snprintf(buf, sizeof(buf), "%zu,%d,%.10g\n", i, p,
                              std::abs(truth.deltas[p] - pred.deltas[p]));
                out << buf;
            }
        }
        std::cout << "wrote " << errors_path << "\n";
    }
    return 0;
}

int cmd_forecast(const std::string& ckpt_path, const std::string& context_path,
                 const std::string& out_path, int n, double t_prime, const SamplerConfig& scfg,
                 std::uint64_t seed) {
    if ((n > 0) == (t_prime > 0.0)) throw UsageError("give exactly one of --n or --t-prime");
    std::ifstream probe(ckpt_path);
    if (!probe.good()) throw UsageError("checkpoint file not found: " + ckpt_path);
    probe.close();

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (n > 0)
        require(n == ckpt.cfg.horizon,
                "forecast: --n must equal the trained horizon " + std::to_string(ckpt.cfg.horizon));
    Dataset contexts = load_dataset_or_usage(context_path);
    require(contexts.num_types == ckpt.cfg.num_types,
            "forecast: context K differs from checkpoint");

    CDiffModel model = model_from_checkpoint(ckpt);
    DiffusionSchedule sched = cosine_schedule(ckpt.schedule_steps);
    ModelBundle bundle{model, sched, ckpt.scaler};
    SamplerConfig sampler = scfg;
    sampler.order = ckpt.cfg.order;

    std::cout << "seed: " << seed << "\n";
    Dataset out;
    out.num_types = contexts.num_types;
    out.unit = contexts.unit;
    for (size_t i = 0; i < contexts.sequences.size(); ++i) {
        const EventSequence& ctx = contexts.sequences[i];
        if (ctx.length() < 1) {
            std::cerr << "warning: skipping empty context at sequence " << i << "\n";
            continue;
        }
        std::uint64_t task_seed = Rng::mix(seed, i);
        EventSequence fc = n > 0 ? forecast_n(ctx, bundle, sampler, task_seed)
                                 : forecast_interval(ctx, bundle, sampler, t_prime, task_seed);
        out.sequences.push_back(std::move(fc));
        out.splits.push_back(Split::test);
    }
    write_jsonl(out, out_path);
    std::cout << "wrote " << out_path << " (" << out.sequences.size() << " forecasts)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"CDiff: cross-diffusion event sequence forecasting"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, ckpt_path, log_path, errors_path;
    std::string mode_name = "next-n";
    std::uint64_t seed = 0;
    bool seed_given = false;
    double t_prime = 0.0;
    int n = 0, threads = 1;
    int n_train = -1, n_val = -1, n_test = -1, seq_len = -1, k_override = -1;
    bool with_poisson = false, eta_zero = false;
    int steps = -2, samples = -1;
    std::string order_override;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "master RNG seed (fallback: config, then $CDIFF_SEED)")
            ->each([&](const std::string&) { seed_given = true; });
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic Hawkes dataset");
    gen->add_option("--config", config_path, "JSON run configuration");
    gen->add_option("--out", out_path, "output JSONL path")->required();
    gen->add_option("--n-train", n_train, "train sequences");
    gen->add_option("--n-val", n_val, "validation sequences");
    gen->add_option("--n-test", n_test, "test sequences");
    gen->add_option("--seq-len", seq_len, "events per sequence");
    gen->add_option("--k", k_override, "number of event types");
    add_seed(gen);

    CLI::App* tr = app.add_subcommand("train", "train a model");
    tr->add_option("--config", config_path, "JSON run configuration");
    tr->add_option("--data", data_path, "dataset JSONL")->required();
    tr->add_option("--ckpt-out", ckpt_path, "checkpoint output path")->required();
    tr->add_option("--log-out", log_path, "training log CSV path");
    tr->add_option("--mode", order_override, "denoising order: type_first|time_first|independent");
    tr->add_option("--threads", threads, "worker threads (1 = deterministic path)");
    add_seed(tr);

    CLI::App* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    ev->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    ev->add_option("--data", data_path, "dataset JSONL")->required();
    ev->add_option("--mode", mode_name, "next-n or interval");
    ev->add_option("--t-prime", t_prime, "forecast window for interval mode");
    ev->add_flag("--baseline-poisson", with_poisson, "also fit and score the Poisson baseline");
    ev->add_option("--out", out_path, "metrics CSV path (stdout if omitted)");
    ev->add_option("--per-position-errors", errors_path, "per-position absolute error CSV");
    ev->add_option("--steps", steps, "sampling steps (default: all)");
    ev->add_flag("--eta-zero", eta_zero, "deterministic sampler variant");
    ev->add_option("--samples", samples, "samples aggregated per forecast");
    ev->add_option("--threads", threads, "worker threads (1 = deterministic path)");
    add_seed(ev);

    CLI::App* fc = app.add_subcommand("forecast", "forecast continuations for context sequences");
    fc->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    fc->add_option("--context", data_path, "context JSONL")->required();
    fc->add_option("--out", out_path, "forecast JSONL path")->required();
    fc->add_option("--n", n, "forecast exactly the trained horizon");
    fc->add_option("--t-prime", t_prime, "forecast a time window");
    fc->add_option("--steps", steps, "sampling steps (default: all)");
    fc->add_flag("--eta-zero", eta_zero, "deterministic sampler variant");
    fc->add_option("--samples", samples, "samples aggregated per forecast");
    add_seed(fc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig rc = parse_config(config_path);
        std::uint64_t run_seed = resolve_seed(rc, seed_given, seed);
        if (steps != -2) rc.sampler.steps = steps;
        if (samples > 0) rc.sampler.num_samples = samples;
        if (eta_zero) rc.sampler.eta_zero = true;

        if (gen->parsed()) {
            if (n_train >= 0) rc.n_train = n_train;
            if (n_val >= 0) rc.n_val = n_val;
            if (n_test >= 0) rc.n_test = n_test;
            if (seq_len > 0) rc.seq_len = seq_len;
            if (k_override > 0) {
                rc.hawkes_types = k_override;
                rc.base_rates.clear();
            }
            return cmd_gen_data(rc, out_path, run_seed);
        }
        if (tr->parsed()) {
            if (!order_override.empty()) rc.model.order = order_from_name(order_override);
            return cmd_train(rc, data_path, ckpt_path, log_path, run_seed);
        }
        if (ev->parsed())
            return cmd_evaluate(ckpt_path, data_path, mode_name, t_prime, with_poisson, rc.sampler,
                                out_path, errors_path, run_seed, threads);
        if (fc->parsed())
            return cmd_forecast(ckpt_path, data_path, out_path, n, t_prime, rc.sampler, run_seed);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
