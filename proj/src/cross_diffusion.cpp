#include "cdiff/cross_diffusion.hpp"

#include <cmath>

namespace cdiff {

std::string order_name(Order o) {
    switch (o) {
        case Order::type_first: return "type_first";
        case Order::time_first: return "time_first";
        default: return "independent";
    }
}

Order order_from_name(const std::string& name) {
    if (name == "type_first") return Order::type_first;
    if (name == "time_first") return Order::time_first;
    if (name == "independent") return Order::independent;
    throw Error("unknown order '" + name + "'");
}

Mat one_hot(const std::vector<int>& types, int num_types) {
    Mat m(static_cast<int>(types.size()), num_types);
    for (size_t i = 0; i < types.size(); ++i) {
        require(types[i] >= 0 && types[i] < num_types, "one_hot: type out of range");
        m(static_cast<int>(i), types[i]) = 1.0;
    }
    return m;
}

// ---------------------------------------------------------------------------
// DenoiserNet
// ---------------------------------------------------------------------------

DenoiserNet DenoiserNet::create(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                                int time_width, int type_width, int out_width, Rng& rng) {
    require(cfg.embed_dim + time_width + type_width == cfg.width(),
            "denoiser: slot widths must sum to 4 x embed_dim");
    DenoiserNet net;
    net.cfg = cfg;
    net.time_width = time_width;
    net.type_width = type_width;
    net.out_width = out_width;
    net.type_emb = &ps.create(prefix + ".emb", cfg.num_types, type_width, rng);
    for (int l = 0; l < cfg.num_layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        net.self_blocks.push_back(
            TransformerBlock::create(ps, lp + ".self", cfg.width(), cfg.num_heads, cfg.ff_dim, rng));
        net.cross_blocks.push_back(
            TransformerBlock::create(ps, lp + ".cross", cfg.width(), cfg.num_heads, cfg.ff_dim, rng));
    }
    net.head = Linear::create(ps, prefix + ".head", cfg.width(), out_width, rng);
    return net;
}

DenoiserNet DenoiserNet::bind(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                              int time_width, int type_width, int out_width) {
    DenoiserNet net;
    net.cfg = cfg;
    net.time_width = time_width;
    net.type_width = type_width;
    net.out_width = out_width;
    net.type_emb = &ps.at(prefix + ".emb");
    for (int l = 0; l < cfg.num_layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        net.self_blocks.push_back(TransformerBlock::bind(ps, lp + ".self", cfg.num_heads));
        net.cross_blocks.push_back(TransformerBlock::bind(ps, lp + ".cross", cfg.num_heads));
    }
    net.head = Linear::bind(ps, prefix + ".head");
    return net;
}

Mat DenoiserNet::forward(const std::vector<double>& times, const std::vector<int>& types, int t,
                         const ContextEmbedding& ctx, DenoiserCache& cache) const {
    require(times.size() == types.size(), "denoiser: times/types length mismatch");
    const int n = static_cast<int>(times.size());
    const int m = cfg.embed_dim;
    const int width = cfg.width();

    std::vector<double> step_enc = positional_encoding(static_cast<double>(t), m);
    cache.tokens_in = Mat(n, width);
    cache.types = types;
    cache.type_slot_active = !zero_type_slot;
    for (int i = 0; i < n; ++i) {
        double* tok = cache.tokens_in.row(i);
        for (int d = 0; d < m; ++d) tok[d] = step_enc[d];
        if (!zero_time_slot) {
            std::vector<double> time_enc = positional_encoding(times[i], time_width);
            for (int d = 0; d < time_width; ++d) tok[m + d] = time_enc[d];
        }
        if (!zero_type_slot) {
            require(types[i] >= 0 && types[i] < cfg.num_types, "denoiser: type out of range");
            const double* emb = type_emb->value.row(types[i]);
            for (int d = 0; d < type_width; ++d) tok[m + time_width + d] = emb[d];
        }
        // Index encoding offset by the context end time keeps it distinct
        // from the diffusion-step encoding. Attenuated so the summed
        // signal does not drown the embedding slots.
        std::vector<double> idx_enc =
            positional_encoding(static_cast<double>(i + 1) + ctx.last_arrival, width);
        double att = 1.0 / std::sqrt(static_cast<double>(width));
        for (int d = 0; d < width; ++d) tok[d] += att * idx_enc[d];
    }

    cache.self_blocks.assign(self_blocks.size(), TransformerBlockCache{});
    cache.cross_blocks.assign(cross_blocks.size(), TransformerBlockCache{});
    Mat x = cache.tokens_in;
    for (size_t l = 0; l < self_blocks.size(); ++l) {
        x = self_blocks[l].forward(x, nullptr, cache.self_blocks[l]);
        x = cross_blocks[l].forward(x, &ctx.tokens, cache.cross_blocks[l]);
    }
    cache.head_in = x;
    cache.head_out = head.forward(x);
    return cache.head_out;
}

Mat DenoiserNet::backward(const DenoiserCache& cache, const Mat& d_head_out) const {
    Mat d = head.backward(cache.head_in, d_head_out);
    Mat d_ctx;
    for (size_t l = self_blocks.size(); l-- > 0;) {
        auto [d_cross, d_kv] = cross_blocks[l].backward(cache.cross_blocks[l], true, d);
        if (d_ctx.empty())
            d_ctx = std::move(d_kv);
        else
            d_ctx += d_kv;
        d = self_blocks[l].backward(cache.self_blocks[l], false, d_cross).first;
    }
    if (cache.type_slot_active) {
        const int m = cfg.embed_dim;
        for (int i = 0; i < d.rows; ++i) {
            double* demb = type_emb->grad.row(cache.types[i]);
            const double* di = d.row(i) + m + time_width;
            for (int dd = 0; dd < type_width; ++dd) demb[dd] += di[dd];
        }
    }
    return d_ctx;
}

// ---------------------------------------------------------------------------
// CDiffModel
// ---------------------------------------------------------------------------

CDiffModel CDiffModel::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    CDiffModel model;
    model.cfg = cfg;
    Rng rng(seed);
    model.encoder = HistoryEncoder::create(model.params, cfg, rng);
    const int m = cfg.embed_dim;
    // Time denoiser reads a wide time slot and a narrow type slot; the
    // type denoiser mirrors it.
    model.time_denoiser =
        DenoiserNet::create(model.params, "time_den", cfg, 2 * m, m, 1, rng);
    model.type_denoiser =
        DenoiserNet::create(model.params, "type_den", cfg, m, 2 * m, cfg.num_types, rng);
    if (cfg.order == Order::independent) {
        model.time_denoiser.zero_type_slot = true;
        model.type_denoiser.zero_time_slot = true;
    }
    return model;
}

void CDiffModel::load_values(const std::map<std::string, Mat>& values) {
    for (auto& [name, p] : params) {
        auto it = values.find(name);
        require(it != values.end(), "checkpoint missing parameter: " + name);
        require(it->second.rows == p.value.rows && it->second.cols == p.value.cols,
                "checkpoint shape mismatch for parameter: " + name);
        p.value = it->second;
    }
    require(values.size() == params.size(), "checkpoint has extra parameters");
}

// ---------------------------------------------------------------------------
// Forward (noising) process
// ---------------------------------------------------------------------------

std::pair<std::vector<double>, std::vector<double>> forward_time(const std::vector<double>& x0,
                                                                 int t,
                                                                 const DiffusionSchedule& sched,
                                                                 Rng& rng) {
    double bar = sched.alpha_bar_at(t);
    require(t >= 1, "forward_time: step out of range");
    double signal = std::sqrt(bar);
    double noise = std::sqrt(1.0 - bar);
    std::vector<double> eps(x0.size()), xt(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) {
        eps[i] = rng.normal();
        xt[i] = signal * x0[i] + noise * eps[i];
    }
    return {std::move(xt), std::move(eps)};
}

std::vector<double> forward_type_marginal(int type0, int t, int num_types,
                                          const DiffusionSchedule& sched) {
    double bar = sched.alpha_bar_at(t);
    require(t >= 1, "forward_type: step out of range");
    std::vector<double> probs(num_types, (1.0 - bar) / num_types);
    probs[type0] += bar;
    return probs;
}

std::vector<int> forward_type(const std::vector<int>& types0, int t, int num_types,
                              const DiffusionSchedule& sched, Rng& rng) {
    std::vector<int> out(types0.size());
    for (size_t i = 0; i < types0.size(); ++i) {
        std::vector<double> probs = forward_type_marginal(types0[i], t, num_types, sched);
        out[i] = rng.categorical(probs);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reverse parameterization
// ---------------------------------------------------------------------------

std::vector<double> type_mixture_jump(int noisy_type, const std::vector<double>& e0_probs,
                                      int t_hi, int t_lo, const DiffusionSchedule& sched) {
    const int k = static_cast<int>(e0_probs.size());
    require(k >= 1, "type_mixture: empty probability row");
    require(noisy_type >= 0 && noisy_type < k, "type_mixture: noisy type out of range");
    require(t_lo >= 0 && t_lo < t_hi, "type_mixture: need 0 <= t_lo < t_hi");
    double sum = 0.0;
    for (double p : e0_probs) {
        require(p >= 0.0, "type_mixture: negative probability");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-6, "type_mixture: probability row must sum to 1");

    double bar_hi = sched.alpha_bar_at(t_hi);
    double bar_lo = sched.alpha_bar_at(t_lo);
    double ratio = bar_hi / bar_lo;

    std::vector<double> theta(k);
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
        double kern = (j == noisy_type ? ratio : 0.0) + (1.0 - ratio) / k;
        double mix = bar_lo * e0_probs[j] + (1.0 - bar_lo) / k;
        theta[j] = kern * mix;
        total += theta[j];
    }
    require(total > 0.0, "type_mixture: degenerate mixture");
    for (double& v : theta) v /= total;
    return theta;
}

std::vector<double> type_mixture(int noisy_type, const std::vector<double>& e0_probs, int t,
                                 const DiffusionSchedule& sched) {
    return type_mixture_jump(noisy_type, e0_probs, t, t - 1, sched);
}

TypeDistribution predict_e0(const std::vector<double>& times, const std::vector<int>& types,
                            int t, const ContextEmbedding& ctx, const CDiffModel& model) {
    DenoiserCache cache;
    Mat logits = model.type_denoiser.forward(times, types, t, ctx, cache);
    return TypeDistribution{softmax_rows(logits)};
}

std::vector<double> denoise_mu(const std::vector<double>& times, const std::vector<int>& prev_types,
                               int t, const ContextEmbedding& ctx, const CDiffModel& model,
                               const DiffusionSchedule& sched) {
    DenoiserCache cache;
    Mat eps_hat = model.time_denoiser.forward(times, prev_types, t, ctx, cache);
    double alpha = sched.alpha_at(t);
    double beta = sched.beta_at(t);
    double bar = sched.alpha_bar_at(t);
    double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    double coef = beta / (std::sqrt(alpha) * std::sqrt(1.0 - bar));
    std::vector<double> mu(times.size());
    for (size_t i = 0; i < times.size(); ++i)
        mu[i] = times[i] * inv_sqrt_alpha - coef * eps_hat(static_cast<int>(i), 0);
    return mu;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace {

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    double kl = 0.0;
    for (size_t k = 0; k < p.size(); ++k)
        if (p[k] > 0.0) kl += p[k] * std::log(p[k] / q[k]);
    return kl;
}

// Shared graph of one loss evaluation; holds every cache needed for the
// manual backward pass.
struct LossGraph {
    EncoderCache enc;
    ContextEmbedding ctx;
    DenoiserCache type_cache;
    Mat e0_probs; // softmax of the type head
    std::vector<std::vector<double>> pi;   // predicted reverse distribution per position
    std::vector<double> pi_norm;           // normalizer per position
    std::vector<std::vector<double>> kern; // single-step kernel factor per position
    DenoiserCache time_cache;
    std::vector<double> eps;
};

} // namespace

double loss_type(const std::vector<int>& types0, const std::vector<int>& noisy_types,
                 const std::vector<double>& noisy_times, int t, const ContextEmbedding& ctx,
                 const CDiffModel& model, const DiffusionSchedule& sched) {
    require(t >= 2 && t <= sched.total_steps, "loss_type: need 2 <= t <= T");
    TypeDistribution pred = predict_e0(noisy_times, noisy_types, t, ctx, model);
    const int k = model.cfg.num_types;
    double total = 0.0;
    for (size_t i = 0; i < types0.size(); ++i) {
        std::vector<double> true_row(k, 0.0);
        true_row[types0[i]] = 1.0;
        std::vector<double> post = type_mixture(noisy_types[i], true_row, t, sched);
        std::vector<double> row(pred.probs.row(static_cast<int>(i)),
                                pred.probs.row(static_cast<int>(i)) + k);
        std::vector<double> pi = type_mixture(noisy_types[i], row, t, sched);
        total += kl_divergence(post, pi);
    }
    return total;
}

double loss_time(const std::vector<double>& x0, int t, const std::vector<int>& prev_types,
                 const ContextEmbedding& ctx, const CDiffModel& model,
                 const DiffusionSchedule& sched, Rng& rng) {
    auto [xt, eps] = forward_time(x0, t, sched, rng);
    DenoiserCache cache;
    Mat eps_hat = model.time_denoiser.forward(xt, prev_types, t, ctx, cache);
    double total = 0.0;
    for (size_t i = 0; i < x0.size(); ++i) {
        double d = eps_hat(static_cast<int>(i), 0) - eps[i];
        total += d * d;
    }
    return total;
}

LossBreakdown loss_total(const ForecastTask& task, const CDiffModel& model,
                         const DiffusionSchedule& sched, const TimeScaler& scaler, Rng* rng,
                         const LossDraws* frozen, bool backward, LossDraws* record) {
    const ModelConfig& cfg = model.cfg;
    require(task.horizon_n.has_value() && *task.horizon_n == cfg.horizon,
            "loss_total: task horizon does not match the model");
    require(frozen != nullptr || rng != nullptr, "loss_total: need a noise source");
    const int n = cfg.horizon;
    const int k = cfg.num_types;

    LossGraph g;
    g.ctx = model.encoder.forward(task.context, scaler, g.enc);

    std::vector<double> x0 = to_diffusion_space(task.target.deltas, scaler);
    const std::vector<int>& e0 = task.target.types;

    // Draws: one uniform timestep, Gaussian noise for the times, one
    // noisy type per position.
    int t;
    std::vector<int> noisy_types;
    if (frozen) {
        t = frozen->t;
        g.eps = frozen->eps;
        noisy_types = frozen->noisy_types;
    } else {
        t = rng->uniform_int(1, sched.total_steps);
        g.eps.resize(n);
        for (int i = 0; i < n; ++i) g.eps[i] = rng->normal();
        noisy_types = forward_type(e0, t, k, sched, *rng);
    }
    double bar = sched.alpha_bar_at(t);
    std::vector<double> xt(n);
    for (int i = 0; i < n; ++i)
        xt[i] = std::sqrt(bar) * x0[i] + std::sqrt(1.0 - bar) * g.eps[i];

    // Type term: KL against the true posterior for t >= 2, plain
    // cross-entropy reconstruction at t = 1.
    Mat logits = model.type_denoiser.forward(xt, noisy_types, t, g.ctx, g.type_cache);
    g.e0_probs = softmax_rows(logits);

    double bar_lo = sched.alpha_bar_at(t - 1);
    double ratio = bar / bar_lo;
    g.pi.resize(n);
    g.pi_norm.resize(n);
    g.kern.resize(n);
    double type_term = 0.0;
    for (int i = 0; i < n; ++i) {
        g.kern[i].assign(k, 0.0);
        std::vector<double> theta(k);
        double total = 0.0;
        for (int j = 0; j < k; ++j) {
            g.kern[i][j] = (j == noisy_types[i] ? ratio : 0.0) + (1.0 - ratio) / k;
            double mix = bar_lo * g.e0_probs(i, j) + (1.0 - bar_lo) / k;
            theta[j] = g.kern[i][j] * mix;
            total += theta[j];
        }
        for (double& v : theta) v /= total;
        g.pi_norm[i] = total;
        g.pi[i] = std::move(theta);

        if (t >= 2) {
            std::vector<double> true_row(k, 0.0);
            true_row[e0[i]] = 1.0;
            std::vector<double> post = type_mixture(noisy_types[i], true_row, t, sched);
            type_term += kl_divergence(post, g.pi[i]);
        } else {
            type_term += -std::log(g.pi[i][e0[i]]);
        }
    }

    // The time denoiser conditions on freshly denoised types, sampled
    // without gradient flow.
    std::vector<int> prev_types;
    if (frozen) {
        prev_types = frozen->prev_types;
    } else {
        prev_types.resize(n);
        for (int i = 0; i < n; ++i) prev_types[i] = rng->categorical(g.pi[i]);
    }
    if (record) {
        record->t = t;
        record->eps = g.eps;
        record->noisy_types = noisy_types;
        record->prev_types = prev_types;
    }

    Mat eps_hat = model.time_denoiser.forward(xt, prev_types, t, g.ctx, g.time_cache);
    double time_term = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = eps_hat(i, 0) - g.eps[i];
        time_term += d * d;
    }

    LossBreakdown out;
    out.type_term = type_term;
    out.time_term = time_term;
    out.total = type_term + time_term;
    out.t = t;
    require(std::isfinite(out.total), "loss_total: non-finite loss at t=" + std::to_string(t));
    if (!backward) return out;

    // ---- backward ----
    Mat d_eps_hat(n, 1);
    for (int i = 0; i < n; ++i) d_eps_hat(i, 0) = 2.0 * (eps_hat(i, 0) - g.eps[i]);
    Mat d_ctx_tokens = model.time_denoiser.backward(g.time_cache, d_eps_hat);

    Mat d_probs(n, k);
    for (int i = 0; i < n; ++i) {
        std::vector<double> d_pi(k, 0.0);
        if (t >= 2) {
            std::vector<double> true_row(k, 0.0);
            true_row[e0[i]] = 1.0;
            std::vector<double> post = type_mixture(noisy_types[i], true_row, t, sched);
            for (int j = 0; j < k; ++j) d_pi[j] = -post[j] / g.pi[i][j];
        } else {
            d_pi[e0[i]] = -1.0 / g.pi[i][e0[i]];
        }
        double dot = 0.0;
        for (int j = 0; j < k; ++j) dot += d_pi[j] * g.pi[i][j];
        for (int j = 0; j < k; ++j) {
            double d_theta = (d_pi[j] - dot) / g.pi_norm[i];
            d_probs(i, j) = d_theta * g.kern[i][j] * bar_lo;
        }
    }
    Mat d_logits = softmax_rows_backward(g.e0_probs, d_probs);
    d_ctx_tokens += model.type_denoiser.backward(g.type_cache, d_logits);

    model.encoder.backward(g.enc, d_ctx_tokens);
    return out;
}

} // namespace cdiff
