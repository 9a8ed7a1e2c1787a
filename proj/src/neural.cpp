#include "cdiff/neural.hpp"

#include <cmath>

namespace cdiff {

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

Param& ParamStore::create(const std::string& name, int rows, int cols, Rng& rng) {
    require(!contains(name), "duplicate parameter: " + name);
    Param p;
    p.value = Mat(rows, cols);
    p.grad = Mat(rows, cols);
    double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& v : p.value.a) v = (2.0 * rng.uniform() - 1.0) * bound;
    return table_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::create_zeros(const std::string& name, int rows, int cols) {
    require(!contains(name), "duplicate parameter: " + name);
    Param p;
    p.value = Mat(rows, cols);
    p.grad = Mat(rows, cols);
    return table_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::create_const(const std::string& name, int rows, int cols, double v) {
    Param& p = create_zeros(name, rows, cols);
    p.value.fill(v);
    return p;
}

Param& ParamStore::at(const std::string& name) {
    auto it = table_.find(name);
    require(it != table_.end(), "unknown parameter: " + name);
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = table_.find(name);
    require(it != table_.end(), "unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : table_) p.grad.zero();
}

double ParamStore::grad_sq_norm() const {
    double s = 0.0;
    for (const auto& [name, p] : table_)
        for (double g : p.grad.a) s += g * g;
    return s;
}

void ParamStore::scale_grad(double s) {
    for (auto& [name, p] : table_)
        for (double& g : p.grad.a) g *= s;
}

size_t ParamStore::total_entries() const {
    size_t n = 0;
    for (const auto& [name, p] : table_) n += p.value.size();
    return n;
}

// ---------------------------------------------------------------------------
// Stateless pieces
// ---------------------------------------------------------------------------

std::vector<double> positional_encoding(double y, int dim) {
    require(dim >= 2 && dim % 2 == 0, "positional_encoding: dim must be even and >= 2");
    std::vector<double> out(dim);
    for (int i = 1; i <= dim; ++i) {
        if (i % 2 == 1) {
            out[i - 1] = std::cos(y / std::pow(10000.0, static_cast<double>(i - 1) / dim));
        } else {
            out[i - 1] = std::sin(y / std::pow(10000.0, static_cast<double>(i) / dim));
        }
    }
    return out;
}

Mat softmax_rows(const Mat& logits) {
    Mat out(logits.rows, logits.cols);
    for (int i = 0; i < logits.rows; ++i) {
        const double* in = logits.row(i);
        double* o = out.row(i);
        double mx = in[0];
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (int j = 0; j < logits.cols; ++j) o[j] /= sum;
    }
    return out;
}

Mat softmax_rows_backward(const Mat& probs, const Mat& d_probs) {
    Mat d_logits(probs.rows, probs.cols);
    for (int i = 0; i < probs.rows; ++i) {
        const double* p = probs.row(i);
        const double* dp = d_probs.row(i);
        double dot = 0.0;
        for (int j = 0; j < probs.cols; ++j) dot += p[j] * dp[j];
        double* dl = d_logits.row(i);
        for (int j = 0; j < probs.cols; ++j) dl[j] = p[j] * (dp[j] - dot);
    }
    return d_logits;
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440));
}

double gelu_grad(double x) {
    const double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt2pi = 0.39894228040143267794;
    return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear Linear::create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
                      bool with_bias) {
    Linear l;
    l.weight = &ps.create(prefix + ".w", out, in, rng);
    if (with_bias) l.bias = &ps.create_zeros(prefix + ".b", 1, out);
    return l;
}

Linear Linear::bind(ParamStore& ps, const std::string& prefix) {
    Linear l;
    l.weight = &ps.at(prefix + ".w");
    l.bias = ps.contains(prefix + ".b") ? &ps.at(prefix + ".b") : nullptr;
    return l;
}

Mat Linear::forward(const Mat& x) const {
    Mat y = matmul_bt(x, weight->value);
    if (bias) {
        for (int i = 0; i < y.rows; ++i) {
            double* yi = y.row(i);
            const double* b = bias->value.row(0);
            for (int j = 0; j < y.cols; ++j) yi[j] += b[j];
        }
    }
    return y;
}

Mat Linear::backward(const Mat& x, const Mat& d_y) const {
    weight->grad += matmul_at(d_y, x);
    if (bias) {
        for (int i = 0; i < d_y.rows; ++i) {
            const double* dyi = d_y.row(i);
            double* db = bias->grad.row(0);
            for (int j = 0; j < d_y.cols; ++j) db[j] += dyi[j];
        }
    }
    return matmul(d_y, weight->value);
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& prefix, int dim, Rng&) {
    LayerNorm n;
    n.gain = &ps.create_const(prefix + ".g", 1, dim, 1.0);
    n.offset = &ps.create_zeros(prefix + ".o", 1, dim);
    return n;
}

LayerNorm LayerNorm::bind(ParamStore& ps, const std::string& prefix) {
    LayerNorm n;
    n.gain = &ps.at(prefix + ".g");
    n.offset = &ps.at(prefix + ".o");
    return n;
}

Mat LayerNorm::forward(const Mat& x, LayerNormCache& cache) const {
    const double eps = 1e-8;
    cache.xhat = Mat(x.rows, x.cols);
    cache.rstd.assign(x.rows, 0.0);
    Mat y(x.rows, x.cols);
    const double* g = gain->value.row(0);
    const double* o = offset->value.row(0);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < x.cols; ++j) mean += xi[j];
        mean /= x.cols;
        double var = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            double d = xi[j] - mean;
            var += d * d;
        }
        var /= x.cols;
        double rstd = 1.0 / std::sqrt(var + eps);
        cache.rstd[i] = rstd;
        double* xh = cache.xhat.row(i);
        double* yi = y.row(i);
        for (int j = 0; j < x.cols; ++j) {
            xh[j] = (xi[j] - mean) * rstd;
            yi[j] = g[j] * xh[j] + o[j];
        }
    }
    return y;
}

Mat LayerNorm::backward(const LayerNormCache& cache, const Mat& d_y) const {
    const Mat& xhat = cache.xhat;
    int n = xhat.rows, dim = xhat.cols;
    Mat d_x(n, dim);
    const double* g = gain->value.row(0);
    double* dg = gain->grad.row(0);
    double* doff = offset->grad.row(0);
    for (int i = 0; i < n; ++i) {
        const double* dyi = d_y.row(i);
        const double* xh = xhat.row(i);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < dim; ++j) {
            dg[j] += dyi[j] * xh[j];
            doff[j] += dyi[j];
            double dxh = dyi[j] * g[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
        }
        double* dxi = d_x.row(i);
        double rstd = cache.rstd[i];
        for (int j = 0; j < dim; ++j) {
            double dxh = dyi[j] * g[j];
            dxi[j] = rstd * (dxh - sum_dxhat / dim - xh[j] * sum_dxhat_xhat / dim);
        }
    }
    return d_x;
}

// ---------------------------------------------------------------------------
// MultiHeadAttention
// ---------------------------------------------------------------------------

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, const std::string& prefix, int dim,
                                              int heads, Rng& rng) {
    require(dim % heads == 0, "attention: dim must be divisible by heads");
    MultiHeadAttention a;
    a.heads = heads;
    a.wq = Linear::create(ps, prefix + ".wq", dim, dim, rng);
    a.wk = Linear::create(ps, prefix + ".wk", dim, dim, rng, /*with_bias=*/false);
    a.wv = Linear::create(ps, prefix + ".wv", dim, dim, rng);
    a.wo = Linear::create(ps, prefix + ".wo", dim, dim, rng);
    return a;
}

MultiHeadAttention MultiHeadAttention::bind(ParamStore& ps, const std::string& prefix, int heads) {
    MultiHeadAttention a;
    a.heads = heads;
    a.wq = Linear::bind(ps, prefix + ".wq");
    a.wk = Linear::bind(ps, prefix + ".wk");
    a.wv = Linear::bind(ps, prefix + ".wv");
    a.wo = Linear::bind(ps, prefix + ".wo");
    return a;
}

Mat MultiHeadAttention::forward(const Mat& q_in, const Mat& kv_in, AttentionCache& cache) const {
    require(q_in.cols == kv_in.cols, "attention: query/key width mismatch");
    int n = q_in.rows, m = kv_in.rows, dim = q_in.cols;
    int dh = dim / heads;
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    cache.q_in = q_in;
    cache.kv_in = kv_in;
    cache.q = wq.forward(q_in);
    cache.k = wk.forward(kv_in);
    cache.v = wv.forward(kv_in);

    cache.probs = Mat(heads * n, m);
    cache.gathered = Mat(n, dim);
    for (int h = 0; h < heads; ++h) {
        int off = h * dh;
        for (int i = 0; i < n; ++i) {
            double* prow = cache.probs.row(h * n + i);
            const double* qi = cache.q.row(i) + off;
            double mx = -1e300;
            for (int j = 0; j < m; ++j) {
                const double* kj = cache.k.row(j) + off;
                double s = 0.0;
                for (int d = 0; d < dh; ++d) s += qi[d] * kj[d];
                prow[j] = s * inv_scale;
                mx = std::max(mx, prow[j]);
            }
            double sum = 0.0;
            for (int j = 0; j < m; ++j) {
                prow[j] = std::exp(prow[j] - mx);
                sum += prow[j];
            }
            double* gi = cache.gathered.row(i) + off;
            for (int j = 0; j < m; ++j) {
                prow[j] /= sum;
                const double* vj = cache.v.row(j) + off;
                for (int d = 0; d < dh; ++d) gi[d] += prow[j] * vj[d];
            }
        }
    }
    return wo.forward(cache.gathered);
}

std::pair<Mat, Mat> MultiHeadAttention::backward(const AttentionCache& cache,
                                                 const Mat& d_out) const {
    int n = cache.q.rows, m = cache.k.rows, dim = cache.q.cols;
    int dh = dim / heads;
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat d_gathered = wo.backward(cache.gathered, d_out);
    Mat d_q(n, dim), d_k(m, dim), d_v(m, dim);

    for (int h = 0; h < heads; ++h) {
        int off = h * dh;
        for (int i = 0; i < n; ++i) {
            const double* prow = cache.probs.row(h * n + i);
            const double* dgi = d_gathered.row(i) + off;

            // d_probs and softmax jacobian folded together per row.
            double dot = 0.0;
            std::vector<double> dp(m);
            for (int j = 0; j < m; ++j) {
                const double* vj = cache.v.row(j) + off;
                double s = 0.0;
                for (int d = 0; d < dh; ++d) s += dgi[d] * vj[d];
                dp[j] = s;
                dot += s * prow[j];
            }
            const double* qi = cache.q.row(i) + off;
            double* dqi = d_q.row(i) + off;
            for (int j = 0; j < m; ++j) {
                double dscore = prow[j] * (dp[j] - dot) * inv_scale;
                const double* kj = cache.k.row(j) + off;
                double* dkj = d_k.row(j) + off;
                double* dvj = d_v.row(j) + off;
                for (int d = 0; d < dh; ++d) {
                    dqi[d] += dscore * kj[d];
                    dkj[d] += dscore * qi[d];
                    dvj[d] += prow[j] * dgi[d];
                }
            }
        }
    }

    Mat d_q_in = wq.backward(cache.q_in, d_q);
    Mat d_kv = wk.backward(cache.kv_in, d_k);
    d_kv += wv.backward(cache.kv_in, d_v);
    return {std::move(d_q_in), std::move(d_kv)};
}

// ---------------------------------------------------------------------------
// TransformerBlock
// ---------------------------------------------------------------------------

TransformerBlock TransformerBlock::create(ParamStore& ps, const std::string& prefix, int dim,
                                          int heads, int ff_dim, Rng& rng) {
    TransformerBlock b;
    b.ln_att = LayerNorm::create(ps, prefix + ".ln_att", dim, rng);
    b.ln_ff = LayerNorm::create(ps, prefix + ".ln_ff", dim, rng);
    b.att = MultiHeadAttention::create(ps, prefix + ".att", dim, heads, rng);
    b.ff1 = Linear::create(ps, prefix + ".ff1", dim, ff_dim, rng);
    b.ff2 = Linear::create(ps, prefix + ".ff2", ff_dim, dim, rng);
    return b;
}

TransformerBlock TransformerBlock::bind(ParamStore& ps, const std::string& prefix, int heads) {
    TransformerBlock b;
    b.ln_att = LayerNorm::bind(ps, prefix + ".ln_att");
    b.ln_ff = LayerNorm::bind(ps, prefix + ".ln_ff");
    b.att = MultiHeadAttention::bind(ps, prefix + ".att", heads);
    b.ff1 = Linear::bind(ps, prefix + ".ff1");
    b.ff2 = Linear::bind(ps, prefix + ".ff2");
    return b;
}

Mat TransformerBlock::forward(const Mat& x, const Mat* kv, TransformerBlockCache& cache) const {
    cache.x_in = x;
    Mat normed = ln_att.forward(x, cache.ln_att);
    Mat att_out = att.forward(normed, kv ? *kv : normed, cache.att);
    cache.after_att = x;
    cache.after_att += att_out;

    cache.ff_in = ln_ff.forward(cache.after_att, cache.ln_ff);
    cache.ff_hidden = ff1.forward(cache.ff_in);
    cache.ff_act = Mat(cache.ff_hidden.rows, cache.ff_hidden.cols);
    for (size_t i = 0; i < cache.ff_hidden.a.size(); ++i)
        cache.ff_act.a[i] = gelu(cache.ff_hidden.a[i]);
    Mat ff_out = ff2.forward(cache.ff_act);

    Mat out = cache.after_att;
    out += ff_out;
    return out;
}

std::pair<Mat, Mat> TransformerBlock::backward(const TransformerBlockCache& cache, bool cross,
                                               const Mat& d_out) const {
    // Feed-forward branch.
    Mat d_ff_act = ff2.backward(cache.ff_act, d_out);
    Mat d_ff_hidden(d_ff_act.rows, d_ff_act.cols);
    for (size_t i = 0; i < d_ff_act.a.size(); ++i)
        d_ff_hidden.a[i] = d_ff_act.a[i] * gelu_grad(cache.ff_hidden.a[i]);
    Mat d_after_att = ff1.backward(cache.ff_in, d_ff_hidden);
    d_after_att = ln_ff.backward(cache.ln_ff, d_after_att);
    d_after_att += d_out; // residual

    // Attention branch.
    auto [d_normed, d_kv] = att.backward(cache.att, d_after_att);
    if (!cross) {
        d_normed += d_kv;
        d_kv = Mat();
    }
    Mat d_x = ln_att.backward(cache.ln_att, d_normed);
    d_x += d_after_att; // residual
    return {std::move(d_x), std::move(d_kv)};
}

// ---------------------------------------------------------------------------
// grad_check
// ---------------------------------------------------------------------------

double grad_check(const std::function<double()>& loss_fn, ParamStore& params, double h) {
    params.zero_grad();
    double base = loss_fn();
    require(std::isfinite(base), "grad_check: non-finite loss");

    std::map<std::string, Mat> analytic;
    for (auto& [name, p] : params) analytic.emplace(name, p.grad);

    double worst = 0.0;
    for (auto& [name, p] : params) {
        const Mat& g = analytic.at(name);
        for (size_t idx = 0; idx < p.value.size(); ++idx) {
            double saved = p.value.a[idx];
            p.value.a[idx] = saved + h;
            double up = loss_fn();
            p.value.a[idx] = saved - h;
            double down = loss_fn();
            p.value.a[idx] = saved;
            double fd = (up - down) / (2.0 * h);
            double rel = std::abs(g.a[idx] - fd) / std::max(1e-8, std::abs(g.a[idx]) + std::abs(fd));
            worst = std::max(worst, rel);
        }
    }
    params.zero_grad();
    return worst;
}

} // namespace cdiff
