#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cdiff/mat.hpp"
#include "cdiff/rng.hpp"

namespace cdiff {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct Param {
    Mat value;
    Mat grad;
};

// Named parameter table with paired gradient buffers. Iteration order is
// the (sorted) name order, which fixes the reduction order everywhere a
// full pass over parameters happens (Adam, clipping, serialization).
class ParamStore {
public:
    // Matrix initialized uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = cols.
    Param& create(const std::string& name, int rows, int cols, Rng& rng);
    // Zero-initialized (biases, norm offsets).
    Param& create_zeros(const std::string& name, int rows, int cols);
    // Constant-initialized (norm gains).
    Param& create_const(const std::string& name, int rows, int cols, double v);

    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const { return table_.count(name) > 0; }

    void zero_grad();
    double grad_sq_norm() const;
    void scale_grad(double s);
    size_t total_entries() const;

    auto begin() { return table_.begin(); }
    auto end() { return table_.end(); }
    auto begin() const { return table_.begin(); }
    auto end() const { return table_.end(); }
    size_t size() const { return table_.size(); }

private:
    std::map<std::string, Param> table_;
};

// ---------------------------------------------------------------------------
// Stateless pieces
// ---------------------------------------------------------------------------

// Sinusoidal encoding of a scalar: component i (1-indexed) is
// cos(y / 10000^((i-1)/D)) for odd i and sin(y / 10000^(i/D)) for even i.
// D must be even and >= 2.
std::vector<double> positional_encoding(double y, int dim);

// Row-wise softmax; every output row sums to 1 and is strictly positive.
Mat softmax_rows(const Mat& logits);
// d_logits from d_probs given the forward output.
Mat softmax_rows_backward(const Mat& probs, const Mat& d_probs);

double gelu(double x);
double gelu_grad(double x);

// ---------------------------------------------------------------------------
// Layers (forward caches feed the matching backward)
// ---------------------------------------------------------------------------

// y = x W^T + b, applied per row. The bias is optional: the attention
// key projection omits it (softmax shift invariance makes it a dead
// parameter).
struct Linear {
    Param* weight = nullptr; // out x in
    Param* bias = nullptr;   // 1 x out, may stay null

    static Linear create(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
                         bool with_bias = true);
    static Linear bind(ParamStore& ps, const std::string& prefix);

    Mat forward(const Mat& x) const;
    // Accumulates weight/bias grads, returns d_x. `x` is the forward input.
    Mat backward(const Mat& x, const Mat& d_y) const;
};

struct LayerNormCache {
    Mat xhat;
    std::vector<double> rstd;
};

// Per-row normalization with learnable gain and offset.
struct LayerNorm {
    Param* gain = nullptr;
    Param* offset = nullptr;

    static LayerNorm create(ParamStore& ps, const std::string& prefix, int dim, Rng& rng);
    static LayerNorm bind(ParamStore& ps, const std::string& prefix);

    Mat forward(const Mat& x, LayerNormCache& cache) const;
    Mat backward(const LayerNormCache& cache, const Mat& d_y) const;
};

struct AttentionCache {
    Mat q_in, kv_in;
    Mat q, k, v;      // projected, n x dim
    Mat probs;        // heads stacked row blocks: (heads*n) x m
    Mat gathered;     // n x dim, pre output projection
};

// Multi-head scaled dot-product attention. Queries come from `q_in`;
// keys/values from `kv_in` (pass the same matrix for self-attention).
struct MultiHeadAttention {
    int heads = 1;
    Linear wq, wk, wv, wo;

    static MultiHeadAttention create(ParamStore& ps, const std::string& prefix, int dim,
                                     int heads, Rng& rng);
    static MultiHeadAttention bind(ParamStore& ps, const std::string& prefix, int heads);

    Mat forward(const Mat& q_in, const Mat& kv_in, AttentionCache& cache) const;
    // Returns {d_q_in, d_kv_in}.
    std::pair<Mat, Mat> backward(const AttentionCache& cache, const Mat& d_out) const;
};

struct TransformerBlockCache {
    Mat x_in;
    LayerNormCache ln_att;
    AttentionCache att;
    Mat after_att;
    LayerNormCache ln_ff;
    Mat ff_in;      // normalized input to ff1
    Mat ff_hidden;  // pre-activation
    Mat ff_act;     // post-gelu
};

// Pre-norm transformer block: one attention sublayer (self when kv is
// null, cross onto kv otherwise) and a two-layer GELU feed-forward, each
// with a residual connection.
struct TransformerBlock {
    LayerNorm ln_att, ln_ff;
    MultiHeadAttention att;
    Linear ff1, ff2;

    static TransformerBlock create(ParamStore& ps, const std::string& prefix, int dim,
                                   int heads, int ff_dim, Rng& rng);
    static TransformerBlock bind(ParamStore& ps, const std::string& prefix, int heads);

    Mat forward(const Mat& x, const Mat* kv, TransformerBlockCache& cache) const;
    // Returns {d_x, d_kv}; d_kv is empty for self-attention.
    std::pair<Mat, Mat> backward(const TransformerBlockCache& cache, bool cross,
                                 const Mat& d_out) const;
};

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Compares analytic gradients against central finite differences
// (h = 1e-5) for every parameter entry. `loss_fn` must zero nothing
// itself: it computes the loss and accumulates gradients into `params`;
// repeated calls must be deterministic. Returns the maximum over entries
// of |g_bp - g_fd| / max(1e-8, |g_bp| + |g_fd|).
double grad_check(const std::function<double()>& loss_fn, ParamStore& params, double h = 1e-5);

} // namespace cdiff
