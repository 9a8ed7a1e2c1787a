#include "cdiff/encoder.hpp"

namespace cdiff {

HistoryEncoder HistoryEncoder::create(ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
    HistoryEncoder enc;
    enc.cfg = cfg;
    enc.type_emb = &ps.create("enc.emb", cfg.num_types, cfg.embed_dim, rng);
    for (int l = 0; l < cfg.num_layers; ++l)
        enc.blocks.push_back(TransformerBlock::create(ps, "enc.l" + std::to_string(l),
                                                      cfg.width(), cfg.num_heads, cfg.ff_dim, rng));
    return enc;
}

HistoryEncoder HistoryEncoder::bind(ParamStore& ps, const ModelConfig& cfg) {
    HistoryEncoder enc;
    enc.cfg = cfg;
    enc.type_emb = &ps.at("enc.emb");
    for (int l = 0; l < cfg.num_layers; ++l)
        enc.blocks.push_back(
            TransformerBlock::bind(ps, "enc.l" + std::to_string(l), cfg.num_heads));
    return enc;
}

ContextEmbedding HistoryEncoder::forward(const EventSequence& ctx, const TimeScaler& scaler,
                                         EncoderCache& cache) const {
    require(ctx.length() >= 1, "encode_history: empty context");
    const int m = cfg.embed_dim;
    const int len = ctx.length();

    std::vector<double> arrivals = arrival_times(ctx);
    cache.tokens_in = Mat(len, cfg.width());
    cache.types = ctx.types;
    for (int i = 0; i < len; ++i) {
        double* tok = cache.tokens_in.row(i);
        const double* emb = type_emb->value.row(ctx.types[i]);
        for (int d = 0; d < m; ++d) tok[d] = emb[d];
        std::vector<double> delta_enc =
            positional_encoding(to_diffusion_space(ctx.deltas[i], scaler), m);
        std::vector<double> arr_enc = positional_encoding(arrivals[i], m);
        std::vector<double> idx_enc = positional_encoding(static_cast<double>(i + 1), m);
        for (int d = 0; d < m; ++d) {
            tok[m + d] = delta_enc[d];
            tok[2 * m + d] = arr_enc[d];
            tok[3 * m + d] = idx_enc[d];
        }
    }

    cache.blocks.assign(blocks.size(), TransformerBlockCache{});
    Mat x = cache.tokens_in;
    for (size_t l = 0; l < blocks.size(); ++l)
        x = blocks[l].forward(x, nullptr, cache.blocks[l]);

    ContextEmbedding out;
    out.summary.assign(x.row(len - 1), x.row(len - 1) + cfg.width());
    out.tokens = std::move(x);
    out.last_arrival = arrivals.back();
    return out;
}

void HistoryEncoder::backward(const EncoderCache& cache, const Mat& d_tokens) const {
    Mat d = d_tokens;
    for (size_t l = blocks.size(); l-- > 0;)
        d = blocks[l].backward(cache.blocks[l], false, d).first;
    const int m = cfg.embed_dim;
    for (int i = 0; i < d.rows; ++i) {
        double* demb = type_emb->grad.row(cache.types[i]);
        const double* di = d.row(i);
        for (int dd = 0; dd < m; ++dd) demb[dd] += di[dd];
    }
}

ContextEmbedding encode_history(const EventSequence& ctx, const TimeScaler& scaler,
                                const HistoryEncoder& enc) {
    EncoderCache cache;
    return enc.forward(ctx, scaler, cache);
}

} // namespace cdiff
