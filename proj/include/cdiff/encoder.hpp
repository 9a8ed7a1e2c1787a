#pragma once

#include <vector>

#include "cdiff/model.hpp"
#include "cdiff/neural.hpp"
#include "cdiff/sequences.hpp"
#include "cdiff/transform.hpp"

namespace cdiff {

// Fixed-width encoding of a variable-length history. One token per
// context event plus a summary vector (the last token). `last_arrival`
// carries the context end time used to offset the denoisers' sequence
// index encoding.
struct ContextEmbedding {
    Mat tokens;                  // context length x 4M
    std::vector<double> summary; // 4M
    double last_arrival = 0.0;
};

struct EncoderCache {
    Mat tokens_in;
    std::vector<int> types;
    std::vector<TransformerBlockCache> blocks;
};

// Self-attention history encoder. Each event token concatenates the type
// embedding, an encoding of the transformed inter-arrival time, an
// encoding of the raw arrival time and an encoding of the event index,
// each of width M.
struct HistoryEncoder {
    ModelConfig cfg;
    Param* type_emb = nullptr; // num_types x M
    std::vector<TransformerBlock> blocks;

    static HistoryEncoder create(ParamStore& ps, const ModelConfig& cfg, Rng& rng);
    static HistoryEncoder bind(ParamStore& ps, const ModelConfig& cfg);

    ContextEmbedding forward(const EventSequence& ctx, const TimeScaler& scaler,
                             EncoderCache& cache) const;
    // Gradient of some loss w.r.t. the context tokens flows back into the
    // encoder parameters.
    void backward(const EncoderCache& cache, const Mat& d_tokens) const;
};

// Convenience wrapper matching the operation surface.
ContextEmbedding encode_history(const EventSequence& ctx, const TimeScaler& scaler,
                                const HistoryEncoder& enc);

} // namespace cdiff
