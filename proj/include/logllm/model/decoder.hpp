#pragma once

#include "logllm/nn/attention.hpp"

#include <span>
#include <vector>

namespace logllm::model {

using nn::Index;
using nn::Matrix;

struct DecoderConfig {
    Index d_model = 128;
    Index layers = 2;
    Index heads = 4;
    Index ffn = 256;
    Index max_positions = 512;
    double rope_base = 10000.0;
    Index vocab_size = 0; // fixed by the tokenizer
};

/// Causal pre-norm decoder: RMSNorm, rotary attention, SwiGLU feed-forward,
/// untied output head. Inputs are embedding rows, so projected message
/// vectors and token embeddings can be mixed freely.
class Decoder {
public:
    struct LayerCache {
        nn::RMSNorm::Cache attn_norm, ffn_norm;
        nn::SelfAttention::Cache attn;
        nn::Linear::Cache gate, up, down;
        Matrix gate_out, up_out;
    };
    struct Cache {
        std::vector<LayerCache> layers;
        nn::RMSNorm::Cache final_norm;
        std::vector<Index> output_rows;
    };
    /// Incremental decoding state of one sequence.
    struct State {
        std::vector<nn::SelfAttention::KvCache> kv;
        Index position = 0;
    };

    Decoder() = default;
    Decoder(const DecoderConfig& cfg, nn::Rng& rng);

    Matrix embed(const std::vector<int>& ids) const { return tokens_.forward(ids); }

    /// Final-norm hidden states for every row, or only for `output_rows`
    /// (ascending) when given; the last layer then skips all other rows.
    Matrix forward(const Matrix& x, std::span<const nn::Segment> segments, Cache* cache = nullptr,
                   std::span<const Index> output_rows = {}) const;
    /// Takes dL/dhidden (of the rows forward returned), returns dL/dx.
    Matrix backward(const Matrix& d_hidden, std::span<const nn::Segment> segments, Cache& cache);

    Matrix logits(const Matrix& hidden) const { return head_.forward(hidden); }
    Matrix logits_backward(const Matrix& d_logits, const Matrix& hidden);

    /// Feeds rows to a cached sequence; returns hidden states of the last
    /// `outputs` new rows (all of them when negative).
    Matrix extend(const Matrix& x, State& state, Index outputs = -1) const;

    void attach_adapters(int rank, double alpha, nn::Rng& rng);
    void collect_base(nn::ParamList& out);
    void collect_adapter(nn::ParamList& out);

    const DecoderConfig& config() const { return cfg_; }
    nn::Linear& head() { return head_; }

private:
    struct Layer {
        nn::RMSNorm attn_norm;
        nn::SelfAttention attn;
        nn::RMSNorm ffn_norm;
        nn::Linear gate, up, down;
    };

    DecoderConfig cfg_;
    nn::Embedding tokens_;
    std::vector<Layer> layers_;
    nn::RMSNorm final_norm_;
    nn::Linear head_;
};

} // namespace logllm::model
