#pragma once

#include "logllm/nn/attention.hpp"

#include <vector>

namespace logllm::model {

using nn::Index;
using nn::Matrix;

struct EncoderConfig {
    Index d_model = 64;
    Index layers = 2;
    Index heads = 4;
    Index ffn = 256;
    Index max_message_tokens = 128;
    Index vocab_size = 0; // fixed by the tokenizer
};

/// Bidirectional post-norm transformer encoder. Each message is encoded on
/// its own; the pooled vector is tanh(W h_cls + b).
class MessageEncoder {
public:
    struct LayerCache {
        nn::SelfAttention::Cache attn;
        nn::LayerNorm::Cache norm1, norm2;
        nn::Linear::Cache up, down;
        Matrix up_out;
    };
    struct Cache {
        std::vector<nn::Segment> segments;
        std::vector<int> token_ids;
        nn::LayerNorm::Cache embed_norm;
        std::vector<LayerCache> layers;
        nn::Linear::Cache pooler;
        Matrix pooled;
    };

    MessageEncoder() = default;
    MessageEncoder(const EncoderConfig& cfg, nn::Rng& rng);

    /// One pooled row per message (token ids must start with [CLS]).
    Matrix forward(const std::vector<const std::vector<int>*>& messages, Cache* cache = nullptr) const;
    void backward(const Matrix& d_pooled, Cache& cache);

    void attach_adapters(int rank, double alpha, nn::Rng& rng);
    void collect_base(nn::ParamList& out);
    void collect_adapter(nn::ParamList& out);

    const EncoderConfig& config() const { return cfg_; }

private:
    struct Layer {
        nn::SelfAttention attn;
        nn::LayerNorm norm1;
        nn::Linear up;
        nn::Linear down;
        nn::LayerNorm norm2;
    };

    EncoderConfig cfg_;
    nn::Embedding tokens_;
    nn::Embedding positions_;
    nn::LayerNorm embed_norm_;
    std::vector<Layer> layers_;
    nn::Linear pooler_;
};

} // namespace logllm::model
