#include "logllm/model/encoder.hpp"

#include "logllm/errors.hpp"

#include <cmath>

namespace logllm::model {

MessageEncoder::MessageEncoder(const EncoderConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
    if (cfg.vocab_size <= 0) throw ConfigError("encoder vocabulary is empty");
    const double std_in = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    const double std_ffn = 1.0 / std::sqrt(static_cast<double>(cfg.ffn));
    tokens_ = nn::Embedding("encoder.tokens", cfg.vocab_size, cfg.d_model, 1.0, rng);
    positions_ = nn::Embedding("encoder.positions", cfg.max_message_tokens, cfg.d_model, 0.5, rng);
    embed_norm_ = nn::LayerNorm("encoder.embed_norm", cfg.d_model);
    nn::AttentionConfig attn{cfg.d_model, cfg.heads, false, false, cfg.max_message_tokens, 10000.0};
    for (Index l = 0; l < cfg.layers; ++l) {
        const std::string p = "encoder.layer" + std::to_string(l);
        Layer layer;
        layer.attn = nn::SelfAttention(p + ".attn", attn, rng);
        layer.norm1 = nn::LayerNorm(p + ".norm1", cfg.d_model);
        layer.up = nn::Linear(p + ".ffn_up", cfg.d_model, cfg.ffn, true, std_in, rng);
        layer.down = nn::Linear(p + ".ffn_down", cfg.ffn, cfg.d_model, true, std_ffn, rng);
        layer.norm2 = nn::LayerNorm(p + ".norm2", cfg.d_model);
        layers_.push_back(std::move(layer));
    }
    pooler_ = nn::Linear("encoder.pooler", cfg.d_model, cfg.d_model, true, std_in, rng);
}

Matrix MessageEncoder::forward(const std::vector<const std::vector<int>*>& messages, Cache* cache) const {
    std::vector<nn::Segment> segments;
    std::vector<int> ids;
    std::vector<int> pos;
    for (const auto* msg : messages) {
        if (msg->empty() || static_cast<Index>(msg->size()) > cfg_.max_message_tokens) {
            throw RuntimeFailure("encoder input must hold 1.." + std::to_string(cfg_.max_message_tokens) + " tokens");
        }
        segments.push_back({static_cast<Index>(ids.size()), static_cast<Index>(msg->size())});
        ids.insert(ids.end(), msg->begin(), msg->end());
        for (std::size_t i = 0; i < msg->size(); ++i) pos.push_back(static_cast<int>(i));
    }
    Matrix x = tokens_.forward(ids) + positions_.forward(pos);
    if (cache) cache->layers.assign(layers_.size(), {});
    x = embed_norm_.forward(x, cache ? &cache->embed_norm : nullptr);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        LayerCache* lc = cache ? &cache->layers[l] : nullptr;
        Matrix h = x + layer.attn.forward(x, segments, lc ? &lc->attn : nullptr);
        h = layer.norm1.forward(h, lc ? &lc->norm1 : nullptr);
        Matrix up = layer.up.forward(h, lc ? &lc->up : nullptr);
        Matrix f = layer.down.forward(nn::gelu(up), lc ? &lc->down : nullptr);
        if (lc) lc->up_out = std::move(up);
        x = layer.norm2.forward(h + f, lc ? &lc->norm2 : nullptr);
    }
    Matrix cls(static_cast<Index>(segments.size()), cfg_.d_model);
    for (std::size_t i = 0; i < segments.size(); ++i) cls.row(static_cast<Index>(i)) = x.row(segments[i].offset);
    Matrix pooled = pooler_.forward(cls, cache ? &cache->pooler : nullptr).array().tanh();
    if (cache) {
        cache->segments = std::move(segments);
        cache->token_ids = std::move(ids);
        cache->pooled = pooled;
    }
    return pooled;
}

void MessageEncoder::backward(const Matrix& d_pooled, Cache& cache) {
    Matrix d_pre = d_pooled.array() * (1.0 - cache.pooled.array().square());
    Matrix d_cls = pooler_.backward(d_pre, cache.pooler);
    Matrix dx = Matrix::Zero(static_cast<Index>(cache.token_ids.size()), cfg_.d_model);
    for (std::size_t i = 0; i < cache.segments.size(); ++i) dx.row(cache.segments[i].offset) = d_cls.row(static_cast<Index>(i));
    for (std::size_t l = layers_.size(); l-- > 0;) {
        Layer& layer = layers_[l];
        LayerCache& lc = cache.layers[l];
        Matrix ds2 = layer.norm2.backward(dx, lc.norm2);
        Matrix d_act = layer.down.backward(ds2, lc.down);
        Matrix d_up = d_act.array() * nn::gelu_grad(lc.up_out).array();
        Matrix dh = ds2 + layer.up.backward(d_up, lc.up);
        Matrix ds1 = layer.norm1.backward(dh, lc.norm1);
        dx = ds1 + layer.attn.backward(ds1, cache.segments, lc.attn);
    }
    Matrix de = embed_norm_.backward(dx, cache.embed_norm);
    if (tokens_.table().trainable || positions_.table().trainable) {
        tokens_.backward(de, cache.token_ids);
        std::vector<int> pos;
        for (const auto& seg : cache.segments) {
            for (Index i = 0; i < seg.length; ++i) pos.push_back(static_cast<int>(i));
        }
        positions_.backward(de, pos);
    }
}

void MessageEncoder::attach_adapters(int rank, double alpha, nn::Rng& rng) {
    for (auto& layer : layers_) {
        layer.attn.q().attach_lora(rank, alpha, rng);
        layer.attn.k().attach_lora(rank, alpha, rng);
        layer.attn.v().attach_lora(rank, alpha, rng);
        layer.attn.o().attach_lora(rank, alpha, rng);
        layer.up.attach_lora(rank, alpha, rng);
        layer.down.attach_lora(rank, alpha, rng);
    }
    pooler_.attach_lora(rank, alpha, rng);
}

void MessageEncoder::collect_base(nn::ParamList& out) {
    out.push_back(&tokens_.table());
    out.push_back(&positions_.table());
    embed_norm_.collect(out);
    for (auto& layer : layers_) {
        layer.attn.collect_base(out);
        layer.norm1.collect(out);
        layer.up.collect_base(out);
        layer.down.collect_base(out);
        layer.norm2.collect(out);
    }
    pooler_.collect_base(out);
}

void MessageEncoder::collect_adapter(nn::ParamList& out) {
    for (auto& layer : layers_) {
        layer.attn.collect_adapter(out);
        layer.up.collect_adapter(out);
        layer.down.collect_adapter(out);
    }
    pooler_.collect_adapter(out);
}

} // namespace logllm::model
