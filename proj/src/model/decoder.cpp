#include "logllm/model/decoder.hpp"

#include "logllm/errors.hpp"

#include <cmath>

namespace logllm::model {

Decoder::Decoder(const DecoderConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
    if (cfg.vocab_size <= 0) throw ConfigError("decoder vocabulary is empty");
    const double std_in = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    const double std_ffn = 1.0 / std::sqrt(static_cast<double>(cfg.ffn));
    tokens_ = nn::Embedding("decoder.tokens", cfg.vocab_size, cfg.d_model, 1.0, rng);
    nn::AttentionConfig attn{cfg.d_model, cfg.heads, true, true, cfg.max_positions, cfg.rope_base};
    for (Index l = 0; l < cfg.layers; ++l) {
        const std::string p = "decoder.layer" + std::to_string(l);
        Layer layer;
        layer.attn_norm = nn::RMSNorm(p + ".attn_norm", cfg.d_model);
        layer.attn = nn::SelfAttention(p + ".attn", attn, rng);
        layer.ffn_norm = nn::RMSNorm(p + ".ffn_norm", cfg.d_model);
        layer.gate = nn::Linear(p + ".ffn_gate", cfg.d_model, cfg.ffn, false, std_in, rng);
        layer.up = nn::Linear(p + ".ffn_up", cfg.d_model, cfg.ffn, false, std_in, rng);
        layer.down = nn::Linear(p + ".ffn_down", cfg.ffn, cfg.d_model, false, std_ffn, rng);
        layers_.push_back(std::move(layer));
    }
    final_norm_ = nn::RMSNorm("decoder.final_norm", cfg.d_model);
    head_ = nn::Linear("decoder.head", cfg.d_model, cfg.vocab_size, false, std_in, rng);
}

Matrix Decoder::forward(const Matrix& x_in, std::span<const nn::Segment> segments, Cache* cache,
                        std::span<const Index> output_rows) const {
    for (const auto& seg : segments) {
        if (seg.length > cfg_.max_positions) {
            throw RuntimeFailure("decoder input of " + std::to_string(seg.length) + " rows exceeds " +
                                 std::to_string(cfg_.max_positions) + " positions");
        }
    }
    const bool trimmed = !output_rows.empty();
    if (cache) {
        cache->layers.assign(layers_.size(), {});
        cache->output_rows.assign(output_rows.begin(), output_rows.end());
    }
    Matrix x = x_in;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        LayerCache* lc = cache ? &cache->layers[l] : nullptr;
        Matrix a = layer.attn_norm.forward(x, lc ? &lc->attn_norm : nullptr);
        if (trimmed && l + 1 == layers_.size()) {
            // Only the requested rows leave the last layer.
            Matrix kept(static_cast<Index>(output_rows.size()), x.cols());
            for (std::size_t i = 0; i < output_rows.size(); ++i) kept.row(static_cast<Index>(i)) = x.row(output_rows[i]);
            kept += layer.attn.forward_rows(a, segments, output_rows, lc ? &lc->attn : nullptr);
            x = std::move(kept);
        } else {
            x += layer.attn.forward(a, segments, lc ? &lc->attn : nullptr);
        }
        Matrix b = layer.ffn_norm.forward(x, lc ? &lc->ffn_norm : nullptr);
        Matrix g = layer.gate.forward(b, lc ? &lc->gate : nullptr);
        Matrix u = layer.up.forward(b, lc ? &lc->up : nullptr);
        Matrix act = nn::silu(g).cwiseProduct(u);
        x += layer.down.forward(act, lc ? &lc->down : nullptr);
        if (lc) {
            lc->gate_out = std::move(g);
            lc->up_out = std::move(u);
        }
    }
    return final_norm_.forward(x, cache ? &cache->final_norm : nullptr);
}

Matrix Decoder::backward(const Matrix& d_hidden, std::span<const nn::Segment> segments, Cache& cache) {
    const bool trimmed = !cache.output_rows.empty();
    Matrix dx = final_norm_.backward(d_hidden, cache.final_norm);
    for (std::size_t l = layers_.size(); l-- > 0;) {
        Layer& layer = layers_[l];
        LayerCache& lc = cache.layers[l];
        Matrix d_act = layer.down.backward(dx, lc.down);
        const nn::Array s = nn::sigmoid(lc.gate_out).array();
        const nn::Array g = lc.gate_out.array();
        Matrix dg = (d_act.array() * lc.up_out.array() * s * (1.0 + g * (1.0 - s))).matrix();
        Matrix du = (d_act.array() * g * s).matrix();
        Matrix db = layer.gate.backward(dg, lc.gate);
        db += layer.up.backward(du, lc.up);
        dx += layer.ffn_norm.backward(db, lc.ffn_norm);
        if (trimmed && l + 1 == layers_.size()) {
            Matrix da = layer.attn.backward_rows(dx, segments, cache.output_rows, lc.attn);
            Matrix full = Matrix::Zero(da.rows(), da.cols());
            for (std::size_t i = 0; i < cache.output_rows.size(); ++i) {
                full.row(cache.output_rows[i]) = dx.row(static_cast<Index>(i));
            }
            full += layer.attn_norm.backward(da, lc.attn_norm);
            dx = std::move(full);
        } else {
            Matrix da = layer.attn.backward(dx, segments, lc.attn);
            dx += layer.attn_norm.backward(da, lc.attn_norm);
        }
    }
    return dx;
}

Matrix Decoder::logits_backward(const Matrix& d_logits, const Matrix& hidden) {
    nn::Linear::Cache cache;
    cache.input = hidden;
    return head_.backward(d_logits, cache);
}

Matrix Decoder::extend(const Matrix& x_in, State& state, Index outputs) const {
    if (state.position + x_in.rows() > cfg_.max_positions) {
        throw RuntimeFailure("decoder position budget of " + std::to_string(cfg_.max_positions) + " exceeded");
    }
    if (state.kv.size() != layers_.size()) state.kv.assign(layers_.size(), {});
    Matrix x = x_in;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        if (outputs >= 0 && outputs < x.rows() && l + 1 == layers_.size()) {
            Matrix kept = x.bottomRows(outputs);
            kept += layer.attn.extend(layer.attn_norm.forward(x), state.kv[l], outputs);
            x = std::move(kept);
        } else {
            x += layer.attn.extend(layer.attn_norm.forward(x), state.kv[l]);
        }
        Matrix b = layer.ffn_norm.forward(x);
        Matrix act = nn::silu(layer.gate.forward(b)).cwiseProduct(layer.up.forward(b));
        x += layer.down.forward(act);
    }
    state.position += x_in.rows();
    return final_norm_.forward(x);
}

void Decoder::attach_adapters(int rank, double alpha, nn::Rng& rng) {
    for (auto& layer : layers_) {
        layer.attn.q().attach_lora(rank, alpha, rng);
        layer.attn.k().attach_lora(rank, alpha, rng);
        layer.attn.v().attach_lora(rank, alpha, rng);
        layer.attn.o().attach_lora(rank, alpha, rng);
        layer.gate.attach_lora(rank, alpha, rng);
        layer.up.attach_lora(rank, alpha, rng);
        layer.down.attach_lora(rank, alpha, rng);
    }
}

void Decoder::collect_base(nn::ParamList& out) {
    out.push_back(&tokens_.table());
    for (auto& layer : layers_) {
        layer.attn_norm.collect(out);
        layer.attn.collect_base(out);
        layer.ffn_norm.collect(out);
        layer.gate.collect_base(out);
        layer.up.collect_base(out);
        layer.down.collect_base(out);
    }
    final_norm_.collect(out);
    head_.collect_base(out);
}

void Decoder::collect_adapter(nn::ParamList& out) {
    for (auto& layer : layers_) {
        layer.attn.collect_adapter(out);
        layer.gate.collect_adapter(out);
        layer.up.collect_adapter(out);
        layer.down.collect_adapter(out);
    }
}

} // namespace logllm::model
