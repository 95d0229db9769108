#include "logllm/nn/attention.hpp"

#include "logllm/errors.hpp"

#include <cmath>
#include <algorithm>

namespace logllm::nn {

namespace {

// Row i attends to columns [0, first + i]; masked entries are exact zeros.
Matrix causal_softmax(const Matrix& scores, Index first) {
    Matrix out = Matrix::Zero(scores.rows(), scores.cols());
    for (Index i = 0; i < scores.rows(); ++i) {
        const Index n = std::min<Index>(first + i + 1, scores.cols());
        auto row = scores.row(i).head(n);
        const double mx = row.maxCoeff();
        out.row(i).head(n) = (row.array() - mx).exp();
        out.row(i).head(n) /= out.row(i).head(n).sum();
    }
    return out;
}

// Row i attends to columns [0, visible[i]).
Matrix masked_softmax(const Matrix& scores, std::span<const Index> visible) {
    Matrix out = Matrix::Zero(scores.rows(), scores.cols());
    for (Index i = 0; i < scores.rows(); ++i) {
        const Index n = visible[static_cast<std::size_t>(i)];
        auto row = scores.row(i).head(n);
        const double mx = row.maxCoeff();
        out.row(i).head(n) = (row.array() - mx).exp();
        out.row(i).head(n) /= out.row(i).head(n).sum();
    }
    return out;
}

// Splits ascending selected rows by segment: (first selected index, count) per segment.
std::vector<std::pair<std::size_t, std::size_t>> split_selection(std::span<const Segment> segments,
                                                                 std::span<const Index> rows) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(segments.size());
    std::size_t cursor = 0;
    for (const auto& seg : segments) {
        const std::size_t begin = cursor;
        while (cursor < rows.size() && rows[cursor] < seg.offset + seg.length) {
            if (rows[cursor] < seg.offset || (cursor > 0 && rows[cursor] <= rows[cursor - 1])) {
                throw RuntimeFailure("selected attention rows must be ascending and inside their segments");
            }
            ++cursor;
        }
        out.emplace_back(begin, cursor - begin);
    }
    if (cursor != rows.size()) throw RuntimeFailure("selected attention rows lie outside every segment");
    return out;
}

Matrix gather_rows(const Matrix& x, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
    return out;
}

} // namespace

RotaryTable::RotaryTable(Index head_dim, Index max_positions, double base) {
    if (head_dim % 2 != 0) throw ConfigError("rotary embeddings need an even head dimension");
    const Index half = head_dim / 2;
    cos_.resize(max_positions, half);
    sin_.resize(max_positions, half);
    for (Index p = 0; p < max_positions; ++p) {
        for (Index i = 0; i < half; ++i) {
            const double theta =
                static_cast<double>(p) * std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
            cos_(p, i) = std::cos(theta);
            sin_(p, i) = std::sin(theta);
        }
    }
}

void RotaryTable::apply(Eigen::Ref<Matrix> rows, Index heads, Index first_pos, bool inverse) const {
    const Index half = cos_.cols();
    const Index head_dim = 2 * half;
    const double sign = inverse ? -1.0 : 1.0;
    for (Index r = 0; r < rows.rows(); ++r) {
        const Index pos = first_pos + r;
        if (pos >= cos_.rows()) throw RuntimeFailure("position " + std::to_string(pos) + " exceeds rotary table");
        for (Index h = 0; h < heads; ++h) {
            double* v = rows.row(r).data() + h * head_dim;
            for (Index i = 0; i < half; ++i) {
                const double c = cos_(pos, i);
                const double s = sign * sin_(pos, i);
                const double x1 = v[i];
                const double x2 = v[i + half];
                v[i] = x1 * c - x2 * s;
                v[i + half] = x1 * s + x2 * c;
            }
        }
    }
}

SelfAttention::SelfAttention(std::string name, const AttentionConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.d_model % cfg.heads != 0) throw ConfigError(name + ": d_model must be divisible by heads");
    head_dim_ = cfg.d_model / cfg.heads;
    const double std = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    const bool bias = !cfg.causal; // encoder layers carry biases, decoder layers do not
    q_ = Linear(name + ".q", cfg.d_model, cfg.d_model, bias, std, rng);
    k_ = Linear(name + ".k", cfg.d_model, cfg.d_model, bias, std, rng);
    v_ = Linear(name + ".v", cfg.d_model, cfg.d_model, bias, std, rng);
    o_ = Linear(name + ".o", cfg.d_model, cfg.d_model, bias, std, rng);
    if (cfg.rotary) rotary_ = RotaryTable(head_dim_, cfg.max_positions, cfg.rope_base);
}

Matrix SelfAttention::forward(const Matrix& x, std::span<const Segment> segments, Cache* cache) const {
    Linear::Cache* cq = cache ? &cache->q : nullptr;
    Linear::Cache* ck = cache ? &cache->k : nullptr;
    Linear::Cache* cv = cache ? &cache->v : nullptr;
    Matrix queries = q_.forward(x, cq);
    Matrix keys = k_.forward(x, ck);
    Matrix values = v_.forward(x, cv);
    if (cfg_.rotary) {
        for (const auto& seg : segments) {
            rotary_.apply(queries.middleRows(seg.offset, seg.length), cfg_.heads, 0, false);
            rotary_.apply(keys.middleRows(seg.offset, seg.length), cfg_.heads, 0, false);
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    Matrix context = Matrix::Zero(x.rows(), cfg_.d_model);
    if (cache) cache->probs.clear();
    for (const auto& seg : segments) {
        for (Index h = 0; h < cfg_.heads; ++h) {
            auto qh = queries.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto kh = keys.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto vh = values.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            Matrix scores(seg.length, seg.length);
            scores.noalias() = qh * kh.transpose();
            scores *= scale;
            Matrix probs = cfg_.causal ? causal_softmax(scores, 0) : softmax_rows(scores);
            context.block(seg.offset, h * head_dim_, seg.length, head_dim_).noalias() = probs * vh;
            if (cache) cache->probs.push_back(std::move(probs));
        }
    }
    Matrix out = o_.forward(context, cache ? &cache->o : nullptr);
    if (cache) {
        cache->queries = std::move(queries);
        cache->keys = std::move(keys);
        cache->values = std::move(values);
    }
    return out;
}

Matrix SelfAttention::backward(const Matrix& dy, std::span<const Segment> segments, Cache& cache) {
    Matrix dcontext = o_.backward(dy, cache.o);
    Matrix dq = Matrix::Zero(dy.rows(), cfg_.d_model);
    Matrix dk = Matrix::Zero(dy.rows(), cfg_.d_model);
    Matrix dv = Matrix::Zero(dy.rows(), cfg_.d_model);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    std::size_t block = 0;
    for (const auto& seg : segments) {
        for (Index h = 0; h < cfg_.heads; ++h, ++block) {
            const Matrix& probs = cache.probs[block];
            auto qh = cache.queries.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto kh = cache.keys.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto vh = cache.values.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto dctx = dcontext.block(seg.offset, h * head_dim_, seg.length, head_dim_);

            Matrix dprobs(seg.length, seg.length);
            dprobs.noalias() = dctx * vh.transpose();
            dv.block(seg.offset, h * head_dim_, seg.length, head_dim_).noalias() = probs.transpose() * dctx;
            Eigen::VectorXd row_dot = (dprobs.array() * probs.array()).rowwise().sum();
            Matrix dscores = probs.array() * (dprobs.colwise() - row_dot).array();
            dscores *= scale;
            dq.block(seg.offset, h * head_dim_, seg.length, head_dim_).noalias() = dscores * kh;
            dk.block(seg.offset, h * head_dim_, seg.length, head_dim_).noalias() = dscores.transpose() * qh;
        }
    }
    if (cfg_.rotary) {
        for (const auto& seg : segments) {
            rotary_.apply(dq.middleRows(seg.offset, seg.length), cfg_.heads, 0, true);
            rotary_.apply(dk.middleRows(seg.offset, seg.length), cfg_.heads, 0, true);
        }
    }
    Matrix dx = q_.backward(dq, cache.q);
    dx += k_.backward(dk, cache.k);
    dx += v_.backward(dv, cache.v);
    return dx;
}

Matrix SelfAttention::forward_rows(const Matrix& x, std::span<const Segment> segments, std::span<const Index> rows,
                                   Cache* cache) const {
    if (!cfg_.causal) throw RuntimeFailure("row-selected attention requires a causal model");
    const auto ranges = split_selection(segments, rows);
    Matrix queries = q_.forward(gather_rows(x, rows), cache ? &cache->q : nullptr);
    Matrix keys = k_.forward(x, cache ? &cache->k : nullptr);
    Matrix values = v_.forward(x, cache ? &cache->v : nullptr);
    if (cfg_.rotary) {
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto& seg = segments[s];
            rotary_.apply(keys.middleRows(seg.offset, seg.length), cfg_.heads, 0, false);
            for (std::size_t i = ranges[s].first; i < ranges[s].first + ranges[s].second; ++i) {
                rotary_.apply(queries.row(static_cast<Index>(i)), cfg_.heads, rows[i] - seg.offset, false);
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    Matrix context = Matrix::Zero(queries.rows(), cfg_.d_model);
    if (cache) cache->probs.clear();
    std::vector<Index> visible;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto& seg = segments[s];
        const auto [first, count] = ranges[s];
        if (count == 0) continue;
        const Index m = static_cast<Index>(count);
        visible.clear();
        for (std::size_t i = first; i < first + count; ++i) visible.push_back(rows[i] - seg.offset + 1);
        for (Index h = 0; h < cfg_.heads; ++h) {
            auto qh = queries.block(static_cast<Index>(first), h * head_dim_, m, head_dim_);
            auto kh = keys.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto vh = values.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            Matrix scores(m, seg.length);
            scores.noalias() = qh * kh.transpose();
            scores *= scale;
            Matrix probs = masked_softmax(scores, visible);
            context.block(static_cast<Index>(first), h * head_dim_, m, head_dim_).noalias() = probs * vh;
            if (cache) cache->probs.push_back(std::move(probs));
        }
    }
    Matrix out = o_.forward(context, cache ? &cache->o : nullptr);
    if (cache) {
        cache->queries = std::move(queries);
        cache->keys = std::move(keys);
        cache->values = std::move(values);
    }
    return out;
}

Matrix SelfAttention::backward_rows(const Matrix& dy, std::span<const Segment> segments, std::span<const Index> rows,
                                    Cache& cache) {
    const auto ranges = split_selection(segments, rows);
    Matrix dcontext = o_.backward(dy, cache.o);
    const Index total = cache.keys.rows();
    Matrix dq = Matrix::Zero(dy.rows(), cfg_.d_model);
    Matrix dk = Matrix::Zero(total, cfg_.d_model);
    Matrix dv = Matrix::Zero(total, cfg_.d_model);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    std::size_t block = 0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto& seg = segments[s];
        const auto [first, count] = ranges[s];
        if (count == 0) continue;
        const Index m = static_cast<Index>(count);
        const Index f = static_cast<Index>(first);
        for (Index h = 0; h < cfg_.heads; ++h, ++block) {
            const Matrix& probs = cache.probs[block];
            auto qh = cache.queries.block(f, h * head_dim_, m, head_dim_);
            auto kh = cache.keys.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto vh = cache.values.block(seg.offset, h * head_dim_, seg.length, head_dim_);
            auto dctx = dcontext.block(f, h * head_dim_, m, head_dim_);

            Matrix dprobs(m, seg.length);
            dprobs.noalias() = dctx * vh.transpose();
            dv.block(seg.offset, h * head_dim_, seg.length, head_dim_).noalias() = probs.transpose() * dctx;
            Eigen::VectorXd row_dot = (dprobs.array() * probs.array()).rowwise().sum();
            Matrix dscores = probs.array() * (dprobs.colwise() - row_dot).array();
            dscores *= scale;
            dq.block(f, h * head_dim_, m, head_dim_).noalias() = dscores * kh;
            dk.block(seg.offset, h * head_dim_, seg.length, head_dim_).noalias() = dscores.transpose() * qh;
        }
    }
    if (cfg_.rotary) {
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto& seg = segments[s];
            rotary_.apply(dk.middleRows(seg.offset, seg.length), cfg_.heads, 0, true);
            for (std::size_t i = ranges[s].first; i < ranges[s].first + ranges[s].second; ++i) {
                rotary_.apply(dq.row(static_cast<Index>(i)), cfg_.heads, rows[i] - seg.offset, true);
            }
        }
    }
    Matrix dx = k_.backward(dk, cache.k);
    dx += v_.backward(dv, cache.v);
    const Matrix dx_selected = q_.backward(dq, cache.q);
    for (std::size_t i = 0; i < rows.size(); ++i) dx.row(rows[i]) += dx_selected.row(static_cast<Index>(i));
    return dx;
}

Matrix SelfAttention::extend(const Matrix& x, KvCache& kv, Index outputs) const {
    if (!cfg_.causal) throw RuntimeFailure("incremental attention requires a causal model");
    const Index first = kv.length;
    const Index added = x.rows();
    const Index kept = outputs < 0 ? added : std::min(outputs, added);
    const Index skipped = added - kept;
    Matrix queries = q_.forward(x.bottomRows(kept));
    Matrix keys = k_.forward(x);
    Matrix values = v_.forward(x);
    if (cfg_.rotary) {
        rotary_.apply(queries, cfg_.heads, first + skipped, false);
        rotary_.apply(keys, cfg_.heads, first, false);
    }
    if (kv.keys.rows() < first + added) {
        const Index capacity = std::max<Index>(first + added, 2 * kv.keys.rows());
        kv.keys.conservativeResize(capacity, cfg_.d_model);
        kv.values.conservativeResize(capacity, cfg_.d_model);
    }
    kv.keys.middleRows(first, added) = keys;
    kv.values.middleRows(first, added) = values;
    kv.length = first + added;

    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    Matrix context(kept, cfg_.d_model);
    for (Index h = 0; h < cfg_.heads; ++h) {
        auto qh = queries.middleCols(h * head_dim_, head_dim_);
        auto kh = kv.keys.block(0, h * head_dim_, kv.length, head_dim_);
        auto vh = kv.values.block(0, h * head_dim_, kv.length, head_dim_);
        Matrix scores(kept, kv.length);
        scores.noalias() = qh * kh.transpose();
        scores *= scale;
        context.middleCols(h * head_dim_, head_dim_).noalias() = causal_softmax(scores, first + skipped) * vh;
    }
    return o_.forward(context);
}

void SelfAttention::collect_base(ParamList& out) {
    q_.collect_base(out);
    k_.collect_base(out);
    v_.collect_base(out);
    o_.collect_base(out);
}

void SelfAttention::collect_adapter(ParamList& out) {
    q_.collect_adapter(out);
    k_.collect_adapter(out);
    v_.collect_adapter(out);
    o_.collect_adapter(out);
}

} // namespace logllm::nn
