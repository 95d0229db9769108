#pragma once

#include "logllm/nn/layers.hpp"

#include <span>

namespace logllm::nn {

struct AttentionConfig {
    Index d_model = 64;
    Index heads = 4;
    bool causal = false;
    bool rotary = false;      // rotary position embedding on queries and keys
    Index max_positions = 512;
    double rope_base = 10000.0;
};

/// Rotary position tables, half-split layout: dimension i pairs with i + head_dim/2.
class RotaryTable {
public:
    RotaryTable() = default;
    RotaryTable(Index head_dim, Index max_positions, double base);

    /// Rotates every head of `rows` in place; row r sits at position first_pos + r.
    void apply(Eigen::Ref<Matrix> rows, Index heads, Index first_pos, bool inverse) const;
    Index max_positions() const { return cos_.rows(); }

private:
    Matrix cos_;
    Matrix sin_;
};

/// Multi-head self-attention over a row-stacked ragged batch; attention never
/// crosses segment boundaries.
class SelfAttention {
public:
    struct Cache {
        Linear::Cache q, k, v, o;
        Matrix queries, keys, values; // after rotary
        std::vector<Matrix> probs;    // one (len x len) block per (segment, head)
    };

    /// Keys/values of one sequence for incremental decoding.
    struct KvCache {
        Matrix keys, values;
        Index length = 0;
    };

    SelfAttention() = default;
    SelfAttention(std::string name, const AttentionConfig& cfg, Rng& rng);

    Matrix forward(const Matrix& x, std::span<const Segment> segments, Cache* cache = nullptr) const;
    Matrix backward(const Matrix& dy, std::span<const Segment> segments, Cache& cache);

    /// Outputs for the listed rows only (ascending, causal models only).
    /// Keys and values still cover every row.
    Matrix forward_rows(const Matrix& x, std::span<const Segment> segments, std::span<const Index> rows,
                        Cache* cache = nullptr) const;
    /// Takes dL/d(selected outputs), returns dL/dx for all rows.
    Matrix backward_rows(const Matrix& dy, std::span<const Segment> segments, std::span<const Index> rows,
                         Cache& cache);

    /// Appends rows to one cached sequence (causal models only) and returns
    /// the outputs of its last `outputs` rows (all of them when negative).
    Matrix extend(const Matrix& x, KvCache& kv, Index outputs = -1) const;

    Linear& q() { return q_; }
    Linear& k() { return k_; }
    Linear& v() { return v_; }
    Linear& o() { return o_; }

    void collect_base(ParamList& out);
    void collect_adapter(ParamList& out);

private:
    AttentionConfig cfg_;
    Index head_dim_ = 0;
    Linear q_, k_, v_, o_;
    RotaryTable rotary_;
};

} // namespace logllm::nn
