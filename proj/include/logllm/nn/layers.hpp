#pragma once

#include "logllm/nn/tensor.hpp"

#include <optional>

namespace logllm::nn {

/// Low-rank delta `scale * B A` added to a frozen weight. A starts random,
/// B starts at zero so a fresh adapter leaves the layer output unchanged.
struct LoraAdapter {
    Param down; // A: rank x in
    Param up;   // B: out x rank
    double scale = 1.0;
};

/// y = x W^T + b (+ scale * (x A^T) B^T when an adapter is attached).
class Linear {
public:
    struct Cache {
        Matrix input;
        Matrix lora_hidden;
    };

    Linear() = default;
    Linear(std::string name, Index in, Index out, bool bias, double init_std, Rng& rng);

    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
    /// Accumulates parameter gradients and returns dL/dx.
    Matrix backward(const Matrix& dy, const Cache& cache);

    void attach_lora(int rank, double alpha, Rng& rng);
    bool has_lora() const { return lora_.has_value(); }

    Index in_features() const { return weight_.value.cols(); }
    Index out_features() const { return weight_.value.rows(); }

    Param& weight() { return weight_; }
    const Param& weight() const { return weight_; }
    std::optional<Param>& bias() { return bias_; }
    std::optional<LoraAdapter>& lora() { return lora_; }
    const std::optional<LoraAdapter>& lora() const { return lora_; }

    void collect_base(ParamList& out);
    void collect_adapter(ParamList& out);

private:
    Param weight_;
    std::optional<Param> bias_;
    std::optional<LoraAdapter> lora_;
};

class LayerNorm {
public:
    struct Cache {
        Matrix normalized;
        Eigen::VectorXd inv_std;
    };

    LayerNorm() = default;
    LayerNorm(std::string name, Index dim, double eps = 1e-12);

    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
    Matrix backward(const Matrix& dy, const Cache& cache);
    void collect(ParamList& out);

private:
    Param gamma_;
    Param beta_;
    double eps_ = 1e-12;
};

class RMSNorm {
public:
    struct Cache {
        Matrix normalized;
        Eigen::VectorXd inv_rms;
    };

    RMSNorm() = default;
    RMSNorm(std::string name, Index dim, double eps = 1e-6);

    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
    Matrix backward(const Matrix& dy, const Cache& cache);
    void collect(ParamList& out);

private:
    Param gain_;
    double eps_ = 1e-6;
};

/// Token lookup table. Frozen in every training stage; gradients are still
/// supported so the table can be gradient-checked.
class Embedding {
public:
    Embedding() = default;
    Embedding(std::string name, Index vocab, Index dim, double init_std, Rng& rng);

    Matrix forward(const std::vector<int>& ids) const;
    void backward(const Matrix& dy, const std::vector<int>& ids);
    Index vocab_size() const { return table_.value.rows(); }
    Index dim() const { return table_.value.cols(); }
    Param& table() { return table_; }
    const Param& table() const { return table_; }

private:
    Param table_;
};

Matrix gelu(const Matrix& x);
Matrix gelu_grad(const Matrix& x);
Matrix sigmoid(const Matrix& x);
Matrix silu(const Matrix& x);
Matrix silu_grad(const Matrix& x);

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

/// Mean token cross-entropy of `logits` (one row per position) against
/// `targets`; optionally writes dL/dlogits scaled by `grad_scale`.
double cross_entropy(const Matrix& logits, const std::vector<int>& targets, Matrix* dlogits = nullptr,
                     double grad_scale = 1.0);

} // namespace logllm::nn
