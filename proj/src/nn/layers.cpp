#include "logllm/nn/layers.hpp"

#include "logllm/errors.hpp"

#include <cmath>
#include <cstring>

namespace logllm::nn {

Matrix random_normal(Index rows, Index cols, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

std::uint64_t checksum(const ParamList& params) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (const Param* p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
        const auto n = static_cast<std::size_t>(p->value.size()) * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= bytes[i];
            hash *= 1099511628211ULL;
        }
    }
    return hash;
}

double grad_norm(const ParamList& params) {
    double sq = 0.0;
    for (const Param* p : params) {
        if (p->grad.size() == p->value.size()) sq += p->grad.squaredNorm();
    }
    return std::sqrt(sq);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, Index in, Index out, bool bias, double init_std, Rng& rng)
    : weight_(name + ".weight", random_normal(out, in, init_std, rng)) {
    if (bias) bias_.emplace(name + ".bias", Matrix::Zero(1, out));
}

Matrix Linear::forward(const Matrix& x, Cache* cache) const {
    if (x.cols() != in_features()) {
        throw RuntimeFailure(weight_.name + ": input width " + std::to_string(x.cols()) + " != " +
                             std::to_string(in_features()));
    }
    Matrix y(x.rows(), out_features());
    y.noalias() = x * weight_.value.transpose();
    if (bias_) y.rowwise() += bias_->value.row(0);
    if (lora_) {
        Matrix hidden = x * lora_->down.value.transpose();
        y.noalias() += lora_->scale * (hidden * lora_->up.value.transpose());
        if (cache) cache->lora_hidden = std::move(hidden);
    }
    if (cache) cache->input = x;
    return y;
}

Matrix Linear::backward(const Matrix& dy, const Cache& cache) {
    const Matrix& x = cache.input;
    if (weight_.trainable) weight_.grad_buffer().noalias() += dy.transpose() * x;
    if (bias_ && bias_->trainable) bias_->grad_buffer() += dy.colwise().sum();
    Matrix dx(dy.rows(), in_features());
    dx.noalias() = dy * weight_.value;
    if (lora_) {
        Matrix dhidden = lora_->scale * (dy * lora_->up.value);
        if (lora_->up.trainable) {
            lora_->up.grad_buffer().noalias() += lora_->scale * (dy.transpose() * cache.lora_hidden);
        }
        if (lora_->down.trainable) lora_->down.grad_buffer().noalias() += dhidden.transpose() * x;
        dx.noalias() += dhidden * lora_->down.value;
    }
    return dx;
}

void Linear::attach_lora(int rank, double alpha, Rng& rng) {
    const Index min_dim = std::min(in_features(), out_features());
    if (rank <= 0) throw ConfigError("adapter rank must be positive");
    if (rank >= min_dim) {
        throw ConfigError("adapter rank " + std::to_string(rank) + " must be below min(d_in, d_out) = " +
                          std::to_string(min_dim) + " for " + weight_.name);
    }
    std::string base = weight_.name.substr(0, weight_.name.size() - std::string(".weight").size());
    // uniform(-1/sqrt(in), 1/sqrt(in)), the usual LoRA A initialisation
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix a(rank, in_features());
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = dist(rng);
    LoraAdapter adapter;
    adapter.down = Param(base + ".lora_a", std::move(a));
    adapter.up = Param(base + ".lora_b", Matrix::Zero(out_features(), rank));
    adapter.scale = alpha / rank;
    lora_ = std::move(adapter);
}

void Linear::collect_base(ParamList& out) {
    out.push_back(&weight_);
    if (bias_) out.push_back(&*bias_);
}

void Linear::collect_adapter(ParamList& out) {
    if (!lora_) return;
    out.push_back(&lora_->down);
    out.push_back(&lora_->up);
}

// ---------------------------------------------------------------- norms

LayerNorm::LayerNorm(std::string name, Index dim, double eps)
    : gamma_(name + ".gamma", Matrix::Ones(1, dim)), beta_(name + ".beta", Matrix::Zero(1, dim)), eps_(eps) {}

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
    const Index n = x.rows();
    const auto d = static_cast<double>(x.cols());
    Matrix normalized(n, x.cols());
    Eigen::VectorXd inv_std(n);
    for (Index i = 0; i < n; ++i) {
        const double mean = x.row(i).sum() / d;
        const double var = (x.row(i).array() - mean).square().sum() / d;
        inv_std(i) = 1.0 / std::sqrt(var + eps_);
        normalized.row(i) = (x.row(i).array() - mean) * inv_std(i);
    }
    Matrix y = (normalized.array().rowwise() * gamma_.value.row(0).array()).rowwise() + beta_.value.row(0).array();
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Matrix LayerNorm::backward(const Matrix& dy, const Cache& cache) {
    const Matrix& xhat = cache.normalized;
    if (gamma_.trainable) gamma_.grad_buffer() += (dy.array() * xhat.array()).colwise().sum().matrix();
    if (beta_.trainable) beta_.grad_buffer() += dy.colwise().sum();
    Matrix dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
    const auto d = static_cast<double>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Index i = 0; i < dy.rows(); ++i) {
        const double mean_d = dxhat.row(i).sum() / d;
        const double mean_dx = dxhat.row(i).dot(xhat.row(i)) / d;
        dx.row(i) = (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx) * cache.inv_std(i);
    }
    return dx;
}

void LayerNorm::collect(ParamList& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

RMSNorm::RMSNorm(std::string name, Index dim, double eps) : gain_(name + ".gain", Matrix::Ones(1, dim)), eps_(eps) {}

Matrix RMSNorm::forward(const Matrix& x, Cache* cache) const {
    const Index n = x.rows();
    const auto d = static_cast<double>(x.cols());
    Eigen::VectorXd inv_rms(n);
    Matrix normalized(n, x.cols());
    for (Index i = 0; i < n; ++i) {
        inv_rms(i) = 1.0 / std::sqrt(x.row(i).squaredNorm() / d + eps_);
        normalized.row(i) = x.row(i) * inv_rms(i);
    }
    Matrix y = normalized.array().rowwise() * gain_.value.row(0).array();
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_rms = std::move(inv_rms);
    }
    return y;
}

Matrix RMSNorm::backward(const Matrix& dy, const Cache& cache) {
    const Matrix& xhat = cache.normalized;
    if (gain_.trainable) gain_.grad_buffer() += (dy.array() * xhat.array()).colwise().sum().matrix();
    Matrix dxhat = dy.array().rowwise() * gain_.value.row(0).array();
    const auto d = static_cast<double>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Index i = 0; i < dy.rows(); ++i) {
        const double proj = dxhat.row(i).dot(xhat.row(i)) / d;
        dx.row(i) = (dxhat.row(i) - xhat.row(i) * proj) * cache.inv_rms(i);
    }
    return dx;
}

void RMSNorm::collect(ParamList& out) { out.push_back(&gain_); }

// ---------------------------------------------------------------- embedding

Embedding::Embedding(std::string name, Index vocab, Index dim, double init_std, Rng& rng)
    : table_(name + ".table", random_normal(vocab, dim, init_std, rng)) {}

Matrix Embedding::forward(const std::vector<int>& ids) const {
    Matrix out(static_cast<Index>(ids.size()), dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= vocab_size()) {
            throw RuntimeFailure(table_.name + ": token id " + std::to_string(ids[i]) + " out of range");
        }
        out.row(static_cast<Index>(i)) = table_.value.row(ids[i]);
    }
    return out;
}

void Embedding::backward(const Matrix& dy, const std::vector<int>& ids) {
    if (!table_.trainable) return;
    auto& g = table_.grad_buffer();
    for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += dy.row(static_cast<Index>(i));
}

// ---------------------------------------------------------------- elementwise

namespace {

constexpr double kGeluC = 0.7978845608028654; // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

// tanh(u) written through exp so Eigen can vectorise it
Array tanh_via_exp(const Array& u) { return 1.0 - 2.0 / (1.0 + (2.0 * u).exp()); }

} // namespace

Matrix gelu(const Matrix& x) {
    const Array v = x.array();
    const Array t = tanh_via_exp(kGeluC * (v + kGeluA * v.cube()));
    return (0.5 * v * (1.0 + t)).matrix();
}

Matrix gelu_grad(const Matrix& x) {
    const Array v = x.array();
    const Array t = tanh_via_exp(kGeluC * (v + kGeluA * v.cube()));
    const Array du = kGeluC * (1.0 + 3.0 * kGeluA * v.square());
    return (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t.square()) * du).matrix();
}

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

Matrix silu(const Matrix& x) { return x.cwiseProduct(sigmoid(x)); }

Matrix silu_grad(const Matrix& x) {
    const Array s = sigmoid(x).array();
    return (s * (1.0 + x.array() * (1.0 - s))).matrix();
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - mx).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

double cross_entropy(const Matrix& logits, const std::vector<int>& targets, Matrix* dlogits, double grad_scale) {
    const Index n = logits.rows();
    if (static_cast<std::size_t>(n) != targets.size() || n == 0) {
        throw RuntimeFailure("cross_entropy: logits/targets length mismatch");
    }
    double loss = 0.0;
    if (dlogits) dlogits->resize(n, logits.cols());
    for (Index i = 0; i < n; ++i) {
        const double mx = logits.row(i).maxCoeff();
        const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
        loss += lse - logits(i, targets[static_cast<std::size_t>(i)]);
        if (dlogits) {
            dlogits->row(i) = (logits.row(i).array() - lse).exp();
            (*dlogits)(i, targets[static_cast<std::size_t>(i)]) -= 1.0;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (dlogits) *dlogits *= inv_n * grad_scale;
    return loss * inv_n;
}

} // namespace logllm::nn
