#pragma once

#include "logllm/nn/tensor.hpp"

namespace logllm::nn {

struct AdamWOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. Moment buffers live as long as the
/// optimizer, so a fresh instance per training stage resets them.
class AdamW {
public:
    AdamW(ParamList params, AdamWOptions options);

    void zero_grad();
    void step();

    const ParamList& params() const { return params_; }
    std::int64_t steps() const { return t_; }

private:
    ParamList params_;
    AdamWOptions opt_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::int64_t t_ = 0;
};

} // namespace logllm::nn
