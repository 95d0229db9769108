#include "logllm/nn/optimizer.hpp"

#include <cmath>

namespace logllm::nn {

AdamW::AdamW(ParamList params, AdamWOptions options) : params_(std::move(params)), opt_(options) {
    for (Param* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::zero_grad() {
    for (Param* p : params_) p->zero_grad();
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        if (!p.trainable || p.grad.size() != p.value.size()) continue;
        m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * p.grad;
        v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * p.grad.cwiseAbs2();
        p.value *= 1.0 - opt_.lr * opt_.weight_decay;
        p.value.array() -= opt_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opt_.eps);
    }
}

} // namespace logllm::nn
