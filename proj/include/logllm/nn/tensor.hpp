#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace logllm::nn {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Rng = std::mt19937_64;

/// A named weight tensor with its gradient accumulator.
///
/// Gradients are only accumulated while `trainable` is set; frozen
/// parameters never allocate or touch `grad`.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = false;

    Param() = default;
    Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {}

    void zero_grad() {
        if (trainable) grad.setZero(value.rows(), value.cols());
    }
    Matrix& grad_buffer() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad.setZero(value.rows(), value.cols());
        return grad;
    }
    Index size() const { return value.size(); }
};

using ParamList = std::vector<Param*>;

/// One member of a row-stacked ragged batch: rows [offset, offset + length).
struct Segment {
    Index offset = 0;
    Index length = 0;
};

Matrix random_normal(Index rows, Index cols, double stddev, Rng& rng);

/// 64-bit FNV-1a over the raw bytes of every value in order.
std::uint64_t checksum(const ParamList& params);

double grad_norm(const ParamList& params);

} // namespace logllm::nn
