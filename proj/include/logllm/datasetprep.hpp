#pragma once

#include "logllm/grouping.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace logllm::datasetprep {

using grouping::LogSequence;

enum class SplitMode { random, chronological };

SplitMode parse_split_mode(std::string_view text);
std::string_view to_string(SplitMode mode);

struct SplitSpec {
    double ratio = 0.8;
    SplitMode mode = SplitMode::random;
    std::uint64_t seed = 42;
};

struct Split {
    std::vector<LogSequence> train;
    std::vector<LogSequence> test;
};

/// floor(ratio * n), kept inside [1, n-1].
std::size_t train_size(std::size_t n, double ratio);

/// Random mode shuffles with the seed then cuts; chronological mode sorts by
/// order_key (stable) then cuts, so every train sequence precedes every test one.
Split split(std::vector<LogSequence> sequences, const SplitSpec& spec);

struct OversampleReport {
    double alpha = 0.0; // minority fraction before
    double beta = 0.0;  // requested minority fraction
    std::int64_t sample_num = 0;
    std::int64_t minority_before = 0;
    std::int64_t minority_after = 0;
    std::int64_t total_after = 0;
    Label minority = Label::anomalous;
    bool applied = false;
};

/// Minority count required to reach fraction beta: beta*(1-alpha)/(1-beta) * sample_num, rounded.
std::int64_t oversample_target(double alpha, double beta, std::int64_t sample_num);

/// Duplicates uniformly drawn minority sequences (with replacement) until the
/// minority reaches oversample_target(), then shuffles. No-op when beta == 0
/// or the minority already makes up at least beta.
std::vector<LogSequence> oversample_minority(std::vector<LogSequence> train, double beta, std::uint64_t seed,
                                             OversampleReport* report = nullptr);

} // namespace logllm::datasetprep
