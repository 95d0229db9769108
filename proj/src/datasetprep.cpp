#include "logllm/datasetprep.hpp"

#include "logllm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace logllm::datasetprep {

SplitMode parse_split_mode(std::string_view text) {
    if (text == "random") return SplitMode::random;
    if (text == "chronological") return SplitMode::chronological;
    throw ConfigError("split mode must be 'random' or 'chronological', got '" + std::string(text) + "'");
}

std::string_view to_string(SplitMode mode) { return mode == SplitMode::random ? "random" : "chronological"; }

std::size_t train_size(std::size_t n, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    // the epsilon absorbs representation error such as 0.8 * 10 = 7.999...
    auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    return std::clamp<std::size_t>(cut, 1, n - 1);
}

Split split(std::vector<LogSequence> sequences, const SplitSpec& spec) {
    const std::size_t n = sequences.size();
    if (n < 2) throw DataError("cannot split fewer than 2 sequences");
    const std::size_t cut = train_size(n, spec.ratio);
    if (spec.mode == SplitMode::random) {
        std::mt19937_64 rng(spec.seed);
        std::shuffle(sequences.begin(), sequences.end(), rng);
    } else {
        std::stable_sort(sequences.begin(), sequences.end(),
                         [](const LogSequence& a, const LogSequence& b) { return a.order_key < b.order_key; });
    }
    Split out;
    out.train.assign(std::make_move_iterator(sequences.begin()),
                     std::make_move_iterator(sequences.begin() + static_cast<std::ptrdiff_t>(cut)));
    out.test.assign(std::make_move_iterator(sequences.begin() + static_cast<std::ptrdiff_t>(cut)),
                    std::make_move_iterator(sequences.end()));
    return out;
}

std::int64_t oversample_target(double alpha, double beta, std::int64_t sample_num) {
    return std::llround(beta * (1.0 - alpha) / (1.0 - beta) * static_cast<double>(sample_num));
}

std::vector<LogSequence> oversample_minority(std::vector<LogSequence> train, double beta, std::uint64_t seed,
                                             OversampleReport* report) {
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
    const auto total = static_cast<std::int64_t>(train.size());
    const auto anomalous = std::count_if(train.begin(), train.end(),
                                         [](const LogSequence& s) { return s.label == Label::anomalous; });
    const auto normal = total - anomalous;

    OversampleReport rep;
    rep.beta = beta;
    rep.sample_num = total;
    rep.minority = anomalous <= normal ? Label::anomalous : Label::normal;
    rep.minority_before = std::min<std::int64_t>(anomalous, normal);
    rep.minority_after = rep.minority_before;
    rep.total_after = total;
    rep.alpha = total == 0 ? 0.0 : static_cast<double>(rep.minority_before) / static_cast<double>(total);

    auto finish = [&](std::vector<LogSequence> v) {
        if (report) *report = rep;
        return v;
    };
    if (beta == 0.0) return finish(std::move(train));
    if (rep.minority_before == 0) {
        throw DataError("oversampling needs both classes in the training set (beta > 0 but only one class present)");
    }
    if (rep.alpha >= beta) return finish(std::move(train));

    const std::int64_t target = oversample_target(rep.alpha, beta, total);
    std::vector<std::size_t> minority_idx;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].label == rep.minority) minority_idx.push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, minority_idx.size() - 1);
    const std::int64_t extra = target - rep.minority_before;
    train.reserve(train.size() + static_cast<std::size_t>(std::max<std::int64_t>(extra, 0)));
    for (std::int64_t k = 0; k < extra; ++k) {
        train.push_back(train[minority_idx[pick(rng)]]);
    }
    std::shuffle(train.begin(), train.end(), rng);

    rep.applied = true;
    rep.minority_after = target;
    rep.total_after = static_cast<std::int64_t>(train.size());
    return finish(std::move(train));
}

} // namespace logllm::datasetprep
