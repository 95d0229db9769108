#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace logllm::toy {

/// Synthetic BGL-format log whose anomalies are windows that contain
/// messages from a separate "failure" template family.
struct ToyCorpusSpec {
    std::int64_t windows = 20000;
    std::int64_t window_size = 20;
    double anomaly_rate = 0.05;
    int min_failures = 1; // failure messages per anomalous window
    int max_failures = 3;
    std::uint64_t seed = 7;
};

struct ToyCorpusStats {
    std::int64_t lines = 0;
    std::int64_t anomalous_windows = 0;
    std::int64_t failure_lines = 0;
};

/// Writes windows * window_size lines; exactly round(windows * anomaly_rate)
/// windows are anomalous.
ToyCorpusStats generate_toy_corpus(const ToyCorpusSpec& spec, std::ostream& out);
ToyCorpusStats generate_toy_corpus(const ToyCorpusSpec& spec, const std::filesystem::path& path);

const std::vector<std::string>& normal_templates();
const std::vector<std::string>& failure_templates();

} // namespace logllm::toy
