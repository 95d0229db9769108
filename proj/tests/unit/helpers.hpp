#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace test_support {

inline std::filesystem::path source_dir() { return LOGLLM_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "tests" / "data"; }
inline std::filesystem::path config_dir() { return source_dir() / "configs"; }

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    static std::random_device rd;
    auto dir = std::filesystem::temp_directory_path() /
               ("logllm_test_" + name + "_" + std::to_string(rd()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

inline void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    for (const auto& line : lines) out << line << '\n';
}

} // namespace test_support

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>

namespace test_support {

// Largest element-wise relative difference between an analytic gradient and
// central differences of `loss` with respect to every entry of `value`.
// Entries where both magnitudes are below `zero` are below the resolution of
// the finite differences and count as agreeing.
template <class MatrixT>
double max_relative_error(MatrixT& value, const MatrixT& analytic, const std::function<double()>& loss,
                          double h = 1e-5, double zero = 1e-8) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
        const double saved = value.data()[i];
        value.data()[i] = saved + h;
        const double up = loss();
        value.data()[i] = saved - h;
        const double down = loss();
        value.data()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.data()[i];
        const double scale = std::max(std::abs(a), std::abs(numeric));
        if (scale < zero) continue;
        worst = std::max(worst, std::abs(a - numeric) / scale);
    }
    return worst;
}

} // namespace test_support
