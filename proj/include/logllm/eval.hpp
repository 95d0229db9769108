#pragma once

#include "logllm/grouping.hpp"
#include "logllm/model/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace logllm::eval {

/// 2x2 table with anomalous as the positive class.
struct Confusion {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    bool operator==(const Confusion&) const = default;
};

/// Undefined metrics (zero denominators) are empty optionals.
struct MetricsReport {
    Confusion confusion;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::int64_t undecided = 0;
    double runtime_seconds = 0.0;
};

Confusion confusion(std::span<const Label> predictions, std::span<const Label> labels);
MetricsReport metrics(const Confusion& c);

/// Metrics straight from precision and recall (for checking published figures).
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

/// Undecided verdicts count as normal.
Label verdict_to_label(model::VerdictLabel verdict);

struct Evaluation {
    MetricsReport report;
    std::vector<model::Verdict> verdicts;
};

/// Classifies every test sequence and scores the verdicts.
Evaluation evaluate(const model::Model& model, const std::vector<grouping::LogSequence>& test,
                    std::size_t batch_size = 16);

/// "NA" for undefined values, otherwise fixed with `decimals` places.
std::string format_metric(const std::optional<double>& value, int decimals = 3);

/// precision,recall,f1,tp,fp,fn,tn,undecided,runtime_seconds
inline constexpr const char* kReportHeader = "precision,recall,f1,tp,fp,fn,tn,undecided,runtime_seconds";
std::string report_csv(const MetricsReport& report);
/// One JSON object at full precision; undefined metrics are null.
std::string report_json_line(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

struct SweepRow {
    double beta = 0.0;
    MetricsReport report;
    double train_seconds = 0.0;
    std::size_t train_sequences = 0;
};

inline constexpr const char* kSweepHeader = "beta,precision,recall,f1,train_seconds,train_sequences";
std::string sweep_csv(std::span<const SweepRow> rows);

} // namespace logllm::eval
