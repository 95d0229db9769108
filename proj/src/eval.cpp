#include "logllm/eval.hpp"

#include "logllm/errors.hpp"
#include "logllm/records.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace logllm::eval {

Confusion confusion(std::span<const Label> predictions, std::span<const Label> labels) {
    if (predictions.size() != labels.size()) {
        throw DataError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw DataError("confusion: no predictions to score");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = predictions[i] == Label::anomalous;
        const bool truth = labels[i] == Label::anomalous;
        if (pred && truth) ++c.tp;
        else if (pred) ++c.fp;
        else if (truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall) {
    if (!precision || !recall) return std::nullopt;
    const double denom = *precision + *recall;
    if (denom <= 0.0) return std::nullopt;
    return 2.0 * *precision * *recall / denom;
}

MetricsReport metrics(const Confusion& c) {
    MetricsReport r;
    r.confusion = c;
    if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.f1 = f1_score(r.precision, r.recall);
    return r;
}

Label verdict_to_label(model::VerdictLabel verdict) {
    return verdict == model::VerdictLabel::anomalous ? Label::anomalous : Label::normal;
}

Evaluation evaluate(const model::Model& model, const std::vector<grouping::LogSequence>& test,
                    std::size_t batch_size) {
    if (test.empty()) throw DataError("evaluate: empty test set");
    if (batch_size == 0) batch_size = 1;
    const auto start = std::chrono::steady_clock::now();

    model::MessageTable table;
    std::vector<model::EncodedSequence> encoded(test.size());
    std::size_t truncated = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (model.encode_sequence(test[i], table, encoded[i])) ++truncated;
    }
    if (truncated > 0) {
        spdlog::warn("{} test sequences exceed the decoder budget and keep only their last {} messages", truncated,
                     model.message_budget());
    }

    Evaluation out;
    out.verdicts.reserve(test.size());
    std::vector<Label> predictions, labels;
    std::vector<const model::EncodedSequence*> batch;
    for (std::size_t begin = 0; begin < encoded.size(); begin += batch_size) {
        batch.clear();
        for (std::size_t i = begin; i < std::min(encoded.size(), begin + batch_size); ++i) batch.push_back(&encoded[i]);
        for (auto& v : model.classify_batch(batch, table)) out.verdicts.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (out.verdicts[i].label == model::VerdictLabel::undecided) ++out.report.undecided;
        predictions.push_back(verdict_to_label(out.verdicts[i].label));
        labels.push_back(test[i].label);
    }
    const std::int64_t undecided = out.report.undecided;
    out.report = metrics(confusion(predictions, labels));
    out.report.undecided = undecided;
    out.report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::string format_metric(const std::optional<double>& value, int decimals) {
    if (!value) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, *value);
    return buf;
}

std::string report_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << kReportHeader << '\n'
       << format_metric(r.precision) << ',' << format_metric(r.recall) << ',' << format_metric(r.f1) << ','
       << r.confusion.tp << ',' << r.confusion.fp << ',' << r.confusion.fn << ',' << r.confusion.tn << ','
       << r.undecided << ',' << format_metric(r.runtime_seconds) << '\n';
    return os.str();
}

std::string report_json_line(const MetricsReport& r) {
    nlohmann::ordered_json j;
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    j["precision"] = opt(r.precision);
    j["recall"] = opt(r.recall);
    j["f1"] = opt(r.f1);
    j["tp"] = r.confusion.tp;
    j["fp"] = r.confusion.fp;
    j["fn"] = r.confusion.fn;
    j["tn"] = r.confusion.tn;
    j["undecided"] = r.undecided;
    j["runtime_seconds"] = r.runtime_seconds;
    return j.dump();
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "metrics.csv", report_csv(report));
    write_text_file(dir / "metrics.jsonl", report_json_line(report) + "\n");
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream os;
    os << kSweepHeader << '\n';
    for (const auto& row : rows) {
        std::ostringstream beta;
        beta << row.beta;
        os << beta.str() << ',' << format_metric(row.report.precision) << ',' << format_metric(row.report.recall)
           << ',' << format_metric(row.report.f1) << ',' << format_metric(row.train_seconds) << ','
           << row.train_sequences << '\n';
    }
    return os.str();
}

} // namespace logllm::eval
