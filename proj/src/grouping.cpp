#include "logllm/grouping.hpp"

#include "logllm/errors.hpp"

namespace logllm::grouping {

TailPolicy parse_tail_policy(std::string_view text) {
    if (text == "drop") return TailPolicy::drop;
    if (text == "emit_short") return TailPolicy::emit_short;
    throw ConfigError("tail policy must be 'drop' or 'emit_short', got '" + std::string(text) + "'");
}

std::string_view to_string(TailPolicy policy) { return policy == TailPolicy::drop ? "drop" : "emit_short"; }

void WindowSpec::validate() const {
    if (window_size <= 0) throw ConfigError("window_size must be positive");
    if (step <= 0) throw ConfigError("step must be positive");
}

std::int64_t window_count(std::int64_t n, const WindowSpec& spec) {
    spec.validate();
    if (n <= 0) return 0;
    if (spec.tail == TailPolicy::emit_short) return (n - 1) / spec.step + 1;
    if (n < spec.window_size) return 0;
    return (n - spec.window_size) / spec.step + 1;
}

Label label_window(std::span<const ingest::LogRecord> members) {
    Label label = Label::normal;
    for (const auto& m : members) {
        if (!m.message_label) {
            throw DataError("record " + std::to_string(m.index) + " has no message label; window grouping needs one");
        }
        if (*m.message_label == Label::anomalous) label = Label::anomalous;
    }
    return label;
}

WindowGrouper::WindowGrouper(WindowSpec spec, std::function<void(LogSequence&&)> emit)
    : spec_(spec), emit_(std::move(emit)) {
    spec_.validate();
}

void WindowGrouper::emit_window(std::int64_t start, std::int64_t length) {
    LogSequence seq;
    seq.id = "win-" + std::to_string(start);
    seq.messages.reserve(static_cast<std::size_t>(length));
    bool first = true;
    for (const auto& m : buffer_) {
        if (m.position < start) continue;
        if (m.position >= start + length) break;
        if (first) {
            seq.order_key = m.index;
            first = false;
        }
        seq.messages.push_back(m.content);
        if (m.label == Label::anomalous) seq.label = Label::anomalous;
    }
    emit_(std::move(seq));
}

void WindowGrouper::push(const ingest::LogRecord& record) {
    if (finished_) throw RuntimeFailure("WindowGrouper::push after finish");
    if (record.index <= last_index_) {
        throw DataError("records out of order at index " + std::to_string(record.index));
    }
    if (!record.message_label) {
        throw DataError("record " + std::to_string(record.index) + " has no message label; window grouping needs one");
    }
    last_index_ = record.index;
    const std::int64_t pos = seen_++;
    // records in a gap between windows (step > window_size) are never needed
    if (pos < next_start_) return;
    buffer_.push_back({pos, record.index, record.content, *record.message_label});
    while (pos == next_start_ + spec_.window_size - 1) {
        emit_window(next_start_, spec_.window_size);
        next_start_ += spec_.step;
        while (!buffer_.empty() && buffer_.front().position < next_start_) buffer_.pop_front();
    }
}

void WindowGrouper::finish() {
    if (finished_) return;
    finished_ = true;
    if (spec_.tail == TailPolicy::drop) return;
    while (next_start_ < seen_) {
        emit_window(next_start_, std::min(spec_.window_size, seen_ - next_start_));
        next_start_ += spec_.step;
        while (!buffer_.empty() && buffer_.front().position < next_start_) buffer_.pop_front();
    }
}

std::vector<LogSequence> group_by_window(std::span<const ingest::LogRecord> records, const WindowSpec& spec) {
    std::vector<LogSequence> out;
    out.reserve(static_cast<std::size_t>(window_count(static_cast<std::int64_t>(records.size()), spec)));
    WindowGrouper grouper(spec, [&](LogSequence&& s) { out.push_back(std::move(s)); });
    for (const auto& r : records) grouper.push(r);
    grouper.finish();
    return out;
}

SessionGrouper::SessionGrouper(const SessionLabelTable& labels) : labels_(labels) {}

void SessionGrouper::push(const ingest::LogRecord& record) {
    if (!record.session_key) {
        throw DataError("record " + std::to_string(record.index) + " has no session key");
    }
    if (record.message_label) {
        throw DataError("record " + std::to_string(record.index) +
                        " carries a per-message label; session grouping takes labels from the session table only");
    }
    auto it = slot_.find(*record.session_key);
    if (it == slot_.end()) {
        auto label = labels_.find(*record.session_key);
        if (label == labels_.end()) {
            throw DataError("session key '" + *record.session_key + "' is missing from the label table");
        }
        it = slot_.emplace(*record.session_key, sequences_.size()).first;
        LogSequence seq;
        seq.id = *record.session_key;
        seq.label = label->second;
        seq.order_key = record.index;
        sequences_.push_back(std::move(seq));
    }
    sequences_[it->second].messages.push_back(record.content);
}

std::vector<LogSequence> SessionGrouper::finish() {
    slot_.clear();
    return std::move(sequences_);
}

std::vector<LogSequence> group_by_session(std::span<const ingest::LogRecord> records,
                                          const SessionLabelTable& labels) {
    SessionGrouper grouper(labels);
    for (const auto& r : records) grouper.push(r);
    return grouper.finish();
}

} // namespace logllm::grouping
