#pragma once

#include "logllm/ingest.hpp"
#include "logllm/types.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace logllm::grouping {

/// An ordered run of (masked) messages with one binary label.
struct LogSequence {
    std::string id;
    std::vector<std::string> messages;
    Label label = Label::normal;
    std::int64_t order_key = 0; // index of the first member record
};

enum class TailPolicy { drop, emit_short };

TailPolicy parse_tail_policy(std::string_view text);
std::string_view to_string(TailPolicy policy);

struct WindowSpec {
    std::int64_t window_size = 100;
    std::int64_t step = 100;
    TailPolicy tail = TailPolicy::drop;

    void validate() const;
};

/// Number of windows produced over `n` records.
std::int64_t window_count(std::int64_t n, const WindowSpec& spec);

/// Anomalous iff any member is anomalous. Throws DataError for unlabeled members.
Label label_window(std::span<const ingest::LogRecord> members);

/// Incremental sliding/fixed window grouping. Records must arrive in index
/// order; completed windows are handed to `emit` as soon as they close.
class WindowGrouper {
public:
    WindowGrouper(WindowSpec spec, std::function<void(LogSequence&&)> emit);

    void push(const ingest::LogRecord& record);
    /// Flushes short tail windows when the policy asks for them.
    void finish();

    std::int64_t records_seen() const { return seen_; }

private:
    struct Member {
        std::int64_t position;
        std::int64_t index;
        std::string content;
        Label label;
    };
    void emit_window(std::int64_t start, std::int64_t length);

    WindowSpec spec_;
    std::function<void(LogSequence&&)> emit_;
    std::deque<Member> buffer_;
    std::int64_t next_start_ = 0;
    std::int64_t seen_ = 0;
    std::int64_t last_index_ = -1;
    bool finished_ = false;
};

std::vector<LogSequence> group_by_window(std::span<const ingest::LogRecord> records, const WindowSpec& spec);

using SessionLabelTable = std::unordered_map<std::string, Label>;

/// Incremental session grouping; sequences come out in order of first appearance.
class SessionGrouper {
public:
    explicit SessionGrouper(const SessionLabelTable& labels);

    void push(const ingest::LogRecord& record);
    std::vector<LogSequence> finish();

private:
    const SessionLabelTable& labels_;
    std::unordered_map<std::string, std::size_t> slot_;
    std::vector<LogSequence> sequences_;
};

std::vector<LogSequence> group_by_session(std::span<const ingest::LogRecord> records,
                                          const SessionLabelTable& labels);

} // namespace logllm::grouping
