#pragma once

#include "logllm/types.hpp"

#include <boost/regex.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace logllm::ingest {

/// One parsed log line. `index` is dense over accepted records (0, 1, 2, ...)
/// while `line_number` is the 1-based line position in the source file.
struct LogRecord {
    std::int64_t index = 0;
    std::int64_t line_number = 0;
    std::optional<std::int64_t> timestamp;
    std::optional<std::string> session_key;
    std::string content;
    std::optional<Label> message_label;
};

enum class RejectReason { empty_line, invalid_utf8, header_mismatch, empty_content };

std::string_view to_string(RejectReason reason);

struct ParseReject {
    std::int64_t line_number = 0;
    RejectReason reason = RejectReason::header_mismatch;
    std::string raw;
};

/// "capture group `group` equals `normal_value` => normal, otherwise anomalous".
struct LabelRule {
    std::string group;
    std::string normal_value;
};

/// Declarative description of one dataset's line format.
///
/// Config keys: `name`, `header_pattern` (must contain a named capture
/// `content`; optional named captures `timestamp` and whatever the label
/// rule references), `label_rule` (`<group> == <token>` or `none`) and
/// `session_key_rule` (regex applied to the content; capture 1 or the whole
/// match becomes the session key).
struct AdapterSpec {
    std::string name;
    std::string header_pattern;
    std::optional<LabelRule> label_rule;
    std::optional<std::string> session_key_rule;
};

AdapterSpec load_adapter_spec(const std::filesystem::path& path);
AdapterSpec parse_adapter_spec(const std::string& text);
std::optional<LabelRule> parse_label_rule(std::string_view text);

/// An AdapterSpec with its patterns compiled.
class Adapter {
public:
    explicit Adapter(AdapterSpec spec);

    const AdapterSpec& spec() const { return spec_; }
    const boost::regex& header() const { return header_; }
    const std::optional<boost::regex>& session_key() const { return session_key_; }

private:
    AdapterSpec spec_;
    boost::regex header_;
    std::optional<boost::regex> session_key_;
};

using ParseResult = std::variant<LogRecord, ParseReject>;

/// Splits one raw line into header and content. `line_number` is stored both
/// as the record index and the line number; for_each_record re-densifies indices.
ParseResult parse_log_line(std::string_view raw, const Adapter& adapter, std::int64_t line_number);

bool is_valid_utf8(std::string_view text);

struct IngestReport {
    std::int64_t total = 0;
    std::int64_t parsed = 0;
    std::int64_t rejected = 0;

    std::string to_json_line() const;
};

/// Streams records in file order. Throws DataError if the file is unreadable.
IngestReport for_each_record(const std::filesystem::path& path, const Adapter& adapter,
                             const std::function<void(LogRecord&&)>& on_record,
                             const std::function<void(ParseReject&&)>& on_reject = {});

struct IngestResult {
    std::vector<LogRecord> records;
    std::vector<ParseReject> rejects;
    IngestReport report;
};

IngestResult load_dataset(const std::filesystem::path& path, const Adapter& adapter);

std::string reject_to_json_line(const ParseReject& reject);

/// Fraction of lines of a corpus whose header the adapter recognises.
struct SelfTestResult {
    std::int64_t lines = 0;
    std::int64_t matched = 0;
    double match_rate() const { return lines == 0 ? 1.0 : static_cast<double>(matched) / lines; }
    bool passes(double threshold = 0.99) const { return match_rate() >= threshold; }
};

SelfTestResult self_test(const Adapter& adapter, const std::vector<std::string>& corpus);

/// Session label table: CSV with a header row and `key,label` columns
/// (HDFS `anomaly_label.csv` layout).
std::unordered_map<std::string, Label> load_label_table(const std::filesystem::path& path);

} // namespace logllm::ingest
