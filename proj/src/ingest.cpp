#include "logllm/ingest.hpp"

#include "logllm/config.hpp"
#include "logllm/errors.hpp"

#include <json.hpp>

#include <boost/algorithm/string/trim.hpp>

#include <charconv>
#include <fstream>

namespace logllm::ingest {

std::string_view to_string(RejectReason reason) {
    switch (reason) {
    case RejectReason::empty_line: return "empty_line";
    case RejectReason::invalid_utf8: return "invalid_utf8";
    case RejectReason::header_mismatch: return "header_mismatch";
    case RejectReason::empty_content: return "empty_content";
    }
    return "unknown";
}

std::optional<LabelRule> parse_label_rule(std::string_view text) {
    std::string rule(text);
    boost::algorithm::trim(rule);
    if (rule.empty() || rule == "none") return std::nullopt;
    auto eq = rule.find("==");
    if (eq == std::string::npos) {
        throw ConfigError("label_rule must look like '<group> == <token>' or 'none', got '" + rule + "'");
    }
    LabelRule out{rule.substr(0, eq), rule.substr(eq + 2)};
    boost::algorithm::trim(out.group);
    boost::algorithm::trim(out.normal_value);
    if (out.group.empty() || out.normal_value.empty()) {
        throw ConfigError("label_rule has an empty side: '" + rule + "'");
    }
    return out;
}

namespace {

AdapterSpec spec_from_config(const KeyValueConfig& cfg) {
    AdapterSpec spec;
    spec.name = cfg.require_string("name");
    spec.header_pattern = cfg.require_string("header_pattern");
    spec.label_rule = parse_label_rule(cfg.get_string("label_rule", "none"));
    auto session = cfg.get_string("session_key_rule", "");
    if (!session.empty() && session != "none") spec.session_key_rule = session;
    return spec;
}

} // namespace

AdapterSpec load_adapter_spec(const std::filesystem::path& path) {
    try {
        return spec_from_config(KeyValueConfig::load(path));
    } catch (const ConfigError& e) {
        throw ConfigError("adapter " + path.string() + ": " + e.what());
    }
}

AdapterSpec parse_adapter_spec(const std::string& text) {
    return spec_from_config(KeyValueConfig::parse(text));
}

namespace {

int named_group_index(const boost::regex& re, std::string_view name) {
    return re.get_named_subs()->get_id(name.data(), name.data() + name.size());
}

} // namespace

Adapter::Adapter(AdapterSpec spec) : spec_(std::move(spec)) {
    try {
        header_ = boost::regex(spec_.header_pattern, boost::regex::perl);
    } catch (const boost::regex_error& e) {
        throw ConfigError("adapter '" + spec_.name + "': header_pattern does not compile: " + e.what());
    }
    if (named_group_index(header_, "content") < 0) {
        throw ConfigError("adapter '" + spec_.name + "': header_pattern lacks a named capture 'content'");
    }
    if (spec_.label_rule && named_group_index(header_, spec_.label_rule->group) < 0) {
        throw ConfigError("adapter '" + spec_.name + "': label_rule references unknown capture '" +
                          spec_.label_rule->group + "'");
    }
    if (spec_.session_key_rule) {
        try {
            session_key_ = boost::regex(*spec_.session_key_rule, boost::regex::perl);
        } catch (const boost::regex_error& e) {
            throw ConfigError("adapter '" + spec_.name + "': session_key_rule does not compile: " + e.what());
        }
    }
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        auto c = static_cast<unsigned char>(text[i]);
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= n) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong encodings, surrogates, out of range
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000)) return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += extra + 1;
    }
    return true;
}

ParseResult parse_log_line(std::string_view raw, const Adapter& adapter, std::int64_t line_number) {
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    auto reject = [&](RejectReason reason) { return ParseReject{line_number, reason, std::string(raw)}; };

    if (raw.find_first_not_of(" \t") == std::string_view::npos) return reject(RejectReason::empty_line);
    if (!is_valid_utf8(raw)) return reject(RejectReason::invalid_utf8);

    boost::match_results<std::string_view::const_iterator> m;
    if (!boost::regex_match(raw.begin(), raw.end(), m, adapter.header())) {
        return reject(RejectReason::header_mismatch);
    }
    LogRecord rec;
    rec.index = line_number;
    rec.line_number = line_number;
    rec.content = m["content"].str();
    boost::algorithm::trim(rec.content);
    if (rec.content.empty()) return reject(RejectReason::empty_content);

    if (named_group_index(adapter.header(), "timestamp") >= 0 && m["timestamp"].matched) {
        auto ts = m["timestamp"].str();
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), value);
        if (ec == std::errc{} && ptr == ts.data() + ts.size()) rec.timestamp = value;
    }
    if (const auto& rule = adapter.spec().label_rule) {
        const auto& group = m[rule->group];
        rec.message_label = (group.matched && group.str() == rule->normal_value) ? Label::normal : Label::anomalous;
    }
    if (const auto& session = adapter.session_key()) {
        boost::smatch sm;
        if (boost::regex_search(rec.content, sm, *session)) {
            rec.session_key = sm.size() > 1 && sm[1].matched ? sm[1].str() : sm[0].str();
        }
    }
    return rec;
}

std::string IngestReport::to_json_line() const {
    nlohmann::ordered_json j;
    j["total"] = total;
    j["parsed"] = parsed;
    j["rejected"] = rejected;
    return j.dump();
}

std::string reject_to_json_line(const ParseReject& reject) {
    nlohmann::ordered_json j;
    j["line"] = reject.line_number;
    j["reason"] = std::string(to_string(reject.reason));
    // invalid UTF-8 cannot be embedded verbatim in JSON
    j["raw"] = is_valid_utf8(reject.raw) ? reject.raw : std::string("<invalid utf-8>");
    return j.dump();
}

IngestReport for_each_record(const std::filesystem::path& path, const Adapter& adapter,
                             const std::function<void(LogRecord&&)>& on_record,
                             const std::function<void(ParseReject&&)>& on_reject) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read log file " + path.string());
    IngestReport report;
    std::string line;
    while (std::getline(in, line)) {
        auto result = parse_log_line(line, adapter, report.total + 1);
        ++report.total;
        if (auto* rec = std::get_if<LogRecord>(&result)) {
            rec->index = report.parsed++;
            on_record(std::move(*rec));
        } else {
            ++report.rejected;
            if (on_reject) on_reject(std::get<ParseReject>(std::move(result)));
        }
    }
    if (in.bad()) throw DataError("error while reading " + path.string());
    return report;
}

IngestResult load_dataset(const std::filesystem::path& path, const Adapter& adapter) {
    IngestResult out;
    out.report = for_each_record(
        path, adapter, [&](LogRecord&& r) { out.records.push_back(std::move(r)); },
        [&](ParseReject&& r) { out.rejects.push_back(std::move(r)); });
    return out;
}

SelfTestResult self_test(const Adapter& adapter, const std::vector<std::string>& corpus) {
    SelfTestResult result;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        ++result.lines;
        if (std::holds_alternative<LogRecord>(parse_log_line(corpus[i], adapter, static_cast<std::int64_t>(i) + 1))) {
            ++result.matched;
        }
    }
    return result;
}

std::unordered_map<std::string, Label> load_label_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read label table " + path.string());
    std::unordered_map<std::string, Label> table;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected key,label");
        auto key = line.substr(0, comma);
        auto label = parse_label(line.substr(comma + 1));
        if (!label) {
            if (line_no == 1) continue; // header row
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown label '" +
                            line.substr(comma + 1) + "'");
        }
        table[key] = *label;
    }
    return table;
}

} // namespace logllm::ingest
