#include "logllm/config.hpp"

#include "logllm/errors.hpp"
#include "logllm/types.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace logllm {

std::optional<Label> parse_label(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "normal" || lower == "0") return Label::normal;
    if (lower == "anomalous" || lower == "anomaly" || lower == "abnormal" || lower == "1") {
        return Label::anomalous;
    }
    return std::nullopt;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse(buffer.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    KeyValueConfig cfg;
    for (const auto& [name, child] : tree) {
        if (child.empty()) {
            cfg.entries_.push_back({"", name, child.data()});
            continue;
        }
        for (const auto& [key, leaf] : child) {
            cfg.entries_.push_back({name, key, leaf.data()});
        }
    }
    return cfg;
}

std::pair<std::string, std::string> KeyValueConfig::split_key(const std::string& key) {
    auto dot = key.find('.');
    if (dot == std::string::npos) return {"", key};
    return {key.substr(0, dot), key.substr(dot + 1)};
}

const KeyValueConfig::Entry* KeyValueConfig::lookup(const std::string& key) const {
    auto [section, name] = split_key(key);
    for (const auto& e : entries_) {
        if (e.section == section && e.key == name) return &e;
    }
    return nullptr;
}

bool KeyValueConfig::contains(const std::string& key) const { return lookup(key) != nullptr; }

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
    if (const auto* e = lookup(key)) return e->value;
    return std::nullopt;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

std::string KeyValueConfig::require_string(const std::string& key) const {
    auto value = find(key);
    if (!value) throw ConfigError("missing required key '" + key + "'");
    return *value;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    auto value = find(key);
    if (!value) return fallback;
    long long out = 0;
    const auto* first = value->data();
    const auto* last = first + value->size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + *value + "'");
    }
    return out;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto value = find(key);
    if (!value) return fallback;
    try {
        std::size_t used = 0;
        double out = std::stod(*value, &used);
        if (used != value->size()) throw std::invalid_argument("trailing characters");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects a number, got '" + *value + "'");
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto value = find(key);
    if (!value) return fallback;
    if (*value == "true" || *value == "1" || *value == "yes" || *value == "on") return true;
    if (*value == "false" || *value == "0" || *value == "no" || *value == "off") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + *value + "'");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    auto [section, name] = split_key(key);
    for (auto& e : entries_) {
        if (e.section == section && e.key == name) {
            e.value = value;
            return;
        }
    }
    entries_.push_back({section, name, value});
}

std::vector<std::pair<std::string, std::string>> KeyValueConfig::section(const std::string& name) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : entries_) {
        if (e.section == name) out.emplace_back(e.key, e.value);
    }
    return out;
}

std::string KeyValueConfig::to_string() const {
    std::ostringstream out;
    std::vector<std::string> sections;
    for (const auto& e : entries_) {
        if (e.section.empty()) {
            out << e.key << " = " << e.value << '\n';
        } else if (std::find(sections.begin(), sections.end(), e.section) == sections.end()) {
            sections.push_back(e.section);
        }
    }
    for (const auto& s : sections) {
        out << '\n' << '[' << s << "]\n";
        for (const auto& e : entries_) {
            if (e.section == s) out << e.key << " = " << e.value << '\n';
        }
    }
    return out.str();
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_string();
}

} // namespace logllm
