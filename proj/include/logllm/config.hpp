#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace logllm {

/// Flat key/value configuration with optional `[section]` headers.
///
/// Keys are addressed as "section.key" (or plain "key" for top-level
/// entries). Insertion order is preserved so that files round-trip and
/// ordered lists (masking rules) keep their order.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig load(const std::filesystem::path& path);
    static KeyValueConfig parse(const std::string& text);

    bool contains(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value);

    /// Entries of one section in file order; "" selects top-level keys.
    std::vector<std::pair<std::string, std::string>> section(const std::string& name) const;

    std::string to_string() const;
    void save(const std::filesystem::path& path) const;

private:
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
    };
    static std::pair<std::string, std::string> split_key(const std::string& key);
    const Entry* lookup(const std::string& key) const;

    std::vector<Entry> entries_;
};

} // namespace logllm
