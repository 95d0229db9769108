#include "logllm/preprocess.hpp"

#include "logllm/config.hpp"
#include "logllm/errors.hpp"

#include <array>

namespace logllm::preprocess {

namespace {

// Order matters: block ids and addresses must be consumed before the
// generic number rule splits them apart.
constexpr std::string_view kDefaultRules = R"(# Default parameter-masking rules, applied top to bottom.
mode = re

[rules]
block_id = blk_-?\d+
ipv6 = (?<![\w:])(?:(?:[0-9A-Fa-f]{1,4}:){7}[0-9A-Fa-f]{1,4}|(?:[0-9A-Fa-f]{1,4}:){1,6}:(?:[0-9A-Fa-f]{1,4}(?::[0-9A-Fa-f]{1,4}){0,5})?)(?![\w:])
ipv4 = (?<![\w.])(?:\d{1,3}\.){3}\d{1,3}(?::\d{1,5})?(?!\w|\.\d)
hex_number = (?<!\w)0[xX][0-9A-Fa-f]+(?!\w)
hex_id = (?<!\w)(?=[0-9A-Fa-f]*\d)(?=[0-9A-Fa-f]*[A-Fa-f])[0-9A-Fa-f]{8,}(?!\w)
path = (?<![\w.:<>*/])(?:/[\w.@~+\-]+)+/?
number = (?<!\w)[-+]?\d+(?:\.\d+)?(?!\w)
)";

constexpr std::array<std::string_view, 28> kProbeCorpus = {
    "instruction cache parity error corrected",
    "connection from 10.0.0.1 closed",
    "ciod: failed to read message prefix on control stream (CioStream socket to 172.16.96.116:33569",
    "Receiving block blk_-1608999687919862906 src: /10.250.19.102:54106 dest: /10.250.19.102:50010",
    "PacketResponder 1 for block blk_38865049064139660 terminating",
    "generating core.2275",
    "data TLB error interrupt",
    "total of 12 ddr error(s) detected and corrected",
    "session opened for user root by (uid=0)",
    "Accepted publickey for root from 2001:db8::ff00:42:8329 port 22 ssh2",
    "link fe80::1 is up",
    "address 0x1fc3a2b0 translation miss",
    "object id 3f2a9c8e01bb written",
    "opened /var/log/messages for writing",
    "mount /home/user5/data/ failed",
    "temperature -12.5 degrees, fan 3000 rpm",
    "ratio 5/10 reached at /tmp",
    "node R02-M1-N0-C:J12-U11 reports 1.2.3 firmware",
    "version 12ab and 1.5x",
    "x /5 y",
    "<*> already masked <*>",
    "reply to 192.168.1.10.",
    "time 12:01:01 on 2005.06.03",
    "value=-5 and +7",
    "",
    "nothing to see here",
    "path://weird//things http://example.org/a/b",
    "ef 0x 0X12 0xZZ deadbeef 1234567890abcdef",
};

} // namespace

Mode parse_mode(std::string_view text) {
    if (text == "re") return Mode::re;
    if (text == "raw") return Mode::raw;
    throw ConfigError("preprocess mode must be 're' or 'raw', got '" + std::string(text) + "'");
}

std::string_view to_string(Mode mode) { return mode == Mode::re ? "re" : "raw"; }

std::string MaskingRuleSet::mask(std::string_view content) const {
    std::string text(content);
    if (mode_ == Mode::raw) return text;
    for (std::size_t i = 0; i < compiled_.size(); ++i) {
        text = boost::regex_replace(text, compiled_[i], rules_[i].replacement,
                                    boost::regex_constants::match_default | boost::regex_constants::format_literal);
    }
    return text;
}

MaskingRuleSet compile_rules(std::vector<MaskingRule> rules, Mode mode, std::span<const std::string> extra_probes) {
    MaskingRuleSet set;
    set.mode_ = mode;
    for (const auto& rule : rules) {
        boost::regex re;
        try {
            re = boost::regex(rule.pattern, boost::regex::perl);
        } catch (const boost::regex_error& e) {
            throw ConfigError("masking rule '" + rule.name + "' does not compile: " + e.what());
        }
        const std::string token(kMaskToken);
        if (boost::regex_search(token, re)) {
            throw ConfigError("masking rule '" + rule.name + "' matches the mask token " + token);
        }
        set.compiled_.push_back(std::move(re));
    }
    set.rules_ = std::move(rules);

    auto probe = [&](std::string_view line) {
        auto once = set.mask(line);
        auto twice = set.mask(once);
        if (once != twice) {
            throw ConfigError("masking rules are not idempotent on probe line '" + std::string(line) + "' ('" +
                              once + "' then '" + twice + "')");
        }
    };
    for (auto line : kProbeCorpus) probe(line);
    for (const auto& line : extra_probes) probe(line);
    return set;
}

MaskingRuleSet compile_rules(const std::string& config_text) {
    auto cfg = KeyValueConfig::parse(config_text);
    auto mode = parse_mode(cfg.get_string("mode", "re"));
    std::vector<MaskingRule> rules;
    for (auto& [name, pattern] : cfg.section("rules")) rules.push_back({name, pattern});
    std::vector<std::string> probes;
    for (auto& [key, line] : cfg.section("probes")) probes.push_back(line);
    return compile_rules(std::move(rules), mode, probes);
}

std::string_view default_rules_config() { return kDefaultRules; }

MaskingRuleSet default_rule_set(Mode mode) {
    auto set = compile_rules(std::string(kDefaultRules));
    if (mode == Mode::raw) return compile_rules(set.rules(), Mode::raw);
    return set;
}

std::span<const std::string_view> builtin_probe_corpus() { return kProbeCorpus; }

} // namespace logllm::preprocess
