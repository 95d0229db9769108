#pragma once

#include <boost/regex.hpp>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace logllm::preprocess {

inline constexpr std::string_view kMaskToken = "<*>";

enum class Mode { re, raw };

Mode parse_mode(std::string_view text);
std::string_view to_string(Mode mode);

struct MaskingRule {
    std::string name;
    std::string pattern;
    std::string replacement = std::string(kMaskToken);
};

/// Ordered, compiled masking rules. Construct through compile_rules().
class MaskingRuleSet {
public:
    Mode mode() const { return mode_; }
    const std::vector<MaskingRule>& rules() const { return rules_; }

    /// Applies every rule in order, replacing all non-overlapping matches.
    /// Raw mode returns the input unchanged.
    std::string mask(std::string_view content) const;

private:
    friend MaskingRuleSet compile_rules(std::vector<MaskingRule>, Mode, std::span<const std::string>);

    Mode mode_ = Mode::re;
    std::vector<MaskingRule> rules_;
    std::vector<boost::regex> compiled_;
};

/// Compiles rules, rejecting patterns that fail to compile or that match the
/// mask token, then checks mask(mask(x)) == mask(x) over the built-in probe
/// corpus plus `extra_probes`.
MaskingRuleSet compile_rules(std::vector<MaskingRule> rules, Mode mode,
                             std::span<const std::string> extra_probes = {});

/// Parses rule-set config text:
///
///     mode = re
///     [rules]
///     ipv4 = (?<![\w.])(?:\d{1,3}\.){3}\d{1,3}
///     number = ...
///
/// Rules keep file order. `[probes]` entries (any key) extend the probe corpus.
MaskingRuleSet compile_rules(const std::string& config_text);

/// Text of the shipped default rule set (also installed as configs/masking/default.ini).
std::string_view default_rules_config();

MaskingRuleSet default_rule_set(Mode mode = Mode::re);

std::span<const std::string_view> builtin_probe_corpus();

} // namespace logllm::preprocess
