#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace logllm {

enum class Label { normal, anomalous };

inline std::string_view to_string(Label label) {
    return label == Label::anomalous ? "anomalous" : "normal";
}

// Accepts the canonical spellings plus the common dataset variants
// ("Anomaly", "Normal", "1", "0").
std::optional<Label> parse_label(std::string_view text);

} // namespace logllm
