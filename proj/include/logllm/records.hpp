#pragma once

#include "logllm/grouping.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace logllm {

/// {"id":..,"label":..,"order_key":..,"messages":[..]} - one sequence per line.
std::string sequence_to_json_line(const grouping::LogSequence& seq);
grouping::LogSequence sequence_from_json_line(const std::string& line);

void write_sequences(const std::filesystem::path& path, const std::vector<grouping::LogSequence>& seqs);
std::vector<grouping::LogSequence> read_sequences(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace logllm
