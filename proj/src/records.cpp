#include "logllm/records.hpp"

#include "logllm/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace logllm {

std::string sequence_to_json_line(const grouping::LogSequence& seq) {
    nlohmann::ordered_json j;
    j["id"] = seq.id;
    j["label"] = std::string(to_string(seq.label));
    j["order_key"] = seq.order_key;
    j["messages"] = seq.messages;
    return j.dump();
}

grouping::LogSequence sequence_from_json_line(const std::string& line) {
    grouping::LogSequence seq;
    try {
        auto j = nlohmann::json::parse(line);
        seq.id = j.at("id").get<std::string>();
        auto label = parse_label(j.at("label").get<std::string>());
        if (!label) throw DataError("unknown label in sequence '" + seq.id + "'");
        seq.label = *label;
        seq.order_key = j.value("order_key", std::int64_t{0});
        seq.messages = j.at("messages").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed sequence record: ") + e.what());
    }
    if (seq.messages.empty()) throw DataError("sequence '" + seq.id + "' has no messages");
    return seq;
}

void write_sequences(const std::filesystem::path& path, const std::vector<grouping::LogSequence>& seqs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& s : seqs) out << sequence_to_json_line(s) << '\n';
}

std::vector<grouping::LogSequence> read_sequences(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read sequence file " + path.string());
    std::vector<grouping::LogSequence> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(sequence_from_json_line(line));
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace logllm
