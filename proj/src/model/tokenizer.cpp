#include "logllm/model/tokenizer.hpp"

#include "logllm/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace logllm::model {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
            throw ConfigError("duplicate vocabulary token '" + tokens_[i] + "'");
        }
    }
}

std::optional<int> Vocabulary::find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::string Vocabulary::fingerprint() const {
    std::uint64_t hash = 1469598103934665603ULL;
    for (const auto& t : tokens_) {
        for (unsigned char c : t) {
            hash ^= c;
            hash *= 1099511628211ULL;
        }
        hash ^= 0xFF;
        hash *= 1099511628211ULL;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, hash >>= 4) out[static_cast<std::size_t>(i)] = kHex[hash & 0xF];
    return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary " + path.string());
    for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read vocabulary " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return Vocabulary(std::move(tokens));
}

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

} // namespace

std::vector<std::string> pre_tokenize(std::string_view text, bool lowercase) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) out.push_back(std::move(word));
        word.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            flush();
        } else if (text.compare(i, 3, "<*>") == 0) {
            flush();
            out.emplace_back("<*>");
            i += 2;
        } else if (is_word_byte(c)) {
            word.push_back(lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else {
            flush();
            out.emplace_back(1, static_cast<char>(c));
        }
    }
    flush();
    return out;
}

// ---------------------------------------------------------------- WordPiece

WordPieceTokenizer::WordPieceTokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {
    auto need = [&](std::string_view t) {
        auto id = vocab_.find(t);
        if (!id) throw ConfigError("encoder vocabulary lacks special token " + std::string(t));
        return *id;
    };
    unk_ = need(kUnk);
    cls_ = need(kCls);
    sep_ = need(kSep);
    need(kPad);
}

WordPieceTokenizer WordPieceTokenizer::train(std::span<const std::string> corpus, std::size_t max_vocab,
                                             int min_frequency) {
    std::map<std::string, std::int64_t> word_freq;
    for (const auto& line : corpus) {
        for (auto& w : pre_tokenize(line, true)) ++word_freq[w];
    }
    std::vector<std::string> tokens = {std::string(kPad), std::string(kUnk), std::string(kCls), std::string(kSep),
                                       "<*>"};
    std::map<std::string, bool> seen;
    for (const auto& t : tokens) seen[t] = true;
    auto add = [&](const std::string& t) {
        if (!seen[t]) {
            seen[t] = true;
            tokens.push_back(t);
        }
    };
    // single characters first so that every seen word stays representable
    std::map<std::string, bool> chars;
    for (const auto& [w, f] : word_freq) {
        for (std::size_t i = 0; i < w.size(); ++i) chars[std::string(1, w[i])] = true;
    }
    for (const auto& [c, unused] : chars) {
        add(c);
        add("##" + c);
    }
    std::vector<std::pair<std::string, std::int64_t>> ranked(word_freq.begin(), word_freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [w, f] : ranked) {
        if (tokens.size() >= max_vocab) break;
        if (f < min_frequency) break;
        add(w);
    }
    return WordPieceTokenizer(Vocabulary(std::move(tokens)));
}

void WordPieceTokenizer::split_word(const std::string& word, std::vector<int>& out) const {
    if (auto id = vocab_.find(word)) {
        out.push_back(*id);
        return;
    }
    if (word.size() > 100) {
        out.push_back(unk_);
        return;
    }
    std::vector<int> pieces;
    std::size_t start = 0;
    while (start < word.size()) {
        std::size_t end = word.size();
        std::optional<int> found;
        while (end > start) {
            std::string piece = word.substr(start, end - start);
            if (start > 0) piece = "##" + piece;
            if ((found = vocab_.find(piece))) break;
            --end;
        }
        if (!found) {
            out.push_back(unk_);
            return;
        }
        pieces.push_back(*found);
        start = end;
    }
    out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<int> WordPieceTokenizer::encode(std::string_view text, std::size_t max_tokens) const {
    if (max_tokens < 2) throw ConfigError("max_message_tokens must be at least 2");
    std::vector<int> ids{cls_};
    for (const auto& w : pre_tokenize(text, true)) {
        split_word(w, ids);
        if (ids.size() >= max_tokens - 1) break;
    }
    if (ids.size() > max_tokens - 1) ids.resize(max_tokens - 1);
    ids.push_back(sep_);
    return ids;
}

std::vector<std::string> WordPieceTokenizer::pieces(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& w : pre_tokenize(text, true)) split_word(w, ids);
    std::vector<std::string> out;
    for (int id : ids) out.push_back(vocab_.token(id));
    return out;
}

// ---------------------------------------------------------------- word level

WordTokenizer::WordTokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {
    auto need = [&](std::string_view t) {
        auto id = vocab_.find(t);
        if (!id) throw ConfigError("decoder vocabulary lacks special token " + std::string(t));
        return *id;
    };
    unk_ = need(kUnk);
    bos_ = need(kBos);
    eos_ = need(kEos);
}

WordTokenizer WordTokenizer::build(std::span<const std::string> texts) {
    std::vector<std::string> tokens = {std::string(kUnk), std::string(kBos), std::string(kEos)};
    for (const auto& text : texts) {
        for (auto& t : pre_tokenize(text, false)) {
            if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(std::move(t));
        }
    }
    return WordTokenizer(Vocabulary(std::move(tokens)));
}

std::vector<int> WordTokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& t : pre_tokenize(text, false)) ids.push_back(vocab_.find(t).value_or(unk_));
    return ids;
}

std::string WordTokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id == bos_ || id == eos_) continue;
        const std::string& t = vocab_.token(id);
        const bool attach = t.size() == 1 && std::ispunct(static_cast<unsigned char>(t[0])) && t != "<" && t != "(";
        if (!out.empty() && !attach) out.push_back(' ');
        out += t;
    }
    return out;
}

} // namespace logllm::model
