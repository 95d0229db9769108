#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace logllm::model {

class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    std::optional<int> find(std::string_view token) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// Stable identifier: FNV-1a over the token list, as 16 hex digits.
    std::string fingerprint() const;

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

/// Splits on whitespace; runs of letters/digits/underscore/non-ASCII bytes
/// form words, every other character is its own token, and the mask token
/// "<*>" is kept whole.
std::vector<std::string> pre_tokenize(std::string_view text, bool lowercase);

/// Uncased WordPiece tokenizer for log messages ([CLS] ... [SEP]).
class WordPieceTokenizer {
public:
    static constexpr std::string_view kPad = "[PAD]";
    static constexpr std::string_view kUnk = "[UNK]";
    static constexpr std::string_view kCls = "[CLS]";
    static constexpr std::string_view kSep = "[SEP]";

    WordPieceTokenizer() = default;
    explicit WordPieceTokenizer(Vocabulary vocab);

    /// Vocabulary = special tokens, the mask token, every character seen (as
    /// "c" and "##c"), then whole words by descending frequency.
    static WordPieceTokenizer train(std::span<const std::string> corpus, std::size_t max_vocab, int min_frequency);

    /// [CLS] pieces [SEP], truncated to at most max_tokens ids.
    std::vector<int> encode(std::string_view text, std::size_t max_tokens) const;
    std::vector<std::string> pieces(std::string_view text) const;

    const Vocabulary& vocab() const { return vocab_; }
    int cls_id() const { return cls_; }

private:
    void split_word(const std::string& word, std::vector<int>& out) const;

    Vocabulary vocab_;
    int unk_ = 0;
    int cls_ = 0;
    int sep_ = 0;
};

/// Case-preserving word-level tokenizer for the decoder prompt and answers.
class WordTokenizer {
public:
    static constexpr std::string_view kUnk = "<unk>";
    static constexpr std::string_view kBos = "<bos>";
    static constexpr std::string_view kEos = "<eos>";

    WordTokenizer() = default;
    explicit WordTokenizer(Vocabulary vocab);

    static WordTokenizer build(std::span<const std::string> texts);

    std::vector<int> encode(std::string_view text) const;
    /// Joins tokens with spaces, attaching punctuation to the preceding word.
    std::string decode(std::span<const int> ids) const;

    const Vocabulary& vocab() const { return vocab_; }
    int bos_id() const { return bos_; }
    int eos_id() const { return eos_; }
    int unk_id() const { return unk_; }

private:
    Vocabulary vocab_;
    int unk_ = 0;
    int bos_ = 1;
    int eos_ = 2;
};

} // namespace logllm::model
