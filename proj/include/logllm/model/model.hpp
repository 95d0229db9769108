#pragma once

#include "logllm/grouping.hpp"
#include "logllm/model/decoder.hpp"
#include "logllm/model/encoder.hpp"
#include "logllm/model/tokenizer.hpp"
#include "logllm/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace logllm::model {

inline constexpr std::string_view kPromptPrefix = "Below is a sequence of system log messages:";
inline constexpr std::string_view kPromptSuffix = ". Is this sequence normal or anomalous?";
inline constexpr std::string_view kAnswerAnomalous = "The sequence is anomalous.";
inline constexpr std::string_view kAnswerNormal = "The sequence is normal.";

enum class Backbone { tiny, pretrained };

Backbone parse_backbone(std::string_view text);
std::string_view to_string(Backbone backbone);

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;
    Backbone backbone = Backbone::tiny;
    std::string pretrained_dir;        // base weights + vocabularies when backbone = pretrained
    Index max_messages = 1024;         // hard cap on N for encode_messages
    int max_answer_tokens = 8;
    std::size_t encoder_vocab_limit = 4000;
    int encoder_min_frequency = 1;
    std::uint64_t init_seed = 42;
};

/// [E1 || E || E3] with its segment lengths.
struct PromptAssembly {
    Matrix matrix;
    Index prefix_tokens = 0;  // A
    Index messages = 0;       // N
    Index suffix_tokens = 0;  // Q
};

enum class VerdictLabel { normal, anomalous, undecided };
std::string_view to_string(VerdictLabel label);

struct Verdict {
    VerdictLabel label = VerdictLabel::undecided;
    std::string raw_text;
};

/// Case-insensitive: "anomalous" wins, then "normal", otherwise undecided.
Verdict parse_verdict(std::string raw_text);

/// Interned message texts with their encoder token ids.
class MessageTable {
public:
    int intern(const std::string& text, const WordPieceTokenizer& tokenizer, std::size_t max_tokens);
    std::size_t size() const { return text_.size(); }
    const std::string& text(int id) const { return text_[static_cast<std::size_t>(id)]; }
    const std::vector<int>& tokens(int id) const { return tokens_[static_cast<std::size_t>(id)]; }

private:
    std::vector<std::string> text_;
    std::vector<std::vector<int>> tokens_;
    std::unordered_map<std::string, int> index_;
};

struct EncodedSequence {
    std::vector<int> messages; // ids into a MessageTable
    Label label = Label::normal;
};

enum class ParamGroup { encoder_base, encoder_adapters, projector, decoder_base, decoder_adapters };
std::string_view to_string(ParamGroup group);
inline constexpr ParamGroup kAllGroups[] = {ParamGroup::encoder_base, ParamGroup::encoder_adapters,
                                            ParamGroup::projector, ParamGroup::decoder_base,
                                            ParamGroup::decoder_adapters};

/// Message encoder, linear projector and prompt-driven decoder classifier.
class Model {
public:
    Model(const ModelConfig& config, WordPieceTokenizer encoder_tokenizer, WordTokenizer decoder_tokenizer);

    /// Decoder vocabulary covering the prompt and both answers.
    static WordTokenizer default_decoder_tokenizer();

    // --- single-sequence operations
    Matrix encode_messages(std::span<const std::string> messages) const;
    Matrix project(const Matrix& semantic) const;
    PromptAssembly assemble_prompt(const Matrix& embedded) const;
    Verdict classify(const PromptAssembly& assembly) const;
    double answer_loss(const PromptAssembly& assembly, Label label) const;

    // --- batched training / inference over interned messages
    /// Mean answer loss over the batch; accumulates gradients of trainable parameters.
    double forward_backward(std::span<const EncodedSequence* const> batch, const MessageTable& table);
    double batch_loss(std::span<const EncodedSequence* const> batch, const MessageTable& table) const;
    std::vector<Verdict> classify_batch(std::span<const EncodedSequence* const> batch, const MessageTable& table) const;

    /// Interns a sequence's messages; sequences longer than the decoder
    /// budget keep only their most recent messages (returns true if truncated).
    bool encode_sequence(const grouping::LogSequence& seq, MessageTable& table, EncodedSequence& out) const;
    Index message_budget() const;

    void attach_adapters(int rank, double alpha);
    bool has_adapters() const { return adapter_rank_ > 0; }
    int adapter_rank() const { return adapter_rank_; }
    double adapter_alpha() const { return adapter_alpha_; }

    nn::ParamList params(ParamGroup group);
    nn::ParamList all_params();
    void set_trainable(std::span<const ParamGroup> groups);
    void zero_grad();

    Index prefix_tokens() const { return static_cast<Index>(prefix_ids_.size()); }
    Index suffix_tokens() const { return static_cast<Index>(suffix_ids_.size()); }
    const std::vector<int>& answer_ids(Label label) const;

    const ModelConfig& config() const { return config_; }
    const WordPieceTokenizer& encoder_tokenizer() const { return enc_tok_; }
    const WordTokenizer& decoder_tokenizer() const { return dec_tok_; }
    MessageEncoder& encoder() { return encoder_; }
    Decoder& decoder() { return decoder_; }
    nn::Linear& projector() { return projector_; }

private:
    double run_batch(std::span<const EncodedSequence* const> batch, const MessageTable& table, bool backward);
    Verdict generate(const Matrix& prompt_rows) const;

    ModelConfig config_;
    WordPieceTokenizer enc_tok_;
    WordTokenizer dec_tok_;
    MessageEncoder encoder_;
    nn::Linear projector_;
    Decoder decoder_;
    std::vector<int> prefix_ids_;
    std::vector<int> suffix_ids_;
    std::vector<int> answer_normal_;
    std::vector<int> answer_anomalous_;
    int adapter_rank_ = 0;
    double adapter_alpha_ = 0.0;
};

} // namespace logllm::model
