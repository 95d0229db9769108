#include "logllm/model/model.hpp"

#include "logllm/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace logllm::model {

Backbone parse_backbone(std::string_view text) {
    if (text == "tiny") return Backbone::tiny;
    if (text == "pretrained") return Backbone::pretrained;
    throw ConfigError("unknown backbone '" + std::string(text) + "' (expected tiny or pretrained)");
}

std::string_view to_string(Backbone backbone) {
    return backbone == Backbone::tiny ? "tiny" : "pretrained";
}

std::string_view to_string(VerdictLabel label) {
    switch (label) {
    case VerdictLabel::normal: return "normal";
    case VerdictLabel::anomalous: return "anomalous";
    case VerdictLabel::undecided: return "undecided";
    }
    return "undecided";
}

std::string_view to_string(ParamGroup group) {
    switch (group) {
    case ParamGroup::encoder_base: return "encoder_base";
    case ParamGroup::encoder_adapters: return "encoder_adapters";
    case ParamGroup::projector: return "projector";
    case ParamGroup::decoder_base: return "decoder_base";
    case ParamGroup::decoder_adapters: return "decoder_adapters";
    }
    return "unknown";
}

Verdict parse_verdict(std::string raw_text) {
    std::string lower = raw_text;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    Verdict v;
    v.raw_text = std::move(raw_text);
    if (lower.find("anomalous") != std::string::npos) {
        v.label = VerdictLabel::anomalous;
    } else if (lower.find("normal") != std::string::npos) {
        v.label = VerdictLabel::normal;
    }
    return v;
}

int MessageTable::intern(const std::string& text, const WordPieceTokenizer& tokenizer, std::size_t max_tokens) {
    auto it = index_.find(text);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(text_.size());
    text_.push_back(text);
    tokens_.push_back(tokenizer.encode(text, max_tokens));
    index_.emplace(text, id);
    return id;
}

namespace {

DecoderConfig with_vocab(DecoderConfig cfg, Index vocab) {
    cfg.vocab_size = vocab;
    return cfg;
}

EncoderConfig with_vocab(EncoderConfig cfg, Index vocab) {
    cfg.vocab_size = vocab;
    return cfg;
}

nn::Rng seeded(std::uint64_t seed, std::uint64_t salt) {
    return nn::Rng(seed * 0x9E3779B97F4A7C15ULL + salt);
}

bool any_trainable(const nn::ParamList& params) {
    return std::any_of(params.begin(), params.end(), [](const nn::Param* p) { return p->trainable; });
}

} // namespace

WordTokenizer Model::default_decoder_tokenizer() {
    std::vector<std::string> texts{std::string(kPromptPrefix), std::string(kPromptSuffix),
                                   std::string(kAnswerAnomalous), std::string(kAnswerNormal)};
    return WordTokenizer::build(texts);
}

Model::Model(const ModelConfig& config, WordPieceTokenizer encoder_tokenizer, WordTokenizer decoder_tokenizer)
    : config_(config), enc_tok_(std::move(encoder_tokenizer)), dec_tok_(std::move(decoder_tokenizer)) {
    if (config_.max_messages <= 0) throw ConfigError("max_messages must be positive");
    if (config_.max_answer_tokens <= 0) throw ConfigError("max_answer_tokens must be positive");
    config_.encoder.vocab_size = enc_tok_.vocab().size();
    config_.decoder.vocab_size = dec_tok_.vocab().size();
    if (config_.encoder.vocab_size == 0 || config_.decoder.vocab_size == 0) {
        throw ConfigError("model tokenizers must have a non-empty vocabulary");
    }

    nn::Rng enc_rng = seeded(config_.init_seed, 1);
    nn::Rng proj_rng = seeded(config_.init_seed, 2);
    nn::Rng dec_rng = seeded(config_.init_seed, 3);
    encoder_ = MessageEncoder(with_vocab(config_.encoder, config_.encoder.vocab_size), enc_rng);
    const Index d_enc = config_.encoder.d_model;
    const Index d_dec = config_.decoder.d_model;
    projector_ = nn::Linear("projector", d_enc, d_dec, true, 1.0 / std::sqrt(static_cast<double>(d_enc)), proj_rng);
    projector_.bias()->value.setZero();
    decoder_ = Decoder(with_vocab(config_.decoder, config_.decoder.vocab_size), dec_rng);

    prefix_ids_.push_back(dec_tok_.bos_id());
    for (int id : dec_tok_.encode(kPromptPrefix)) prefix_ids_.push_back(id);
    suffix_ids_ = dec_tok_.encode(kPromptSuffix);
    answer_normal_ = dec_tok_.encode(kAnswerNormal);
    answer_normal_.push_back(dec_tok_.eos_id());
    answer_anomalous_ = dec_tok_.encode(kAnswerAnomalous);
    answer_anomalous_.push_back(dec_tok_.eos_id());

    const int unk = dec_tok_.unk_id();
    for (const auto* ids : {&prefix_ids_, &suffix_ids_, &answer_normal_, &answer_anomalous_}) {
        if (std::find(ids->begin(), ids->end(), unk) != ids->end()) {
            throw ConfigError("decoder vocabulary does not cover the prompt template");
        }
    }
    if (message_budget() < 1) {
        throw ConfigError("decoder max_positions leaves no room for messages in the prompt");
    }
    set_trainable({});
}

const std::vector<int>& Model::answer_ids(Label label) const {
    return label == Label::anomalous ? answer_anomalous_ : answer_normal_;
}

Index Model::message_budget() const {
    return config_.decoder.max_positions - prefix_tokens() - suffix_tokens() - config_.max_answer_tokens;
}

Matrix Model::encode_messages(std::span<const std::string> messages) const {
    if (messages.empty()) throw DataError("cannot encode an empty message sequence");
    if (static_cast<Index>(messages.size()) > config_.max_messages) {
        throw DataError("sequence has " + std::to_string(messages.size()) + " messages; the limit is " +
                        std::to_string(config_.max_messages));
    }
    std::vector<std::vector<int>> ids;
    ids.reserve(messages.size());
    for (const auto& m : messages) {
        ids.push_back(enc_tok_.encode(m, static_cast<std::size_t>(config_.encoder.max_message_tokens)));
    }
    std::vector<const std::vector<int>*> ptrs;
    for (const auto& v : ids) ptrs.push_back(&v);
    return encoder_.forward(ptrs);
}

Matrix Model::project(const Matrix& semantic) const {
    if (semantic.cols() != config_.encoder.d_model) {
        throw DataError("semantic matrix has width " + std::to_string(semantic.cols()) + ", expected " +
                        std::to_string(config_.encoder.d_model));
    }
    return projector_.forward(semantic);
}

PromptAssembly Model::assemble_prompt(const Matrix& embedded) const {
    const Index d = config_.decoder.d_model;
    if (embedded.cols() != d) {
        throw DataError("embedded messages have width " + std::to_string(embedded.cols()) + ", expected " +
                        std::to_string(d));
    }
    PromptAssembly out;
    out.prefix_tokens = prefix_tokens();
    out.messages = embedded.rows();
    out.suffix_tokens = suffix_tokens();
    const Index total = out.prefix_tokens + out.messages + out.suffix_tokens;
    if (total > config_.decoder.max_positions) {
        throw RuntimeFailure("prompt of " + std::to_string(total) + " rows exceeds the decoder budget of " +
                             std::to_string(config_.decoder.max_positions) + " positions");
    }
    out.matrix.resize(total, d);
    out.matrix.topRows(out.prefix_tokens) = decoder_.embed(prefix_ids_);
    out.matrix.middleRows(out.prefix_tokens, out.messages) = embedded;
    out.matrix.bottomRows(out.suffix_tokens) = decoder_.embed(suffix_ids_);
    return out;
}

Verdict Model::generate(const Matrix& prompt_rows) const {
    Decoder::State state;
    Matrix hidden = decoder_.extend(prompt_rows, state, 1);
    std::vector<int> produced;
    const Index room = config_.decoder.max_positions - prompt_rows.rows();
    const Index limit = std::min<Index>(config_.max_answer_tokens, room);
    for (Index step = 0; step < limit; ++step) {
        Matrix logits = decoder_.logits(hidden.bottomRows(1));
        Index best = 0;
        logits.row(0).maxCoeff(&best);
        const int token = static_cast<int>(best);
        if (token == dec_tok_.eos_id()) break;
        produced.push_back(token);
        if (step + 1 == limit) break;
        hidden = decoder_.extend(decoder_.embed({token}), state);
    }
    return parse_verdict(dec_tok_.decode(produced));
}

Verdict Model::classify(const PromptAssembly& assembly) const {
    return generate(assembly.matrix);
}

double Model::answer_loss(const PromptAssembly& assembly, Label label) const {
    const auto& answer = answer_ids(label);
    const Index t = static_cast<Index>(answer.size());
    const Index base = assembly.matrix.rows();
    Matrix x(base + t - 1, config_.decoder.d_model);
    x.topRows(base) = assembly.matrix;
    if (t > 1) {
        std::vector<int> fed(answer.begin(), answer.end() - 1);
        x.bottomRows(t - 1) = decoder_.embed(fed);
    }
    nn::Segment seg{0, x.rows()};
    Matrix hidden = decoder_.forward(x, std::span<const nn::Segment>(&seg, 1));
    Matrix logits = decoder_.logits(hidden.bottomRows(t));
    return nn::cross_entropy(logits, answer);
}

double Model::forward_backward(std::span<const EncodedSequence* const> batch, const MessageTable& table) {
    return run_batch(batch, table, true);
}

double Model::batch_loss(std::span<const EncodedSequence* const> batch, const MessageTable& table) const {
    return const_cast<Model*>(this)->run_batch(batch, table, false);
}

double Model::run_batch(std::span<const EncodedSequence* const> batch, const MessageTable& table, bool backward) {
    if (batch.empty()) throw DataError("empty training batch");

    // Every distinct message in the batch is encoded exactly once.
    std::vector<int> unique_ids;
    for (const auto* seq : batch) {
        if (seq->messages.empty()) throw DataError("cannot train on an empty message sequence");
        if (static_cast<Index>(seq->messages.size()) > message_budget()) {
            throw RuntimeFailure("sequence of " + std::to_string(seq->messages.size()) +
                                 " messages exceeds the decoder budget");
        }
        unique_ids.insert(unique_ids.end(), seq->messages.begin(), seq->messages.end());
    }
    std::sort(unique_ids.begin(), unique_ids.end());
    unique_ids.erase(std::unique(unique_ids.begin(), unique_ids.end()), unique_ids.end());
    std::unordered_map<int, Index> row_of;
    row_of.reserve(unique_ids.size());
    std::vector<const std::vector<int>*> token_ptrs;
    token_ptrs.reserve(unique_ids.size());
    for (std::size_t i = 0; i < unique_ids.size(); ++i) {
        row_of.emplace(unique_ids[i], static_cast<Index>(i));
        token_ptrs.push_back(&table.tokens(unique_ids[i]));
    }

    nn::ParamList enc_params = params(ParamGroup::encoder_base);
    {
        nn::ParamList a = params(ParamGroup::encoder_adapters);
        enc_params.insert(enc_params.end(), a.begin(), a.end());
    }
    const bool encoder_grad = backward && any_trainable(enc_params);
    const bool projector_grad = backward && any_trainable(params(ParamGroup::projector));
    const bool upstream_grad = encoder_grad || projector_grad;
    nn::ParamList dec_params = params(ParamGroup::decoder_base);
    {
        nn::ParamList a = params(ParamGroup::decoder_adapters);
        dec_params.insert(dec_params.end(), a.begin(), a.end());
    }
    const bool decoder_grad = backward && (upstream_grad || any_trainable(dec_params));

    MessageEncoder::Cache enc_cache;
    nn::Linear::Cache proj_cache;
    Matrix semantic = encoder_.forward(token_ptrs, encoder_grad ? &enc_cache : nullptr);
    Matrix embedded = projector_.forward(semantic, upstream_grad ? &proj_cache : nullptr);

    const Index d = config_.decoder.d_model;
    const Index a_len = prefix_tokens();
    const Index q_len = suffix_tokens();
    const Matrix prefix_rows = decoder_.embed(prefix_ids_);
    const Matrix suffix_rows = decoder_.embed(suffix_ids_);

    std::vector<nn::Segment> segments;
    Index total_rows = 0;
    Index total_targets = 0;
    for (const auto* seq : batch) {
        const Index n = static_cast<Index>(seq->messages.size());
        const Index t = static_cast<Index>(answer_ids(seq->label).size());
        segments.push_back({total_rows, a_len + n + q_len + t - 1});
        total_rows += segments.back().length;
        total_targets += t;
    }

    Matrix x(total_rows, d);
    std::vector<Index> target_rows;
    target_rows.reserve(static_cast<std::size_t>(total_targets));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& seq = *batch[b];
        const Index off = segments[b].offset;
        const Index n = static_cast<Index>(seq.messages.size());
        const auto& answer = answer_ids(seq.label);
        const Index t = static_cast<Index>(answer.size());
        x.middleRows(off, a_len) = prefix_rows;
        for (Index i = 0; i < n; ++i) {
            x.row(off + a_len + i) = embedded.row(row_of.at(seq.messages[static_cast<std::size_t>(i)]));
        }
        x.middleRows(off + a_len + n, q_len) = suffix_rows;
        if (t > 1) {
            std::vector<int> fed(answer.begin(), answer.end() - 1);
            x.middleRows(off + a_len + n + q_len, t - 1) = decoder_.embed(fed);
        }
        // The hidden state at row r predicts token r+1: the last suffix row
        // predicts the first answer token.
        const Index first = off + a_len + n + q_len - 1;
        for (Index j = 0; j < t; ++j) target_rows.push_back(first + j);
    }

    // Target rows are ascending, so the decoder can return just those rows.
    Decoder::Cache dec_cache;
    const Matrix selected = decoder_.forward(x, segments, decoder_grad ? &dec_cache : nullptr, target_rows);
    Matrix logits = decoder_.logits(selected);

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    Matrix d_logits;
    if (decoder_grad) d_logits.setZero(logits.rows(), logits.cols());
    Index cursor = 0;
    for (const auto* seq : batch) {
        const auto& answer = answer_ids(seq->label);
        const Index t = static_cast<Index>(answer.size());
        Matrix block = logits.middleRows(cursor, t);
        if (decoder_grad) {
            Matrix d_block;
            loss += nn::cross_entropy(block, answer, &d_block, inv_batch) * inv_batch;
            d_logits.middleRows(cursor, t) = d_block;
        } else {
            loss += nn::cross_entropy(block, answer) * inv_batch;
        }
        cursor += t;
    }
    if (!decoder_grad) return loss;

    Matrix d_selected = decoder_.logits_backward(d_logits, selected);
    Matrix d_x = decoder_.backward(d_selected, segments, dec_cache);
    if (!upstream_grad) return loss;

    Matrix d_embedded = Matrix::Zero(embedded.rows(), d);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& seq = *batch[b];
        const Index base = segments[b].offset + a_len;
        for (std::size_t i = 0; i < seq.messages.size(); ++i) {
            d_embedded.row(row_of.at(seq.messages[i])) += d_x.row(base + static_cast<Index>(i));
        }
    }
    Matrix d_semantic = projector_.backward(d_embedded, proj_cache);
    if (encoder_grad) encoder_.backward(d_semantic, enc_cache);
    return loss;
}

std::vector<Verdict> Model::classify_batch(std::span<const EncodedSequence* const> batch,
                                           const MessageTable& table) const {
    std::vector<Verdict> out;
    if (batch.empty()) return out;
    std::vector<int> unique_ids;
    for (const auto* seq : batch) unique_ids.insert(unique_ids.end(), seq->messages.begin(), seq->messages.end());
    std::sort(unique_ids.begin(), unique_ids.end());
    unique_ids.erase(std::unique(unique_ids.begin(), unique_ids.end()), unique_ids.end());
    std::unordered_map<int, Index> row_of;
    std::vector<const std::vector<int>*> token_ptrs;
    for (std::size_t i = 0; i < unique_ids.size(); ++i) {
        row_of.emplace(unique_ids[i], static_cast<Index>(i));
        token_ptrs.push_back(&table.tokens(unique_ids[i]));
    }
    Matrix embedded = unique_ids.empty() ? Matrix() : projector_.forward(encoder_.forward(token_ptrs));

    out.reserve(batch.size());
    for (const auto* seq : batch) {
        if (seq->messages.empty()) throw DataError("cannot classify an empty message sequence");
        Matrix rows(static_cast<Index>(seq->messages.size()), config_.decoder.d_model);
        for (std::size_t i = 0; i < seq->messages.size(); ++i) {
            rows.row(static_cast<Index>(i)) = embedded.row(row_of.at(seq->messages[i]));
        }
        out.push_back(classify(assemble_prompt(rows)));
    }
    return out;
}

bool Model::encode_sequence(const grouping::LogSequence& seq, MessageTable& table, EncodedSequence& out) const {
    if (seq.messages.empty()) throw DataError("sequence '" + seq.id + "' has no messages");
    const std::size_t budget = static_cast<std::size_t>(std::min(message_budget(), config_.max_messages));
    const std::size_t first = seq.messages.size() > budget ? seq.messages.size() - budget : 0;
    out.messages.clear();
    out.messages.reserve(seq.messages.size() - first);
    for (std::size_t i = first; i < seq.messages.size(); ++i) {
        out.messages.push_back(
            table.intern(seq.messages[i], enc_tok_, static_cast<std::size_t>(config_.encoder.max_message_tokens)));
    }
    out.label = seq.label;
    return first > 0;
}

void Model::attach_adapters(int rank, double alpha) {
    if (has_adapters()) throw ConfigError("adapters are already attached");
    if (rank <= 0) throw ConfigError("adapter rank must be positive");
    if (alpha <= 0.0) throw ConfigError("adapter alpha must be positive");
    nn::Rng enc_rng = seeded(config_.init_seed, 11);
    nn::Rng dec_rng = seeded(config_.init_seed, 13);
    encoder_.attach_adapters(rank, alpha, enc_rng);
    decoder_.attach_adapters(rank, alpha, dec_rng);
    adapter_rank_ = rank;
    adapter_alpha_ = alpha;
}

nn::ParamList Model::params(ParamGroup group) {
    nn::ParamList out;
    switch (group) {
    case ParamGroup::encoder_base: encoder_.collect_base(out); break;
    case ParamGroup::encoder_adapters: encoder_.collect_adapter(out); break;
    case ParamGroup::projector: projector_.collect_base(out); break;
    case ParamGroup::decoder_base: decoder_.collect_base(out); break;
    case ParamGroup::decoder_adapters: decoder_.collect_adapter(out); break;
    }
    return out;
}

nn::ParamList Model::all_params() {
    nn::ParamList out;
    for (ParamGroup g : kAllGroups) {
        nn::ParamList part = params(g);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

void Model::set_trainable(std::span<const ParamGroup> groups) {
    for (ParamGroup g : kAllGroups) {
        const bool on = std::find(groups.begin(), groups.end(), g) != groups.end();
        for (nn::Param* p : params(g)) {
            p->trainable = on;
            if (!on) p->grad.resize(0, 0);
        }
    }
}

void Model::zero_grad() {
    for (nn::Param* p : all_params()) p->zero_grad();
}

} // namespace logllm::model
