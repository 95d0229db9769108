#include "logllm/model/checkpoint.hpp"

#include "logllm/errors.hpp"
#include "logllm/records.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace logllm::model {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'L', 'L', 'M', 'P', 'A', 'R', 'M', '1'};
constexpr const char* kFormat = "logllm-checkpoint-1";

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const fs::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw RuntimeFailure("truncated parameter file " + path.string());
    return v;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

nn::ParamList concat(nn::ParamList a, const nn::ParamList& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

} // namespace

void save_params(const nn::ParamList& params, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint64_t>(out, params.size());
    for (const nn::Param* p : params) {
        write_pod<std::uint64_t>(out, p->name.size());
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
    }
    if (!out) throw RuntimeFailure("failed writing " + path.string());
}

void load_params(const nn::ParamList& params, const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("cannot read " + path.string());
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + sizeof(magic), kMagic)) {
        throw RuntimeFailure(path.string() + " is not a parameter file");
    }
    const auto count = read_pod<std::uint64_t>(in, path);
    if (count != params.size()) {
        throw RuntimeFailure(path.string() + " holds " + std::to_string(count) + " tensors, model expects " +
                             std::to_string(params.size()));
    }
    for (nn::Param* p : params) {
        const auto name_len = read_pod<std::uint64_t>(in, path);
        if (name_len > 4096) throw RuntimeFailure("corrupt parameter file " + path.string());
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        const auto rows = read_pod<std::uint64_t>(in, path);
        const auto cols = read_pod<std::uint64_t>(in, path);
        if (name != p->name || static_cast<Index>(rows) != p->value.rows() ||
            static_cast<Index>(cols) != p->value.cols()) {
            throw RuntimeFailure(path.string() + ": tensor '" + name + "' (" + std::to_string(rows) + "x" +
                                 std::to_string(cols) + ") does not match model tensor '" + p->name + "' (" +
                                 std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()) + ")");
        }
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
        if (!in) throw RuntimeFailure("truncated parameter file " + path.string());
    }
}

void write_model_config(const ModelConfig& cfg, KeyValueConfig& out) {
    out.set("model.backbone", std::string(to_string(cfg.backbone)));
    if (!cfg.pretrained_dir.empty()) out.set("model.pretrained_dir", cfg.pretrained_dir);
    out.set("model.max_messages", std::to_string(cfg.max_messages));
    out.set("model.max_answer_tokens", std::to_string(cfg.max_answer_tokens));
    out.set("model.encoder_vocab_limit", std::to_string(cfg.encoder_vocab_limit));
    out.set("model.encoder_min_frequency", std::to_string(cfg.encoder_min_frequency));
    out.set("model.init_seed", std::to_string(cfg.init_seed));
    out.set("encoder.d_model", std::to_string(cfg.encoder.d_model));
    out.set("encoder.layers", std::to_string(cfg.encoder.layers));
    out.set("encoder.heads", std::to_string(cfg.encoder.heads));
    out.set("encoder.ffn", std::to_string(cfg.encoder.ffn));
    out.set("encoder.max_message_tokens", std::to_string(cfg.encoder.max_message_tokens));
    out.set("decoder.d_model", std::to_string(cfg.decoder.d_model));
    out.set("decoder.layers", std::to_string(cfg.decoder.layers));
    out.set("decoder.heads", std::to_string(cfg.decoder.heads));
    out.set("decoder.ffn", std::to_string(cfg.decoder.ffn));
    out.set("decoder.max_positions", std::to_string(cfg.decoder.max_positions));
    out.set("decoder.rope_base", fmt_double(cfg.decoder.rope_base));
}

ModelConfig read_model_config(const KeyValueConfig& in, ModelConfig base) {
    ModelConfig cfg = std::move(base);
    cfg.backbone = parse_backbone(in.get_string("model.backbone", std::string(to_string(cfg.backbone))));
    cfg.pretrained_dir = in.get_string("model.pretrained_dir", cfg.pretrained_dir);
    cfg.max_messages = in.get_int("model.max_messages", cfg.max_messages);
    cfg.max_answer_tokens = static_cast<int>(in.get_int("model.max_answer_tokens", cfg.max_answer_tokens));
    cfg.encoder_vocab_limit = static_cast<std::size_t>(
        in.get_int("model.encoder_vocab_limit", static_cast<long long>(cfg.encoder_vocab_limit)));
    cfg.encoder_min_frequency = static_cast<int>(in.get_int("model.encoder_min_frequency", cfg.encoder_min_frequency));
    cfg.init_seed = static_cast<std::uint64_t>(in.get_int("model.init_seed", static_cast<long long>(cfg.init_seed)));
    cfg.encoder.d_model = in.get_int("encoder.d_model", cfg.encoder.d_model);
    cfg.encoder.layers = in.get_int("encoder.layers", cfg.encoder.layers);
    cfg.encoder.heads = in.get_int("encoder.heads", cfg.encoder.heads);
    cfg.encoder.ffn = in.get_int("encoder.ffn", cfg.encoder.ffn);
    cfg.encoder.max_message_tokens = in.get_int("encoder.max_message_tokens", cfg.encoder.max_message_tokens);
    cfg.decoder.d_model = in.get_int("decoder.d_model", cfg.decoder.d_model);
    cfg.decoder.layers = in.get_int("decoder.layers", cfg.decoder.layers);
    cfg.decoder.heads = in.get_int("decoder.heads", cfg.decoder.heads);
    cfg.decoder.ffn = in.get_int("decoder.ffn", cfg.decoder.ffn);
    cfg.decoder.max_positions = in.get_int("decoder.max_positions", cfg.decoder.max_positions);
    cfg.decoder.rope_base = in.get_double("decoder.rope_base", cfg.decoder.rope_base);

    auto positive = [](long long v, const char* key) {
        if (v <= 0) throw ConfigError(std::string(key) + " must be positive");
    };
    positive(cfg.max_messages, "model.max_messages");
    positive(cfg.max_answer_tokens, "model.max_answer_tokens");
    positive(static_cast<long long>(cfg.encoder_vocab_limit), "model.encoder_vocab_limit");
    positive(cfg.encoder.d_model, "encoder.d_model");
    positive(cfg.encoder.layers, "encoder.layers");
    positive(cfg.encoder.heads, "encoder.heads");
    positive(cfg.encoder.ffn, "encoder.ffn");
    positive(cfg.encoder.max_message_tokens, "encoder.max_message_tokens");
    positive(cfg.decoder.d_model, "decoder.d_model");
    positive(cfg.decoder.layers, "decoder.layers");
    positive(cfg.decoder.heads, "decoder.heads");
    positive(cfg.decoder.ffn, "decoder.ffn");
    positive(cfg.decoder.max_positions, "decoder.max_positions");
    if (cfg.encoder.d_model % cfg.encoder.heads != 0) throw ConfigError("encoder.d_model must be divisible by heads");
    if (cfg.decoder.d_model % cfg.decoder.heads != 0 || (cfg.decoder.d_model / cfg.decoder.heads) % 2 != 0) {
        throw ConfigError("decoder.d_model / heads must be an even integer");
    }
    if (cfg.encoder.max_message_tokens < 2) throw ConfigError("encoder.max_message_tokens must be at least 2");
    return cfg;
}

void save_checkpoint(Model& model, const fs::path& dir, const std::string& stage) {
    fs::create_directories(dir);
    const ModelConfig& cfg = model.config();

    KeyValueConfig ini;
    write_model_config(cfg, ini);
    ini.save(dir / "model.ini");
    model.encoder_tokenizer().vocab().save(dir / "encoder_vocab.txt");
    model.decoder_tokenizer().vocab().save(dir / "decoder_vocab.txt");

    save_params(concat(model.params(ParamGroup::encoder_base), model.params(ParamGroup::encoder_adapters)),
                dir / "encoder.bin");
    save_params(model.params(ParamGroup::projector), dir / "projector.bin");
    save_params(model.params(ParamGroup::decoder_base), dir / "decoder_base.bin");
    save_params(model.params(ParamGroup::decoder_adapters), dir / "decoder_adapters.bin");

    nlohmann::ordered_json m;
    m["format"] = kFormat;
    m["stage"] = stage;
    m["backbone"] = std::string(to_string(cfg.backbone));
    m["d_enc"] = cfg.encoder.d_model;
    m["d_dec"] = cfg.decoder.d_model;
    m["prefix_tokens"] = model.prefix_tokens();
    m["suffix_tokens"] = model.suffix_tokens();
    m["prompt_prefix"] = std::string(kPromptPrefix);
    m["prompt_suffix"] = std::string(kPromptSuffix);
    m["answer_normal"] = std::string(kAnswerNormal);
    m["answer_anomalous"] = std::string(kAnswerAnomalous);
    m["encoder_vocab"] = model.encoder_tokenizer().vocab().fingerprint();
    m["decoder_vocab"] = model.decoder_tokenizer().vocab().fingerprint();
    m["adapter_rank"] = model.adapter_rank();
    m["adapter_alpha"] = model.adapter_alpha();
    auto& sums = m["checksums"];
    for (ParamGroup g : kAllGroups) {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(nn::checksum(model.params(g))));
        sums[std::string(to_string(g))] = buf;
    }
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

CheckpointManifest read_manifest(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    if (!fs::exists(path)) throw RuntimeFailure("no checkpoint manifest at " + path.string());
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(read_text_file(path));
        if (m.at("format").get<std::string>() != kFormat) {
            throw RuntimeFailure("unsupported checkpoint format in " + path.string());
        }
        CheckpointManifest out;
        out.stage = m.at("stage").get<std::string>();
        out.backbone = m.at("backbone").get<std::string>();
        out.d_enc = m.at("d_enc").get<Index>();
        out.d_dec = m.at("d_dec").get<Index>();
        out.prefix_tokens = m.at("prefix_tokens").get<Index>();
        out.suffix_tokens = m.at("suffix_tokens").get<Index>();
        out.prompt_prefix = m.at("prompt_prefix").get<std::string>();
        out.prompt_suffix = m.at("prompt_suffix").get<std::string>();
        out.answer_normal = m.at("answer_normal").get<std::string>();
        out.answer_anomalous = m.at("answer_anomalous").get<std::string>();
        out.encoder_vocab = m.at("encoder_vocab").get<std::string>();
        out.decoder_vocab = m.at("decoder_vocab").get<std::string>();
        out.adapter_rank = m.at("adapter_rank").get<int>();
        out.adapter_alpha = m.at("adapter_alpha").get<double>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw RuntimeFailure("malformed checkpoint manifest " + path.string() + ": " + e.what());
    }
}

void check_compatible(const CheckpointManifest& manifest, const ModelConfig& expected) {
    if (manifest.d_enc != expected.encoder.d_model) {
        throw ConfigError("checkpoint d_enc " + std::to_string(manifest.d_enc) + " differs from configured " +
                          std::to_string(expected.encoder.d_model));
    }
    if (manifest.d_dec != expected.decoder.d_model) {
        throw ConfigError("checkpoint d_dec " + std::to_string(manifest.d_dec) + " differs from configured " +
                          std::to_string(expected.decoder.d_model));
    }
    if (manifest.prompt_prefix != kPromptPrefix || manifest.prompt_suffix != kPromptSuffix ||
        manifest.answer_normal != kAnswerNormal || manifest.answer_anomalous != kAnswerAnomalous) {
        throw ConfigError("checkpoint prompt template differs from this build's template");
    }
}

Model load_checkpoint(const fs::path& dir) {
    const CheckpointManifest manifest = read_manifest(dir);
    const ModelConfig cfg = read_model_config(KeyValueConfig::load(dir / "model.ini"));
    check_compatible(manifest, cfg);
    Model model(cfg, WordPieceTokenizer(Vocabulary::load(dir / "encoder_vocab.txt")),
                WordTokenizer(Vocabulary::load(dir / "decoder_vocab.txt")));
    if (model.encoder_tokenizer().vocab().fingerprint() != manifest.encoder_vocab ||
        model.decoder_tokenizer().vocab().fingerprint() != manifest.decoder_vocab) {
        throw RuntimeFailure("vocabulary files in " + dir.string() + " do not match the manifest");
    }
    if (model.prefix_tokens() != manifest.prefix_tokens || model.suffix_tokens() != manifest.suffix_tokens) {
        throw RuntimeFailure("prompt token counts in " + dir.string() + " do not match the manifest");
    }
    if (manifest.adapter_rank > 0) model.attach_adapters(manifest.adapter_rank, manifest.adapter_alpha);
    load_params(concat(model.params(ParamGroup::encoder_base), model.params(ParamGroup::encoder_adapters)),
                dir / "encoder.bin");
    load_params(model.params(ParamGroup::projector), dir / "projector.bin");
    load_params(model.params(ParamGroup::decoder_base), dir / "decoder_base.bin");
    load_params(model.params(ParamGroup::decoder_adapters), dir / "decoder_adapters.bin");
    return model;
}

void save_backbone(Model& model, const fs::path& dir) {
    fs::create_directories(dir);
    KeyValueConfig ini;
    write_model_config(model.config(), ini);
    ini.save(dir / "model.ini");
    model.encoder_tokenizer().vocab().save(dir / "encoder_vocab.txt");
    model.decoder_tokenizer().vocab().save(dir / "decoder_vocab.txt");
    save_params(model.params(ParamGroup::encoder_base), dir / "encoder.bin");
    save_params(model.params(ParamGroup::decoder_base), dir / "decoder_base.bin");
}

Model load_backbone(const fs::path& dir, const ModelConfig& cfg) {
    if (!fs::is_directory(dir)) throw ConfigError("pretrained backbone directory not found: " + dir.string());
    ModelConfig arch = read_model_config(KeyValueConfig::load(dir / "model.ini"));
    arch.backbone = Backbone::pretrained;
    arch.pretrained_dir = dir.string();
    arch.max_messages = cfg.max_messages;
    arch.max_answer_tokens = cfg.max_answer_tokens;
    arch.init_seed = cfg.init_seed;
    Model model(arch, WordPieceTokenizer(Vocabulary::load(dir / "encoder_vocab.txt")),
                WordTokenizer(Vocabulary::load(dir / "decoder_vocab.txt")));
    load_params(model.params(ParamGroup::encoder_base), dir / "encoder.bin");
    load_params(model.params(ParamGroup::decoder_base), dir / "decoder_base.bin");
    return model;
}

} // namespace logllm::model
