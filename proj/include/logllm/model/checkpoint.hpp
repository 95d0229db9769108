#pragma once

#include "logllm/config.hpp"
#include "logllm/model/model.hpp"

#include <filesystem>
#include <string>

namespace logllm::model {

/// Writes model settings into `[encoder]`, `[decoder]` and `[model]` sections.
void write_model_config(const ModelConfig& cfg, KeyValueConfig& out);
/// Reads the same sections, starting from `base` for missing keys.
ModelConfig read_model_config(const KeyValueConfig& in, ModelConfig base = {});

/// Identity of a checkpoint, as recorded in its manifest.
struct CheckpointManifest {
    std::string stage;
    std::string backbone;
    Index d_enc = 0;
    Index d_dec = 0;
    Index prefix_tokens = 0;
    Index suffix_tokens = 0;
    std::string prompt_prefix;
    std::string prompt_suffix;
    std::string answer_normal;
    std::string answer_anomalous;
    std::string encoder_vocab;
    std::string decoder_vocab;
    int adapter_rank = 0;
    double adapter_alpha = 0.0;
};

/// Checkpoint layout:
///   manifest.json, model.ini, encoder_vocab.txt, decoder_vocab.txt,
///   encoder.bin, projector.bin, decoder_base.bin, decoder_adapters.bin
void save_checkpoint(Model& model, const std::filesystem::path& dir, const std::string& stage);
Model load_checkpoint(const std::filesystem::path& dir);
CheckpointManifest read_manifest(const std::filesystem::path& dir);

/// ConfigError when d_enc, d_dec or the prompt template of the checkpoint
/// differ from `expected`.
void check_compatible(const CheckpointManifest& manifest, const ModelConfig& expected);

/// Base weights and vocabularies only, loadable as a pretrained backbone.
void save_backbone(Model& model, const std::filesystem::path& dir);
/// Builds a model from a backbone directory; architecture comes from the
/// directory, while limits (max_messages, answer length, seed) come from `cfg`.
Model load_backbone(const std::filesystem::path& dir, const ModelConfig& cfg);

/// Raw parameter file: magic, count, then (name, rows, cols, values) records.
void save_params(const nn::ParamList& params, const std::filesystem::path& path);
void load_params(const nn::ParamList& params, const std::filesystem::path& path);

} // namespace logllm::model
