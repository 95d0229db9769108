#pragma once

#include "logllm/config.hpp"
#include "logllm/datasetprep.hpp"
#include "logllm/eval.hpp"
#include "logllm/grouping.hpp"
#include "logllm/model/model.hpp"
#include "logllm/preprocess.hpp"
#include "logllm/training.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace logllm::pipeline {

namespace fs = std::filesystem;

enum class GroupMethod { window, session };
GroupMethod parse_group_method(std::string_view text);
std::string_view to_string(GroupMethod method);

/// Everything that determines a run. Built from a config file, then the
/// LOGLLM_SEED environment variable, then command-line overrides.
struct ExperimentConfig {
    fs::path adapter;            // data.adapter
    fs::path input;              // data.input
    fs::path label_table;        // data.labels (session grouping)
    preprocess::Mode mode = preprocess::Mode::re;
    fs::path masking;            // preprocess.rules; empty = built-in defaults
    GroupMethod group = GroupMethod::window;
    grouping::WindowSpec window;
    datasetprep::SplitSpec split;
    double beta = 0.3;
    std::uint64_t seed = 42;
    training::StagePlan plan;
    model::ModelConfig model;
    std::size_t eval_batch_size = 16;
    fs::path out_dir = "runs/default";

    /// The merged key/value form that is archived with every output.
    KeyValueConfig resolved() const;
};

/// Relative paths in the file are resolved against `base_dir`.
ExperimentConfig parse_experiment(const KeyValueConfig& cfg, const fs::path& base_dir);

/// Loads `path` (or starts empty), applies LOGLLM_SEED, then `overrides`
/// ("section.key" = value pairs), and parses the result.
ExperimentConfig load_experiment(const std::optional<fs::path>& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides);

/// Keys that a global seed override rewrites.
std::vector<std::pair<std::string, std::string>> seed_overrides(std::uint64_t seed);

struct PrepareResult {
    std::size_t sequences = 0;
    std::size_t train = 0;
    std::size_t test = 0;
    datasetprep::OversampleReport oversample;
    fs::path dir;
};

struct TrainResult {
    training::TrainState state;
    fs::path final_checkpoint;
    std::size_t train_sequences = 0;
};

fs::path prepared_dir(const ExperimentConfig& cfg);

/// ingest -> mask -> group -> split -> oversample, written under <out>/prepared.
PrepareResult cmd_prepare(const ExperimentConfig& cfg);
/// Trains on <out>/prepared/train.jsonl; checkpoints under <out>/checkpoints.
TrainResult cmd_train(const ExperimentConfig& cfg);
/// Scores <out>/prepared/test.jsonl with a checkpoint (default: the final one).
eval::MetricsReport cmd_evaluate(const ExperimentConfig& cfg, const std::optional<fs::path>& checkpoint);
/// One train + evaluate cycle per beta on the prepared base split.
std::vector<eval::SweepRow> cmd_sweep_beta(const ExperimentConfig& cfg, const std::vector<double>& betas);

} // namespace logllm::pipeline
