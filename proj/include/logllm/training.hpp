#pragma once

#include "logllm/config.hpp"
#include "logllm/grouping.hpp"
#include "logllm/model/model.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace logllm::training {

using grouping::LogSequence;
using model::EncodedSequence;
using model::MessageTable;
using model::Model;
using model::ParamGroup;

struct Stage1Plan {
    bool enabled = true;
    std::size_t sample_cap = 1000;
    double lr = 5e-4;
    double balance = 0.5; // fraction of anomalous samples in the draw
    int epochs = 1;
};

struct EpochStagePlan {
    bool enabled = true;
    int epochs = 2;
    double lr = 5e-5;
};

struct StagePlan {
    Stage1Plan stage1;
    EpochStagePlan stage2;
    EpochStagePlan stage3;
    std::size_t batch_size = 16;
    double weight_decay = 0.01;
    int adapter_rank = 8;
    double adapter_alpha = 16.0;
    bool quantize_base = false;
    std::uint64_t seed = 42;

    bool stage_enabled(int stage) const;
    void set_stage_enabled(int stage, bool enabled);
    void validate() const;
};

/// Reads `[train]`, `[stage1]`, `[stage2]`, `[stage3]`; missing keys keep `base`.
StagePlan read_stage_plan(const KeyValueConfig& cfg, StagePlan base = {});
void write_stage_plan(const StagePlan& plan, KeyValueConfig& out);

constexpr std::size_t kGroupCount = 5;
using GroupValues = std::array<double, kGroupCount>;
using GroupChecksums = std::array<std::uint64_t, kGroupCount>;

GroupChecksums group_checksums(Model& model);
GroupValues group_grad_norms(Model& model);

/// Groups updated by each stage.
std::vector<ParamGroup> trainable_groups(int stage);

struct StepRecord {
    int stage = 0;
    std::int64_t step = 0; // global step counter
    int epoch = 0;
    double loss = 0.0;
    GroupValues grad_norms{};
};

struct StageSummary {
    int stage = 0;
    std::int64_t steps = 0;
    std::size_t samples = 0; // sequences per epoch
    std::vector<double> epoch_losses;
    double seconds = 0.0;
    GroupChecksums before{};
    GroupChecksums after{};
};

struct TrainState {
    int current_stage = 0;
    std::int64_t step = 0;
    std::vector<StepRecord> log;
    std::vector<StageSummary> stages;
    double seconds = 0.0;
};

struct TrainHooks {
    std::function<void(const StepRecord&)> on_step;
    /// Called after each stage finishes, before the next one starts.
    std::function<void(int stage, Model&, const TrainState&)> on_stage_end;
};

/// Sequences interned against one message table.
struct EncodedDataset {
    MessageTable table;
    std::vector<EncodedSequence> sequences;
    std::size_t truncated = 0;
};

EncodedDataset encode_dataset(const Model& model, const std::vector<LogSequence>& sequences);

/// Tiny backbone: encoder vocabulary trained on the training messages and
/// freshly initialised weights. Pretrained backbone: loaded from its directory.
Model build_model(const model::ModelConfig& cfg, const std::vector<LogSequence>& train);

void attach_adapters(Model& model, const StagePlan& plan);

/// Class-balanced draw without replacement of at most plan.sample_cap sequences.
std::vector<std::size_t> draw_stage1_samples(const std::vector<EncodedSequence>& data, const Stage1Plan& plan,
                                             std::uint64_t seed);

TrainState run_stage1(const EncodedDataset& data, const StagePlan& plan, Model& model, TrainState state = {},
                      const TrainHooks& hooks = {});
TrainState run_stage2(const EncodedDataset& data, const StagePlan& plan, Model& model, TrainState state = {},
                      const TrainHooks& hooks = {});
TrainState run_stage3(const EncodedDataset& data, const StagePlan& plan, Model& model, TrainState state = {},
                      const TrainHooks& hooks = {});

/// Attaches adapters when missing, then runs the enabled stages in order.
TrainState run_training(const EncodedDataset& data, const StagePlan& plan, Model& model,
                        const TrainHooks& hooks = {});

} // namespace logllm::training
