#include "logllm/training.hpp"

#include "logllm/errors.hpp"
#include "logllm/model/checkpoint.hpp"
#include "logllm/nn/optimizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace logllm::training {

bool StagePlan::stage_enabled(int stage) const {
    switch (stage) {
    case 1: return stage1.enabled;
    case 2: return stage2.enabled;
    case 3: return stage3.enabled;
    }
    throw ConfigError("unknown training stage " + std::to_string(stage));
}

void StagePlan::set_stage_enabled(int stage, bool enabled) {
    switch (stage) {
    case 1: stage1.enabled = enabled; return;
    case 2: stage2.enabled = enabled; return;
    case 3: stage3.enabled = enabled; return;
    }
    throw ConfigError("unknown training stage " + std::to_string(stage) + " (expected 1, 2 or 3)");
}

void StagePlan::validate() const {
    if (!stage1.enabled && !stage2.enabled && !stage3.enabled) {
        throw ConfigError("every training stage is disabled");
    }
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (adapter_rank <= 0) throw ConfigError("adapter_rank must be positive");
    if (adapter_alpha <= 0.0) throw ConfigError("adapter_alpha must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (quantize_base) throw ConfigError("quantize_base is not supported by this build");
    if (stage1.sample_cap == 0) throw ConfigError("stage1.sample_cap must be positive");
    if (!(stage1.balance >= 0.0 && stage1.balance <= 1.0)) throw ConfigError("stage1.balance must lie in [0, 1]");
    if (stage1.epochs <= 0 || stage2.epochs <= 0 || stage3.epochs <= 0) {
        throw ConfigError("stage epochs must be positive");
    }
    for (double lr : {stage1.lr, stage2.lr, stage3.lr}) {
        if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
    }
}

StagePlan read_stage_plan(const KeyValueConfig& cfg, StagePlan base) {
    StagePlan p = std::move(base);
    auto get_size = [&](const std::string& key, std::size_t fallback) {
        long long v = cfg.get_int(key, static_cast<long long>(fallback));
        if (v < 0) throw ConfigError(key + " must be non-negative");
        return static_cast<std::size_t>(v);
    };
    p.batch_size = get_size("train.batch_size", p.batch_size);
    p.weight_decay = cfg.get_double("train.weight_decay", p.weight_decay);
    p.adapter_rank = static_cast<int>(cfg.get_int("train.adapter_rank", p.adapter_rank));
    p.adapter_alpha = cfg.get_double("train.adapter_alpha", p.adapter_alpha);
    p.quantize_base = cfg.get_bool("train.quantize_base", p.quantize_base);
    p.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(p.seed)));
    p.stage1.enabled = cfg.get_bool("stage1.enabled", p.stage1.enabled);
    p.stage1.sample_cap = get_size("stage1.sample_cap", p.stage1.sample_cap);
    p.stage1.lr = cfg.get_double("stage1.lr", p.stage1.lr);
    p.stage1.balance = cfg.get_double("stage1.balance", p.stage1.balance);
    p.stage1.epochs = static_cast<int>(cfg.get_int("stage1.epochs", p.stage1.epochs));
    p.stage2.enabled = cfg.get_bool("stage2.enabled", p.stage2.enabled);
    p.stage2.epochs = static_cast<int>(cfg.get_int("stage2.epochs", p.stage2.epochs));
    p.stage2.lr = cfg.get_double("stage2.lr", p.stage2.lr);
    p.stage3.enabled = cfg.get_bool("stage3.enabled", p.stage3.enabled);
    p.stage3.epochs = static_cast<int>(cfg.get_int("stage3.epochs", p.stage3.epochs));
    p.stage3.lr = cfg.get_double("stage3.lr", p.stage3.lr);
    return p;
}

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string flag(bool v) { return v ? "true" : "false"; }

} // namespace

void write_stage_plan(const StagePlan& p, KeyValueConfig& out) {
    out.set("train.batch_size", std::to_string(p.batch_size));
    out.set("train.weight_decay", num(p.weight_decay));
    out.set("train.adapter_rank", std::to_string(p.adapter_rank));
    out.set("train.adapter_alpha", num(p.adapter_alpha));
    out.set("train.quantize_base", flag(p.quantize_base));
    out.set("train.seed", std::to_string(p.seed));
    out.set("stage1.enabled", flag(p.stage1.enabled));
    out.set("stage1.sample_cap", std::to_string(p.stage1.sample_cap));
    out.set("stage1.lr", num(p.stage1.lr));
    out.set("stage1.balance", num(p.stage1.balance));
    out.set("stage1.epochs", std::to_string(p.stage1.epochs));
    out.set("stage2.enabled", flag(p.stage2.enabled));
    out.set("stage2.epochs", std::to_string(p.stage2.epochs));
    out.set("stage2.lr", num(p.stage2.lr));
    out.set("stage3.enabled", flag(p.stage3.enabled));
    out.set("stage3.epochs", std::to_string(p.stage3.epochs));
    out.set("stage3.lr", num(p.stage3.lr));
}

GroupChecksums group_checksums(Model& model) {
    GroupChecksums out{};
    for (std::size_t i = 0; i < kGroupCount; ++i) out[i] = nn::checksum(model.params(model::kAllGroups[i]));
    return out;
}

GroupValues group_grad_norms(Model& model) {
    GroupValues out{};
    for (std::size_t i = 0; i < kGroupCount; ++i) out[i] = nn::grad_norm(model.params(model::kAllGroups[i]));
    return out;
}

std::vector<ParamGroup> trainable_groups(int stage) {
    switch (stage) {
    case 1: return {ParamGroup::decoder_adapters};
    case 2: return {ParamGroup::encoder_adapters, ParamGroup::projector};
    case 3: return {ParamGroup::encoder_adapters, ParamGroup::projector, ParamGroup::decoder_adapters};
    }
    throw ConfigError("unknown training stage " + std::to_string(stage));
}

EncodedDataset encode_dataset(const Model& model, const std::vector<LogSequence>& sequences) {
    EncodedDataset out;
    out.sequences.resize(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        if (model.encode_sequence(sequences[i], out.table, out.sequences[i])) ++out.truncated;
    }
    if (out.truncated > 0) {
        spdlog::warn("{} sequences exceed the decoder budget and keep only their last {} messages", out.truncated,
                     model.message_budget());
    }
    return out;
}

Model build_model(const model::ModelConfig& cfg, const std::vector<LogSequence>& train) {
    if (cfg.backbone == model::Backbone::pretrained) {
        if (cfg.pretrained_dir.empty()) throw ConfigError("backbone = pretrained requires model.pretrained_dir");
        return model::load_backbone(cfg.pretrained_dir, cfg);
    }
    std::vector<std::string> corpus;
    std::unordered_set<std::string> seen;
    for (const auto& seq : train) {
        for (const auto& m : seq.messages) {
            if (seen.insert(m).second) corpus.push_back(m);
        }
    }
    if (corpus.empty()) throw DataError("training set has no messages to build an encoder vocabulary from");
    auto tok = model::WordPieceTokenizer::train(corpus, cfg.encoder_vocab_limit, cfg.encoder_min_frequency);
    return Model(cfg, std::move(tok), Model::default_decoder_tokenizer());
}

void attach_adapters(Model& model, const StagePlan& plan) {
    model.attach_adapters(plan.adapter_rank, plan.adapter_alpha);
}

std::vector<std::size_t> draw_stage1_samples(const std::vector<EncodedSequence>& data, const Stage1Plan& plan,
                                             std::uint64_t seed) {
    if (data.size() < 2) throw DataError("stage 1 needs at least 2 training sequences");
    std::vector<std::size_t> anomalous, normal;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (data[i].label == Label::anomalous ? anomalous : normal).push_back(i);
    }
    nn::Rng rng(seed);
    std::shuffle(anomalous.begin(), anomalous.end(), rng);
    std::shuffle(normal.begin(), normal.end(), rng);

    const std::size_t total = std::min(plan.sample_cap, data.size());
    std::size_t want_anom = static_cast<std::size_t>(std::llround(plan.balance * static_cast<double>(total)));
    want_anom = std::min(want_anom, anomalous.size());
    std::size_t want_norm = std::min(total - want_anom, normal.size());
    // Fill any shortfall of one class from the other.
    want_anom = std::min(anomalous.size(), total - want_norm);

    std::vector<std::size_t> out(anomalous.begin(), anomalous.begin() + static_cast<std::ptrdiff_t>(want_anom));
    out.insert(out.end(), normal.begin(), normal.begin() + static_cast<std::ptrdiff_t>(want_norm));
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::string group_name(std::size_t i) { return std::string(model::to_string(model::kAllGroups[i])); }

TrainState run_stage(int stage, const std::vector<std::size_t>& pool, int epochs, double lr,
                     const EncodedDataset& data, const StagePlan& plan, Model& model, TrainState state,
                     const TrainHooks& hooks) {
    plan.validate();
    if (!model.has_adapters()) throw ConfigError("adapters must be attached before training");
    if (pool.empty()) throw DataError("stage " + std::to_string(stage) + " has no training sequences");

    const auto groups = trainable_groups(stage);
    StageSummary summary;
    summary.stage = stage;
    summary.samples = pool.size();
    summary.before = group_checksums(model);
    const auto start = std::chrono::steady_clock::now();

    model.set_trainable(groups);
    nn::ParamList trainable;
    for (ParamGroup g : groups) {
        nn::ParamList part = model.params(g);
        trainable.insert(trainable.end(), part.begin(), part.end());
    }
    nn::AdamW optimizer(trainable, nn::AdamWOptions{lr, 0.9, 0.999, 1e-8, plan.weight_decay});
    state.current_stage = stage;
    spdlog::info("stage {}: {} sequences x {} epochs, lr {}", stage, pool.size(), epochs, lr);

    std::vector<const EncodedSequence*> batch;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order = pool;
        nn::Rng rng(mix_seed(plan.seed, static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += plan.batch_size) {
            const std::size_t end = std::min(order.size(), begin + plan.batch_size);
            batch.clear();
            for (std::size_t i = begin; i < end; ++i) batch.push_back(&data.sequences[order[i]]);
            optimizer.zero_grad();
            const double loss = model.forward_backward(batch, data.table);
            if (!std::isfinite(loss)) {
                throw RuntimeFailure("stage " + std::to_string(stage) + ": non-finite loss at step " +
                                     std::to_string(state.step + 1));
            }
            StepRecord rec;
            rec.stage = stage;
            rec.step = ++state.step;
            rec.epoch = epoch + 1;
            rec.loss = loss;
            rec.grad_norms = group_grad_norms(model);
            optimizer.step();
            ++summary.steps;
            epoch_loss += loss;
            ++batches;
            state.log.push_back(rec);
            if (hooks.on_step) hooks.on_step(rec);
        }
        summary.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
        spdlog::info("stage {} epoch {}: mean loss {:.5f}", stage, epoch + 1, summary.epoch_losses.back());
    }
    model.set_trainable({});
    summary.after = group_checksums(model);
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (std::size_t i = 0; i < kGroupCount; ++i) {
        const bool declared = std::find(groups.begin(), groups.end(), model::kAllGroups[i]) != groups.end();
        if (!declared && summary.before[i] != summary.after[i]) {
            throw RuntimeFailure("stage " + std::to_string(stage) + " modified frozen group " + group_name(i));
        }
    }
    state.seconds += summary.seconds;
    state.stages.push_back(std::move(summary));
    if (hooks.on_stage_end) hooks.on_stage_end(stage, model, state);
    return state;
}

std::vector<std::size_t> all_indices(const EncodedDataset& data) {
    std::vector<std::size_t> out(data.sequences.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
}

} // namespace

TrainState run_stage1(const EncodedDataset& data, const StagePlan& plan, Model& model, TrainState state,
                      const TrainHooks& hooks) {
    if (!plan.stage1.enabled) throw ConfigError("stage 1 is disabled in the plan");
    auto pool = draw_stage1_samples(data.sequences, plan.stage1, mix_seed(plan.seed, 1, 0xFFFF));
    return run_stage(1, pool, plan.stage1.epochs, plan.stage1.lr, data, plan, model, std::move(state), hooks);
}

TrainState run_stage2(const EncodedDataset& data, const StagePlan& plan, Model& model, TrainState state,
                      const TrainHooks& hooks) {
    if (!plan.stage2.enabled) throw ConfigError("stage 2 is disabled in the plan");
    return run_stage(2, all_indices(data), plan.stage2.epochs, plan.stage2.lr, data, plan, model, std::move(state),
                     hooks);
}

TrainState run_stage3(const EncodedDataset& data, const StagePlan& plan, Model& model, TrainState state,
                      const TrainHooks& hooks) {
    if (!plan.stage3.enabled) throw ConfigError("stage 3 is disabled in the plan");
    return run_stage(3, all_indices(data), plan.stage3.epochs, plan.stage3.lr, data, plan, model, std::move(state),
                     hooks);
}

TrainState run_training(const EncodedDataset& data, const StagePlan& plan, Model& model, const TrainHooks& hooks) {
    plan.validate();
    if (!model.has_adapters()) {
        attach_adapters(model, plan);
    } else if (model.adapter_rank() != plan.adapter_rank) {
        throw ConfigError("model adapters have rank " + std::to_string(model.adapter_rank()) + ", plan asks for " +
                          std::to_string(plan.adapter_rank));
    }
    TrainState state;
    if (plan.stage1.enabled) state = run_stage1(data, plan, model, std::move(state), hooks);
    if (plan.stage2.enabled) state = run_stage2(data, plan, model, std::move(state), hooks);
    if (plan.stage3.enabled) state = run_stage3(data, plan, model, std::move(state), hooks);
    return state;
}

} // namespace logllm::training
