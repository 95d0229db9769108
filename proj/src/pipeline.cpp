#include "logllm/pipeline.hpp"

#include "logllm/errors.hpp"
#include "logllm/ingest.hpp"
#include "logllm/model/checkpoint.hpp"
#include "logllm/records.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace logllm::pipeline {

GroupMethod parse_group_method(std::string_view text) {
    if (text == "window") return GroupMethod::window;
    if (text == "session") return GroupMethod::session;
    throw ConfigError("unknown grouping method '" + std::string(text) + "' (expected window or session)");
}

std::string_view to_string(GroupMethod method) {
    return method == GroupMethod::window ? "window" : "session";
}

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string short_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

fs::path resolve(const std::string& value, const fs::path& base) {
    if (value.empty()) return {};
    fs::path p(value);
    return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError(what + " must be a non-negative integer, got '" + text + "'");
    }
    return v;
}

void write_resolved(const ExperimentConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    cfg.resolved().save(dir / "config.ini");
}

void label_count_json(const std::vector<grouping::LogSequence>& seqs, nlohmann::ordered_json& j) {
    std::int64_t anomalous = 0;
    for (const auto& s : seqs) anomalous += s.label == Label::anomalous ? 1 : 0;
    j["sequences"] = seqs.size();
    j["anomalous"] = anomalous;
    j["normal"] = static_cast<std::int64_t>(seqs.size()) - anomalous;
}

} // namespace

std::vector<std::pair<std::string, std::string>> seed_overrides(std::uint64_t seed) {
    const std::string s = std::to_string(seed);
    return {{"run.seed", s}, {"split.seed", s}, {"oversample.seed", s}, {"train.seed", s}, {"model.init_seed", s}};
}

ExperimentConfig parse_experiment(const KeyValueConfig& c, const fs::path& base_dir) {
    ExperimentConfig cfg;
    cfg.seed = parse_seed(c.get_string("run.seed", "42"), "run.seed");
    const std::string seed_text = std::to_string(cfg.seed);

    cfg.adapter = resolve(c.get_string("data.adapter", ""), base_dir);
    cfg.input = resolve(c.get_string("data.input", ""), base_dir);
    cfg.label_table = resolve(c.get_string("data.labels", ""), base_dir);

    cfg.mode = preprocess::parse_mode(c.get_string("preprocess.mode", "re"));
    cfg.masking = resolve(c.get_string("preprocess.rules", ""), base_dir);

    cfg.group = parse_group_method(c.get_string("group.method", "window"));
    cfg.window.window_size = c.get_int("group.window_size", cfg.window.window_size);
    cfg.window.step = c.get_int("group.step", cfg.window.step);
    cfg.window.tail = grouping::parse_tail_policy(c.get_string("group.tail", "drop"));
    if (cfg.group == GroupMethod::window) cfg.window.validate();

    cfg.split.mode = datasetprep::parse_split_mode(c.get_string("split.mode", "random"));
    cfg.split.ratio = c.get_double("split.ratio", cfg.split.ratio);
    cfg.split.seed = parse_seed(c.get_string("split.seed", seed_text), "split.seed");
    if (!(cfg.split.ratio > 0.0 && cfg.split.ratio < 1.0)) throw ConfigError("split.ratio must lie in (0, 1)");

    cfg.beta = c.get_double("oversample.beta", cfg.beta);
    if (!(cfg.beta >= 0.0 && cfg.beta < 1.0)) throw ConfigError("oversample.beta must lie in [0, 1)");

    training::StagePlan plan_base;
    plan_base.seed = parse_seed(c.get_string("train.seed", seed_text), "train.seed");
    cfg.plan = training::read_stage_plan(c, plan_base);
    cfg.plan.validate();

    model::ModelConfig model_base;
    model_base.init_seed = parse_seed(c.get_string("model.init_seed", seed_text), "model.init_seed");
    cfg.model = model::read_model_config(c, model_base);
    if (!cfg.model.pretrained_dir.empty()) cfg.model.pretrained_dir = resolve(cfg.model.pretrained_dir, base_dir).string();

    const long long eval_batch = c.get_int("eval.batch_size", 16);
    if (eval_batch <= 0) throw ConfigError("eval.batch_size must be positive");
    cfg.eval_batch_size = static_cast<std::size_t>(eval_batch);
    cfg.out_dir = resolve(c.get_string("output.dir", "runs/default"), base_dir);
    return cfg;
}

KeyValueConfig ExperimentConfig::resolved() const {
    KeyValueConfig c;
    c.set("run.seed", std::to_string(seed));
    c.set("data.adapter", adapter.string());
    c.set("data.input", input.string());
    c.set("data.labels", label_table.string());
    c.set("preprocess.mode", std::string(preprocess::to_string(mode)));
    c.set("preprocess.rules", masking.string());
    c.set("group.method", std::string(to_string(group)));
    c.set("group.window_size", std::to_string(window.window_size));
    c.set("group.step", std::to_string(window.step));
    c.set("group.tail", std::string(grouping::to_string(window.tail)));
    c.set("split.mode", std::string(datasetprep::to_string(split.mode)));
    c.set("split.ratio", num(split.ratio));
    c.set("split.seed", std::to_string(split.seed));
    c.set("oversample.beta", num(beta));
    c.set("oversample.seed", std::to_string(seed));
    training::write_stage_plan(plan, c);
    model::write_model_config(model, c);
    c.set("eval.batch_size", std::to_string(eval_batch_size));
    c.set("output.dir", out_dir.string());
    return c;
}

ExperimentConfig load_experiment(const std::optional<fs::path>& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides) {
    KeyValueConfig c;
    if (path) {
        if (!fs::exists(*path)) throw ConfigError("config file not found: " + path->string());
        c = KeyValueConfig::load(*path);
    }
    if (const char* env = std::getenv("LOGLLM_SEED"); env != nullptr && *env != '\0') {
        for (const auto& [k, v] : seed_overrides(parse_seed(env, "LOGLLM_SEED"))) c.set(k, v);
    }
    for (const auto& [k, v] : overrides) c.set(k, v);
    return parse_experiment(c, fs::current_path());
}

fs::path prepared_dir(const ExperimentConfig& cfg) { return cfg.out_dir / "prepared"; }

PrepareResult cmd_prepare(const ExperimentConfig& cfg) {
    if (cfg.input.empty()) throw ConfigError("data.input is not set");
    if (cfg.adapter.empty()) throw ConfigError("data.adapter is not set");

    const ingest::Adapter adapter = with_stage("ingest", [&] { return ingest::Adapter(ingest::load_adapter_spec(cfg.adapter)); });
    const preprocess::MaskingRuleSet masker = with_stage("preprocess", [&] {
        if (cfg.masking.empty()) return preprocess::default_rule_set(cfg.mode);
        auto from_file = preprocess::compile_rules(read_text_file(cfg.masking));
        return preprocess::compile_rules(from_file.rules(), cfg.mode);
    });

    const fs::path dir = prepared_dir(cfg);
    fs::create_directories(dir);

    std::vector<grouping::LogSequence> sequences;
    ingest::IngestReport report;
    std::ofstream rejects(dir / "rejects.jsonl");
    auto on_reject = [&](ingest::ParseReject&& r) { rejects << ingest::reject_to_json_line(r) << '\n'; };

    if (cfg.group == GroupMethod::window) {
        grouping::WindowGrouper grouper(cfg.window, [&](grouping::LogSequence&& s) { sequences.push_back(std::move(s)); });
        report = with_stage("ingest", [&] {
            return ingest::for_each_record(
                cfg.input, adapter,
                [&](ingest::LogRecord&& rec) {
                    rec.content = masker.mask(rec.content);
                    with_stage("group", [&] { grouper.push(rec); });
                },
                on_reject);
        });
        with_stage("group", [&] { grouper.finish(); });
    } else {
        if (cfg.label_table.empty()) throw ConfigError("group: session grouping needs data.labels");
        const auto labels = with_stage("group", [&] { return ingest::load_label_table(cfg.label_table); });
        grouping::SessionGrouper grouper(labels);
        report = with_stage("ingest", [&] {
            return ingest::for_each_record(
                cfg.input, adapter,
                [&](ingest::LogRecord&& rec) {
                    rec.content = masker.mask(rec.content);
                    with_stage("group", [&] { grouper.push(rec); });
                },
                on_reject);
        });
        sequences = with_stage("group", [&] { return grouper.finish(); });
    }
    rejects.close();
    spdlog::info("ingest: {} lines, {} parsed, {} rejected; {} sequences", report.total, report.parsed,
                 report.rejected, sequences.size());

    PrepareResult result;
    result.dir = dir;
    result.sequences = sequences.size();
    auto parts = with_stage("split", [&] { return datasetprep::split(std::move(sequences), cfg.split); });
    write_sequences(dir / "train_base.jsonl", parts.train);
    write_sequences(dir / "test.jsonl", parts.test);

    nlohmann::ordered_json manifest;
    manifest["ingest"] = {{"lines", report.total}, {"parsed", report.parsed}, {"rejected", report.rejected}};
    manifest["grouping"] = {{"method", std::string(to_string(cfg.group))},
                            {"window_size", cfg.window.window_size},
                            {"step", cfg.window.step},
                            {"tail", std::string(grouping::to_string(cfg.window.tail))}};
    manifest["preprocess"] = std::string(preprocess::to_string(cfg.mode));
    manifest["sequences"] = result.sequences;
    manifest["split"] = {{"mode", std::string(datasetprep::to_string(cfg.split.mode))},
                         {"ratio", cfg.split.ratio},
                         {"seed", cfg.split.seed}};
    label_count_json(parts.train, manifest["train_before_oversampling"]);
    label_count_json(parts.test, manifest["test"]);

    datasetprep::OversampleReport os;
    auto train = with_stage("oversample", [&] {
        return datasetprep::oversample_minority(std::move(parts.train), cfg.beta, cfg.seed, &os);
    });
    write_sequences(dir / "train.jsonl", train);
    label_count_json(train, manifest["train"]);
    manifest["oversample"] = {{"alpha", os.alpha},
                              {"beta", os.beta},
                              {"sample_num", os.sample_num},
                              {"minority", std::string(to_string(os.minority))},
                              {"minority_before", os.minority_before},
                              {"minority_after", os.minority_after},
                              {"total_after", os.total_after},
                              {"applied", os.applied},
                              {"seed", cfg.seed}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    write_text_file(dir / "ingest_report.json", report.to_json_line() + "\n");
    write_resolved(cfg, dir);

    result.train = train.size();
    result.test = parts.test.size();
    result.oversample = os;
    return result;
}

namespace {

std::vector<grouping::LogSequence> read_prepared(const ExperimentConfig& cfg, const std::string& name) {
    const fs::path path = prepared_dir(cfg) / name;
    if (!fs::exists(path)) {
        throw DataError("prepared dataset not found: " + path.string() + " (run prepare first)");
    }
    return read_sequences(path);
}

std::string step_json(const training::StepRecord& rec) {
    nlohmann::ordered_json j;
    j["stage"] = rec.stage;
    j["step"] = rec.step;
    j["epoch"] = rec.epoch;
    j["loss"] = rec.loss;
    auto& norms = j["grad_norm"];
    for (std::size_t i = 0; i < training::kGroupCount; ++i) {
        norms[std::string(model::to_string(model::kAllGroups[i]))] = rec.grad_norms[i];
    }
    return j.dump();
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string summary_json(const training::TrainState& state) {
    nlohmann::ordered_json j;
    j["seconds"] = state.seconds;
    j["steps"] = state.step;
    auto& stages = j["stages"];
    stages = nlohmann::ordered_json::array();
    for (const auto& s : state.stages) {
        nlohmann::ordered_json st;
        st["stage"] = s.stage;
        st["steps"] = s.steps;
        st["samples"] = s.samples;
        st["epoch_losses"] = s.epoch_losses;
        st["seconds"] = s.seconds;
        for (std::size_t i = 0; i < training::kGroupCount; ++i) {
            const std::string g(model::to_string(model::kAllGroups[i]));
            st["checksum_before"][g] = hex(s.before[i]);
            st["checksum_after"][g] = hex(s.after[i]);
        }
        stages.push_back(st);
    }
    return j.dump(2) + "\n";
}

struct TrainedModel {
    model::Model model;
    training::TrainState state;
};

TrainedModel train_on(const ExperimentConfig& cfg, const std::vector<grouping::LogSequence>& train,
                      const fs::path& out_dir, bool stage_checkpoints) {
    model::Model model = with_stage("train", [&] { return training::build_model(cfg.model, train); });
    const auto data = with_stage("train", [&] { return training::encode_dataset(model, train); });
    fs::create_directories(out_dir);
    std::ofstream log(out_dir / "train_log.jsonl");
    training::TrainHooks hooks;
    hooks.on_step = [&](const training::StepRecord& rec) { log << step_json(rec) << '\n'; };
    hooks.on_stage_end = [&](int stage, model::Model& m, const training::TrainState&) {
        log.flush();
        if (stage_checkpoints) {
            model::save_checkpoint(m, out_dir / "checkpoints" / ("stage" + std::to_string(stage)),
                                   "stage" + std::to_string(stage));
        }
    };
    auto state = with_stage("train", [&] { return training::run_training(data, cfg.plan, model, hooks); });
    model::save_checkpoint(model, out_dir / "checkpoints" / "final", "final");
    write_text_file(out_dir / "train_summary.json", summary_json(state));
    return {std::move(model), std::move(state)};
}

} // namespace

TrainResult cmd_train(const ExperimentConfig& cfg) {
    const auto train = with_stage("train", [&] { return read_prepared(cfg, "train.jsonl"); });
    write_resolved(cfg, cfg.out_dir);
    auto trained = train_on(cfg, train, cfg.out_dir, true);
    TrainResult result;
    result.state = std::move(trained.state);
    result.final_checkpoint = cfg.out_dir / "checkpoints" / "final";
    result.train_sequences = train.size();
    return result;
}

namespace {

void write_predictions(const std::vector<grouping::LogSequence>& test, const eval::Evaluation& ev,
                       const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    for (std::size_t i = 0; i < test.size(); ++i) {
        nlohmann::ordered_json j;
        j["id"] = test[i].id;
        j["label"] = std::string(to_string(test[i].label));
        j["verdict"] = std::string(model::to_string(ev.verdicts[i].label));
        j["answer"] = ev.verdicts[i].raw_text;
        out << j.dump() << '\n';
    }
}

} // namespace

eval::MetricsReport cmd_evaluate(const ExperimentConfig& cfg, const std::optional<fs::path>& checkpoint) {
    const fs::path ckpt = checkpoint ? *checkpoint : cfg.out_dir / "checkpoints" / "final";
    const auto manifest = with_stage("evaluate", [&] { return model::read_manifest(ckpt); });
    with_stage("evaluate", [&] { model::check_compatible(manifest, cfg.model); });
    const auto model = with_stage("evaluate", [&] { return model::load_checkpoint(ckpt); });
    const auto test = with_stage("evaluate", [&] { return read_prepared(cfg, "test.jsonl"); });
    const auto ev = with_stage("evaluate", [&] { return eval::evaluate(model, test, cfg.eval_batch_size); });
    const fs::path dir = cfg.out_dir / "eval";
    eval::write_report(ev.report, dir);
    write_predictions(test, ev, dir / "predictions.jsonl");
    write_resolved(cfg, dir);
    spdlog::info("evaluate: precision {} recall {} f1 {} ({} undecided)", eval::format_metric(ev.report.precision),
                 eval::format_metric(ev.report.recall), eval::format_metric(ev.report.f1), ev.report.undecided);
    return ev.report;
}

std::vector<eval::SweepRow> cmd_sweep_beta(const ExperimentConfig& cfg, const std::vector<double>& betas) {
    if (betas.empty()) throw ConfigError("sweep-beta: empty beta list");
    for (double b : betas) {
        if (!(b >= 0.0 && b < 1.0)) throw ConfigError("sweep-beta: beta " + short_num(b) + " is outside [0, 1)");
    }
    const auto base = with_stage("sweep-beta", [&] { return read_prepared(cfg, "train_base.jsonl"); });
    const auto test = with_stage("sweep-beta", [&] { return read_prepared(cfg, "test.jsonl"); });
    const fs::path root = cfg.out_dir / "sweep";
    write_resolved(cfg, root);

    std::vector<eval::SweepRow> rows;
    for (double beta : betas) {
        ExperimentConfig run = cfg;
        run.beta = beta;
        const fs::path dir = root / ("beta_" + short_num(beta));
        auto train = with_stage("oversample", [&] { return datasetprep::oversample_minority(base, beta, cfg.seed); });
        spdlog::info("sweep-beta: beta {} with {} training sequences", short_num(beta), train.size());
        write_resolved(run, dir);
        auto trained = train_on(run, train, dir, false);
        auto ev = with_stage("evaluate", [&] { return eval::evaluate(trained.model, test, cfg.eval_batch_size); });
        eval::write_report(ev.report, dir / "eval");
        eval::SweepRow row;
        row.beta = beta;
        row.report = ev.report;
        row.train_seconds = trained.state.seconds;
        row.train_sequences = train.size();
        rows.push_back(row);
    }
    write_text_file(root / "sweep.csv", eval::sweep_csv(rows));
    std::ofstream jl(root / "sweep.jsonl");
    for (const auto& row : rows) {
        auto j = nlohmann::ordered_json::parse(eval::report_json_line(row.report));
        j["beta"] = row.beta;
        j["train_seconds"] = row.train_seconds;
        j["train_sequences"] = row.train_sequences;
        jl << j.dump() << '\n';
    }
    return rows;
}

} // namespace logllm::pipeline
