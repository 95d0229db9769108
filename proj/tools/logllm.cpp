// Command-line entry point: prepare, train, evaluate, sweep-beta, gen-toy.

#include "logllm/errors.hpp"
#include "logllm/pipeline.hpp"
#include "logllm/toy_corpus.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct CommonFlags {
    std::optional<std::string> config;
    std::optional<std::string> preprocess;
    std::optional<std::string> group;
    std::optional<long long> window_size;
    std::optional<long long> step;
    std::optional<std::string> tail;
    std::optional<std::string> split;
    std::optional<double> ratio;
    std::optional<double> beta;
    std::optional<unsigned long long> seed;
    std::vector<int> skip_stages;
    std::optional<std::string> backbone;
    std::optional<std::string> out;

    void attach(CLI::App& cmd) {
        cmd.add_option("--config", config, "experiment config file");
        cmd.add_option("--preprocess", preprocess, "masking mode")->check(CLI::IsMember({"re", "raw"}));
        cmd.add_option("--group", group, "grouping method")->check(CLI::IsMember({"window", "session"}));
        cmd.add_option("--window-size", window_size, "messages per window");
        cmd.add_option("--step", step, "window step");
        cmd.add_option("--tail", tail, "short tail policy")->check(CLI::IsMember({"drop", "emit_short"}));
        cmd.add_option("--split", split, "split mode")->check(CLI::IsMember({"random", "chronological"}));
        cmd.add_option("--ratio", ratio, "training fraction");
        cmd.add_option("--beta", beta, "target minority fraction after oversampling");
        cmd.add_option("--seed", seed, "global seed (split, oversampling, data order, init)");
        cmd.add_option("--skip-stage", skip_stages, "disable a training stage (repeatable)")
            ->check(CLI::IsMember({1, 2, 3}))
            ->allow_extra_args(false);
        cmd.add_option("--backbone", backbone, "model backbone")->check(CLI::IsMember({"tiny", "pretrained"}));
        cmd.add_option("--out", out, "output directory");
    }

    Overrides overrides() const {
        Overrides o;
        auto put = [&](const char* key, const auto& value) {
            if (value) {
                std::ostringstream os;
                os.precision(17);
                os << *value;
                o.emplace_back(key, os.str());
            }
        };
        put("preprocess.mode", preprocess);
        put("group.method", group);
        put("group.window_size", window_size);
        put("group.step", step);
        put("group.tail", tail);
        put("split.mode", split);
        put("split.ratio", ratio);
        put("oversample.beta", beta);
        if (seed) {
            for (auto& kv : logllm::pipeline::seed_overrides(*seed)) o.push_back(kv);
        }
        for (int s : skip_stages) o.emplace_back("stage" + std::to_string(s) + ".enabled", "false");
        put("model.backbone", backbone);
        put("output.dir", out);
        return o;
    }

    logllm::pipeline::ExperimentConfig load() const {
        std::optional<std::filesystem::path> path;
        if (config) path = *config;
        return logllm::pipeline::load_experiment(path, overrides());
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Log anomaly detection with a message encoder and a prompted decoder"};
    app.require_subcommand(1);

    CommonFlags prepare_flags, train_flags, eval_flags, sweep_flags;
    auto* prepare = app.add_subcommand("prepare", "ingest, mask, group, split and oversample a log file");
    prepare_flags.attach(*prepare);

    auto* train = app.add_subcommand("train", "run the staged training plan on a prepared dataset");
    train_flags.attach(*train);

    auto* evaluate = app.add_subcommand("evaluate", "score the prepared test split with a checkpoint");
    eval_flags.attach(*evaluate);
    std::optional<std::string> checkpoint;
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint directory (default: <out>/checkpoints/final)");

    auto* sweep = app.add_subcommand("sweep-beta", "train and evaluate once per oversampling target");
    sweep_flags.attach(*sweep);
    std::vector<double> betas{0.0, 0.1, 0.3, 0.5};
    sweep->add_option("--betas", betas, "beta values")->delimiter(',');

    auto* gen = app.add_subcommand("gen-toy", "write the synthetic toy benchmark log");
    logllm::toy::ToyCorpusSpec toy;
    std::string toy_out;
    gen->add_option("--out", toy_out, "output log file")->required();
    gen->add_option("--windows", toy.windows, "number of windows");
    gen->add_option("--window-size", toy.window_size, "messages per window");
    gen->add_option("--anomaly-rate", toy.anomaly_rate, "fraction of anomalous windows");
    gen->add_option("--seed", toy.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (prepare->parsed()) {
        auto r = logllm::pipeline::cmd_prepare(prepare_flags.load());
        std::cout << "prepared " << r.sequences << " sequences: " << r.train << " train, " << r.test << " test -> "
                  << r.dir.string() << '\n';
    } else if (train->parsed()) {
        auto r = logllm::pipeline::cmd_train(train_flags.load());
        std::cout << "trained " << r.state.stages.size() << " stage(s), " << r.state.step << " steps in "
                  << r.state.seconds << " s -> " << r.final_checkpoint.string() << '\n';
    } else if (evaluate->parsed()) {
        std::optional<std::filesystem::path> ckpt;
        if (checkpoint) ckpt = *checkpoint;
        auto r = logllm::pipeline::cmd_evaluate(eval_flags.load(), ckpt);
        std::cout << logllm::eval::report_csv(r);
    } else if (sweep->parsed()) {
        auto rows = logllm::pipeline::cmd_sweep_beta(sweep_flags.load(), betas);
        std::cout << logllm::eval::sweep_csv(rows);
    } else if (gen->parsed()) {
        auto s = logllm::toy::generate_toy_corpus(toy, std::filesystem::path(toy_out));
        std::cout << "wrote " << s.lines << " lines (" << s.anomalous_windows << " anomalous windows) to " << toy_out
                  << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("logllm");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%l] %v");
    try {
        return run(argc, argv);
    } catch (const logllm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const logllm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const logllm::RuntimeFailure& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 3;
    }
}
