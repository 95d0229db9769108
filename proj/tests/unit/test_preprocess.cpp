#include "helpers.hpp"

#include "logllm/errors.hpp"
#include "logllm/ingest.hpp"
#include "logllm/preprocess.hpp"
#include "logllm/records.hpp"
#include "logllm/toy_corpus.hpp"

#include <doctest.h>

#include <sstream>

using namespace logllm;
using namespace logllm::preprocess;

namespace {

// Contents of 1,000 toy-corpus lines followed by the hand-labeled corpora.
std::vector<std::string> corpus_contents() {
    toy::ToyCorpusSpec spec;
    spec.windows = 50;
    spec.window_size = 20;
    spec.seed = 3;
    std::ostringstream os;
    toy::generate_toy_corpus(spec, os);
    ingest::Adapter bgl(ingest::load_adapter_spec(test_support::config_dir() / "adapters" / "bgl.ini"));
    std::vector<std::string> out;
    std::istringstream is(os.str());
    std::int64_t n = 0;
    for (std::string line; std::getline(is, line);) {
        auto r = ingest::parse_log_line(line, bgl, ++n);
        REQUIRE(std::holds_alternative<ingest::LogRecord>(r));
        out.push_back(std::get<ingest::LogRecord>(r).content);
    }
    for (const auto& line : test_support::read_lines(test_support::data_dir() / "bgl_selftest.log")) {
        out.push_back(std::get<ingest::LogRecord>(ingest::parse_log_line(line, bgl, 1)).content);
    }
    return out;
}

} // namespace

TEST_CASE("shipped rules mask parameters") {
    const auto rules = default_rule_set();
    CHECK(rules.mode() == Mode::re);
    CHECK(rules.mask("connection from 10.0.0.1 closed") == "connection from <*> closed");
    CHECK(rules.mask("instruction cache parity error corrected") == "instruction cache parity error corrected");
    CHECK(rules.mask("CE sym 2, at 0x0b85eee0, mask 0x05") == "CE sym <*>, at <*>, mask <*>");
    CHECK(rules.mask("Received block blk_-6952295868487656571 of size 67108864 from /10.251.90.64") ==
          "Received block <*> of size <*> from /<*>");
    CHECK(rules.mask("ciod: generated 128 core files for program /home/user/bin/a.out") ==
          "ciod: generated <*> core files for program <*>");
    CHECK(rules.mask("10.251.73.220:50010 is added") == "<*> is added");
    CHECK(rules.mask("link fe80::1 down") == "link <*> down");
    CHECK(rules.mask("node R02-M1-N0 ok") == "node R02-M1-N0 ok");
}

TEST_CASE("masking is idempotent on 1,000 corpus lines") {
    const auto rules = default_rule_set();
    const auto lines = corpus_contents();
    REQUIRE(lines.size() >= 1000);
    std::size_t changed = 0;
    for (const auto& line : lines) {
        const auto once = rules.mask(line);
        CHECK(rules.mask(once) == once);
        if (once != line) ++changed;
    }
    CHECK(changed > 0);
}

TEST_CASE("raw mode is the identity") {
    const auto raw = default_rule_set(Mode::raw);
    for (const auto& line : corpus_contents()) CHECK(raw.mask(line) == line);

    auto empty = compile_rules({}, Mode::raw);
    CHECK(empty.rules().empty());
    CHECK(empty.mask("x 10.0.0.1") == "x 10.0.0.1");
}

TEST_CASE("rule compilation errors") {
    CHECK_THROWS_AS(compile_rules({{"everything", ".*"}}, Mode::re), ConfigError);
    CHECK_THROWS_AS(compile_rules({{"star", "\\*"}}, Mode::re), ConfigError);
    try {
        compile_rules({{"broken_rule", "(unclosed"}}, Mode::re);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("broken_rule") != std::string::npos);
    }
    // Not idempotent: digits become "N1", which the rule matches again.
    CHECK_THROWS_AS(compile_rules({{"n", "\\d+", "N1"}}, Mode::re), ConfigError);
}

TEST_CASE("rules keep config order and earlier rules win") {
    auto set = compile_rules("mode = re\n[rules]\nfirst = ab\nsecond = b+\n");
    REQUIRE(set.rules().size() == 2);
    CHECK(set.rules()[0].name == "first");
    CHECK(set.rules()[1].name == "second");
    CHECK(set.mask("abbb") == "<*><*>");

    auto swapped = compile_rules("mode = re\n[rules]\nsecond = b+\nfirst = ab\n");
    CHECK(swapped.mask("abbb") == "a<*>");
}

TEST_CASE("shipped config file matches the built-in defaults") {
    const auto text = read_text_file(test_support::config_dir() / "masking" / "default.ini");
    CHECK(text == default_rules_config());
    const auto from_file = compile_rules(text);
    const auto builtin = default_rule_set();
    REQUIRE(from_file.rules().size() == builtin.rules().size());
    for (const auto& line : corpus_contents()) CHECK(from_file.mask(line) == builtin.mask(line));
}

TEST_CASE("mode names") {
    CHECK(parse_mode("re") == Mode::re);
    CHECK(parse_mode("raw") == Mode::raw);
    CHECK_THROWS_AS(parse_mode("template"), ConfigError);
}
