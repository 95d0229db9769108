#include "logllm/datasetprep.hpp"
#include "logllm/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

using namespace logllm;
using namespace logllm::datasetprep;

namespace {

std::vector<LogSequence> make_set(std::int64_t normal, std::int64_t anomalous) {
    std::vector<LogSequence> out;
    for (std::int64_t i = 0; i < normal + anomalous; ++i) {
        LogSequence s;
        s.id = "s" + std::to_string(i);
        s.order_key = i;
        s.messages = {"msg " + std::to_string(i)};
        s.label = i < normal ? Label::normal : Label::anomalous;
        out.push_back(std::move(s));
    }
    return out;
}

std::map<std::string, int> id_counts(const std::vector<LogSequence>& v, Label label) {
    std::map<std::string, int> out;
    for (const auto& s : v) {
        if (s.label == label) ++out[s.id];
    }
    return out;
}

} // namespace

TEST_CASE("train size follows floor(ratio * n)") {
    CHECK(train_size(575'061, 0.8) == 460'048);
    CHECK(575'061 - train_size(575'061, 0.8) == 115'013);
    CHECK(train_size(10, 0.8) == 8);
    CHECK(train_size(2, 0.8) == 1);
    CHECK(train_size(2, 0.01) == 1);
    CHECK_THROWS_AS(train_size(10, 1.0), ConfigError);
    CHECK_THROWS_AS(train_size(10, 0.0), ConfigError);
}

TEST_CASE("chronological split puts every train sequence first") {
    auto seqs = make_set(10, 0);
    std::mt19937_64 rng(5);
    std::shuffle(seqs.begin(), seqs.end(), rng);
    auto sp = split(seqs, {0.8, SplitMode::chronological, 1});
    REQUIRE(sp.train.size() == 8);
    REQUIRE(sp.test.size() == 2);
    for (std::size_t i = 0; i < 8; ++i) CHECK(sp.train[i].order_key == static_cast<std::int64_t>(i));
    CHECK(sp.test[0].order_key == 8);
    CHECK(sp.test[1].order_key == 9);

    auto big = make_set(500, 37);
    std::shuffle(big.begin(), big.end(), rng);
    auto sp2 = split(big, {0.8, SplitMode::chronological, 1});
    std::int64_t max_train = -1;
    for (const auto& s : sp2.train) max_train = std::max(max_train, s.order_key);
    for (const auto& s : sp2.test) CHECK(s.order_key > max_train);
}

TEST_CASE("random split is a seeded partition") {
    auto seqs = make_set(90, 11);
    auto a = split(seqs, {0.8, SplitMode::random, 9});
    auto b = split(seqs, {0.8, SplitMode::random, 9});
    auto c = split(seqs, {0.8, SplitMode::random, 10});
    CHECK(a.train.size() == 80);
    CHECK(a.test.size() == 21);
    std::vector<std::string> ids_a, ids_b, ids_c;
    for (const auto& s : a.train) ids_a.push_back(s.id);
    for (const auto& s : b.train) ids_b.push_back(s.id);
    for (const auto& s : c.train) ids_c.push_back(s.id);
    CHECK(ids_a == ids_b);
    CHECK(ids_a != ids_c);

    std::vector<std::string> all;
    for (const auto& s : a.train) all.push_back(s.id);
    for (const auto& s : a.test) all.push_back(s.id);
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all.size() == seqs.size());

    CHECK_THROWS_AS(split(make_set(1, 0), {}), DataError);
    CHECK_THROWS_AS(split({}, {}), DataError);
}

TEST_CASE("oversampling example from the quantity formula") {
    // alpha = 0.1, beta = 0.3, 1000 samples: 0.3 * 0.9 / 0.7 * 1000 = 385.71 -> 386
    CHECK(oversample_target(0.1, 0.3, 1000) == 386);
    OversampleReport rep;
    auto out = oversample_minority(make_set(900, 100), 0.3, 4, &rep);
    CHECK(rep.applied);
    CHECK(rep.alpha == doctest::Approx(0.1));
    CHECK(rep.minority_before == 100);
    CHECK(rep.minority_after == 386);
    CHECK(rep.total_after == 1286);
    CHECK(out.size() == 1286);
    const auto anomalous = std::count_if(out.begin(), out.end(), [](auto& s) { return s.label == Label::anomalous; });
    CHECK(anomalous == 386);
    CHECK(static_cast<double>(anomalous) / 1286.0 == doctest::Approx(0.3002).epsilon(1e-3));
}

TEST_CASE("oversampling no-ops") {
    auto base = make_set(60, 40);
    SUBCASE("beta = 0") {
        OversampleReport rep;
        auto out = oversample_minority(base, 0.0, 1, &rep);
        CHECK_FALSE(rep.applied);
        REQUIRE(out.size() == base.size());
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].id == base[i].id);
    }
    SUBCASE("minority already above beta") {
        OversampleReport rep;
        auto out = oversample_minority(base, 0.3, 1, &rep);
        CHECK_FALSE(rep.applied);
        CHECK(rep.minority_after == 40);
        REQUIRE(out.size() == base.size());
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].id == base[i].id);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(oversample_minority(base, 1.0, 1), ConfigError);
        CHECK_THROWS_AS(oversample_minority(base, -0.1, 1), ConfigError);
        CHECK_THROWS_AS(oversample_minority(make_set(50, 0), 0.3, 1), DataError);
        CHECK_NOTHROW(oversample_minority(make_set(50, 0), 0.0, 1));
    }
}

TEST_CASE("oversampling property over 200 random triples") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> size(20, 3000);
    int checked = 0;
    while (checked < 200) {
        const std::int64_t n = size(rng);
        const double alpha_req = 0.005 + 0.49 * unit(rng);
        const std::int64_t minority = std::max<std::int64_t>(1, std::llround(alpha_req * static_cast<double>(n)));
        if (minority * 2 > n) continue;
        const double alpha = static_cast<double>(minority) / static_cast<double>(n);
        const double beta = alpha + (0.95 - alpha) * unit(rng);
        if (beta <= alpha) continue;
        ++checked;

        const auto base = make_set(n - minority, minority);
        OversampleReport rep;
        const auto out = oversample_minority(base, beta, rng(), &rep);

        // independent counting oracle
        std::int64_t counted_minority = 0;
        for (const auto& s : out) counted_minority += s.label == Label::anomalous ? 1 : 0;
        const auto total_after = static_cast<std::int64_t>(out.size());
        CAPTURE(n);
        CAPTURE(alpha);
        CAPTURE(beta);
        CHECK(std::abs(static_cast<double>(counted_minority) / static_cast<double>(total_after) - beta) <=
              1.0 / static_cast<double>(total_after));
        CHECK(rep.minority_after == counted_minority);
        CHECK(rep.total_after == total_after);

        // duplicates come from the original minority; the majority is untouched
        const auto before_min = id_counts(base, Label::anomalous);
        for (const auto& [id, count] : id_counts(out, Label::anomalous)) {
            REQUIRE(before_min.count(id) == 1);
            CHECK(count >= 1);
        }
        CHECK(id_counts(out, Label::normal) == id_counts(base, Label::normal));
    }
}

TEST_CASE("oversampling is deterministic per seed") {
    auto base = make_set(500, 20);
    auto a = oversample_minority(base, 0.3, 77);
    auto b = oversample_minority(base, 0.3, 77);
    auto c = oversample_minority(base, 0.3, 78);
    REQUIRE(a.size() == b.size());
    bool same_c = a.size() == c.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        if (same_c && a[i].id != c[i].id) same_c = false;
    }
    CHECK_FALSE(same_c);
}

TEST_CASE("split mode names") {
    CHECK(parse_split_mode("random") == SplitMode::random);
    CHECK(parse_split_mode("chronological") == SplitMode::chronological);
    CHECK_THROWS_AS(parse_split_mode("temporal"), ConfigError);
}
