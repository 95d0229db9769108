#include "logllm/errors.hpp"
#include "logllm/grouping.hpp"

#include <doctest.h>

#include <random>

using namespace logllm;
using namespace logllm::grouping;
using ingest::LogRecord;

namespace {

std::vector<LogRecord> make_records(std::int64_t n, const std::vector<std::int64_t>& anomalous = {}) {
    std::vector<LogRecord> out;
    for (std::int64_t i = 0; i < n; ++i) {
        LogRecord r;
        r.index = i;
        r.line_number = i + 1;
        r.content = "m" + std::to_string(i);
        r.message_label = Label::normal;
        out.push_back(r);
    }
    for (auto i : anomalous) out[static_cast<std::size_t>(i)].message_label = Label::anomalous;
    return out;
}

struct Window {
    std::int64_t start;
    std::int64_t length;
};

// Enumerates window starts 0, step, 2*step, ... directly from the definition.
std::vector<Window> enumerate_windows(std::int64_t n, std::int64_t size, std::int64_t step, bool emit_short) {
    std::vector<Window> out;
    for (std::int64_t start = 0; start < n; start += step) {
        const std::int64_t len = std::min(size, n - start);
        if (len == size || emit_short) out.push_back({start, len});
    }
    return out;
}

} // namespace

TEST_CASE("window count agrees with brute-force enumeration") {
    for (std::int64_t n = 0; n <= 50; ++n) {
        for (std::int64_t w = 1; w <= 10; ++w) {
            for (std::int64_t s = 1; s <= 10; ++s) {
                for (bool emit_short : {false, true}) {
                    WindowSpec spec{w, s, emit_short ? TailPolicy::emit_short : TailPolicy::drop};
                    const auto expected = enumerate_windows(n, w, s, emit_short);
                    CAPTURE(n);
                    CAPTURE(w);
                    CAPTURE(s);
                    CAPTURE(emit_short);
                    REQUIRE(window_count(n, spec) == static_cast<std::int64_t>(expected.size()));
                    if (!emit_short && n >= w) REQUIRE(window_count(n, spec) == (n - w) / s + 1);
                }
            }
        }
    }
}

TEST_CASE("grouped windows match the enumeration member by member") {
    for (std::int64_t n : {0, 1, 7, 19, 33}) {
        const auto records = make_records(n);
        for (std::int64_t w = 1; w <= 6; ++w) {
            for (std::int64_t s = 1; s <= 6; ++s) {
                for (bool emit_short : {false, true}) {
                    WindowSpec spec{w, s, emit_short ? TailPolicy::emit_short : TailPolicy::drop};
                    const auto seqs = group_by_window(records, spec);
                    const auto expected = enumerate_windows(n, w, s, emit_short);
                    REQUIRE(seqs.size() == expected.size());
                    for (std::size_t k = 0; k < seqs.size(); ++k) {
                        REQUIRE(static_cast<std::int64_t>(seqs[k].messages.size()) == expected[k].length);
                        CHECK(seqs[k].order_key == expected[k].start);
                        for (std::int64_t j = 0; j < expected[k].length; ++j) {
                            CHECK(seqs[k].messages[static_cast<std::size_t>(j)] ==
                                  "m" + std::to_string(expected[k].start + j));
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("window examples") {
    SUBCASE("exact partition") {
        auto seqs = group_by_window(make_records(10), {2, 2, TailPolicy::drop});
        CHECK(seqs.size() == 5);
        for (const auto& s : seqs) CHECK(s.messages.size() == 2);
    }
    SUBCASE("short tail") {
        auto seqs = group_by_window(make_records(7), {3, 2, TailPolicy::emit_short});
        REQUIRE(seqs.size() == 4);
        const std::int64_t starts[] = {0, 2, 4, 6};
        const std::size_t lengths[] = {3, 3, 3, 1};
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(seqs[i].order_key == starts[i]);
            CHECK(seqs[i].messages.size() == lengths[i]);
        }
    }
    SUBCASE("five million records in windows of one hundred") {
        CHECK(window_count(5'000'000, {100, 100, TailPolicy::drop}) == 50'000);
    }
    SUBCASE("coverage of the dropped-tail prefix") {
        const std::int64_t n = 23, w = 5, s = 3;
        auto seqs = group_by_window(make_records(n), {w, s, TailPolicy::drop});
        const std::int64_t covered_end = (static_cast<std::int64_t>(seqs.size()) - 1) * s + w;
        std::vector<int> hits(static_cast<std::size_t>(n), 0);
        for (const auto& seq : seqs) {
            for (const auto& m : seq.messages) ++hits[static_cast<std::size_t>(std::stoll(m.substr(1)))];
        }
        for (std::int64_t i = 0; i < covered_end; ++i) CHECK(hits[static_cast<std::size_t>(i)] >= 1);
    }
}

TEST_CASE("invalid window specs") {
    CHECK_THROWS_AS(window_count(10, {0, 1, TailPolicy::drop}), ConfigError);
    CHECK_THROWS_AS(window_count(10, {1, 0, TailPolicy::drop}), ConfigError);
    CHECK_THROWS_AS(group_by_window(make_records(3), {2, 0, TailPolicy::drop}), ConfigError);
    CHECK(parse_tail_policy("drop") == TailPolicy::drop);
    CHECK(parse_tail_policy("emit_short") == TailPolicy::emit_short);
    CHECK_THROWS_AS(parse_tail_policy("pad"), ConfigError);
}

TEST_CASE("window labels") {
    SUBCASE("all normal") {
        auto r = make_records(100);
        CHECK(label_window(r) == Label::normal);
    }
    SUBCASE("exactly one anomalous among 100") {
        auto r = make_records(100, {57});
        CHECK(label_window(r) == Label::anomalous);
        auto seqs = group_by_window(r, {100, 100, TailPolicy::drop});
        REQUIRE(seqs.size() == 1);
        CHECK(seqs[0].label == Label::anomalous);
    }
    SUBCASE("all anomalous") {
        std::vector<std::int64_t> all(20);
        for (std::int64_t i = 0; i < 20; ++i) all[static_cast<std::size_t>(i)] = i;
        CHECK(label_window(make_records(20, all)) == Label::anomalous);
    }
    SUBCASE("unlabeled member") {
        auto r = make_records(3);
        r[1].message_label.reset();
        CHECK_THROWS_AS(label_window(r), DataError);
        CHECK_THROWS_AS(group_by_window(r, {2, 1, TailPolicy::drop}), DataError);
    }
    SUBCASE("adding an anomalous record never flips anomalous to normal") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            auto r = make_records(10);
            for (auto& rec : r) {
                if (rng() % 4 == 0) rec.message_label = Label::anomalous;
            }
            const Label before = label_window(r);
            r[rng() % 10].message_label = Label::anomalous;
            const Label after = label_window(r);
            CHECK(after == Label::anomalous);
            if (before == Label::anomalous) CHECK(after == Label::anomalous);
        }
    }
}

TEST_CASE("window grouping rejects out-of-order records") {
    auto r = make_records(4);
    std::swap(r[1], r[2]);
    CHECK_THROWS_AS(group_by_window(r, {2, 2, TailPolicy::drop}), DataError);
}

TEST_CASE("session grouping") {
    auto rec = [](std::int64_t i, std::string key) {
        LogRecord r;
        r.index = i;
        r.content = "c" + std::to_string(i);
        r.session_key = std::move(key);
        return r;
    };
    const SessionLabelTable table{{"blk_A", Label::anomalous}, {"blk_B", Label::normal}};
    std::vector<LogRecord> records{rec(0, "blk_A"), rec(1, "blk_B"), rec(2, "blk_A")};

    auto seqs = group_by_session(records, table);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].id == "blk_A");
    CHECK(seqs[0].messages == std::vector<std::string>{"c0", "c2"});
    CHECK(seqs[0].label == Label::anomalous);
    CHECK(seqs[0].order_key == 0);
    CHECK(seqs[1].id == "blk_B");
    CHECK(seqs[1].label == Label::normal);
    CHECK(seqs[1].order_key == 1);

    SUBCASE("record without a session key names its index") {
        records[1].session_key.reset();
        try {
            group_by_session(records, table);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("record 1") != std::string::npos);
        }
    }
    SUBCASE("key missing from the table is named") {
        records.push_back(rec(3, "blk_C"));
        try {
            group_by_session(records, table);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("blk_C") != std::string::npos);
        }
    }
    SUBCASE("per-message labels are rejected in session mode") {
        records[0].message_label = Label::normal;
        CHECK_THROWS_AS(group_by_session(records, table), DataError);
    }
}
