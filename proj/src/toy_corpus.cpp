#include "logllm/toy_corpus.hpp"

#include "logllm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace logllm::toy {

// Placeholders: {n} small number, {b} large number, {h} hex address,
// {ip} IPv4 address with port, {p} path, {blk} block id.
const std::vector<std::string>& normal_templates() {
    static const std::vector<std::string> t{
        "instruction cache parity error corrected",
        "generating core.{n}",
        "{n} double-hummer alignment exceptions",
        "CE sym {n}, at {h}, mask {h}",
        "ciod: generated {n} core files for program {p}",
        "total of {n} ddr error(s) detected and corrected",
        "data cache search parity error detected. attempting to correct",
        "idoproxydb hit ASSERT condition: ASSERT expression=0 Source file=idotransportmgr.cpp Source line={n}",
        "ciod: Message code {n} is not {n} or {n}",
        "program interrupt: fp cr update field.............{n}",
        "ddr: activating redundant bit steering: rank={n} symbol={n}",
        "MidplaneSwitchController performing bit sparing on {p} bit {n}",
        "NFS Mount of {p} succeeded on {ip}",
        "Starting SystemController on {ip}",
        "Node card VPD check: {p} node in processor card slot {n} do not match",
        "shutdown complete for node {h}",
        "floating point alignment exceptions: {n}",
        "ciod: LOGIN chdir({p}) succeeded",
        "memory manager: allocated {b} bytes at {h}",
        "external input interrupt (unit={h} bit={n}): uncorrectable torus error",
        "job {b} started on partition {p}",
        "job {b} completed with exit status {n}",
        "ciod: ReadToolBlocks for {blk} succeeded",
        "torus receiver z+ input pipe error(s) (dcr {h}) detected and corrected",
        "{n} torus sender x+ retransmission error(s) (dcr {h}) detected and corrected",
        "CHECK_INITIAL_GLOBAL_INTERRUPT_VALUES",
        "critical input interrupt (unit={h} bit={n}): warning for torus z- wire",
        "ciod: pollControlDescriptors: Detected the debugger died.",
    };
    return t;
}

const std::vector<std::string>& failure_templates() {
    static const std::vector<std::string> t{
        "data TLB error interrupt",
        "machine check interrupt (bit={h}): L2 dcache unit data parity error",
        "rts panic! - stopping execution",
        "ciod: failed to read message prefix on control stream (CioStream socket to {ip})",
        "Lustre mount FAILED : {p} : block_id : location",
        "kernel panic: segmentation fault in memory manager at {h}",
        "rts internal error: kernel terminated for reason {n}",
        "Error receiving packet on tree network, expecting type {n} instead of type {n}",
        "node card is not fully functional: power module {p} is not accessible",
        "ciod: Error loading {p}: invalid or missing program image, Exec format error",
    };
    return t;
}

namespace {

const char* const kNodes[] = {"R02-M1-N0-C:J12-U11", "R23-M0-NE-C:J05-U01", "R30-M0-N9-C:J16-U01",
                              "R63-M0-N6-C:J05-U11", "R71-M1-N4-C:J03-U01", "R14-M1-N2-C:J08-U01"};
const char* const kPaths[] = {"/p/gb1/stella/RAPTOR/2183/RAPTOR", "/home/jdoe/run", "/bgl/BlueLight/ppcfloor/bglsys",
                              "/g/g0/app/bin/sweep3d", "/p/gb2/data/set", "/usr/local/lib/libmpi.so"};
const char* const kFailureTags[] = {"KERNDTLB", "KERNMC", "KERNRTSP", "APPREAD", "KERNMNTF", "KERNPAN",
                                    "KERNTERM", "KERNRECV", "MONNULL", "APPLOAD"};

class Filler {
public:
    explicit Filler(std::mt19937_64& rng) : rng_(rng) {}

    std::string fill(const std::string& tmpl) {
        std::string out;
        out.reserve(tmpl.size() + 32);
        for (std::size_t i = 0; i < tmpl.size();) {
            if (tmpl[i] == '{') {
                const auto close = tmpl.find('}', i);
                const std::string key = tmpl.substr(i + 1, close - i - 1);
                out += value(key);
                i = close + 1;
            } else {
                out += tmpl[i++];
            }
        }
        return out;
    }

private:
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
    }

    std::string value(const std::string& key) {
        char buf[64];
        if (key == "n") return std::to_string(uniform(0, 4096));
        if (key == "b") return std::to_string(uniform(100000, 999999999));
        if (key == "h") {
            std::snprintf(buf, sizeof(buf), "0x%08llx", static_cast<unsigned long long>(uniform(0, 0xffffffffULL)));
            return buf;
        }
        if (key == "ip") {
            std::snprintf(buf, sizeof(buf), "172.16.%llu.%llu:%llu", static_cast<unsigned long long>(uniform(0, 255)),
                          static_cast<unsigned long long>(uniform(1, 254)),
                          static_cast<unsigned long long>(uniform(1024, 65535)));
            return buf;
        }
        if (key == "p") return kPaths[uniform(0, std::size(kPaths) - 1)];
        if (key == "blk") return "blk_" + std::to_string(uniform(1, 9999999999ULL));
        throw ConfigError("unknown toy template placeholder {" + key + "}");
    }

    std::mt19937_64& rng_;
};

} // namespace

ToyCorpusStats generate_toy_corpus(const ToyCorpusSpec& spec, std::ostream& out) {
    if (spec.windows <= 0 || spec.window_size <= 0) throw ConfigError("toy corpus needs positive window counts");
    if (!(spec.anomaly_rate >= 0.0 && spec.anomaly_rate <= 1.0)) throw ConfigError("anomaly_rate must lie in [0, 1]");
    if (spec.min_failures < 1 || spec.max_failures < spec.min_failures || spec.max_failures > spec.window_size) {
        throw ConfigError("toy failure counts must satisfy 1 <= min <= max <= window_size");
    }
    std::mt19937_64 rng(spec.seed);
    Filler filler(rng);
    const auto& normal = normal_templates();
    const auto& failure = failure_templates();

    const auto anomalous_count = static_cast<std::int64_t>(std::llround(spec.anomaly_rate * static_cast<double>(spec.windows)));
    std::vector<std::int64_t> order(static_cast<std::size_t>(spec.windows));
    std::iota(order.begin(), order.end(), std::int64_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> anomalous(static_cast<std::size_t>(spec.windows), 0);
    for (std::int64_t i = 0; i < anomalous_count; ++i) anomalous[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

    ToyCorpusStats stats;
    stats.anomalous_windows = anomalous_count;
    std::int64_t timestamp = 1117838570;
    std::vector<char> is_failure(static_cast<std::size_t>(spec.window_size));
    for (std::int64_t w = 0; w < spec.windows; ++w) {
        std::fill(is_failure.begin(), is_failure.end(), 0);
        if (anomalous[static_cast<std::size_t>(w)]) {
            const int k = static_cast<int>(std::uniform_int_distribution<int>(spec.min_failures, spec.max_failures)(rng));
            std::vector<std::int64_t> slots(static_cast<std::size_t>(spec.window_size));
            std::iota(slots.begin(), slots.end(), std::int64_t{0});
            std::shuffle(slots.begin(), slots.end(), rng);
            for (int i = 0; i < k; ++i) is_failure[static_cast<std::size_t>(slots[static_cast<std::size_t>(i)])] = 1;
        }
        for (std::int64_t j = 0; j < spec.window_size; ++j) {
            timestamp += static_cast<std::int64_t>(std::uniform_int_distribution<int>(0, 3)(rng));
            const char* node = kNodes[std::uniform_int_distribution<std::size_t>(0, std::size(kNodes) - 1)(rng)];
            std::string tag = "-";
            std::string level = "INFO";
            std::string content;
            if (is_failure[static_cast<std::size_t>(j)]) {
                const std::size_t f = std::uniform_int_distribution<std::size_t>(0, failure.size() - 1)(rng);
                tag = kFailureTags[f];
                level = "FATAL";
                content = filler.fill(failure[f]);
                ++stats.failure_lines;
            } else {
                content = filler.fill(normal[std::uniform_int_distribution<std::size_t>(0, normal.size() - 1)(rng)]);
            }
            out << tag << ' ' << timestamp << " 2005.06.03 " << node << " 2005-06-03-15.42.50.675872 " << node
                << " RAS KERNEL " << level << ' ' << content << '\n';
            ++stats.lines;
        }
    }
    return stats;
}

ToyCorpusStats generate_toy_corpus(const ToyCorpusSpec& spec, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write toy corpus to " + path.string());
    auto stats = generate_toy_corpus(spec, out);
    if (!out) throw DataError("failed writing toy corpus to " + path.string());
    return stats;
}

} // namespace logllm::toy
