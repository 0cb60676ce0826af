#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpcpace/scenario.hpp"
#include "mpcpace/summary.hpp"
#include "mpcpace/sweep.hpp"
#include "mpcpace/version.hpp"

namespace mpcpace::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;  // I/O and other runtime failures
inline constexpr int kExitUsage = 2;    // unknown scenario, parse errors

struct RunOptions {
    std::uint64_t seed = 0;
    std::optional<double> duration{};
    std::optional<double> warmup{};
    std::string out_dir = ".";
};

inline std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Builtin scenarios cover the bundled reference experiments.
inline std::optional<Scenario> builtin_scenario(const std::string& name) {
    if (name == "single") return single_flow_scenario();
    if (name == "table1-uncapped") return table1_scenarios().first;
    if (name == "table1-capped") return table1_scenarios().second;
    if (name == "table2-uncapped") return table2_scenarios().first;
    if (name == "table2-capped") return table2_scenarios().second;
    return std::nullopt;
}

inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {
        "single", "table1-uncapped", "table1-capped", "table2-uncapped", "table2-capped", "sweep"};
    return names;
}

// Resolves a builtin name or scenario file path. Returns nullopt after
// printing a diagnostic; *exit_code holds the status.
inline std::optional<Scenario> resolve_scenario(const std::string& ref, int* exit_code) {
    if (auto sc = builtin_scenario(ref)) return sc;
    std::filesystem::path p(ref);
    if (!std::filesystem::exists(p)) {
        std::cerr << "error: unknown scenario '" << ref
                  << "' (not a builtin and no such file)\n  builtins:";
        for (const auto& n : builtin_names()) std::cerr << ' ' << n;
        std::cerr << '\n';
        *exit_code = kExitUsage;
        return std::nullopt;
    }
    std::ifstream is(p);
    if (!is) {
        std::cerr << "error: cannot open scenario file " << p << '\n';
        *exit_code = kExitRuntime;
        return std::nullopt;
    }
    try {
        nlohmann::json j = nlohmann::json::parse(is);
        return scenario_from_json(j);
    } catch (const std::exception& e) {
        std::cerr << "error: failed to parse scenario file " << p << ": " << e.what() << '\n';
        *exit_code = kExitUsage;
        return std::nullopt;
    }
}

inline nlohmann::json manifest_json(const Scenario& sc, std::uint64_t seed,
                                    const std::string& started, const std::string& finished,
                                    const std::vector<std::string>& outputs) {
    return nlohmann::json{
        {"scenario", sc.name},
        {"scenario_hash", hash_hex(scenario_hash(sc))},
        {"seed", seed},
        {"started_utc", started},
        {"finished_utc", finished},
        {"outputs", outputs},
        {"tool_version", kVersion},
    };
}

inline bool write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    os << contents;
    os.flush();
    return os.good();
}

// run: simulate one scenario, write trace CSV, summary CSV, and manifest,
// and print the summary table.
inline int cmd_run(const std::string& scenario_ref, const RunOptions& opt);

// sweep: run the buffer-size grid and write the combined summary CSV.
inline int cmd_sweep(std::vector<double> fractions, std::vector<int> flow_counts,
                     const RunOptions& opt);

inline int cmd_run(const std::string& scenario_ref, const RunOptions& opt) {
    if (scenario_ref == "sweep")
        return cmd_sweep(default_sweep_fractions(), default_sweep_flow_counts(), opt);

    int code = kExitOk;
    auto maybe = resolve_scenario(scenario_ref, &code);
    if (!maybe) return code;
    Scenario sc = *maybe;
    if (opt.duration) sc.duration = *opt.duration;
    if (opt.warmup) sc.warmup = *opt.warmup;
    if (auto err = sc.validate(); !err.empty()) {
        std::cerr << "error: invalid scenario: " << err << '\n';
        return kExitUsage;
    }

    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    const std::filesystem::path trace_path =
        std::filesystem::path(opt.out_dir) / (sc.name + "-trace.csv");
    const std::filesystem::path summary_path =
        std::filesystem::path(opt.out_dir) / (sc.name + "-summary.csv");
    const std::filesystem::path manifest_path =
        std::filesystem::path(opt.out_dir) / (sc.name + "-manifest.json");

    const std::string started = iso8601_utc(std::chrono::system_clock::now());

    std::ofstream trace_os(trace_path, std::ios::binary);
    if (!trace_os) {
        std::cerr << "error: cannot write " << trace_path << '\n';
        return kExitRuntime;
    }

    // Stream rows to disk and into the summary accumulator in one pass.
    CsvSink csv(trace_os);
    SummaryAccumulator acc(TimeWindow{sc.warmup, sc.duration});
    struct Tee : TraceSink {
        TraceSink* a;
        TraceSink* b;
        void on_record(const TraceRecord& r) override {
            a->on_record(r);
            b->on_record(r);
        }
    } tee;
    tee.a = &csv;
    tee.b = &acc;

    Trace trace;
    try {
        trace = run_scenario(sc, opt.seed, tee);
    } catch (const std::exception& e) {
        std::cerr << "error: simulation failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    trace_os.flush();
    if (!trace_os.good()) {
        std::cerr << "error: I/O failure writing " << trace_path << '\n';
        return kExitRuntime;
    }

    auto rows = acc.summaries();
    {
        std::ostringstream ss;
        write_summary_csv(rows, ss);
        if (!write_file(summary_path, ss.str())) {
            std::cerr << "error: I/O failure writing " << summary_path << '\n';
            return kExitRuntime;
        }
    }
    const std::string finished = iso8601_utc(std::chrono::system_clock::now());
    nlohmann::json manifest = manifest_json(sc, opt.seed, started, finished,
                                            {trace_path.string(), summary_path.string()});
    if (!write_file(manifest_path, manifest.dump(2) + "\n")) {
        std::cerr << "error: I/O failure writing " << manifest_path << '\n';
        return kExitRuntime;
    }

    std::cout << "scenario " << sc.name << "  seed " << opt.seed << "  duration " << sc.duration
              << "s  warmup " << sc.warmup << "s\n";
    print_summary_table(rows, std::cout);
    std::cout << "trace: " << trace_path.string() << "\nsummary: " << summary_path.string()
              << "\nmanifest: " << manifest_path.string() << '\n';
    return kExitOk;
}

inline int cmd_sweep(std::vector<double> fractions, std::vector<int> flow_counts,
                     const RunOptions& opt) {
    if (fractions.empty()) fractions = default_sweep_fractions();
    if (flow_counts.empty()) flow_counts = default_sweep_flow_counts();
    for (double f : fractions)
        if (!(f > 0.0)) {
            std::cerr << "error: fractions must be positive\n";
            return kExitUsage;
        }
    for (int n : flow_counts)
        if (n < 1) {
            std::cerr << "error: flow counts must be at least 1\n";
            return kExitUsage;
        }

    const double duration = opt.duration.value_or(60.0);
    const double warmup = opt.warmup.value_or(10.0);
    const std::string started = iso8601_utc(std::chrono::system_clock::now());

    std::vector<SweepCellResult> cells;
    std::uint64_t grid_hash = 0xcbf29ce484222325ull;
    for (int n : flow_counts) {
        for (double f : fractions) {
            Scenario sc = sweep_cell_scenario(f, n, duration, warmup);
            const std::uint64_t h = scenario_hash(sc);
            grid_hash ^= h;
            grid_hash *= 0x100000001b3ull;
            const std::uint64_t cell_seed = opt.seed ^ h;
            cells.push_back(run_sweep_cell(sc, f, n, cell_seed));
            std::cerr << "cell " << sc.name << ": median rate " << cells.back().rate.median
                      << " packets/s, median RTT " << cells.back().rtt_ms.median
                      << " ms, loss " << cells.back().loss_fraction << '\n';
        }
    }

    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    const std::filesystem::path csv_path =
        std::filesystem::path(opt.out_dir) / "sweep-summary.csv";
    const std::filesystem::path manifest_path =
        std::filesystem::path(opt.out_dir) / "sweep-manifest.json";
    {
        std::ostringstream ss;
        write_sweep_csv(cells, ss);
        if (!write_file(csv_path, ss.str())) {
            std::cerr << "error: I/O failure writing " << csv_path << '\n';
            return kExitRuntime;
        }
    }
    const std::string finished = iso8601_utc(std::chrono::system_clock::now());
    nlohmann::json manifest{
        {"scenario", "sweep"},
        {"scenario_hash", hash_hex(grid_hash)},
        {"seed", opt.seed},
        {"started_utc", started},
        {"finished_utc", finished},
        {"outputs", {csv_path.string()}},
        {"tool_version", kVersion},
        {"duration", duration},
        {"warmup", warmup},
        {"fractions", fractions},
        {"flow_counts", flow_counts},
    };
    if (!write_file(manifest_path, manifest.dump(2) + "\n")) {
        std::cerr << "error: I/O failure writing " << manifest_path << '\n';
        return kExitRuntime;
    }

    print_sweep_blocks(cells, fractions, flow_counts, std::cout);
    std::cout << "summary: " << csv_path.string() << "\nmanifest: " << manifest_path.string()
              << '\n';
    return kExitOk;
}

// report: recompute summary statistics from a trace CSV over a window.
inline int cmd_report(const std::string& trace_path, std::optional<double> begin,
                      std::optional<double> end) {
    std::ifstream is(trace_path, std::ios::binary);
    if (!is) {
        std::cerr << "error: cannot open trace " << trace_path << '\n';
        return kExitUsage;
    }
    std::vector<TraceRecord> records;
    try {
        records = read_trace_csv(is);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    TimeWindow window{begin.value_or(0.0), end.value_or(std::numeric_limits<double>::infinity())};
    auto rows = summarize_trace(records, window);
    std::int64_t samples = 0;
    for (const auto& r : rows) samples += r.samples;
    if (rows.empty() || samples == 0) {
        std::cerr << "error: no samples in window [" << window.begin << ", " << window.end
                  << ")\n";
        return kExitUsage;
    }
    print_summary_table(rows, std::cout);
    return kExitOk;
}

}  // namespace mpcpace::cli
