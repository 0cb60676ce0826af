#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mpcpace/cli.hpp"

using namespace mpcpace;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mpcpace-test-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

cli::RunOptions short_run(const fs::path& out) {
    cli::RunOptions opt;
    opt.duration = 20.0;
    opt.warmup = 5.0;
    opt.out_dir = out.string();
    opt.seed = 7;
    return opt;
}

}  // namespace

TEST_CASE("cmd_run writes trace, summary, and manifest") {
    TempDir tmp;
    REQUIRE(cli::cmd_run("table1-capped", short_run(tmp.path)) == cli::kExitOk);
    REQUIRE(fs::exists(tmp.path / "table1-capped-trace.csv"));
    REQUIRE(fs::exists(tmp.path / "table1-capped-summary.csv"));
    REQUIRE(fs::exists(tmp.path / "table1-capped-manifest.json"));

    const std::string trace = slurp(tmp.path / "table1-capped-trace.csv");
    REQUIRE(trace.rfind("time,flow_id,pacing_rate,rtt,queue_depth,loss", 0) == 0);

    auto manifest = nlohmann::json::parse(slurp(tmp.path / "table1-capped-manifest.json"));
    REQUIRE(manifest.at("scenario") == "table1-capped");
    REQUIRE(manifest.at("seed") == 7);
    REQUIRE(manifest.at("tool_version") == std::string(kVersion));
    REQUIRE(manifest.at("scenario_hash").get<std::string>().size() == 16);
}

TEST_CASE("cmd_run is byte-identical across reruns") {
    TempDir a, b;
    REQUIRE(cli::cmd_run("single", short_run(a.path)) == cli::kExitOk);
    REQUIRE(cli::cmd_run("single", short_run(b.path)) == cli::kExitOk);
    REQUIRE(slurp(a.path / "single-trace.csv") == slurp(b.path / "single-trace.csv"));
    REQUIRE(slurp(a.path / "single-summary.csv") == slurp(b.path / "single-summary.csv"));

    TempDir c;
    auto opt = short_run(c.path);
    opt.seed = 8;
    REQUIRE(cli::cmd_run("single", opt) == cli::kExitOk);
    REQUIRE(slurp(a.path / "single-trace.csv") != slurp(c.path / "single-trace.csv"));
}

TEST_CASE("cmd_run error contracts") {
    TempDir tmp;
    SECTION("unknown scenario name or missing file exits 2") {
        REQUIRE(cli::cmd_run("missing.scn", short_run(tmp.path)) == cli::kExitUsage);
    }
    SECTION("unparseable scenario file exits 2") {
        const fs::path bad = tmp.path / "bad.json";
        std::ofstream(bad) << "{ not json";
        REQUIRE(cli::cmd_run(bad.string(), short_run(tmp.path)) == cli::kExitUsage);
    }
    SECTION("scenario file failing validation exits 2") {
        auto sc = single_flow_scenario();
        nlohmann::json j = scenario_to_json(sc);
        j["warmup"] = 1e9;
        const fs::path p = tmp.path / "invalid.json";
        std::ofstream(p) << j.dump();
        REQUIRE(cli::cmd_run(p.string(), short_run(tmp.path)) == cli::kExitUsage);
    }
}

TEST_CASE("scenario files round-trip through cmd_run") {
    TempDir tmp;
    auto sc = single_flow_scenario();
    sc.name = "custom";
    sc.duration = 15.0;
    sc.warmup = 3.0;
    const fs::path p = tmp.path / "custom.json";
    std::ofstream(p) << scenario_to_json(sc).dump(2);
    REQUIRE(cli::cmd_run(p.string(), short_run(tmp.path)) == cli::kExitOk);
    REQUIRE(fs::exists(tmp.path / "custom-trace.csv"));
}

TEST_CASE("cmd_report") {
    TempDir tmp;
    auto opt = short_run(tmp.path);
    REQUIRE(cli::cmd_run("table1-capped", opt) == cli::kExitOk);
    const fs::path trace = tmp.path / "table1-capped-trace.csv";

    SECTION("matches the inline summary at printed precision") {
        // Recompute over the same window the run used.
        std::ifstream is(trace);
        auto records = read_trace_csv(is);
        auto rows = summarize_trace(records, TimeWindow{5.0, 20.0});
        const std::string inline_summary = slurp(tmp.path / "table1-capped-summary.csv");
        std::ostringstream recomputed;
        write_summary_csv(rows, recomputed);
        REQUIRE(recomputed.str() == inline_summary);
    }
    SECTION("report exits 0 on a valid window") {
        REQUIRE(cli::cmd_report(trace.string(), 5.0, 20.0) == cli::kExitOk);
    }
    SECTION("empty window exits 2") {
        REQUIRE(cli::cmd_report(trace.string(), 500.0, 600.0) == cli::kExitUsage);
    }
    SECTION("malformed row exits 2") {
        const fs::path bad = tmp.path / "bad.csv";
        std::ofstream(bad) << "time,flow_id,pacing_rate,rtt,queue_depth,loss\n1.0,0,oops,0,0,0\n";
        REQUIRE(cli::cmd_report(bad.string(), {}, {}) == cli::kExitUsage);
    }
    SECTION("missing trace exits 2") {
        REQUIRE(cli::cmd_report((tmp.path / "nope.csv").string(), {}, {}) == cli::kExitUsage);
    }
}

TEST_CASE("cmd_sweep produces one row per cell") {
    TempDir tmp;
    cli::RunOptions opt;
    opt.out_dir = tmp.path.string();
    opt.duration = 4.0;
    opt.warmup = 1.0;
    opt.seed = 3;
    REQUIRE(cli::cmd_sweep({0.5, 1.0}, {1, 2}, opt) == cli::kExitOk);
    const std::string csv = slurp(tmp.path / "sweep-summary.csv");
    // header + 4 cells
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 5);
    REQUIRE(csv.find("flows,bdp_fraction") == 0);
    REQUIRE(fs::exists(tmp.path / "sweep-manifest.json"));
}

TEST_CASE("a builtin saved to a file runs identically to the builtin") {
    TempDir tmp;
    auto sc = table1_scenarios().second;
    const fs::path p = tmp.path / "saved.json";
    std::ofstream(p) << scenario_to_json(sc).dump(2);

    TempDir a, b;
    REQUIRE(cli::cmd_run("table1-capped", short_run(a.path)) == cli::kExitOk);
    REQUIRE(cli::cmd_run(p.string(), short_run(b.path)) == cli::kExitOk);
    REQUIRE(slurp(a.path / "table1-capped-trace.csv") ==
            slurp(b.path / "table1-capped-trace.csv"));
}

TEST_CASE("run sweep delegates to the default grid") {
    TempDir tmp;
    cli::RunOptions opt;
    opt.out_dir = tmp.path.string();
    opt.duration = 1.0;
    opt.warmup = 0.25;
    opt.seed = 5;
    REQUIRE(cli::cmd_run("sweep", opt) == cli::kExitOk);
    const std::string csv = slurp(tmp.path / "sweep-summary.csv");
    // header + 9 fractions x 4 flow counts
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 37);
}

TEST_CASE("trace CSV parser reports the offending row") {
    std::istringstream bad("time,flow_id,pacing_rate,rtt,queue_depth,loss\n"
                           "0.1,0,10,0.02,0,0\n"
                           "garbage row\n");
    try {
        read_trace_csv(bad);
        FAIL("expected parse failure");
    } catch (const std::runtime_error& e) {
        REQUIRE(std::string(e.what()).find("row 3") != std::string::npos);
    }
}
