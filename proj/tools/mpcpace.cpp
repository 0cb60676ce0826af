// mpcpace: run MPC-paced flow simulations and report statistics.
//
//   mpcpace run <scenario> [--seed N] [--duration S] [--warmup S] [--out DIR]
//   mpcpace sweep [--fractions CSV] [--flows CSV] [--seed N] [--duration S]
//                 [--warmup S] [--out DIR]
//   mpcpace report <trace.csv> [--begin S] [--end S]
//
// <scenario> is a builtin name (single, table1-capped, table1-uncapped,
// table2-capped, table2-uncapped, sweep) or a JSON scenario file.

#include <CLI11.hpp>

#include "mpcpace/cli.hpp"
#include "mpcpace/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"MPC pacing-rate controller simulator"};
    app.set_version_flag("--version", mpcpace::kVersion);
    app.require_subcommand(1);

    std::string scenario_ref;
    std::string trace_path;
    std::string fractions_csv, flows_csv;
    mpcpace::cli::RunOptions opt;
    double duration_flag = -1.0, warmup_flag = -1.0;
    double begin_flag = -1.0, end_flag = -1.0;

    auto* run = app.add_subcommand("run", "run one scenario and write trace + summary");
    run->add_option("scenario", scenario_ref, "builtin name or scenario JSON file")->required();
    run->add_option("--seed", opt.seed, "run seed (default 0)");
    run->add_option("--duration", duration_flag, "override duration, seconds");
    run->add_option("--warmup", warmup_flag, "override warmup, seconds");
    run->add_option("--out", opt.out_dir, "output directory (default .)");

    auto* sweep = app.add_subcommand("sweep", "run the buffer-size study grid");
    sweep->add_option("--fractions", fractions_csv, "comma-separated BDP fractions");
    sweep->add_option("--flows", flows_csv, "comma-separated flow counts");
    sweep->add_option("--seed", opt.seed, "run seed (default 0)");
    sweep->add_option("--duration", duration_flag, "per-cell duration, seconds (default 60)");
    sweep->add_option("--warmup", warmup_flag, "per-cell warmup, seconds (default 10)");
    sweep->add_option("--out", opt.out_dir, "output directory (default .)");

    auto* report = app.add_subcommand("report", "recompute summary from a trace CSV");
    report->add_option("trace", trace_path, "trace CSV path")->required();
    report->add_option("--begin", begin_flag, "window begin, seconds");
    report->add_option("--end", end_flag, "window end, seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : mpcpace::cli::kExitUsage;
    }

    if (duration_flag >= 0.0) opt.duration = duration_flag;
    if (warmup_flag >= 0.0) opt.warmup = warmup_flag;

    auto parse_list = [](const std::string& csv, auto convert, auto& out) -> bool {
        if (csv.empty()) return true;
        std::stringstream ss(csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(convert(item));
            } catch (const std::exception&) {
                return false;
            }
        }
        return true;
    };

    if (run->parsed()) return mpcpace::cli::cmd_run(scenario_ref, opt);

    if (sweep->parsed()) {
        std::vector<double> fractions;
        std::vector<int> flows;
        if (!parse_list(fractions_csv, [](const std::string& s) { return std::stod(s); }, fractions) ||
            !parse_list(flows_csv, [](const std::string& s) { return std::stoi(s); }, flows)) {
            std::cerr << "error: malformed list argument\n";
            return mpcpace::cli::kExitUsage;
        }
        return mpcpace::cli::cmd_sweep(fractions, flows, opt);
    }

    if (report->parsed()) {
        std::optional<double> b, e;
        if (begin_flag >= 0.0) b = begin_flag;
        if (end_flag >= 0.0) e = end_flag;
        return mpcpace::cli::cmd_report(trace_path, b, e);
    }

    return mpcpace::cli::kExitUsage;
}
