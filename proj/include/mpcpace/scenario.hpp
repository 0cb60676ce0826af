#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpcpace/sim.hpp"

namespace mpcpace {

// A runnable experiment: link, flows, duration, noise. rate_scale is the
// number of simulated rate units per displayed packet; table-scale
// scenarios run at a finer granularity so that one queued unit costs a
// fraction of a millisecond rather than a full service interval, and all
// reported rates divide back to packets/s.
struct Scenario {
    std::string name;
    LinkSpec link{};
    std::vector<FlowSpec> flows;
    double duration = 300.0;
    NoiseSpec noise{};
    double warmup = 30.0;
    double rate_scale = 1.0;

    std::string validate() const {
        if (name.empty()) return "name must not be empty";
        if (auto err = link.validate(); !err.empty()) return "link: " + err;
        if (flows.empty()) return "at least one flow required";
        for (std::size_t i = 0; i < flows.size(); ++i) {
            if (auto err = flows[i].validate(); !err.empty())
                return "flow " + std::to_string(i) + ": " + err;
            if (auto err = flows[i].controller.validate(); !err.empty())
                return "flow " + std::to_string(i) + " controller: " + err;
        }
        if (!(duration > 0.0)) return "duration must be positive";
        if (!(warmup >= 0.0 && warmup < duration)) return "warmup must be in [0, duration)";
        if (auto err = noise.validate(); !err.empty()) return "noise: " + err;
        if (!(rate_scale > 0.0)) return "rate_scale must be positive";
        return {};
    }
};

inline Trace run_scenario(const Scenario& sc, std::uint64_t seed, TraceSink& sink) {
    if (auto err = sc.validate(); !err.empty())
        throw std::invalid_argument("scenario '" + sc.name + "': " + err);
    NoiseSpec noise = sc.noise;
    noise.seed = seed;
    return run_simulation(sc.link, sc.flows, sc.duration, noise, sink, sc.rate_scale);
}

inline Trace run_scenario(const Scenario& sc, std::uint64_t seed) {
    std::vector<TraceRecord> records;
    VectorSink sink(records);
    Trace trace = run_scenario(sc, seed, sink);
    trace.records = std::move(records);
    return trace;
}

// Bandwidth-delay product in packets, at least 1.
inline std::int64_t bdp_packets(double bottleneck_rate, double base_rtt) {
    if (!(bottleneck_rate > 0.0) || !(base_rtt > 0.0))
        throw std::invalid_argument("bdp_packets: arguments must be positive");
    return std::max<std::int64_t>(1, std::llround(bottleneck_rate * base_rtt));
}

namespace builders {

inline constexpr double kTableBottleneck = 40.0;   // packets/s
inline constexpr double kTableBaseRtt = 0.025;     // seconds
inline constexpr double kTableBuffer = 25.0;       // packets
inline constexpr double kTableRateScale = 100.0;   // rate units per packet

// Controller settings shared by the table-scale scenarios: per-RTT update
// cadence, effectively non-decaying extrema (the runs are stationary), and
// probing pushed beyond the horizon via tau_d.
inline ControllerConfig table_scale_controller(double base_rtt, double target) {
    ControllerConfig c;
    c.c1 = 0.2;
    c.c2 = 0.3;
    c.alpha = 0.125;
    c.tau_d = 1e9;
    c.target_latency = target;
    c.min_update_interval = base_rtt;
    c.window_min_age = 0.5;
    c.window_max_age = 5.0;
    return c;
}

inline Scenario table_link_scenario(std::string name) {
    Scenario sc;
    sc.name = std::move(name);
    sc.rate_scale = kTableRateScale;
    sc.link.bottleneck_rate = kTableBottleneck * kTableRateScale;
    sc.link.buffer_capacity = static_cast<std::int64_t>(kTableBuffer * kTableRateScale);
    sc.link.propagation_rtt = kTableBaseRtt;
    sc.duration = 300.0;
    sc.warmup = 30.0;
    return sc;
}

}  // namespace builders

// Single flow at the reference bottleneck: 40 packets/s, 25 packet
// buffer, 25 ms base RTT.
inline Scenario single_flow_scenario() {
    using namespace builders;
    Scenario sc = table_link_scenario("single");
    FlowSpec f;
    f.base_rtt = kTableBaseRtt;
    f.rate_floor = 0.5 * kTableRateScale;
    f.initial_rate = 24.0 * kTableRateScale;
    f.controller = table_scale_controller(kTableBaseRtt, kTableBaseRtt + 0.002);
    f.controller.window_max_age = 3.0;
    // A lone flow needs no sharing pressure; the smaller latency weight
    // cuts the noise gain and with it the residual rate jitter.
    f.controller.c1 = 0.05;
    sc.flows.push_back(f);
    return sc;
}

// Four same-RTT flows sharing a 40 packets/s bottleneck; the capped
// variant limits rates to 3, 7, 10, and 20 packets/s (summing to the
// bottleneck rate).
inline std::pair<Scenario, Scenario> table1_scenarios() {
    using namespace builders;
    auto build = [&](bool capped) {
        Scenario sc = table_link_scenario(capped ? "table1-capped" : "table1-uncapped");
        const double caps[] = {3.0, 7.0, 10.0, 20.0};
        // Uncapped flows start below the fair share and climb to it.
        const double uncapped_init = 8.0;
        for (int i = 0; i < 4; ++i) {
            FlowSpec f;
            f.base_rtt = kTableBaseRtt;
            f.rate_floor = 0.5 * kTableRateScale;
            f.controller = table_scale_controller(kTableBaseRtt, kTableBaseRtt + 0.001);
            if (capped) {
                f.rate_cap = caps[i] * kTableRateScale;
                f.initial_rate = f.rate_cap;
            } else {
                f.initial_rate = uncapped_init * kTableRateScale;
            }
            sc.flows.push_back(f);
        }
        return sc;
    };
    return {build(false), build(true)};
}

// Four flows with base RTTs 25/35/45/55 ms; the capped variant limits each
// to 10 packets/s.
inline std::pair<Scenario, Scenario> table2_scenarios() {
    using namespace builders;
    auto build = [&](bool capped) {
        Scenario sc = table_link_scenario(capped ? "table2-capped" : "table2-uncapped");
        const double rtts[] = {0.025, 0.035, 0.045, 0.055};
        const double uncapped_init = 8.0;
        for (int i = 0; i < 4; ++i) {
            FlowSpec f;
            f.base_rtt = rtts[i];
            f.rate_floor = 0.5 * kTableRateScale;
            f.controller = table_scale_controller(rtts[i], rtts[i] + 0.001);
            if (capped) {
                f.rate_cap = 10.0 * kTableRateScale;
                f.initial_rate = f.rate_cap;
            } else {
                f.initial_rate = uncapped_init * kTableRateScale;
            }
            sc.flows.push_back(f);
        }
        return sc;
    };
    return {build(false), build(true)};
}

inline constexpr double kSweepBottleneck = 200000.0;  // packets/s, 40 Gbps proxy
inline constexpr double kSweepBaseRtt = 0.025;

// One buffer-study cell: uncapped flows with a pacing floor of 1/8 the
// bottleneck rate, midpoint latency target, buffer sized as a fraction of
// the bandwidth-delay product.
inline Scenario sweep_cell_scenario(double fraction, int flow_count,
                                    double duration = 60.0, double warmup = 10.0) {
    if (!(fraction > 0.0)) throw std::invalid_argument("sweep: fraction must be positive");
    if (flow_count < 1) throw std::invalid_argument("sweep: flow_count must be at least 1");
    Scenario sc;
    char buf[64];
    std::snprintf(buf, sizeof buf, "sweep-%gbdp-%df", fraction, flow_count);
    sc.name = buf;
    sc.link.bottleneck_rate = kSweepBottleneck;
    const std::int64_t bdp = bdp_packets(kSweepBottleneck, kSweepBaseRtt);
    sc.link.buffer_capacity = std::max<std::int64_t>(1, std::llround(fraction * static_cast<double>(bdp)));
    sc.link.propagation_rtt = kSweepBaseRtt;
    sc.duration = duration;
    sc.warmup = warmup;
    for (int i = 0; i < flow_count; ++i) {
        FlowSpec f;
        f.base_rtt = kSweepBaseRtt;
        f.rate_floor = kSweepBottleneck / 8.0;
        f.initial_rate = 1.2 * kSweepBottleneck / flow_count;
        // Midpoint target with effectively non-decaying extrema; periodic
        // probes ratchet l_hat_b toward the full-buffer RTT where the
        // buffer allows, so the operating point tracks the buffer size.
        // Gains are softer than the table-scale scenarios: the midpoint
        // target swings by half the buffer's worth of latency, and the
        // update law's drive scales with that swing.
        ControllerConfig c;
        c.c1 = 0.05;
        c.c2 = 0.4;
        c.alpha = 0.5;
        c.tau_d = 1e9;
        c.target_latency = std::nullopt;  // midpoint of [l_hat_p, l_hat_b]
        c.probe_interval = 5.0;
        c.min_update_interval = 2.0 * kSweepBaseRtt;
        c.window_min_age = 0.2;
        c.window_max_age = 10.0;
        f.controller = c;
        sc.flows.push_back(f);
    }
    return sc;
}

inline const std::vector<double>& default_sweep_fractions() {
    static const std::vector<double> f = {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1, 2, 4, 8, 16};
    return f;
}

inline const std::vector<int>& default_sweep_flow_counts() {
    static const std::vector<int> n = {1, 2, 4, 8};
    return n;
}

// Cross product of buffer fractions and flow counts.
inline std::vector<Scenario> buffer_sweep(const std::vector<double>& fractions,
                                          const std::vector<int>& flow_counts,
                                          double duration = 60.0, double warmup = 10.0) {
    std::vector<Scenario> out;
    out.reserve(fractions.size() * flow_counts.size());
    for (int n : flow_counts)
        for (double f : fractions)
            out.push_back(sweep_cell_scenario(f, n, duration, warmup));
    return out;
}

// ---- scenario file format (JSON, keys one-to-one with the structs) ----

namespace detail {

inline nlohmann::json opt_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

inline std::optional<double> opt_from_json(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

inline double finite_or(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<double>();
}

}  // namespace detail

inline nlohmann::json controller_to_json(const ControllerConfig& c) {
    using detail::opt_to_json;
    return nlohmann::json{
        {"c1", c.c1},
        {"c2", c.c2},
        {"c3", opt_to_json(c.c3)},
        {"alpha", c.alpha},
        {"tau_d", c.tau_d},
        {"target_latency", opt_to_json(c.target_latency)},
        {"probe_interval", opt_to_json(c.probe_interval)},
        {"probe_gain_up", c.probe_gain_up},
        {"probe_gain_down", c.probe_gain_down},
        {"probe_duration", opt_to_json(c.probe_duration)},
        {"min_update_interval", c.min_update_interval},
        {"window_min_age", c.window_min_age},
        {"window_max_age", std::isfinite(c.window_max_age) ? nlohmann::json(c.window_max_age)
                                                           : nlohmann::json(nullptr)},
    };
}

inline ControllerConfig controller_from_json(const nlohmann::json& j) {
    ControllerConfig c;
    c.c1 = j.value("c1", c.c1);
    c.c2 = j.value("c2", c.c2);
    c.c3 = detail::opt_from_json(j, "c3");
    c.alpha = j.value("alpha", c.alpha);
    c.tau_d = j.value("tau_d", c.tau_d);
    c.target_latency = detail::opt_from_json(j, "target_latency");
    c.probe_interval = detail::opt_from_json(j, "probe_interval");
    c.probe_gain_up = j.value("probe_gain_up", c.probe_gain_up);
    c.probe_gain_down = j.value("probe_gain_down", c.probe_gain_down);
    c.probe_duration = detail::opt_from_json(j, "probe_duration");
    c.min_update_interval = j.value("min_update_interval", c.min_update_interval);
    c.window_min_age = j.value("window_min_age", c.window_min_age);
    c.window_max_age = detail::finite_or(j, "window_max_age", kUnboundedRate);
    return c;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
    nlohmann::json link{
        {"bottleneck_rate", sc.link.bottleneck_rate},
        {"buffer_capacity", sc.link.buffer_capacity},
        {"propagation_rtt", sc.link.propagation_rtt},
        {"ack_path", nullptr},
    };
    if (sc.link.ack_path)
        link["ack_path"] = nlohmann::json{{"rate", sc.link.ack_path->rate},
                                          {"buffer_capacity", sc.link.ack_path->buffer_capacity}};
    nlohmann::json flows = nlohmann::json::array();
    for (const auto& f : sc.flows) {
        flows.push_back(nlohmann::json{
            {"base_rtt", f.base_rtt},
            {"rate_cap", std::isfinite(f.rate_cap) ? nlohmann::json(f.rate_cap)
                                                   : nlohmann::json(nullptr)},
            {"rate_floor", f.rate_floor},
            {"initial_rate", f.initial_rate},
            {"start_time", f.start_time},
            {"controller", controller_to_json(f.controller)},
        });
    }
    return nlohmann::json{
        {"name", sc.name},
        {"link", link},
        {"flows", flows},
        {"duration", sc.duration},
        {"warmup", sc.warmup},
        {"noise", nlohmann::json{{"mean_fraction", sc.noise.mean_fraction},
                                 {"max_fraction", sc.noise.max_fraction},
                                 {"seed", sc.noise.seed}}},
        {"rate_scale", sc.rate_scale},
    };
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario sc;
    sc.name = j.at("name").get<std::string>();
    const auto& link = j.at("link");
    sc.link.bottleneck_rate = link.at("bottleneck_rate").get<double>();
    sc.link.buffer_capacity = link.at("buffer_capacity").get<std::int64_t>();
    sc.link.propagation_rtt = link.at("propagation_rtt").get<double>();
    if (link.contains("ack_path") && !link.at("ack_path").is_null()) {
        AckPathSpec ap;
        ap.rate = link.at("ack_path").at("rate").get<double>();
        ap.buffer_capacity = link.at("ack_path").at("buffer_capacity").get<std::int64_t>();
        sc.link.ack_path = ap;
    }
    for (const auto& jf : j.at("flows")) {
        FlowSpec f;
        f.base_rtt = jf.at("base_rtt").get<double>();
        f.rate_cap = detail::finite_or(jf, "rate_cap", kUnboundedRate);
        f.rate_floor = jf.value("rate_floor", 0.0);
        f.initial_rate = jf.value("initial_rate", 0.0);
        f.start_time = jf.value("start_time", 0.0);
        if (jf.contains("controller")) f.controller = controller_from_json(jf.at("controller"));
        sc.flows.push_back(std::move(f));
    }
    sc.duration = j.value("duration", sc.duration);
    sc.warmup = j.value("warmup", sc.warmup);
    if (j.contains("noise")) {
        const auto& jn = j.at("noise");
        sc.noise.mean_fraction = jn.value("mean_fraction", sc.noise.mean_fraction);
        sc.noise.max_fraction = jn.value("max_fraction", sc.noise.max_fraction);
        sc.noise.seed = jn.value("seed", sc.noise.seed);
    }
    sc.rate_scale = j.value("rate_scale", 1.0);
    if (auto err = sc.validate(); !err.empty())
        throw std::invalid_argument("scenario: " + err);
    return sc;
}

// FNV-1a over the canonical JSON dump; covers every scenario field so a
// manifest hash pins the exact configuration that ran.
inline std::uint64_t scenario_hash(const Scenario& sc) {
    const std::string dump = scenario_to_json(sc).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace mpcpace
