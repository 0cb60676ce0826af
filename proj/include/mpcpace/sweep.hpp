#pragma once

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "mpcpace/scenario.hpp"
#include "mpcpace/stats.hpp"
#include "mpcpace/trace.hpp"

namespace mpcpace {

// Streaming statistics for one buffer-sweep cell. Long cells never hold
// the trace: achieved throughput is binned (each ACK row is one delivered
// packet), RTT samples are decimated, and the time-to-rate tracker walks
// the binned series as it forms.
class SweepCellSink : public TraceSink {
public:
    SweepCellSink(double bin_width, double warmup, double rate_scale)
        : bin_width_(bin_width), warmup_(warmup), scale_(rate_scale) {}

    void on_record(const TraceRecord& rec) override {
        if (rec.loss) return;
        const auto bin = static_cast<std::int64_t>(rec.time / bin_width_);
        if (bin != current_bin_) {
            flush_bin();
            current_bin_ = bin;
            bin_count_ = 0;
        }
        ++bin_count_;
        if (rec.time >= warmup_) rtt_.add(rec.rtt);
    }

    void finish() { flush_bin(); }

    // Achieved combined rate per bin, in packets/s of the displayed unit.
    const Series& rate_bins() const { return rate_bins_; }
    const DecimatingCollector& rtt_samples() const { return rtt_; }

    Series post_warmup_rate_bins() const {
        Series out;
        for (const auto& s : rate_bins_)
            if (s.time >= warmup_) out.push_back(s);
        return out;
    }

private:
    void flush_bin() {
        if (current_bin_ < 0) return;
        const double t = static_cast<double>(current_bin_) * bin_width_;
        const double rate = static_cast<double>(bin_count_) / bin_width_ / scale_;
        rate_bins_.push_back(Sample{t, rate});
    }

    double bin_width_;
    double warmup_;
    double scale_;
    std::int64_t current_bin_ = -1;
    std::int64_t bin_count_ = 0;
    Series rate_bins_;
    DecimatingCollector rtt_;
};

struct SweepCellResult {
    double fraction = 0.0;
    int flow_count = 0;
    std::int64_t buffer_packets = 0;
    BoxStats rate;      // achieved combined rate, packets/s, post-warmup bins
    BoxStats rtt_ms;    // per-ACK RTT in ms, post-warmup
    double loss_fraction = 0.0;  // lost / sent over the whole run
    double time_to_rate = 0.0;   // seconds; sentinel = cell duration
    std::int64_t packets_sent = 0;
};

// Runs one sweep cell. time_to_rate is measured on the achieved-rate bins
// against 90% of the bottleneck rate with the 1 s sustain rule.
inline SweepCellResult run_sweep_cell(const Scenario& sc, double fraction, int flow_count,
                                      std::uint64_t seed) {
    SweepCellSink sink(0.1, sc.warmup, sc.rate_scale);
    Trace trace = run_scenario(sc, seed, sink);
    sink.finish();

    SweepCellResult r;
    r.fraction = fraction;
    r.flow_count = flow_count;
    r.buffer_packets = sc.link.buffer_capacity;
    r.rate = box_stats(sink.post_warmup_rate_bins());
    std::vector<double> rtts = sink.rtt_samples().values();
    for (auto& v : rtts) v *= 1e3;
    r.rtt_ms = box_stats_values(std::move(rtts));
    r.packets_sent = trace.total_sent();
    r.loss_fraction = r.packets_sent > 0
                          ? static_cast<double>(trace.total_lost()) / static_cast<double>(r.packets_sent)
                          : 0.0;
    const double bottleneck = sc.link.bottleneck_rate / sc.rate_scale;
    r.time_to_rate = time_to_threshold(sink.rate_bins(), 0.9 * bottleneck, 1.0, sc.duration);
    return r;
}

inline void write_sweep_csv(const std::vector<SweepCellResult>& cells, std::ostream& os) {
    os << "flows,bdp_fraction,buffer_packets,median_rate,q1_rate,q3_rate,rate_outlier_fraction,"
          "median_rtt_ms,q1_rtt_ms,q3_rtt_ms,rtt_outlier_fraction,loss_fraction,time_to_rate_s\n";
    char buf[512];
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof buf,
                      "%d,%.10g,%lld,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                      c.flow_count, c.fraction, static_cast<long long>(c.buffer_packets),
                      c.rate.median, c.rate.q1, c.rate.q3, c.rate.outlier_fraction,
                      c.rtt_ms.median, c.rtt_ms.q1, c.rtt_ms.q3, c.rtt_ms.outlier_fraction,
                      c.loss_fraction, c.time_to_rate);
        os << buf;
    }
}

// Three pivoted blocks (rate, RTT, losses), flow counts as rows and BDP
// fractions as columns.
inline void print_sweep_blocks(const std::vector<SweepCellResult>& cells,
                               const std::vector<double>& fractions,
                               const std::vector<int>& flow_counts, std::ostream& os) {
    auto find = [&](int n, double f) -> const SweepCellResult* {
        for (const auto& c : cells)
            if (c.flow_count == n && c.fraction == f) return &c;
        return nullptr;
    };
    auto header = [&]() {
        os << std::left << std::setw(8) << "Flows";
        for (double f : fractions) {
            char b[32];
            std::snprintf(b, sizeof b, "%g", f);
            os << std::right << std::setw(10) << b;
        }
        os << '\n';
    };
    auto block = [&](const char* title, auto getter, int precision) {
        os << title << " vs buffer size (BDP)\n";
        header();
        for (int n : flow_counts) {
            os << std::left << std::setw(8) << n;
            for (double f : fractions) {
                const SweepCellResult* c = find(n, f);
                if (!c) {
                    os << std::right << std::setw(10) << "-";
                    continue;
                }
                char b[32];
                std::snprintf(b, sizeof b, "%.*f", precision, getter(*c));
                os << std::right << std::setw(10) << b;
            }
            os << '\n';
        }
        os << '\n';
    };
    block("Median Combined Rate (packets/s)",
          [](const SweepCellResult& c) { return c.rate.median; }, 1);
    block("Median RTT (ms)", [](const SweepCellResult& c) { return c.rtt_ms.median; }, 2);
    os << "Losses (fraction of packets sent) vs buffer size (BDP)\n";
    header();
    for (int n : flow_counts) {
        os << std::left << std::setw(8) << n;
        for (double f : fractions) {
            const SweepCellResult* c = find(n, f);
            char b[32];
            if (c)
                std::snprintf(b, sizeof b, "%.1e", c->loss_fraction);
            else
                std::snprintf(b, sizeof b, "-");
            os << std::right << std::setw(10) << b;
        }
        os << '\n';
    }
}

}  // namespace mpcpace
