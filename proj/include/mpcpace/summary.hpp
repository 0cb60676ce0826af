#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "mpcpace/stats.hpp"
#include "mpcpace/trace.hpp"

namespace mpcpace {

// Streaming per-flow mean/std (Welford) so summaries do not require the
// trace in memory. Rates in packets/s, RTT converted to ms for output.
class FlowAccumulator {
public:
    void add(double v) {
        ++n_;
        const double d = v - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (v - mean_);
        if (v < min_) min_ = v;
        if (v > max_) max_ = v;
    }
    std::int64_t count() const { return n_; }
    double mean() const { return n_ ? mean_ : 0.0; }
    double std_dev() const { return n_ ? std::sqrt(m2_ / static_cast<double>(n_)) : 0.0; }
    double min() const { return min_; }
    double max() const { return max_; }

private:
    std::int64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double min_ = std::numeric_limits<double>::infinity();
    double max_ = -std::numeric_limits<double>::infinity();
};

struct FlowSummary {
    std::int32_t flow_id = 0;
    double mean_rate = 0.0;   // packets/s
    double rate_std = 0.0;
    double mean_rtt_ms = 0.0;
    double rtt_std_ms = 0.0;
    std::int64_t losses = 0;
    std::int64_t samples = 0;
};

// Accumulates ACK rows into per-flow rate/RTT stats over a window; loss
// rows in the window are counted per flow.
class SummaryAccumulator : public TraceSink {
public:
    explicit SummaryAccumulator(TimeWindow window) : window_(window) {}

    void on_record(const TraceRecord& rec) override {
        const auto i = static_cast<std::size_t>(rec.flow_id);
        if (i >= rate_.size()) {
            rate_.resize(i + 1);
            rtt_.resize(i + 1);
            losses_.resize(i + 1, 0);
        }
        if (!window_.contains(rec.time)) return;
        if (rec.loss) {
            ++losses_[i];
            return;
        }
        rate_[i].add(rec.pacing_rate);
        rtt_[i].add(rec.rtt);
    }

    std::size_t flow_count() const { return rate_.size(); }

    std::vector<FlowSummary> summaries() const {
        std::vector<FlowSummary> out;
        for (std::size_t i = 0; i < rate_.size(); ++i) {
            FlowSummary s;
            s.flow_id = static_cast<std::int32_t>(i);
            s.mean_rate = rate_[i].mean();
            s.rate_std = rate_[i].std_dev();
            s.mean_rtt_ms = rtt_[i].mean() * 1e3;
            s.rtt_std_ms = rtt_[i].std_dev() * 1e3;
            s.losses = losses_[i];
            s.samples = rate_[i].count();
            out.push_back(s);
        }
        return out;
    }

private:
    TimeWindow window_;
    std::vector<FlowAccumulator> rate_;
    std::vector<FlowAccumulator> rtt_;
    std::vector<std::int64_t> losses_;
};

inline std::vector<FlowSummary> summarize_trace(const std::vector<TraceRecord>& records,
                                                const TimeWindow& window) {
    SummaryAccumulator acc(window);
    for (const auto& r : records) acc.on_record(r);
    return acc.summaries();
}

// Row labels match the printed result tables.
inline constexpr const char* kSummaryLabels[] = {"Mean Rate", "Rate Std.", "Mean RTT",
                                                 "RTT Std.", "Losses"};

inline void write_summary_csv(const std::vector<FlowSummary>& rows, std::ostream& os) {
    os << "flow,Mean Rate,Rate Std.,Mean RTT,RTT Std.,Losses\n";
    char buf[160];
    for (const auto& s : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.6g,%.6g,%.6g,%.6g,%lld\n", s.flow_id + 1,
                      s.mean_rate, s.rate_std, s.mean_rtt_ms, s.rtt_std_ms,
                      static_cast<long long>(s.losses));
        os << buf;
    }
}

// Table orientation: metric rows, one column per flow. Rates in
// packets/s, RTT in ms.
inline void print_summary_table(const std::vector<FlowSummary>& rows, std::ostream& os) {
    os << std::left << std::setw(24) << "Flow #";
    for (const auto& s : rows) os << std::right << std::setw(12) << (s.flow_id + 1);
    os << '\n';
    auto line = [&](const char* label, auto getter, int precision) {
        os << std::left << std::setw(24) << label;
        for (const auto& s : rows)
            os << std::right << std::setw(12) << std::fixed << std::setprecision(precision)
               << getter(s);
        os << '\n';
        os.unsetf(std::ios::fixed);
    };
    line("Mean Rate (packets/s)", [](const FlowSummary& s) { return s.mean_rate; }, 3);
    line("Rate Std. (packets/s)", [](const FlowSummary& s) { return s.rate_std; }, 3);
    line("Mean RTT (ms)", [](const FlowSummary& s) { return s.mean_rtt_ms; }, 3);
    line("RTT Std. (ms)", [](const FlowSummary& s) { return s.rtt_std_ms; }, 3);
    os << std::left << std::setw(24) << "Losses";
    for (const auto& s : rows) os << std::right << std::setw(12) << s.losses;
    os << '\n';
}

}  // namespace mpcpace
