#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mpcpace/trace.hpp"

namespace mpcpace {

struct Sample {
    double time;
    double value;
};

using Series = std::vector<Sample>;

struct TimeWindow {
    double begin = 0.0;
    double end = std::numeric_limits<double>::infinity();

    bool contains(double t) const { return t >= begin && t < end; }
};

// Population mean/std over the samples of one metric.
struct SummaryStats {
    double mean = 0.0;
    double std_dev = 0.0;  // population
    std::int64_t count = 0;
    double min = 0.0;
    double max = 0.0;
};

// Box-plot statistics with outliers counted strictly beyond 1.5*IQR
// fences. Quartiles use linear interpolation between closest ranks:
// q(p) = x[h] + frac(h) * (x[h+1] - x[h]) with h = (n - 1) * p on the
// sorted samples.
struct BoxStats {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double lower_fence = 0.0;
    double upper_fence = 0.0;
    std::int64_t outlier_count = 0;
    double outlier_fraction = 0.0;
};

inline SummaryStats summarize(const Series& series, const TimeWindow& window) {
    SummaryStats s;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& p : series) {
        if (!window.contains(p.time)) continue;
        sum += p.value;
        s.min = std::min(s.min, p.value);
        s.max = std::max(s.max, p.value);
        ++s.count;
    }
    if (s.count == 0) throw std::invalid_argument("summarize: empty window");
    s.mean = sum / static_cast<double>(s.count);
    double ss = 0.0;
    for (const auto& p : series) {
        if (!window.contains(p.time)) continue;
        const double d = p.value - s.mean;
        ss += d * d;
    }
    s.std_dev = std::sqrt(ss / static_cast<double>(s.count));
    return s;
}

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

inline BoxStats box_stats_values(std::vector<double> values) {
    if (values.size() < 4) throw std::invalid_argument("box_stats: need at least 4 samples");
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.q1 = detail::quantile_sorted(values, 0.25);
    b.median = detail::quantile_sorted(values, 0.5);
    b.q3 = detail::quantile_sorted(values, 0.75);
    b.iqr = b.q3 - b.q1;
    b.lower_fence = b.q1 - 1.5 * b.iqr;
    b.upper_fence = b.q3 + 1.5 * b.iqr;
    for (double v : values)
        if (v < b.lower_fence || v > b.upper_fence) ++b.outlier_count;
    b.outlier_fraction = static_cast<double>(b.outlier_count) / static_cast<double>(values.size());
    return b;
}

inline BoxStats box_stats(const Series& series) {
    std::vector<double> values;
    values.reserve(series.size());
    for (const auto& p : series) values.push_back(p.value);
    return box_stats_values(std::move(values));
}

// Evenly strided selection of min(n, len) samples keeping first and last.
// Index k maps to round_half_even(k * (len - 1) / (n - 1)).
inline Series subsample(const Series& series, std::int64_t n) {
    if (n < 1) throw std::invalid_argument("subsample: n must be at least 1");
    const std::int64_t len = static_cast<std::int64_t>(series.size());
    if (n >= len || len <= 1) return series;
    Series out;
    out.reserve(static_cast<std::size_t>(n));
    if (n == 1) {
        out.push_back(series.front());
        return out;
    }
    const double step = static_cast<double>(len - 1) / static_cast<double>(n - 1);
    for (std::int64_t k = 0; k < n; ++k) {
        double h = static_cast<double>(k) * step;
        double f = std::floor(h);
        double frac = h - f;
        std::int64_t idx = static_cast<std::int64_t>(f);
        if (frac > 0.5 || (frac == 0.5 && (idx & 1) != 0)) ++idx;  // ties to even
        out.push_back(series[static_cast<std::size_t>(idx)]);
    }
    return out;
}

// First time the stepwise series reaches `threshold` and stays there for
// at least `sustain` seconds. Returns `sentinel` when never reached.
inline double time_to_threshold(const Series& series, double threshold, double sustain,
                                double sentinel) {
    double streak_start = -1.0;
    for (const auto& p : series) {
        if (p.value >= threshold) {
            if (streak_start < 0.0) streak_start = p.time;
            if (p.time - streak_start >= sustain) return streak_start;
        } else {
            streak_start = -1.0;
        }
    }
    return sentinel;
}

// Combined all-flow pacing rate over time from a trace: each ACK row
// updates its flow's latest rate; the sum forms a stepwise series.
inline Series combined_rate_series(const std::vector<TraceRecord>& records,
                                   std::size_t flow_count) {
    std::vector<double> last(flow_count, 0.0);
    Series out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.loss) continue;
        const auto i = static_cast<std::size_t>(r.flow_id);
        if (i >= flow_count) continue;
        last[i] = r.pacing_rate;
        double total = 0.0;
        for (std::size_t k = 0; k < flow_count; ++k) total += last[k];
        out.push_back(Sample{r.time, total});
    }
    return out;
}

// Time for the combined rate to first reach fraction * target_rate and
// hold it for one second. The sustain requirement keeps a probe spike
// from counting as convergence. Sentinel: end of trace.
inline double time_to_rate(const Trace& trace, double target_rate, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("time_to_rate: fraction must be in (0, 1]");
    std::size_t flows = trace.counters.empty() ? 1 : trace.counters.size();
    Series combined = combined_rate_series(trace.records, flows);
    return time_to_threshold(combined, fraction * target_rate, 1.0, trace.duration);
}

// Per-metric series extraction; loss rows are excluded.
inline Series rate_series(const std::vector<TraceRecord>& records, std::int32_t flow_id) {
    Series out;
    for (const auto& r : records)
        if (!r.loss && r.flow_id == flow_id) out.push_back(Sample{r.time, r.pacing_rate});
    return out;
}

inline Series rtt_series(const std::vector<TraceRecord>& records, std::int32_t flow_id) {
    Series out;
    for (const auto& r : records)
        if (!r.loss && r.flow_id == flow_id) out.push_back(Sample{r.time, r.rtt});
    return out;
}

// Bounded-memory value collector for long runs: once `limit` samples have
// accumulated, every other sample is dropped and the acceptance stride
// doubles. Quantiles over the survivors approximate the full series.
class DecimatingCollector {
public:
    explicit DecimatingCollector(std::size_t limit = 1 << 20) : limit_(limit) {}

    void add(double v) {
        if (counter_++ % stride_ == 0) {
            values_.push_back(v);
            if (values_.size() >= limit_) {
                std::size_t w = 0;
                for (std::size_t i = 0; i < values_.size(); i += 2) values_[w++] = values_[i];
                values_.resize(w);
                stride_ *= 2;
            }
        }
    }

    const std::vector<double>& values() const { return values_; }
    std::uint64_t total_count() const { return counter_; }

private:
    std::size_t limit_;
    std::uint64_t counter_ = 0;
    std::uint64_t stride_ = 1;
    std::vector<double> values_;
};

}  // namespace mpcpace
