#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpcpace {

// One row per delivered ACK plus one per loss. Rates are in display
// packets/s (scenario rate_scale already applied), rtt in seconds,
// queue_depth in packets at the moment the event was processed. Loss
// rows carry rtt = 0 and are excluded from rate/RTT statistics.
struct TraceRecord {
    double time = 0.0;
    std::int32_t flow_id = 0;
    double pacing_rate = 0.0;
    double rtt = 0.0;
    double queue_depth = 0.0;
    bool loss = false;
};

struct FlowCounters {
    std::int64_t sent = 0;       // enqueue attempts
    std::int64_t delivered = 0;  // bottleneck dequeues
    std::int64_t lost = 0;       // buffer overflows
};

struct Trace {
    std::vector<TraceRecord> records;
    std::vector<FlowCounters> counters;
    double duration = 0.0;
    double rate_scale = 1.0;  // sim rate units per displayed packet

    std::int64_t total_sent() const {
        std::int64_t n = 0;
        for (const auto& c : counters) n += c.sent;
        return n;
    }
    std::int64_t total_lost() const {
        std::int64_t n = 0;
        for (const auto& c : counters) n += c.lost;
        return n;
    }
};

// Streaming consumer of trace records; lets long simulations run without
// materializing every row.
class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void on_record(const TraceRecord& rec) = 0;
};

class VectorSink : public TraceSink {
public:
    explicit VectorSink(std::vector<TraceRecord>& out) : out_(out) {}
    void on_record(const TraceRecord& rec) override { out_.push_back(rec); }

private:
    std::vector<TraceRecord>& out_;
};

inline constexpr const char* kTraceCsvHeader = "time,flow_id,pacing_rate,rtt,queue_depth,loss";

inline void format_trace_row(const TraceRecord& r, std::string& out) {
    char buf[160];
    int n = std::snprintf(buf, sizeof buf, "%.9f,%d,%.9g,%.9f,%.9g,%d\n",
                          r.time, r.flow_id, r.pacing_rate, r.rtt, r.queue_depth,
                          r.loss ? 1 : 0);
    out.append(buf, static_cast<std::size_t>(n));
}

// Sink that writes CSV rows to a stream as they arrive.
class CsvSink : public TraceSink {
public:
    explicit CsvSink(std::ostream& os) : os_(os) {
        os_ << kTraceCsvHeader << '\n';
    }
    void on_record(const TraceRecord& rec) override {
        buf_.clear();
        format_trace_row(rec, buf_);
        os_ << buf_;
    }

private:
    std::ostream& os_;
    std::string buf_;
};

inline void write_trace_csv(const Trace& trace, std::ostream& os) {
    os << kTraceCsvHeader << '\n';
    std::string buf;
    buf.reserve(128);
    for (const auto& r : trace.records) {
        buf.clear();
        format_trace_row(r, buf);
        os << buf;
    }
}

// Parses a trace CSV. Throws std::runtime_error naming the 1-based row
// number on malformed input.
inline std::vector<TraceRecord> read_trace_csv(std::istream& is) {
    std::vector<TraceRecord> out;
    std::string line;
    if (!std::getline(is, line) || line.rfind("time,flow_id", 0) != 0)
        throw std::runtime_error("trace CSV: missing header row");
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        TraceRecord r;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        auto field = [&](auto& value) {
            auto [ptr, ec] = std::from_chars(p, end, value);
            if (ec != std::errc{})
                throw std::runtime_error("trace CSV: malformed row " + std::to_string(row));
            p = ptr;
            if (p < end) {
                if (*p != ',')
                    throw std::runtime_error("trace CSV: malformed row " + std::to_string(row));
                ++p;
            }
        };
        int loss = 0;
        field(r.time);
        field(r.flow_id);
        field(r.pacing_rate);
        field(r.rtt);
        field(r.queue_depth);
        field(loss);
        r.loss = loss != 0;
        out.push_back(r);
    }
    return out;
}

}  // namespace mpcpace
