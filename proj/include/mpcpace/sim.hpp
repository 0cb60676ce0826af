#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "mpcpace/controller.hpp"
#include "mpcpace/rng.hpp"
#include "mpcpace/trace.hpp"

namespace mpcpace {

struct AckPathSpec {
    double rate = 0.0;                // ACKs per second
    std::int64_t buffer_capacity = 0; // ACKs
};

struct LinkSpec {
    double bottleneck_rate = 0.0;      // packets per second
    std::int64_t buffer_capacity = 0;  // packets
    double propagation_rtt = 0.0;      // seconds, excluding queueing
    std::optional<AckPathSpec> ack_path{};  // unset: infinite-rate return path

    std::string validate() const {
        if (!(bottleneck_rate > 0.0)) return "bottleneck_rate must be positive";
        if (buffer_capacity < 1) return "buffer_capacity must be at least 1";
        if (!(propagation_rtt > 0.0)) return "propagation_rtt must be positive";
        if (ack_path) {
            if (!(ack_path->rate > 0.0)) return "ack_path.rate must be positive";
            if (ack_path->buffer_capacity < 1) return "ack_path.buffer_capacity must be at least 1";
        }
        return {};
    }
};

struct FlowSpec {
    double base_rtt = 0.0;                  // per-flow propagation RTT
    double rate_cap = kUnboundedRate;       // packets per second
    double rate_floor = 0.0;
    double initial_rate = 0.0;              // 0: defaults to max(rate_floor, 1)
    double start_time = 0.0;
    ControllerConfig controller{};

    std::string validate() const {
        if (!(base_rtt > 0.0)) return "base_rtt must be positive";
        if (!(rate_floor >= 0.0)) return "rate_floor must be non-negative";
        if (!(rate_cap > rate_floor)) return "rate_cap must exceed rate_floor";
        if (initial_rate != 0.0 && !(initial_rate > 0.0)) return "initial_rate must be positive";
        if (!(start_time >= 0.0)) return "start_time must be non-negative";
        return {};
    }
};

struct NoiseSpec {
    double mean_fraction = 0.01;  // of base RTT
    double max_fraction = 0.10;
    std::uint64_t seed = 0;

    std::string validate() const {
        if (!(mean_fraction >= 0.0)) return "mean_fraction must be non-negative";
        if (!(max_fraction >= mean_fraction)) return "max_fraction must be at least mean_fraction";
        return {};
    }
};

enum class EventKind : std::uint8_t { enqueue, dequeue, ack, loss_signal };

struct SimEvent {
    double time = 0.0;
    std::uint64_t sequence = 0;  // scheduling order, breaks time ties
    EventKind kind = EventKind::enqueue;
    std::int32_t flow = -1;
    double payload = 0.0;  // ack: send time

    bool operator>(const SimEvent& other) const {
        if (time != other.time) return time > other.time;
        return sequence > other.sequence;
    }
};

// FIFO bottleneck with immediate service start: a packet reaching an idle
// link departs at max(now, earliest_service) and subsequent departures are
// spaced 1/rate while backlogged, matching the per-packet recursion
// D_k = max(A_k, D_{k-1} + 1/rate).
class LinkQueue {
public:
    LinkQueue(double rate, std::int64_t capacity)
        : service_interval_(1.0 / rate), capacity_(capacity) {}

    struct Packet {
        std::int32_t flow;
        double send_time;
    };

    // Returns false when the buffer is full (packet dropped).
    bool enqueue(const Packet& p) {
        if (static_cast<std::int64_t>(q_.size()) >= capacity_) return false;
        q_.push_back(p);
        return true;
    }

    // Time the next dequeue may run if one needs scheduling after an
    // enqueue at `now`; nullopt when a dequeue is already pending.
    std::optional<double> dequeue_time_after_enqueue(double now) {
        if (dequeue_pending_) return std::nullopt;
        dequeue_pending_ = true;
        return std::max(now, earliest_service_);
    }

    // Pops the head at time `now`. Returns the packet (nullopt for a stale
    // event on an empty queue) and schedules the next dequeue via
    // next_dequeue_time() when backlog remains.
    std::optional<Packet> dequeue(double now) {
        dequeue_pending_ = false;
        if (q_.empty()) return std::nullopt;
        Packet p = q_.front();
        q_.pop_front();
        earliest_service_ = now + service_interval_;
        if (!q_.empty()) {
            dequeue_pending_ = true;
            next_dequeue_ = earliest_service_;
        } else {
            next_dequeue_ = -1.0;
        }
        return p;
    }

    bool has_pending_dequeue() const { return dequeue_pending_; }
    double next_dequeue_time() const { return next_dequeue_; }
    std::int64_t depth() const { return static_cast<std::int64_t>(q_.size()); }
    std::int64_t capacity() const { return capacity_; }

private:
    std::deque<Packet> q_;
    double service_interval_;
    std::int64_t capacity_;
    double earliest_service_ = 0.0;
    bool dequeue_pending_ = false;
    double next_dequeue_ = -1.0;
};

// Additive ACK return delay: exponential with mean mean_fraction * base_rtt
// truncated at max_fraction * base_rtt.
inline double sample_ack_noise(const NoiseSpec& noise, double base_rtt, FlowRng& rng) {
    if (!(base_rtt > 0.0)) throw std::invalid_argument("sample_ack_noise: base_rtt must be positive");
    return truncated_exp(rng, noise.mean_fraction * base_rtt, noise.max_fraction * base_rtt);
}

namespace detail {

struct FlowRuntime {
    Controller controller;
    FlowRng rng;
    double base_rtt;
};

// Finite-rate ACK return queue, shared by all flows. Departure times are
// computed analytically (same Lindley recursion as the bottleneck), with
// occupancy tracked by the set of departures still in the future.
struct AckPath {
    double service_interval;
    std::int64_t capacity;
    std::deque<double> departures;
    double last_departure = 0.0;
    std::int64_t dropped = 0;

    // Returns the path-exit time for an ACK entering at `now`, or nullopt
    // when the path buffer is full and the ACK is dropped.
    std::optional<double> admit(double now) {
        while (!departures.empty() && departures.front() <= now) departures.pop_front();
        if (static_cast<std::int64_t>(departures.size()) >= capacity) {
            ++dropped;
            return std::nullopt;
        }
        const double depart = std::max(now, last_departure + service_interval);
        last_departure = depart;
        departures.push_back(depart);
        return depart;
    }
};

}  // namespace detail

// Discrete-event run of N flows over one bottleneck. Events are processed
// in (time, sequence) order; identical inputs give bit-identical traces.
// rate_scale converts sim rate units to displayed packets/s in the trace.
inline Trace run_simulation(const LinkSpec& link, const std::vector<FlowSpec>& flows,
                            double duration, const NoiseSpec& noise, TraceSink& sink,
                            double rate_scale = 1.0) {
    if (flows.empty()) throw std::invalid_argument("run_simulation: no flows");
    if (!(duration > 0.0)) throw std::invalid_argument("run_simulation: duration must be positive");
    if (auto err = link.validate(); !err.empty()) throw std::invalid_argument("link: " + err);
    if (auto err = noise.validate(); !err.empty()) throw std::invalid_argument("noise: " + err);

    std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<SimEvent>> events;
    std::uint64_t next_seq = 0;
    auto schedule = [&](double t, EventKind kind, std::int32_t flow, double payload = 0.0) {
        events.push(SimEvent{t, next_seq++, kind, flow, payload});
    };

    std::vector<detail::FlowRuntime> rt;
    rt.reserve(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const FlowSpec& f = flows[i];
        if (auto err = f.validate(); !err.empty())
            throw std::invalid_argument("flow " + std::to_string(i) + ": " + err);
        ControllerConfig cfg = f.controller;
        cfg.min_rate = f.rate_floor;
        cfg.max_rate = f.rate_cap;
        double init = f.initial_rate > 0.0 ? f.initial_rate : std::max(f.rate_floor, 1.0);
        rt.push_back(detail::FlowRuntime{
            Controller(cfg, init, f.base_rtt, f.start_time),
            FlowRng(flow_seed(noise.seed, static_cast<std::uint32_t>(i))),
            f.base_rtt});
        schedule(f.start_time, EventKind::enqueue, static_cast<std::int32_t>(i));
    }

    LinkQueue queue(link.bottleneck_rate, link.buffer_capacity);
    std::optional<detail::AckPath> ack_path;
    if (link.ack_path)
        ack_path = detail::AckPath{1.0 / link.ack_path->rate, link.ack_path->buffer_capacity, {}, 0.0, 0};
    Trace trace;
    trace.counters.resize(flows.size());
    trace.duration = duration;
    trace.rate_scale = rate_scale;

    const double inv_scale = 1.0 / rate_scale;
    TraceRecord rec;

#ifndef NDEBUG
    double last_time = -1.0;
    std::uint64_t last_seq = 0;
#endif
    while (!events.empty()) {
        const SimEvent ev = events.top();
        if (ev.time > duration) break;
        events.pop();
#ifndef NDEBUG
        assert(ev.time > last_time || (ev.time == last_time && ev.sequence > last_seq));
        last_time = ev.time;
        last_seq = ev.sequence;
#endif

        switch (ev.kind) {
            case EventKind::enqueue: {
                detail::FlowRuntime& f = rt[static_cast<std::size_t>(ev.flow)];
                FlowCounters& c = trace.counters[static_cast<std::size_t>(ev.flow)];
                ++c.sent;
                if (queue.enqueue(LinkQueue::Packet{ev.flow, ev.time})) {
                    if (auto t = queue.dequeue_time_after_enqueue(ev.time))
                        schedule(*t, EventKind::dequeue, -1);
                } else {
                    ++c.lost;
                    rec = TraceRecord{ev.time, ev.flow, f.controller.rate() * inv_scale,
                                      0.0, static_cast<double>(queue.depth()) * inv_scale, true};
                    sink.on_record(rec);
                    schedule(ev.time + f.base_rtt, EventKind::loss_signal, ev.flow);
                }
                const double rate = f.controller.rate();
                const double gap = rate > 0.0 ? 1.0 / rate : duration;
                schedule(ev.time + gap, EventKind::enqueue, ev.flow);
                break;
            }
            case EventKind::dequeue: {
                auto p = queue.dequeue(ev.time);
                if (queue.has_pending_dequeue())
                    schedule(queue.next_dequeue_time(), EventKind::dequeue, -1);
                if (!p) break;  // stale event
                detail::FlowRuntime& f = rt[static_cast<std::size_t>(p->flow)];
                ++trace.counters[static_cast<std::size_t>(p->flow)].delivered;
                double out = ev.time;
                if (ack_path) {
                    // ACKs traverse the return queue before the propagation
                    // delay; a dropped ACK loses the feedback only, the data
                    // packet still counts as delivered.
                    auto exit_time = ack_path->admit(ev.time);
                    if (!exit_time) break;
                    out = *exit_time;
                }
                const double deliver = out + f.base_rtt + sample_ack_noise(noise, f.base_rtt, f.rng);
                schedule(deliver, EventKind::ack, p->flow, p->send_time);
                break;
            }
            case EventKind::ack: {
                detail::FlowRuntime& f = rt[static_cast<std::size_t>(ev.flow)];
                const double rtt = ev.time - ev.payload;
                auto decision = f.controller.on_ack(RttObservation{rtt, ev.time, false});
                const double rate = decision ? decision->pacing_rate : f.controller.rate();
                rec = TraceRecord{ev.time, ev.flow, rate * inv_scale, rtt,
                                  static_cast<double>(queue.depth()) * inv_scale, false};
                sink.on_record(rec);
                break;
            }
            case EventKind::loss_signal: {
                rt[static_cast<std::size_t>(ev.flow)].controller.on_loss(ev.time);
                break;
            }
        }
    }

    // Conservation: every sent packet is delivered, lost, or still queued.
    std::int64_t sent = 0, delivered = 0, lost = 0;
    for (const auto& c : trace.counters) {
        sent += c.sent;
        delivered += c.delivered;
        lost += c.lost;
    }
    assert(sent == delivered + lost + queue.depth());
    (void)sent; (void)delivered; (void)lost;

    return trace;
}

inline Trace run_simulation(const LinkSpec& link, const std::vector<FlowSpec>& flows,
                            double duration, const NoiseSpec& noise, double rate_scale = 1.0) {
    std::vector<TraceRecord> records;
    VectorSink sink(records);
    Trace trace = run_simulation(link, flows, duration, noise, sink, rate_scale);
    trace.records = std::move(records);
    return trace;
}

}  // namespace mpcpace
