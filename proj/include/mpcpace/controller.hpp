#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace mpcpace {

inline constexpr double kUnboundedRate = std::numeric_limits<double>::infinity();

enum class ProbePhase : std::uint8_t { none, probing_low, probing_high };

inline const char* to_string(ProbePhase p) {
    switch (p) {
        case ProbePhase::probing_low: return "probing_low";
        case ProbePhase::probing_high: return "probing_high";
        default: return "none";
    }
}

// Pacing-rate controller configuration.
//
// The three optimization weights satisfy 0 < 1 - c1 - c2 < 1,
// 0 <= c1 <= 1, 0 < c2 < 1. c3 is the coefficient on the rate-variance
// term; when unset it defaults to 1 - c1 - c2, the third weight of the
// tradeoff. target_latency unset selects the midpoint target
// (l_hat_p + l_hat_b) / 2, recomputed per update.
struct ControllerConfig {
    double c1 = 0.2;
    double c2 = 0.3;
    std::optional<double> c3{};          // default: 1 - c1 - c2
    double alpha = 0.125;                // running-average weight
    double tau_d = 1.0;                  // extrema back-off decay time, seconds
    std::optional<double> target_latency{};  // seconds; unset => midpoint mode
    double min_rate = 0.0;
    double max_rate = kUnboundedRate;

    // Probing. probe_interval unset defaults to 10 * tau_d; probe_duration
    // unset means 2 * l_hat_b evaluated when the probe starts.
    std::optional<double> probe_interval{};
    double probe_gain_up = 1.25;
    double probe_gain_down = 0.5;
    std::optional<double> probe_duration{};

    // Update cadence and estimator window lifecycle. min_update_interval
    // coalesces ACKs arriving closer together than this (per-RTT cadence in
    // practice; the rate integral still covers coalesced spans exactly).
    // The bottleneck-rate estimate is held until the accumulation window is
    // at least window_min_age old, and the window is re-anchored once it
    // exceeds window_max_age, in addition to the resets at probe completion
    // and loss required by the estimator.
    double min_update_interval = 0.0;
    double window_min_age = 0.0;
    double window_max_age = kUnboundedRate;

    double c3_value() const { return c3 ? *c3 : 1.0 - c1 - c2; }
    double probe_interval_value() const { return probe_interval ? *probe_interval : 10.0 * tau_d; }

    // Returns an error description, or empty when the config is valid.
    std::string validate() const {
        const double c3v = c3_value();
        if (!(c1 >= 0.0 && c1 <= 1.0)) return "c1 must be in [0, 1]";
        if (!(c2 > 0.0 && c2 < 1.0)) return "c2 must be in (0, 1)";
        const double rest = 1.0 - c1 - c2;
        if (!(rest > 0.0 && rest < 1.0)) return "1 - c1 - c2 must be in (0, 1)";
        if (!(c3v > 0.0)) return "c3 must be positive";
        if (!(alpha > 0.0 && alpha < 1.0)) return "alpha must be in (0, 1)";
        if (!(tau_d > 0.0)) return "tau_d must be positive";
        if (!(min_rate >= 0.0)) return "min_rate must be non-negative";
        if (!(max_rate > min_rate)) return "max_rate must exceed min_rate";
        if (!(probe_interval_value() > 0.0)) return "probe_interval must be positive";
        if (!(probe_gain_up > 1.0)) return "probe_gain_up must exceed 1";
        if (!(probe_gain_down > 0.0 && probe_gain_down < 1.0)) return "probe_gain_down must be in (0, 1)";
        if (probe_duration && !(*probe_duration > 0.0)) return "probe_duration must be positive";
        if (target_latency && !(*target_latency > 0.0)) return "target_latency must be positive";
        if (!(min_update_interval >= 0.0)) return "min_update_interval must be non-negative";
        if (!(window_min_age >= 0.0)) return "window_min_age must be non-negative";
        if (!(window_max_age > 0.0)) return "window_max_age must be positive";
        return {};
    }
};

struct RttObservation {
    double rtt = 0.0;   // seconds
    double now = 0.0;   // seconds, strictly increasing per flow
    bool loss = false;  // ACK-reported loss
};

struct RateDecision {
    double pacing_rate = 0.0;
    ProbePhase probe_phase = ProbePhase::none;
};

struct ControllerState {
    double rate = 0.0;              // r(n)
    double l_hat_p = 0.0;           // estimated propagation latency
    double l_hat_b = 0.0;           // estimated bottleneck latency
    double avg_l = 0.0;             // running average latency
    double last_latency = 0.0;      // l(n)
    double last_update_time = 0.0;  // t(n)
    double sent_integral = 0.0;     // sum of r(k) * dt(k) over the window
    double origin_latency = 0.0;    // l(0) of the estimator window
    double origin_time = 0.0;       // t(0) of the estimator window
    double rb_hat = 0.0;            // bottleneck-rate estimate
    ProbePhase probe_phase = ProbePhase::none;
    double probe_phase_start = 0.0;
    double probe_phase_duration = 0.0;
    double next_probe_time = 0.0;
    bool next_probe_down = true;    // probes alternate, starting low
    double last_loss_time = -1.0;
};

// One-step latency model: l grows by dt * (rate - rb) / rb, clamped into
// [l_lo, l_hi].
inline double predict_latency(double l_n, double rate, double rb, double dt,
                              double l_lo, double l_hi) {
    if (!(rb > 0.0)) throw std::invalid_argument("predict_latency: rb must be positive");
    if (!(dt >= 0.0)) throw std::invalid_argument("predict_latency: dt must be non-negative");
    const double l = l_n + dt * (rate - rb) / rb;
    return std::clamp(l, l_lo, l_hi);
}

// Per-flow model-predictive pacing controller. Pure and deterministic:
// time comes from the caller, never from a clock, and identical
// observation sequences yield identical decision sequences.
class Controller {
public:
    Controller(ControllerConfig config, double initial_rate, double initial_rtt, double now)
        : cfg_(std::move(config)) {
        if (auto err = cfg_.validate(); !err.empty())
            throw std::invalid_argument("invalid controller config: " + err);
        if (!(initial_rtt > 0.0))
            throw std::invalid_argument("initial_rtt must be positive");
        if (!(initial_rate > 0.0) || initial_rate < cfg_.min_rate || initial_rate > cfg_.max_rate)
            throw std::invalid_argument("initial_rate must be positive and within [min_rate, max_rate]");
        st_.rate = initial_rate;
        st_.l_hat_p = st_.l_hat_b = st_.avg_l = st_.last_latency = initial_rtt;
        st_.last_update_time = now;
        st_.origin_latency = initial_rtt;
        st_.origin_time = now;
        st_.sent_integral = 0.0;
        st_.rb_hat = initial_rate;
        st_.next_probe_time = now + cfg_.probe_interval_value();
    }

    const ControllerConfig& config() const { return cfg_; }
    const ControllerState& state() const { return st_; }
    double rate() const { return st_.rate; }

    // Administrative rate override (clamped); the next update proceeds
    // from the assigned rate.
    void set_rate(double rate) { st_.rate = clamp_rate(rate); }

    // Target latency for the current step: the configured value clamped
    // into [l_hat_p, l_hat_b], or their midpoint when no value is set.
    double target_latency() const {
        if (cfg_.target_latency)
            return std::clamp(*cfg_.target_latency, st_.l_hat_p, st_.l_hat_b);
        return 0.5 * (st_.l_hat_p + st_.l_hat_b);
    }

    // Exponential back-off of the latency extrema toward avg_l, then
    // min/max against the new sample. l_hat_p <= l_hat_b holds afterwards
    // because min(s, x) <= s <= max(s, y).
    void backoff_extrema(double l_sample, double dt) {
        const double decay = dt / cfg_.tau_d;
        const double bp = st_.l_hat_p + (st_.avg_l - st_.l_hat_p) * decay;
        const double bb = st_.l_hat_b + (st_.avg_l - st_.l_hat_b) * decay;
        st_.l_hat_p = std::min(l_sample, bp);
        st_.l_hat_b = std::max(l_sample, bb);
    }

    // Bottleneck-rate estimate: sent_integral / (dl + dt) over the current
    // window. The previous estimate is retained for degenerate
    // denominators, empty windows, windows younger than window_min_age,
    // and while a probe is in flight (the deliberate rate excursion
    // violates the latency model at the queue rails; the window restarts
    // when the probe completes).
    double estimate_bottleneck_rate(double l_sample, double now) {
        if (st_.probe_phase != ProbePhase::none) return st_.rb_hat;
        const double age = now - st_.origin_time;
        if (age < cfg_.window_min_age) return st_.rb_hat;
        const double denom = l_sample - st_.origin_latency + age;
        if (denom > 0.0 && st_.sent_integral > 0.0)
            st_.rb_hat = st_.sent_integral / denom;
        return st_.rb_hat;
    }

    // Rate update, Lambda implemented exactly as printed including the
    // (l(n) - dt) term. Pure given the current state.
    double optimize_rate(double l_sample, double dt) const {
        const double k = cfg_.alpha * cfg_.c2 + cfg_.c1;
        const double lambda = k * (l_sample - dt)
                              - cfg_.c1 * target_latency()
                              - cfg_.alpha * cfg_.c2 * st_.avg_l;
        const double c3lp2 = cfg_.c3_value() * st_.l_hat_p * st_.l_hat_p;
        return (c3lp2 * st_.rate - dt * st_.rb_hat * lambda)
               / (c3lp2 + dt * dt * k);
    }

    // Per-ACK update. Returns nullopt for non-monotone timestamps or
    // non-positive RTT samples (state unchanged). Observations arriving
    // within min_update_interval of the previous update are coalesced: the
    // current decision is returned and the spanned interval is integrated
    // at the next processed ACK.
    std::optional<RateDecision> on_ack(const RttObservation& obs) {
        if (!(obs.now > st_.last_update_time)) return std::nullopt;
        if (!(obs.rtt > 0.0)) return std::nullopt;
        if (obs.now - st_.last_update_time < cfg_.min_update_interval)
            return RateDecision{st_.rate, st_.probe_phase};

        const double dt = obs.now - st_.last_update_time;
        st_.sent_integral += st_.rate * dt;
        backoff_extrema(obs.rtt, dt);
        estimate_bottleneck_rate(obs.rtt, obs.now);
        st_.avg_l = (1.0 - cfg_.alpha) * st_.avg_l + cfg_.alpha * obs.rtt;

        if (st_.probe_phase != ProbePhase::none &&
            obs.now - st_.probe_phase_start >= st_.probe_phase_duration) {
            st_.probe_phase = ProbePhase::none;
            reset_window(obs.rtt, obs.now);
            st_.next_probe_time = obs.now + cfg_.probe_interval_value();
        }

        if (st_.probe_phase == ProbePhase::none) {
            if (obs.now >= st_.next_probe_time) {
                begin_probe(st_.next_probe_down ? ProbePhase::probing_low : ProbePhase::probing_high,
                            obs.now);
                st_.next_probe_down = !st_.next_probe_down;
            } else {
                st_.rate = clamp_rate(optimize_rate(obs.rtt, dt));
            }
        }
        // During a probe the rate holds at the probe level.

        st_.last_latency = obs.rtt;
        st_.last_update_time = obs.now;

        if (obs.now - st_.origin_time >= cfg_.window_max_age &&
            st_.probe_phase == ProbePhase::none) {
            reset_window(obs.rtt, obs.now);
        }

        if (obs.loss) return on_loss(obs.now);
        return RateDecision{st_.rate, st_.probe_phase};
    }

    // Loss response: cancel any probe and probe low to refresh l_hat_p.
    // The estimator window restarts so post-loss history is clean.
    RateDecision on_loss(double now) {
        if (!(now >= st_.last_update_time)) return RateDecision{st_.rate, st_.probe_phase};
        begin_probe(ProbePhase::probing_low, now);
        st_.next_probe_down = false;
        st_.last_loss_time = now;
        reset_window(st_.last_latency, now);
        st_.last_update_time = now;
        return RateDecision{st_.rate, st_.probe_phase};
    }

private:
    double clamp_rate(double r) const { return std::clamp(r, cfg_.min_rate, cfg_.max_rate); }

    void reset_window(double l_sample, double now) {
        st_.origin_latency = l_sample;
        st_.origin_time = now;
        st_.sent_integral = 0.0;
    }

    void begin_probe(ProbePhase phase, double now) {
        const double gain = phase == ProbePhase::probing_low ? cfg_.probe_gain_down
                                                             : cfg_.probe_gain_up;
        st_.probe_phase = phase;
        st_.probe_phase_start = now;
        st_.probe_phase_duration = cfg_.probe_duration ? *cfg_.probe_duration
                                                       : 2.0 * st_.l_hat_b;
        st_.rate = clamp_rate(gain * st_.rate);
        st_.next_probe_time = now + cfg_.probe_interval_value();
    }

    ControllerConfig cfg_;
    ControllerState st_;
};

}  // namespace mpcpace
