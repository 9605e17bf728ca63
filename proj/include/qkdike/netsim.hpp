#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "qkdike/error.hpp"
#include "qkdike/sha256.hpp"

namespace qkdike {

/// Impairments applied to tunnel traffic only; KME calls never pass through
/// the channel. Delay is per direction and per fragment (netem semantics),
/// so one round trip costs 2 * one_way_delay_ms.
struct NetworkProfile {
    std::string label = "default";
    double one_way_delay_ms = 0;
    double jitter_ms = 0;         // uniform in [-jitter, +jitter]
    double loss_probability = 0;  // [0, 1)
    std::uint64_t seed = 0;

    void validate() const {
        if (one_way_delay_ms < 0)
            raise(ErrorCode::config_error, "profile '" + label + "': negative delay");
        if (jitter_ms < 0)
            raise(ErrorCode::config_error, "profile '" + label + "': negative jitter");
        if (loss_probability < 0 || loss_probability >= 1)
            raise(ErrorCode::config_error,
                  "profile '" + label + "': loss must be in [0,1)");
    }
};

/// Virtual clock plus pending events ordered by (time, insertion sequence).
/// Ties resolve in insertion order, so a run is fully determined by its
/// inputs. Time never decreases.
class EventQueue {
public:
    double now() const { return now_; }

    void schedule(double time, std::function<void()> fn) {
        events_.push(Event{std::max(time, now_), next_seq_++, std::move(fn)});
    }

    bool empty() const { return events_.empty(); }
    std::size_t pending() const { return events_.size(); }

    /// Pops the earliest event, advances the clock to it, and runs it.
    void advance() {
        if (events_.empty()) raise(ErrorCode::empty_queue, "no pending events");
        Event event = events_.top();
        events_.pop();
        now_ = event.time;
        event.fn();
    }

    void run_until(const std::function<bool()>& done) {
        while (!done() && !events_.empty()) advance();
    }

private:
    struct Event {
        double time;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    double now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> events_;
};

/// One seeded impairment stream shared by both directions of a handshake.
/// Each fragment gets independent loss and jitter draws.
class Channel {
public:
    explicit Channel(const NetworkProfile& profile)
        : profile_(profile), rng_(profile.seed) {
        profile_.validate();
    }

    const NetworkProfile& profile() const { return profile_; }

    /// Returns the delivery time for a fragment sent at send_time, or nullopt
    /// when the fragment is dropped. Loss is an outcome, not an error.
    std::optional<double> transit(double send_time) {
        ++fragments_sent_;
        if (profile_.loss_probability > 0 && rng_.uniform01() < profile_.loss_probability) {
            ++fragments_dropped_;
            return std::nullopt;
        }
        double offset = profile_.one_way_delay_ms;
        if (profile_.jitter_ms > 0)
            offset += (2.0 * rng_.uniform01() - 1.0) * profile_.jitter_ms;
        if (offset < 0) offset = 0;
        return send_time + offset;
    }

    std::uint64_t fragments_sent() const { return fragments_sent_; }
    std::uint64_t fragments_dropped() const { return fragments_dropped_; }

private:
    NetworkProfile profile_;
    SplitMix64 rng_;
    std::uint64_t fragments_sent_ = 0;
    std::uint64_t fragments_dropped_ = 0;
};

}  // namespace qkdike
