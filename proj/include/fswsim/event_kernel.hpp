#pragma once

#include "fswsim/fault.hpp"
#include "fswsim/sim_time.hpp"

#include <any>
#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

namespace fswsim
{

class Kernel;

using EventId = std::uint64_t;

/// Read-only view of the event being dispatched.
struct EventInfo
{
    SimTime time;
    EventId seq{0};
    bool needs_continuum{false};
    const std::any* payload{nullptr};
};

using Action = std::function<void(Kernel&, const EventInfo&)>;

struct RunSummary
{
    std::uint64_t events_executed{0};
    std::uint64_t propagations_performed{0};
    double wall_seconds{0.0};
    SimTime final_time;
};

/// Min-heap of pending events keyed by (time, seq).
///
/// Cancelled events stay in the heap and are skipped on removal.
class EventQueue
{
public:
    struct Entry
    {
        SimTime time;
        EventId seq;
        bool needs_continuum;
        Action action;
        std::any payload;
    };

    void push(Entry e);
    /// Removes and returns the live entry with the smallest (time, seq); false when empty.
    bool pop_min(Entry& out);
    /// Time of the next live entry, or nullopt.
    const Entry* peek_live();
    bool cancel(EventId id) { return pending_.erase(id) > 0; }
    bool is_pending(EventId id) const { return pending_.contains(id); }
    std::size_t live_size() const { return pending_.size(); }

private:
    void drop_dead_top();

    std::vector<Entry> heap_;
    std::unordered_set<EventId> pending_;
};

/// Deterministic discrete-event kernel.
///
/// Owns simulation time and the event set; dispatches events in (time, seq)
/// order, FIFO for equal times. Continuous state is not advanced here: actions
/// that need it query the continuum, which propagates lazily and reports each
/// propagation back through note_propagation().
class Kernel
{
public:
    Kernel() = default;
    Kernel(const Kernel&) = delete;
    Kernel& operator=(const Kernel&) = delete;

    /// Throws Fault(past_time) when t < now().
    EventId schedule(SimTime t, Action action, std::any payload = {}, bool needs_continuum = false);
    bool cancel(EventId id);
    bool is_pending(EventId id) const { return queue_.is_pending(id); }

    /// Executes every event with time <= t_end. A Fault raised by an action
    /// halts the run at that event (now() stays at its time, remaining events
    /// stay pending) and propagates to the caller stamped with the time.
    RunSummary run_until(SimTime t_end);

    SimTime now() const { return now_; }
    std::size_t pending_count() const { return queue_.live_size(); }

    /// The event being dispatched, or nullptr outside run_until().
    const EventInfo* current_event() const { return dispatching_ ? &current_ : nullptr; }

    /// Called by the continuum whenever it advances state. Counted at most once
    /// per dispatched event.
    void note_propagation();

    /// Hook invoked before each dispatched event (used for eager propagation).
    void set_pre_event_hook(std::function<void(SimTime)> hook) { pre_event_ = std::move(hook); }

    /// Optional trace of dispatched (time, seq) pairs.
    void enable_trace(bool on) { trace_on_ = on; }
    const std::vector<std::pair<SimTime, EventId>>& trace() const { return trace_; }

    std::uint64_t total_events() const { return total_events_; }
    std::uint64_t total_propagations() const { return total_propagations_; }

private:
    EventQueue queue_;
    SimTime now_;
    EventId next_seq_{0};
    bool dispatching_{false};
    EventInfo current_{};
    EventId last_propagation_event_{UINT64_MAX};
    std::uint64_t run_propagations_{0};
    std::uint64_t total_events_{0};
    std::uint64_t total_propagations_{0};
    std::function<void(SimTime)> pre_event_;
    bool trace_on_{false};
    std::vector<std::pair<SimTime, EventId>> trace_;
};

} // namespace fswsim
