#pragma once

#include "fswsim/heap_model.hpp"
#include "fswsim/sim_time.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fswsim::demo
{

enum class Mode
{
    science,
    observing,
};

enum class SyncEvent
{
    begin_observation,
    end_observation,
};

enum class Role
{
    active,
    passive,
};

enum class Protocol
{
    naive,  ///< send each transition once, apply received transitions blindly
    robust, ///< sequence numbers, cumulative acks, retransmission, in-order apply
};

const char* to_string(Mode m);
const char* to_string(SyncEvent e);
SyncEvent sync_event_from_string(const std::string& s);

/// Mode after applying e in m; throws Fault(invalid_transition) for
/// begin-while-observing and end-while-in-science.
Mode transition(Mode m, SyncEvent e);

struct AppliedTransition
{
    std::uint64_t seq;
    SyncEvent event;
    Mode mode_after;
};

/// Side effects requested by the machine for one input.
struct SyncEffects
{
    std::vector<nlohmann::json> to_peer;
    std::vector<AppliedTransition> applied;
};

/// Science/observing state machine replicated from an active to a passive
/// spacecraft over the crosslink.
///
/// Wire messages (version 1):
///   {"type": "sync", "v": 1, "seq": n, "kind": "begin_observation" | "end_observation"}
///   {"type": "ack",  "v": 1, "seq": n}   cumulative: every seq <= n applied
class ObservationStateMachine
{
public:
    ObservationStateMachine(Role role, Protocol protocol, double retransmit_interval_s = 5.0);

    Mode mode() const { return mode_; }
    Role role() const { return role_; }
    Protocol protocol() const { return protocol_; }
    std::uint64_t last_event_seq() const { return last_seq_; }

    /// Local (ground-commanded) event on the active side.
    SyncEffects on_local_event(SyncEvent e, SimTime now);
    /// Message received from the peer.
    SyncEffects on_crosslink(const nlohmann::json& msg, SimTime now);
    /// Retransmits overdue announcements (robust active only).
    SyncEffects on_tick(SimTime now);

    /// Earliest time the machine wants to be woken.
    std::optional<SimTime> next_deadline() const;
    std::size_t unacked() const { return unacked_.size(); }
    std::uint64_t duplicates_discarded() const { return duplicates_; }

private:
    struct Announcement
    {
        std::uint64_t seq;
        SyncEvent event;
        SimTime last_sent;
    };

    nlohmann::json announce(const Announcement& a) const;
    AppliedTransition apply(std::uint64_t seq, SyncEvent e);

    Mode mode_{Mode::science};
    Role role_;
    Protocol protocol_;
    SimTime retransmit_interval_;
    std::uint64_t last_seq_{0}; ///< highest seq applied locally
    std::uint64_t duplicates_{0};
    fsw_vector<Announcement> unacked_;
    fsw_vector<Announcement> held_; ///< passive: arrived ahead of a gap
};

} // namespace fswsim::demo
