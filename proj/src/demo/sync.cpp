#include "fswsim/demo/sync.hpp"

#include "fswsim/fault.hpp"

#include <algorithm>

namespace fswsim::demo
{

const char* to_string(Mode m)
{
    return m == Mode::science ? "science" : "observing";
}

const char* to_string(SyncEvent e)
{
    return e == SyncEvent::begin_observation ? "begin_observation" : "end_observation";
}

SyncEvent sync_event_from_string(const std::string& s)
{
    if (s == "begin_observation") return SyncEvent::begin_observation;
    if (s == "end_observation") return SyncEvent::end_observation;
    throw Fault(FaultKind::handler_fault, "unknown state machine event '" + s + "'");
}

Mode transition(Mode m, SyncEvent e)
{
    if (m == Mode::science && e == SyncEvent::begin_observation) return Mode::observing;
    if (m == Mode::observing && e == SyncEvent::end_observation) return Mode::science;
    throw Fault(FaultKind::invalid_transition,
                std::string("event ") + to_string(e) + " is invalid in mode " + to_string(m));
}

ObservationStateMachine::ObservationStateMachine(Role role, Protocol protocol, double retransmit_interval_s)
    : role_{role}, protocol_{protocol}, retransmit_interval_{SimTime::from_seconds(retransmit_interval_s)}
{
}

AppliedTransition ObservationStateMachine::apply(std::uint64_t seq, SyncEvent e)
{
    mode_ = transition(mode_, e);
    last_seq_ = seq;
    return {seq, e, mode_};
}

nlohmann::json ObservationStateMachine::announce(const Announcement& a) const
{
    return {{"type", "sync"}, {"v", 1}, {"seq", a.seq}, {"kind", to_string(a.event)}};
}

SyncEffects ObservationStateMachine::on_local_event(SyncEvent e, SimTime now)
{
    SyncEffects fx;
    if (role_ != Role::active) return fx;
    fx.applied.push_back(apply(last_seq_ + 1, e));
    const Announcement a{last_seq_, e, now};
    fx.to_peer.push_back(announce(a));
    if (protocol_ == Protocol::robust) unacked_.push_back(a);
    return fx;
}

SyncEffects ObservationStateMachine::on_crosslink(const nlohmann::json& msg, SimTime)
{
    SyncEffects fx;
    const std::string type = msg.value("type", "");
    const std::uint64_t seq = msg.value("seq", std::uint64_t{0});

    if (role_ == Role::active)
    {
        if (type == "ack" && protocol_ == Protocol::robust)
            std::erase_if(unacked_, [seq](const Announcement& a) { return a.seq <= seq; });
        return fx;
    }

    if (type != "sync") return fx;
    const SyncEvent e = sync_event_from_string(msg.at("kind").get<std::string>());

    if (protocol_ == Protocol::naive)
    {
        fx.applied.push_back(apply(seq, e));
        return fx;
    }

    if (seq <= last_seq_)
    {
        ++duplicates_;
    }
    else if (seq == last_seq_ + 1)
    {
        fx.applied.push_back(apply(seq, e));
        // Drain anything held behind the gap that just closed.
        bool progressed = true;
        while (progressed)
        {
            progressed = false;
            for (auto it = held_.begin(); it != held_.end(); ++it)
            {
                if (it->seq == last_seq_ + 1)
                {
                    fx.applied.push_back(apply(it->seq, it->event));
                    held_.erase(it);
                    progressed = true;
                    break;
                }
            }
        }
        std::erase_if(held_, [this](const Announcement& a) { return a.seq <= last_seq_; });
    }
    else if (std::none_of(held_.begin(), held_.end(), [seq](const Announcement& a) { return a.seq == seq; }))
    {
        held_.push_back({seq, e, SimTime{}});
    }
    else
    {
        ++duplicates_;
    }
    fx.to_peer.push_back({{"type", "ack"}, {"v", 1}, {"seq", last_seq_}});
    return fx;
}

SyncEffects ObservationStateMachine::on_tick(SimTime now)
{
    SyncEffects fx;
    if (role_ != Role::active || protocol_ != Protocol::robust) return fx;
    for (auto& a : unacked_)
    {
        if (a.last_sent + retransmit_interval_ <= now)
        {
            a.last_sent = now;
            fx.to_peer.push_back(announce(a));
        }
    }
    return fx;
}

std::optional<SimTime> ObservationStateMachine::next_deadline() const
{
    std::optional<SimTime> out;
    for (const auto& a : unacked_)
    {
        const SimTime due = a.last_sent + retransmit_interval_;
        if (!out || due < *out) out = due;
    }
    return out;
}

} // namespace fswsim::demo
