#pragma once

#include "fswsim/sim_time.hpp"

#include <optional>
#include <stdexcept>
#include <string>

namespace fswsim
{

enum class FaultKind
{
    past_time,
    time_reversal,
    reentry,
    epoch_mismatch,
    hyperbolic_chief,
    memory_exhaustion,
    zero_size,
    invalid_free,
    overflow,
    duplicate_name,
    unknown_process,
    unknown_link_target,
    handler_fault,
    invalid_transition,
    out_of_order,
    no_common_epoch,
    no_fix,
    epoch_misaligned,
    continuum_access,
    config_error,
};

const char* to_string(FaultKind kind);

/// Structured description of a fault: what, where, and when.
struct FaultReport
{
    FaultKind kind{FaultKind::handler_fault};
    std::string process;  ///< empty when not raised inside a virtual process
    std::string reason;
    std::optional<SimTime> time;

    std::string describe() const;
};

/// Every simulator error is a Fault. Faults raised while dispatching an event
/// halt the run at that event; the kernel stamps the time and the host stamps
/// the process before the fault propagates out of run_until().
class Fault : public std::runtime_error
{
public:
    Fault(FaultKind kind, std::string reason)
        : std::runtime_error(reason), report_{kind, {}, std::move(reason), std::nullopt}
    {
        what_ = report_.describe();
    }

    const FaultReport& report() const { return report_; }
    FaultKind kind() const { return report_.kind; }

    void set_process(const std::string& name)
    {
        if (report_.process.empty()) report_.process = name;
        what_ = report_.describe();
    }
    void set_time(SimTime t)
    {
        if (!report_.time) report_.time = t;
        what_ = report_.describe();
    }

    const char* what() const noexcept override { return what_.c_str(); }

private:
    FaultReport report_;
    std::string what_;
};

inline const char* to_string(FaultKind kind)
{
    switch (kind)
    {
    case FaultKind::past_time: return "PastTime";
    case FaultKind::time_reversal: return "TimeReversal";
    case FaultKind::reentry: return "ReentryFault";
    case FaultKind::epoch_mismatch: return "EpochMismatch";
    case FaultKind::hyperbolic_chief: return "HyperbolicChief";
    case FaultKind::memory_exhaustion: return "MemoryExhaustionFault";
    case FaultKind::zero_size: return "ZeroSize";
    case FaultKind::invalid_free: return "InvalidFree";
    case FaultKind::overflow: return "Overflow";
    case FaultKind::duplicate_name: return "DuplicateName";
    case FaultKind::unknown_process: return "UnknownProcess";
    case FaultKind::unknown_link_target: return "UnknownLinkTarget";
    case FaultKind::handler_fault: return "HandlerFault";
    case FaultKind::invalid_transition: return "InvalidTransition";
    case FaultKind::out_of_order: return "OutOfOrderFault";
    case FaultKind::no_common_epoch: return "NoCommonEpoch";
    case FaultKind::no_fix: return "NoFix";
    case FaultKind::epoch_misaligned: return "EpochMisaligned";
    case FaultKind::continuum_access: return "ContinuumAccess";
    case FaultKind::config_error: return "ConfigError";
    }
    return "Unknown";
}

inline std::string FaultReport::describe() const
{
    std::string out = to_string(kind);
    if (!process.empty()) out += " in process '" + process + "'";
    if (time) out += " at t=" + time->str();
    out += ": " + reason;
    return out;
}

} // namespace fswsim
