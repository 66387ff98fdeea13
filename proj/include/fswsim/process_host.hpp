#pragma once

#include "fswsim/comms_model.hpp"
#include "fswsim/continuum.hpp"
#include "fswsim/event_kernel.hpp"
#include "fswsim/heap_model.hpp"
#include "fswsim/rng.hpp"
#include "fswsim/telemetry.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fswsim
{

enum class InputKind
{
    bus_telemetry,
    gnss_message,
    crosslink,
    ground_command,
    tick,
};

enum class OutputKind
{
    maneuver,       ///< {"dv_rtn": [r, t, n] m/s, optional "t": ns}
    observation,
    mission_mode,
    crosslink_send, ///< {"to": process name, "message": any}
    telemetry,
    tick_request,   ///< {"t": ns}
};

const char* to_string(InputKind k);
const char* to_string(OutputKind k);

struct Output
{
    OutputKind kind;
    nlohmann::json payload;
};

using ProcessId = std::size_t;
class ProcessHost;
struct VirtualProcess;

/// What a handler sees of its environment. All effects leave through emit().
class ProcessContext
{
public:
    SimTime now() const { return now_; }
    const std::string& name() const;
    ProcessId id() const;

    void emit(OutputKind kind, nlohmann::json payload);
    void request_tick(SimTime t) { emit(OutputKind::tick_request, {{"t", t.ns()}}); }
    void send_crosslink(const std::string& to, nlohmann::json message)
    {
        emit(OutputKind::crosslink_send, {{"to", to}, {"message", std::move(message)}});
    }

    template <class T>
    T& state()
    {
        return *static_cast<T*>(state_ptr());
    }

    HeapImage& heap();
    const std::vector<Output>& outputs() const { return outputs_; }

private:
    friend class ProcessHost;
    ProcessContext(VirtualProcess& p, SimTime now) : process_{p}, now_{now} {}
    void* state_ptr();

    VirtualProcess& process_;
    SimTime now_;
    std::vector<Output> outputs_;
};

using Handler = std::function<void(ProcessContext&, const nlohmann::json&)>;
/// Builds the process state; runs with the process heap current.
using StateFactory = std::function<std::shared_ptr<void>(ProcessContext&)>;

struct ProcessDef
{
    std::string name;
    std::string body; ///< spacecraft the process flies on (empty: none)
    std::map<InputKind, Handler> handlers;
    StateFactory init;
    std::uint64_t heap_limit{50'000'000};
};

/// Allocates state (object and control block) inside the current process heap.
template <class T, class... Args>
std::shared_ptr<void> make_process_state(Args&&... args)
{
    return std::allocate_shared<T>(HeapAllocator<T>(current_heap()), std::forward<Args>(args)...);
}

struct PendingTick
{
    SimTime time;
    EventId event;
};

struct VirtualProcess
{
    ProcessId id{0};
    ProcessDef def;
    std::optional<BodyId> body;
    std::unique_ptr<HeapImage> heap; // declared before state: outlives it
    std::shared_ptr<void> state;
    std::optional<PendingTick> pending_tick;
    std::uint64_t deliveries{0};
    std::uint64_t peak_transient{0};
    std::uint64_t logged_resting{UINT64_MAX};
    std::uint64_t logged_transient{UINT64_MAX};
};

/// Hosts virtual flight-software processes inside the kernel's single
/// execution stream.
///
/// Each handler invocation runs with its process heap current; the previous
/// designation is restored when the handler returns or faults. Outputs are
/// captured in emission order and routed after the handler returns.
class ProcessHost
{
public:
    using OutputObserver = std::function<void(const VirtualProcess&, const Output&, SimTime)>;

    ProcessHost(Kernel& kernel, Continuum* continuum, CommsModel* comms, TelemetryLog* telemetry, RngRoot* rng);

    /// Throws Fault(duplicate_name); faults raised by init propagate.
    ProcessId spawn(ProcessDef def);

    /// Runs the handler for `kind` at time t (must equal kernel now() when
    /// called from an event). Returns the outputs in emission order.
    std::vector<Output> deliver(ProcessId id, InputKind kind, const nlohmann::json& payload, SimTime t);

    /// Schedules a delivery at t plus jitter.
    EventId post(ProcessId id, InputKind kind, nlohmann::json payload, SimTime t);

    /// Replaces the single pending tick. Throws Fault(past_time).
    void request_tick(ProcessId id, SimTime t);

    void route_output(ProcessId id, const Output& out);
    /// As above, stamping records with the delivery time `now`.
    void route_output(ProcessId id, const Output& out, SimTime now);

    std::optional<ProcessId> find(const std::string& name) const;
    VirtualProcess& process(ProcessId id);
    const VirtualProcess& process(ProcessId id) const;
    std::size_t size() const { return processes_.size(); }

    /// Standard deviation (s) of the non-negative scheduling jitter added to
    /// posted deliveries; 0 disables.
    void set_jitter(double sigma_s) { jitter_sigma_ = sigma_s; }
    void set_output_observer(OutputObserver obs) { observer_ = std::move(obs); }

private:
    void log_heap(VirtualProcess& p, SimTime t);
    SimTime jittered(VirtualProcess& p, SimTime t);

    Kernel& kernel_;
    Continuum* continuum_;
    CommsModel* comms_;
    TelemetryLog* telemetry_;
    RngRoot* rng_;
    double jitter_sigma_{0.0};
    OutputObserver observer_;
    std::vector<std::unique_ptr<VirtualProcess>> processes_;
};

} // namespace fswsim
