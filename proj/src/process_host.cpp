#include "fswsim/process_host.hpp"

#include <cmath>

namespace fswsim
{

const char* to_string(InputKind k)
{
    switch (k)
    {
    case InputKind::bus_telemetry: return "bus_telemetry";
    case InputKind::gnss_message: return "gnss_message";
    case InputKind::crosslink: return "crosslink";
    case InputKind::ground_command: return "ground_command";
    case InputKind::tick: return "tick";
    }
    return "?";
}

const char* to_string(OutputKind k)
{
    switch (k)
    {
    case OutputKind::maneuver: return "maneuver";
    case OutputKind::observation: return "observation";
    case OutputKind::mission_mode: return "mission_mode";
    case OutputKind::crosslink_send: return "crosslink_send";
    case OutputKind::telemetry: return "telemetry";
    case OutputKind::tick_request: return "tick_request";
    }
    return "?";
}

const std::string& ProcessContext::name() const
{
    return process_.def.name;
}

ProcessId ProcessContext::id() const
{
    return process_.id;
}

void ProcessContext::emit(OutputKind kind, nlohmann::json payload)
{
    outputs_.push_back({kind, std::move(payload)});
}

HeapImage& ProcessContext::heap()
{
    return *process_.heap;
}

void* ProcessContext::state_ptr()
{
    return process_.state.get();
}

ProcessHost::ProcessHost(Kernel& kernel, Continuum* continuum, CommsModel* comms, TelemetryLog* telemetry,
                         RngRoot* rng)
    : kernel_{kernel}, continuum_{continuum}, comms_{comms}, telemetry_{telemetry}, rng_{rng}
{
    if (comms_)
    {
        comms_->set_delivery_handler([this](const Delivery& d, SimTime t) {
            const auto dst = find(d.dst);
            if (!dst) throw Fault(FaultKind::unknown_link_target, "crosslink delivered to unknown process '" + d.dst + "'");
            nlohmann::json payload{{"from", d.src}, {"message", d.message}};
            if (jitter_sigma_ > 0.0)
                post(*dst, InputKind::crosslink, std::move(payload), t);
            else
                deliver(*dst, InputKind::crosslink, payload, t);
        });
    }
}

ProcessId ProcessHost::spawn(ProcessDef def)
{
    if (find(def.name)) throw Fault(FaultKind::duplicate_name, "process '" + def.name + "' already exists");
    auto p = std::make_unique<VirtualProcess>();
    p->id = processes_.size();
    if (!def.body.empty())
    {
        if (!continuum_) throw Fault(FaultKind::config_error, "process '" + def.name + "' names a body but no continuum");
        p->body = continuum_->find(def.body);
    }
    p->heap = std::make_unique<HeapImage>(def.heap_limit);
    p->def = std::move(def);

    if (p->def.init)
    {
        ProcessContext ctx(*p, kernel_.now());
        CurrentHeapScope scope(p->heap.get());
        try
        {
            p->state = p->def.init(ctx);
        }
        catch (Fault& f)
        {
            f.set_process(p->def.name);
            throw;
        }
    }
    processes_.push_back(std::move(p));
    return processes_.back()->id;
}

std::optional<ProcessId> ProcessHost::find(const std::string& name) const
{
    for (const auto& p : processes_)
        if (p->def.name == name) return p->id;
    return std::nullopt;
}

VirtualProcess& ProcessHost::process(ProcessId id)
{
    if (id >= processes_.size()) throw Fault(FaultKind::unknown_process, "no process with id " + std::to_string(id));
    return *processes_[id];
}

const VirtualProcess& ProcessHost::process(ProcessId id) const
{
    if (id >= processes_.size()) throw Fault(FaultKind::unknown_process, "no process with id " + std::to_string(id));
    return *processes_[id];
}

std::vector<Output> ProcessHost::deliver(ProcessId id, InputKind kind, const nlohmann::json& payload, SimTime t)
{
    VirtualProcess& p = process(id);
    if (kind == InputKind::tick) p.pending_tick.reset();
    ++p.deliveries;

    ProcessContext ctx(p, t);
    auto handler = p.def.handlers.find(kind);
    {
        CurrentHeapScope scope(p.heap.get());
        p.heap->reset_window_peak();
        try
        {
            if (handler != p.def.handlers.end() && handler->second) handler->second(ctx, payload);
        }
        catch (Fault& f)
        {
            f.set_process(p.def.name);
            f.set_time(t);
            throw;
        }
        catch (const std::exception& e)
        {
            Fault f(FaultKind::handler_fault, e.what());
            f.set_process(p.def.name);
            f.set_time(t);
            throw f;
        }
    }
    log_heap(p, t);

    try
    {
        for (const Output& out : ctx.outputs_) route_output(id, out, t);
    }
    catch (Fault& f)
    {
        f.set_process(p.def.name);
        throw;
    }
    return std::move(ctx.outputs_);
}

SimTime ProcessHost::jittered(VirtualProcess& p, SimTime t)
{
    if (!(jitter_sigma_ > 0.0) || !rng_) return t;
    const double j = std::abs(rng_->stream("jitter:" + p.def.name).normal()) * jitter_sigma_;
    return t + SimTime::from_seconds(j);
}

EventId ProcessHost::post(ProcessId id, InputKind kind, nlohmann::json payload, SimTime t)
{
    VirtualProcess& p = process(id);
    const SimTime at = jittered(p, t);
    return kernel_.schedule(at, [this, id, kind, payload = std::move(payload)](Kernel& k, const EventInfo&) {
        deliver(id, kind, payload, k.now());
    });
}

void ProcessHost::request_tick(ProcessId id, SimTime t)
{
    VirtualProcess& p = process(id);
    if (t < kernel_.now())
    {
        Fault f(FaultKind::past_time, "tick requested at " + t.str() + " before now " + kernel_.now().str());
        f.set_process(p.def.name);
        throw f;
    }
    if (p.pending_tick) kernel_.cancel(p.pending_tick->event);
    const EventId ev = kernel_.schedule(t, [this, id](Kernel& k, const EventInfo&) {
        deliver(id, InputKind::tick, nlohmann::json{{"t", k.now().ns()}}, k.now());
    });
    p.pending_tick = PendingTick{t, ev};
}

void ProcessHost::route_output(ProcessId id, const Output& out)
{
    route_output(id, out, kernel_.now());
}

void ProcessHost::route_output(ProcessId id, const Output& out, SimTime now)
{
    VirtualProcess& p = process(id);
    if (observer_) observer_(p, out, now);

    switch (out.kind)
    {
    case OutputKind::tick_request:
        request_tick(id, SimTime::from_ns(out.payload.at("t").get<std::int64_t>()));
        break;
    case OutputKind::crosslink_send: {
        if (!comms_) throw Fault(FaultKind::unknown_link_target, "no radio model configured");
        const std::string to = out.payload.at("to").get<std::string>();
        if (!find(to)) throw Fault(FaultKind::unknown_link_target, "crosslink to unknown peer '" + to + "'");
        comms_->send(p.def.name, to, out.payload.at("message"), now);
        break;
    }
    case OutputKind::maneuver: {
        if (!continuum_ || !p.body)
            throw Fault(FaultKind::config_error, "maneuver from process without a body");
        const auto& dv = out.payload.at("dv_rtn");
        const Vec3 dv_rtn{dv.at(0).get<double>(), dv.at(1).get<double>(), dv.at(2).get<double>()};
        SimTime at = now;
        if (out.payload.contains("t")) at = SimTime::from_ns(out.payload.at("t").get<std::int64_t>());
        if (at < now) throw Fault(FaultKind::past_time, "maneuver commanded in the past at " + at.str());
        const BodyId body = *p.body;
        kernel_.schedule(
            at, [this, body, dv_rtn](Kernel& k, const EventInfo&) { continuum_->apply_impulse(body, k.now(), dv_rtn); },
            {}, true);
        if (telemetry_) telemetry_->record(now, p.def.name, to_string(out.kind), out.payload);
        break;
    }
    case OutputKind::observation:
    case OutputKind::mission_mode:
    case OutputKind::telemetry:
        if (telemetry_) telemetry_->record(now, p.def.name, to_string(out.kind), out.payload);
        break;
    }
}

void ProcessHost::log_heap(VirtualProcess& p, SimTime t)
{
    const std::uint64_t resting = p.heap->stats().allocated_bytes;
    const std::uint64_t transient = p.heap->window_peak();
    p.peak_transient = std::max(p.peak_transient, transient);
    if (!telemetry_ || (resting == p.logged_resting && transient == p.logged_transient)) return;
    p.logged_resting = resting;
    p.logged_transient = transient;
    const HeapStats s = p.heap->stats();
    telemetry_->record(t, p.def.name, "heap",
                       {{"resting", resting},
                        {"transient_peak", transient},
                        {"extent", s.extent},
                        {"free_blocks", s.free_block_count},
                        {"fragmentation", s.fragmentation}});
    telemetry_->series_row("heap_" + p.def.name, {"t_s", "resting", "transient_peak", "extent"},
                           {t.seconds(), static_cast<double>(resting), static_cast<double>(transient),
                            static_cast<double>(s.extent)});
}

} // namespace fswsim
