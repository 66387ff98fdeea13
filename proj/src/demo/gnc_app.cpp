#include "fswsim/demo/gnc_app.hpp"

#include "fswsim/fault.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace fswsim::demo
{

namespace
{

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw Fault(FaultKind::config_error, where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key)) throw Fault(FaultKind::config_error, "unknown key '" + key + "' in " + where);
}

struct GncState
{
    explicit GncState(const GncConfig& c)
        : cfg{c},
          sync{c.role, c.protocol, c.retransmit_interval_s},
          remote{c.queue_policy, c.queue_capacity},
          local{QueuePolicy::insert_sorted, c.queue_capacity}
    {
    }

    GncConfig cfg;
    ObservationStateMachine sync;
    NavQueue remote;
    NavQueue local;
    std::int64_t last_reported_epoch{-1};
    std::optional<SimTime> requested_tick;
    std::optional<SimTime> burn_at;
    double burn_dv{0};
};

void emit_sync(ProcessContext& ctx, GncState& st, const SyncEffects& fx)
{
    for (const auto& msg : fx.to_peer)
        if (!st.cfg.peer.empty()) ctx.send_crosslink(st.cfg.peer, msg);
    for (const auto& a : fx.applied)
        ctx.emit(OutputKind::mission_mode,
                 {{"seq", a.seq}, {"event", to_string(a.event)}, {"mode", to_string(a.mode_after)},
                  {"role", st.cfg.role == Role::active ? "active" : "passive"}});
}

// Single-tick protocol: only the earliest timer is ever requested.
void rearm(ProcessContext& ctx, GncState& st)
{
    std::optional<SimTime> next = st.sync.next_deadline();
    if (st.burn_at && (!next || *st.burn_at < *next)) next = st.burn_at;
    if (!next) return;
    const SimTime at = std::max(*next, ctx.now());
    if (st.requested_tick && *st.requested_tick == at) return;
    ctx.request_tick(at);
    st.requested_tick = at;
}

void on_command(ProcessContext& ctx, const nlohmann::json& in)
{
    auto& st = ctx.state<GncState>();
    const std::string cmd = in.at("cmd").get<std::string>();
    if (cmd == "begin_observation" || cmd == "end_observation")
    {
        if (st.cfg.sync_enabled) emit_sync(ctx, st, st.sync.on_local_event(sync_event_from_string(cmd), ctx.now()));
    }
    else if (cmd == "solve")
    {
        const auto rep = in.contains("representation")
                             ? matrix_representation_from_string(in.at("representation").get<std::string>())
                             : st.cfg.workload;
        const std::size_t n = in.value("n", st.cfg.workload_n);
        const WorkloadResult r = run_matrix_workload(ctx.heap(), rep, n);
        ctx.emit(OutputKind::telemetry, {{"type", "workload"},
                                         {"representation", to_string(rep)},
                                         {"n", n},
                                         {"bytes", r.bytes_requested},
                                         {"transient_allocated", r.transient_allocated},
                                         {"checksum", r.checksum}});
    }
    else if (cmd == "transfer")
    {
        if (st.local.empty()) throw Fault(FaultKind::no_fix, "transfer commanded before any navigation solution");
        const NavEntry& pvt = st.local.entries().back();
        const Vec3 r{pvt.position[0], pvt.position[1], pvt.position[2]};
        const Vec3 v{pvt.velocity[0], pvt.velocity[1], pvt.velocity[2]};
        const double a_now = cartesian_to_elements(r, v, st.cfg.mu).a;
        const double a_target = in.at("target_a_m").get<double>();
        const TransferPlan plan = plan_transfer(a_now, a_target, st.cfg.mu);
        ctx.emit(OutputKind::maneuver, {{"dv_rtn", {0.0, plan.dv1, 0.0}}});
        st.burn_at = ctx.now() + SimTime::from_seconds(plan.transfer_time);
        st.burn_dv = plan.dv2;
        ctx.emit(OutputKind::telemetry, {{"type", "transfer_plan"},
                                         {"a_estimate_m", a_now},
                                         {"a_target_m", a_target},
                                         {"dv1", plan.dv1},
                                         {"dv2", plan.dv2},
                                         {"transfer_time_s", plan.transfer_time}});
    }
    else
    {
        throw Fault(FaultKind::handler_fault, "unknown ground command '" + cmd + "'");
    }
    rearm(ctx, st);
}

void on_gnss(ProcessContext& ctx, const nlohmann::json& in)
{
    auto& st = ctx.state<GncState>();
    const auto& pvt = in.at("pvt");
    if (pvt.is_null()) return;
    NavEntry own;
    own.epoch = in.at("epoch").get<std::int64_t>();
    own.position = pvt.at("r").get<std::array<double, 3>>();
    own.velocity = pvt.at("v").get<std::array<double, 3>>();
    st.local.ingest(own);

    if (!st.cfg.nav_enabled) return;
    if (!st.cfg.peer.empty() && own.epoch % st.cfg.nav_send_interval_s == 0)
        ctx.send_crosslink(st.cfg.peer, own.to_message());

    if (st.remote.empty()) return;
    try
    {
        const RelativeEstimate est = relative_nav_update(st.local, st.remote);
        if (est.epoch > st.last_reported_epoch)
        {
            st.last_reported_epoch = est.epoch;
            ctx.emit(OutputKind::observation,
                     {{"type", "relnav"},
                      {"epoch", est.epoch},
                      {"rel", {est.relative_position.x(), est.relative_position.y(), est.relative_position.z()}}});
        }
    }
    catch (const Fault& f)
    {
        if (f.kind() != FaultKind::no_common_epoch) throw;
    }
}

void on_crosslink(ProcessContext& ctx, const nlohmann::json& in)
{
    auto& st = ctx.state<GncState>();
    const auto& msg = in.at("message");
    const std::string type = msg.value("type", "");
    if (type == "sync" || type == "ack")
    {
        if (st.cfg.sync_enabled) emit_sync(ctx, st, st.sync.on_crosslink(msg, ctx.now()));
    }
    else if (type == "nav")
    {
        if (st.cfg.nav_enabled) st.remote.ingest(NavEntry::from_message(msg));
    }
    rearm(ctx, st);
}

void on_tick(ProcessContext& ctx, const nlohmann::json&)
{
    auto& st = ctx.state<GncState>();
    st.requested_tick.reset();
    if (st.cfg.sync_enabled) emit_sync(ctx, st, st.sync.on_tick(ctx.now()));
    if (st.burn_at && *st.burn_at <= ctx.now())
    {
        ctx.emit(OutputKind::maneuver, {{"dv_rtn", {0.0, st.burn_dv, 0.0}}});
        st.burn_at.reset();
    }
    rearm(ctx, st);
}

} // namespace

GncConfig GncConfig::from_json(const nlohmann::json& j)
{
    check_keys(j,
               {"peer", "sync", "role", "protocol", "retransmit_interval_s", "nav", "queue_policy",
                "nav_send_interval_s", "queue_capacity", "workload", "workload_n"},
               "gnc config");
    GncConfig c;
    try
    {
        c.peer = j.value("peer", c.peer);
        c.sync_enabled = j.value("sync", c.sync_enabled);
        const std::string role = j.value("role", std::string("active"));
        if (role != "active" && role != "passive") throw Fault(FaultKind::config_error, "role must be active|passive");
        c.role = role == "active" ? Role::active : Role::passive;
        const std::string protocol = j.value("protocol", std::string("robust"));
        if (protocol != "naive" && protocol != "robust") throw Fault(FaultKind::config_error, "protocol must be naive|robust");
        c.protocol = protocol == "naive" ? Protocol::naive : Protocol::robust;
        c.retransmit_interval_s = j.value("retransmit_interval_s", c.retransmit_interval_s);
        if (!(c.retransmit_interval_s > 0)) throw Fault(FaultKind::config_error, "retransmit_interval_s must be positive");
        c.nav_enabled = j.value("nav", c.nav_enabled);
        const std::string policy = j.value("queue_policy", std::string("insert_sorted"));
        if (policy != "assume_sorted" && policy != "insert_sorted")
            throw Fault(FaultKind::config_error, "queue_policy must be assume_sorted|insert_sorted");
        c.queue_policy = policy == "assume_sorted" ? QueuePolicy::assume_sorted : QueuePolicy::insert_sorted;
        c.nav_send_interval_s = j.value("nav_send_interval_s", c.nav_send_interval_s);
        if (c.nav_send_interval_s < 1) throw Fault(FaultKind::config_error, "nav_send_interval_s must be >= 1");
        c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
        c.workload = matrix_representation_from_string(j.value("workload", std::string("sparse")));
        c.workload_n = j.value("workload_n", c.workload_n);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Fault(FaultKind::config_error, std::string("gnc config: ") + e.what());
    }
    return c;
}

TransferPlan plan_transfer(double a_from, double a_to, double mu)
{
    const double a_t = 0.5 * (a_from + a_to);
    TransferPlan p;
    p.dv1 = std::sqrt(mu / a_from) * (std::sqrt(a_to / a_t) - 1.0);
    p.dv2 = std::sqrt(mu / a_to) * (1.0 - std::sqrt(a_from / a_t));
    p.transfer_time = std::numbers::pi * std::sqrt(a_t * a_t * a_t / mu);
    return p;
}

ProcessDef make_gnc_process(std::string name, std::string body, GncConfig cfg, std::uint64_t heap_limit)
{
    ProcessDef def;
    def.name = std::move(name);
    def.body = std::move(body);
    def.heap_limit = heap_limit;
    def.init = [cfg](ProcessContext&) { return make_process_state<GncState>(cfg); };
    def.handlers[InputKind::ground_command] = on_command;
    def.handlers[InputKind::gnss_message] = on_gnss;
    def.handlers[InputKind::crosslink] = on_crosslink;
    def.handlers[InputKind::tick] = on_tick;
    return def;
}

} // namespace fswsim::demo
