#include "fswsim/scenario.hpp"

#include "fswsim/fault.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

namespace fswsim
{

namespace
{

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw Fault(FaultKind::config_error, where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key)) throw Fault(FaultKind::config_error, "unknown key '" + key + "' in " + where);
}

template <class T>
T required(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key)) throw Fault(FaultKind::config_error, std::string("missing '") + key + "' in " + where);
    return j.at(key).get<T>();
}

SigmaBounds parse_bounds(const json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 2) throw Fault(FaultKind::config_error, where + " must be [min, max]");
    return {j[0].get<double>(), j[1].get<double>()};
}

ForceModelConfig parse_force_model(const json& j)
{
    check_keys(j, {"mu", "include_j2", "j2", "earth_radius_m", "include_drag", "atmosphere", "earth_rotation_rate",
                   "step_s", "dynamics"},
               "force_model");
    ForceModelConfig f;
    f.mu = j.value("mu", f.mu);
    f.include_j2 = j.value("include_j2", f.include_j2);
    f.j2 = j.value("j2", f.j2);
    f.earth_radius = j.value("earth_radius_m", f.earth_radius);
    f.include_drag = j.value("include_drag", f.include_drag);
    f.earth_rotation_rate = j.value("earth_rotation_rate", f.earth_rotation_rate);
    f.integrator_step = j.value("step_s", f.integrator_step);
    if (j.contains("atmosphere"))
    {
        const auto& a = j.at("atmosphere");
        check_keys(a, {"rho0", "h0_m", "scale_height_m"}, "force_model.atmosphere");
        f.atmosphere.rho0 = a.value("rho0", f.atmosphere.rho0);
        f.atmosphere.h0 = a.value("h0_m", f.atmosphere.h0);
        f.atmosphere.scale_height = a.value("scale_height_m", f.atmosphere.scale_height);
    }
    const std::string dyn = j.value("dynamics", std::string("rk4"));
    if (dyn == "rk4")
        f.dynamics = Dynamics::rk4;
    else if (dyn == "identity")
        f.dynamics = Dynamics::identity;
    else
        throw Fault(FaultKind::config_error, "force_model.dynamics must be rk4|identity");
    try
    {
        f.validate();
    }
    catch (const std::exception& e)
    {
        throw Fault(FaultKind::config_error, std::string("force_model: ") + e.what());
    }
    return f;
}

BodySpec parse_body(const json& j, std::size_t index)
{
    const std::string where = "bodies[" + std::to_string(index) + "]";
    check_keys(j, {"name", "a_m", "e", "i_deg", "raan_deg", "argp_deg", "mean_anomaly_deg", "offset_rtn_m", "mass_kg",
                   "drag_area_m2", "cd", "srp_area_m2", "cr", "dispersion"},
               where);
    BodySpec b;
    b.name = required<std::string>(j, "name", where);
    if (j.contains("offset_rtn_m"))
    {
        const auto o = j.at("offset_rtn_m").get<std::array<double, 3>>();
        b.offset_rtn = Vec3{o[0], o[1], o[2]};
    }
    else
    {
        b.elements.a = required<double>(j, "a_m", where);
        b.elements.e = j.value("e", 0.0);
        b.elements.i = j.value("i_deg", 0.0) * kDeg;
        b.elements.raan = j.value("raan_deg", 0.0) * kDeg;
        b.elements.argp = j.value("argp_deg", 0.0) * kDeg;
        b.elements.mean_anomaly = j.value("mean_anomaly_deg", 0.0) * kDeg;
        if (!(b.elements.a > 0) || b.elements.e < 0 || b.elements.e >= 1)
            throw Fault(FaultKind::config_error, where + ": orbit must be elliptical with a > 0");
    }
    b.mass = j.value("mass_kg", b.mass);
    b.drag_area = j.value("drag_area_m2", b.drag_area);
    b.cd = j.value("cd", b.cd);
    b.srp_area = j.value("srp_area_m2", b.srp_area);
    b.cr = j.value("cr", b.cr);
    if (!(b.mass > 0)) throw Fault(FaultKind::config_error, where + ": mass_kg must be positive");
    if (j.contains("dispersion"))
    {
        const auto& d = j.at("dispersion");
        check_keys(d, {"a_m", "mean_anomaly_deg", "cd"}, where + ".dispersion");
        b.dispersion.a_m = d.value("a_m", 0.0);
        b.dispersion.mean_anomaly_deg = d.value("mean_anomaly_deg", 0.0);
        b.dispersion.cd = d.value("cd", 0.0);
        if (b.dispersion.a_m < 0 || b.dispersion.mean_anomaly_deg < 0 || b.dispersion.cd < 0)
            throw Fault(FaultKind::config_error, where + ": dispersion sigmas must be non-negative");
    }
    return b;
}

ProcessSpec parse_process(const json& j, std::size_t index)
{
    const std::string where = "processes[" + std::to_string(index) + "]";
    check_keys(j, {"name", "body", "heap_limit_bytes", "app"}, where);
    ProcessSpec p;
    p.name = required<std::string>(j, "name", where);
    p.body = j.value("body", std::string{});
    p.heap_limit = j.value("heap_limit_bytes", p.heap_limit);
    if (j.contains("app")) p.gnc = demo::GncConfig::from_json(j.at("app"));
    return p;
}

LinkSpec parse_link(const json& j, std::size_t index)
{
    const std::string where = "links[" + std::to_string(index) + "]";
    check_keys(j, {"from", "to", "p_enter", "p_exit", "delay_mu", "delay_sigma", "delay_bounds_s", "start_in_blackout"},
               where);
    LinkSpec l;
    l.from = required<std::string>(j, "from", where);
    l.to = required<std::string>(j, "to", where);
    if (j.contains("delay_bounds_s"))
    {
        if (j.contains("delay_mu") || j.contains("delay_sigma"))
            throw Fault(FaultKind::config_error, where + ": give delay_bounds_s or delay_mu/delay_sigma, not both");
        const SigmaBounds b = parse_bounds(j.at("delay_bounds_s"), where + ".delay_bounds_s");
        l.params = LinkParams::from_bounds(b.min, b.max);
    }
    l.params.p_enter = j.value("p_enter", l.params.p_enter);
    l.params.p_exit = j.value("p_exit", l.params.p_exit);
    l.params.delay_mu = j.value("delay_mu", l.params.delay_mu);
    l.params.delay_sigma = j.value("delay_sigma", l.params.delay_sigma);
    l.params.start_in_blackout = j.value("start_in_blackout", false);
    try
    {
        l.params.validate();
    }
    catch (const std::exception& e)
    {
        throw Fault(FaultKind::config_error, where + ": " + e.what());
    }
    return l;
}

GnssSpec parse_gnss(const json& j)
{
    check_keys(j, {"enabled", "almanac", "cadence_s", "rtn_sigma_m", "attitude", "mask_deg", "pseudorange_sigma_m",
                   "carrier_phase_sigma_m", "pvt_position_sigma_m", "pvt_velocity_sigma_ms", "noise", "ambiguities"},
               "gnss");
    GnssSpec g;
    g.enabled = j.value("enabled", true);
    g.almanac = j.value("almanac", g.almanac);
    g.cadence_s = j.value("cadence_s", g.cadence_s);
    if (g.cadence_s < 1) throw Fault(FaultKind::config_error, "gnss.cadence_s must be >= 1");
    g.rtn_sigma = j.value("rtn_sigma_m", g.rtn_sigma);
    g.attitude = j.value("attitude", g.attitude);
    if (g.attitude == "zenith")
        g.receiver.attitude = zenith_pointing();
    else if (g.attitude == "nadir")
        g.receiver.attitude = nadir_pointing();
    else
        throw Fault(FaultKind::config_error, "gnss.attitude must be zenith|nadir");
    auto& r = g.receiver;
    r.mask_deg = j.value("mask_deg", r.mask_deg);
    if (j.contains("pseudorange_sigma_m")) r.pseudorange = parse_bounds(j.at("pseudorange_sigma_m"), "gnss.pseudorange_sigma_m");
    if (j.contains("carrier_phase_sigma_m"))
        r.carrier_phase = parse_bounds(j.at("carrier_phase_sigma_m"), "gnss.carrier_phase_sigma_m");
    r.pvt_position_sigma = j.value("pvt_position_sigma_m", r.pvt_position_sigma);
    r.pvt_velocity_sigma = j.value("pvt_velocity_sigma_ms", r.pvt_velocity_sigma);
    r.noise_enabled = j.value("noise", r.noise_enabled);
    r.ambiguities_enabled = j.value("ambiguities", r.ambiguities_enabled);
    try
    {
        r.validate();
    }
    catch (const std::exception& e)
    {
        throw Fault(FaultKind::config_error, std::string("gnss: ") + e.what());
    }
    return g;
}

void parse_commands(const json& j, std::vector<CommandSpec>& out)
{
    if (!j.is_array()) throw Fault(FaultKind::config_error, "commands must be a list");
    for (std::size_t i = 0; i < j.size(); ++i)
    {
        const std::string where = "commands[" + std::to_string(i) + "]";
        check_keys(j[i], {"t_s", "process", "payload"}, where);
        CommandSpec c;
        c.t = SimTime::from_seconds(required<double>(j[i], "t_s", where));
        c.process = required<std::string>(j[i], "process", where);
        c.payload = required<json>(j[i], "payload", where);
        out.push_back(std::move(c));
    }
}

// Expands {"process", "start_s", "period_s", "duration_s", "count"} into
// begin/end observation command pairs.
void parse_cycles(const json& j, std::vector<CommandSpec>& out)
{
    if (!j.is_array()) throw Fault(FaultKind::config_error, "observation_cycles must be a list");
    for (std::size_t i = 0; i < j.size(); ++i)
    {
        const std::string where = "observation_cycles[" + std::to_string(i) + "]";
        check_keys(j[i], {"process", "start_s", "period_s", "duration_s", "count"}, where);
        const auto process = required<std::string>(j[i], "process", where);
        const double start = required<double>(j[i], "start_s", where);
        const double period = required<double>(j[i], "period_s", where);
        const double duration = required<double>(j[i], "duration_s", where);
        const int count = required<int>(j[i], "count", where);
        if (!(duration > 0) || !(period > duration) || count < 0)
            throw Fault(FaultKind::config_error, where + ": need 0 < duration_s < period_s and count >= 0");
        for (int k = 0; k < count; ++k)
        {
            const double t0 = start + k * period;
            out.push_back({SimTime::from_seconds(t0), process, {{"cmd", "begin_observation"}}});
            out.push_back({SimTime::from_seconds(t0 + duration), process, {{"cmd", "end_observation"}}});
        }
    }
}

} // namespace

ScenarioConfig ScenarioConfig::from_json(const json& j)
{
    try
    {
        check_keys(j, {"version", "name", "duration_s", "seed", "force_model", "bodies", "processes", "links", "gnss",
                       "commands", "observation_cycles", "outputs", "process_jitter_s", "debug"},
                   "scenario");
        ScenarioConfig c;
        c.version = required<int>(j, "version", "scenario");
        if (c.version != 1) throw Fault(FaultKind::config_error, "unsupported scenario version " + std::to_string(c.version));
        c.name = j.value("name", c.name);
        const double duration = required<double>(j, "duration_s", "scenario");
        if (!(duration >= 0)) throw Fault(FaultKind::config_error, "duration_s must be non-negative");
        c.duration = SimTime::from_seconds(duration);
        c.seed = j.value("seed", c.seed);
        if (j.contains("force_model")) c.force_model = parse_force_model(j.at("force_model"));

        std::set<std::string> names;
        for (std::size_t i = 0; i < j.value("bodies", json::array()).size(); ++i)
        {
            c.bodies.push_back(parse_body(j.at("bodies")[i], i));
            if (!names.insert(c.bodies.back().name).second)
                throw Fault(FaultKind::config_error, "duplicate body '" + c.bodies.back().name + "'");
            if (i == 0 && c.bodies[0].offset_rtn)
                throw Fault(FaultKind::config_error, "the first body needs orbital elements");
        }
        std::set<std::string> pnames;
        for (std::size_t i = 0; i < j.value("processes", json::array()).size(); ++i)
        {
            c.processes.push_back(parse_process(j.at("processes")[i], i));
            const auto& p = c.processes.back();
            if (!pnames.insert(p.name).second) throw Fault(FaultKind::config_error, "duplicate process '" + p.name + "'");
            if (!p.body.empty() && !names.contains(p.body))
                throw Fault(FaultKind::config_error, "process '" + p.name + "' on unknown body '" + p.body + "'");
        }
        for (const auto& p : c.processes)
            if (!p.gnc.peer.empty() && !pnames.contains(p.gnc.peer))
                throw Fault(FaultKind::config_error, "process '" + p.name + "' names unknown peer '" + p.gnc.peer + "'");
        for (std::size_t i = 0; i < j.value("links", json::array()).size(); ++i)
        {
            c.links.push_back(parse_link(j.at("links")[i], i));
            if (!pnames.contains(c.links.back().from) || !pnames.contains(c.links.back().to))
                throw Fault(FaultKind::config_error, "links[" + std::to_string(i) + "] joins unknown processes");
        }
        if (j.contains("gnss")) c.gnss = parse_gnss(j.at("gnss"));
        if (j.contains("commands")) parse_commands(j.at("commands"), c.commands);
        if (j.contains("observation_cycles")) parse_cycles(j.at("observation_cycles"), c.commands);
        for (const auto& cmd : c.commands)
            if (!pnames.contains(cmd.process))
                throw Fault(FaultKind::config_error, "command for unknown process '" + cmd.process + "'");
        std::stable_sort(c.commands.begin(), c.commands.end(),
                         [](const CommandSpec& a, const CommandSpec& b) { return a.t < b.t; });
        if (j.contains("outputs"))
        {
            check_keys(j.at("outputs"), {"sample_cadence_s"}, "outputs");
            const double cadence = j.at("outputs").value("sample_cadence_s", 60.0);
            if (!(cadence > 0)) throw Fault(FaultKind::config_error, "outputs.sample_cadence_s must be positive");
            c.sample_cadence = SimTime::from_seconds(cadence);
        }
        c.process_jitter_s = j.value("process_jitter_s", 0.0);
        if (c.process_jitter_s < 0) throw Fault(FaultKind::config_error, "process_jitter_s must be non-negative");
        if (j.contains("debug"))
        {
            check_keys(j.at("debug"), {"inject_wall_clock"}, "debug");
            c.inject_wall_clock = j.at("debug").value("inject_wall_clock", false);
        }
        return c;
    }
    catch (const json::exception& e)
    {
        throw Fault(FaultKind::config_error, std::string("scenario: ") + e.what());
    }
}

ScenarioConfig ScenarioConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Fault(FaultKind::config_error, "cannot open scenario '" + path + "'");
    json j;
    try
    {
        j = json::parse(in);
    }
    catch (const json::exception& e)
    {
        throw Fault(FaultKind::config_error, "scenario '" + path + "': " + e.what());
    }
    ScenarioConfig c = from_json(j);
    if (c.gnss.almanac != "builtin")
    {
        const std::filesystem::path p{c.gnss.almanac};
        if (p.is_relative()) c.gnss.almanac = (std::filesystem::path{path}.parent_path() / p).string();
    }
    return c;
}

} // namespace fswsim
