#include "fswsim/harness.hpp"

#include "fswsim/comms_model.hpp"
#include "fswsim/continuum.hpp"
#include "fswsim/gnss_model.hpp"
#include "fswsim/process_host.hpp"
#include "fswsim/rng.hpp"
#include "fswsim/telemetry.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace fswsim
{

namespace
{

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

class Simulation
{
public:
    Simulation(const ScenarioConfig& cfg, std::uint64_t seed)
        : cfg_{cfg},
          rng_{seed},
          continuum_{cfg.force_model, &kernel_},
          comms_{kernel_, rng_},
          host_{kernel_, &continuum_, &comms_, &telemetry_, &rng_}
    {
        setup_bodies();
        setup_links();
        setup_processes();
        setup_gnss();
        setup_samples();
        setup_commands();
        if (cfg_.inject_wall_clock)
        {
            kernel_.schedule(SimTime{}, [this](Kernel& k, const EventInfo&) {
                const auto ns = std::chrono::steady_clock::now().time_since_epoch().count();
                rng_.absorb(static_cast<std::uint64_t>(ns));
                telemetry_.record(k.now(), "debug", "wall_clock", {{"ns", ns}});
            });
        }
    }

    RunReport run(const RunOptions& options)
    {
        RunReport r;
        r.scenario = cfg_.name;
        r.seed = rng_.seed();

        const auto t0 = std::chrono::steady_clock::now();
        try
        {
            kernel_.run_until(cfg_.duration);
        }
        catch (const Fault& f)
        {
            r.fault = f.report();
        }
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const SimTime end = kernel_.now();
        if (r.fault)
        {
            telemetry_.record(end, r.fault->process.empty() ? "kernel" : r.fault->process, "fault",
                              {{"kind", to_string(r.fault->kind)},
                               {"process", r.fault->process},
                               {"reason", r.fault->reason},
                               {"t", r.fault->time ? r.fault->time->ns() : end.ns()}});
        }
        r.metrics = metrics(end, r.fault);
        telemetry_.record(end, "harness", "summary", r.metrics);

        r.fingerprint = hex32(rng_.fingerprint_draw());
        r.telemetry = telemetry_.jsonl();
        r.analysis_hash = sha256_hex(r.telemetry);
        r.telemetry_records = telemetry_.records().size();
        r.speedup = r.wall_seconds > 0 ? end.seconds() / r.wall_seconds : 0.0;
        if (options.keep_outputs)
        {
            for (const auto& s : telemetry_.series_names()) r.csv[s] = telemetry_.csv(s);
        }
        else
        {
            r.telemetry.clear();
        }
        return r;
    }

private:
    void setup_bodies()
    {
        const double mu = cfg_.force_model.mu;
        for (const BodySpec& spec : cfg_.bodies)
        {
            RandomStream& disp = rng_.stream("dispersion:" + spec.name);
            const double da = disp.normal() * spec.dispersion.a_m;
            const double dm = disp.normal() * spec.dispersion.mean_anomaly_deg * std::numbers::pi / 180.0;
            const double dcd = disp.normal() * spec.dispersion.cd;

            BodyState s;
            s.mass = spec.mass;
            s.drag_area = spec.drag_area;
            s.cd = spec.cd + dcd;
            s.srp_area = spec.srp_area;
            s.cr = spec.cr;
            if (spec.offset_rtn)
            {
                // Rigidly co-rotating with the first body: bounded relative motion
                // to first order for a near-circular chief.
                const BodyState& chief = initial_.front();
                const Mat3 R = rtn_to_inertial(chief.position, chief.velocity);
                const Vec3 dr = R * *spec.offset_rtn;
                const Vec3 omega = chief.position.cross(chief.velocity) / chief.position.squaredNorm();
                s.position = chief.position + dr;
                s.velocity = chief.velocity + omega.cross(dr);
            }
            else
            {
                KeplerianElements el = spec.elements;
                el.a += da;
                el.mean_anomaly = wrap_two_pi(el.mean_anomaly + dm);
                const CartesianState c = elements_to_cartesian(el, mu);
                s.position = c.position;
                s.velocity = c.velocity;
            }
            initial_.push_back(s);
            body_ids_.push_back(continuum_.add_body(spec.name, s));
        }
        dv_.assign(cfg_.bodies.size(), 0.0);
    }

    void setup_links()
    {
        for (const LinkSpec& l : cfg_.links) comms_.add_link(l.from, l.to, l.params);
    }

    void setup_processes()
    {
        host_.set_jitter(cfg_.process_jitter_s);
        for (const ProcessSpec& p : cfg_.processes)
            host_.spawn(demo::make_gnc_process(p.name, p.body, p.gnc, p.heap_limit));
        host_.set_output_observer([this](const VirtualProcess& p, const Output& out, SimTime t) { observe(p, out, t); });
    }

    void setup_gnss()
    {
        if (!cfg_.gnss.enabled) return;
        ConstellationConfig cc;
        cc.mu = cfg_.force_model.mu;
        cc.rtn_sigma = cfg_.gnss.rtn_sigma;
        constellation_.emplace(cfg_.gnss.almanac == "builtin" ? builtin_almanac() : load_almanac(cfg_.gnss.almanac), cc,
                               &rng_);
        for (std::size_t b = 0; b < cfg_.bodies.size(); ++b)
        {
            std::vector<ProcessId> users;
            for (std::size_t i = 0; i < cfg_.processes.size(); ++i)
                if (cfg_.processes[i].body == cfg_.bodies[b].name) users.push_back(*host_.find(cfg_.processes[i].name));
            if (users.empty()) continue;
            receivers_.push_back(std::make_unique<Receiver>(cfg_.bodies[b].name, cfg_.gnss.receiver, *constellation_, rng_));
            schedule_gnss(b, receivers_.back().get(), std::move(users), SimTime{});
        }
    }

    void schedule_gnss(std::size_t b, Receiver* rx, std::vector<ProcessId> users, SimTime t)
    {
        if (t > cfg_.duration) return;
        kernel_.schedule(
            t,
            [this, b, rx, users = std::move(users)](Kernel& k, const EventInfo&) mutable {
                const SimTime now = k.now();
                const BodyState& state = continuum_.request_state(body_ids_[b], now);
                const std::int64_t sec = now.ns() / 1'000'000'000;
                truth_[{sec, b}] = state.position;
                while (!truth_.empty() && truth_.begin()->first.first < sec - 1200) truth_.erase(truth_.begin());

                json meas = json::array();
                for (const GnssMeasurement& m : rx->measure(state, now))
                    meas.push_back({{"prn", m.prn},
                                    {"pseudorange", m.pseudorange},
                                    {"carrier_phase", m.carrier_phase},
                                    {"elevation_deg", m.elevation_deg}});
                json pvt = nullptr;
                try
                {
                    const PvtSolution s = rx->pvt_solution(state, now);
                    pvt = {{"r", vec_json(s.position)}, {"v", vec_json(s.velocity)}};
                }
                catch (const Fault& f)
                {
                    if (f.kind() != FaultKind::no_fix) throw;
                }
                const json payload{{"epoch", sec}, {"pvt", pvt}, {"measurements", std::move(meas)}};
                for (ProcessId id : users)
                {
                    if (cfg_.process_jitter_s > 0)
                        host_.post(id, InputKind::gnss_message, payload, now);
                    else
                        host_.deliver(id, InputKind::gnss_message, payload, now);
                }
                schedule_gnss(b, rx, std::move(users), now + SimTime::whole_seconds(cfg_.gnss.cadence_s));
            },
            {}, true);
    }

    void setup_samples()
    {
        if (cfg_.bodies.empty()) return;
        schedule_sample(SimTime{});
    }

    void schedule_sample(SimTime t)
    {
        if (t > cfg_.duration) return;
        kernel_.schedule(
            t,
            [this](Kernel& k, const EventInfo&) {
                const SimTime now = k.now();
                for (std::size_t b = 0; b < body_ids_.size(); ++b)
                {
                    const BodyState& s = continuum_.request_state(body_ids_[b], now);
                    const std::string& name = cfg_.bodies[b].name;
                    telemetry_.record(now, name, "state", {{"r", vec_json(s.position)}, {"v", vec_json(s.velocity)}});
                    telemetry_.series_row("state_" + name, {"t_s", "x", "y", "z", "vx", "vy", "vz"},
                                          {now.seconds(), s.position.x(), s.position.y(), s.position.z(),
                                           s.velocity.x(), s.velocity.y(), s.velocity.z()});
                    if (b == 0) continue;
                    const BodyState& chief = continuum_.request_state(body_ids_[0], now);
                    const auto roe = to_relative_elements(chief, s, cfg_.force_model.mu).as_array();
                    telemetry_.series_row("roe_" + name, {"t_s", "a_da", "a_dlambda", "a_dex", "a_dey", "a_dix", "a_diy"},
                                          {now.seconds(), chief_a(chief) * roe[0], chief_a(chief) * roe[1],
                                           chief_a(chief) * roe[2], chief_a(chief) * roe[3], chief_a(chief) * roe[4],
                                           chief_a(chief) * roe[5]});
                }
                schedule_sample(now + cfg_.sample_cadence);
            },
            {}, true);
    }

    double chief_a(const BodyState& chief) const
    {
        return cartesian_to_elements(chief.position, chief.velocity, cfg_.force_model.mu).a;
    }

    void setup_commands()
    {
        for (const CommandSpec& c : cfg_.commands)
        {
            const ProcessId id = *host_.find(c.process);
            kernel_.schedule(c.t, [this, id, payload = c.payload](Kernel& k, const EventInfo&) {
                host_.deliver(id, InputKind::ground_command, payload, k.now());
            });
        }
    }

    void observe(const VirtualProcess& p, const Output& out, SimTime t)
    {
        switch (out.kind)
        {
        case OutputKind::maneuver: {
            const auto& dv = out.payload.at("dv_rtn");
            const double mag = Vec3{dv[0].get<double>(), dv[1].get<double>(), dv[2].get<double>()}.norm();
            dv_[*p.body] += mag;
            break;
        }
        case OutputKind::mission_mode:
            modes_[p.def.name].push_back(out.payload.at("event").get<std::string>());
            break;
        case OutputKind::observation:
            if (out.payload.value("type", "") == "relnav") score_nav(p, out.payload, t);
            break;
        default:
            break;
        }
    }

    void score_nav(const VirtualProcess& p, const json& obs, SimTime t)
    {
        const std::string& peer = cfg_.processes[p.id].gnc.peer;
        const auto peer_id = host_.find(peer);
        if (!p.body || !peer_id || !host_.process(*peer_id).body) return;
        const std::int64_t epoch = obs.at("epoch").get<std::int64_t>();
        const auto own = truth_.find({epoch, *p.body});
        const auto other = truth_.find({epoch, *host_.process(*peer_id).body});
        if (own == truth_.end() || other == truth_.end())
        {
            ++nav_unscored_;
            return;
        }
        const auto& rel = obs.at("rel");
        const Vec3 est{rel[0].get<double>(), rel[1].get<double>(), rel[2].get<double>()};
        const double err = (est - (other->second - own->second)).norm();
        nav_errors_.push_back(err);
        telemetry_.series_row("nav_error_" + p.def.name, {"t_s", "epoch_s", "error_m"},
                              {t.seconds(), static_cast<double>(epoch), err});
    }

    json metrics(SimTime end, const std::optional<FaultReport>& fault) const
    {
        json m;
        m["events_executed"] = kernel_.total_events();
        m["propagations_performed"] = kernel_.total_propagations();
        m["final_time_s"] = end.seconds();
        m["fault"] = fault ? json(to_string(fault->kind)) : json(nullptr);

        double dv_all = 0;
        json dv = json::object();
        for (std::size_t b = 0; b < cfg_.bodies.size(); ++b)
        {
            dv[cfg_.bodies[b].name] = dv_[b];
            dv_all += dv_[b];
        }
        m["total_dv_ms"] = dv;
        m["total_dv_all_ms"] = dv_all;

        json nav{{"count", nav_errors_.size()}, {"unscored", nav_unscored_}};
        if (!nav_errors_.empty())
        {
            double sum = 0, sq = 0, mx = 0;
            for (double e : nav_errors_)
            {
                sum += e;
                sq += e * e;
                mx = std::max(mx, e);
            }
            nav["mean_m"] = sum / nav_errors_.size();
            nav["rms_m"] = std::sqrt(sq / nav_errors_.size());
            nav["max_m"] = mx;
        }
        m["nav_error"] = nav;

        json heap = json::object();
        json modes = json::object();
        bool consistent = true;
        for (std::size_t i = 0; i < host_.size(); ++i)
        {
            const VirtualProcess& p = host_.process(i);
            const HeapStats s = p.heap->stats();
            heap[p.def.name] = {{"resting_bytes", s.allocated_bytes},
                                {"peak_allocated_bytes", s.peak_allocated},
                                {"transient_peak_bytes", p.peak_transient},
                                {"peak_extent_bytes", s.peak_extent},
                                {"limit_bytes", p.heap->limit()}};
            const auto mine = modes_.find(p.def.name);
            modes[p.def.name] = mine == modes_.end() ? 0 : mine->second.size();

            const demo::GncConfig& g = cfg_.processes[i].gnc;
            if (g.sync_enabled && g.role == demo::Role::passive && !g.peer.empty())
            {
                static const std::vector<std::string> none;
                const auto peer = modes_.find(g.peer);
                const auto& a = peer == modes_.end() ? none : peer->second;
                const auto& b = mine == modes_.end() ? none : mine->second;
                if (b.size() > a.size() || !std::equal(b.begin(), b.end(), a.begin())) consistent = false;
            }
        }
        m["heap"] = heap;
        m["mode_changes"] = modes;
        m["sync_prefix_consistent"] = consistent;

        json links = json::object();
        for (const auto& [key, link] : comms_.links())
        {
            const LinkStats& s = link.stats();
            links[key.first + "->" + key.second] = {{"sent", s.sent},
                                                    {"dropped", s.dropped},
                                                    {"delivered", s.delivered},
                                                    {"reordered", s.reordered},
                                                    {"in_flight", s.in_flight()}};
        }
        m["links"] = links;
        return m;
    }

    const ScenarioConfig& cfg_;
    RngRoot rng_;
    Kernel kernel_;
    Continuum continuum_;
    TelemetryLog telemetry_;
    CommsModel comms_;
    ProcessHost host_;
    std::optional<Constellation> constellation_;
    std::vector<std::unique_ptr<Receiver>> receivers_;
    std::vector<BodyState> initial_;
    std::vector<BodyId> body_ids_;
    std::vector<double> dv_;
    std::map<std::pair<std::int64_t, std::size_t>, Vec3> truth_; ///< (epoch s, body) -> true position
    std::map<std::string, std::vector<std::string>> modes_;
    std::vector<double> nav_errors_;
    std::uint64_t nav_unscored_{0};
};

} // namespace

json RunReport::to_json() const
{
    json j{{"scenario", scenario},
           {"seed", seed},
           {"fingerprint", fingerprint},
           {"analysis_hash", analysis_hash},
           {"metrics", metrics},
           {"telemetry_records", telemetry_records},
           {"wall_seconds", wall_seconds},
           {"speedup", speedup}};
    if (fault)
    {
        j["fault"] = {{"kind", to_string(fault->kind)}, {"process", fault->process}, {"reason", fault->reason}};
        if (fault->time) j["fault"]["t_ns"] = fault->time->ns();
    }
    else
    {
        j["fault"] = nullptr;
    }
    return j;
}

RunReport run_scenario(const ScenarioConfig& config, std::uint64_t seed, RunOptions options)
{
    Simulation sim{config, seed};
    return sim.run(options);
}

void write_run_outputs(const RunReport& report, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(fs::path{dir} / name, std::ios::binary);
        if (!out) throw Fault(FaultKind::config_error, "cannot write " + (fs::path{dir} / name).string());
        out << text;
    };
    write("report.json", report.to_json().dump(2) + "\n");
    write("telemetry.jsonl", report.telemetry);
    for (const auto& [name, text] : report.csv) write(name + ".csv", text);
}

double metric_value(const json& metrics, const std::string& name)
{
    const json* node = &metrics;
    std::stringstream ss(name);
    std::string part;
    while (std::getline(ss, part, '.'))
    {
        if (!node->is_object() || !node->contains(part))
            throw Fault(FaultKind::config_error, "unknown metric '" + name + "'");
        node = &node->at(part);
    }
    if (node->is_boolean()) return node->get<bool>() ? 1.0 : 0.0;
    if (!node->is_number()) throw Fault(FaultKind::config_error, "metric '" + name + "' is not numeric");
    return node->get<double>();
}

Histogram Histogram::build(const std::vector<double>& values, std::size_t bins)
{
    Histogram h;
    if (values.empty()) return h;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) bins = 1;
    const double width = hi == lo ? 1.0 : (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(i == bins && hi != lo ? hi : lo + width * i);
    h.counts.assign(bins, 0);
    for (double v : values)
    {
        auto k = hi == lo ? 0 : static_cast<std::size_t>((v - lo) / width);
        ++h.counts[std::min(k, bins - 1)];
    }
    return h;
}

std::string Histogram::csv() const
{
    std::string out = "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < counts.size(); ++i)
        out += format_double(edges[i]) + "," + format_double(edges[i + 1]) + "," + std::to_string(counts[i]) + "\n";
    return out;
}

json MonteCarloSummary::to_json() const
{
    json runs_json = json::array();
    for (const auto& r : runs) runs_json.push_back(r.to_json());
    return {{"metric", metric},
            {"n_runs", runs.size()},
            {"n_faults", faults},
            {"mean", mean},
            {"std", stddev},
            {"values", values},
            {"histogram", {{"edges", histogram.edges}, {"counts", histogram.counts}}},
            {"fingerprint_collisions", fingerprint_collisions},
            {"runs", runs_json}};
}

MonteCarloSummary monte_carlo(const ScenarioConfig& config, const std::vector<std::uint64_t>& seeds,
                              const std::string& metric, unsigned threads)
{
    if (seeds.empty()) throw Fault(FaultKind::config_error, "monte carlo needs at least one seed");
    MonteCarloSummary s;
    s.metric = metric;
    s.runs.resize(seeds.size());

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(seeds.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++)
        {
            try
            {
                s.runs[i] = run_scenario(config, seeds[i], {.keep_outputs = false});
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    if (threads <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    std::map<std::string, std::uint64_t> seen;
    for (const RunReport& r : s.runs)
    {
        if (auto [it, fresh] = seen.emplace(r.fingerprint, r.seed); !fresh)
            s.fingerprint_collisions.push_back(r.fingerprint + " (seeds " + std::to_string(it->second) + ", " +
                                               std::to_string(r.seed) + ")");
        if (r.fault)
        {
            ++s.faults;
            continue;
        }
        s.values.push_back(metric_value(r.metrics, metric));
    }
    if (!s.values.empty())
    {
        double sum = 0;
        for (double v : s.values) sum += v;
        s.mean = sum / s.values.size();
        if (s.values.size() > 1)
        {
            double sq = 0;
            for (double v : s.values) sq += (v - s.mean) * (v - s.mean);
            s.stddev = std::sqrt(sq / (s.values.size() - 1));
        }
    }
    s.histogram = Histogram::build(s.values);
    return s;
}

json DeterminismResult::to_json() const
{
    return {{"pass", pass},
            {"fingerprints", fingerprints},
            {"hashes", hashes},
            {"divergence", divergence ? json(*divergence) : json(nullptr)}};
}

DeterminismResult check_determinism(const ScenarioConfig& config, std::uint64_t seed, int runs)
{
    if (runs < 2) throw Fault(FaultKind::config_error, "determinism check needs at least 2 runs");
    return check_determinism(config, std::vector<std::uint64_t>(static_cast<std::size_t>(runs), seed));
}

DeterminismResult check_determinism(const ScenarioConfig& config, const std::vector<std::uint64_t>& seeds)
{
    if (seeds.size() < 2) throw Fault(FaultKind::config_error, "determinism check needs at least 2 runs");
    if (std::adjacent_find(seeds.begin(), seeds.end(), std::not_equal_to<>{}) != seeds.end())
        throw Fault(FaultKind::config_error, "determinism check given different seeds");

    DeterminismResult d;
    d.pass = true;
    std::string reference;
    for (std::size_t i = 0; i < seeds.size(); ++i)
    {
        RunReport r = run_scenario(config, seeds[i]);
        d.fingerprints.push_back(r.fingerprint);
        d.hashes.push_back(r.analysis_hash);
        if (i == 0)
        {
            reference = std::move(r.telemetry);
            continue;
        }
        if (r.fingerprint == d.fingerprints[0] && r.analysis_hash == d.hashes[0]) continue;
        d.pass = false;
        if (d.divergence) continue;
        std::istringstream a(reference), b(r.telemetry);
        std::string la, lb;
        for (std::size_t line = 0;; ++line)
        {
            const bool ga = static_cast<bool>(std::getline(a, la));
            const bool gb = static_cast<bool>(std::getline(b, lb));
            if (!ga && !gb)
            {
                d.divergence = "run " + std::to_string(i) + ": telemetry identical, fingerprint differs";
                break;
            }
            if (ga != gb || la != lb)
            {
                d.divergence = "run " + std::to_string(i) + ", record " + std::to_string(line) + ": " +
                               (ga ? la : "<end>") + " vs " + (gb ? lb : "<end>");
                break;
            }
        }
    }
    return d;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text)
{
    std::vector<std::uint64_t> seeds;
    try
    {
        if (const auto dots = text.find(".."); dots != std::string::npos)
        {
            const std::uint64_t a = std::stoull(text.substr(0, dots));
            const std::uint64_t b = std::stoull(text.substr(dots + 2));
            if (b < a) throw Fault(FaultKind::config_error, "empty seed range '" + text + "'");
            for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
        }
        else
        {
            std::stringstream ss(text);
            std::string part;
            while (std::getline(ss, part, ',')) seeds.push_back(std::stoull(part));
        }
    }
    catch (const std::logic_error&)
    {
        throw Fault(FaultKind::config_error, "bad seed list '" + text + "'");
    }
    if (seeds.empty()) throw Fault(FaultKind::config_error, "empty seed list");
    return seeds;
}

} // namespace fswsim
