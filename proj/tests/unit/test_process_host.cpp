#include "fswsim/process_host.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <string>
#include <vector>

using namespace fswsim;
using nlohmann::json;

namespace
{

struct Counter
{
    int value{0};
    std::vector<int, HeapAllocator<int>> history;
};

ProcessDef counting_def(const std::string& name)
{
    ProcessDef d;
    d.name = name;
    d.heap_limit = 1 << 20;
    d.init = [](ProcessContext&) { return make_process_state<Counter>(); };
    d.handlers[InputKind::ground_command] = [](ProcessContext& ctx, const json& in) {
        auto& s = ctx.state<Counter>();
        s.value += in.at("add").get<int>();
        s.history.push_back(s.value);
        ctx.emit(OutputKind::telemetry, {{"value", s.value}});
    };
    return d;
}

struct Rig
{
    Kernel kernel;
    TelemetryLog log;
    RngRoot rng{1};
    ProcessHost host{kernel, nullptr, nullptr, &log, &rng};
};

FaultKind fault_of(const std::function<void()>& f, FaultReport* report = nullptr)
{
    try
    {
        f();
    }
    catch (const Fault& e)
    {
        if (report) *report = e.report();
        return e.kind();
    }
    FAIL("expected a fault");
    return FaultKind::handler_fault;
}

} // namespace

TEST_CASE("processes from one definition are isolated")
{
    Rig r;
    const ProcessId a = r.host.spawn(counting_def("a"));
    const ProcessId b = r.host.spawn(counting_def("b"));
    CHECK(a != b);
    r.host.deliver(a, InputKind::ground_command, {{"add", 5}}, SimTime{});
    r.host.deliver(a, InputKind::ground_command, {{"add", 1}}, SimTime{});
    const auto outs = r.host.deliver(b, InputKind::ground_command, {{"add", 5}}, SimTime{});
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].payload["value"] == 5);

    auto& pa = r.host.process(a);
    auto& pb = r.host.process(b);
    CHECK(static_cast<Counter*>(pa.state.get())->value == 6);
    CHECK(static_cast<Counter*>(pb.state.get())->value == 5);
    CHECK(static_cast<Counter*>(pa.state.get())->history.size() == 2);
    CHECK(static_cast<Counter*>(pb.state.get())->history.size() == 1);
    CHECK(pa.heap->stats().alloc_count > pb.heap->stats().alloc_count);
}

TEST_CASE("identical inputs give identical outputs across processes and replays")
{
    auto script = []() {
        Rig r;
        std::vector<std::string> out;
        const ProcessId a = r.host.spawn(counting_def("a"));
        const ProcessId b = r.host.spawn(counting_def("b"));
        for (int k = 0; k < 20; ++k)
            for (ProcessId id : {a, b})
                for (const auto& o : r.host.deliver(id, InputKind::ground_command, {{"add", k}}, SimTime{}))
                    out.push_back(std::to_string(id) + o.payload.dump());
        return out;
    };
    const auto first = script();
    CHECK(first == script());
    for (std::size_t k = 0; k < first.size(); k += 2) CHECK(first[k].substr(1) == first[k + 1].substr(1));
}

TEST_CASE("duplicate names are rejected")
{
    Rig r;
    r.host.spawn(counting_def("a"));
    CHECK(fault_of([&] { r.host.spawn(counting_def("a")); }) == FaultKind::duplicate_name);
    CHECK(r.host.size() == 1);
}

TEST_CASE("zero heap limit faults at spawn")
{
    Rig r;
    ProcessDef d = counting_def("tiny");
    d.heap_limit = 0;
    FaultReport rep;
    CHECK(fault_of([&] { r.host.spawn(d); }, &rep) == FaultKind::memory_exhaustion);
    CHECK(rep.process == "tiny");
}

TEST_CASE("one byte over the limit names the process and the request")
{
    Rig r;
    ProcessDef d;
    d.name = "greedy";
    d.heap_limit = 4096;
    d.handlers[InputKind::ground_command] = [](ProcessContext& ctx, const json& in) {
        const auto n = in.at("n").get<std::size_t>();
        void* p = fsw_malloc(n);
        CHECK(p != nullptr);
        fsw_free(p);
        ctx.emit(OutputKind::telemetry, {{"ok", n}});
    };
    const ProcessId id = r.host.spawn(d);
    // Largest single payload that fits: the extent counts one header and footer.
    std::size_t fits = 0;
    for (std::size_t n = 4096; n > 0; --n)
    {
        HeapImage probe(4096);
        CurrentHeapScope s(&probe);
        try
        {
            fsw_free(fsw_malloc(n));
            fits = n;
            break;
        }
        catch (const Fault&)
        {
        }
    }
    REQUIRE(fits > 0);
    CHECK(r.host.deliver(id, InputKind::ground_command, {{"n", fits}}, SimTime{}).size() == 1);
    FaultReport rep;
    CHECK(fault_of([&] { r.host.deliver(id, InputKind::ground_command, {{"n", fits + 1}}, seconds(3)); }, &rep) ==
          FaultKind::memory_exhaustion);
    CHECK(rep.process == "greedy");
    CHECK(rep.reason.find(std::to_string(fits + 1)) != std::string::npos);
    REQUIRE(rep.time);
    CHECK(*rep.time == seconds(3));
}

TEST_CASE("heap designation restored after return and after fault")
{
    Rig r;
    ProcessDef d;
    d.name = "p";
    HeapImage* seen = nullptr;
    d.handlers[InputKind::bus_telemetry] = [&](ProcessContext& ctx, const json& in) {
        seen = current_heap();
        CHECK(seen == &ctx.heap());
        if (in.value("fail", false)) throw std::runtime_error("assertion failed in flight code");
    };
    const ProcessId id = r.host.spawn(d);

    HeapImage sentinel(1 << 16);
    CurrentHeapScope outer(&sentinel);
    r.host.deliver(id, InputKind::bus_telemetry, json::object(), SimTime{});
    CHECK(seen == r.host.process(id).heap.get());
    CHECK(current_heap() == &sentinel);

    FaultReport rep;
    CHECK(fault_of([&] { r.host.deliver(id, InputKind::bus_telemetry, {{"fail", true}}, seconds(1)); }, &rep) ==
          FaultKind::handler_fault);
    CHECK(rep.process == "p");
    CHECK(rep.reason.find("assertion failed") != std::string::npos);
    CHECK(current_heap() == &sentinel);

    // A sentinel allocation lands in the outer heap, not the process heap.
    const auto before = r.host.process(id).heap->stats().alloc_count;
    void* q = fsw_malloc(32);
    CHECK(sentinel.stats().alloc_count == 1);
    CHECK(r.host.process(id).heap->stats().alloc_count == before);
    fsw_free(q);
}

TEST_CASE("handler fault halts the kernel run")
{
    Rig r;
    ProcessDef d;
    d.name = "p";
    d.handlers[InputKind::ground_command] = [](ProcessContext&, const json&) { throw std::logic_error("boom"); };
    const ProcessId id = r.host.spawn(d);
    bool later = false;
    r.host.post(id, InputKind::ground_command, json::object(), seconds(5));
    r.kernel.schedule(seconds(6), [&](Kernel&, const EventInfo&) { later = true; });
    FaultReport rep;
    CHECK(fault_of([&] { r.kernel.run_until(seconds(10)); }, &rep) == FaultKind::handler_fault);
    CHECK(rep.process == "p");
    CHECK(*rep.time == seconds(5));
    CHECK_FALSE(later);
}

namespace
{

// Ticks are recorded; each tick may request the next from a script.
struct Ticker
{
    std::vector<std::int64_t> script;
    std::size_t next{0};
};

ProcessDef ticker_def(std::vector<std::int64_t> script, std::vector<std::pair<SimTime, bool>>& log)
{
    ProcessDef d;
    d.name = "ticker";
    d.init = [script](ProcessContext&) { return make_process_state<Ticker>(Ticker{script, 0}); };
    d.handlers[InputKind::tick] = [&log](ProcessContext& ctx, const json&) {
        auto& s = ctx.state<Ticker>();
        log.emplace_back(ctx.now(), false);
        if (s.next < s.script.size()) ctx.request_tick(seconds(s.script[s.next++]));
    };
    d.handlers[InputKind::ground_command] = [&log](ProcessContext& ctx, const json& in) {
        log.emplace_back(ctx.now(), true);
        for (const auto& t : in.at("ticks")) ctx.request_tick(SimTime::from_ns(t.get<std::int64_t>()));
    };
    return d;
}

} // namespace

TEST_CASE("a later request replaces the pending tick")
{
    Rig r;
    std::vector<std::pair<SimTime, bool>> log;
    const ProcessId id = r.host.spawn(ticker_def({}, log));
    r.host.post(id, InputKind::ground_command, {{"ticks", {seconds(10).ns(), seconds(5).ns()}}}, SimTime{});
    r.kernel.run_until(seconds(100));
    REQUIRE(log.size() == 2);
    CHECK(log[1].first == seconds(5));
    CHECK_FALSE(r.host.process(id).pending_tick);
}

TEST_CASE("chained ticks arrive in order")
{
    Rig r;
    std::vector<std::pair<SimTime, bool>> log;
    const ProcessId id = r.host.spawn(ticker_def({20, 30}, log));
    r.host.post(id, InputKind::ground_command, {{"ticks", {seconds(10).ns()}}}, SimTime{});
    r.kernel.run_until(seconds(100));
    REQUIRE(log.size() == 4);
    CHECK(log[1].first == seconds(10));
    CHECK(log[2].first == seconds(20));
    CHECK(log[3].first == seconds(30));
}

TEST_CASE("tick at the current time runs after the current event")
{
    Rig r;
    std::vector<std::pair<SimTime, bool>> log;
    const ProcessId id = r.host.spawn(ticker_def({}, log));
    std::vector<std::string> order;
    r.kernel.schedule(seconds(4), [&](Kernel& k, const EventInfo&) {
        r.host.deliver(id, InputKind::ground_command, {{"ticks", {seconds(4).ns()}}}, k.now());
        order.push_back("command");
    });
    r.kernel.schedule(seconds(4), [&](Kernel&, const EventInfo&) { order.push_back("other"); });
    r.kernel.run_until(seconds(10));
    REQUIRE(log.size() == 2);
    CHECK(log[1] == std::pair{seconds(4), false});
    // The tick was scheduled during the first event, so the pre-existing event
    // at the same time runs before it.
    CHECK(order == std::vector<std::string>{"command", "other"});
    CHECK(r.kernel.total_events() == 3);
}

TEST_CASE("pending tick is cleared before the tick handler runs")
{
    Rig r;
    ProcessDef d;
    d.name = "p";
    bool pending_inside = true;
    ProcessHost* host = &r.host;
    d.handlers[InputKind::tick] = [&](ProcessContext& ctx, const json&) {
        pending_inside = host->process(ctx.id()).pending_tick.has_value();
    };
    const ProcessId id = r.host.spawn(d);
    r.host.request_tick(id, seconds(3));
    CHECK(r.host.process(id).pending_tick);
    r.kernel.run_until(seconds(5));
    CHECK_FALSE(pending_inside);
}

TEST_CASE("at most one tick is pending per process")
{
    Rig r;
    ProcessDef d;
    d.name = "p";
    const ProcessId id = r.host.spawn(d);
    for (int k = 1; k <= 50; ++k) r.host.request_tick(id, seconds(100 - k));
    CHECK(r.kernel.pending_count() == 1);
    CHECK(r.host.process(id).pending_tick->time == seconds(50));
}

TEST_CASE("tick in the past is rejected")
{
    Rig r;
    std::vector<std::pair<SimTime, bool>> log;
    const ProcessId id = r.host.spawn(ticker_def({}, log));
    r.host.post(id, InputKind::ground_command, {{"ticks", {seconds(1).ns()}}}, seconds(2));
    CHECK(fault_of([&] { r.kernel.run_until(seconds(5)); }) == FaultKind::past_time);
}

TEST_CASE("outputs keep emission order and telemetry is logged verbatim")
{
    Rig r;
    ProcessDef d;
    d.name = "talker";
    d.handlers[InputKind::ground_command] = [](ProcessContext& ctx, const json&) {
        ctx.emit(OutputKind::telemetry, {{"n", 1}});
        ctx.emit(OutputKind::observation, {{"n", 2}});
        ctx.emit(OutputKind::mission_mode, {{"n", 3}});
        ctx.emit(OutputKind::telemetry, {{"n", 4}, {"nested", {{"z", 0.5}, {"a", "x"}}}});
    };
    const ProcessId id = r.host.spawn(d);
    const SimTime t = SimTime::from_ns(1'234'567'890);
    const auto outs = r.host.deliver(id, InputKind::ground_command, json::object(), t);
    REQUIRE(outs.size() == 4);
    for (int k = 0; k < 4; ++k) CHECK(outs[k].payload["n"] == k + 1);

    std::vector<json> recs;
    for (const auto& rec : r.log.records())
        if (rec["kind"] != "heap") recs.push_back(rec);
    REQUIRE(recs.size() == 4);
    CHECK(recs[0]["kind"] == "telemetry");
    CHECK(recs[1]["kind"] == "observation");
    CHECK(recs[2]["kind"] == "mission_mode");
    CHECK(recs[3]["payload"] == outs[3].payload);
    CHECK(recs[3]["source"] == "talker");
    CHECK(recs[3]["t"] == t.ns());
}

namespace
{

struct FlightRig
{
    Kernel kernel;
    TelemetryLog log;
    RngRoot rng{4};
    Continuum continuum;
    CommsModel comms{kernel, rng};
    ProcessHost host{kernel, &continuum, &comms, &log, &rng};

    FlightRig() : continuum(ForceModelConfig{}, &kernel)
    {
        const auto s = oracle::elements_to_state(6878137.0, 0.001, 0.9, 0.5, 0.1, 0.0, constants::earth_mu);
        BodyState b;
        b.position = s.position;
        b.velocity = s.velocity;
        continuum.add_body("sat", b);
        continuum.add_body("sat_ref", b);
    }
};

} // namespace

TEST_CASE("crosslink routing")
{
    FlightRig r;
    LinkParams clear;
    clear.p_enter = 0.0;
    r.comms.add_link("a", "b", clear);
    std::vector<json> got;
    ProcessDef a;
    a.name = "a";
    a.handlers[InputKind::ground_command] = [](ProcessContext& ctx, const json& in) {
        ctx.send_crosslink(in.at("to").get<std::string>(), {{"hello", 1}});
    };
    ProcessDef b;
    b.name = "b";
    b.handlers[InputKind::crosslink] = [&](ProcessContext& ctx, const json& in) {
        got.push_back(in);
        CHECK(ctx.now() > seconds(1));
    };
    const ProcessId ia = r.host.spawn(a);
    r.host.spawn(b);
    r.host.post(ia, InputKind::ground_command, {{"to", "b"}}, seconds(1));
    r.kernel.run_until(seconds(100));
    REQUIRE(got.size() == 1);
    CHECK(got[0]["from"] == "a");
    CHECK(got[0]["message"]["hello"] == 1);
    CHECK(r.comms.links().begin()->second.stats().delivered == 1);

    r.host.post(ia, InputKind::ground_command, {{"to", "nobody"}}, seconds(200));
    CHECK(fault_of([&] { r.kernel.run_until(seconds(300)); }) == FaultKind::unknown_link_target);
}

TEST_CASE("maneuver routing")
{
    FlightRig r;
    ProcessDef d;
    d.name = "gnc";
    d.body = "sat";
    d.handlers[InputKind::ground_command] = [](ProcessContext& ctx, const json& in) {
        ctx.emit(OutputKind::maneuver, {{"dv_rtn", in.at("dv")}, {"t", in.at("t")}});
    };
    const ProcessId id = r.host.spawn(d);
    const BodyId sat = r.continuum.find("sat"), ref = r.continuum.find("sat_ref");

    SUBCASE("zero dv leaves the trajectory unchanged")
    {
        r.host.post(id, InputKind::ground_command, {{"dv", {0, 0, 0}}, {"t", seconds(100).ns()}}, seconds(50));
        r.kernel.run_until(seconds(100));
        const Vec3 p = r.continuum.request_state(sat, seconds(1000)).position;
        CHECK(p == r.continuum.request_state(ref, seconds(1000)).position);
    }
    SUBCASE("along-track dv is applied at the commanded time")
    {
        r.host.post(id, InputKind::ground_command, {{"dv", {0, 0.5, 0}}, {"t", seconds(100).ns()}}, seconds(50));
        r.kernel.run_until(seconds(100));
        const BodyState a = r.continuum.peek(sat);
        const BodyState b = r.continuum.request_state(ref, seconds(100));
        CHECK(a.epoch == seconds(100));
        CHECK((a.position - b.position).norm() < 1e-9);
        CHECK((a.velocity - b.velocity).norm() == doctest::Approx(0.5).epsilon(1e-9));
        CHECK((a.velocity - b.velocity).dot(b.velocity.normalized()) == doctest::Approx(0.5).epsilon(1e-3));
    }
    SUBCASE("maneuver in the past is rejected")
    {
        r.host.post(id, InputKind::ground_command, {{"dv", {0, 1, 0}}, {"t", seconds(10).ns()}}, seconds(50));
        CHECK(fault_of([&] { r.kernel.run_until(seconds(100)); }) == FaultKind::past_time);
    }
}

TEST_CASE("maneuver from a process without a body is a configuration error")
{
    Rig r;
    ProcessDef d;
    d.name = "p";
    d.handlers[InputKind::ground_command] = [](ProcessContext& ctx, const json&) {
        ctx.emit(OutputKind::maneuver, {{"dv_rtn", {0, 0, 0}}});
    };
    const ProcessId id = r.host.spawn(d);
    CHECK(fault_of([&] { r.host.deliver(id, InputKind::ground_command, json::object(), SimTime{}); }) ==
          FaultKind::config_error);
}

TEST_CASE("delivery jitter")
{
    auto arrivals = [](double sigma, std::uint64_t seed) {
        Kernel kernel;
        RngRoot rng(seed);
        ProcessHost host(kernel, nullptr, nullptr, nullptr, &rng);
        host.set_jitter(sigma);
        std::vector<std::int64_t> at;
        ProcessDef d;
        d.name = "p";
        d.handlers[InputKind::bus_telemetry] = [&](ProcessContext& ctx, const json&) { at.push_back(ctx.now().ns()); };
        const ProcessId id = host.spawn(d);
        for (int k = 0; k < 200; ++k) host.post(id, InputKind::bus_telemetry, json::object(), seconds(10 * k));
        kernel.run_until(seconds(5000));
        return at;
    };
    const auto exact = arrivals(0.0, 1);
    for (int k = 0; k < 200; ++k) CHECK(exact[k] == seconds(10 * k).ns());

    const auto a = arrivals(0.01, 1), b = arrivals(0.01, 1), c = arrivals(0.01, 2);
    CHECK(a == b);
    CHECK(a != c);
    double sum = 0;
    for (int k = 0; k < 200; ++k)
    {
        const double d = static_cast<double>(a[k] - seconds(10 * k).ns()) * 1e-9;
        CHECK(d >= 0);
        sum += d;
    }
    // Half-normal mean is sigma * sqrt(2 / pi).
    CHECK(sum / 200 == doctest::Approx(0.01 * std::sqrt(2 / M_PI)).epsilon(0.2));
}

TEST_CASE("heap telemetry separates resting and transient use")
{
    Rig r;
    ProcessDef d;
    d.name = "p";
    d.handlers[InputKind::ground_command] = [](ProcessContext&, const json&) {
        void* big = fsw_malloc(10000);
        fsw_free(big);
    };
    const ProcessId id = r.host.spawn(d);
    r.host.deliver(id, InputKind::ground_command, json::object(), SimTime{});
    json heap;
    for (const auto& rec : r.log.records())
        if (rec["kind"] == "heap") heap = rec["payload"];
    REQUIRE(heap.is_object());
    CHECK(heap["resting"] == 0);
    CHECK(heap["transient_peak"].get<std::uint64_t>() >= 10000);
    CHECK(r.host.process(id).peak_transient >= 10000);
}
