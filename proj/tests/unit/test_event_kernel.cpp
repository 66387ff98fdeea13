#include "fswsim/event_kernel.hpp"

#include <doctest.h>

#include <random>
#include <vector>

using namespace fswsim;

TEST_CASE("events run in time order with FIFO ties")
{
    Kernel k;
    std::vector<int> order;
    k.schedule(seconds(2), [&](Kernel&, const EventInfo&) { order.push_back(3); });
    k.schedule(seconds(1), [&](Kernel&, const EventInfo&) { order.push_back(1); });
    k.schedule(seconds(1), [&](Kernel&, const EventInfo&) { order.push_back(2); });
    const RunSummary s = k.run_until(seconds(10));
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK(s.events_executed == 3);
    CHECK(s.final_time == seconds(10));
    CHECK(k.now() == seconds(10));
}

TEST_CASE("randomized schedules dispatch sorted by (time, seq)")
{
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial)
    {
        Kernel k;
        std::vector<std::pair<std::int64_t, EventId>> seen;
        for (int i = 0; i < 300; ++i)
        {
            const auto t = SimTime::from_ns(static_cast<std::int64_t>(gen() % 50));
            k.schedule(t, [&](Kernel& kk, const EventInfo& ev) { seen.emplace_back(kk.now().ns(), ev.seq); });
        }
        k.run_until(SimTime::from_ns(100));
        REQUIRE(seen.size() == 300);
        CHECK(std::is_sorted(seen.begin(), seen.end()));
    }
}

TEST_CASE("scheduling in the past is a fault; same time is allowed")
{
    Kernel k;
    bool nested = false;
    k.schedule(seconds(5), [&](Kernel& kk, const EventInfo&) {
        kk.schedule(kk.now(), [&](Kernel&, const EventInfo&) { nested = true; });
        CHECK_THROWS_AS(kk.schedule(seconds(4), [](Kernel&, const EventInfo&) {}), Fault);
    });
    k.run_until(seconds(6));
    CHECK(nested);
    try
    {
        k.schedule(seconds(1), [](Kernel&, const EventInfo&) {});
        FAIL("expected PastTime");
    }
    catch (const Fault& f)
    {
        CHECK(f.kind() == FaultKind::past_time);
    }
    CHECK_THROWS_AS(k.run_until(seconds(2)), Fault);
}

TEST_CASE("cancellation is lazy and exact")
{
    Kernel k;
    int hits = 0;
    const EventId a = k.schedule(seconds(1), [&](Kernel&, const EventInfo&) { ++hits; });
    k.schedule(seconds(2), [&](Kernel&, const EventInfo&) { ++hits; });
    CHECK(k.pending_count() == 2);
    CHECK(k.cancel(a));
    CHECK_FALSE(k.cancel(a));
    CHECK_FALSE(k.is_pending(a));
    CHECK(k.pending_count() == 1);
    CHECK(k.run_until(seconds(3)).events_executed == 1);
    CHECK(hits == 1);
}

TEST_CASE("events after the horizon stay queued")
{
    Kernel k;
    int hits = 0;
    k.schedule(seconds(5), [&](Kernel&, const EventInfo&) { ++hits; });
    k.run_until(seconds(4));
    CHECK(hits == 0);
    CHECK(k.pending_count() == 1);
    k.run_until(seconds(5));
    CHECK(hits == 1);
}

TEST_CASE("faults carry the event time and stop the run")
{
    Kernel k;
    int later = 0;
    k.schedule(seconds(3), [](Kernel&, const EventInfo&) { throw Fault(FaultKind::handler_fault, "boom"); });
    k.schedule(seconds(4), [&](Kernel&, const EventInfo&) { ++later; });
    try
    {
        k.run_until(seconds(10));
        FAIL("expected fault");
    }
    catch (const Fault& f)
    {
        REQUIRE(f.report().time.has_value());
        CHECK(*f.report().time == seconds(3));
    }
    CHECK(later == 0);
    CHECK(k.current_event() == nullptr);
    CHECK(k.total_events() == 1);
}

TEST_CASE("payload and continuum flag reach the action")
{
    Kernel k;
    k.schedule(
        seconds(1),
        [](Kernel& kk, const EventInfo& ev) {
            CHECK(ev.needs_continuum);
            CHECK(std::any_cast<int>(*ev.payload) == 17);
            CHECK(kk.current_event()->seq == ev.seq);
        },
        17, true);
    k.run_until(seconds(1));
}

TEST_CASE("propagations are counted at most once per event")
{
    Kernel k;
    k.schedule(seconds(1), [](Kernel& kk, const EventInfo&) {
        kk.note_propagation();
        kk.note_propagation();
    });
    k.schedule(seconds(2), [](Kernel&, const EventInfo&) {});
    k.schedule(seconds(3), [](Kernel& kk, const EventInfo&) { kk.note_propagation(); });
    const RunSummary s = k.run_until(seconds(3));
    CHECK(s.propagations_performed == 2);
    CHECK(s.events_executed == 3);
}

TEST_CASE("trace records dispatch order")
{
    Kernel k;
    k.enable_trace(true);
    const EventId b = k.schedule(seconds(2), [](Kernel&, const EventInfo&) {});
    const EventId a = k.schedule(seconds(1), [](Kernel&, const EventInfo&) {});
    k.run_until(seconds(2));
    REQUIRE(k.trace().size() == 2);
    CHECK(k.trace()[0].second == a);
    CHECK(k.trace()[1].second == b);
}

TEST_CASE("sim time arithmetic")
{
    CHECK(SimTime::from_seconds(1.5).ns() == 1'500'000'000);
    CHECK(SimTime::whole_seconds(3).on_second());
    CHECK_FALSE(SimTime::from_ns(3'000'000'001).on_second());
    CHECK(SimTime::from_ns(3'700'000'000).floor_second() == 3);
    CHECK(SimTime::from_ns(-1).floor_second() == -1);
    CHECK(seconds(2) - seconds(1) == seconds(1));
    CHECK(SimTime::from_ns(1'000'000'000).str() == "1.000000000s");
}
