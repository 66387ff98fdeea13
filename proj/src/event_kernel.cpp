#include "fswsim/event_kernel.hpp"

#include <algorithm>
#include <chrono>

namespace fswsim
{

namespace
{

// std heap algorithms build a max-heap; "greater" puts the minimum on top.
bool later(const EventQueue::Entry& a, const EventQueue::Entry& b)
{
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
}

} // namespace

void EventQueue::push(Entry e)
{
    pending_.insert(e.seq);
    heap_.push_back(std::move(e));
    std::push_heap(heap_.begin(), heap_.end(), later);
}

void EventQueue::drop_dead_top()
{
    while (!heap_.empty() && !pending_.contains(heap_.front().seq))
    {
        std::pop_heap(heap_.begin(), heap_.end(), later);
        heap_.pop_back();
    }
}

const EventQueue::Entry* EventQueue::peek_live()
{
    drop_dead_top();
    return heap_.empty() ? nullptr : &heap_.front();
}

bool EventQueue::pop_min(Entry& out)
{
    drop_dead_top();
    if (heap_.empty()) return false;
    std::pop_heap(heap_.begin(), heap_.end(), later);
    out = std::move(heap_.back());
    heap_.pop_back();
    pending_.erase(out.seq);
    return true;
}

EventId Kernel::schedule(SimTime t, Action action, std::any payload, bool needs_continuum)
{
    if (t < now_)
        throw Fault(FaultKind::past_time, "event scheduled at " + t.str() + " before now " + now_.str());
    const EventId id = next_seq_++;
    queue_.push({t, id, needs_continuum, std::move(action), std::move(payload)});
    return id;
}

bool Kernel::cancel(EventId id)
{
    return queue_.cancel(id);
}

void Kernel::note_propagation()
{
    const EventId id = dispatching_ ? current_.seq : UINT64_MAX - 1;
    if (id == last_propagation_event_) return;
    last_propagation_event_ = id;
    ++run_propagations_;
    ++total_propagations_;
}

RunSummary Kernel::run_until(SimTime t_end)
{
    if (t_end < now_)
        throw Fault(FaultKind::past_time, "run_until " + t_end.str() + " before now " + now_.str());

    RunSummary summary;
    run_propagations_ = 0;
    const auto wall_start = std::chrono::steady_clock::now();
    auto finish = [&] {
        summary.propagations_performed = run_propagations_;
        summary.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
        summary.final_time = now_;
    };

    EventQueue::Entry entry;
    while (true)
    {
        const EventQueue::Entry* top = queue_.peek_live();
        if (!top || top->time > t_end) break;
        queue_.pop_min(entry);
        now_ = entry.time;
        current_ = EventInfo{entry.time, entry.seq, entry.needs_continuum, &entry.payload};
        dispatching_ = true;
        try
        {
            if (pre_event_) pre_event_(now_);
            entry.action(*this, current_);
        }
        catch (Fault& f)
        {
            dispatching_ = false;
            ++summary.events_executed;
            ++total_events_;
            if (trace_on_) trace_.emplace_back(entry.time, entry.seq);
            f.set_time(entry.time);
            finish();
            throw;
        }
        catch (...)
        {
            dispatching_ = false;
            finish();
            throw;
        }
        dispatching_ = false;
        ++summary.events_executed;
        ++total_events_;
        if (trace_on_) trace_.emplace_back(entry.time, entry.seq);
    }
    now_ = t_end;
    finish();
    return summary;
}

} // namespace fswsim
