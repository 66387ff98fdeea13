#include "fswsim/demo/nav.hpp"

#include "fswsim/fault.hpp"

#include <algorithm>

namespace fswsim::demo
{

nlohmann::json NavEntry::to_message() const
{
    return {{"type", "nav"}, {"v", 1}, {"epoch", epoch}, {"r", position}, {"v_ms", velocity}};
}

NavEntry NavEntry::from_message(const nlohmann::json& msg)
{
    NavEntry e;
    e.epoch = msg.at("epoch").get<std::int64_t>();
    e.position = msg.at("r").get<std::array<double, 3>>();
    e.velocity = msg.at("v_ms").get<std::array<double, 3>>();
    return e;
}

NavQueue::NavQueue(QueuePolicy policy, std::size_t capacity) : policy_{policy}, capacity_{std::max<std::size_t>(capacity, 1)}
{
    entries_.reserve(capacity_ + 1);
}

const NavEntry* NavQueue::find(std::int64_t epoch) const
{
    auto it = std::lower_bound(entries_.begin(), entries_.end(), epoch,
                               [](const NavEntry& e, std::int64_t t) { return e.epoch < t; });
    return (it != entries_.end() && it->epoch == epoch) ? &*it : nullptr;
}

bool NavQueue::ingest(const NavEntry& e)
{
    if (policy_ == QueuePolicy::assume_sorted)
    {
        if (!entries_.empty())
        {
            if (e.epoch == entries_.back().epoch) return false;
            if (e.epoch < entries_.back().epoch)
                throw Fault(FaultKind::out_of_order, "measurement epoch " + std::to_string(e.epoch) +
                                                         " arrived after epoch " + std::to_string(entries_.back().epoch));
        }
        entries_.push_back(e);
    }
    else
    {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), e.epoch,
                                   [](const NavEntry& x, std::int64_t t) { return x.epoch < t; });
        if (it != entries_.end() && it->epoch == e.epoch) return false;
        entries_.insert(it, e);
    }
    if (entries_.size() > capacity_) entries_.erase(entries_.begin());
    return true;
}

RelativeEstimate relative_nav_update(const NavQueue& local_history, const NavQueue& remote)
{
    for (auto it = remote.entries().rbegin(); it != remote.entries().rend(); ++it)
    {
        if (const NavEntry* local = local_history.find(it->epoch))
        {
            const Vec3 r_remote{it->position[0], it->position[1], it->position[2]};
            const Vec3 r_local{local->position[0], local->position[1], local->position[2]};
            return {it->epoch, r_remote - r_local};
        }
    }
    throw Fault(FaultKind::no_common_epoch, "no epoch shared by local and remote solutions");
}

} // namespace fswsim::demo
