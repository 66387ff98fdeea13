#pragma once

#include "fswsim/heap_model.hpp"
#include "fswsim/kepler.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>

namespace fswsim::demo
{

/// One position/velocity solution tagged with its GPS-second epoch.
///
/// Crosslink form (version 1):
///   {"type": "nav", "v": 1, "epoch": s, "r": [x, y, z], "v_ms": [vx, vy, vz]}
struct NavEntry
{
    std::int64_t epoch{0};
    std::array<double, 3> position{};
    std::array<double, 3> velocity{};

    nlohmann::json to_message() const;
    static NavEntry from_message(const nlohmann::json& msg);
};

enum class QueuePolicy
{
    assume_sorted, ///< append; an earlier epoch than the tail is a fault
    insert_sorted, ///< binary insertion, never faults
};

/// Time-ordered queue of remote measurements, bounded to the newest
/// `capacity` epochs. Duplicate epochs are dropped.
class NavQueue
{
public:
    NavQueue(QueuePolicy policy, std::size_t capacity = 64);

    /// Returns false when the entry was a duplicate. Throws
    /// Fault(out_of_order) under assume_sorted for a late arrival.
    bool ingest(const NavEntry& e);

    QueuePolicy policy() const { return policy_; }
    const fsw_vector<NavEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    const NavEntry* find(std::int64_t epoch) const;

private:
    QueuePolicy policy_;
    std::size_t capacity_;
    fsw_vector<NavEntry> entries_;
};

struct RelativeEstimate
{
    std::int64_t epoch;
    Vec3 relative_position; ///< remote minus local, m
};

/// Single difference of the newest epoch present in both the local history
/// and the remote queue. Throws Fault(no_common_epoch).
RelativeEstimate relative_nav_update(const NavQueue& local_history, const NavQueue& remote);

} // namespace fswsim::demo
