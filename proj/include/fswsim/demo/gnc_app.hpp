#pragma once

#include "fswsim/demo/nav.hpp"
#include "fswsim/demo/sync.hpp"
#include "fswsim/demo/workload.hpp"
#include "fswsim/process_host.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace fswsim::demo
{

/// Feature toggles for the two-spacecraft demo flight software.
struct GncConfig
{
    std::string peer; ///< crosslink partner process, empty for none

    bool sync_enabled{false};
    Role role{Role::active};
    Protocol protocol{Protocol::robust};
    double retransmit_interval_s{5.0};

    bool nav_enabled{false};
    QueuePolicy queue_policy{QueuePolicy::insert_sorted};
    std::int64_t nav_send_interval_s{10};
    std::size_t queue_capacity{64};

    MatrixRepresentation workload{MatrixRepresentation::sparse};
    std::size_t workload_n{3000};

    double mu{constants::earth_mu};

    /// Strict parse: unknown keys throw Fault(config_error).
    static GncConfig from_json(const nlohmann::json& j);
};

/// Demo flight software as a virtual process definition.
///
/// Inputs:
///   ground_command {"cmd": "begin_observation" | "end_observation"}
///                  {"cmd": "solve", optional "n", optional "representation"}
///                  {"cmd": "transfer", "target_a_m": a}
///   gnss_message   {"epoch": s, "pvt": {"r": [..], "v": [..]} | null, "measurements": [..]}
///   crosslink      {"from": name, "message": sync | ack | nav message}
///   tick           timers: sync retransmission, second transfer burn
/// Outputs: mission_mode per applied transition, observation "relnav"
/// estimates, maneuvers, workload/transfer telemetry.
ProcessDef make_gnc_process(std::string name, std::string body, GncConfig cfg, std::uint64_t heap_limit);

/// Two-impulse coplanar transfer between circular-orbit radii a_from -> a_to.
struct TransferPlan
{
    double dv1;           ///< m/s, transverse
    double dv2;           ///< m/s, transverse
    double transfer_time; ///< s
};
TransferPlan plan_transfer(double a_from, double a_to, double mu);

} // namespace fswsim::demo
