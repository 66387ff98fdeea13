#pragma once

#include "fswsim/comms_model.hpp"
#include "fswsim/continuum.hpp"
#include "fswsim/demo/gnc_app.hpp"
#include "fswsim/gnss_model.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace fswsim
{

/// Gaussian 1-sigma dispersions applied to a body's initial conditions.
struct Dispersion
{
    double a_m{0};
    double mean_anomaly_deg{0};
    double cd{0};
};

struct BodySpec
{
    std::string name;
    KeplerianElements elements;            ///< angles stored in radians
    std::optional<Vec3> offset_rtn;        ///< place relative to the first body instead
    double mass{100.0};
    double drag_area{1.0};
    double cd{2.2};
    double srp_area{1.0};
    double cr{1.8};
    Dispersion dispersion;
};

struct ProcessSpec
{
    std::string name;
    std::string body;
    std::uint64_t heap_limit{50'000'000};
    demo::GncConfig gnc;
};

struct LinkSpec
{
    std::string from;
    std::string to;
    LinkParams params;
};

struct GnssSpec
{
    bool enabled{false};
    std::string almanac{"builtin"}; ///< "builtin" or a file path
    std::int64_t cadence_s{1};
    double rtn_sigma{1.0};
    std::string attitude{"zenith"};
    ReceiverConfig receiver;
};

struct CommandSpec
{
    SimTime t;
    std::string process;
    nlohmann::json payload;
};

/// Versioned scenario description. See README for the file schema.
struct ScenarioConfig
{
    int version{1};
    std::string name{"scenario"};
    SimTime duration{SimTime::whole_seconds(3600)};
    std::uint64_t seed{1};
    ForceModelConfig force_model;
    std::vector<BodySpec> bodies;
    std::vector<ProcessSpec> processes;
    std::vector<LinkSpec> links;
    GnssSpec gnss;
    std::vector<CommandSpec> commands; ///< sorted by time, stable
    SimTime sample_cadence{SimTime::whole_seconds(60)};
    double process_jitter_s{0.0};
    bool inject_wall_clock{false};

    /// Throws Fault(config_error) naming the offending key.
    static ScenarioConfig from_json(const nlohmann::json& j);
    static ScenarioConfig load(const std::string& path);
};

} // namespace fswsim
