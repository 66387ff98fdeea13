#pragma once

#include "fswsim/event_kernel.hpp"
#include "fswsim/fault.hpp"
#include "fswsim/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fswsim
{

struct RunOptions
{
    bool keep_outputs{true}; ///< retain telemetry text and CSV series in the report
};

/// Everything a run produces. Apart from wall_seconds and speedup, every
/// field is a pure function of (config, seed).
struct RunReport
{
    std::string scenario;
    std::uint64_t seed{0};
    std::string fingerprint;   ///< 8 lowercase hex chars
    std::string analysis_hash; ///< SHA-256 of the canonical telemetry
    std::optional<FaultReport> fault;
    nlohmann::json metrics;
    std::uint64_t telemetry_records{0};
    double wall_seconds{0};
    double speedup{0};

    std::string telemetry;                  ///< JSONL
    std::map<std::string, std::string> csv; ///< series name -> CSV text

    nlohmann::json to_json() const;
};

/// Runs one isolated simulation. Faults raised by the simulated system are
/// captured in the report; configuration faults propagate.
RunReport run_scenario(const ScenarioConfig& config, std::uint64_t seed, RunOptions options = {});

/// Writes report.json, telemetry.jsonl and one CSV per series into dir.
void write_run_outputs(const RunReport& report, const std::string& dir);

/// Looks up a metric by dotted path ("total_dv_all_ms", "nav_error.mean_m").
/// Throws Fault(config_error) for unknown or non-numeric metrics.
double metric_value(const nlohmann::json& metrics, const std::string& name);

struct Histogram
{
    std::vector<double> edges; ///< size bins + 1
    std::vector<std::uint64_t> counts;

    static Histogram build(const std::vector<double>& values, std::size_t bins = 20);
    std::string csv() const;
};

struct MonteCarloSummary
{
    std::string metric;
    std::vector<RunReport> runs; ///< in seed-list order
    std::vector<double> values;  ///< metric of the runs that completed without fault
    std::size_t faults{0};
    double mean{0};
    double stddev{0}; ///< sample standard deviation, 0 for a single value
    Histogram histogram;
    std::vector<std::string> fingerprint_collisions;

    nlohmann::json to_json() const;
};

/// Runs every seed in isolation (concurrently when threads > 1). Per-run
/// faults are recorded and the sweep continues.
MonteCarloSummary monte_carlo(const ScenarioConfig& config, const std::vector<std::uint64_t>& seeds,
                              const std::string& metric, unsigned threads = 0);

struct DeterminismResult
{
    bool pass{false};
    std::vector<std::string> fingerprints;
    std::vector<std::string> hashes;
    std::optional<std::string> divergence; ///< first differing telemetry record

    nlohmann::json to_json() const;
};

DeterminismResult check_determinism(const ScenarioConfig& config, std::uint64_t seed, int runs);
/// Throws Fault(config_error) when fewer than two seeds are given or they differ.
DeterminismResult check_determinism(const ScenarioConfig& config, const std::vector<std::uint64_t>& seeds);

/// Parses "A..B" (inclusive) or "a,b,c".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

} // namespace fswsim
