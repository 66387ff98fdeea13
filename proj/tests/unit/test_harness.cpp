#include "fswsim/harness.hpp"
#include "fswsim/telemetry.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

using namespace fswsim;
using nlohmann::json;

namespace
{

std::string scenario(const std::string& name)
{
    return std::string(FSWSIM_SCENARIO_DIR) + "/" + name;
}

ScenarioConfig load(const std::string& name)
{
    return ScenarioConfig::load(scenario(name));
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, std::string* output = nullptr)
{
    const auto log = std::filesystem::temp_directory_path() / "fswsim_cli_test.txt";
    const std::string cmd = std::string(FSWSIM_SIM_EXE) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Aggregate without the wall-clock fields, which are the only ones allowed to vary.
std::string deterministic_part(const MonteCarloSummary& mc)
{
    json j = mc.to_json();
    for (auto& r : j["runs"])
    {
        r.erase("wall_seconds");
        r.erase("speedup");
    }
    return canonical_dump(j);
}

} // namespace

TEST_CASE("golden fingerprint for the empty scenario")
{
    const auto cfg = load("empty.json");
    const RunReport r = run_scenario(cfg, 42);
    CHECK(std::regex_match(r.fingerprint, std::regex("^[0-9a-f]{8}$")));
    CHECK(r.fingerprint == "b54f23e0");
    CHECK(std::regex_match(r.analysis_hash, std::regex("^[0-9a-f]{64}$")));
    CHECK(r.analysis_hash == sha256_hex(r.telemetry));
    CHECK_FALSE(r.fault);
}

TEST_CASE("neighbouring seeds give different fingerprints")
{
    const auto cfg = load("empty.json");
    std::set<std::string> seen;
    for (std::uint64_t s = 1; s <= 200; ++s)
    {
        const auto fp = run_scenario(cfg, s).fingerprint;
        CHECK(std::regex_match(fp, std::regex("^[0-9a-f]{8}$")));
        seen.insert(fp);
    }
    CHECK(seen.size() == 200);
}

TEST_CASE("repeat runs are identical to the last digit")
{
    const auto cfg = load("demo.json");
    const RunReport a = run_scenario(cfg, 7), b = run_scenario(cfg, 7);
    CHECK_FALSE(a.fault);
    CHECK(a.fingerprint == b.fingerprint);
    CHECK(a.analysis_hash == b.analysis_hash);
    CHECK(a.telemetry == b.telemetry);
    CHECK(a.csv == b.csv);
    CHECK(canonical_dump(a.metrics) == canonical_dump(b.metrics));
    CHECK(recanonicalize_jsonl(a.telemetry) == a.telemetry);

    const RunReport c = run_scenario(cfg, 8);
    CHECK(c.fingerprint != a.fingerprint);
    CHECK(c.analysis_hash != a.analysis_hash);
}

TEST_CASE("demo metrics are populated")
{
    const RunReport r = run_scenario(load("demo.json"), 7);
    const json& m = r.metrics;
    CHECK(m["events_executed"].get<std::uint64_t>() > 1000);
    CHECK(m["propagations_performed"].get<std::uint64_t>() <= m["events_executed"].get<std::uint64_t>());
    CHECK(m["final_time_s"] == 3600.0);
    CHECK(m["sync_prefix_consistent"] == true);
    CHECK(m["nav_error"]["count"].get<int>() > 100);
    CHECK(metric_value(m, "nav_error.mean_m") < 10.0);
    CHECK(m["heap"].contains("gnc_a"));
    CHECK(m["links"].contains("gnc_a->gnc_b"));
    CHECK(r.csv.contains("state_sc_a"));
    CHECK(r.speedup > 0);
    CHECK(r.telemetry_records > 0);
    CHECK_THROWS_AS(metric_value(m, "nav_error.nope"), Fault);
    CHECK_THROWS_AS(metric_value(m, "heap"), Fault);
}

TEST_CASE("determinism check passes on the demo and catches wall-clock input")
{
    auto cfg = load("demo.json");
    const auto ok = check_determinism(cfg, 7, 3);
    CHECK(ok.pass);
    CHECK(ok.fingerprints.size() == 3);
    CHECK_FALSE(ok.divergence);

    cfg.inject_wall_clock = true;
    const auto bad = check_determinism(cfg, 7, 3);
    CHECK_FALSE(bad.pass);
    REQUIRE(bad.divergence);
    CHECK(bad.divergence->find("wall_clock") != std::string::npos);
}

TEST_CASE("determinism check guards its inputs")
{
    const auto cfg = load("empty.json");
    CHECK_THROWS_AS(check_determinism(cfg, std::vector<std::uint64_t>{1, 2}), Fault);
    CHECK_THROWS_AS(check_determinism(cfg, std::vector<std::uint64_t>{1}), Fault);
    CHECK_THROWS_AS(check_determinism(cfg, 1, 1), Fault);
    CHECK(check_determinism(cfg, std::vector<std::uint64_t>{5, 5}).pass);
}

TEST_CASE("seed lists")
{
    CHECK(parse_seed_list("1..4") == std::vector<std::uint64_t>{1, 2, 3, 4});
    CHECK(parse_seed_list("7,3,9") == std::vector<std::uint64_t>{7, 3, 9});
    CHECK(parse_seed_list("5") == std::vector<std::uint64_t>{5});
    CHECK_THROWS_AS(parse_seed_list("4..1"), Fault);
    CHECK_THROWS_AS(parse_seed_list("x"), Fault);
}

TEST_CASE("monte carlo aggregates")
{
    const auto cfg = load("transfer_mc.json");
    const auto one = monte_carlo(cfg, {11}, "total_dv_all_ms");
    REQUIRE(one.runs.size() == 1);
    const RunReport solo = run_scenario(cfg, 11);
    CHECK(one.mean == metric_value(solo.metrics, "total_dv_all_ms"));
    CHECK(one.stddev == 0.0);
    CHECK(one.runs[0].fingerprint == solo.fingerprint);
    CHECK(one.runs[0].analysis_hash == solo.analysis_hash);

    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6};
    const auto a = monte_carlo(cfg, seeds, "total_dv_all_ms", 1);
    const auto b = monte_carlo(cfg, seeds, "total_dv_all_ms", 3);
    CHECK(deterministic_part(a) == deterministic_part(b));
    CHECK(a.values.size() == 6);
    double mean = 0;
    for (double v : a.values) mean += v / 6.0;
    CHECK(a.mean == doctest::Approx(mean).epsilon(1e-14));
    std::uint64_t binned = 0;
    for (auto c : a.histogram.counts) binned += c;
    CHECK(binned == 6);

    // Removing a seed leaves every other run untouched.
    const auto fewer = monte_carlo(cfg, {1, 2, 4, 5, 6}, "total_dv_all_ms");
    const std::vector<std::size_t> map{0, 1, 3, 4, 5};
    for (std::size_t k = 0; k < map.size(); ++k)
    {
        CHECK(fewer.runs[k].fingerprint == a.runs[map[k]].fingerprint);
        CHECK(fewer.runs[k].analysis_hash == a.runs[map[k]].analysis_hash);
    }
}

TEST_CASE("monte carlo records faults and continues")
{
    const auto cfg = load("sync_naive.json");
    const auto mc = monte_carlo(cfg, parse_seed_list("1..10"), "events_executed");
    CHECK(mc.runs.size() == 10);
    CHECK(mc.faults > 0);
    CHECK(mc.values.size() + mc.faults == 10);
    for (const auto& r : mc.runs)
        if (r.fault) CHECK(r.fault->kind == FaultKind::invalid_transition);
}

TEST_CASE("transfer dv means of disjoint seed sets agree within three standard errors")
{
    const auto cfg = load("transfer_mc.json");
    const auto a = monte_carlo(cfg, parse_seed_list("1..100"), "total_dv_all_ms");
    const auto b = monte_carlo(cfg, parse_seed_list("101..200"), "total_dv_all_ms");
    REQUIRE(a.faults == 0);
    REQUIRE(b.faults == 0);
    const double se = std::sqrt(a.stddev * a.stddev / 100 + b.stddev * b.stddev / 100);
    MESSAGE("means " << a.mean << " " << b.mean << " std " << a.stddev << " " << b.stddev);
    CHECK(std::abs(a.mean - b.mean) < 3 * se);
}

TEST_CASE("transfer dv means of disjoint seed sets agree within std over root 100")
{
    const auto cfg = load("transfer_mc.json");
    const auto a = monte_carlo(cfg, parse_seed_list("1..100"), "total_dv_all_ms");
    const auto b = monte_carlo(cfg, parse_seed_list("101..200"), "total_dv_all_ms");
    MESSAGE("difference " << std::abs(a.mean - b.mean) << " bounds " << a.stddev / 10 << " " << b.stddev / 10);
    CHECK(std::abs(a.mean - b.mean) < a.stddev / 10);
    CHECK(std::abs(a.mean - b.mean) < b.stddev / 10);
}

TEST_CASE("scenario validation")
{
    json j = json::parse(slurp(scenario("empty.json")));
    CHECK_NOTHROW(ScenarioConfig::from_json(j));
    j["colour"] = "blue";
    CHECK_THROWS_AS(ScenarioConfig::from_json(j), Fault);

    json demo = json::parse(slurp(scenario("demo.json")));
    demo["processes"][0]["body"] = "nobody";
    try
    {
        ScenarioConfig::from_json(demo);
        FAIL("expected config_error");
    }
    catch (const Fault& f)
    {
        CHECK(f.kind() == FaultKind::config_error);
    }
    json v2 = json::parse(slurp(scenario("empty.json")));
    v2["version"] = 2;
    CHECK_THROWS_AS(ScenarioConfig::from_json(v2), Fault);
}

TEST_CASE("run outputs on disk")
{
    const auto dir = std::filesystem::temp_directory_path() / "fswsim_outputs_test";
    std::filesystem::remove_all(dir);
    const RunReport r = run_scenario(load("demo.json"), 7);
    write_run_outputs(r, dir.string());
    const std::string jsonl = slurp(dir / "telemetry.jsonl");
    CHECK(jsonl == r.telemetry);
    CHECK(recanonicalize_jsonl(jsonl) == jsonl);
    CHECK(sha256_hex(jsonl) == r.analysis_hash);
    const json report = json::parse(slurp(dir / "report.json"));
    CHECK(report["fingerprint"] == r.fingerprint);
    CHECK(std::filesystem::exists(dir / "state_sc_a.csv"));
}

TEST_CASE("command line exit codes")
{
    const auto out = std::filesystem::temp_directory_path() / "fswsim_cli_out";
    std::string text;
    CHECK(run_cli("run --scenario " + scenario("empty.json") + " --seed 42 --out " + out.string(), &text) == 0);
    CHECK(text.find("b54f23e0") != std::string::npos);

    // First naive-sync seed that faults.
    const auto cfg = load("sync_naive.json");
    std::uint64_t faulting = 0;
    for (std::uint64_t s = 1; s <= 50 && !faulting; ++s)
        if (run_scenario(cfg, s, {false}).fault) faulting = s;
    REQUIRE(faulting != 0);
    CHECK(run_cli("run --scenario " + scenario("sync_naive.json") + " --seed " + std::to_string(faulting) + " --out " +
                      out.string(),
                  &text) == 2);
    CHECK(text.find("InvalidTransition") != std::string::npos);
    CHECK(text.find("gnc_b") != std::string::npos);

    CHECK(run_cli("run --scenario /nonexistent/scenario.json") == 3);
    CHECK(run_cli("check --scenario " + scenario("empty.json") + " --seed 1 --runs 2") == 0);

    json noisy = json::parse(slurp(scenario("empty.json")));
    noisy["debug"] = {{"inject_wall_clock", true}};
    const auto path = std::filesystem::temp_directory_path() / "fswsim_wall_clock.json";
    std::ofstream(path) << noisy.dump();
    CHECK(run_cli("check --scenario " + path.string() + " --seed 1 --runs 3", &text) == 4);
    CHECK(text.find("wall_clock") != std::string::npos);
}
