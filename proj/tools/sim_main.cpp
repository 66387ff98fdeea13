#include "fswsim/harness.hpp"
#include "fswsim/plot.hpp"
#include "fswsim/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace
{

enum Exit
{
    ok = 0,
    fault_raised = 2,
    config_error = 3,
    not_deterministic = 4,
};

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace

int main(int argc, char** argv)
{
    using namespace fswsim;

    CLI::App app{"Hybrid event-driven spacecraft flight-software simulator"};
    app.require_subcommand(1);

    std::string scenario, out_dir, seeds_text, metric = "total_dv_all_ms", in_dir;
    std::uint64_t seed = 1;
    int runs = 3;
    unsigned threads = 0;

    auto* run = app.add_subcommand("run", "run one scenario");
    run->add_option("--scenario", scenario, "scenario JSON file")->required();
    auto* run_seed = run->add_option("--seed", seed, "RNG seed (default: the scenario's)");
    run->add_option("--out", out_dir, "output directory");

    auto* mc = app.add_subcommand("mc", "Monte Carlo sweep");
    mc->add_option("--scenario", scenario, "scenario JSON file")->required();
    mc->add_option("--seeds", seeds_text, "A..B or a,b,c")->required();
    mc->add_option("--metric", metric, "dotted metric path");
    mc->add_option("--threads", threads, "worker threads (0: all cores)");
    mc->add_option("--out", out_dir, "output directory");

    auto* check = app.add_subcommand("check", "determinism check");
    check->add_option("--scenario", scenario, "scenario JSON file")->required();
    auto* check_seed = check->add_option("--seed", seed, "RNG seed (default: the scenario's)");
    check->add_option("--runs", runs, "number of runs (>= 2)");

    auto* plot = app.add_subcommand("plot", "write SVG plots for the CSVs in a run directory");
    plot->add_option("--in", in_dir, "run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*plot)
        {
            const int n = plot_directory(in_dir);
            std::cout << "wrote " << n << " plot(s) in " << in_dir << "\n";
            return ok;
        }

        const ScenarioConfig cfg = ScenarioConfig::load(scenario);

        if (*run)
        {
            const std::uint64_t s = run_seed->count() ? seed : cfg.seed;
            const RunReport r = run_scenario(cfg, s);
            if (!out_dir.empty()) write_run_outputs(r, out_dir);
            std::cout << "scenario " << r.scenario << " seed " << r.seed << "\n"
                      << "fingerprint " << r.fingerprint << "\n"
                      << "analysis_hash " << r.analysis_hash << "\n"
                      << "events " << r.metrics.at("events_executed") << " wall " << r.wall_seconds << " s speedup "
                      << r.speedup << "x\n";
            if (r.fault)
            {
                std::cerr << "fault: " << r.fault->describe() << "\n";
                return fault_raised;
            }
            return ok;
        }

        if (*mc)
        {
            const MonteCarloSummary s = monte_carlo(cfg, parse_seed_list(seeds_text), metric, threads);
            if (!out_dir.empty())
            {
                const std::filesystem::path dir{out_dir};
                write_file(dir / "mc_report.json", s.to_json().dump(2) + "\n");
                write_file(dir / "histogram.csv", s.histogram.csv());
                plot_directory(out_dir);
            }
            std::cout << "metric " << metric << " runs " << s.runs.size() << " faults " << s.faults << "\n"
                      << "mean " << s.mean << " std " << s.stddev << "\n";
            for (const auto& c : s.fingerprint_collisions) std::cout << "fingerprint collision: " << c << "\n";
            return ok;
        }

        if (*check)
        {
            const std::uint64_t s = check_seed->count() ? seed : cfg.seed;
            const DeterminismResult d = check_determinism(cfg, s, runs);
            for (std::size_t i = 0; i < d.fingerprints.size(); ++i)
                std::cout << "run " << i << " fingerprint " << d.fingerprints[i] << " hash " << d.hashes[i] << "\n";
            if (!d.pass)
            {
                std::cout << "determinism FAILED\n";
                if (d.divergence) std::cout << "first divergence: " << *d.divergence << "\n";
                return not_deterministic;
            }
            std::cout << "determinism passed\n";
            return ok;
        }
    }
    catch (const Fault& f)
    {
        std::cerr << "error: " << f.what() << "\n";
        return f.kind() == FaultKind::config_error ? config_error : fault_raised;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    }
    return ok;
}
