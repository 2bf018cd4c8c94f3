// pointbeam CLI: run the enhancement pipeline on a scenario file, or drive
// one of the evaluation experiments. All outputs are deterministic for a
// fixed seed; wall-clock time is printed but never written to files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pointbeam/pointbeam.hpp"

namespace fs = std::filesystem;
using namespace pointbeam;

namespace {

std::optional<Vec3> parse_target(const std::string& s) {
    if (s.empty()) return std::nullopt;
    Vec3 v;
    const int n = std::sscanf(s.c_str(), "%lf,%lf,%lf", &v.x, &v.y, &v.z);
    if (n < 2) {
        fail(Errc::invalid_input, "eval_cli", "target must be \"x,y\" or \"x,y,z\"");
    }
    return v;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        out.push_back(std::stod(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

void write_report(const eval::ExperimentReport& rep, const std::string& out_dir, const std::string& format) {
    fs::create_directories(out_dir);
    const bool embed = format == "json";
    std::ofstream rj(fs::path(out_dir) / "report.json", std::ios::binary);
    rj << rep.to_json(embed);
    if (!embed) {
        std::ofstream tc(fs::path(out_dir) / "trials.csv", std::ios::binary);
        tc << rep.trials_csv();
    }
    std::printf("experiment %s: %zu trial record(s) -> %s (%.2fs)\n", rep.id.c_str(), rep.trials.size(),
                out_dir.c_str(), rep.runtime_seconds);
    for (const auto& [k, v] : rep.summary) std::printf("  %s = %s\n", k.c_str(), io::json_number(v).c_str());
    for (const auto& w : rep.warnings) std::printf("  warning: %s\n", w.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed-microphone beamforming evaluation toolkit"};
    app.require_subcommand(1);

    std::string scenario_path, target_str, out_dir = "out", format = "csv";
    std::uint64_t seed = 1;
    std::size_t trials = 1;

    auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
        if (needs_scenario)
            cmd->add_option("--scenario", scenario_path, "scenario file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "master RNG seed");
        cmd->add_option("--format", format, "trial table format: csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        return cmd;
    };

    auto* run = add_common(app.add_subcommand("run", "simulate a scenario and enhance the target point"), true);
    run->add_option("--target", target_str, "target point \"x,y[,z]\" (default: first desired source)");
    bool run_use_seed = false;
    run->add_flag("--override-seed", run_use_seed, "replace the scenario rng_seed with --seed");

    auto* mc = add_common(app.add_subcommand("monte-carlo", "disambiguation probability over random source layouts"),
                          true);
    double min_sep = 0.5;
    std::size_t interferers = 1;
    mc->add_option("--min-separation", min_sep, "minimum source separation in meters");
    mc->add_option("--trials", trials, "number of trials")->required();
    mc->add_option("--interferers", interferers, "interferer count per trial");

    auto* ae = add_common(app.add_subcommand("align-error", "coarse/fine alignment error vs ground truth"), true);
    std::size_t ae_trials = 5;
    ae->add_option("--trials", ae_trials, "noise realizations");

    auto* sweep = add_common(app.add_subcommand("snr-sweep", "enhancement gain vs microphone count"), true);
    std::string counts_str = "1,2,4,8,12";
    sweep->add_option("--counts", counts_str, "comma-separated mic counts");

    auto* grid = add_common(app.add_subcommand("chirp-grid", "beacon detection accuracy vs duration and distance"),
                            false);
    std::string durations_str = "0.001,0.005,0.01,0.02";
    std::string distances_str = "1,3,10,30,100,300";
    grid->add_option("--durations", durations_str, "comma-separated beacon durations, seconds");
    grid->add_option("--distances", distances_str, "comma-separated device distances, meters");

    auto* nlos = add_common(app.add_subcommand("nlos", "multipath combining gain vs obstacle transmissivity"), true);
    std::string trans_str = "0.15,0.4,0.8";
    nlos->add_option("--transmissivities", trans_str, "comma-separated obstacle gains to sweep");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            sim::Scenario scn = io::scenario_from_file(scenario_path);
            if (run_use_seed) scn.rng_seed = seed;
            auto rep = eval::cmd_run(scn, parse_target(target_str), out_dir);
            write_report(rep, out_dir, format);
        } else if (mc->parsed()) {
            sim::Scenario layout = io::scenario_from_file(scenario_path);
            auto rep = eval::cmd_monte_carlo(layout, min_sep, trials, seed, interferers);
            write_report(rep, out_dir, format);
        } else if (ae->parsed()) {
            sim::Scenario scn = io::scenario_from_file(scenario_path);
            auto rep = eval::cmd_alignment_error(scn, ae_trials, seed);
            write_report(rep, out_dir, format);
        } else if (sweep->parsed()) {
            sim::Scenario scn = io::scenario_from_file(scenario_path);
            std::vector<std::size_t> counts;
            for (double c : parse_list(counts_str)) counts.push_back(static_cast<std::size_t>(c));
            auto rep = eval::cmd_snr_vs_miccount(scn, counts, seed);
            write_report(rep, out_dir, format);
        } else if (grid->parsed()) {
            auto rep = eval::cmd_chirp_grid(parse_list(durations_str), parse_list(distances_str), seed);
            write_report(rep, out_dir, format);
        } else if (nlos->parsed()) {
            sim::Scenario scn = io::scenario_from_file(scenario_path);
            auto rep = eval::cmd_nlos(scn, parse_list(trans_str), seed);
            write_report(rep, out_dir, format);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
