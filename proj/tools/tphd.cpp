#include "tphd/app.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

std::optional<int> parse_window(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (s == "unbounded") return tphd::kUnboundedWindow;
    return std::stoi(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trajectory PHD filter with joint tracking and classification"};
    app.require_subcommand(1);

    tphd::SimulateOptions sim;
    std::uint64_t sim_seed = 0;
    auto* simulate = app.add_subcommand("simulate", "Generate ground truth and measurement frames");
    simulate->add_option("--config", sim.config, "Experiment file")->required();
    simulate->add_option("--out", sim.out, std::string("Output directory (default: $") + tphd::kOutDirEnv + " or ./out)");
    auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Master seed override");

    tphd::TrackOptions track;
    std::uint64_t track_seed = 0;
    std::string track_window;
    std::string sequences = "final";
    auto* trk = app.add_subcommand("track", "Run Monte Carlo filter passes");
    trk->add_option("--config", track.config, "Experiment file")->required();
    trk->add_option("--out", track.out, "Output directory");
    trk->add_option("--runs", track.runs, "Monte Carlo runs")->capture_default_str();
    trk->add_option("--workers", track.workers, "Worker threads (0: available parallelism)")->capture_default_str();
    trk->add_option("--l-scan", track_window, "Window length L, or 'unbounded'");
    auto* track_seed_opt = trk->add_option("--seed", track_seed, "Master seed override");
    trk->add_option("--frames", track.frames, "'generate' or a frames.csv path (truth.csv beside it)")
        ->capture_default_str();
    trk->add_option("--sequences", sequences, "Trajectory sequences to write: final or all")
        ->check(CLI::IsMember({"final", "all"}))
        ->capture_default_str();

    tphd::SweepOptions sweep;
    std::uint64_t sweep_seed = 0;
    auto* swp = app.add_subcommand("sweep-lscan", "Compare window lengths on shared seeds");
    swp->add_option("--config", sweep.config, "Experiment file")->required();
    swp->add_option("--out", sweep.out, "Output directory");
    swp->add_option("--runs", sweep.runs, "Monte Carlo runs per window length")->capture_default_str();
    swp->add_option("--workers", sweep.workers, "Worker threads (0: available parallelism)")->capture_default_str();
    swp->add_option("--l-scan", sweep.l_values, "Window lengths, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    auto* sweep_seed_opt = swp->add_option("--seed", sweep_seed, "Master seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tphd::kExitConfig;
    }

    if (simulate->parsed()) {
        if (*sim_seed_opt) sim.seed = sim_seed;
        return tphd::cmd_simulate(sim);
    }
    if (trk->parsed()) {
        if (*track_seed_opt) track.seed = track_seed;
        try {
            track.l_scan = parse_window(track_window);
        } catch (const std::exception&) {
            std::cerr << "error: --l-scan must be a positive integer or 'unbounded'\n";
            return tphd::kExitConfig;
        }
        track.sequences = sequences == "all" ? tphd::SequenceOutput::all_scans : tphd::SequenceOutput::final_scan;
        return tphd::cmd_track(track);
    }
    if (*sweep_seed_opt) sweep.seed = sweep_seed;
    return tphd::cmd_sweep_lscan(sweep);
}
