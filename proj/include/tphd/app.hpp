#pragma once

#include "tphd/config.hpp"
#include "tphd/error.hpp"
#include "tphd/io.hpp"
#include "tphd/monte_carlo.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tphd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Environment variable naming the output directory when --out is absent.
inline constexpr const char* kOutDirEnv = "TPHD_OUT_DIR";

struct SimulateOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

struct TrackOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int runs = 1;
    int workers = 0;
    std::optional<int> l_scan;
    std::string frames = "generate";  ///< or a frames.csv path, truth.csv beside it
    SequenceOutput sequences = SequenceOutput::final_scan;
};

struct SweepOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int runs = 1;
    int workers = 0;
    std::vector<int> l_values{1, 5, 10, 30};
};

/// Maps library errors to exit statuses and prints one diagnostic line.
inline int run_guarded(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (...) {
        err << "numerical failure: unknown error\n";
        return kExitNumerical;
    }
}

inline std::filesystem::path resolve_out_dir(const std::string& flag) {
    std::string dir = flag;
    if (dir.empty()) {
        const char* env = std::getenv(kOutDirEnv);
        dir = env != nullptr && *env != '\0' ? env : "out";
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

namespace detail {

inline LoadedConfig load_with_seed(const std::string& path, const std::optional<std::uint64_t>& seed) {
    LoadedConfig cfg = load_config(path);
    if (seed) cfg.experiment.scenario.seed = *seed;
    return cfg;
}

inline std::string class_label(const LoadedConfig& cfg, int id) {
    auto it = cfg.class_names.find(id);
    return it == cfg.class_names.end() ? std::to_string(id) : it->second;
}

inline Json l_json(int l) { return l == kUnboundedWindow ? Json("unbounded") : Json(l); }

inline Json summary_json(const LoadedConfig& cfg, const RunResults& results) {
    const Aggregate& agg = results.aggregate;
    Json card = Json::object(), acc = Json::object();
    for (const auto& [c, est] : agg.mean_estimated) {
        card[class_label(cfg, c)] = {{"estimated", est}, {"truth", agg.mean_truth.at(c)}};
        Json series = Json::array();
        for (const auto& tally : agg.classification.at(c))
            series.push_back(tally.matched > 0 ? Json(tally.fraction()) : Json(nullptr));
        acc[class_label(cfg, c)] = series;
    }
    Json per_run = Json::array();
    for (const auto& r : results.runs) per_run.push_back(r.seconds);
    return {
        {"scenario_digest", cfg.digest},
        {"runs", results.runs.size()},
        {"seed", cfg.experiment.scenario.seed},
        {"l_scan", l_json(cfg.experiment.filter.l_scan)},
        {"per_scan", {{"tm", agg.mean_tm}, {"tm_rms", agg.rms_tm}, {"card_by_class", card}, {"class_acc", acc}}},
        {"timing_seconds", {{"mean", agg.mean_seconds}, {"per_run", per_run}}},
    };
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const LoadedConfig& cfg,
                           int runs, const std::vector<int>& l_values, const Json& wall_clock,
                           const std::vector<std::string>& outputs) {
    Json l = Json::array();
    for (int v : l_values) l.push_back(l_json(v));
    Json paths = Json::array();
    for (const auto& o : outputs) paths.push_back((dir / o).string());
    const Json manifest{{"command", command},         {"config_digest", cfg.digest},
                        {"seed", cfg.experiment.scenario.seed}, {"runs", runs},
                        {"l_values", l},              {"wall_clock_seconds", wall_clock},
                        {"outputs", paths}};
    write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace detail

/// Writes truth.csv and frames.csv for the configured scenario.
inline int cmd_simulate(const SimulateOptions& opt, std::ostream& err = std::cerr) {
    return run_guarded(
        [&] {
            const LoadedConfig cfg = detail::load_with_seed(opt.config, opt.seed);
            const auto dir = resolve_out_dir(opt.out);
            const auto& sc = cfg.experiment.scenario;
            const auto start = std::chrono::steady_clock::now();
            const GroundTruth truth = generate_truth(sc);
            const auto frames = generate_frames(sc, truth, run_seed(sc.seed, 0));
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            std::ostringstream t, f;
            write_truth_csv(t, truth);
            write_frames_csv(f, frames);
            write_file((dir / "truth.csv").string(), t.str());
            write_file((dir / "frames.csv").string(), f.str());
            detail::write_manifest(dir, "simulate", cfg, 1, {}, Json{{"simulate", seconds}},
                                   {"truth.csv", "frames.csv"});
        },
        err);
}

/// Filter passes over simulated (or replayed) frames; writes estimates.csv,
/// states.csv, metrics.csv and summary.json.
inline int cmd_track(const TrackOptions& opt, std::ostream& err = std::cerr) {
    return run_guarded(
        [&] {
            if (opt.runs < 1) throw ConfigError("--runs must be >= 1");
            if (opt.workers < 0) throw ConfigError("--workers must be >= 0");
            LoadedConfig cfg = detail::load_with_seed(opt.config, opt.seed);
            if (opt.l_scan) {
                if (*opt.l_scan < 1) throw ConfigError("--l-scan must be >= 1");
                cfg.experiment.filter.l_scan = *opt.l_scan;
            }
            const auto dir = resolve_out_dir(opt.out);

            RunOptions ro;
            ro.workers = opt.workers;
            ro.keep_estimates = opt.sequences == SequenceOutput::all_scans;
            std::vector<MeasurementFrame> frames;
            GroundTruth truth;
            if (opt.frames != "generate") {
                const std::filesystem::path frames_path(opt.frames);
                const auto truth_path = frames_path.parent_path() / "truth.csv";
                const int duration = cfg.experiment.scenario.duration;
                auto fin = open_input(frames_path.string());
                frames = read_frames_csv(fin, duration, frames_path.string());
                auto tin = open_input(truth_path.string());
                truth = read_truth_csv(tin, duration, truth_path.string());
                for (const auto& tr : truth.targets)
                    if (cfg.experiment.scenario.classes.count(tr.class_id) == 0)
                        throw ConfigError(truth_path.string() + ": unknown class " + std::to_string(tr.class_id));
                ro.frames = &frames;
                ro.truth = &truth;
            }

            const RunResults results = run_monte_carlo(cfg.experiment, opt.runs, ro);

            std::ostringstream est, states, metrics;
            write_estimates(est, states, results.runs, opt.sequences);
            write_metrics(metrics, results.runs, cfg.class_names);
            write_file((dir / "estimates.csv").string(), est.str());
            write_file((dir / "states.csv").string(), states.str());
            write_file((dir / "metrics.csv").string(), metrics.str());
            write_file((dir / "summary.json").string(), detail::summary_json(cfg, results).dump(2) + "\n");
            detail::write_manifest(dir, "track", cfg, opt.runs, {cfg.experiment.filter.l_scan},
                                   Json{{std::to_string(cfg.experiment.filter.l_scan),
                                         results.aggregate.mean_seconds}},
                                   {"estimates.csv", "states.csv", "metrics.csv", "summary.json"});
        },
        err);
}

/// One Monte Carlo batch per window length, all with the same seeds; writes
/// lsweep.csv and timing.csv.
inline int cmd_sweep_lscan(const SweepOptions& opt, std::ostream& err = std::cerr) {
    return run_guarded(
        [&] {
            if (opt.l_values.empty()) throw ConfigError("--l-scan list must not be empty");
            if (opt.runs < 1) throw ConfigError("--runs must be >= 1");
            if (opt.workers < 0) throw ConfigError("--workers must be >= 0");
            for (int l : opt.l_values)
                if (l < 1) throw ConfigError("--l-scan values must be >= 1");
            LoadedConfig cfg = detail::load_with_seed(opt.config, opt.seed);
            const auto dir = resolve_out_dir(opt.out);

            std::ostringstream sweep, timing;
            sweep << "L,scan,mean_tm,rms_tm\n";
            timing << "L,mean_seconds\n";
            Json wall = Json::object();
            for (int l : opt.l_values) {
                Experiment exp = cfg.experiment;
                exp.filter.l_scan = l;
                RunOptions ro;
                ro.workers = opt.workers;
                const RunResults results = run_monte_carlo(exp, opt.runs, ro);
                const Aggregate& agg = results.aggregate;
                for (std::size_t k = 0; k < agg.mean_tm.size(); ++k)
                    sweep << l << ',' << k + 1 << ',' << fmt_num(agg.mean_tm[k]) << ',' << fmt_num(agg.rms_tm[k]) << '\n';
                timing << l << ',' << fmt_num(agg.mean_seconds) << '\n';
                wall[std::to_string(l)] = agg.mean_seconds;
            }
            write_file((dir / "lsweep.csv").string(), sweep.str());
            write_file((dir / "timing.csv").string(), timing.str());
            detail::write_manifest(dir, "sweep-lscan", cfg, opt.runs, opt.l_values, wall, {"lsweep.csv", "timing.csv"});
        },
        err);
}

}  // namespace tphd
