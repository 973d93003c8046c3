#pragma once

#include "tphd/filter.hpp"
#include "tphd/metrics.hpp"
#include "tphd/random.hpp"
#include "tphd/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tphd {

/// Everything one reproduction needs: scenario, filter priors and settings,
/// and the evaluation metric.
struct Experiment {
    ScenarioConfig scenario;
    BirthModel birth;
    FilterConfig filter;
    MetricConfig metric;

    void validate() const {
        scenario.validate();
        birth.validate(scenario.classes);
        filter.validate();
        metric.validate();
    }

    [[nodiscard]] std::vector<int> class_ids() const {
        std::vector<int> ids;
        for (const auto& [id, spec] : scenario.classes) {
            (void)spec;
            ids.push_back(id);
        }
        return ids;
    }
};

struct EstimateRow {
    int scan = 0;
    std::uint64_t track = 0;
    int birth = 0;
    int length = 0;
    int class_id = 0;
    double class_prob = 0.0;
    double weight = 0.0;
    Vec6 state = Vec6::Zero();  ///< newest state
};

struct RunRecord {
    int run = 0;
    std::uint64_t seed = 0;
    double seconds = 0.0;  ///< filter wall clock, simulation excluded
    GroundTruth truth;
    std::vector<double> tm;
    std::vector<int> switches;
    std::vector<std::map<int, ClassCount>> cardinality;
    std::vector<std::map<int, ClassTally>> classification;
    /// Per scan: (truth target index, estimated class) of every real match.
    std::vector<std::vector<std::pair<std::size_t, int>>> matches;
    std::vector<EstimateRow> rows;
    /// Estimates emitted at the last scan, with their full state sequences.
    std::vector<TrajectoryEstimate> final_estimates;
    /// Full per-scan estimates; only kept on request.
    std::vector<std::vector<TrajectoryEstimate>> estimates;
    Diagnostics diagnostics;
};

/// Per-scan means across runs.
struct Aggregate {
    std::vector<double> mean_tm;
    std::vector<double> rms_tm;
    std::map<int, std::vector<double>> mean_estimated;
    std::map<int, std::vector<double>> mean_truth;
    std::map<int, std::vector<ClassTally>> classification;  ///< pooled over runs
    double mean_seconds = 0.0;
};

struct RunResults {
    std::vector<RunRecord> runs;
    Aggregate aggregate;
};

struct RunOptions {
    int workers = 0;  ///< 0: hardware concurrency
    bool keep_estimates = false;
    /// Replay these frames in every run instead of simulating.
    const std::vector<MeasurementFrame>* frames = nullptr;
    /// Truth to score against instead of simulating one.
    const GroundTruth* truth = nullptr;
};

/// One full filter pass over `frames`, scored against `truth`.
inline RunRecord run_filter_pass(const Experiment& exp, const GroundTruth& truth,
                                 const std::vector<MeasurementFrame>& frames, bool keep_estimates) {
    const auto classes = exp.class_ids();
    RunRecord rec;
    TrajectoryMetric metric(truth, exp.metric);
    PhdState state;

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::vector<TrajectoryEstimate>> per_scan;
    per_scan.reserve(frames.size());
    for (const auto& frame : frames) {
        StepResult r = step(state, frame, exp.birth, exp.scenario.sensor, exp.scenario.clutter, exp.scenario.classes,
                            exp.filter);
        state = std::move(r.state);
        per_scan.push_back(std::move(r.estimates));
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.diagnostics = state.diagnostics;

    std::vector<ScanEvaluation> evals;
    for (std::size_t k = 0; k < per_scan.size(); ++k) {
        const int t = frames[k].time;
        for (const auto& e : per_scan[k])
            for (const auto& x : e.states)
                if (!x.allFinite() || !std::isfinite(e.weight))
                    throw NumericalFailure("non-finite estimate at scan " + std::to_string(t));
        evals.push_back(metric.evaluate(t, per_scan[k]));
        if (!std::isfinite(evals.back().error))
            throw NumericalFailure("non-finite trajectory metric at scan " + std::to_string(t));
        rec.tm.push_back(evals.back().error);
        auto& m = rec.matches.emplace_back();
        for (const auto& [ei, ti] : evals.back().matches) m.emplace_back(ti, per_scan[k][ei].class_id);
        rec.switches.push_back(evals.back().switches);
        for (const auto& e : per_scan[k])
            rec.rows.push_back({t, e.track_id, e.birth, e.length, e.class_id, e.class_prob, e.weight, e.states.back()});
    }
    rec.cardinality = cardinality_stats(per_scan, truth, classes);
    rec.classification = classification_accuracy(per_scan, truth, evals, classes);
    if (!per_scan.empty()) rec.final_estimates = per_scan.back();
    if (keep_estimates) rec.estimates = std::move(per_scan);
    return rec;
}

inline Aggregate aggregate_runs(const std::vector<RunRecord>& runs, std::span<const int> class_ids) {
    Aggregate agg;
    if (runs.empty()) return agg;
    const std::size_t scans = runs.front().tm.size();
    const double n = static_cast<double>(runs.size());
    agg.mean_tm.assign(scans, 0.0);
    agg.rms_tm.assign(scans, 0.0);
    for (int c : class_ids) {
        agg.mean_estimated[c].assign(scans, 0.0);
        agg.mean_truth[c].assign(scans, 0.0);
        agg.classification[c].assign(scans, {});
    }
    for (const auto& r : runs) {
        agg.mean_seconds += r.seconds / n;
        for (std::size_t k = 0; k < scans; ++k) {
            agg.mean_tm[k] += r.tm[k] / n;
            agg.rms_tm[k] += r.tm[k] * r.tm[k] / n;
            for (int c : class_ids) {
                agg.mean_estimated[c][k] += r.cardinality[k].at(c).estimated / n;
                agg.mean_truth[c][k] += r.cardinality[k].at(c).truth / n;
                agg.classification[c][k].correct += r.classification[k].at(c).correct;
                agg.classification[c][k].matched += r.classification[k].at(c).matched;
            }
        }
    }
    for (auto& v : agg.rms_tm) v = std::sqrt(v);
    return agg;
}

/// Runs independent filter passes. Run r simulates frames with seed
/// master ^ r; the truth is shared unless the scenario regenerates it per run.
/// Results do not depend on the worker count.
inline RunResults run_monte_carlo(const Experiment& exp, int runs, const RunOptions& options = {}) {
    if (runs < 1) throw InvalidParameter("runs must be >= 1");
    exp.validate();

    const GroundTruth shared_truth = options.truth ? *options.truth : generate_truth(exp.scenario);
    RunResults results;
    results.runs.resize(static_cast<std::size_t>(runs));

    auto job = [&](int r) {
        const std::uint64_t seed = run_seed(exp.scenario.seed, static_cast<std::uint64_t>(r));
        GroundTruth truth = exp.scenario.regenerate_truth && !options.truth
                                ? generate_truth(exp.scenario, derive_seed(seed, "truth"))
                                : shared_truth;
        const std::vector<MeasurementFrame> frames =
            options.frames ? *options.frames : generate_frames(exp.scenario, truth, seed);
        RunRecord rec = run_filter_pass(exp, truth, frames, options.keep_estimates);
        rec.run = r;
        rec.seed = seed;
        rec.truth = std::move(truth);
        results.runs[static_cast<std::size_t>(r)] = std::move(rec);
    };

    int workers = options.workers > 0 ? options.workers : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, runs);
    if (workers == 1) {
        for (int r = 0; r < runs; ++r) job(r);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int r = next++; r < runs; r = next++) {
                    try {
                        job(r);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    results.aggregate = aggregate_runs(results.runs, exp.class_ids());
    return results;
}

}  // namespace tphd
