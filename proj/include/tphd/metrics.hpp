#pragma once

#include "tphd/assignment.hpp"
#include "tphd/error.hpp"
#include "tphd/filter.hpp"
#include "tphd/simulator.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace tphd {

struct MetricConfig {
    double order = 2.0;
    double cutoff = 100.0;
    double switch_cost = 1.0;
    bool include_velocity = false;

    void validate() const {
        if (!(order >= 1.0)) throw InvalidParameter("metric order must be >= 1");
        if (!(cutoff > 0.0)) throw InvalidParameter("metric cutoff must be > 0");
        if (!(switch_cost >= 0.0)) throw InvalidParameter("metric switch cost must be >= 0");
    }
};

/// Read-only view of a trajectory for scoring: states from `birth` onwards.
struct TrackView {
    std::uint64_t id = 0;
    int birth = 1;
    std::span<const Vec6> states;

    [[nodiscard]] int last_time() const { return birth + static_cast<int>(states.size()) - 1; }
    [[nodiscard]] bool covers(int s) const { return s >= birth && s <= last_time(); }
    [[nodiscard]] const Vec6& at(int s) const { return states[static_cast<std::size_t>(s - birth)]; }
};

struct ScanScore {
    double error = 0.0;
    int switches = 0;
    /// Index pairs (first set, second set) assigned to each other and within
    /// the cutoff of each other at the scored scan.
    std::vector<std::pair<std::size_t, std::size_t>> matches;
};

namespace detail {

inline double state_distance(const Vec6& a, const Vec6& b, bool include_velocity) {
    if (include_velocity) return (a - b).norm();
    const Vec3 d{a(kPx) - b(kPx), a(kPy) - b(kPy), a(kPz) - b(kPz)};
    return d.norm();
}

}  // namespace detail

/// Scores two trajectory sets at scan `t` over the window [1, t].
///
/// Each pair costs, per step, min(d, c)^p where both exist and c^p where only
/// one does; unassigned trajectories cost c^p per existing step. The optimal
/// trajectory-level assignment gives the total, which is averaged over the t
/// steps. A switch penalty gamma^p is added for every current match whose
/// partner differs from the previous scan's `previous` matching (track ids).
/// This is a per-scan-assignment approximation of the LP trajectory metric
/// and bounds it from above.
inline ScanScore score_scan(std::span<const TrackView> a, std::span<const TrackView> b, int t,
                            const MetricConfig& cfg,
                            const std::map<std::uint64_t, std::uint64_t>* previous_a_to_b = nullptr,
                            const std::map<std::uint64_t, std::uint64_t>* previous_b_to_a = nullptr) {
    const double p = cfg.order;
    const double cp = std::pow(cfg.cutoff, p);
    const auto na = a.size(), nb = b.size();

    auto steps_in_window = [t](const TrackView& v) {
        const int lo = std::max(1, v.birth), hi = std::min(t, v.last_time());
        return hi >= lo ? hi - lo + 1 : 0;
    };
    auto pair_cost = [&](const TrackView& x, const TrackView& y) {
        const int lo = std::max(1, std::min(x.birth, y.birth));
        const int hi = std::min(t, std::max(x.last_time(), y.last_time()));
        double cost = 0.0;
        for (int s = lo; s <= hi; ++s) {
            const bool in_x = x.covers(s), in_y = y.covers(s);
            if (in_x && in_y)
                cost += std::pow(std::min(detail::state_distance(x.at(s), y.at(s), cfg.include_velocity), cfg.cutoff), p);
            else if (in_x || in_y)
                cost += cp;
        }
        return cost;
    };

    ScanScore out;
    if (na + nb == 0 || t < 1) return out;

    std::vector<double> lone_a(na), lone_b(nb);
    double big = 1.0;
    for (std::size_t i = 0; i < na; ++i) big += lone_a[i] = cp * steps_in_window(a[i]);
    for (std::size_t j = 0; j < nb; ++j) big += lone_b[j] = cp * steps_in_window(b[j]);

    const auto n = static_cast<Eigen::Index>(na + nb);
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, big);
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j)
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pair_cost(a[i], b[j]);
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(nb + i)) = lone_a[i];
    }
    for (std::size_t j = 0; j < nb; ++j) {
        cost(static_cast<Eigen::Index>(na + j), static_cast<Eigen::Index>(j)) = lone_b[j];
        for (std::size_t i = 0; i < na; ++i)
            cost(static_cast<Eigen::Index>(na + j), static_cast<Eigen::Index>(nb + i)) = 0.0;
    }
    const Assignment sol = solve_assignment(cost);

    for (std::size_t i = 0; i < na; ++i) {
        const int col = sol.row_to_col[i];
        if (col < 0 || static_cast<std::size_t>(col) >= nb) continue;
        const auto j = static_cast<std::size_t>(col);
        if (!a[i].covers(t) || !b[j].covers(t)) continue;
        if (detail::state_distance(a[i].at(t), b[j].at(t), cfg.include_velocity) >= cfg.cutoff) continue;
        out.matches.emplace_back(i, j);
    }

    for (const auto& [i, j] : out.matches) {
        bool switched = false;
        if (previous_a_to_b) {
            auto it = previous_a_to_b->find(a[i].id);
            switched = switched || (it != previous_a_to_b->end() && it->second != b[j].id);
        }
        if (previous_b_to_a) {
            auto it = previous_b_to_a->find(b[j].id);
            switched = switched || (it != previous_b_to_a->end() && it->second != a[i].id);
        }
        out.switches += switched ? 1 : 0;
    }

    out.error = std::pow(sol.cost / t + std::pow(cfg.switch_cost, p) * out.switches, 1.0 / p);
    return out;
}

inline std::vector<TrackView> truth_views(const GroundTruth& truth, int t, std::vector<std::size_t>* index = nullptr) {
    std::vector<TrackView> views;
    for (std::size_t i = 0; i < truth.targets.size(); ++i) {
        const auto& tr = truth.targets[i];
        if (!tr.alive(t)) continue;
        views.push_back({static_cast<std::uint64_t>(i), tr.birth,
                         std::span<const Vec6>(tr.states.data(), static_cast<std::size_t>(t - tr.birth + 1))});
        if (index) index->push_back(i);
    }
    return views;
}

inline std::vector<TrackView> estimate_views(std::span<const TrajectoryEstimate> estimates, int t,
                                             std::vector<std::size_t>* index = nullptr) {
    std::vector<TrackView> views;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const auto& e = estimates[i];
        const int n = std::min<int>(static_cast<int>(e.states.size()), t - e.birth + 1);
        if (n <= 0) continue;
        views.push_back({e.track_id, e.birth, std::span<const Vec6>(e.states.data(), static_cast<std::size_t>(n))});
        if (index) index->push_back(i);
    }
    return views;
}

/// Per-scan outcome against ground truth.
struct ScanEvaluation {
    double error = 0.0;
    int switches = 0;
    /// (estimate index, truth target index)
    std::vector<std::pair<std::size_t, std::size_t>> matches;
};

/// Streaming trajectory metric; call `evaluate` for t = 1, 2, ... in order.
class TrajectoryMetric {
public:
    TrajectoryMetric(const GroundTruth& truth, MetricConfig cfg) : truth_(&truth), cfg_(cfg) { cfg_.validate(); }

    ScanEvaluation evaluate(int t, std::span<const TrajectoryEstimate> estimates) {
        std::vector<std::size_t> truth_index, est_index;
        const auto est = estimate_views(estimates, t, &est_index);
        const auto tru = truth_views(*truth_, t, &truth_index);
        const ScanScore s = score_scan(est, tru, t, cfg_, &prev_est_to_truth_, &prev_truth_to_est_);

        ScanEvaluation out{s.error, s.switches, {}};
        prev_est_to_truth_.clear();
        prev_truth_to_est_.clear();
        for (const auto& [i, j] : s.matches) {
            out.matches.emplace_back(est_index[i], truth_index[j]);
            prev_est_to_truth_[est[i].id] = tru[j].id;
            prev_truth_to_est_[tru[j].id] = est[i].id;
        }
        return out;
    }

private:
    const GroundTruth* truth_;
    MetricConfig cfg_;
    std::map<std::uint64_t, std::uint64_t> prev_est_to_truth_;
    std::map<std::uint64_t, std::uint64_t> prev_truth_to_est_;
};

/// Metric over a whole pass; `estimates[t - 1]` holds the estimates emitted at scan t.
inline std::vector<ScanEvaluation> trajectory_metric(const std::vector<std::vector<TrajectoryEstimate>>& estimates,
                                                     const GroundTruth& truth, const MetricConfig& cfg) {
    TrajectoryMetric metric(truth, cfg);
    std::vector<ScanEvaluation> out;
    for (std::size_t k = 0; k < estimates.size(); ++k) out.push_back(metric.evaluate(static_cast<int>(k) + 1, estimates[k]));
    return out;
}

struct ClassCount {
    double estimated = 0.0;
    double truth = 0.0;
};

/// Per scan, per class: number of emitted estimates with that label and
/// number of alive truth targets of that class.
inline std::vector<std::map<int, ClassCount>> cardinality_stats(
    const std::vector<std::vector<TrajectoryEstimate>>& estimates, const GroundTruth& truth,
    std::span<const int> class_ids) {
    std::vector<std::map<int, ClassCount>> out(estimates.size());
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        const int t = static_cast<int>(k) + 1;
        for (int c : class_ids) out[k][c] = {0.0, static_cast<double>(truth.alive_count(t, c))};
        for (const auto& e : estimates[k]) out[k][e.class_id].estimated += 1.0;
    }
    return out;
}

struct ClassTally {
    int correct = 0;
    int matched = 0;

    [[nodiscard]] double fraction() const { return matched > 0 ? static_cast<double>(correct) / matched : std::nan(""); }
};

/// Per scan, per true class: matched pairs whose labels agree.
inline std::vector<std::map<int, ClassTally>> classification_accuracy(
    const std::vector<std::vector<TrajectoryEstimate>>& estimates, const GroundTruth& truth,
    const std::vector<ScanEvaluation>& evaluations, std::span<const int> class_ids) {
    std::vector<std::map<int, ClassTally>> out(evaluations.size());
    for (std::size_t k = 0; k < evaluations.size(); ++k) {
        for (int c : class_ids) out[k][c] = {};
        for (const auto& [ei, ti] : evaluations[k].matches) {
            const int true_class = truth.targets[ti].class_id;
            auto& tally = out[k][true_class];
            ++tally.matched;
            if (estimates[k][ei].class_id == true_class) ++tally.correct;
        }
    }
    return out;
}

}  // namespace tphd
