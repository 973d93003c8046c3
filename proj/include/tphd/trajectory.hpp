#pragma once

#include "tphd/error.hpp"
#include "tphd/models.hpp"
#include "tphd/numeric.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace tphd {

/// Gaussian density over a trajectory born at `birth` with `length` states.
///
/// `mean` stacks all states, oldest first. `cov` covers only the trailing
/// active window (all states when no window is applied); states before the
/// window are frozen point estimates.
struct GaussianTrajectory {
    int birth = 1;
    int length = 1;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(kStateDim);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(kStateDim, kStateDim);

    [[nodiscard]] int active_length() const { return static_cast<int>(cov.rows()) / kStateDim; }
    [[nodiscard]] int frozen_length() const { return length - active_length(); }
    [[nodiscard]] int last_time() const { return birth + length - 1; }

    [[nodiscard]] Vec6 state(int i) const { return mean.segment<kStateDim>(i * kStateDim); }
    [[nodiscard]] Vec6 last_mean() const { return mean.tail<kStateDim>(); }
    [[nodiscard]] Mat6 last_cov() const { return cov.bottomRightCorner<kStateDim, kStateDim>(); }

    [[nodiscard]] auto active_mean() const { return mean.tail(cov.rows()); }
    [[nodiscard]] auto active_mean() { return mean.tail(cov.rows()); }

    static GaussianTrajectory single(int birth, const Vec6& m, const Mat6& p) {
        return {birth, 1, m, p};
    }

    void validate() const {
        if (birth < 1 || length < 1) throw InvalidParameter("trajectory birth and length must be >= 1");
        if (mean.size() != static_cast<Eigen::Index>(length) * kStateDim)
            throw InvalidParameter("trajectory mean size does not match its length");
        if (cov.rows() != cov.cols() || cov.rows() % kStateDim != 0 || cov.rows() == 0 ||
            active_length() > length)
            throw InvalidParameter("trajectory covariance has an invalid shape");
    }
};

struct ModelHypothesis {
    int model = 0;
    double weight = 1.0;
    GaussianTrajectory gauss;
    /// Model of the hypothesis this one was predicted from, while the bank
    /// still holds one entry per (previous, current) model pair.
    std::optional<int> prev_model;
};

/// One class-labelled mixture term with its bank of model hypotheses.
struct TrajectoryComponent {
    int class_id = 0;
    double weight = 0.0;
    std::uint64_t label = 0;  ///< creation counter, inherited by descendants
    std::vector<ModelHypothesis> bank;

    [[nodiscard]] int birth() const { return bank.front().gauss.birth; }
    [[nodiscard]] int length() const { return bank.front().gauss.length; }
};

struct Diagnostics {
    std::size_t singular_innovations = 0;
    std::size_t relinearizations = 0;  ///< per-measurement linearizations
};

/// Trajectory PHD: components per class, all alive at `time`.
struct PhdState {
    int time = 0;
    std::map<int, std::vector<TrajectoryComponent>> components;
    std::uint64_t next_label = 1;
    Diagnostics diagnostics;

    [[nodiscard]] double class_mass(int class_id) const {
        auto it = components.find(class_id);
        if (it == components.end()) return 0.0;
        double sum = 0.0;
        for (const auto& c : it->second) sum += c.weight;
        return sum;
    }
    [[nodiscard]] double total_mass() const {
        double sum = 0.0;
        for (const auto& [id, list] : components) {
            (void)id;
            for (const auto& c : list) sum += c.weight;
        }
        return sum;
    }
    [[nodiscard]] std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [id, list] : components) {
            (void)id;
            n += list.size();
        }
        return n;
    }
};

struct BirthEntry {
    double class_weight = 0.0;
    std::vector<double> model_weights;
    Vec6 mean = Vec6::Zero();
    Mat6 cov = Mat6::Identity();
};

/// Birth intensity per class; identical at every scan.
struct BirthModel {
    std::map<int, std::vector<BirthEntry>> entries;

    void validate(const ClassRegistry& classes) const {
        for (const auto& [class_id, list] : entries) {
            auto it = classes.find(class_id);
            if (it == classes.end())
                throw ConfigError("birth model refers to unknown class " + std::to_string(class_id));
            for (const auto& e : list) {
                if (!(e.class_weight >= 0.0)) throw InvalidParameter("birth class weight must be >= 0");
                if (static_cast<int>(e.model_weights.size()) != it->second.model_count())
                    throw InvalidParameter("birth model weights must cover the class model bank");
                double s = 0.0;
                for (double w : e.model_weights) {
                    if (w < 0.0) throw InvalidParameter("birth model weight must be >= 0");
                    s += w;
                }
                if (std::abs(s - 1.0) > 1e-9) throw InvalidParameter("birth model weights must sum to 1");
            }
        }
    }
};

/// Birth components for scan `k`, one per (class, entry), labelled from
/// `next_label` in class-then-entry order.
inline std::vector<TrajectoryComponent> make_birth_components(const BirthModel& birth, int k,
                                                              std::uint64_t& next_label) {
    if (k < 1) throw InvalidParameter("birth time must be >= 1");
    std::vector<TrajectoryComponent> out;
    for (const auto& [class_id, list] : birth.entries) {
        for (const auto& e : list) {
            TrajectoryComponent c{class_id, e.class_weight, next_label++, {}};
            for (std::size_t r = 0; r < e.model_weights.size(); ++r)
                c.bank.push_back({static_cast<int>(r), e.model_weights[r], GaussianTrajectory::single(k, e.mean, e.cov),
                                  std::nullopt});
            out.push_back(std::move(c));
        }
    }
    return out;
}

inline std::vector<TrajectoryComponent> make_birth_components(const BirthModel& birth, int k) {
    std::uint64_t label = 1;
    return make_birth_components(birth, k, label);
}

/// Extends a trajectory by one state predicted through (F, Q); the joint
/// covariance gains the cross block P[., last] F^T and the corner F P_last F^T + Q.
inline GaussianTrajectory append_predicted_state(const GaussianTrajectory& g, const Mat6& f, const Mat6& q) {
    const Eigen::Index n = g.cov.rows();
    if (g.mean.size() != static_cast<Eigen::Index>(g.length) * kStateDim || n % kStateDim != 0 || n == 0 ||
        g.cov.cols() != n)
        throw InvalidParameter("append_predicted_state: inconsistent trajectory dimensions");

    GaussianTrajectory out;
    out.birth = g.birth;
    out.length = g.length + 1;
    out.mean.resize(g.mean.size() + kStateDim);
    out.mean.head(g.mean.size()) = g.mean;
    out.mean.tail<kStateDim>() = f * g.last_mean();

    out.cov.resize(n + kStateDim, n + kStateDim);
    out.cov.topLeftCorner(n, n) = g.cov;
    const Eigen::MatrixXd cross = g.cov.rightCols<kStateDim>() * f.transpose();
    out.cov.topRightCorner(n, kStateDim) = cross;
    out.cov.bottomLeftCorner(kStateDim, n) = cross.transpose();
    Mat6 corner = f * g.last_cov() * f.transpose() + q;
    symmetrize(corner);
    out.cov.bottomRightCorner<kStateDim, kStateDim>() = corner;
    return out;
}

struct StateMarginal {
    Vec6 mean;
    Mat6 cov;
};

inline StateMarginal last_state_marginal(const GaussianTrajectory& g) { return {g.last_mean(), g.last_cov()}; }

/// Frozen prefix states and the Gaussian over the trailing `window` states.
struct WindowSplit {
    std::vector<Vec6> frozen;
    GaussianTrajectory active;
};

/// Restricts the joint covariance to the trailing `window` states; earlier
/// states keep their means and lose their covariance. Identity when the
/// trajectory already fits.
inline GaussianTrajectory apply_window(GaussianTrajectory g, int window) {
    if (window < 1) throw InvalidParameter("L-scan window must be >= 1");
    if (g.active_length() <= window) return g;
    const Eigen::Index keep = static_cast<Eigen::Index>(window) * kStateDim;
    g.cov = g.cov.bottomRightCorner(keep, keep).eval();
    return g;
}

inline WindowSplit lscan_window(const GaussianTrajectory& g, int window) {
    GaussianTrajectory cropped = apply_window(g, window);
    WindowSplit out;
    const int frozen = cropped.frozen_length();
    for (int i = 0; i < frozen; ++i) out.frozen.push_back(cropped.state(i));
    out.active.birth = cropped.birth + frozen;
    out.active.length = cropped.active_length();
    out.active.mean = cropped.active_mean();
    out.active.cov = cropped.cov;
    return out;
}

inline void require_same_shape(const GaussianTrajectory& a, const GaussianTrajectory& b) {
    if (a.birth != b.birth || a.length != b.length || a.cov.rows() != b.cov.rows())
        throw InvalidMerge("cannot merge trajectories with different birth, length or window");
}

/// Moment-matched mixture of same-shape trajectory hypotheses. Weights need
/// not be normalized; the result carries their sum.
inline ModelHypothesis merge_hypotheses(std::span<const ModelHypothesis* const> items,
                                        std::span<const double> weights) {
    if (items.empty() || items.size() != weights.size()) throw InvalidMerge("merge needs matching, non-empty inputs");
    for (const auto* h : items) require_same_shape(items.front()->gauss, h->gauss);

    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw InvalidMerge("merge weights must have a positive sum");

    const auto& first = items.front()->gauss;
    ModelHypothesis out{items.front()->model, total, first, std::nullopt};
    if (items.size() == 1) return out;

    out.gauss.mean.setZero();
    for (std::size_t i = 0; i < items.size(); ++i) out.gauss.mean += (weights[i] / total) * items[i]->gauss.mean;

    const Eigen::Index n = first.cov.rows();
    out.gauss.cov.setZero();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const Eigen::VectorXd d = items[i]->gauss.mean.tail(n) - out.gauss.mean.tail(n);
        out.gauss.cov += (weights[i] / total) * (items[i]->gauss.cov + d * d.transpose());
    }
    symmetrize(out.gauss.cov);
    return out;
}

/// Moment-matched merge of two hypotheses of the same trajectory shape.
inline ModelHypothesis merge_pair(const ModelHypothesis& a, const ModelHypothesis& b, double wa, double wb) {
    require_same_shape(a.gauss, b.gauss);
    if (!(wa >= 0.0 && wb >= 0.0) || !(wa + wb > 0.0)) throw InvalidMerge("merge weights must be >= 0 with positive sum");
    if (wa == 0.0) return {b.model, wb, b.gauss, b.prev_model};
    if (wb == 0.0) return {a.model, wa, a.gauss, a.prev_model};
    const std::array<const ModelHypothesis*, 2> items{&a, &b};
    const std::array<double, 2> w{wa, wb};
    return merge_hypotheses(items, w);
}

/// Bank-weighted moments of a component's newest state.
inline StateMarginal component_last_state(const TrajectoryComponent& c) {
    StateMarginal out{Vec6::Zero(), Mat6::Zero()};
    double total = 0.0;
    for (const auto& h : c.bank) total += h.weight;
    if (c.bank.size() == 1 || !(total > 0.0)) return last_state_marginal(c.bank.front().gauss);
    for (const auto& h : c.bank) out.mean += (h.weight / total) * h.gauss.last_mean();
    for (const auto& h : c.bank) {
        const Vec6 d = h.gauss.last_mean() - out.mean;
        out.cov += (h.weight / total) * (h.gauss.last_cov() + d * d.transpose());
    }
    symmetrize(out.cov);
    return out;
}

}  // namespace tphd
