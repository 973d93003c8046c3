#pragma once

#include "tphd/error.hpp"
#include "tphd/frame.hpp"
#include "tphd/models.hpp"
#include "tphd/numeric.hpp"
#include "tphd/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

namespace tphd {

/// Window length meaning "never freeze past states".
inline constexpr int kUnboundedWindow = std::numeric_limits<int>::max();

struct FilterConfig {
    enum class ModelMerge {
        pair_exact,  ///< one hypothesis per (previous, current) model pair until reduction
        imm_merge,   ///< hypotheses sharing the current model merged right after prediction
    };
    enum class Extraction {
        top_n,      ///< the round(total mass) heaviest components
        threshold,  ///< every component heavier than extraction_threshold
    };

    int l_scan = kUnboundedWindow;
    double prune_threshold = 1e-5;
    double absorb_threshold = 4.0;
    int max_components = 50;
    ModelMerge model_merge = ModelMerge::pair_exact;
    Extraction extraction = Extraction::top_n;
    double extraction_threshold = 0.5;

    void validate() const {
        if (l_scan < 1) throw InvalidParameter("l_scan must be >= 1");
        if (!(prune_threshold >= 0.0)) throw InvalidParameter("prune_threshold must be >= 0");
        if (!(absorb_threshold > 0.0)) throw InvalidParameter("absorb_threshold must be > 0");
        if (max_components < 1) throw InvalidParameter("max_components must be >= 1");
    }
};

struct TrajectoryEstimate {
    int birth = 1;
    int length = 0;
    std::vector<Vec6> states;
    int class_id = 0;
    double class_prob = 0.0;
    double weight = 0.0;
    std::uint64_t track_id = 0;

    [[nodiscard]] int last_time() const { return birth + length - 1; }
};

namespace detail {

inline const TargetClassSpec& lookup_class(const ClassRegistry& classes, int class_id) {
    auto it = classes.find(class_id);
    if (it == classes.end()) throw ConfigError("class " + std::to_string(class_id) + " is not registered");
    return it->second;
}

/// Moment-matches hypotheses that share a model id; resulting bank weights
/// are the summed item weights divided by `total`.
inline std::vector<ModelHypothesis> merge_by_model(const std::vector<std::pair<const ModelHypothesis*, double>>& items,
                                                   double total) {
    std::map<int, std::vector<std::size_t>> by_model;
    for (std::size_t i = 0; i < items.size(); ++i) by_model[items[i].first->model].push_back(i);
    std::vector<ModelHypothesis> bank;
    bank.reserve(by_model.size());
    for (const auto& [model, idx] : by_model) {
        (void)model;
        if (idx.size() == 1) {
            const auto& [h, w] = items[idx.front()];
            bank.push_back({h->model, w / total, h->gauss, std::nullopt});
            continue;
        }
        std::vector<const ModelHypothesis*> hs;
        std::vector<double> ws;
        double sum = 0.0;
        for (auto i : idx) {
            if (items[i].second == 0.0) continue;
            hs.push_back(items[i].first);
            ws.push_back(items[i].second);
            sum += items[i].second;
        }
        if (hs.empty()) continue;
        ModelHypothesis merged = merge_hypotheses(hs, ws);
        merged.weight = sum / total;
        bank.push_back(std::move(merged));
    }
    return bank;
}

struct Innovation {
    Vec3 predicted;  ///< predicted measurement
    Mat36 h;
    Eigen::LLT<Mat3> llt;
    double log_norm = 0.0;  ///< log of the Gaussian normalizing constant
    bool ok = false;
};

inline Vec3 innovation_residual(const Vec3& z, const Vec3& predicted, SensorModel::Mode mode) {
    Vec3 nu = z - predicted;
    if (mode == SensorModel::Mode::ekf) nu(kAzimuth) = wrap_angle(nu(kAzimuth));
    return nu;
}

/// Linearizes the sensor for one hypothesis at `point` (defaults to its
/// predicted newest state) and factors the innovation covariance.
inline Innovation make_innovation(const GaussianTrajectory& g, const SensorModel& sensor,
                                  const std::optional<Vec6>& point = std::nullopt) {
    Innovation inn;
    const Vec6 m = g.last_mean();
    try {
        if (sensor.mode == SensorModel::Mode::linear) {
            inn.h = sensor.linear_h;
            inn.predicted = inn.h * m;
        } else {
            const Vec6 x = point.value_or(m);
            inn.h = observation_jacobian(x);
            inn.predicted = observe(x) + inn.h * (m - x);
        }
    } catch (const SingularGeometry&) {
        return inn;
    }
    Mat3 s = inn.h * g.last_cov() * inn.h.transpose() + sensor.noise;
    symmetrize(s);
    if (!s.allFinite()) return inn;
    inn.llt.compute(s);
    if (inn.llt.info() != Eigen::Success) return inn;
    const Vec3 diag = inn.llt.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any()) return inn;
    inn.log_norm = -0.5 * kMeasDim * std::log(2.0 * std::numbers::pi) - diag.array().log().sum();
    inn.ok = true;
    return inn;
}

inline double log_likelihood(const Innovation& inn, const Vec3& nu) {
    const Vec3 w = inn.llt.matrixL().solve(nu);
    return inn.log_norm - 0.5 * w.squaredNorm();
}

/// Posterior of one hypothesis given an innovation: the gain acts on the
/// active window only, so frozen states keep their means.
struct PosteriorMoments {
    Eigen::MatrixXd gain;  ///< active dim x 3
    Eigen::MatrixXd cov;
};

inline PosteriorMoments posterior_moments(const GaussianTrajectory& g, const Innovation& inn) {
    const Eigen::MatrixXd pht = g.cov.rightCols<kStateDim>() * inn.h.transpose();
    PosteriorMoments out;
    out.gain = inn.llt.solve(pht.transpose()).transpose();
    out.cov = g.cov - out.gain * pht.transpose();
    symmetrize(out.cov);
    return out;
}

/// True when linearizing at the predicted mean is unreliable: the mean is on
/// (or next to) the vertical axis, or its position spread is large relative
/// to its horizontal distance from the sensor.
inline bool needs_relinearization(const GaussianTrajectory& g, const SensorModel& sensor) {
    if (sensor.mode != SensorModel::Mode::ekf) return false;
    const Vec6 m = g.last_mean();
    const double r1 = m(kPx) * m(kPx) + m(kPy) * m(kPy);
    if (r1 < sensor.axis_guard * sensor.axis_guard) return true;
    if (!(sensor.relinearize_ratio > 0.0)) return false;
    const Mat6 p = g.last_cov();
    Mat3 pos;
    const std::array<int, 3> idx{kPx, kPy, kPz};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) pos(i, j) = p(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    const double spread_sq = Eigen::SelfAdjointEigenSolver<Mat3>(pos, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    return spread_sq > sensor.relinearize_ratio * sensor.relinearize_ratio * r1;
}

/// Linearization point for one measurement: start from the position the
/// measurement implies (velocity from the prediction), then iterate the
/// Gauss-Newton step on the newest-state marginal.
inline Vec6 relinearization_point(const GaussianTrajectory& g, const Vec3& z, const SensorModel& sensor) {
    const Vec6 m = g.last_mean();
    const Mat6 p = g.last_cov();
    Vec6 x = m;
    const Vec3 pos = measurement_position(z);
    x(kPx) = pos(0);
    x(kPy) = pos(1);
    x(kPz) = pos(2);
    for (int it = 0; it < sensor.relinearize_iterations; ++it) {
        Mat36 h;
        try {
            h = observation_jacobian(x);
        } catch (const SingularGeometry&) {
            break;
        }
        const Vec3 predicted = observe(x) + h * (m - x);
        Mat3 s = h * p * h.transpose() + sensor.noise;
        symmetrize(s);
        const Eigen::LLT<Mat3> llt(s);
        if (llt.info() != Eigen::Success) break;
        const Eigen::Matrix<double, 6, 3> gain = (llt.solve(h * p)).transpose();
        const Vec6 next = m + gain * innovation_residual(z, predicted, sensor.mode);
        if (!next.allFinite()) break;
        const double step = (next - x).norm();
        x = next;
        if (step < 1e-9 * (1.0 + x.norm())) break;
    }
    return x;
}

}  // namespace detail

/// Prediction: survivors extend every hypothesis through each model of their
/// class bank; births for scan k are appended.
inline PhdState predict(const PhdState& state, const BirthModel& birth, const ClassRegistry& classes,
                        const FilterConfig& cfg) {
    PhdState out;
    out.time = state.time + 1;
    out.next_label = state.next_label;
    out.diagnostics = state.diagnostics;

    for (const auto& [class_id, list] : state.components) {
        const TargetClassSpec& spec = detail::lookup_class(classes, class_id);
        const int models = spec.model_count();
        auto& dst = out.components[class_id];
        dst.reserve(list.size());
        for (const auto& comp : list) {
            TrajectoryComponent next{class_id, spec.p_survive * comp.weight, comp.label, {}};
            next.bank.reserve(comp.bank.size() * static_cast<std::size_t>(models));
            for (const auto& h : comp.bank) {
                if (h.model < 0 || h.model >= models)
                    throw ConfigError("hypothesis model " + std::to_string(h.model) + " outside the bank of class " +
                                      spec.name);
                for (int r = 0; r < models; ++r) {
                    const double p = spec.switch_matrix(h.model, r);
                    if (p == 0.0) continue;
                    const auto& model = spec.models[static_cast<std::size_t>(r)];
                    next.bank.push_back({r, h.weight * p,
                                         apply_window(append_predicted_state(h.gauss, model.transition, model.noise),
                                                      cfg.l_scan),
                                         h.model});
                }
            }
            if (cfg.model_merge == FilterConfig::ModelMerge::imm_merge) {
                std::vector<std::pair<const ModelHypothesis*, double>> items;
                for (const auto& h : next.bank) items.emplace_back(&h, h.weight);
                next.bank = detail::merge_by_model(items, 1.0);
            }
            dst.push_back(std::move(next));
        }
    }

    for (auto& c : make_birth_components(birth, out.time, out.next_label)) {
        detail::lookup_class(classes, c.class_id);
        for (auto& h : c.bank) h.gauss = apply_window(std::move(h.gauss), cfg.l_scan);
        out.components[c.class_id].push_back(std::move(c));
    }
    return out;
}

/// Measurement update. Terms lighter than `weight_floor` are not emitted;
/// the default keeps every misdetection term and every detection term with
/// positive weight.
inline PhdState update(const PhdState& state, const MeasurementFrame& frame, const SensorModel& sensor,
                       const ClutterModel& clutter, const ClassRegistry& classes, double weight_floor = 0.0) {
    if (frame.time != state.time)
        throw InvalidParameter("frame time " + std::to_string(frame.time) + " does not match state time " +
                               std::to_string(state.time));

    struct Slot {
        int class_id;
        const TrajectoryComponent* comp;
        double p_detect;
        std::vector<bool> relinearize;  ///< per hypothesis: linearize per measurement
        std::vector<detail::Innovation> innovations;
        std::vector<std::optional<detail::PosteriorMoments>> moments;
    };

    PhdState out;
    out.time = state.time;
    out.next_label = state.next_label;
    out.diagnostics = state.diagnostics;

    std::vector<Slot> slots;
    for (const auto& [class_id, list] : state.components) {
        const double pd = detail::lookup_class(classes, class_id).p_detect;
        auto& dst = out.components[class_id];
        for (const auto& comp : list) {
            TrajectoryComponent missed = comp;
            missed.weight = comp.weight * (1.0 - pd);
            if (missed.weight >= weight_floor) dst.push_back(std::move(missed));
            if (pd == 0.0 || frame.measurements.empty()) continue;

            Slot slot{class_id, &comp, pd, {}, {}, {}};
            slot.innovations.resize(comp.bank.size());
            slot.moments.resize(comp.bank.size());
            for (std::size_t r = 0; r < comp.bank.size(); ++r) {
                const auto& g = comp.bank[r].gauss;
                slot.relinearize.push_back(detail::needs_relinearization(g, sensor));
                if (slot.relinearize.back()) continue;
                slot.innovations[r] = detail::make_innovation(g, sensor);
                if (!slot.innovations[r].ok) ++out.diagnostics.singular_innovations;
            }
            slots.push_back(std::move(slot));
        }
    }

    std::vector<std::vector<double>> log_q(slots.size());
    std::vector<double> log_phi(slots.size());
    std::vector<std::vector<detail::Innovation>> local_innovations(slots.size());
    std::vector<double> terms;

    for (const auto& z : frame.measurements) {
        for (std::size_t j = 0; j < slots.size(); ++j) {
            Slot& slot = slots[j];
            const auto& bank = slot.comp->bank;
            log_q[j].assign(bank.size(), -std::numeric_limits<double>::infinity());
            local_innovations[j].assign(bank.size(), {});
            terms.clear();
            for (std::size_t r = 0; r < bank.size(); ++r) {
                if (slot.relinearize[r]) {
                    local_innovations[j][r] = detail::make_innovation(
                        bank[r].gauss, sensor, detail::relinearization_point(bank[r].gauss, z, sensor));
                    ++out.diagnostics.relinearizations;
                    if (!local_innovations[j][r].ok) ++out.diagnostics.singular_innovations;
                }
                const auto& inn = slot.relinearize[r] ? local_innovations[j][r] : slot.innovations[r];
                if (!inn.ok || bank[r].weight <= 0.0) {
                    terms.push_back(-std::numeric_limits<double>::infinity());
                    continue;
                }
                const Vec3 nu = detail::innovation_residual(z, inn.predicted, sensor.mode);
                log_q[j][r] = detail::log_likelihood(inn, nu);
                terms.push_back(std::log(bank[r].weight) + log_q[j][r]);
            }
            log_phi[j] = log_sum_exp(terms);
        }

        CompensatedSum denom;
        denom.add(clutter_intensity(z, clutter));
        for (std::size_t j = 0; j < slots.size(); ++j)
            denom.add(slots[j].p_detect * slots[j].comp->weight * std::exp(log_phi[j]));
        const double d = denom.value();
        if (!(d > 0.0)) continue;

        for (std::size_t j = 0; j < slots.size(); ++j) {
            Slot& slot = slots[j];
            const double w = slot.p_detect * slot.comp->weight * std::exp(log_phi[j]) / d;
            if (!(w > 0.0) || w < weight_floor) continue;

            const auto& bank = slot.comp->bank;
            TrajectoryComponent post{slot.class_id, w, slot.comp->label, {}};
            double kept = 0.0;
            for (std::size_t r = 0; r < bank.size(); ++r) {
                if (!std::isfinite(log_q[j][r]) || bank[r].weight <= 0.0) continue;
                const double wr = std::exp(std::log(bank[r].weight) + log_q[j][r] - log_phi[j]);
                if (!(wr > 0.0) || wr < weight_floor) continue;

                const detail::Innovation& inn = slot.relinearize[r] ? local_innovations[j][r] : slot.innovations[r];
                detail::PosteriorMoments local;
                const detail::PosteriorMoments* pm = nullptr;
                if (slot.relinearize[r]) {
                    local = detail::posterior_moments(bank[r].gauss, inn);
                    pm = &local;
                } else {
                    if (!slot.moments[r]) slot.moments[r] = detail::posterior_moments(bank[r].gauss, inn);
                    pm = &*slot.moments[r];
                }
                ModelHypothesis h{bank[r].model, wr, {}, bank[r].prev_model};
                h.gauss.birth = bank[r].gauss.birth;
                h.gauss.length = bank[r].gauss.length;
                h.gauss.mean = bank[r].gauss.mean;
                h.gauss.cov = pm->cov;
                h.gauss.active_mean() += pm->gain * detail::innovation_residual(z, inn.predicted, sensor.mode);
                kept += wr;
                post.bank.push_back(std::move(h));
            }
            if (post.bank.empty()) continue;
            if (weight_floor > 0.0 && post.bank.size() < bank.size())
                for (auto& h : post.bank) h.weight /= kept;
            out.components[slot.class_id].push_back(std::move(post));
        }
    }
    return out;
}

/// Pruning, absorption of near-duplicate components sharing (class, birth),
/// and the per-class cap. Absorption also collapses hypotheses of a bank that
/// share a model id.
inline PhdState reduce(const PhdState& state, const FilterConfig& cfg) {
    PhdState out;
    out.time = state.time;
    out.next_label = state.next_label;
    out.diagnostics = state.diagnostics;

    for (const auto& [class_id, list] : state.components) {
        std::vector<TrajectoryComponent> kept;
        for (const auto& comp : list) {
            if (comp.weight < cfg.prune_threshold || comp.bank.empty()) continue;
            TrajectoryComponent c{comp.class_id, comp.weight, comp.label, {}};
            double sum = 0.0;
            for (const auto& h : comp.bank)
                if (h.weight >= cfg.prune_threshold) {
                    c.bank.push_back(h);
                    sum += h.weight;
                }
            if (c.bank.empty()) {
                auto best = std::max_element(comp.bank.begin(), comp.bank.end(),
                                             [](const auto& a, const auto& b) { return a.weight < b.weight; });
                c.bank.push_back(*best);
                sum = best->weight;
            }
            if (c.bank.size() < comp.bank.size() && sum > 0.0)
                for (auto& h : c.bank) h.weight /= sum;
            kept.push_back(std::move(c));
        }

        std::map<int, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < kept.size(); ++i) buckets[kept[i].birth()].push_back(i);

        std::vector<TrajectoryComponent> merged;
        for (auto& [birth, idx] : buckets) {
            (void)birth;
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t b) { return kept[a].weight > kept[b].weight; });
            std::vector<bool> used(idx.size(), false);
            for (std::size_t a = 0; a < idx.size(); ++a) {
                if (used[a]) continue;
                used[a] = true;
                const TrajectoryComponent& top = kept[idx[a]];
                std::vector<std::size_t> group{idx[a]};
                const StateMarginal lead = component_last_state(top);
                Eigen::LLT<Mat6> llt(lead.cov);
                if (llt.info() == Eigen::Success) {
                    for (std::size_t b = a + 1; b < idx.size(); ++b) {
                        if (used[b]) continue;
                        const Vec6 d = component_last_state(kept[idx[b]]).mean - lead.mean;
                        if ((llt.matrixL().solve(d)).squaredNorm() <= cfg.absorb_threshold) {
                            used[b] = true;
                            group.push_back(idx[b]);
                        }
                    }
                }

                TrajectoryComponent m{top.class_id, 0.0, top.label, {}};
                std::vector<std::pair<const ModelHypothesis*, double>> items;
                if (group.size() == 1) {
                    m.weight = top.weight;
                    for (const auto& h : top.bank) items.emplace_back(&h, h.weight);
                    m.bank = detail::merge_by_model(items, 1.0);
                } else {
                    for (auto g : group) {
                        m.weight += kept[g].weight;
                        for (const auto& h : kept[g].bank) items.emplace_back(&h, kept[g].weight * h.weight);
                    }
                    m.bank = detail::merge_by_model(items, m.weight);
                }
                merged.push_back(std::move(m));
            }
        }

        std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            return a.birth() < b.birth();
        });
        if (merged.size() > static_cast<std::size_t>(cfg.max_components))
            merged.resize(static_cast<std::size_t>(cfg.max_components));

        std::set<std::uint64_t> seen;
        for (auto& c : merged)
            if (!seen.insert(c.label).second) c.label = out.next_label++;

        std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
            if (a.birth() != b.birth()) return a.birth() < b.birth();
            return a.label < b.label;
        });
        if (!merged.empty()) out.components[class_id] = std::move(merged);
    }
    return out;
}

/// Bank-weighted trajectory mean of a component, one state per time step.
inline std::vector<Vec6> component_states(const TrajectoryComponent& c) {
    double total = 0.0;
    for (const auto& h : c.bank) total += h.weight;
    const auto& first = c.bank.front().gauss;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(first.mean.size());
    if (c.bank.size() == 1 || !(total > 0.0))
        mean = first.mean;
    else
        for (const auto& h : c.bank) mean += (h.weight / total) * h.gauss.mean;
    std::vector<Vec6> states(static_cast<std::size_t>(first.length));
    for (int i = 0; i < first.length; ++i) states[static_cast<std::size_t>(i)] = mean.segment<kStateDim>(i * kStateDim);
    return states;
}

/// Estimated trajectories: count round(sum of weights), heaviest first.
inline std::vector<TrajectoryEstimate> extract(const PhdState& state, const FilterConfig& cfg = {}) {
    std::vector<const TrajectoryComponent*> all;
    CompensatedSum mass;
    for (const auto& [class_id, list] : state.components) {
        (void)class_id;
        for (const auto& c : list) {
            all.push_back(&c);
            mass.add(c.weight);
        }
    }

    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (all[a]->weight != all[b]->weight) return all[a]->weight > all[b]->weight;
        return all[a]->birth() < all[b]->birth();
    });

    std::size_t count = 0;
    if (cfg.extraction == FilterConfig::Extraction::top_n) {
        count = std::min<std::size_t>(all.size(), static_cast<std::size_t>(std::max(0.0, std::round(mass.value()))));
    } else {
        while (count < order.size() && all[order[count]]->weight > cfg.extraction_threshold) ++count;
    }

    std::vector<StateMarginal> last;
    last.reserve(all.size());
    for (const auto* c : all) last.push_back(component_last_state(*c));

    std::vector<TrajectoryEstimate> out;
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t i = order[n];
        const TrajectoryComponent& c = *all[i];
        TrajectoryEstimate e;
        e.birth = c.birth();
        e.length = c.length();
        e.states = component_states(c);
        e.class_id = c.class_id;
        e.weight = c.weight;
        e.track_id = c.label;

        // Share of this component among same-birth components of any class
        // that describe the same target.
        double rival = 0.0;
        Eigen::LLT<Mat6> llt(last[i].cov);
        for (std::size_t o = 0; o < all.size(); ++o) {
            if (o == i || all[o]->birth() != c.birth()) continue;
            if (llt.info() != Eigen::Success) continue;
            const Vec6 d = last[o].mean - last[i].mean;
            if (llt.matrixL().solve(d).squaredNorm() <= cfg.absorb_threshold) rival += all[o]->weight;
        }
        e.class_prob = c.weight + rival > 0.0 ? c.weight / (c.weight + rival) : 0.0;
        out.push_back(std::move(e));
    }
    return out;
}

struct StepResult {
    PhdState state;
    std::vector<TrajectoryEstimate> estimates;
};

/// One filter cycle: predict, update, reduce, extract.
inline StepResult step(const PhdState& state, const MeasurementFrame& frame, const BirthModel& birth,
                       const SensorModel& sensor, const ClutterModel& clutter, const ClassRegistry& classes,
                       const FilterConfig& cfg) {
    if (frame.time != state.time + 1)
        throw InvalidParameter("step expects frame time " + std::to_string(state.time + 1));
    PhdState predicted = predict(state, birth, classes, cfg);
    PhdState updated = update(predicted, frame, sensor, clutter, classes, cfg.prune_threshold);
    StepResult result{reduce(updated, cfg), {}};
    result.estimates = extract(result.state, cfg);
    return result;
}

}  // namespace tphd
