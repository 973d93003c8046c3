#pragma once

#include "tphd/error.hpp"
#include "tphd/frame.hpp"
#include "tphd/models.hpp"
#include "tphd/random.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tphd {

struct TargetSpec {
    std::string name;
    int class_id = 0;
    int birth_time = 1;
    int death_time = 1;  ///< last scan the target exists
    Vec6 initial = Vec6::Zero();
    /// Explicit model per state (padded with its last entry); empty means the
    /// sequence is sampled from the class switch matrix.
    std::vector<int> schedule;
    int initial_model = 0;
};

struct ScenarioConfig {
    int duration = 0;
    double dt = 1.0;
    std::vector<TargetSpec> targets;
    ClassRegistry classes;
    SensorModel sensor;
    ClutterModel clutter;
    std::uint64_t seed = 0;
    bool regenerate_truth = false;  ///< Monte Carlo: new maneuvers every run

    void validate() const {
        if (duration < 1) throw ConfigError("duration must be >= 1");
        if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
        if (classes.empty()) throw ConfigError("at least one class is required");
        for (const auto& [id, spec] : classes) {
            (void)id;
            spec.validate();
        }
        sensor.validate();
        clutter.validate();
        for (const auto& t : targets) {
            if (!(1 <= t.birth_time && t.birth_time <= t.death_time && t.death_time <= duration))
                throw ConfigError("target '" + t.name + "': need 1 <= birth <= death <= duration");
            auto it = classes.find(t.class_id);
            if (it == classes.end()) throw ConfigError("target '" + t.name + "': unknown class");
            const int m = it->second.model_count();
            if (t.initial_model < 0 || t.initial_model >= m)
                throw ConfigError("target '" + t.name + "': initial model outside the class bank");
            for (int r : t.schedule)
                if (r < 0 || r >= m) throw ConfigError("target '" + t.name + "': schedule model outside the class bank");
            if (!t.initial.allFinite()) throw ConfigError("target '" + t.name + "': non-finite initial state");
        }
    }
};

struct TruthTrack {
    std::string name;
    int class_id = 0;
    int birth = 1;
    int length = 0;
    std::vector<Vec6> states;
    std::vector<int> models;

    [[nodiscard]] int last_time() const { return birth + length - 1; }
    [[nodiscard]] bool alive(int t) const { return t >= birth && t <= last_time(); }
    [[nodiscard]] const Vec6& at(int t) const { return states[static_cast<std::size_t>(t - birth)]; }
};

struct GroundTruth {
    int duration = 0;
    std::vector<TruthTrack> targets;

    [[nodiscard]] int alive_count(int t, std::optional<int> class_id = std::nullopt) const {
        int n = 0;
        for (const auto& tr : targets)
            if (tr.alive(t) && (!class_id || tr.class_id == *class_id)) ++n;
        return n;
    }
};

/// Noiseless truth: x_{i+1} = F(r_{i+1}) x_i with the model sequence drawn
/// from the class Markov chain (or taken from the explicit schedule).
inline GroundTruth generate_truth(const ScenarioConfig& cfg, std::uint64_t seed) {
    GroundTruth truth;
    truth.duration = cfg.duration;
    for (std::size_t i = 0; i < cfg.targets.size(); ++i) {
        const TargetSpec& spec = cfg.targets[i];
        auto it = cfg.classes.find(spec.class_id);
        if (it == cfg.classes.end()) throw ConfigError("target '" + spec.name + "': unknown class");
        const TargetClassSpec& cls = it->second;

        TruthTrack track{spec.name, spec.class_id, spec.birth_time, spec.death_time - spec.birth_time + 1, {}, {}};
        auto rng = make_stream(seed, "maneuver", i);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        int model = spec.schedule.empty() ? spec.initial_model : spec.schedule.front();
        Vec6 x = spec.initial;
        for (int k = 0; k < track.length; ++k) {
            if (k > 0) {
                if (!spec.schedule.empty()) {
                    model = spec.schedule[std::min<std::size_t>(static_cast<std::size_t>(k), spec.schedule.size() - 1)];
                } else {
                    const double u = unit(rng);
                    double acc = 0.0;
                    int next = cls.model_count() - 1;
                    for (int r = 0; r < cls.model_count(); ++r) {
                        acc += cls.switch_matrix(model, r);
                        if (u < acc) {
                            next = r;
                            break;
                        }
                    }
                    model = next;
                }
                x = cls.models[static_cast<std::size_t>(model)].transition * x;
            }
            track.states.push_back(x);
            track.models.push_back(model);
        }
        truth.targets.push_back(std::move(track));
    }
    return truth;
}

inline GroundTruth generate_truth(const ScenarioConfig& cfg) { return generate_truth(cfg, cfg.seed); }

/// Detections and Poisson clutter for scan `t`. Each random concern uses its
/// own (seed, t)-derived stream. A target exactly at the sensor origin has no
/// defined measurement and is reported as missed.
inline MeasurementFrame generate_frame(const GroundTruth& truth, int t, const SensorModel& sensor,
                                       const ClutterModel& clutter, const ClassRegistry& classes, std::uint64_t seed) {
    const auto scan = static_cast<std::uint64_t>(t);
    auto detect_rng = make_stream(seed, "detection", scan);
    auto noise_rng = make_stream(seed, "noise", scan);
    auto clutter_rng = make_stream(seed, "clutter", scan);
    auto order_rng = make_stream(seed, "order", scan);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Mat3 noise_factor = Eigen::LLT<Mat3>(sensor.noise).matrixL();

    MeasurementFrame raw{t, {}, {}};
    for (std::size_t i = 0; i < truth.targets.size(); ++i) {
        const TruthTrack& tr = truth.targets[i];
        if (!tr.alive(t)) continue;
        auto it = classes.find(tr.class_id);
        if (it == classes.end()) throw ConfigError("truth target '" + tr.name + "': unknown class");
        const double u = unit(detect_rng);
        const Vec3 n{normal(noise_rng), normal(noise_rng), normal(noise_rng)};
        if (u >= it->second.p_detect) continue;

        const Vec6& x = tr.at(t);
        Measurement z;
        if (sensor.mode == SensorModel::Mode::linear) {
            z = sensor.linear_h * x;
        } else {
            if (x(kPx) == 0.0 && x(kPy) == 0.0 && x(kPz) == 0.0) continue;
            z = observe(x);
        }
        z += noise_factor * n;
        if (sensor.mode == SensorModel::Mode::ekf) z(kAzimuth) = wrap_angle(z(kAzimuth));
        raw.measurements.push_back(z);
        raw.provenance.push_back(static_cast<int>(i));
    }

    if (clutter.rate > 0.0) {
        std::poisson_distribution<int> count(clutter.rate);
        const int n = count(clutter_rng);
        for (int c = 0; c < n; ++c) {
            Measurement z;
            z(kAzimuth) = clutter.azimuth_min + (clutter.azimuth_max - clutter.azimuth_min) * unit(clutter_rng);
            z(kElevation) = clutter.elevation_min + (clutter.elevation_max - clutter.elevation_min) * unit(clutter_rng);
            z(kRange) = clutter.range_min + (clutter.range_max - clutter.range_min) * unit(clutter_rng);
            raw.measurements.push_back(z);
            raw.provenance.push_back(-1);
        }
    }

    std::vector<std::size_t> perm(raw.measurements.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(order_rng)]);
    }
    MeasurementFrame out{t, {}, {}};
    for (auto p : perm) {
        out.measurements.push_back(raw.measurements[p]);
        out.provenance.push_back(raw.provenance[p]);
    }
    return out;
}

inline std::vector<MeasurementFrame> generate_frames(const ScenarioConfig& cfg, const GroundTruth& truth,
                                                     std::uint64_t seed) {
    std::vector<MeasurementFrame> frames;
    frames.reserve(static_cast<std::size_t>(cfg.duration));
    for (int t = 1; t <= cfg.duration; ++t)
        frames.push_back(generate_frame(truth, t, cfg.sensor, cfg.clutter, cfg.classes, seed));
    return frames;
}

}  // namespace tphd
