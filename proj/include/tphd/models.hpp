#pragma once

#include "tphd/error.hpp"
#include "tphd/numeric.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace tphd {

// State layout: [px, vx, py, vy, pz, vz].
inline constexpr int kPx = 0, kVx = 1, kPy = 2, kVy = 3, kPz = 4, kVz = 5;

/// Below this |turn rate| (rad/s) the coordinated-turn matrix is replaced by
/// its constant-velocity limit.
inline constexpr double kMinTurnRate = 1e-9;

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw InvalidParameter(std::string(what) + " must be finite");
}

/// Constant velocity transition, I3 (x) [[1, dt], [0, 1]].
inline Mat6 cv_transition(double dt) {
    require_finite(dt, "dt");
    if (dt < 0) throw InvalidParameter("dt must be non-negative");
    Mat6 f = Mat6::Identity();
    for (int axis = 0; axis < 3; ++axis) f(2 * axis, 2 * axis + 1) = dt;
    return f;
}

/// Coordinated turn in the (y, z) velocity plane with x kept at constant
/// velocity. Positive rates turn clockwise.
inline Mat6 ct_transition(double turn_rate, double dt) {
    require_finite(turn_rate, "turn_rate");
    require_finite(dt, "dt");
    if (dt < 0) throw InvalidParameter("dt must be non-negative");
    if (std::abs(turn_rate) < kMinTurnRate) return cv_transition(dt);

    const double s = std::sin(turn_rate * dt);
    const double c = std::cos(turn_rate * dt);
    Mat6 f = Mat6::Zero();
    f(kPx, kPx) = 1.0;
    f(kPx, kVx) = dt;
    f(kVx, kVx) = 1.0;

    f(kPy, kPy) = 1.0;
    f(kPy, kVy) = s / turn_rate;
    f(kPy, kVz) = -(1.0 - c) / turn_rate;
    f(kVy, kVy) = c;
    f(kVy, kVz) = -s;

    f(kPz, kVy) = (1.0 - c) / turn_rate;
    f(kPz, kPz) = 1.0;
    f(kPz, kVz) = s / turn_rate;
    f(kVz, kVy) = s;
    f(kVz, kVz) = c;
    return f;
}

/// Discretized white-acceleration noise, sigma_sq * I3 (x) [[dt^4/4, dt^3/2], [dt^3/2, dt^2]].
inline Mat6 process_noise(double dt, double sigma_sq) {
    require_finite(dt, "dt");
    require_finite(sigma_sq, "sigma_sq");
    if (sigma_sq < 0) throw InvalidParameter("sigma_sq must be non-negative");
    if (dt < 0) throw InvalidParameter("dt must be non-negative");
    const double dt2 = dt * dt;
    Mat6 q = Mat6::Zero();
    for (int axis = 0; axis < 3; ++axis) {
        const int p = 2 * axis;
        q(p, p) = sigma_sq * dt2 * dt2 / 4.0;
        q(p, p + 1) = sigma_sq * dt2 * dt / 2.0;
        q(p + 1, p) = q(p, p + 1);
        q(p + 1, p + 1) = sigma_sq * dt2;
    }
    return q;
}

struct MotionModel {
    std::string name;
    double turn_rate = 0.0;  ///< rad/s, 0 for constant velocity
    Mat6 transition = Mat6::Identity();
    Mat6 noise = Mat6::Zero();

    static MotionModel constant_velocity(double dt, double sigma_sq, std::string name = "CV") {
        return {std::move(name), 0.0, cv_transition(dt), process_noise(dt, sigma_sq)};
    }
    static MotionModel coordinated_turn(double turn_rate, double dt, double sigma_sq, std::string name) {
        return {std::move(name), turn_rate, ct_transition(turn_rate, dt), process_noise(dt, sigma_sq)};
    }
};

/// A target class with its jump-Markov model bank. Model ids are bank indices.
struct TargetClassSpec {
    int id = 0;
    std::string name;
    std::vector<MotionModel> models;
    Eigen::MatrixXd switch_matrix;  ///< row r: distribution of the next model given r
    double p_survive = 1.0;
    double p_detect = 1.0;

    [[nodiscard]] int model_count() const { return static_cast<int>(models.size()); }

    void validate() const {
        if (models.empty()) throw InvalidParameter("class '" + name + "' has an empty model bank");
        const auto m = static_cast<Eigen::Index>(models.size());
        if (switch_matrix.rows() != m || switch_matrix.cols() != m)
            throw InvalidParameter("class '" + name + "': switch matrix must be " + std::to_string(m) + "x" +
                                   std::to_string(m));
        for (Eigen::Index r = 0; r < m; ++r) {
            if ((switch_matrix.row(r).array() < 0).any())
                throw InvalidParameter("class '" + name + "': negative switch probability");
            if (std::abs(switch_matrix.row(r).sum() - 1.0) > 1e-12)
                throw InvalidParameter("class '" + name + "': switch matrix row " + std::to_string(r) +
                                       " does not sum to 1");
        }
        for (double p : {p_survive, p_detect})
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("class '" + name + "': probability outside [0, 1]");
        for (const auto& model : models) {
            if (!model.noise.isApprox(model.noise.transpose(), 1e-12))
                throw InvalidParameter("model '" + model.name + "': process noise not symmetric");
        }
    }
};

using ClassRegistry = std::map<int, TargetClassSpec>;

/// Propagates a distribution over models one step through the Markov switch.
inline Eigen::VectorXd markov_predict(const Eigen::VectorXd& weights, const Eigen::MatrixXd& switch_matrix) {
    if (switch_matrix.rows() != weights.size() || switch_matrix.cols() != weights.size())
        throw InvalidParameter("model weights and switch matrix dimensions differ");
    if (std::abs(weights.sum() - 1.0) > 1e-9) throw InvalidParameter("model weights must sum to 1");
    return switch_matrix.transpose() * weights;
}

// ---- sensor ----------------------------------------------------------------

/// Azimuth, elevation (angle from the vertical axis) and range.
using Measurement = Vec3;

inline constexpr int kAzimuth = 0, kElevation = 1, kRange = 2;

/// Noiseless azimuth/elevation/range of a state. Azimuth is measured from the
/// +y axis towards +x; directly above the sensor it is defined as 0.
inline Measurement observe(const Vec6& x) {
    const double px = x(kPx), py = x(kPy), pz = x(kPz);
    const double r1 = px * px + py * py;
    const double r2 = r1 + pz * pz;
    if (r2 == 0.0) throw SingularGeometry("observe: target at the sensor origin");
    const double azimuth = r1 == 0.0 ? 0.0 : std::atan2(px, py);
    return {azimuth, std::atan2(std::sqrt(r1), pz), std::sqrt(r2)};
}

/// d observe / d x. Velocity columns are zero.
inline Mat36 observation_jacobian(const Vec6& x) {
    const double px = x(kPx), py = x(kPy), pz = x(kPz);
    const double r1 = px * px + py * py;
    if (!(r1 > 0.0)) throw SingularGeometry("observation_jacobian: target on the vertical axis");
    const double r2 = r1 + pz * pz;
    const double sr1 = std::sqrt(r1);
    Mat36 h = Mat36::Zero();
    h(0, kPx) = py / r1;
    h(0, kPy) = -px / r1;
    h(1, kPx) = px * pz / (r2 * sr1);
    h(1, kPy) = py * pz / (r2 * sr1);
    h(1, kPz) = -sr1 / r2;
    const double sr2 = std::sqrt(r2);
    h(2, kPx) = px / sr2;
    h(2, kPy) = py / sr2;
    h(2, kPz) = pz / sr2;
    return h;
}

/// Cartesian position implied by a measurement (inverse of the noiseless observe).
inline Vec3 measurement_position(const Measurement& z) {
    const double horizontal = z(kRange) * std::sin(z(kElevation));
    return {horizontal * std::sin(z(kAzimuth)), horizontal * std::cos(z(kAzimuth)),
            z(kRange) * std::cos(z(kElevation))};
}

struct SensorModel {
    enum class Mode { linear, ekf };

    Mode mode = Mode::ekf;
    Mat3 noise = Mat3::Identity();
    /// Linear mode only.
    Mat36 linear_h = [] {
        Mat36 h = Mat36::Zero();
        h(0, kPx) = h(1, kPy) = h(2, kPz) = 1.0;
        return h;
    }();
    /// In ekf mode, a hypothesis predicted closer than this (m) to the vertical
    /// axis is always linearized per measurement.
    double axis_guard = 1.0;
    /// In ekf mode, a hypothesis whose predicted position spread (largest
    /// standard deviation) exceeds this fraction of its horizontal distance to
    /// the sensor is linearized per measurement; 0 disables the test.
    double relinearize_ratio = 0.1;
    /// Gauss-Newton refinements of a per-measurement linearization point.
    int relinearize_iterations = 5;

    void validate() const {
        if (!noise.isApprox(noise.transpose(), 1e-12)) throw InvalidParameter("sensor noise not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat3> es(noise);
        if (es.eigenvalues().minCoeff() <= 0.0) throw InvalidParameter("sensor noise must be positive definite");
        if (axis_guard < 0.0) throw InvalidParameter("axis_guard must be non-negative");
        if (relinearize_ratio < 0.0) throw InvalidParameter("relinearize_ratio must be non-negative");
        if (relinearize_iterations < 0) throw InvalidParameter("relinearize_iterations must be non-negative");
    }
};

struct ClutterModel {
    double rate = 0.0;
    double azimuth_min = -std::numbers::pi, azimuth_max = std::numbers::pi;
    double elevation_min = 0.0, elevation_max = std::numbers::pi / 2.0;
    double range_min = 0.0, range_max = 10000.0;

    [[nodiscard]] double volume() const {
        return (azimuth_max - azimuth_min) * (elevation_max - elevation_min) * (range_max - range_min);
    }

    [[nodiscard]] bool contains(const Measurement& z) const {
        return z(kAzimuth) > azimuth_min && z(kAzimuth) <= azimuth_max && z(kElevation) >= elevation_min &&
               z(kElevation) <= elevation_max && z(kRange) >= range_min && z(kRange) <= range_max;
    }

    void validate() const {
        if (!(rate >= 0.0) || !std::isfinite(rate)) throw InvalidParameter("clutter rate must be >= 0");
        if (!(volume() > 0.0) || range_min < 0.0) throw InvalidParameter("clutter volume must be positive");
    }
};

/// Uniform clutter density lambda / V inside the volume, zero outside.
inline double clutter_intensity(const Measurement& z, const ClutterModel& model) {
    if (model.rate == 0.0 || !model.contains(z)) return 0.0;
    return model.rate / model.volume();
}

}  // namespace tphd
