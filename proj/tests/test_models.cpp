#include "oracles/finite_difference.hpp"
#include "support/generators.hpp"

#include "tphd/tphd.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace tphd;

TEST(Models, CvTransitionIsKroneckerBlock) {
    const Mat6 f = cv_transition(2.5);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double want = i == j ? 1.0 : 0.0;
            if (i % 2 == 0 && j == i + 1) want = 2.5;
            EXPECT_EQ(f(i, j), want) << i << "," << j;
        }
}

TEST(Models, CoordinatedTurnApproachesConstantVelocity) {
    for (double dt : {0.5, 1.0, 2.0}) {
        const Mat6 ct = ct_transition(1e-8, dt);
        EXPECT_LT((ct - cv_transition(dt)).cwiseAbs().maxCoeff(), 1e-6);
    }
    // Just above the switch-over the closed form is still used.
    const Mat6 ct = ct_transition(2e-9, 1.0);
    EXPECT_LT((ct - cv_transition(1.0)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Models, CoordinatedTurnPreservesSpeedAndRotatesVelocity) {
    const double w = 10.0 * std::numbers::pi / 180.0;
    const Mat6 f = ct_transition(w, 1.0);
    Vec6 x;
    x << 3, 7, 100, 20, -50, 5;
    const Vec6 y = f * x;
    EXPECT_NEAR(std::hypot(y(kVy), y(kVz)), std::hypot(x(kVy), x(kVz)), 1e-12);
    EXPECT_DOUBLE_EQ(y(kVx), x(kVx));
    EXPECT_DOUBLE_EQ(y(kPx), x(kPx) + x(kVx));
    const double angle = std::atan2(y(kVz), y(kVy)) - std::atan2(x(kVz), x(kVy));
    EXPECT_NEAR(angle, w, 1e-12);
}

TEST(Models, CoordinatedTurnIntegratesVelocity) {
    // Position after one step equals the integral of the rotating velocity.
    const double w = 0.3, dt = 1.5;
    const Mat6 f = ct_transition(w, dt);
    Vec6 x = Vec6::Zero();
    x(kVy) = 4.0;
    x(kVz) = -2.0;
    const int n = 200000;
    double py = 0.0, pz = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) * dt / n;
        py += (x(kVy) * std::cos(w * t) - x(kVz) * std::sin(w * t)) * dt / n;
        pz += (x(kVy) * std::sin(w * t) + x(kVz) * std::cos(w * t)) * dt / n;
    }
    const Vec6 y = f * x;
    EXPECT_NEAR(y(kPy), py, 1e-8);
    EXPECT_NEAR(y(kPz), pz, 1e-8);
}

TEST(Models, ProcessNoiseSymmetricPositiveSemidefinite) {
    gen::Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const double dt = rng.uniform(0.01, 5.0), s = rng.uniform(0.0, 10.0);
        const Mat6 q = process_noise(dt, s);
        EXPECT_EQ((q - q.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const auto ev = Eigen::SelfAdjointEigenSolver<Mat6>(q).eigenvalues();
        EXPECT_GE(ev.minCoeff(), -1e-12 * std::max(1.0, ev.maxCoeff()));
    }
    const Mat6 q = process_noise(1.0, 5.0);
    EXPECT_DOUBLE_EQ(q(0, 0), 1.25);
    EXPECT_DOUBLE_EQ(q(0, 1), 2.5);
    EXPECT_DOUBLE_EQ(q(1, 1), 5.0);
    EXPECT_EQ(q(0, 2), 0.0);
}

TEST(Models, RejectsInvalidArguments) {
    EXPECT_THROW(cv_transition(-1.0), InvalidParameter);
    EXPECT_THROW(ct_transition(std::nan(""), 1.0), InvalidParameter);
    EXPECT_THROW(process_noise(1.0, -1.0), InvalidParameter);
    EXPECT_THROW(markov_predict(Eigen::Vector2d(0.5, 0.6), Eigen::Matrix2d::Identity()), InvalidParameter);
    EXPECT_THROW(markov_predict(Eigen::Vector3d(0.2, 0.3, 0.5), Eigen::Matrix2d::Identity()), InvalidParameter);
}

TEST(Models, MarkovPredictMatchesHandComputation) {
    Eigen::Matrix3d s;
    s << 0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.3, 0.3, 0.4;
    const Eigen::Vector3d w(0.3, 0.35, 0.35);
    const Eigen::VectorXd out = markov_predict(w, s);
    EXPECT_NEAR(out(0), 0.3 * 0.8 + 0.35 * 0.2 + 0.35 * 0.3, 1e-15);
    EXPECT_NEAR(out(1), 0.3 * 0.1 + 0.35 * 0.7 + 0.35 * 0.3, 1e-15);
    EXPECT_NEAR(out(2), 0.3 * 0.1 + 0.35 * 0.1 + 0.35 * 0.4, 1e-15);
    EXPECT_NEAR(out.sum(), 1.0, 1e-15);
}

TEST(Models, ObserveKnownGeometry) {
    Vec6 x = Vec6::Zero();
    x(kPy) = 100.0;
    Measurement z = observe(x);
    EXPECT_DOUBLE_EQ(z(kAzimuth), 0.0);
    EXPECT_DOUBLE_EQ(z(kElevation), std::numbers::pi / 2.0);
    EXPECT_DOUBLE_EQ(z(kRange), 100.0);

    x << 3, 0, 0, 0, 4, 0;
    z = observe(x);
    EXPECT_DOUBLE_EQ(z(kAzimuth), std::numbers::pi / 2.0);
    EXPECT_NEAR(z(kElevation), std::atan2(3.0, 4.0), 1e-15);
    EXPECT_DOUBLE_EQ(z(kRange), 5.0);
}

TEST(Models, ObserveEdgeCases) {
    EXPECT_THROW(observe(Vec6::Zero()), SingularGeometry);
    Vec6 above = Vec6::Zero();
    above(kPz) = 50.0;
    const Measurement z = observe(above);
    EXPECT_EQ(z(kAzimuth), 0.0);
    EXPECT_EQ(z(kElevation), 0.0);
    EXPECT_EQ(z(kRange), 50.0);
    EXPECT_THROW(observation_jacobian(above), SingularGeometry);
}

TEST(Models, MeasurementPositionInvertsObserve) {
    gen::Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        Vec6 x = rng.state(5000.0);
        x(kPz) = std::abs(x(kPz));
        const Vec3 p = measurement_position(observe(x));
        EXPECT_NEAR(p(0), x(kPx), 1e-8);
        EXPECT_NEAR(p(1), x(kPy), 1e-8);
        EXPECT_NEAR(p(2), x(kPz), 1e-8);
    }
}

TEST(Models, JacobianMatchesFiniteDifferences) {
    gen::Rng rng(2024);
    int checked = 0;
    while (checked < 100) {
        Vec6 x = rng.state(5000.0, 50.0);
        const double r1 = std::hypot(x(kPx), x(kPy));
        if (r1 < 50.0) continue;
        const Eigen::VectorXd xd = x;
        const Eigen::MatrixXd fd = oracle::central_difference_jacobian(
            [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return observe(Vec6(v)); }, xd);
        const Mat36 h = observation_jacobian(x);
        const double scale = std::max(h.cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((h - fd).cwiseAbs().maxCoeff() / scale, 1e-5) << "state " << x.transpose();
        ++checked;
    }
}

TEST(Models, ClutterIntensityUniformInsideVolume) {
    ClutterModel c;
    c.rate = 30.0;
    const double v = 2.0 * std::numbers::pi * (std::numbers::pi / 2.0) * 10000.0;
    EXPECT_NEAR(c.volume(), v, 1e-9);
    EXPECT_DOUBLE_EQ(clutter_intensity(Measurement(0.1, 0.2, 300.0), c), 30.0 / c.volume());
    EXPECT_EQ(clutter_intensity(Measurement(0.1, 0.2, 20000.0), c), 0.0);
    c.rate = 0.0;
    EXPECT_EQ(clutter_intensity(Measurement(0.1, 0.2, 300.0), c), 0.0);
}

TEST(Models, ClassValidation) {
    TargetClassSpec c;
    c.name = "x";
    EXPECT_THROW(c.validate(), InvalidParameter);
    c.models.push_back(MotionModel::constant_velocity(1.0, 5.0));
    c.switch_matrix = Eigen::MatrixXd::Constant(1, 1, 0.9);
    EXPECT_THROW(c.validate(), InvalidParameter);
    c.switch_matrix(0, 0) = 1.0;
    EXPECT_NO_THROW(c.validate());
    c.p_detect = 1.2;
    EXPECT_THROW(c.validate(), InvalidParameter);
}

TEST(Numeric, WrapAngleRange) {
    EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
    EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
    EXPECT_NEAR(wrap_angle(3.0 * std::numbers::pi / 2.0), -std::numbers::pi / 2.0, 1e-15);
    gen::Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(-50.0, 50.0);
        const double w = wrap_angle(a);
        EXPECT_GT(w, -std::numbers::pi);
        EXPECT_LE(w, std::numbers::pi);
        EXPECT_NEAR(std::remainder(a - w, 2.0 * std::numbers::pi), 0.0, 1e-12);
    }
}

TEST(Numeric, LogSumExp) {
    const std::vector<double> v{-1000.0, -1000.0 + std::log(3.0)};
    EXPECT_NEAR(log_sum_exp(v), -1000.0 + std::log(4.0), 1e-12);
    EXPECT_TRUE(std::isinf(log_sum_exp(std::vector<double>{})));
}
