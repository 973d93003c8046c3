#include "oracles/stacked_kalman.hpp"
#include "support/generators.hpp"

#include "tphd/tphd.hpp"

#include <gtest/gtest.h>

#include <array>

using namespace tphd;

TEST(Trajectory, AppendMatchesStackedPrediction) {
    gen::Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const int len = rng.integer(1, 5);
        const GaussianTrajectory g = gen::random_trajectory(rng, 3, len);
        const Mat6 f = ct_transition(rng.uniform(-0.3, 0.3), rng.uniform(0.5, 2.0));
        const Mat6 q = process_noise(1.0, rng.uniform(0.1, 5.0));
        const GaussianTrajectory out = append_predicted_state(g, f, q);

        oracle::StackedGaussian ref{g.mean, g.cov};
        oracle::stacked_predict(ref, f, q);
        EXPECT_EQ(out.length, len + 1);
        EXPECT_EQ(out.birth, 3);
        EXPECT_LT((out.mean - ref.mean).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((out.cov - ref.cov).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_EQ((out.cov - out.cov.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(out.cov).eigenvalues();
        EXPECT_GT(ev.minCoeff(), -1e-8 * ev.maxCoeff());
    }
}

TEST(Trajectory, AppendRejectsInconsistentShapes) {
    GaussianTrajectory g;
    g.length = 2;
    EXPECT_THROW(append_predicted_state(g, Mat6::Identity(), Mat6::Zero()), InvalidParameter);
}

TEST(Trajectory, WindowKeepsTrailingBlock) {
    gen::Rng rng(2);
    const GaussianTrajectory g = gen::random_trajectory(rng, 1, 5);
    const GaussianTrajectory w = apply_window(g, 2);
    EXPECT_EQ(w.length, 5);
    EXPECT_EQ(w.active_length(), 2);
    EXPECT_EQ(w.frozen_length(), 3);
    EXPECT_EQ(w.mean, g.mean);
    EXPECT_EQ(w.cov, g.cov.bottomRightCorner(12, 12));
    EXPECT_EQ(apply_window(g, 5).cov, g.cov);
    EXPECT_EQ(apply_window(g, kUnboundedWindow).cov, g.cov);
    EXPECT_THROW(apply_window(g, 0), InvalidParameter);

    const WindowSplit s = lscan_window(g, 2);
    ASSERT_EQ(s.frozen.size(), 3u);
    EXPECT_EQ(s.frozen[1], g.state(1));
    EXPECT_EQ(s.active.birth, 4);
    EXPECT_EQ(s.active.length, 2);
    EXPECT_EQ(s.active.mean, g.mean.tail(12));
}

TEST(Trajectory, WindowedPredictionLeavesFrozenStates) {
    gen::Rng rng(3);
    GaussianTrajectory g = apply_window(gen::random_trajectory(rng, 1, 4), 2);
    const Eigen::VectorXd before = g.mean;
    g = apply_window(append_predicted_state(g, cv_transition(1.0), process_noise(1.0, 5.0)), 2);
    EXPECT_EQ(g.length, 5);
    EXPECT_EQ(g.active_length(), 2);
    EXPECT_EQ(g.mean.head(before.size()), before);
}

TEST(Trajectory, MergeMatchesMoments) {
    gen::Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const int n = rng.integer(2, 4);
        std::vector<ModelHypothesis> hs;
        std::vector<double> ws;
        for (int k = 0; k < n; ++k) {
            hs.push_back({0, 1.0, gen::random_trajectory(rng, 2, 3), std::nullopt});
            ws.push_back(rng.uniform(0.1, 2.0));
        }
        std::vector<const ModelHypothesis*> ptrs;
        for (const auto& h : hs) ptrs.push_back(&h);
        const ModelHypothesis m = merge_hypotheses(ptrs, ws);

        double total = 0.0;
        for (double w : ws) total += w;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(18);
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(18, 18);
        for (int k = 0; k < n; ++k) {
            const auto& g = hs[static_cast<std::size_t>(k)].gauss;
            const double w = ws[static_cast<std::size_t>(k)] / total;
            mean += w * g.mean;
            second += w * (g.cov + g.mean * g.mean.transpose());
        }
        const Eigen::MatrixXd cov = second - mean * mean.transpose();
        EXPECT_NEAR(m.weight, total, 1e-12);
        EXPECT_LT((m.gauss.mean - mean).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((m.gauss.cov - cov).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + cov.cwiseAbs().maxCoeff()));
    }
}

TEST(Trajectory, MergeRejectsShapeMismatch) {
    gen::Rng rng(5);
    const ModelHypothesis a{0, 1.0, gen::random_trajectory(rng, 1, 2), std::nullopt};
    const ModelHypothesis b{0, 1.0, gen::random_trajectory(rng, 2, 2), std::nullopt};
    const ModelHypothesis c{0, 1.0, gen::random_trajectory(rng, 1, 3), std::nullopt};
    EXPECT_THROW(merge_pair(a, b, 1.0, 1.0), InvalidMerge);
    EXPECT_THROW(merge_pair(a, c, 1.0, 1.0), InvalidMerge);
    EXPECT_THROW(merge_pair(a, a, 0.0, 0.0), InvalidMerge);
    EXPECT_EQ(merge_pair(a, a, 0.0, 2.0).weight, 2.0);
}

TEST(Trajectory, BirthComponentsCarryModelWeightsAndLabels) {
    BirthModel b;
    b.entries[0] = {{0.015, {0.3, 0.7}, Vec6::Ones(), Mat6::Identity()},
                    {0.02, {1.0, 0.0}, Vec6::Zero(), Mat6::Identity()}};
    b.entries[1] = {{0.1, {1.0}, Vec6::Zero(), Mat6::Identity()}};
    std::uint64_t next = 7;
    const auto comps = make_birth_components(b, 4, next);
    ASSERT_EQ(comps.size(), 3u);
    EXPECT_EQ(next, 10u);
    EXPECT_EQ(comps[0].label, 7u);
    EXPECT_EQ(comps[2].class_id, 1);
    EXPECT_EQ(comps[0].birth(), 4);
    ASSERT_EQ(comps[0].bank.size(), 2u);
    EXPECT_EQ(comps[0].bank[1].weight, 0.7);
    EXPECT_EQ(comps[0].weight, 0.015);
    EXPECT_THROW(make_birth_components(b, 0), InvalidParameter);
}

TEST(Trajectory, ComponentLastStateMixesBank) {
    TrajectoryComponent c{0, 1.0, 1, {}};
    Vec6 a = Vec6::Zero(), b = Vec6::Zero();
    b(0) = 2.0;
    c.bank.push_back({0, 0.25, GaussianTrajectory::single(1, a, Mat6::Identity()), std::nullopt});
    c.bank.push_back({1, 0.75, GaussianTrajectory::single(1, b, Mat6::Identity()), std::nullopt});
    const StateMarginal m = component_last_state(c);
    EXPECT_DOUBLE_EQ(m.mean(0), 1.5);
    EXPECT_DOUBLE_EQ(m.cov(0, 0), 1.0 + 0.25 * 2.25 + 0.75 * 0.25);
    EXPECT_DOUBLE_EQ(m.cov(1, 1), 1.0);
}
