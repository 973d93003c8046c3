#pragma once

// Single-class, single-model Gaussian-mixture trajectory PHD filter with a
// linear sensor, coded directly from the recursion: prediction appends one
// state per term, the update produces one misdetection term plus one term per
// (measurement, term), and reduction prunes, absorbs terms of equal birth
// time by Mahalanobis distance on the newest state, and caps the count.

#include "stacked_kalman.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <vector>

namespace oracle {

struct TphdTerm {
    double weight = 0.0;
    int birth = 1;
    StackedGaussian gauss;

    [[nodiscard]] int length() const { return static_cast<int>(gauss.mean.size() / 6); }
    [[nodiscard]] Eigen::VectorXd last_mean() const { return gauss.mean.tail(6); }
    [[nodiscard]] Eigen::MatrixXd last_cov() const { return gauss.cov.bottomRightCorner(6, 6); }
};

struct TphdBirth {
    double weight = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct TphdParams {
    Eigen::MatrixXd f, q, h, r;
    double p_survive = 1.0;
    double p_detect = 1.0;
    std::function<double(const Eigen::VectorXd&)> clutter;
    double prune = 1e-5;
    double absorb = 4.0;
    std::size_t cap = 50;
};

class GmTphd {
public:
    explicit GmTphd(TphdParams p) : p_(std::move(p)) {}

    const std::vector<TphdTerm>& terms() const { return terms_; }

    void step(const std::vector<TphdBirth>& births, const std::vector<Eigen::VectorXd>& zs) {
        ++time_;
        predict(births);
        update(zs);
        reduce();
    }

    /// round(total weight) heaviest terms, older birth first on ties.
    std::vector<TphdTerm> estimates() const {
        double total = 0.0;
        for (const auto& t : terms_) total += t.weight;
        std::vector<TphdTerm> sorted = terms_;
        std::stable_sort(sorted.begin(), sorted.end(), [](const TphdTerm& a, const TphdTerm& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            return a.birth < b.birth;
        });
        sorted.resize(std::min(sorted.size(), static_cast<std::size_t>(std::max(0.0, std::round(total)))));
        return sorted;
    }

private:
    void predict(const std::vector<TphdBirth>& births) {
        for (auto& t : terms_) {
            t.weight *= p_.p_survive;
            stacked_predict(t.gauss, p_.f, p_.q);
        }
        for (const auto& b : births) terms_.push_back({b.weight, time_, {b.mean, b.cov}});
    }

    double likelihood(const TphdTerm& t, const Eigen::VectorXd& z) const {
        const Eigen::MatrixXd s = p_.h * t.last_cov() * p_.h.transpose() + p_.r;
        const Eigen::VectorXd nu = z - p_.h * t.last_mean();
        const double maha = nu.dot(s.ldlt().solve(nu));
        const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(z.size())) /
                            std::sqrt(s.determinant());
        return norm * std::exp(-0.5 * maha);
    }

    void update(const std::vector<Eigen::VectorXd>& zs) {
        std::vector<TphdTerm> out;
        for (const auto& t : terms_) out.push_back({(1.0 - p_.p_detect) * t.weight, t.birth, t.gauss});
        for (const auto& z : zs) {
            std::vector<double> num(terms_.size());
            double denom = p_.clutter(z);
            for (std::size_t i = 0; i < terms_.size(); ++i) {
                num[i] = p_.p_detect * terms_[i].weight * likelihood(terms_[i], z);
                denom += num[i];
            }
            for (std::size_t i = 0; i < terms_.size(); ++i) {
                TphdTerm t = terms_[i];
                t.weight = num[i] / denom;
                stacked_update(t.gauss, p_.h, p_.r, z);
                out.push_back(std::move(t));
            }
        }
        terms_ = std::move(out);
    }

    void reduce() {
        std::vector<TphdTerm> kept;
        for (const auto& t : terms_)
            if (t.weight >= p_.prune) kept.push_back(t);

        std::vector<int> births;
        for (const auto& t : kept) births.push_back(t.birth);
        std::sort(births.begin(), births.end());
        births.erase(std::unique(births.begin(), births.end()), births.end());

        std::vector<TphdTerm> merged;
        for (int b : births) {
            std::vector<TphdTerm> group;
            for (const auto& t : kept)
                if (t.birth == b) group.push_back(t);
            std::stable_sort(group.begin(), group.end(),
                             [](const TphdTerm& x, const TphdTerm& y) { return x.weight > y.weight; });
            std::vector<bool> used(group.size(), false);
            for (std::size_t a = 0; a < group.size(); ++a) {
                if (used[a]) continue;
                used[a] = true;
                std::vector<std::size_t> members{a};
                const Eigen::MatrixXd lead_inv = group[a].last_cov().inverse();
                for (std::size_t c = a + 1; c < group.size(); ++c) {
                    if (used[c]) continue;
                    const Eigen::VectorXd d = group[c].last_mean() - group[a].last_mean();
                    if (d.dot(lead_inv * d) <= p_.absorb) {
                        used[c] = true;
                        members.push_back(c);
                    }
                }
                double w = 0.0;
                for (auto i : members) w += group[i].weight;
                TphdTerm m{w, b, {Eigen::VectorXd::Zero(group[a].gauss.mean.size()),
                                  Eigen::MatrixXd::Zero(group[a].gauss.cov.rows(), group[a].gauss.cov.cols())}};
                for (auto i : members) m.gauss.mean += group[i].weight / w * group[i].gauss.mean;
                for (auto i : members) {
                    const Eigen::VectorXd d = group[i].gauss.mean - m.gauss.mean;
                    m.gauss.cov += group[i].weight / w * (group[i].gauss.cov + d * d.transpose());
                }
                merged.push_back(std::move(m));
            }
        }
        std::stable_sort(merged.begin(), merged.end(), [](const TphdTerm& x, const TphdTerm& y) {
            if (x.weight != y.weight) return x.weight > y.weight;
            return x.birth < y.birth;
        });
        if (merged.size() > p_.cap) merged.resize(p_.cap);
        terms_ = std::move(merged);
    }

    TphdParams p_;
    std::vector<TphdTerm> terms_;
    int time_ = 0;
};

}  // namespace oracle
