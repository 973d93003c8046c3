#pragma once

// Central-difference Jacobian of a vector function.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace oracle {

template <typename Fn>
Eigen::MatrixXd central_difference_jacobian(Fn&& fn, const Eigen::VectorXd& x, double rel_step = 1e-6) {
    const Eigen::VectorXd f0 = fn(x);
    Eigen::MatrixXd j(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x(i)));
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        j.col(i) = (fn(xp) - fn(xm)) / (2.0 * h);
    }
    return j;
}

}  // namespace oracle
