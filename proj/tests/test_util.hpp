#pragma once

#include <Eigen/Dense>
#include <doctest.h>

#include <random>

namespace testutil {

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    return (a - b).cwiseAbs().maxCoeff();
}

inline Eigen::VectorXd uniform(std::mt19937_64& rng, int n, double lo, double hi)
{
    std::uniform_real_distribution<double> d(lo, hi);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = d(rng);
    return v;
}

}  // namespace testutil
