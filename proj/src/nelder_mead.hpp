#pragma once

#include <Eigen/Core>

#include <functional>

namespace robustgp::detail {

struct SimplexResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
};

/// Minimizes f with GSL's nmsimplex2. Non-finite objective values are mapped
/// to a large finite penalty so the simplex can retreat from them.
SimplexResult minimize_simplex(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& start,
                               const Eigen::VectorXd& step, int max_iterations, double size_tolerance);

}  // namespace robustgp::detail
