#pragma once

#include <Eigen/Core>

namespace robustgp {

/// One classical fourth-order Runge-Kutta step of dx/dt = rhs(t, x).
template <class Rhs>
Eigen::VectorXd rk4_step(Rhs&& rhs, double t, const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd k1 = rhs(t, x);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step integration from t0 to t0 + steps * h.
template <class Rhs>
Eigen::VectorXd rk4_integrate(Rhs&& rhs, double t0, Eigen::VectorXd x, double h, long steps) {
    for (long s = 0; s < steps; ++s) x = rk4_step(rhs, t0 + static_cast<double>(s) * h, x, h);
    return x;
}

}  // namespace robustgp
