#pragma once

#include <array>

namespace slowfast::oracle {

// Minimizer of the flow-matching loss when x0 ~ N(mu, sigma² I) and the noise is
// standard normal: E[x0 − eps | x_tau = x]. Per coordinate, with
// x_tau = tau·x0 + (1 − tau)·eps,
//   E[x_tau] = tau·mu, Var[x_tau] = tau²·sigma² + (1 − tau)²,
//   Cov[x0 − eps, x_tau] = tau·sigma² − (1 − tau).
inline std::array<double, 2> gaussian_velocity(std::array<double, 2> x, double tau, std::array<double, 2> mu,
                                               double sigma) {
    const double var = tau * tau * sigma * sigma + (1.0 - tau) * (1.0 - tau);
    const double gain = (tau * sigma * sigma - (1.0 - tau)) / var;
    return {mu[0] + gain * (x[0] - tau * mu[0]), mu[1] + gain * (x[1] - tau * mu[1])};
}

} // namespace slowfast::oracle
