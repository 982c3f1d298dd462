#pragma once
// phi_k(z) = sum_j z^j / (j + k)! and their values at the 2x2 mode
// generator, for exponential time differencing.

#include <array>
#include <cmath>
#include <complex>

#include "cnsk/linear_propagator.hpp"
#include "cnsk/numerics.hpp"

namespace cnsk {

/// phi_1 or phi_2 at complex z. Taylor series inside the unit disc, closed
/// form outside.
inline cplx phi_k(int k, cplx z) {
    if (std::abs(z) < 1.0) {
        double fact = k == 1 ? 1.0 : 2.0;  // k!
        cplx term = 1.0 / fact, sum = term;
        for (int j = 1; j < 40; ++j) {
            term *= z / static_cast<double>(j + k);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    const cplx p1 = (std::exp(z) - 1.0) / z;
    return k == 1 ? p1 : (p1 - 1.0) / z;
}

inline double phi_k(int k, double z) { return phi_k(k, cplx{z, 0.0}).real(); }

/// For f = phi_k and the pair z+-, returns (mean, divided difference):
/// a = (f(z-) + f(z+)) / 2 and b = (f(z-) - f(z+)) / (z- - z+), so that
/// f(M) = a I + b (M - c I) for any 2x2 M with eigenvalues z+- and trace 2c.
/// Nearby roots use a trapezoidal Cauchy integral on a circle of radius 1
/// about c, which avoids the 0/0 in b.
inline std::array<double, 2> phi_mean_and_slope(int k, cplx zp, cplx zm) {
    const cplx c = 0.5 * (zp + zm);
    const cplx delta = 0.5 * (zm - zp);
    if (std::abs(delta) >= 0.5) {
        const cplx fp = phi_k(k, zp), fm = phi_k(k, zm);
        return {(0.5 * (fm + fp)).real(), ((fm - fp) / (2.0 * delta)).real()};
    }
    constexpr int points = 64;
    cplx a = 0.0, b = 0.0;
    for (int j = 0; j < points; ++j) {
        const cplx u = std::polar(1.0, 2.0 * pi * (j + 0.5) / points);
        const cplx z = c + u;
        const cplx w = phi_k(k, z) / ((z - zp) * (z - zm));
        a += w * u * u;
        b += w * u;
    }
    return {a.real() / points, b.real() / points};
}

/// phi_k(hG) for the real-form generator G of one mode, restricted to the
/// action on forcing that only enters the momentum equation: returns
/// (P12, P22), the entries of phi_k(hG) in the (phi^, b = -i a) basis, plus
/// the scalar transverse value phi_k(-nu |xi|^2 h).
struct EtdWeights {
    double p12 = 0.0, p22 = 1.0, transverse = 1.0;
};

inline EtdWeights etd_weights(int k, double s, double h, const DerivedParameters& dp) {
    EtdWeights w;
    const double f0 = k == 1 ? 1.0 : 0.5;
    if (s == 0.0) {
        w.p22 = f0;
        w.transverse = f0;
        return w;
    }
    const auto [lp, lm] = lambda_pm_s2(s, dp);
    const auto [a, b] = phi_mean_and_slope(k, lp * h, lm * h);
    const double beta = dp.A * s;
    w.p12 = b * h * dp.gamma;
    w.p22 = a - b * h * beta;
    w.transverse = phi_k(k, -dp.nu * s * h);
    return w;
}

}  // namespace cnsk
