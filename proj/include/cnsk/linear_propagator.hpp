#pragma once
// Exact per-mode solution operator of the linearized system
//
//   d/dt phi^ = -i gamma xi.m^
//   d/dt m^   = -nu|xi|^2 m^ - nu~ xi(xi.m^) - i(gamma + kappa0|xi|^2) xi phi^
//
// The transverse part of m^ decays by exp(-nu|xi|^2 t). The longitudinal pair
// (phi^, a = xi.m^) is advanced by the 2x2 matrix exponential. Writing
// b = -i a makes the generator real,
//   G = [[0, gamma], [-(gamma + kappa0 s) s, -2 A s]],   s = |xi|^2,
// and exp(Gt) = e^{-beta t} (C I + S (G + beta I)) with beta = A s,
// q = beta^2 - det G, C = cosh(sqrt(q) t), S = sinh(sqrt(q) t)/sqrt(q)
// (cos/sin for q < 0, a Taylor series when |q| t^2 is tiny). This form has
// no 1/(lambda+ - lambda-) factor, so it is uniform across the double root.

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <utility>

#include "cnsk/numerics.hpp"
#include "cnsk/params.hpp"
#include "cnsk/spectral_field.hpp"

namespace cnsk {

/// s (1 - K^2) - B^2 with the product and the square formed exactly by fma,
/// so the cancellation at the degeneracy radius keeps full relative accuracy.
inline double discriminant_factor(double s, const DerivedParameters& dp) {
    const double b2 = dp.B * dp.B;
    const double b2_lo = std::fma(dp.B, dp.B, -b2);
    return std::fma(s, dp.one_minus_K2, -b2) - b2_lo;
}

/// Roots of z^2 + 2A s z + gamma^2 s + kappa0 gamma s^2 as (lambda+, lambda-).
/// Real case: lambda+ is the more negative root. Complex case: lambda- has
/// nonnegative imaginary part. Takes s = |xi|^2 so callers holding s never
/// round-trip through a square root (the roots are ill-conditioned in s near
/// the degeneracy radius).
inline std::pair<cplx, cplx> lambda_pm_s2(double s, const DerivedParameters& dp) {
    if (s == 0.0) return {0.0, 0.0};
    const double beta = dp.A * s;
    const double det = dp.gamma * dp.gamma * s + dp.kappa0 * dp.gamma * s * s;
    const double q = dp.A * dp.A * s * discriminant_factor(s, dp);
    if (q > 0.0) {
        const double w = std::sqrt(q);
        return {cplx{-beta - w, 0.0}, cplx{-det / (beta + w), 0.0}};
    }
    const double omega = std::sqrt(-q);
    return {cplx{-beta, -omega}, cplx{-beta, omega}};
}

inline std::pair<cplx, cplx> lambda_pm(double xi_norm, const DerivedParameters& dp) {
    return lambda_pm_s2(xi_norm * xi_norm, dp);
}

/// Real-form entries of exp(Gt) for one |xi|^2.
struct ModeSemigroup {
    cplx lambda_plus, lambda_minus;
    double s = 0.0;
    double gamma = 1.0;
    /// (gamma + kappa0 s) s, the restoring coefficient in G.
    double stiffness = 0.0;
    double m11 = 1.0, d = 0.0, m22 = 1.0;
    double transverse_factor = 1.0;

    /// Complex 2x2 matrix acting on (phi^, a).
    std::array<std::array<cplx, 2>, 2> longitudinal_matrix() const {
        return {{{cplx{m11, 0.0}, cplx{0.0, -gamma * d}}, {cplx{0.0, -stiffness * d}, cplx{m22, 0.0}}}};
    }

    void apply(cplx& phi, cplx& a) const {
        const cplx p = m11 * phi + cplx{0.0, -gamma * d} * a;
        const cplx q = cplx{0.0, -stiffness * d} * phi + m22 * a;
        phi = p;
        a = q;
    }
};

/// |q| t^2 below this uses the Taylor form of C and S.
inline constexpr double kSeriesThreshold = 1e-8;

inline ModeSemigroup mode_semigroup(double s, double t, const DerivedParameters& dp) {
    if (t < 0.0) throw ParameterError("mode_semigroup needs t >= 0");
    ModeSemigroup g;
    g.s = s;
    g.gamma = dp.gamma;
    g.stiffness = (dp.gamma + dp.kappa0 * s) * s;
    std::tie(g.lambda_plus, g.lambda_minus) = lambda_pm_s2(s, dp);
    g.transverse_factor = std::exp(-dp.nu * s * t);
    if (s == 0.0 || t == 0.0) {
        g.d = s == 0.0 ? t : 0.0;
        return g;
    }

    const double beta = dp.A * s;
    const double q = dp.A * dp.A * s * discriminant_factor(s, dp);
    const double qt2 = q * t * t;
    double C, S;
    if (std::abs(qt2) < kSeriesThreshold) {
        C = 1.0 + qt2 / 2.0 + qt2 * qt2 / 24.0;
        S = t * (1.0 + qt2 / 6.0 + qt2 * qt2 / 120.0);
    } else if (q > 0.0) {
        const double w = std::sqrt(q);
        if (w * t >= 1.0) {
            // Separate exponentials avoid overflow of cosh/sinh when beta t is large.
            const double lp = g.lambda_plus.real(), lm = g.lambda_minus.real();
            const double ep = std::exp(lp * t), em = std::exp(lm * t);
            g.m11 = (lm * ep - lp * em) / (2.0 * w);
            g.d = (em - ep) / (2.0 * w);
            g.m22 = (lm * em - lp * ep) / (2.0 * w);
            return g;
        }
        C = std::cosh(w * t);
        S = std::sinh(w * t) / w;
    } else {
        const double om = std::sqrt(-q);
        C = std::cos(om * t);
        S = std::sin(om * t) / om;
    }
    const double e = std::exp(-beta * t);
    g.m11 = e * (C + beta * S);
    g.d = e * S;
    g.m22 = e * (C - beta * S);
    return g;
}

/// Advances one mode in place. xi has dim entries; m has dim entries.
inline void apply_mode(const ModeSemigroup& g, const double* xi, int dim, cplx& phi, cplx* m) {
    if (g.s == 0.0 || (g.d == 0.0 && g.m11 == 1.0 && g.m22 == 1.0 && g.transverse_factor == 1.0)) return;
    cplx a = 0.0;
    for (int d = 0; d < dim; ++d) a += xi[d] * m[d];
    const cplx a0 = a;
    g.apply(phi, a);
    for (int d = 0; d < dim; ++d)
        m[d] = g.transverse_factor * (m[d] - xi[d] * a0 / g.s) + xi[d] * a / g.s;
}

/// Applies the semigroup to every mode; optionally filters by a band, which
/// gives E_1(t) for Band::Low and E_inf(t) for Band::PInf. For t > 0 the
/// Nyquist planes are set to zero: the coupling is odd in xi and has no
/// real-field representation there.
inline SpectralState propagate(const SpectralSpace& space, const SpectralState& u0, double t,
                               const DerivedParameters& dp, const BandDecomposition* bands = nullptr,
                               Band band = Band::Low) {
    if (t < 0.0) throw ParameterError("propagate needs t >= 0");
    u0.check(space.grid());
    SpectralState u = u0;
    const int n = space.dim();
    const std::size_t M = space.spectral_size();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < M; ++i) {
        std::array<cplx, 3> m{};
        std::array<double, 3> xi{};
        if (t > 0.0 && space.nyquist(i)) {
            u.phi[i] = 0.0;
            for (int d = 0; d < n; ++d) u.m[d][i] = 0.0;
            continue;
        }
        for (int d = 0; d < n; ++d) {
            m[d] = u.m[d][i];
            xi[d] = space.xi(d, i);
        }
        const ModeSemigroup g = mode_semigroup(space.xi2(i), t, dp);
        apply_mode(g, xi.data(), n, u.phi[i], m.data());
        const double w = bands ? bands->weight(band, i) : 1.0;
        u.phi[i] *= w;
        for (int d = 0; d < n; ++d) u.m[d][i] = w * m[d];
    }
    return u;
}

/// e^{-nu|xi|^2 t} applied to the divergence-free part of m0^; phi is zero.
inline SpectralState heat_comparator(const SpectralSpace& space, const SpectralState& u0, double t,
                                     const DerivedParameters& dp) {
    if (t < 0.0) throw ParameterError("heat_comparator needs t >= 0");
    auto [lon, tr] = helmholtz_split(space, u0);
    (void)lon;
    const std::size_t M = space.spectral_size();
    for (std::size_t i = 0; i < M; ++i) {
        const double f = (t > 0.0 && space.nyquist(i)) ? 0.0 : std::exp(-dp.nu * space.xi2(i) * t);
        for (auto& c : tr.m) c[i] *= f;
    }
    return tr;
}

inline State heat_comparator(const SpectralSpace& space, const State& m0, double t, const DerivedParameters& dp) {
    return to_physical(space, heat_comparator(space, to_spectral(space, m0), t, dp));
}

/// Largest Re lambda over modes where the given band weight is positive;
/// nullopt if the band is empty on this grid.
inline std::optional<double> max_real_lambda(const SpectralSpace& space, const BandDecomposition& bands, Band band,
                                             const DerivedParameters& dp) {
    std::optional<double> best;
    for (std::size_t i = 0; i < space.spectral_size(); ++i) {
        if (space.xi2(i) == 0.0 || !(bands.weight(band, i) > 0.0)) continue;
        const auto [lp, lm] = lambda_pm_s2(space.xi2(i), dp);
        const double r = std::max({lp.real(), lm.real(), -dp.nu * space.xi2(i)});
        if (!best || r > *best) best = r;
    }
    return best;
}

/// Mode state (phi^, m^) for the ODE oracle.
struct ModeVector {
    cplx phi;
    std::array<cplx, 3> m{};
};

/// Classical RK4 on the full (1+n)-component mode ODE. The step count is
/// chosen so that h * (spectral radius) <= h_scale; throws if that needs
/// more than max_steps.
inline ModeVector mode_ode_oracle(const std::array<double, 3>& xi, int dim, ModeVector u, double t,
                                  const DerivedParameters& dp, double h_scale = 0.01,
                                  std::size_t max_steps = 10'000'000, std::size_t min_steps = 16) {
    if (t < 0.0) throw ParameterError("mode_ode_oracle needs t >= 0");
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += xi[d] * xi[d];
    const auto [lp, lm] = lambda_pm_s2(s, dp);
    const double rho = std::max({std::abs(lp), std::abs(lm), dp.nu * s});
    const double want = std::ceil(rho * t / h_scale);
    if (want > static_cast<double>(max_steps)) throw ParameterError("mode_ode_oracle: step budget exceeded");
    const std::size_t steps = std::max<std::size_t>(min_steps, static_cast<std::size_t>(want));
    const double h = t / static_cast<double>(steps);
    const cplx I{0.0, 1.0};
    const auto rhs = [&](const ModeVector& v) {
        ModeVector r;
        cplx a = 0.0;
        for (int d = 0; d < dim; ++d) a += xi[d] * v.m[d];
        r.phi = -I * dp.gamma * a;
        for (int d = 0; d < dim; ++d)
            r.m[d] = -dp.nu * s * v.m[d] - dp.nu_tilde * xi[d] * a - I * (dp.gamma + dp.kappa0 * s) * xi[d] * v.phi;
        return r;
    };
    const auto axpy = [&](const ModeVector& x, double c, const ModeVector& y) {
        ModeVector r;
        r.phi = x.phi + c * y.phi;
        for (int d = 0; d < dim; ++d) r.m[d] = x.m[d] + c * y.m[d];
        return r;
    };
    for (std::size_t k = 0; k < steps; ++k) {
        const ModeVector k1 = rhs(u);
        const ModeVector k2 = rhs(axpy(u, h / 2, k1));
        const ModeVector k3 = rhs(axpy(u, h / 2, k2));
        const ModeVector k4 = rhs(axpy(u, h, k3));
        u.phi += h / 6 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
        for (int d = 0; d < dim; ++d) u.m[d] += h / 6 * (k1.m[d] + 2.0 * k2.m[d] + 2.0 * k3.m[d] + k4.m[d]);
    }
    return u;
}

/// The semigroup applied to a single mode vector, for comparison with the oracle.
inline ModeVector propagate_mode(const std::array<double, 3>& xi, int dim, ModeVector u, double t,
                                 const DerivedParameters& dp) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += xi[d] * xi[d];
    apply_mode(mode_semigroup(s, t, dp), xi.data(), dim, u.phi, u.m.data());
    return u;
}

}  // namespace cnsk
