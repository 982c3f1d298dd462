#pragma once
// Initial-condition recipes: compactly supported bumps, a divergence-free
// vortex from a stream function, and seeded band-limited noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include "cnsk/spectral_field.hpp"

namespace cnsk {

/// exp(1 - 1/(1 - r^2/w^2)) for r < w, else 0; peak value 1 at r = 0.
inline double bump(double r, double width) {
    const double q = r * r / (width * width);
    if (q >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - q));
}

namespace detail {
inline double centered_radius(const SpectralSpace& space, std::size_t i, const std::array<double, 3>& center) {
    const Grid& g = space.grid();
    double r2 = 0.0;
    for (int d = 0; d < g.n; ++d) {
        double x = space.centered_coordinate(d, i) - center[d];
        x -= g.L * std::round(x / g.L);
        r2 += x * x;
    }
    return std::sqrt(r2);
}
}  // namespace detail

struct BumpRecipe {
    double amplitude = 1e-3;
    double width = 8.0;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    /// Weights of the density bump and of the momentum bump along each axis.
    double phi_weight = 1.0;
    std::array<double, 3> m_weight{1.0, 0.5, 0.25};
};

/// phi0 = eps * a_phi * bump, m0_d = eps * a_d * bump; the momentum has a
/// nonzero mean and a nonzero divergence-free part.
inline State make_bump_state(const SpectralSpace& space, const BumpRecipe& r) {
    State s(space.grid());
    for (std::size_t i = 0; i < space.physical_size(); ++i) {
        const double b = r.amplitude * bump(detail::centered_radius(space, i, r.center), r.width);
        s.phi[i] = r.phi_weight * b;
        for (int d = 0; d < space.dim(); ++d) s.m[d][i] = r.m_weight[d] * b;
    }
    return s;
}

/// m0 = curl of the stream function psi = eps * bump (n = 2: (d_y psi,
/// -d_x psi); n = 3: curl of psi e_z). phi0 = 0. Computed spectrally.
inline State make_vortex_state(const SpectralSpace& space, double amplitude, double width,
                               const std::array<double, 3>& center = {}) {
    RealArray psi(space.physical_size());
    for (std::size_t i = 0; i < psi.size(); ++i)
        psi[i] = amplitude * bump(detail::centered_radius(space, i, center), width);
    const ComplexArray ph = space.forward(psi);
    State s(space.grid());
    space.inverse(spectral_derivative(space, ph, 1), s.m[0]);
    space.inverse(spectral_derivative(space, ph, 0), s.m[1]);
    for (auto& v : s.m[1]) v = -v;
    return s;
}

/// Gaussian white noise in (phi, m), filtered to a band and scaled so the
/// L2 norm of the result equals `l2`. Deterministic in `seed`.
inline SpectralState make_band_noise(const SpectralSpace& space, const BandDecomposition& bands, Band band,
                                     std::uint64_t seed, double l2 = 1.0, bool with_phi = true,
                                     bool with_m = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    State s(space.grid());
    for (auto& v : s.phi) v = with_phi ? g(rng) : 0.0;
    for (auto& c : s.m)
        for (auto& v : c) v = with_m ? g(rng) : 0.0;
    SpectralState u = project_band(to_spectral(space, s), bands, band);
    for (std::size_t i = 0; i < space.spectral_size(); ++i)
        if (space.nyquist(i)) {
            u.phi[i] = 0.0;
            for (auto& c : u.m) c[i] = 0.0;
        }
    const double norm = sobolev_norm(space, u, 0, 0);
    if (norm > 0.0) {
        const double f = l2 / norm;
        for (auto& v : u.phi) v *= f;
        for (auto& c : u.m)
            for (auto& v : c) v *= f;
    }
    return u;
}

}  // namespace cnsk
