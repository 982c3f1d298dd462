#pragma once
// Physical-space Green-matrix kernels by band-filtered inverse transform,
// the closed-form heat kernel, and the kernel sup-norm series.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "cnsk/decay_series.hpp"
#include "cnsk/linear_propagator.hpp"
#include "cnsk/spectral_field.hpp"

namespace cnsk {

/// (4 pi nu t)^{-n/2} exp(-|x|^2 / (4 nu t)).
inline double heat_kernel(double t, std::span<const double> x, double nu, int n) {
    if (!(t > 0.0)) throw ParameterError("heat_kernel needs t > 0");
    double r2 = 0.0;
    for (int d = 0; d < n; ++d) r2 += x[d] * x[d];
    return std::pow(4.0 * pi * nu * t, -0.5 * n) * std::exp(-r2 / (4.0 * nu * t));
}

/// Periodic heat kernel on the grid as the inverse transform of exp(-nu |xi|^2 t).
inline RealArray heat_kernel_spectral(const SpectralSpace& space, double t, double nu) {
    if (!(t > 0.0)) throw ParameterError("heat_kernel needs t > 0");
    ComplexArray c(space.spectral_size());
    const double vol = space.grid().volume();
    for (std::size_t i = 0; i < c.size(); ++i)
        if (!space.nyquist(i)) c[i] = std::exp(-nu * space.xi2(i) * t) / vol;
    return space.inverse(c);
}

enum class KernelComponent { L11, L12, L21, L22, KPsi };

inline std::string_view to_string(KernelComponent c) {
    switch (c) {
        case KernelComponent::L11: return "L11";
        case KernelComponent::L12: return "L12";
        case KernelComponent::L21: return "L21";
        case KernelComponent::L22: return "L22";
        case KernelComponent::KPsi: return "K_psi";
    }
    return "?";
}

/// Direction weight psi(xi/|xi|) for K_psi; receives the unit vector (zero at xi = 0).
using DirectionWeight = std::function<double(const std::array<double, 3>&)>;

struct KernelRequest {
    KernelComponent component = KernelComponent::KPsi;
    Band band = Band::Low;
    double t = 1.0;
    /// Time-derivative order.
    int k = 0;
    /// Spatial multi-index.
    std::array<int, 3> alpha{0, 0, 0};
    /// Row/column of the vector or matrix component (L12: col, L21: row, L22: both).
    int row = 0, col = 0;
    DirectionWeight psi;
};

struct KernelSlice {
    KernelRequest request;
    Grid grid;
    RealArray values;
    /// Largest conjugate-symmetry defect of the multiplier, relative to its
    /// largest coefficient: the imaginary part the inverse transform drops.
    double imag_residue = 0.0;
};

/// Fourier coefficients (continuous multiplier / L^n) of the requested kernel.
/// Time derivatives multiply the exponential by G^k, where G is the real mode
/// generator, so no finite differences in t are taken.
inline ComplexArray kernel_multiplier(const SpectralSpace& space, const BandDecomposition& bands,
                                      const KernelRequest& rq, const DerivedParameters& dp) {
    if (rq.t < 0.0) throw ParameterError("kernel time must be >= 0");
    if (rq.band == Band::High && rq.t == 0.0) throw ParameterError("high-band kernels are singular at t = 0");
    if (rq.k < 0) throw ParameterError("time-derivative order must be >= 0");
    const int n = space.dim();
    const std::size_t M = space.spectral_size();
    const double vol = space.grid().volume();
    ComplexArray out(M);
    for (std::size_t i = 0; i < M; ++i) {
        if (rq.t > 0.0 && space.nyquist(i)) continue;
        const double w = bands.weight(rq.band, i);
        if (w == 0.0) continue;
        const double s = space.xi2(i);
        const ModeSemigroup g = mode_semigroup(s, rq.t, dp);
        // R = G^k E in the (phi^, b = -i a) basis.
        double R[2][2] = {{g.m11, dp.gamma * g.d}, {-g.stiffness * g.d, g.m22}};
        const double G[2][2] = {{0.0, dp.gamma}, {-g.stiffness, -2.0 * dp.A * s}};
        for (int j = 0; j < rq.k; ++j) {
            const double r00 = G[0][0] * R[0][0] + G[0][1] * R[1][0], r01 = G[0][0] * R[0][1] + G[0][1] * R[1][1];
            const double r10 = G[1][0] * R[0][0] + G[1][1] * R[1][0], r11 = G[1][0] * R[0][1] + G[1][1] * R[1][1];
            R[0][0] = r00;
            R[0][1] = r01;
            R[1][0] = r10;
            R[1][1] = r11;
        }
        std::array<double, 3> xi{};
        for (int d = 0; d < n; ++d) xi[d] = space.xi(d, i);
        const double riesz = s > 0.0 ? xi[rq.row] * xi[rq.col] / s : 0.0;
        cplx m = 0.0;
        switch (rq.component) {
            case KernelComponent::L11: m = R[0][0]; break;
            case KernelComponent::L12: m = cplx{0.0, -R[0][1]} * xi[rq.col]; break;
            case KernelComponent::L21: m = s > 0.0 ? cplx{0.0, R[1][0]} * xi[rq.row] / s : 0.0; break;
            case KernelComponent::L22: {
                const double heat = std::pow(-dp.nu * s, rq.k) * g.transverse_factor;
                m = heat * ((rq.row == rq.col ? 1.0 : 0.0) - riesz) + R[1][1] * riesz;
                break;
            }
            case KernelComponent::KPsi: {
                double psi = 1.0;
                if (rq.psi) {
                    std::array<double, 3> u{};
                    const double r = std::sqrt(s);
                    if (r > 0.0)
                        for (int d = 0; d < n; ++d) u[d] = xi[d] / r;
                    psi = rq.psi(u);
                }
                m = R[0][1] / dp.gamma * psi;
                break;
            }
        }
        for (int d = 0; d < n; ++d)
            for (int a = 0; a < rq.alpha[d]; ++a) m *= cplx{0.0, xi[d]};
        out[i] = m * w / vol;
    }
    return out;
}

inline KernelSlice kernel_slice(const SpectralSpace& space, const BandDecomposition& bands, const KernelRequest& rq,
                                const DerivedParameters& dp) {
    KernelSlice ks;
    ks.request = rq;
    ks.grid = space.grid();
    const ComplexArray c = kernel_multiplier(space, bands, rq, dp);
    double peak = 0.0;
    for (const cplx& v : c) peak = std::max(peak, std::abs(v));
    ks.imag_residue = peak > 0.0 ? conjugate_symmetry_defect(space, c) / peak : 0.0;
    ks.values = space.inverse(c);
    return ks;
}

/// Sup norm of the requested kernel over a time ladder, with a power-law fit
/// on [fit_t0, fit_t1]. Times must respect the wrap-around horizon L/(4 gamma).
inline DecaySeries sup_norm_decay(const SpectralSpace& space, const BandDecomposition& bands, KernelRequest rq,
                                  const std::vector<double>& times, const DerivedParameters& dp, double fit_t0,
                                  double fit_t1) {
    const double horizon = space.grid().L / (4.0 * dp.gamma);
    DecaySeries s;
    s.quantity = std::string(to_string(rq.component)) + "_Linf";
    s.fit_t0 = fit_t0;
    s.fit_t1 = fit_t1;
    for (double t : times) {
        if (t > horizon * (1 + 1e-12)) throw ParameterError("kernel time ladder exceeds the wrap-around horizon");
        rq.t = t;
        const KernelSlice ks = kernel_slice(space, bands, rq, dp);
        s.push(t, lp_norm(space.grid(), ks.values, std::numeric_limits<double>::infinity()));
    }
    fit_exponent(s);
    return s;
}

/// Fraction of the L1 mass of `values` lying outside the acoustic shell
/// 0.5 gamma t <= |x| <= 1.5 gamma t and outside the diffusive core
/// |x| <= c_d sqrt(t) (distances by minimum image).
inline double mass_outside_shell(const SpectralSpace& space, std::span<const double> values, double t, double gamma,
                                 double c_d) {
    double total = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double r2 = 0.0;
        for (int d = 0; d < space.dim(); ++d) {
            const double x = space.centered_coordinate(d, i);
            r2 += x * x;
        }
        const double r = std::sqrt(r2), a = std::abs(values[i]);
        total += a;
        const bool shell = r >= 0.5 * gamma * t && r <= 1.5 * gamma * t;
        const bool core = r <= c_d * std::sqrt(t);
        if (!shell && !core) outside += a;
    }
    return total > 0.0 ? outside / total : 0.0;
}

}  // namespace cnsk
