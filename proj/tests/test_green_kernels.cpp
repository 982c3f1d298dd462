#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "cnsk/green_kernels.hpp"

using namespace cnsk;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

DerivedParameters params(int n, double mu = 1.0, double mu_prime = 0.0, double kappa = 1.0) {
    PhysicalParameters p;
    p.mu = mu;
    p.mu_prime = mu_prime;
    p.kappa = kappa;
    p.dimension = n;
    return derive_constants(p);
}

State random_physical(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    State s(g);
    for (auto& v : s.phi) v = nd(rng);
    for (auto& c : s.m)
        for (auto& v : c) v = nd(rng);
    return s;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Direct periodic convolution h^n sum_y K(x - y) f(y), written out index by index.
RealArray direct_convolution(const Grid& g, std::span<const double> K, std::span<const double> f) {
    const int N = g.N;
    RealArray out(g.physical_size());
    const double h = g.cell_volume();
    if (g.n == 2) {
        for (int x0 = 0; x0 < N; ++x0)
            for (int x1 = 0; x1 < N; ++x1) {
                double acc = 0.0;
                for (int y0 = 0; y0 < N; ++y0)
                    for (int y1 = 0; y1 < N; ++y1) {
                        const int d0 = (x0 - y0 + N) % N, d1 = (x1 - y1 + N) % N;
                        acc += K[d0 * N + d1] * f[y0 * N + y1];
                    }
                out[x0 * N + x1] = h * acc;
            }
    } else {
        throw std::logic_error("direct_convolution: n = 2 only");
    }
    return out;
}

}  // namespace

TEST(HeatKernel, NormalizationAtOrigin) {
    const double x[2] = {0.0, 0.0};
    EXPECT_NEAR(heat_kernel(1.0 / (4.0 * pi), x, 1.0, 2), 1.0, 1e-14);
}

TEST(HeatKernel, RejectsNonpositiveTime) {
    const double x[2] = {0.0, 0.0};
    EXPECT_THROW(heat_kernel(0.0, x, 1.0, 2), ParameterError);
    EXPECT_THROW(heat_kernel(-1.0, x, 1.0, 2), ParameterError);
}

TEST(HeatKernel, UnitMassOnTheGrid) {
    SpectralSpace space(Grid{2, 128, 40.0});
    const double nu = 0.7, t = 0.5;
    double mass = 0.0;
    for (std::size_t i = 0; i < space.physical_size(); ++i) {
        const double x[2] = {space.centered_coordinate(0, i), space.centered_coordinate(1, i)};
        mass += heat_kernel(t, x, nu, 2);
    }
    EXPECT_NEAR(mass * space.grid().cell_volume(), 1.0, 1e-10);
}

TEST(HeatKernel, SpectralMatchesClosedForm) {
    SpectralSpace space(Grid{2, 128, 40.0});
    const double nu = 1.0, t = 0.5;
    const RealArray k = heat_kernel_spectral(space, t, nu);
    double err = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        // Grid index 0 is the origin; centered coordinates are the minimum image.
        const std::array<int, 2> idx{static_cast<int>(i / 128), static_cast<int>(i % 128)};
        double x[2];
        for (int d = 0; d < 2; ++d) x[d] = (idx[d] <= 64 ? idx[d] : idx[d] - 128) * space.grid().spacing();
        err = std::max(err, std::abs(k[i] - heat_kernel(t, x, nu, 2)));
    }
    EXPECT_LT(err, 1e-8);
}

TEST(Kernels, HighBandAtTimeZeroThrows) {
    const auto dp = params(2);
    SpectralSpace space(Grid{2, 32, 32.0});
    const auto bands = build_bands(space, dp);
    KernelRequest rq;
    rq.band = Band::High;
    rq.t = 0.0;
    EXPECT_THROW(kernel_slice(space, bands, rq, dp), ParameterError);
    rq.band = Band::Low;
    EXPECT_NO_THROW(kernel_slice(space, bands, rq, dp));
}

TEST(Kernels, L12VanishesAtTimeZeroAndL11IsTheBandFilter) {
    const auto dp = params(2);
    SpectralSpace space(Grid{2, 32, 32.0});
    const auto bands = build_bands(space, dp);
    KernelRequest rq;
    rq.t = 0.0;
    rq.component = KernelComponent::L12;
    EXPECT_EQ(max_abs(kernel_slice(space, bands, rq, dp).values), 0.0);
    rq.component = KernelComponent::L11;
    const ComplexArray c = kernel_multiplier(space, bands, rq, dp);
    for (std::size_t i = 0; i < c.size(); ++i)
        EXPECT_NEAR(std::abs(c[i] - bands.weight(Band::Low, i) / space.grid().volume()), 0.0, 1e-18);
}

TEST(Kernels, KPsiTimesCouplingIsL12) {
    const auto dp = params(2, 1.3, 0.4, 0.8);
    SpectralSpace space(Grid{2, 32, 32.0});
    const auto bands = build_bands(space, dp);
    KernelRequest rq;
    rq.t = 2.5;
    rq.col = 1;
    rq.component = KernelComponent::KPsi;
    const ComplexArray kpsi = kernel_multiplier(space, bands, rq, dp);
    rq.component = KernelComponent::L12;
    const ComplexArray l12 = kernel_multiplier(space, bands, rq, dp);
    for (std::size_t i = 0; i < kpsi.size(); ++i)
        EXPECT_LT(std::abs(l12[i] - cplx{0.0, -dp.gamma * space.xi(1, i)} * kpsi[i]), 1e-15);
}

TEST(Kernels, DirectionWeightEntersKPsi) {
    const auto dp = params(2);
    SpectralSpace space(Grid{2, 32, 32.0});
    const auto bands = build_bands(space, dp);
    KernelRequest rq;
    rq.t = 1.0;
    const ComplexArray plain = kernel_multiplier(space, bands, rq, dp);
    rq.psi = [](const std::array<double, 3>& u) { return u[0] * u[0]; };
    const ComplexArray weighted = kernel_multiplier(space, bands, rq, dp);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        const double s = space.xi2(i);
        const double expect = s > 0.0 ? space.xi(0, i) * space.xi(0, i) / s : 0.0;
        EXPECT_LT(std::abs(weighted[i] - expect * plain[i]), 1e-16);
    }
}

TEST(Kernels, ValuesAreReal) {
    const auto dp = params(2, 0.8, 0.3, 1.7);
    SpectralSpace space(Grid{2, 64, 40.0});
    const auto bands = build_bands(space, dp);
    for (auto c : {KernelComponent::L11, KernelComponent::L12, KernelComponent::L21, KernelComponent::L22,
                   KernelComponent::KPsi})
        for (Band b : {Band::Low, Band::Mid, Band::High}) {
            KernelRequest rq;
            rq.component = c;
            rq.band = b;
            rq.t = 0.7;
            rq.row = 1;
            rq.alpha = {1, 0, 0};
            EXPECT_LT(kernel_slice(space, bands, rq, dp).imag_residue, 1e-10) << to_string(c) << " " << to_string(b);
        }
}

TEST(Kernels, TimeDerivativeMatchesDifferenceQuotient) {
    const auto dp = params(2, 1.0, 0.5, 2.0);
    SpectralSpace space(Grid{2, 32, 30.0});
    const auto bands = build_bands(space, dp);
    const double t = 1.3, h = 1e-4;
    for (auto c : {KernelComponent::L11, KernelComponent::L12, KernelComponent::L21, KernelComponent::L22,
                   KernelComponent::KPsi}) {
        KernelRequest rq;
        rq.component = c;
        rq.row = 0;
        rq.col = 1;
        rq.t = t;
        rq.k = 1;
        const ComplexArray d = kernel_multiplier(space, bands, rq, dp);
        rq.k = 0;
        rq.t = t + h;
        const ComplexArray fp = kernel_multiplier(space, bands, rq, dp);
        rq.t = t - h;
        const ComplexArray fm = kernel_multiplier(space, bands, rq, dp);
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            err = std::max(err, std::abs(d[i] - (fp[i] - fm[i]) / (2.0 * h)));
            scale = std::max(scale, std::abs(d[i]));
        }
        EXPECT_LT(err, 1e-6 * scale) << to_string(c);
    }
}

TEST(Kernels, ConvolutionReproducesLowBandPropagator) {
    const auto dp = params(2, 1.0, 0.3, 1.5);
    const Grid g{2, 32, 16.0};
    SpectralSpace space(g);
    const auto bands = build_bands(space, dp);
    const State u0 = random_physical(g, 11);
    const double t = 1.7;
    const State ref = to_physical(space, propagate(space, to_spectral(space, u0), t, dp, &bands, Band::Low));

    auto kernel = [&](KernelComponent c, int row, int col) {
        KernelRequest rq;
        rq.component = c;
        rq.t = t;
        rq.row = row;
        rq.col = col;
        return kernel_slice(space, bands, rq, dp).values;
    };
    State out(g);
    auto accumulate = [](RealArray& dst, const RealArray& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
    accumulate(out.phi, direct_convolution(g, kernel(KernelComponent::L11, 0, 0), u0.phi));
    for (int j = 0; j < 2; ++j) accumulate(out.phi, direct_convolution(g, kernel(KernelComponent::L12, 0, j), u0.m[j]));
    for (int r = 0; r < 2; ++r) {
        accumulate(out.m[r], direct_convolution(g, kernel(KernelComponent::L21, r, 0), u0.phi));
        for (int j = 0; j < 2; ++j)
            accumulate(out.m[r], direct_convolution(g, kernel(KernelComponent::L22, r, j), u0.m[j]));
    }
    double err = 0.0, scale = max_abs(ref.phi);
    for (std::size_t i = 0; i < out.phi.size(); ++i) err = std::max(err, std::abs(out.phi[i] - ref.phi[i]));
    for (int r = 0; r < 2; ++r) {
        scale = std::max(scale, max_abs(ref.m[r]));
        for (std::size_t i = 0; i < out.phi.size(); ++i) err = std::max(err, std::abs(out.m[r][i] - ref.m[r][i]));
    }
    ASSERT_GT(scale, 1e-6);
    EXPECT_LT(err, 1e-8 * scale);
}

TEST(Kernels, SupNormIsStableUnderRefinement) {
    const auto dp = params(2);
    const auto sup = [&](int N) {
        SpectralSpace space(Grid{2, static_cast<std::size_t>(N), 64.0});
        const auto bands = build_bands(space, dp);
        KernelRequest rq;
        rq.t = 5.0;
        return lp_norm(space.grid(), kernel_slice(space, bands, rq, dp).values, inf);
    };
    const double a = sup(64), b = sup(128);
    EXPECT_LT(std::abs(a - b) / b, 0.01);
}

TEST(Kernels, LadderBeyondHorizonThrows) {
    const auto dp = params(2);
    SpectralSpace space(Grid{2, 32, 32.0});
    const auto bands = build_bands(space, dp);
    KernelRequest rq;
    const double horizon = 32.0 / (4.0 * dp.gamma);
    EXPECT_THROW(sup_norm_decay(space, bands, rq, geometric_ladder(1.0, 1.5 * horizon, 10), dp, 1.0, horizon),
                 ParameterError);
}

TEST(Kernels, MassConcentratesOnShellAndCoreInThreeDimensions) {
    const auto dp = params(3);
    SpectralSpace space(Grid{3, 64, 96.0});
    const auto bands = build_bands(space, dp);
    KernelRequest rq;
    rq.t = 20.0;
    const KernelSlice ks = kernel_slice(space, bands, rq, dp);
    const double frac = mass_outside_shell(space, ks.values, rq.t, dp.gamma, 2.0);
    EXPECT_LT(frac, 0.2);
}

TEST(DecaySeries, FitRecoversPowerLaw) {
    DecaySeries s;
    for (double t : geometric_ladder(1.0, 100.0, 20)) s.push(t, 3.0 * std::pow(1.0 + t, -1.25));
    s.fit_t0 = 1.0;
    s.fit_t1 = 100.0;
    const FitResult f = fit_exponent(s);
    EXPECT_NEAR(f.slope, -1.25, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_EQ(f.samples, 20u);
}

TEST(DecaySeries, FitNeedsEightPositiveSamples) {
    DecaySeries s;
    for (int i = 1; i <= 7; ++i) s.push(i, 1.0 / i);
    s.fit_t1 = 10;
    EXPECT_THROW(fit_exponent(s), ParameterError);
    s.push(8, 0.0);
    EXPECT_THROW(fit_exponent(s), ParameterError);
    EXPECT_THROW(s.push(8, 1.0), ParameterError);
}
