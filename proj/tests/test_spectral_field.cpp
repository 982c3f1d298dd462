#include <gtest/gtest.h>

#include <random>

#include "cnsk/spectral_field.hpp"

using namespace cnsk;

namespace {

DerivedParameters params(double mu, double mu_prime, double kappa) {
    PhysicalParameters p;
    p.mu = mu;
    p.mu_prime = mu_prime;
    p.kappa = kappa;
    return derive_constants(p);
}

SpectralState random_spectral(const SpectralSpace& space, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    State s(space.grid());
    for (auto& v : s.phi) v = g(rng);
    for (auto& c : s.m)
        for (auto& v : c) v = g(rng);
    return to_spectral(space, s);
}

}  // namespace

TEST(Grid, Validation) {
    EXPECT_THROW((Grid{4, 16, 1.0}.validate()), ShapeError);
    EXPECT_THROW((Grid{2, 24, 1.0}.validate()), ShapeError);
    EXPECT_THROW((Grid{2, 16, 0.0}.validate()), ShapeError);
    EXPECT_NO_THROW((Grid{3, 16, 1.0}.validate()));
}

TEST(Grid, ResolvabilityOfBands) {
    const auto k2 = params(1, 0, 4);  // 2B/sqrt3 = 1.1547
    EXPECT_THROW((Grid{2, 8, 2 * pi * 4}.require_resolves(k2)), ShapeError);  // pi*8/(8 pi) = 1
    EXPECT_NO_THROW((Grid{2, 16, 2 * pi * 4}.require_resolves(k2)));
}

TEST(Transform, ConstantMapsToZeroMode) {
    SpectralSpace space(Grid{2, 16, 3.0});
    RealArray f(space.physical_size(), 2.5);
    const auto c = space.forward(f);
    EXPECT_NEAR(c[0].real(), 2.5, 1e-15);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(std::abs(c[i]), 1e-15);
}

TEST(Transform, CosineMapsToConjugatePair) {
    const Grid g{2, 16, 5.0};
    SpectralSpace space(g);
    RealArray f(space.physical_size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double x = static_cast<double>(i / g.N) * g.spacing();
        f[i] = std::cos(2 * pi * x / g.L);
    }
    const auto c = space.forward(f);
    const std::size_t plus = space.index_of({1, 0, 0}), minus = space.index_of({-1, 0, 0});
    EXPECT_NEAR(std::abs(c[plus] - 0.5), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(c[minus] - 0.5), 0.0, 1e-15);
    for (std::size_t i = 0; i < c.size(); ++i)
        if (i != plus && i != minus) EXPECT_LT(std::abs(c[i]), 1e-15);
}

TEST(Transform, RoundTripAndParseval) {
    std::mt19937_64 rng(3);
    for (const Grid& g : {Grid{2, 64, 7.0}, Grid{3, 16, 2.0}}) {
        SpectralSpace space(g);
        std::normal_distribution<double> n01;
        RealArray f(space.physical_size());
        for (auto& v : f) v = n01(rng);
        const auto c = space.forward(f);
        const auto back = space.inverse(c);
        double err = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(back[i] - f[i]));
        EXPECT_LT(err, 1e-12);
        EXPECT_NEAR(spectral_l2(space, c), lp_norm(g, f, 2.0), 1e-12 * lp_norm(g, f, 2.0));
        EXPECT_LT(conjugate_symmetry_defect(space, c), 1e-13);
    }
}

TEST(Transform, SizeMismatchThrows) {
    SpectralSpace space(Grid{2, 16, 1.0});
    RealArray f(10);
    EXPECT_THROW(space.forward(f), ShapeError);
    State wrong(Grid{2, 32, 1.0});
    EXPECT_THROW(to_spectral(space, wrong), ShapeError);
}

TEST(Bands, KEqualOneCutoffs) {
    const auto dp = params(1, 0, 1);
    const auto r = BandRadii::from(dp);
    EXPECT_DOUBLE_EQ(r.w1(0.4), 1.0);
    EXPECT_DOUBLE_EQ(r.w1(1.2), 0.0);
    SpectralSpace space(Grid{2, 64, 40.0});
    const auto b = build_bands(space, dp);
    for (std::size_t i = 0; i < space.spectral_size(); ++i) {
        EXPECT_EQ(b.wM[i], 0.0);
        EXPECT_NEAR(b.w1[i] + b.wInf[i], 1.0, 1e-15);
    }
}

TEST(Bands, KGreaterThanOneHighThreshold) {
    const auto dp = params(1, 0, 4);  // K = 2, B = 1
    const auto r = BandRadii::from(dp);
    EXPECT_NEAR(r.high_out, 2.0 / std::sqrt(3.0), 1e-15);
    EXPECT_DOUBLE_EQ(r.winf(2.0), 1.0);
    EXPECT_DOUBLE_EQ(r.winf(std::sqrt(2.0) / std::sqrt(3.0) - 1e-9), 0.0);
}

TEST(Bands, CaseTableForLowCutoff) {
    // R = B / sqrt|1-K^2| with B = 1: choose K to land in each case.
    const auto radii_for_R = [](double R) {
        DerivedParameters d;
        d.B = 1.0;
        d.one_minus_K2 = -1.0 / (R * R);
        d.regime = Regime::KGreaterThan1;
        return BandRadii::from(d);
    };
    auto r = radii_for_R(3.0);  // R/2 > 1
    EXPECT_DOUBLE_EQ(r.low_in, 0.5);
    EXPECT_DOUBLE_EQ(r.low_out, 1.0);
    r = radii_for_R(1.8);  // R/2 <= 1 < R/sqrt2
    EXPECT_DOUBLE_EQ(r.low_in, 0.9);
    EXPECT_DOUBLE_EQ(r.low_out, 1.0);
    r = radii_for_R(1.0);  // R/sqrt2 <= 1
    EXPECT_DOUBLE_EQ(r.low_in, 0.5);
    EXPECT_NEAR(r.low_out, 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(r.high_in, std::sqrt(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(r.high_out, 2.0);
}

TEST(Bands, PartitionOfUnityAndRange) {
    for (const auto& dp : {params(1, 0, 1), params(1, 0, 4), params(1, 0, 0.25), params(3, 1, 0.1)}) {
        SpectralSpace space(Grid{2, 128, 60.0});
        const auto b = build_bands(space, dp);
        for (std::size_t i = 0; i < space.spectral_size(); ++i) {
            ASSERT_LT(std::abs(b.w1[i] + b.wM[i] + b.wInf[i] - 1.0), 1e-12);
            for (double w : {b.w1[i], b.wM[i], b.wInf[i]}) {
                ASSERT_GE(w, 0.0);
                ASSERT_LE(w, 1.0);
            }
        }
    }
}

TEST(Bands, ProjectorsReconstructAndSeparate) {
    std::mt19937_64 rng(5);
    const auto dp = params(1, 0, 0.25);
    SpectralSpace space(Grid{2, 64, 50.0});
    const auto bands = build_bands(space, dp);
    const auto u = random_spectral(space, rng);
    auto sum = project_band(u, bands, Band::P1);
    sum += project_band(u, bands, Band::PInf);
    sum -= u;
    EXPECT_LT(sobolev_norm(space, sum, 0, 0), 1e-12 * sobolev_norm(space, u, 0, 0));

    auto three = project_band(u, bands, Band::Low);
    three += project_band(u, bands, Band::Mid);
    three += project_band(u, bands, Band::High);
    three -= u;
    EXPECT_LT(sobolev_norm(space, three, 0, 0), 1e-12 * sobolev_norm(space, u, 0, 0));

    // Data supported inside the inner low radius has no P_inf part.
    SpectralState inner = u;
    for (std::size_t i = 0; i < space.spectral_size(); ++i)
        if (std::sqrt(space.xi2(i)) > bands.radii.low_in) {
            inner.phi[i] = 0.0;
            for (auto& c : inner.m) c[i] = 0.0;
        }
    EXPECT_EQ(sobolev_norm(space, project_band(inner, bands, Band::PInf), 0, 0), 0.0);
    EXPECT_LT(conjugate_symmetry_defect(space, project_band(u, bands, Band::Mid)), 1e-13);
}

TEST(Bands, PythagorasOnOverlapFreeShells) {
    std::mt19937_64 rng(6);
    const auto dp = params(1, 0, 4);
    SpectralSpace space(Grid{2, 64, 50.0});
    const auto bands = build_bands(space, dp);
    auto u = random_spectral(space, rng);
    // Remove the transition annuli so the three bands have disjoint support.
    for (std::size_t i = 0; i < space.spectral_size(); ++i) {
        const double w = std::max({bands.w1[i], bands.wM[i], bands.wInf[i]});
        if (w < 1.0) {
            u.phi[i] = 0.0;
            for (auto& c : u.m) c[i] = 0.0;
        }
    }
    double parts = 0.0;
    for (Band b : {Band::Low, Band::Mid, Band::High}) parts += std::pow(sobolev_norm(space, project_band(u, bands, b), 0, 0), 2);
    const double whole = std::pow(sobolev_norm(space, u, 0, 0), 2);
    EXPECT_NEAR(parts, whole, 1e-10 * whole);
}

TEST(Bands, LowBandIsBandLimited) {
    std::mt19937_64 rng(9);
    const auto dp = params(1, 0, 1);
    const Grid g{2, 64, 40.0};
    SpectralSpace space(g);
    const auto bands = build_bands(space, dp);
    RealArray f(space.physical_size());
    std::normal_distribution<double> n01;
    for (auto& v : f) v = n01(rng);
    auto c = space.forward(f);
    apply_band(bands, Band::P1, c);
    const double r = bands.radii.low_out;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (std::sqrt(space.xi2(i)) >= r) ASSERT_EQ(c[i], cplx{});
    // ||grad^k P1 f|| <= r^k ||P1 f|| for k = 1, 2.
    const double base = spectral_l2(space, c);
    for (int k = 1; k <= 2; ++k) {
        const double gk = weighted_spectral_norm(space, std::span<const cplx>(c),
                                                 [&](std::size_t i) { return std::pow(space.xi2(i), k); });
        EXPECT_LE(gk, std::pow(r, k) * base);
    }
}

TEST(Helmholtz, PureLongitudinalAndTransverseModes) {
    SpectralSpace space(Grid{2, 16, 2 * pi});
    SpectralState u(space.grid());
    const std::size_t i = space.index_of({2, 3, 0});
    const double x0 = space.xi(0, i), x1 = space.xi(1, i);
    u.m[0][i] = x0;
    u.m[1][i] = x1;
    auto [lon, tr] = helmholtz_split(space, u);
    EXPECT_LT(std::abs(tr.m[0][i]) + std::abs(tr.m[1][i]), 1e-15);
    u.m[0][i] = -x1;
    u.m[1][i] = x0;
    std::tie(lon, tr) = helmholtz_split(space, u);
    EXPECT_LT(std::abs(lon.m[0][i]) + std::abs(lon.m[1][i]), 1e-15);
}

TEST(Helmholtz, RandomFieldIsSplitExactlyAndIdempotently) {
    std::mt19937_64 rng(12);
    SpectralSpace space(Grid{3, 16, 3.0});
    const auto u = random_spectral(space, rng);
    auto [lon, tr] = helmholtz_split(space, u);
    for (std::size_t i = 0; i < space.spectral_size(); ++i) {
        cplx div = 0.0;
        double mnorm = 0.0;
        for (int d = 0; d < 3; ++d) {
            div += space.xi(d, i) * tr.m[d][i];
            mnorm += std::norm(u.m[d][i]);
            ASSERT_LT(std::abs(lon.m[d][i] + tr.m[d][i] - u.m[d][i]), 1e-14);
        }
        if (space.nyquist(i)) {
            for (int d = 0; d < 3; ++d) ASSERT_EQ(lon.m[d][i], cplx{});
            continue;
        }
        ASSERT_LE(std::abs(div), 1e-12 * std::sqrt(space.xi2(i) * mnorm) + 1e-300);
    }
    const std::size_t zero = space.index_of({0, 0, 0});
    for (int d = 0; d < 3; ++d) EXPECT_EQ(lon.m[d][zero], cplx{});
    // Discrete divergence (Nyquist-zeroing derivative) of the transverse part.
    ComplexArray div(space.spectral_size());
    for (int d = 0; d < 3; ++d) {
        const auto dd = spectral_derivative(space, tr.m[d], d);
        for (std::size_t i = 0; i < div.size(); ++i) div[i] += dd[i];
    }
    EXPECT_LT(spectral_l2(space, div), 1e-12 * sobolev_norm(space, u, 0, 0));
    auto [lon2, tr2] = helmholtz_split(space, tr);
    EXPECT_LT(sobolev_norm(space, lon2, 0, 0), 1e-13 * sobolev_norm(space, tr, 0, 0));
    tr2 -= tr;
    EXPECT_LT(sobolev_norm(space, tr2, 0, 0), 1e-13 * sobolev_norm(space, tr, 0, 0));
    EXPECT_LT(conjugate_symmetry_defect(space, lon), 1e-13);
}

TEST(Sobolev, Examples) {
    SpectralSpace space(Grid{2, 16, 2 * pi});
    SpectralState zero(space.grid());
    EXPECT_EQ(sobolev_norm(space, zero, 3, 2), 0.0);

    SpectralState u(space.grid());
    u.phi[space.index_of({1, 0, 0})] = 1.0;  // |xi| = 1
    const double l2 = sobolev_norm(space, u, 0, 0);
    EXPECT_NEAR(sobolev_norm(space, u, 1, 1), std::sqrt(2.0) * l2, 1e-14);
    EXPECT_THROW(sobolev_norm(space, u, -1, 0), ParameterError);
}

TEST(Sobolev, MatchesBruteForceFullLatticeSum) {
    std::mt19937_64 rng(15);
    const Grid g{2, 16, 3.0};
    SpectralSpace space(g);
    const auto u = random_spectral(space, rng);
    const State phys = to_physical(space, u);
    // Full complex FFT of each component by direct DFT, then the weighted sum.
    const int N = static_cast<int>(g.N);
    double total = 0.0;
    const auto dft = [&](const RealArray& f, int k0, int k1) {
        cplx acc = 0.0;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
                acc += f[a * N + b] * std::polar(1.0, -2 * pi * (k0 * a + k1 * b) / N);
        return acc / double(N * N);
    };
    for (int k0 = -N / 2 + 1; k0 <= N / 2; ++k0)
        for (int k1 = -N / 2 + 1; k1 <= N / 2; ++k1) {
            const double s = std::pow(2 * pi / g.L, 2) * (k0 * k0 + k1 * k1);
            const double w = 1 + s;
            total += w * w * std::norm(dft(phys.phi, k0, k1));
            total += w * (std::norm(dft(phys.m[0], k0, k1)) + std::norm(dft(phys.m[1], k0, k1)));
        }
    const double ref = std::sqrt(g.volume() * total);
    EXPECT_NEAR(sobolev_norm(space, u, 2, 1), ref, 1e-12 * ref);
}

TEST(Norms, LpOfKnownFields) {
    const Grid g{2, 32, 2.0};
    RealArray one(g.physical_size(), 1.0);
    EXPECT_NEAR(lp_norm(g, one, 1.0), 4.0, 1e-14);
    EXPECT_NEAR(lp_norm(g, one, 2.0), 2.0, 1e-14);
    std::vector<RealArray> v{RealArray(g.physical_size(), 3.0), RealArray(g.physical_size(), -4.0)};
    EXPECT_NEAR(lp_norm(g, v, INFINITY), 5.0, 1e-15);
    EXPECT_NEAR(lp_norm(g, v, 1.0), 20.0, 1e-12);
}

TEST(Derivative, ExactOnResolvedMode) {
    const Grid g{2, 32, 4.0};
    SpectralSpace space(g);
    RealArray f(space.physical_size()), df(space.physical_size());
    const double k = 2 * pi * 3 / g.L;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double y = static_cast<double>(i % g.N) * g.spacing();
        f[i] = std::sin(k * y);
        df[i] = k * std::cos(k * y);
    }
    const auto d = space.inverse(spectral_derivative(space, space.forward(f), 1));
    for (std::size_t i = 0; i < f.size(); ++i) ASSERT_NEAR(d[i], df[i], 1e-12);
}
