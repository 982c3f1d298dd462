#include <gtest/gtest.h>

#include <random>

#include "cnsk/params.hpp"
#include "oracles.hpp"

using namespace cnsk;

namespace {

PhysicalParameters make(double mu, double mu_prime, double kappa, int n = 2, double sound = 1.0) {
    PhysicalParameters p;
    p.mu = mu;
    p.mu_prime = mu_prime;
    p.kappa = kappa;
    p.dimension = n;
    p.pressure = PressureLaw::polytropic(1.4, sound);
    return p;
}

std::string error_of(const PhysicalParameters& p) {
    try {
        derive_constants(p);
    } catch (const ParameterError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(DeriveConstants, UnitParametersAreKEqualOne) {
    const auto d = derive_constants(make(1, 0, 1));
    EXPECT_DOUBLE_EQ(d.gamma, 1.0);
    EXPECT_DOUBLE_EQ(d.nu, 1.0);
    EXPECT_DOUBLE_EQ(d.nu_tilde, 1.0);
    EXPECT_DOUBLE_EQ(d.A, 1.0);
    EXPECT_DOUBLE_EQ(d.B, 1.0);
    EXPECT_DOUBLE_EQ(d.K, 1.0);
    EXPECT_EQ(d.regime, Regime::KEqual1);
    EXPECT_EQ(to_string(d.regime), "K_EQ_1");
}

TEST(DeriveConstants, LargeCapillarityGivesKGreaterThanOne) {
    const auto d = derive_constants(make(1, 0, 4));
    EXPECT_NEAR(d.K, 2.0, 1e-15);
    EXPECT_EQ(d.regime, Regime::KGreaterThan1);
    EXPECT_NEAR(d.one_minus_K2, -3.0, 1e-15);
}

TEST(DeriveConstants, SmallCapillarityGivesKLessThanOne) {
    const auto d = derive_constants(make(1, 0, 0.25));
    EXPECT_NEAR(d.K, 0.5, 1e-15);
    EXPECT_EQ(d.regime, Regime::KLessThan1);
}

TEST(DeriveConstants, ViscosityBoundaryIsAccepted) {
    const auto d = derive_constants(make(1, -1, 1, 2));
    EXPECT_DOUBLE_EQ(d.nu_tilde, 0.0);
    EXPECT_DOUBLE_EQ(d.A, 0.5);
}

TEST(DeriveConstants, ViolationsNameTheInequality) {
    EXPECT_NE(error_of(make(0, 0, 1)).find("mu > 0"), std::string::npos);
    EXPECT_NE(error_of(make(1, -1.5, 1, 2)).find("(2/n) mu + mu' >= 0"), std::string::npos);
    EXPECT_NE(error_of(make(1, 0, 0)).find("kappa > 0"), std::string::npos);
    EXPECT_NE(error_of(make(1, 0, 1, 4)).find("dimension"), std::string::npos);
    auto bad = make(1, 0, 1);
    bad.pressure.dP = [](double) { return -1.0; };
    EXPECT_NE(error_of(bad).find("dP(1) > 0"), std::string::npos);
}

TEST(DeriveConstants, InconsistentPressureDerivativesRejected) {
    auto p = make(1, 0, 1);
    p.pressure.ddP = [](double) { return 5.0; };
    EXPECT_THROW(derive_constants(p), ParameterError);
}

TEST(DeriveConstants, IdentitiesHoldOnRandomParameters) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const double mu = u(rng);
        const auto d = derive_constants(make(mu, mu * (u(rng) - 0.6), u(rng), 3, u(rng)));
        EXPECT_NEAR(d.A * d.B, d.gamma, 1e-14 * d.gamma);
        EXPECT_NEAR(d.A * d.K, std::sqrt(d.kappa0 * d.gamma), 1e-14 * d.A * d.K);
        const double lhs = d.total_viscosity() * d.total_viscosity();
        const double rhs = 4 * d.kappa0 * d.gamma;
        EXPECT_EQ(d.regime == Regime::KLessThan1, rhs < lhs);
    }
}

TEST(DeriveConstants, NearUnitKRoutesToKEqualOne) {
    auto p = make(1, 0, 1.0 + 1e-15);
    EXPECT_EQ(derive_constants(p).regime, Regime::KEqual1);
    p.kappa = 1.0 + 1e-12;
    EXPECT_EQ(derive_constants(p).regime, Regime::KGreaterThan1);
}

TEST(P1, ExamplesAgainstQuadrature) {
    const auto q = [](double phi) {
        return oracle::simpson([phi](double tau) { return -1.0 / ((1 + tau * phi) * (1 + tau * phi)); }, 0.0, 1.0);
    };
    EXPECT_DOUBLE_EQ(p1_of_phi(0.0), -1.0);
    EXPECT_NEAR(q(1.0), -0.5, 1e-12);
    EXPECT_NEAR(q(-0.5), -2.0, 1e-12);
    EXPECT_NEAR(p1_of_phi(1.0), q(1.0), 1e-12);
    EXPECT_NEAR(p1_of_phi(-0.5), q(-0.5), 1e-12);
}

TEST(P1, ClosedFormMatchesQuadratureOnRandomPhi) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.9, 9.0);
    for (int i = 0; i < 1000; ++i) {
        const double phi = u(rng);
        const double ref = oracle::simpson(
            [phi](double tau) { return -1.0 / ((1 + tau * phi) * (1 + tau * phi)); }, 0.0, 1.0, 4000);
        ASSERT_NEAR(p1_of_phi(phi), ref, 1e-10 * std::abs(ref)) << "phi = " << phi;
    }
}

TEST(P1, VacuumIsADomainError) {
    EXPECT_THROW(p1_of_phi(-1.0), DomainError);
    EXPECT_THROW(p1_of_phi(-2.0), DomainError);
    EXPECT_THROW(p2_of_phi(-1.0, PressureLaw::standard()), DomainError);
}

TEST(P2, QuadraticPressureGivesOneHalf) {
    const auto law = PressureLaw::polytropic(2.0);
    for (double phi : {-0.8, -0.3, 0.0, 0.7, 4.0}) EXPECT_NEAR(p2_of_phi(phi, law), 0.5, 1e-14);
}

TEST(P2, ZeroPerturbationIsHalfSecondDerivative) {
    const auto law = PressureLaw::standard();
    EXPECT_NEAR(p2_of_phi(0.0, law), law.ddP(1.0) / 2, 1e-15);
}

TEST(P2, CubicPressureAtPhiOne) {
    const auto law = PressureLaw::polytropic(3.0);
    const double ref = oracle::simpson([](double tau) { return (1 - tau) * 2 * (1 + tau); }, 0.0, 1.0);
    EXPECT_NEAR(ref, 4.0 / 3.0, 1e-13);
    EXPECT_NEAR(p2_of_phi(1.0, law), ref, 1e-12);
}

TEST(P2, StandardLawMatchesQuadratureOnRandomPhi) {
    const auto law = PressureLaw::standard();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.9, 9.0);
    for (int i = 0; i < 300; ++i) {
        const double phi = u(rng);
        const double ref = oracle::simpson(
            [&](double tau) { return (1 - tau) * law.ddP(1 + tau * phi); }, 0.0, 1.0, 20000);
        ASSERT_NEAR(p2_of_phi(phi, law), ref, 1e-10 * std::abs(ref)) << "phi = " << phi;
    }
}
