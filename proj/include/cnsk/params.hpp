#pragma once
// Physical constants of the capillary compressible fluid model, the normalized
// parameters of the linearized system, and pressure-derived scalar functions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>

#include "cnsk/numerics.hpp"
#include "cnsk/quadrature.hpp"

namespace cnsk {

/// Pressure as a function of density together with its first two
/// derivatives. The reference density is fixed to 1.
struct PressureLaw {
    std::function<double(double)> P;
    std::function<double(double)> dP;
    std::function<double(double)> ddP;
    std::string description;

    /// P(rho) = c * rho^g / g, so dP(1) = c.
    static PressureLaw polytropic(double exponent, double coefficient = 1.0) {
        if (!(exponent > 0.0) || !(coefficient > 0.0))
            throw ParameterError("polytropic pressure needs exponent > 0 and coefficient > 0");
        const double g = exponent, c = coefficient;
        std::ostringstream desc;
        desc << "P(rho) = " << c << " * rho^" << g << " / " << g;
        return PressureLaw{
            [=](double rho) { return c * std::pow(rho, g) / g; },
            [=](double rho) { return c * std::pow(rho, g - 1.0); },
            [=](double rho) { return c * (g - 1.0) * std::pow(rho, g - 2.0); },
            desc.str(),
        };
    }

    /// Default law rho^1.4 / 1.4 (unit sound speed at rho = 1).
    static PressureLaw standard() { return polytropic(1.4, 1.0); }

    /// Checks dP(1) > 0 and that P, dP, ddP agree under central differences
    /// on rho in [0.5, 1.5]. Throws ParameterError naming the failed check.
    void validate() const {
        if (!P || !dP || !ddP) throw ParameterError("pressure law is missing P, dP or ddP");
        if (!(dP(1.0) > 0.0)) throw ParameterError("pressure law violates dP(1) > 0");
        constexpr double h = 1e-4;
        for (int i = 0; i <= 20; ++i) {
            const double rho = 0.5 + 0.05 * i;
            const double fd1 = (P(rho + h) - P(rho - h)) / (2 * h);
            const double fd2 = (dP(rho + h) - dP(rho - h)) / (2 * h);
            const double tol1 = 1e-6 * std::max(1.0, std::abs(dP(rho)));
            const double tol2 = 1e-6 * std::max(1.0, std::abs(ddP(rho)));
            if (std::abs(fd1 - dP(rho)) > tol1 || std::abs(fd2 - ddP(rho)) > tol2) {
                std::ostringstream msg;
                msg << "pressure law derivatives inconsistent at rho = " << rho;
                throw ParameterError(msg.str());
            }
        }
    }
};

struct PhysicalParameters {
    double mu = 1.0;
    double mu_prime = 0.0;
    double kappa = 1.0;
    int dimension = 2;
    PressureLaw pressure = PressureLaw::standard();

    void validate() const {
        if (dimension != 2 && dimension != 3)
            throw ParameterError("dimension must be 2 or 3");
        if (!(mu > 0.0)) throw ParameterError("violates mu > 0");
        if (!((2.0 / dimension) * mu + mu_prime >= 0.0))
            throw ParameterError("violates (2/n) mu + mu' >= 0");
        if (!(kappa > 0.0)) throw ParameterError("violates kappa > 0");
        pressure.validate();
    }
};

enum class Regime { KLessThan1, KEqual1, KGreaterThan1 };

inline std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::KLessThan1: return "K_LT_1";
        case Regime::KEqual1: return "K_EQ_1";
        case Regime::KGreaterThan1: return "K_GT_1";
    }
    return "?";
}

/// Relative tolerance for routing near-unit K to the K = 1 branch.
inline constexpr double kRegimeTolerance = 1e-14;

struct DerivedParameters {
    int dimension = 2;
    double gamma = 1.0;
    double nu = 1.0;
    double nu_tilde = 1.0;
    double kappa0 = 1.0;
    double A = 1.0;
    double B = 1.0;
    double K = 1.0;
    /// 1 - K^2 evaluated as ((nu + nu~)^2 - 4 kappa0 gamma) / (nu + nu~)^2,
    /// and exactly 0 in the K = 1 regime.
    double one_minus_K2 = 0.0;
    Regime regime = Regime::KEqual1;

    /// Sum of the viscosities, nu + nu~ = 2A.
    double total_viscosity() const { return nu + nu_tilde; }
    /// Squared radius |xi|^2 = B^2 / (1 - K^2) where the two roots coincide (K < 1 only).
    double degeneracy_radius2() const { return B * B / one_minus_K2; }
};

inline DerivedParameters derive_constants(const PhysicalParameters& phys) {
    phys.validate();
    DerivedParameters d;
    d.dimension = phys.dimension;
    d.gamma = std::sqrt(phys.pressure.dP(1.0));
    d.nu = phys.mu;
    d.nu_tilde = phys.mu + phys.mu_prime;
    d.kappa0 = phys.kappa / d.gamma;
    const double sum = d.nu + d.nu_tilde;
    if (!(sum > 0.0)) throw ParameterError("violates nu + nu~ > 0");
    d.A = 0.5 * sum;
    d.B = 2.0 * d.gamma / sum;
    d.K = 2.0 * std::sqrt(d.kappa0 * d.gamma) / sum;

    const double lhs = sum * sum;
    const double rhs = 4.0 * d.kappa0 * d.gamma;
    if (std::abs(lhs - rhs) <= kRegimeTolerance * std::max(lhs, rhs)) {
        d.regime = Regime::KEqual1;
        d.K = 1.0;
        d.one_minus_K2 = 0.0;
    } else {
        d.regime = rhs < lhs ? Regime::KLessThan1 : Regime::KGreaterThan1;
        d.one_minus_K2 = (lhs - rhs) / lhs;
    }
    return d;
}

inline void require_positive_density(double phi, const char* who) {
    if (!(1.0 + phi > 0.0)) {
        std::ostringstream msg;
        msg << who << ": density 1 + phi = " << 1.0 + phi << " is not positive";
        throw DomainError(msg.str());
    }
}

/// Integral of f'(1 + tau phi) over tau in [0,1] with f(tau) = 1/tau, which
/// telescopes to (f(1+phi) - f(1)) / phi = -1 / (1 + phi).
inline double p1_of_phi(double phi) {
    require_positive_density(phi, "p1_of_phi");
    return -1.0 / (1.0 + phi);
}

/// Integral of (1 - tau) P''(1 + tau phi) over tau in [0,1], by Gauss-Legendre
/// quadrature. The rule order grows with |phi|; relative error is below 1e-10
/// for phi in (-0.9, 9) with smooth laws such as the polytropic family.
inline double p2_of_phi(double phi, const PressureLaw& pressure) {
    require_positive_density(phi, "p2_of_phi");
    static const GaussLegendre small(8), medium(24), large(64);
    const double a = std::abs(phi);
    const GaussLegendre& rule = a < 0.05 ? small : (a < 0.6 ? medium : large);
    if (a >= 0.6 && phi < 0.0) {
        // Near-vacuum: the integrand steepens at tau -> 1; split the interval.
        const double split = 0.5;
        const double left = rule.integrate([&](double s) {
            const double tau = split * s;
            return split * (1.0 - tau) * pressure.ddP(1.0 + tau * phi);
        });
        const double right = rule.integrate([&](double s) {
            const double tau = split + (1.0 - split) * s;
            return (1.0 - split) * (1.0 - tau) * pressure.ddP(1.0 + tau * phi);
        });
        return left + right;
    }
    return rule.integrate([&](double tau) { return (1.0 - tau) * pressure.ddP(1.0 + tau * phi); });
}

}  // namespace cnsk
