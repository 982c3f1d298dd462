#pragma once
// Pseudospectral evaluation of the nonlinear term and an exponential
// (ETD2RK) integrator built on the exact mode semigroup.
//
// With r = P1(phi) phi = -phi/(1+phi) and q = r m, the momentum forcing is
//   f = -div S + nu Lap q + nu~ grad div q,
//   S = gamma (1 + r) m (x) m + (1/gamma) P2(phi) phi^2 I - Phi(phi),
//   Phi = kappa0 (phi Lap phi I + |grad phi|^2/2 I - grad phi (x) grad phi),
// and the density equation has no forcing.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cnsk/linear_propagator.hpp"
#include "cnsk/params.hpp"
#include "cnsk/phi_functions.hpp"
#include "cnsk/spectral_field.hpp"

namespace cnsk {

/// Pointwise 1 + phi must stay above this.
inline constexpr double kVacuumGuard = 1e-6;
/// Largest accepted dt * max|lambda| over retained modes. ETD2RK is stable for
/// any value; the bound only flags configurations where the coarse-step
/// error constant of the phi-function weights is no longer small.
inline constexpr double kStiffnessBound = 1000.0;

/// Spectral mask keeping modes with every |k_d| <= fraction * N / 2.
inline std::vector<std::uint8_t> dealias_mask(const SpectralSpace& space, double fraction) {
    std::vector<std::uint8_t> keep(space.spectral_size());
    const double cut = fraction * static_cast<double>(space.grid().N) / 2.0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        bool k = !space.nyquist(i);
        for (int d = 0; d < space.dim(); ++d) k = k && std::abs(space.wavenumber(i)[d]) <= cut;
        keep[i] = k;
    }
    return keep;
}

/// Coefficients of the pointwise product of two fields given spectrally,
/// with both inputs and the result masked.
inline ComplexArray dealiased_product(const SpectralSpace& space, std::span<const cplx> a, std::span<const cplx> b,
                                      const std::vector<std::uint8_t>& keep) {
    ComplexArray ac(a.begin(), a.end()), bc(b.begin(), b.end());
    for (std::size_t i = 0; i < ac.size(); ++i)
        if (!keep[i]) ac[i] = bc[i] = 0.0;
    const RealArray x = space.inverse(ac), y = space.inverse(bc);
    RealArray p(x.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] * y[i];
    ComplexArray out = space.forward(p);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!keep[i]) out[i] = 0.0;
    return out;
}

/// Evaluates F(u) = (0, f(u)) for spectral states on one grid.
class Nonlinearity {
public:
    Nonlinearity(const SpectralSpace& space, const DerivedParameters& dp, PressureLaw pressure,
                 double dealias_fraction = 2.0 / 3.0)
        : space_(space), dp_(dp), pressure_(std::move(pressure)),
          keep_(dealias_mask(space, dealias_fraction)) {}

    const std::vector<std::uint8_t>& mask() const { return keep_; }

    SpectralState operator()(const SpectralState& u) const {
        u.check(space_.grid());
        const int n = space_.dim();
        const std::size_t P = space_.physical_size();
        const std::size_t M = space_.spectral_size();
        const double gamma = dp_.gamma, k0 = dp_.kappa0;

        ComplexArray ph = masked(u.phi);
        RealArray phi = space_.inverse(ph);
        std::vector<RealArray> m(n), gphi(n);
        for (int d = 0; d < n; ++d) {
            m[d] = space_.inverse(masked(u.m[d]));
            gphi[d] = space_.inverse(spectral_derivative(space_, ph, d));
        }
        ComplexArray lap_hat(M);
        for (std::size_t i = 0; i < M; ++i) lap_hat[i] = -space_.xi2(i) * ph[i];
        const RealArray lap = space_.inverse(lap_hat);

        RealArray r(P), iso(P);
        for (std::size_t x = 0; x < P; ++x) {
            const double f = phi[x];
            if (!(1.0 + f > kVacuumGuard)) {
                std::ostringstream msg;
                msg << "vacuum guard: 1 + phi = " << 1.0 + f << " at grid index " << x;
                throw SimulationError(msg.str());
            }
            r[x] = p1_of_phi(f) * f;
            double g2 = 0.0;
            for (int d = 0; d < n; ++d) g2 += gphi[d][x] * gphi[d][x];
            iso[x] = p2_of_phi(f, pressure_) * f * f / gamma - k0 * (f * lap[x] + 0.5 * g2);
        }

        SpectralState out(space_.grid());
        RealArray buf(P);
        // q = r m enters through nu Lap q + nu~ grad div q.
        std::vector<ComplexArray> qh(n);
        for (int d = 0; d < n; ++d) {
            for (std::size_t x = 0; x < P; ++x) buf[x] = r[x] * m[d][x];
            qh[d] = masked(space_.forward(buf));
        }
        for (std::size_t i = 0; i < M; ++i) {
            cplx div = 0.0;
            for (int d = 0; d < n; ++d) div += space_.xi(d, i) * qh[d][i];
            for (int d = 0; d < n; ++d)
                out.m[d][i] = -dp_.nu * space_.xi2(i) * qh[d][i] - dp_.nu_tilde * space_.xi(d, i) * div;
        }
        // -div S, one symmetric component at a time.
        for (int a = 0; a < n; ++a) {
            for (int b = a; b < n; ++b) {
                for (std::size_t x = 0; x < P; ++x) {
                    double s = gamma * (1.0 + r[x]) * m[a][x] * m[b][x] + k0 * gphi[a][x] * gphi[b][x];
                    if (a == b) s += iso[x];
                    buf[x] = s;
                }
                const ComplexArray sh = masked(space_.forward(buf));
                for (std::size_t i = 0; i < M; ++i) {
                    const cplx ib = cplx{0.0, space_.xi(b, i)} * sh[i];
                    out.m[a][i] -= ib;
                    if (a != b) out.m[b][i] -= cplx{0.0, space_.xi(a, i)} * sh[i];
                }
            }
        }
        for (int d = 0; d < n; ++d)
            for (std::size_t i = 0; i < M; ++i)
                if (!keep_[i]) out.m[d][i] = 0.0;
        return out;
    }

private:
    ComplexArray masked(std::span<const cplx> c) const {
        ComplexArray out(c.begin(), c.end());
        for (std::size_t i = 0; i < out.size(); ++i)
            if (!keep_[i]) out[i] = 0.0;
        return out;
    }

    const SpectralSpace& space_;
    DerivedParameters dp_;
    PressureLaw pressure_;
    std::vector<std::uint8_t> keep_;
};

/// Physical-space convenience wrapper returning (0, f(u)).
inline State assemble_nonlinearity(const SpectralSpace& space, const State& u, const DerivedParameters& dp,
                                   const PressureLaw& pressure) {
    Nonlinearity F(space, dp, pressure);
    return to_physical(space, F(to_spectral(space, u)));
}

/// Cox-Matthews ETD2RK with the exact mode semigroup:
///   a   = E(h) u + h phi1(hL) N(u)
///   u+  = a + h phi2(hL) (N(a) - N(u)).
/// Per-mode weights depend only on h and are built once.
class Etd2rkStepper {
public:
    Etd2rkStepper(const SpectralSpace& space, const DerivedParameters& dp, const PressureLaw& pressure, double dt,
                  double dealias_fraction = 2.0 / 3.0)
        : space_(space), dp_(dp), dt_(dt), F_(space, dp, pressure, dealias_fraction) {
        if (!(dt > 0.0)) throw ParameterError("time step must be positive");
        const std::size_t M = space.spectral_size();
        modes_.resize(M);
        double worst = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const double s = space.xi2(i);
            Mode& md = modes_[i];
            md.E = mode_semigroup(s, dt, dp);
            md.w1 = etd_weights(1, s, dt, dp);
            md.w2 = etd_weights(2, s, dt, dp);
            if (F_.mask()[i]) {
                const auto [lp, lm] = lambda_pm_s2(s, dp);
                worst = std::max({worst, std::abs(lp), std::abs(lm), dp.nu * s});
            }
        }
        stiffness_ = worst * dt;
        if (stiffness_ > kStiffnessBound) {
            std::ostringstream msg;
            msg << "dt * max|lambda| = " << stiffness_ << " exceeds " << kStiffnessBound;
            throw ParameterError(msg.str());
        }
    }

    double dt() const { return dt_; }
    double stiffness() const { return stiffness_; }
    const Nonlinearity& nonlinearity() const { return F_; }

    SpectralState step(const SpectralState& u) const { return step(u, F_); }

    /// One step with a caller-supplied forcing u -> (0, f(u)).
    template <class Forcing>
    SpectralState step(const SpectralState& u, const Forcing& F) const {
        const SpectralState N0 = F(u);
        SpectralState a = advance(u, N0, nullptr);
        const SpectralState N1 = F(a);
        SpectralState out = advance(u, N0, &N1);
        check_finite(out);
        return out;
    }

private:
    struct Mode {
        ModeSemigroup E;
        EtdWeights w1, w2;
    };

    /// E u + h phi1 N0, plus h phi2 (N1 - N0) when N1 is given.
    SpectralState advance(const SpectralState& u, const SpectralState& N0, const SpectralState* N1) const {
        const int n = space_.dim();
        const std::size_t M = space_.spectral_size();
        SpectralState out = u;
        const double h = dt_;
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < M; ++i) {
            if (space_.nyquist(i)) {
                out.phi[i] = 0.0;
                for (int d = 0; d < n; ++d) out.m[d][i] = 0.0;
                continue;
            }
            const Mode& md = modes_[i];
            std::array<cplx, 3> m{};
            std::array<double, 3> xi{};
            for (int d = 0; d < n; ++d) {
                m[d] = u.m[d][i];
                xi[d] = space_.xi(d, i);
            }
            apply_mode(md.E, xi.data(), n, out.phi[i], m.data());
            for (int d = 0; d < n; ++d) out.m[d][i] = m[d];

            add_forcing(md.w1, N0, nullptr, i, xi, h, out);
            if (N1) add_forcing(md.w2, *N1, &N0, i, xi, h, out);
        }
        return out;
    }

    void add_forcing(const EtdWeights& w, const SpectralState& A, const SpectralState* B, std::size_t i,
                     const std::array<double, 3>& xi, double h, SpectralState& out) const {
        const int n = space_.dim();
        std::array<cplx, 3> f{};
        bool any = false;
        for (int d = 0; d < n; ++d) {
            f[d] = B ? A.m[d][i] - B->m[d][i] : A.m[d][i];
            any = any || f[d] != cplx{};
        }
        if (!any) return;
        const double s = space_.xi2(i);
        if (s == 0.0) {
            for (int d = 0; d < n; ++d) out.m[d][i] += h * w.transverse * f[d];
            return;
        }
        cplx a = 0.0;
        for (int d = 0; d < n; ++d) a += xi[d] * f[d];
        out.phi[i] += h * cplx{0.0, -w.p12} * a;
        const cplx da = h * w.p22 * a;
        for (int d = 0; d < n; ++d)
            out.m[d][i] += h * w.transverse * (f[d] - xi[d] * a / s) + xi[d] * da / s;
    }

    void check_finite(const SpectralState& u) const {
        for (std::size_t i = 0; i < u.phi.size(); ++i) {
            bool ok = std::isfinite(u.phi[i].real()) && std::isfinite(u.phi[i].imag());
            for (const auto& c : u.m) ok = ok && std::isfinite(c[i].real()) && std::isfinite(c[i].imag());
            if (!ok) {
                const auto k = space_.wavenumber(i);
                std::ostringstream msg;
                msg << "non-finite coefficient at mode (" << k[0] << ", " << k[1];
                if (space_.dim() == 3) msg << ", " << k[2];
                msg << ")";
                throw SimulationError(msg.str());
            }
        }
    }

    const SpectralSpace& space_;
    DerivedParameters dp_;
    double dt_;
    Nonlinearity F_;
    std::vector<Mode> modes_;
    double stiffness_ = 0.0;
};

// ---------------------------------------------------------------------------
// Energy monitor and logs

struct EnergyRecord {
    double t = 0.0;
    double E_high = 0.0;
    double D_high = 0.0;
};

/// Sobolev index [n/2] + 1.
inline int energy_index(int n) { return n / 2 + 1; }

/// E_high = ||phi_inf||^2_{H^{s+1}} + ||m_inf||^2_{H^s} and
/// D_high = ||grad phi_inf||^2_{H^{s+1}} + ||grad m_inf||^2_{H^s} for the
/// P_inf projection of u.
inline EnergyRecord energy_monitor(const SpectralSpace& space, const BandDecomposition& bands,
                                   const SpectralState& u, int s, double t = 0.0) {
    if (s < energy_index(space.dim())) throw ParameterError("energy_monitor needs s >= [n/2] + 1");
    const SpectralState hi = project_band(u, bands, Band::PInf);
    EnergyRecord r;
    r.t = t;
    const double E = sobolev_norm(space, hi, s + 1, s);
    r.E_high = E * E;
    const double D = pairwise_sum(space.spectral_size(), [&](std::size_t i) {
        const double k2 = space.xi2(i), w = 1.0 + k2;
        double mm = 0.0;
        for (const auto& c : hi.m) mm += std::norm(c[i]);
        return space.multiplicity(i) * k2 * (std::pow(w, s + 1) * std::norm(hi.phi[i]) + std::pow(w, s) * mm);
    });
    r.D_high = space.grid().volume() * D;
    return r;
}

struct NormLogEntry {
    double t;
    std::string quantity;  // "phi" or "m"
    std::string band;      // "all", "p1", "pinf"
    double p;              // 1, 2 or infinity
    double value;
};

inline void write_norm_log_csv(std::ostream& os, const std::vector<NormLogEntry>& log) {
    os << "t,quantity,band,norm_p,value\n";
    os.precision(17);
    for (const auto& e : log)
        os << e.t << ',' << e.quantity << ',' << e.band << ',' << (std::isinf(e.p) ? std::string("inf") : std::to_string(static_cast<int>(e.p)))
           << ',' << e.value << '\n';
}

inline void write_energy_csv(std::ostream& os, const std::vector<EnergyRecord>& log) {
    os << "t,E_high,D_high\n";
    os.precision(17);
    for (const auto& e : log) os << e.t << ',' << e.E_high << ',' << e.D_high << '\n';
}

struct SimConfig {
    Grid grid;
    DerivedParameters dp;
    PressureLaw pressure = PressureLaw::standard();
    double dt = 0.1;
    double T_end = 1.0;
    double dealias = 2.0 / 3.0;
    int log_stride = 1;
    /// Skip the nonlinearity (linear run through the same stepper).
    bool linear = false;
    /// Skip the default band-norm log (the observer still runs).
    bool log_norms = true;

    void validate() const {
        grid.validate();
        if (!(dt > 0.0) || !(T_end > 0.0)) throw ParameterError("dt and T_end must be positive");
        if (T_end > grid.L / (4.0 * dp.gamma) * (1 + 1e-12)) {
            std::ostringstream msg;
            msg << "T_end = " << T_end << " exceeds the wrap-around horizon L/(4 gamma) = " << grid.L / (4.0 * dp.gamma);
            throw ParameterError(msg.str());
        }
        if (log_stride < 1) throw ParameterError("log_stride must be >= 1");
    }
};

struct Trajectory {
    SpectralState final_state;
    std::vector<NormLogEntry> norms;
    std::vector<EnergyRecord> energy;
    std::vector<double> mass;  // mean phi at each log time
    std::vector<double> times;
};

using Observer = std::function<void(double t, const SpectralState& u)>;

/// Steps from u0 to T_end, logging every log_stride steps (and at t = 0).
inline Trajectory run(const SimConfig& cfg, const SpectralSpace& space, const SpectralState& u0,
                      const Observer& observer = {}) {
    cfg.validate();
    if (!(space.grid() == cfg.grid)) throw ShapeError("run: space and config grids differ");
    const BandDecomposition bands = build_bands(space, cfg.dp);
    const Etd2rkStepper stepper(space, cfg.dp, cfg.pressure, cfg.dt, cfg.dealias);
    const auto steps = static_cast<long>(std::llround(cfg.T_end / cfg.dt));
    const int s = energy_index(space.dim());

    Trajectory tr;
    const auto log = [&](double t, const SpectralState& u) {
        tr.times.push_back(t);
        tr.mass.push_back(u.phi[0].real());
        tr.energy.push_back(energy_monitor(space, bands, u, s, t));
        if (cfg.log_norms) {
            for (Band b : {Band::P1, Band::PInf}) {
                const State x = to_physical(space, project_band(u, bands, b));
                const std::string bn(to_string(b));
                for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
                    tr.norms.push_back({t, "phi", bn, p, lp_norm(x.grid, x.phi, p)});
                    tr.norms.push_back({t, "m", bn, p, lp_norm(x.grid, x.m, p)});
                }
            }
        }
        if (observer) observer(t, u);
    };

    SpectralState u = u0;
    log(0.0, u);
    for (long k = 1; k <= steps; ++k) {
        if (cfg.linear) {
            u = propagate(space, u, cfg.dt, cfg.dp);
        } else {
            u = stepper.step(u);
        }
        if (k % cfg.log_stride == 0 || k == steps) log(static_cast<double>(k) * cfg.dt, u);
    }
    tr.final_state = std::move(u);
    return tr;
}

}  // namespace cnsk
