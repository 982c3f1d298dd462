#pragma once
// Periodic grid, FFTW-backed transforms, frequency cut-offs and the
// projectors built from them.
//
// Coefficients are normalized so that c_k = (1/N^n) sum_x f(x) e^{-i xi_k x};
// a constant field c has c at k = 0 and the rectangle-rule L2 norm obeys
// ||f||^2 = L^n sum_k |c_k|^2 over the full lattice. Storage is the r2c
// half-lattice N^{n-1} x (N/2 + 1); indices 0 < j < N/2 on the last axis
// stand for two modes (j and -j) and carry multiplicity 2 in sums.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "cnsk/numerics.hpp"
#include "cnsk/params.hpp"

namespace cnsk {

struct Grid {
    int n = 2;
    std::size_t N = 64;
    double L = 2.0 * pi;

    std::size_t physical_size() const {
        std::size_t s = 1;
        for (int d = 0; d < n; ++d) s *= N;
        return s;
    }
    std::size_t spectral_size() const { return physical_size() / N * (N / 2 + 1); }
    double spacing() const { return L / static_cast<double>(N); }
    double cell_volume() const { return std::pow(spacing(), n); }
    double volume() const { return std::pow(L, n); }
    /// Largest wavenumber magnitude along one axis, pi N / L.
    double nyquist_wavenumber() const { return pi * static_cast<double>(N) / L; }

    void validate() const {
        if (n != 2 && n != 3) throw ShapeError("grid dimension must be 2 or 3");
        if (N < 4 || (N & (N - 1)) != 0) throw ShapeError("grid N must be a power of two >= 4");
        if (!(L > 0.0)) throw ShapeError("grid L must be positive");
    }

    /// Band resolvability: the axis Nyquist wavenumber must exceed the outer
    /// radius of the high-band transition (2B / sqrt|1-K^2|, or 1 for K = 1).
    void require_resolves(const DerivedParameters& dp) const {
        const double need = dp.regime == Regime::KEqual1
                                ? 1.0
                                : 2.0 * dp.B / std::sqrt(std::abs(dp.one_minus_K2));
        if (!(nyquist_wavenumber() > need)) {
            std::ostringstream msg;
            msg << "grid Nyquist wavenumber " << nyquist_wavenumber()
                << " does not exceed band radius " << need;
            throw ShapeError(msg.str());
        }
    }

    bool operator==(const Grid&) const = default;
};

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Number of threads used by FFTW plans created after the call. A no-op
/// unless built against fftw3_omp.
inline void set_fft_threads(int threads) {
#ifdef CNSK_HAVE_FFTW_OMP
    std::lock_guard lock(detail::fftw_planner_mutex());
    static const bool ok = fftw_init_threads() != 0;
    if (ok) fftw_plan_with_nthreads(std::max(1, threads));
#else
    (void)threads;
#endif
}

/// Transform plans plus per-mode wavevector tables for one grid. Immutable
/// after construction; forward/inverse may be called concurrently.
class SpectralSpace {
public:
    explicit SpectralSpace(const Grid& grid) : grid_(grid) {
        grid_.validate();
        const std::size_t M = grid_.spectral_size();
        const std::size_t half = grid_.N / 2 + 1;
        const int N = static_cast<int>(grid_.N);
        const double dk = 2.0 * pi / grid_.L;
        for (int d = 0; d < grid_.n; ++d) xi_[d].assign(M, 0.0);
        xi2_.assign(M, 0.0);
        multiplicity_.assign(M, 0.0);
        nyquist_.assign(M, 0);
        dealias_.assign(M, 0);
        k_.assign(M, {0, 0, 0});
        for (std::size_t idx = 0; idx < M; ++idx) {
            std::size_t rest = idx;
            std::array<int, 3> k{0, 0, 0};
            const int j = static_cast<int>(rest % half);
            rest /= half;
            k[grid_.n - 1] = j;
            for (int d = grid_.n - 2; d >= 0; --d) {
                const int i = static_cast<int>(rest % grid_.N);
                rest /= grid_.N;
                k[d] = i <= N / 2 ? i : i - N;
            }
            bool nyq = false, keep = true;
            double s = 0.0;
            for (int d = 0; d < grid_.n; ++d) {
                const double x = dk * k[d];
                xi_[d][idx] = x;
                s += x * x;
                if (std::abs(k[d]) == N / 2) nyq = true;
                if (3 * std::abs(k[d]) > N) keep = false;
            }
            k_[idx] = k;
            xi2_[idx] = s;
            nyquist_[idx] = nyq;
            dealias_[idx] = keep;
            multiplicity_[idx] = (j == 0 || j == N / 2) ? 1.0 : 2.0;
        }

        std::array<int, 3> dims{N, N, N};
        std::lock_guard lock(detail::fftw_planner_mutex());
        double* in = fftw_alloc_real(grid_.physical_size());
        fftw_complex* out = fftw_alloc_complex(M);
        forward_ = fftw_plan_dft_r2c(grid_.n, dims.data(), in, out, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r(grid_.n, dims.data(), out, in, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        if (!forward_ || !inverse_) throw ShapeError("FFTW plan creation failed");
    }

    SpectralSpace(const SpectralSpace&) = delete;
    SpectralSpace& operator=(const SpectralSpace&) = delete;

    ~SpectralSpace() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        if (forward_) fftw_destroy_plan(forward_);
        if (inverse_) fftw_destroy_plan(inverse_);
    }

    const Grid& grid() const { return grid_; }
    int dim() const { return grid_.n; }
    std::size_t physical_size() const { return grid_.physical_size(); }
    std::size_t spectral_size() const { return grid_.spectral_size(); }

    /// xi component d at spectral index idx.
    double xi(int d, std::size_t idx) const { return xi_[d][idx]; }
    double xi2(std::size_t idx) const { return xi2_[idx]; }
    double multiplicity(std::size_t idx) const { return multiplicity_[idx]; }
    /// True if any axis index sits at N/2, where the r2c lattice cannot
    /// represent an odd (sign-flipping) multiplier.
    bool nyquist(std::size_t idx) const { return nyquist_[idx] != 0; }
    /// True if every |k_d| <= N/3 (kept by the 2/3 rule).
    bool dealias_keep(std::size_t idx) const { return dealias_[idx] != 0; }
    const std::array<int, 3>& wavenumber(std::size_t idx) const { return k_[idx]; }

    /// Spectral index of integer wavenumber k (with k_last >= 0).
    std::size_t index_of(std::array<int, 3> k) const {
        const long N = static_cast<long>(grid_.N);
        std::size_t idx = 0;
        for (int d = 0; d + 1 < grid_.n; ++d) idx = idx * grid_.N + static_cast<std::size_t>((k[d] % N + N) % N);
        const int j = k[grid_.n - 1];
        if (j < 0 || j > static_cast<int>(N / 2)) throw ShapeError("index_of: last wavenumber must be in [0, N/2]");
        return idx * (grid_.N / 2 + 1) + static_cast<std::size_t>(j);
    }

    void forward(std::span<const double> in, std::span<cplx> out) const {
        check_sizes(in.size(), out.size());
        RealArray buf(in.begin(), in.end());
        ComplexArray res(spectral_size());
        fftw_execute_dft_r2c(forward_, buf.data(), reinterpret_cast<fftw_complex*>(res.data()));
        const double scale = 1.0 / static_cast<double>(physical_size());
        for (std::size_t i = 0; i < res.size(); ++i) out[i] = res[i] * scale;
    }

    void inverse(std::span<const cplx> in, std::span<double> out) const {
        check_sizes(out.size(), in.size());
        // c2r overwrites its input.
        ComplexArray buf(in.begin(), in.end());
        RealArray res(physical_size());
        fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(buf.data()), res.data());
        std::copy(res.begin(), res.end(), out.begin());
    }

    ComplexArray forward(std::span<const double> in) const {
        ComplexArray out(spectral_size());
        forward(in, out);
        return out;
    }
    RealArray inverse(std::span<const cplx> in) const {
        RealArray out(physical_size());
        inverse(in, out);
        return out;
    }

    /// Physical coordinate of axis d at linear index i, minimum-image
    /// convention (in [-L/2, L/2)).
    double centered_coordinate(int d, std::size_t i) const {
        std::size_t stride = 1;
        for (int e = grid_.n - 1; e > d; --e) stride *= grid_.N;
        const long q = static_cast<long>((i / stride) % grid_.N);
        const long N = static_cast<long>(grid_.N);
        const long c = q < N / 2 ? q : q - N;
        return static_cast<double>(c) * grid_.spacing();
    }

private:
    void check_sizes(std::size_t phys, std::size_t spec) const {
        if (phys != physical_size() || spec != spectral_size())
            throw ShapeError("transform buffer size does not match grid");
    }

    Grid grid_;
    std::array<RealArray, 3> xi_;
    RealArray xi2_;
    RealArray multiplicity_;
    std::vector<std::uint8_t> nyquist_;
    std::vector<std::uint8_t> dealias_;
    std::vector<std::array<int, 3>> k_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

/// Physical fields: density perturbation phi and scaled momentum m.
struct State {
    Grid grid;
    RealArray phi;
    std::vector<RealArray> m;

    State() = default;
    explicit State(const Grid& g)
        : grid(g), phi(g.physical_size(), 0.0), m(g.n, RealArray(g.physical_size(), 0.0)) {}

    void check(const Grid& g) const {
        if (!(grid == g) || phi.size() != g.physical_size() || static_cast<int>(m.size()) != g.n)
            throw ShapeError("state does not match grid");
        for (const auto& c : m)
            if (c.size() != g.physical_size()) throw ShapeError("state does not match grid");
    }
};

struct SpectralState {
    Grid grid;
    ComplexArray phi;
    std::vector<ComplexArray> m;

    SpectralState() = default;
    explicit SpectralState(const Grid& g)
        : grid(g), phi(g.spectral_size(), 0.0), m(g.n, ComplexArray(g.spectral_size(), 0.0)) {}

    void check(const Grid& g) const {
        if (!(grid == g) || phi.size() != g.spectral_size() || static_cast<int>(m.size()) != g.n)
            throw ShapeError("spectral state does not match grid");
        for (const auto& c : m)
            if (c.size() != g.spectral_size()) throw ShapeError("spectral state does not match grid");
    }

    SpectralState& operator+=(const SpectralState& o) {
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += o.phi[i];
        for (std::size_t d = 0; d < m.size(); ++d)
            for (std::size_t i = 0; i < phi.size(); ++i) m[d][i] += o.m[d][i];
        return *this;
    }
    SpectralState& operator-=(const SpectralState& o) {
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] -= o.phi[i];
        for (std::size_t d = 0; d < m.size(); ++d)
            for (std::size_t i = 0; i < phi.size(); ++i) m[d][i] -= o.m[d][i];
        return *this;
    }
};

inline SpectralState to_spectral(const SpectralSpace& space, const State& s) {
    s.check(space.grid());
    SpectralState out(space.grid());
    space.forward(s.phi, out.phi);
    for (int d = 0; d < space.dim(); ++d) space.forward(s.m[d], out.m[d]);
    return out;
}

inline State to_physical(const SpectralSpace& space, const SpectralState& s) {
    s.check(space.grid());
    State out(space.grid());
    space.inverse(s.phi, out.phi);
    for (int d = 0; d < space.dim(); ++d) space.inverse(s.m[d], out.m[d]);
    return out;
}

/// Largest |c(k) - conj(c(-k))| over the planes of the half-lattice that
/// contain both k and -k (last index 0 or N/2).
inline double conjugate_symmetry_defect(const SpectralSpace& space, std::span<const cplx> c) {
    const int n = space.dim();
    const int N = static_cast<int>(space.grid().N);
    double worst = 0.0;
    for (std::size_t idx = 0; idx < c.size(); ++idx) {
        auto k = space.wavenumber(idx);
        const int j = k[n - 1];
        if (j != 0 && j != N / 2) continue;
        std::array<int, 3> mk{0, 0, 0};
        for (int d = 0; d < n; ++d) mk[d] = -k[d];
        mk[n - 1] = j;  // -0 = 0, -(N/2) aliases to N/2
        worst = std::max(worst, std::abs(c[idx] - std::conj(c[space.index_of(mk)])));
    }
    return worst;
}

inline double conjugate_symmetry_defect(const SpectralSpace& space, const SpectralState& s) {
    double worst = conjugate_symmetry_defect(space, s.phi);
    for (const auto& c : s.m) worst = std::max(worst, conjugate_symmetry_defect(space, c));
    return worst;
}

// ---------------------------------------------------------------------------
// Frequency bands

/// C-infinity step: 0 for s <= 0, 1 for s >= 1.
inline double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / s);
    const double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

enum class Band { Low, Mid, High, P1, PInf };

inline std::string_view to_string(Band b) {
    switch (b) {
        case Band::Low: return "low";
        case Band::Mid: return "mid";
        case Band::High: return "high";
        case Band::P1: return "p1";
        case Band::PInf: return "pinf";
    }
    return "?";
}

/// Transition annuli of the low cut-off (w1 = 1 inside low_in, 0 beyond
/// low_out) and the high cut-off (wInf = 0 inside high_in, 1 beyond high_out).
struct BandRadii {
    double low_in = 0.5, low_out = 1.0;
    double high_in = 0.5, high_out = 1.0;
    bool k_equal_1 = true;

    static BandRadii from(const DerivedParameters& dp) {
        BandRadii r;
        if (dp.regime == Regime::KEqual1) return r;
        r.k_equal_1 = false;
        const double R = dp.B / std::sqrt(std::abs(dp.one_minus_K2));
        const double s2 = std::sqrt(2.0);
        if (R / 2.0 > 1.0) {
            r.low_in = 0.5;
            r.low_out = 1.0;
        } else if (R / s2 > 1.0) {
            r.low_in = R / 2.0;
            r.low_out = 1.0;
        } else {
            r.low_in = R / 2.0;
            r.low_out = R / s2;
        }
        r.high_in = s2 * R;
        r.high_out = 2.0 * R;
        return r;
    }

    double w1(double r) const { return smooth_step((low_out - r) / (low_out - low_in)); }
    double winf(double r) const {
        if (k_equal_1) return 1.0 - w1(r);
        return smooth_step((r - high_in) / (high_out - high_in));
    }
};

struct BandDecomposition {
    BandRadii radii;
    RealArray w1, wM, wInf;

    double weight(Band b, std::size_t idx) const {
        switch (b) {
            case Band::Low:
            case Band::P1: return w1[idx];
            case Band::Mid: return wM[idx];
            case Band::High: return wInf[idx];
            case Band::PInf: return 1.0 - w1[idx];
        }
        return 0.0;
    }
};

inline BandDecomposition build_bands(const SpectralSpace& space, const DerivedParameters& dp) {
    space.grid().require_resolves(dp);
    BandDecomposition b;
    b.radii = BandRadii::from(dp);
    const std::size_t M = space.spectral_size();
    b.w1.resize(M);
    b.wM.resize(M);
    b.wInf.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
        const double r = std::sqrt(space.xi2(i));
        const double w1 = b.radii.w1(r);
        const double wi = b.radii.winf(r);
        b.w1[i] = w1;
        b.wInf[i] = wi;
        b.wM[i] = b.radii.k_equal_1 ? 0.0 : 1.0 - w1 - wi;
    }
    return b;
}

inline void apply_band(const BandDecomposition& bands, Band band, std::span<cplx> c) {
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= bands.weight(band, i);
}

inline SpectralState project_band(const SpectralState& s, const BandDecomposition& bands, Band band) {
    SpectralState out = s;
    if (out.phi.size() != bands.w1.size()) throw ShapeError("bands built on a different grid");
    apply_band(bands, band, out.phi);
    for (auto& c : out.m) apply_band(bands, band, c);
    return out;
}

// ---------------------------------------------------------------------------
// Helmholtz split, derivatives, norms

/// Returns (longitudinal, transverse). phi travels with the longitudinal
/// part. At xi = 0 and on the Nyquist planes all momentum is transverse; the
/// Nyquist convention keeps the split conjugate-symmetric and matches
/// spectral_derivative, under which the transverse part is exactly
/// divergence-free.
inline std::pair<SpectralState, SpectralState> helmholtz_split(const SpectralSpace& space,
                                                               const SpectralState& s) {
    s.check(space.grid());
    const int n = space.dim();
    SpectralState lon(space.grid()), tr(space.grid());
    lon.phi = s.phi;
    for (std::size_t i = 0; i < space.spectral_size(); ++i) {
        const double k2 = space.xi2(i);
        if (k2 == 0.0 || space.nyquist(i)) {
            for (int d = 0; d < n; ++d) tr.m[d][i] = s.m[d][i];
            continue;
        }
        cplx a = 0.0;
        for (int d = 0; d < n; ++d) a += space.xi(d, i) * s.m[d][i];
        for (int d = 0; d < n; ++d) {
            lon.m[d][i] = space.xi(d, i) * a / k2;
            tr.m[d][i] = s.m[d][i] - lon.m[d][i];
        }
    }
    return {std::move(lon), std::move(tr)};
}

/// Coefficients of d/dx_d f, with the Nyquist modes zeroed.
inline ComplexArray spectral_derivative(const SpectralSpace& space, std::span<const cplx> c, int d) {
    ComplexArray out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        out[i] = space.nyquist(i) ? cplx{} : cplx{0.0, space.xi(d, i)} * c[i];
    return out;
}

/// sqrt(L^n sum_k w(k) |c_k|^2) over the full lattice.
template <class W>
double weighted_spectral_norm(const SpectralSpace& space, std::span<const cplx> c, const W& weight) {
    const double s = pairwise_sum(c.size(), [&](std::size_t i) {
        return space.multiplicity(i) * weight(i) * std::norm(c[i]);
    });
    return std::sqrt(space.grid().volume() * s);
}

inline double spectral_l2(const SpectralSpace& space, std::span<const cplx> c) {
    return weighted_spectral_norm(space, c, [](std::size_t) { return 1.0; });
}

/// ||phi||_{H^s_phi} and ||m||_{H^s_m} combined in l2, with weights
/// (1 + |xi|^2)^s.
inline double sobolev_norm(const SpectralSpace& space, const SpectralState& s, int s_phi, int s_m) {
    if (s_phi < 0 || s_m < 0) throw ParameterError("sobolev_norm needs nonnegative orders");
    s.check(space.grid());
    const std::size_t M = space.spectral_size();
    const double total = pairwise_sum(M, [&](std::size_t i) {
        const double w = 1.0 + space.xi2(i);
        double mm = 0.0;
        for (const auto& c : s.m) mm += std::norm(c[i]);
        return space.multiplicity(i) * (std::pow(w, s_phi) * std::norm(s.phi[i]) + std::pow(w, s_m) * mm);
    });
    return std::sqrt(space.grid().volume() * total);
}

/// Rectangle-rule L^p norm of a scalar field; p = infinity gives the grid max.
inline double lp_norm(const Grid& g, std::span<const double> f, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : f) m = std::max(m, std::abs(v));
        return m;
    }
    const double s = pairwise_sum(f.size(), [&](std::size_t i) { return std::pow(std::abs(f[i]), p); });
    return std::pow(g.cell_volume() * s, 1.0 / p);
}

/// L^p norm of the pointwise Euclidean length of a vector field.
inline double lp_norm(const Grid& g, const std::vector<RealArray>& v, double p) {
    const std::size_t P = g.physical_size();
    RealArray mag(P);
    for (std::size_t i = 0; i < P; ++i) {
        double s = 0.0;
        for (const auto& c : v) s += c[i] * c[i];
        mag[i] = std::sqrt(s);
    }
    return lp_norm(g, mag, p);
}

/// Norm of the pair (phi, m) as (||phi||^2 + ||m||^2)^{1/2}; for p = infinity
/// the max of the two.
inline double lp_norm(const State& s, double p) {
    const double a = lp_norm(s.grid, s.phi, p);
    const double b = lp_norm(s.grid, s.m, p);
    return std::isinf(p) ? std::max(a, b) : std::sqrt(a * a + b * b);
}

}  // namespace cnsk
