#pragma once
// Small numerical utilities shared by every module: error types, aligned
// storage for FFT buffers, and deterministic pairwise reduction.

#include <complex>
#include <cstddef>
#include <new>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnsk {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

/// Invalid physical constants or derived-parameter inconsistency.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a scalar function (e.g. vacuum crossing).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Grid/state shape mismatches and other contract violations on fields.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Runtime failure during time stepping (NaN, overflow, vacuum proximity).
struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Allocator returning 64-byte aligned blocks so FFTW can use its SIMD
/// codelets on every buffer regardless of where it was allocated.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), alignment));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using RealArray = std::vector<double, AlignedAllocator<double>>;
using ComplexArray = std::vector<cplx, AlignedAllocator<cplx>>;

namespace detail {
template <class T, class Get>
T pairwise(std::size_t lo, std::size_t hi, const Get& get) {
    if (hi - lo <= 32) {
        T acc{};
        for (std::size_t i = lo; i < hi; ++i) acc += get(i);
        return acc;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise<T>(lo, mid, get) + pairwise<T>(mid, hi, get);
}
}  // namespace detail

/// Pairwise (cascade) sum of get(0..n-1). The split points depend only on n,
/// so the result is bitwise reproducible for a given input.
template <class T = double, class Get>
T pairwise_sum(std::size_t n, const Get& get) {
    if (n == 0) return T{};
    return detail::pairwise<T>(0, n, get);
}

inline double pairwise_sum(std::span<const double> v) {
    return pairwise_sum(v.size(), [&](std::size_t i) { return v[i]; });
}

}  // namespace cnsk
