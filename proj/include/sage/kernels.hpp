#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Dense arithmetic inner loops. Scalar reference kernels plus SIMD
// variants (AVX2 on x86-64, NEON on aarch64) selected once at startup by
// runtime CPU detection. Element-wise kernels (axpy, scale, rot) are
// bit-identical across backends; reductions (dot, sumsq) use per-lane
// accumulators and may differ from the scalar left-to-right order in the
// last bits. Dispatch is fixed for the life of the process unless
// force_backend() is called, so results are reproducible run to run on
// one machine.

namespace sage::kernels {

enum class Backend {
    scalar,
    avx2,
    neon,
};

struct Ops {
    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum_i a[i]^2
    double (*sumsq)(const double* a, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x[i] *= alpha
    void (*scale)(double alpha, double* x, std::size_t n);
    // Givens plane rotation: (x, y) <- (c*x - s*y, s*x + c*y)
    void (*rot)(double* x, double* y, double c, double s, std::size_t n);
};

const char* backend_name(Backend b);

/// Backends usable on this machine (compiled in and supported by the CPU).
std::vector<Backend> available_backends();

bool backend_available(Backend b);

/// Table of kernels for an explicit backend (for equivalence tests).
const Ops& ops(Backend b);

/// The backend the process dispatches to. Defaults to the widest
/// available SIMD variant; overridable with the SAGE_KERNELS environment
/// variable (scalar|avx2|neon) before first use.
Backend active_backend();

/// Force dispatch to a specific backend. Throws sage::ConfigError if it
/// is not available. Not safe to call concurrently with kernel use.
void force_backend(Backend b);

/// Parse a backend name ("auto" selects the default).
Backend parse_backend(const std::string& name);

inline double dot(const double* a, const double* b, std::size_t n);
inline double sumsq(const double* a, std::size_t n);
inline void axpy(double alpha, const double* x, double* y, std::size_t n);
inline void scale(double alpha, double* x, std::size_t n);
inline void rot(double* x, double* y, double c, double s, std::size_t n);

namespace detail {
const Ops& active_ops();
}

inline double dot(const double* a, const double* b, std::size_t n) {
    return detail::active_ops().dot(a, b, n);
}

inline double sumsq(const double* a, std::size_t n) {
    return detail::active_ops().sumsq(a, n);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    detail::active_ops().axpy(alpha, x, y, n);
}

inline void scale(double alpha, double* x, std::size_t n) {
    detail::active_ops().scale(alpha, x, n);
}

inline void rot(double* x, double* y, double c, double s, std::size_t n) {
    detail::active_ops().rot(x, y, c, s, n);
}

}  // namespace sage::kernels
