#include "sage/kernels.hpp"

// Reference kernels. Reductions accumulate strictly left to right; these
// are the semantics every SIMD variant is tested against.

namespace sage::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double sumsq_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * a[i];
    }
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void scale_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        x[i] *= alpha;
    }
}

void rot_scalar(double* x, double* y, double c, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = c * x[i] - s * y[i];
        const double yi = s * x[i] + c * y[i];
        x[i] = xi;
        y[i] = yi;
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table{dot_scalar, sumsq_scalar, axpy_scalar, scale_scalar,
                           rot_scalar};
    return table;
}

}  // namespace sage::kernels::detail
