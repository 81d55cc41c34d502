#include "sage/kernels.hpp"

#if defined(SAGE_HAVE_NEON)

#include <arm_neon.h>

// NEON kernels, 2 doubles per vector, two accumulators for reductions.
// Element-wise kernels use mul+add to round exactly like the scalar
// reference.

namespace sage::kernels::detail {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    if (i + 2 <= n) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        i += 2;
    }
    const float64x2_t sum = vaddq_f64(acc0, acc1);
    double acc = vgetq_lane_f64(sum, 0) + vgetq_lane_f64(sum, 1);
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double sumsq_neon(const double* a, std::size_t n) {
    return dot_neon(a, a, n);
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void scale_neon(double alpha, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) {
        x[i] *= alpha;
    }
}

void rot_neon(double* x, double* y, double c, double s, std::size_t n) {
    const float64x2_t vc = vdupq_n_f64(c);
    const float64x2_t vs = vdupq_n_f64(s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t vx = vld1q_f64(x + i);
        const float64x2_t vy = vld1q_f64(y + i);
        const float64x2_t nx = vsubq_f64(vmulq_f64(vc, vx), vmulq_f64(vs, vy));
        const float64x2_t ny = vaddq_f64(vmulq_f64(vs, vx), vmulq_f64(vc, vy));
        vst1q_f64(x + i, nx);
        vst1q_f64(y + i, ny);
    }
    for (; i < n; ++i) {
        const double xi = c * x[i] - s * y[i];
        const double yi = s * x[i] + c * y[i];
        x[i] = xi;
        y[i] = yi;
    }
}

}  // namespace

const Ops& neon_ops() {
    static const Ops table{dot_neon, sumsq_neon, axpy_neon, scale_neon,
                           rot_neon};
    return table;
}

}  // namespace sage::kernels::detail

#endif  // SAGE_HAVE_NEON
