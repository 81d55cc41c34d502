#include "sage/dense.hpp"

#include <cmath>
#include <cstring>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"

namespace sage::num {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         const std::vector<double>& vals)
    : rows_(rows), cols_(cols), values_(rows * cols) {
    if (vals.size() != rows * cols) {
        throw ShapeError("DenseMatrix: value count does not match shape");
    }
    std::memcpy(values_.data(), vals.data(), vals.size() * sizeof(double));
}

void DenseMatrix::set_zero() {
    std::memset(values_.data(), 0, values_.size() * sizeof(double));
}

bool DenseMatrix::all_finite() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            return false;
        }
    }
    return true;
}

bool DenseMatrix::operator==(const DenseMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
        return false;
    }
    return std::memcmp(values_.data(), other.values_.data(),
                       values_.size() * sizeof(double)) == 0;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m.at(i, i) = 1.0;
    }
    return m;
}

double frobenius_norm_sq(const DenseMatrix& m) {
    return kernels::sumsq(m.data(), m.size());
}

std::vector<double> matvec(const DenseMatrix& m, std::span<const double> v) {
    if (v.size() != m.cols()) {
        throw ShapeError("matvec: vector length " + std::to_string(v.size()) +
                         " does not match matrix cols " +
                         std::to_string(m.cols()));
    }
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out[r] = kernels::dot(m.row(r), v.data(), m.cols());
    }
    return out;
}

DenseMatrix row_gram(const DenseMatrix& m) {
    DenseMatrix g(m.rows(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = kernels::dot(m.row(i), m.row(j), m.cols());
            g.at(i, j) = v;
            g.at(j, i) = v;
        }
    }
    return g;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree");
    }
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            kernels::axpy(a.at(i, k), b.row(k), out, b.cols());
        }
    }
    return c;
}

DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            t.at(j, i) = m.at(i, j);
        }
    }
    return t;
}

double vec_norm(std::span<const double> v) {
    return std::sqrt(kernels::sumsq(v.data(), v.size()));
}

double vec_dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("vec_dot: length mismatch");
    }
    return kernels::dot(a.data(), b.data(), a.size());
}

}  // namespace sage::num
