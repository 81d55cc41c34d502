#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sage/memtrack.hpp"

namespace sage::num {

/// Row-major dense matrix of doubles. Storage is tracked by
/// sage::memtrack so sketch-path memory can be measured.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), values_(rows * cols) {}

    DenseMatrix(std::size_t rows, std::size_t cols,
                const std::vector<double>& vals);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return rows_ * cols_; }

    double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const {
        return values_[r * cols_ + c];
    }

    double* row(std::size_t r) { return values_.data() + r * cols_; }
    const double* row(std::size_t r) const {
        return values_.data() + r * cols_;
    }

    std::span<double> row_span(std::size_t r) {
        return {row(r), cols_};
    }
    std::span<const double> row_span(std::size_t r) const {
        return {row(r), cols_};
    }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    void set_zero();
    bool all_finite() const;

    /// Bytes of numeric storage held by this matrix.
    std::size_t footprint_bytes() const {
        return values_.size() * sizeof(double);
    }

    bool operator==(const DenseMatrix& other) const;

    static DenseMatrix identity(std::size_t n);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    memtrack::TrackedStorage values_;
};

/// Sum of squared entries.
double frobenius_norm_sq(const DenseMatrix& m);

/// y = M * v. Each output entry is one kernel dot over a row.
/// Throws ShapeError on dimension mismatch.
std::vector<double> matvec(const DenseMatrix& m, std::span<const double> v);

/// Row Gram matrix M * M^T, exactly symmetric by construction.
DenseMatrix row_gram(const DenseMatrix& m);

/// C = A * B (small helper for oracle-scale code).
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& m);

double vec_norm(std::span<const double> v);
double vec_dot(std::span<const double> a, std::span<const double> b);

}  // namespace sage::num
