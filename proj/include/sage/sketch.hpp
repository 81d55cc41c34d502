#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "sage/dense.hpp"
#include "sage/eig.hpp"

namespace sage::sketch {

/// Immutable snapshot of a sketch taken for scoring. Zero rows dropped.
class FrozenSketch {
public:
    FrozenSketch(num::DenseMatrix matrix, std::uint64_t source_count,
                 std::size_t ell)
        : matrix_(std::move(matrix)),
          source_count_(source_count),
          ell_(ell) {}

    const num::DenseMatrix& matrix() const { return matrix_; }
    std::uint64_t source_count() const { return source_count_; }
    std::size_t ell() const { return ell_; }
    std::size_t dim() const { return matrix_.cols(); }

private:
    num::DenseMatrix matrix_;
    std::uint64_t source_count_;
    std::size_t ell_;
};

/// Streaming Frequent Directions sketch over gradient rows.
///
/// Rows are written into free rows of a 2*ell buffer; when the buffer
/// fills, a shrink compacts it back to at most ell live rows: take the
/// thin SVD of the buffer, set delta to the (ell+1)-th largest squared
/// singular value, and rebuild row j as sqrt(max(sigma_j^2 - delta, 0))
/// times the j-th right singular row. All workspace is allocated up
/// front, so memory is O(ell * dim) for any stream length and the
/// streaming loop performs no allocations.
///
/// Single-writer: one instance per logical thread of execution.
class SketchState {
public:
    /// Requires 2 <= ell <= dim; throws ConfigError otherwise.
    SketchState(std::size_t ell, std::size_t dim);

    /// Appends one gradient row; shrinks automatically when the buffer
    /// fills. Throws DataError on non-finite entries, ShapeError on a
    /// length mismatch, StateError after freeze().
    void insert(std::span<const double> g);

    /// Compacts the buffer down to at most ell live rows. Invoked
    /// internally when full; exposed for tests.
    void shrink();

    /// Takes the scoring snapshot (no extra shrink; a partial buffer is
    /// kept verbatim). The state is unusable afterward. Throws
    /// StateError when nothing was inserted.
    FrozenSketch freeze();

    std::size_t ell() const { return ell_; }
    std::size_t dim() const { return dim_; }
    std::size_t occupied() const { return occupied_; }
    std::uint64_t inserted_total() const { return inserted_total_; }
    std::uint64_t shrink_count() const { return shrink_count_; }
    double last_delta() const { return last_delta_; }
    const num::DenseMatrix& buffer() const { return buffer_; }

    /// Bytes of numeric storage held (buffer plus shrink workspace);
    /// fixed at construction.
    std::size_t footprint_bytes() const;

private:
    void check_usable(const char* op) const;

    std::size_t ell_;
    std::size_t dim_;
    std::size_t gram_dim_;        // min(2*ell, dim)
    num::DenseMatrix buffer_;     // 2*ell x dim
    num::DenseMatrix gram_;       // gram_dim x gram_dim
    num::DenseMatrix scratch_;    // ell x dim, shrink output staging
    num::SymEigWorkspace eig_ws_;
    std::size_t occupied_ = 0;
    std::uint64_t inserted_total_ = 0;
    std::uint64_t shrink_count_ = 0;
    double last_delta_ = 0.0;
    bool frozen_ = false;
};

}  // namespace sage::sketch
