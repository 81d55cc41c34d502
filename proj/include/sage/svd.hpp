#pragma once

#include <cstddef>
#include <vector>

#include "sage/dense.hpp"
#include "sage/eig.hpp"

namespace sage::num {

/// Thin SVD S = U * diag(s) * V^T of a short-wide matrix.
/// `right_factor` holds the unit right singular rows v_j^T (zero rows for
/// singular values under the rank tolerance); `left_factor` is the small
/// square U. No object of the wide dimension beyond right_factor itself
/// is ever formed.
struct ThinSvd {
    std::vector<double> singular_values;  // descending, nonnegative
    DenseMatrix right_factor;             // rows x cols, rows are v_j^T
    DenseMatrix left_factor;              // rows x rows
};

/// Singular values below rank_tol_rel * sigma_max are treated as zero
/// when recovering right singular rows.
inline constexpr double kSvdRankTolRel = 1e-10;

/// Computes the thin SVD of S (rows <= cols) through the eigendecomposition
/// of the small Gram matrix S * S^T. Throws ShapeError when rows > cols.
ThinSvd thin_svd_short_wide(const DenseMatrix& s);

}  // namespace sage::num
