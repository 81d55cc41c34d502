#pragma once

#include <cstddef>
#include <vector>

#include "sage/dense.hpp"

namespace sage::num {

/// Result of a symmetric eigendecomposition. Eigenvalues descending;
/// eigenvector j is column j of `eigenvectors`.
struct EigDecomposition {
    std::vector<double> eigenvalues;
    DenseMatrix eigenvectors;
};

/// Preallocated scratch for sym_eig_inplace so repeated decompositions
/// (the sketch shrink loop) allocate nothing.
class SymEigWorkspace {
public:
    explicit SymEigWorkspace(std::size_t max_dim);

    std::size_t max_dim() const { return max_dim_; }

    /// Eigenvalues (descending) of the last decomposition, first `dim`.
    const std::vector<double>& eigenvalues() const { return evals_; }

    /// Row j of the last decomposition's transposed eigenvector matrix,
    /// i.e. eigenvector j as a contiguous array of length `dim`.
    const double* eigenvector(std::size_t j) const { return vt_.row(perm_[j]); }

    std::size_t footprint_bytes() const;

private:
    friend void sym_eig_inplace(const DenseMatrix&, double, SymEigWorkspace&);

    std::size_t max_dim_;
    DenseMatrix a_;    // working copy, max_dim x max_dim
    DenseMatrix vt_;   // accumulated rotations, rows are eigenvectors
    std::vector<double> evals_;      // sorted descending
    std::vector<double> raw_evals_;  // diagonal order
    std::vector<std::size_t> perm_;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, writing into
/// the workspace. Convergence: off-diagonal Frobenius mass below
/// tol * ||A||_F, capped at 64 sweeps (ConvergenceError beyond that).
/// Input must be square, symmetric to 1e-9 relative asymmetry, and fit
/// in the workspace.
void sym_eig_inplace(const DenseMatrix& a, double tol, SymEigWorkspace& ws);

/// Allocating convenience wrapper around sym_eig_inplace.
EigDecomposition sym_eig(const DenseMatrix& a, double tol);

}  // namespace sage::num
