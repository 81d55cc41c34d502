#include "sage/svd.hpp"

#include <cmath>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"

namespace sage::num {

ThinSvd thin_svd_short_wide(const DenseMatrix& s) {
    const std::size_t ell = s.rows();
    const std::size_t dim = s.cols();
    if (ell > dim) {
        throw ShapeError("thin_svd_short_wide: matrix has more rows than "
                         "columns");
    }
    if (ell == 0) {
        throw ShapeError("thin_svd_short_wide: empty matrix");
    }

    const DenseMatrix gram = row_gram(s);
    const EigDecomposition eig = sym_eig(gram, 1e-12);

    ThinSvd out;
    out.singular_values.resize(ell);
    out.right_factor = DenseMatrix(ell, dim);
    out.left_factor = DenseMatrix(ell, ell);

    double sigma_max = 0.0;
    for (std::size_t j = 0; j < ell; ++j) {
        const double sigma = std::sqrt(std::max(eig.eigenvalues[j], 0.0));
        out.singular_values[j] = sigma;
        sigma_max = std::max(sigma_max, sigma);
        for (std::size_t i = 0; i < ell; ++i) {
            out.left_factor.at(i, j) = eig.eigenvectors.at(i, j);
        }
    }

    const double rank_tol = kSvdRankTolRel * sigma_max;
    for (std::size_t j = 0; j < ell; ++j) {
        const double sigma = out.singular_values[j];
        if (sigma <= rank_tol || sigma == 0.0) {
            continue;  // row stays zero
        }
        // v_j^T = (1/sigma) * u_j^T * S
        double* row = out.right_factor.row(j);
        for (std::size_t i = 0; i < ell; ++i) {
            kernels::axpy(out.left_factor.at(i, j), s.row(i), row, dim);
        }
        kernels::scale(1.0 / sigma, row, dim);
    }

    return out;
}

}  // namespace sage::num
