#include "sage/sketch.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"

namespace sage::sketch {

namespace {

// Squared shrink weights at or below this fraction of the top eigenvalue
// are rounded to exact zero. The Jacobi eigensolver leaves O(eps)
// relative noise in trailing eigenvalues; without a floor that noise
// survives as rows of norm ~1e-8 * sigma_max.
constexpr double kWeightFloorRel = 1e-14;

constexpr double kEigTol = 1e-12;

}  // namespace

SketchState::SketchState(std::size_t ell, std::size_t dim)
    : ell_(ell),
      dim_(dim),
      gram_dim_(std::min(2 * ell, dim)),
      buffer_(2 * ell, dim),
      gram_(gram_dim_, gram_dim_),
      scratch_(ell, dim),
      eig_ws_(gram_dim_) {
    if (ell < 2) {
        throw ConfigError("sketch: ell must be at least 2, got " +
                          std::to_string(ell));
    }
    if (ell > dim) {
        throw ConfigError("sketch: ell (" + std::to_string(ell) +
                          ") must not exceed dim (" + std::to_string(dim) +
                          ")");
    }
}

void SketchState::check_usable(const char* op) const {
    if (frozen_) {
        throw StateError(std::string("sketch: ") + op +
                         " called after freeze");
    }
}

void SketchState::insert(std::span<const double> g) {
    check_usable("insert");
    if (g.size() != dim_) {
        throw ShapeError("sketch: gradient length " +
                         std::to_string(g.size()) + " does not match dim " +
                         std::to_string(dim_));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i])) {
            throw DataError("sketch: non-finite entry at component " +
                            std::to_string(i) + " of gradient " +
                            std::to_string(inserted_total_));
        }
    }

    std::memcpy(buffer_.row(occupied_), g.data(), dim_ * sizeof(double));
    ++occupied_;
    ++inserted_total_;

    if (occupied_ == 2 * ell_) {
        shrink();
    }
}

void SketchState::shrink() {
    check_usable("shrink");

    const bool rows_path = (2 * ell_ <= dim_);
    if (rows_path) {
        // Gram of buffer rows, 2*ell x 2*ell.
        for (std::size_t i = 0; i < 2 * ell_; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const double v =
                    kernels::dot(buffer_.row(i), buffer_.row(j), dim_);
                gram_.at(i, j) = v;
                gram_.at(j, i) = v;
            }
        }
    } else {
        // dim < 2*ell: gram of buffer columns, dim x dim. Eigenvectors
        // are then directly the right singular rows.
        gram_.set_zero();
        for (std::size_t r = 0; r < 2 * ell_; ++r) {
            const double* row = buffer_.row(r);
            for (std::size_t i = 0; i < dim_; ++i) {
                if (row[i] != 0.0) {
                    kernels::axpy(row[i], row, gram_.row(i), dim_);
                }
            }
        }
    }

    num::sym_eig_inplace(gram_, kEigTol, eig_ws_);
    const std::vector<double>& evals = eig_ws_.eigenvalues();

    const double lambda_max = std::max(evals[0], 0.0);
    const double delta =
        (gram_dim_ > ell_) ? std::max(evals[ell_], 0.0) : 0.0;
    const double floor = kWeightFloorRel * lambda_max;

    scratch_.set_zero();
    std::size_t kept = 0;
    const std::size_t limit = std::min(ell_, gram_dim_);
    for (std::size_t j = 0; j < limit; ++j) {
        const double w_sq = evals[j] - delta;
        if (w_sq <= floor || w_sq <= 0.0) {
            break;  // weights are nonincreasing in j
        }
        const double w = std::sqrt(w_sq);
        double* out = scratch_.row(kept);
        if (rows_path) {
            const double* u = eig_ws_.eigenvector(j);
            for (std::size_t i = 0; i < 2 * ell_; ++i) {
                kernels::axpy(u[i], buffer_.row(i), out, dim_);
            }
            kernels::scale(w / std::sqrt(evals[j]), out, dim_);
        } else {
            const double* v = eig_ws_.eigenvector(j);
            std::memcpy(out, v, dim_ * sizeof(double));
            kernels::scale(w, out, dim_);
        }
        ++kept;
    }

    buffer_.set_zero();
    if (kept > 0) {
        std::memcpy(buffer_.data(), scratch_.data(),
                    kept * dim_ * sizeof(double));
    }
    occupied_ = kept;
    ++shrink_count_;
    last_delta_ = delta;
}

FrozenSketch SketchState::freeze() {
    check_usable("freeze");
    if (inserted_total_ == 0) {
        throw StateError("sketch: freeze on empty sketch");
    }

    std::size_t nonzero = 0;
    for (std::size_t r = 0; r < occupied_; ++r) {
        if (kernels::sumsq(buffer_.row(r), dim_) > 0.0) {
            ++nonzero;
        }
    }
    num::DenseMatrix out(nonzero, dim_);
    std::size_t next = 0;
    for (std::size_t r = 0; r < occupied_; ++r) {
        if (kernels::sumsq(buffer_.row(r), dim_) > 0.0) {
            std::memcpy(out.row(next), buffer_.row(r),
                        dim_ * sizeof(double));
            ++next;
        }
    }

    frozen_ = true;
    return FrozenSketch(std::move(out), inserted_total_, ell_);
}

std::size_t SketchState::footprint_bytes() const {
    return buffer_.footprint_bytes() + gram_.footprint_bytes() +
           scratch_.footprint_bytes() + eig_ws_.footprint_bytes();
}

}  // namespace sage::sketch
