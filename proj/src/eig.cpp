#include "sage/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"

namespace sage::num {

namespace {

constexpr int kSweepCap = 64;
constexpr double kAsymmetryTol = 1e-9;
constexpr double kMinTol = 1e-15;

double max_asymmetry(const DenseMatrix& a) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            worst = std::max(worst, std::abs(a.at(i, j) - a.at(j, i)));
        }
    }
    return worst;
}

double off_diag_mass(const DenseMatrix& a, std::size_t m) {
    double acc = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = p + 1; q < m; ++q) {
            acc += 2.0 * a.at(p, q) * a.at(p, q);
        }
    }
    return std::sqrt(acc);
}

}  // namespace

SymEigWorkspace::SymEigWorkspace(std::size_t max_dim)
    : max_dim_(max_dim),
      a_(max_dim, max_dim),
      vt_(max_dim, max_dim),
      evals_(max_dim, 0.0),
      raw_evals_(max_dim, 0.0),
      perm_(max_dim, 0) {}

std::size_t SymEigWorkspace::footprint_bytes() const {
    return a_.footprint_bytes() + vt_.footprint_bytes() +
           (evals_.capacity() + raw_evals_.capacity()) * sizeof(double) +
           perm_.capacity() * sizeof(std::size_t);
}

void sym_eig_inplace(const DenseMatrix& input, double tol,
                     SymEigWorkspace& ws) {
    const std::size_t m = input.rows();
    if (m == 0 || input.cols() != m) {
        throw ShapeError("sym_eig: matrix must be square and nonempty");
    }
    if (m > ws.max_dim_) {
        throw ShapeError("sym_eig: matrix exceeds workspace capacity");
    }

    const double norm_f = std::sqrt(frobenius_norm_sq(input));
    if (max_asymmetry(input) > kAsymmetryTol * std::max(norm_f, 1e-300)) {
        throw ShapeError("sym_eig: input is not symmetric");
    }

    // Work on the symmetrized copy; rotations preserve exact symmetry of
    // the stored upper/lower halves below.
    DenseMatrix& a = ws.a_;
    DenseMatrix& vt = ws.vt_;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            a.at(i, j) = 0.5 * (input.at(i, j) + input.at(j, i));
            vt.at(i, j) = (i == j) ? 1.0 : 0.0;
        }
    }

    const double tol_eff = std::max(tol, kMinTol);
    const double stop = tol_eff * norm_f;

    int sweep = 0;
    double off = off_diag_mass(a, m);
    while (off > stop && sweep < kSweepCap) {
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t =
                    (theta >= 0.0)
                        ? 1.0 / (theta + std::sqrt(theta * theta + 1.0))
                        : 1.0 / (theta - std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t i = 0; i < m; ++i) {
                    if (i == p || i == q) {
                        continue;
                    }
                    const double aip = a.at(i, p);
                    const double aiq = a.at(i, q);
                    const double nip = c * aip - s * aiq;
                    const double niq = s * aip + c * aiq;
                    a.at(i, p) = nip;
                    a.at(p, i) = nip;
                    a.at(i, q) = niq;
                    a.at(q, i) = niq;
                }
                a.at(p, p) = app - t * apq;
                a.at(q, q) = aqq + t * apq;
                a.at(p, q) = 0.0;
                a.at(q, p) = 0.0;

                kernels::rot(vt.row(p), vt.row(q), c, s, m);
            }
        }
        ++sweep;
        off = off_diag_mass(a, m);
    }

    if (off > stop) {
        throw ConvergenceError(
            "sym_eig: no convergence after " + std::to_string(kSweepCap) +
                " sweeps, off-diagonal residual " + std::to_string(off),
            off);
    }

    for (std::size_t i = 0; i < m; ++i) {
        ws.raw_evals_[i] = a.at(i, i);
        ws.perm_[i] = i;
    }
    // perm_ maps sorted position -> vt row; ties keep diagonal order.
    // Insertion sort: stable, allocation-free, m is at most a few dozen.
    for (std::size_t i = 1; i < m; ++i) {
        const std::size_t key = ws.perm_[i];
        const double val = ws.raw_evals_[key];
        std::size_t j = i;
        while (j > 0 && ws.raw_evals_[ws.perm_[j - 1]] < val) {
            ws.perm_[j] = ws.perm_[j - 1];
            --j;
        }
        ws.perm_[j] = key;
    }
    for (std::size_t i = 0; i < m; ++i) {
        ws.evals_[i] = ws.raw_evals_[ws.perm_[i]];
    }
}

EigDecomposition sym_eig(const DenseMatrix& a, double tol) {
    SymEigWorkspace ws(a.rows());
    sym_eig_inplace(a, tol, ws);

    const std::size_t m = a.rows();
    EigDecomposition out;
    out.eigenvalues.assign(ws.eigenvalues().begin(),
                           ws.eigenvalues().begin() + m);
    out.eigenvectors = DenseMatrix(m, m);
    for (std::size_t j = 0; j < m; ++j) {
        const double* v = ws.eigenvector(j);
        for (std::size_t i = 0; i < m; ++i) {
            out.eigenvectors.at(i, j) = v[i];
        }
    }
    return out;
}

}  // namespace sage::num
