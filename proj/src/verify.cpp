#include "sage/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sage/eig.hpp"
#include "sage/errors.hpp"
#include "sage/kernels.hpp"

namespace sage::verify {

namespace {

void guard_scale(const num::DenseMatrix& g, const char* what) {
    if (g.cols() > kMaxOracleDim) {
        throw ScaleGuardError(std::string(what) + ": dimension " +
                              std::to_string(g.cols()) +
                              " exceeds the oracle guard of " +
                              std::to_string(kMaxOracleDim));
    }
    if (g.rows() > kMaxOracleRows) {
        throw ScaleGuardError(std::string(what) + ": row count " +
                              std::to_string(g.rows()) +
                              " exceeds the oracle guard of " +
                              std::to_string(kMaxOracleRows));
    }
}

std::vector<double> gram_spectrum(const num::DenseMatrix& g) {
    const num::DenseMatrix gram = exact_gram(g);
    return num::sym_eig(gram, 1e-12).eigenvalues;
}

double tail_from_spectrum(const std::vector<double>& evals, std::size_t k) {
    double tail = 0.0;
    for (std::size_t j = evals.size(); j > k; --j) {
        tail += std::max(evals[j - 1], 0.0);
    }
    return tail;
}

}  // namespace

num::DenseMatrix exact_gram(const num::DenseMatrix& g) {
    guard_scale(g, "exact_gram");
    const std::size_t n = g.rows();
    const std::size_t d = g.cols();
    num::DenseMatrix gram(d, d);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = g.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            if (row[i] != 0.0) {
                kernels::axpy(row[i], row, gram.row(i), d);
            }
        }
    }
    // Kill rounding asymmetry.
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double v = 0.5 * (gram.at(i, j) + gram.at(j, i));
            gram.at(i, j) = v;
            gram.at(j, i) = v;
        }
    }
    return gram;
}

double tail_energy(const num::DenseMatrix& g, std::size_t k) {
    guard_scale(g, "tail_energy");
    if (k > std::min(g.rows(), g.cols())) {
        throw ShapeError("tail_energy: k exceeds min(N, D)");
    }
    return tail_from_spectrum(gram_spectrum(g), k);
}

std::size_t default_k_max(std::size_t ell) {
    return (ell + 1) / 2;
}

SandwichReport check_psd_sandwich(const num::DenseMatrix& g,
                                  const sketch::FrozenSketch& frozen,
                                  std::size_t k_max) {
    guard_scale(g, "check_psd_sandwich");
    if (frozen.dim() != g.cols()) {
        throw ShapeError("check_psd_sandwich: sketch and matrix dimensions "
                         "disagree");
    }

    const double g_energy = num::frobenius_norm_sq(g);
    const num::DenseMatrix gram_g = exact_gram(g);
    const num::DenseMatrix gram_s = exact_gram(frozen.matrix());

    const std::size_t d = g.cols();
    num::DenseMatrix diff(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            diff.at(i, j) = gram_g.at(i, j) - gram_s.at(i, j);
        }
    }
    const std::vector<double> diff_evals = num::sym_eig(diff, 1e-12).eigenvalues;
    const std::vector<double> g_evals = num::sym_eig(gram_g, 1e-12).eigenvalues;

    SandwichReport rep;
    rep.ell = frozen.ell();
    rep.k_max = k_max;
    rep.min_eig_diff = diff_evals.back();
    rep.max_eig_diff = diff_evals.front();
    rep.tol_psd = 1e-8 * g_energy;
    rep.tol_bound = 1e-8 * g_energy;

    bool ok = rep.min_eig_diff >= -rep.tol_psd;
    for (std::size_t k = 0; k <= k_max; ++k) {
        const double bound =
            (2.0 / static_cast<double>(frozen.ell())) *
            tail_from_spectrum(g_evals, k);
        rep.bounds[k] = bound;
        if (rep.max_eig_diff > bound + rep.tol_bound) {
            ok = false;
        }
    }
    rep.pass = ok;
    return rep;
}

OracleScores naive_scores(
    const num::DenseMatrix& g, const sketch::FrozenSketch& frozen,
    const std::optional<std::vector<std::uint32_t>>& labels) {
    guard_scale(g, "naive_scores");
    if (labels.has_value() && labels->size() != g.rows()) {
        throw ShapeError("naive_scores: label count does not match rows");
    }

    const std::size_t n = g.rows();
    const std::size_t ell_eff = frozen.matrix().rows();

    OracleScores out;
    out.z_rows = num::DenseMatrix(n, ell_eff);
    num::DenseMatrix z_hat(n, ell_eff);

    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> z =
            num::matvec(frozen.matrix(), g.row_span(i));
        std::copy(z.begin(), z.end(), out.z_rows.row(i));
        const std::vector<double> zh = scoring::normalize_or_zero(z);
        std::copy(zh.begin(), zh.end(), z_hat.row(i));
    }

    // Naive single-pass mean of the normalized projections.
    std::vector<double> mean(ell_eff, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < ell_eff; ++j) {
            mean[j] += z_hat.at(i, j);
        }
    }
    for (double& v : mean) {
        v /= static_cast<double>(n);
    }
    out.u = scoring::normalize_or_zero(mean);
    out.degenerate = (num::vec_norm(out.u) == 0.0);

    out.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        scoring::ScoreRecord& r = out.records[i];
        r.index = i;
        if (labels.has_value()) {
            r.label = (*labels)[i];
        }
        r.z_norm = num::vec_norm(out.z_rows.row_span(i));
        r.alpha = scoring::agreement(z_hat.row_span(i), out.u);
    }

    if (labels.has_value()) {
        std::map<std::uint32_t, std::vector<double>> class_mean;
        std::map<std::uint32_t, std::size_t> class_count;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t c = (*labels)[i];
            auto it = class_mean
                          .try_emplace(c, std::vector<double>(ell_eff, 0.0))
                          .first;
            for (std::size_t j = 0; j < ell_eff; ++j) {
                it->second[j] += z_hat.at(i, j);
            }
            ++class_count[c];
        }
        for (auto& [c, m] : class_mean) {
            for (double& v : m) {
                v /= static_cast<double>(class_count[c]);
            }
            out.u_class[c] = scoring::normalize_or_zero(m);
            if (num::vec_norm(out.u_class[c]) == 0.0) {
                out.degenerate_classes.insert(c);
            }
        }
        out.class_records = out.records;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t c = (*labels)[i];
            out.class_records[i].alpha =
                scoring::agreement(z_hat.row_span(i), out.u_class[c]);
        }
    }

    return out;
}

LemmaCheck check_lemma1(std::span<const scoring::ScoreRecord> scores,
                        std::span<const std::size_t> selected,
                        const num::DenseMatrix& z_rows,
                        std::span<const double> u) {
    LemmaCheck chk;
    chk.xi = 1.0;
    for (const std::size_t i : selected) {
        const scoring::ScoreRecord& r = scores[i];
        if (r.alpha <= 0.0) {
            chk.applicable = false;
            return chk;
        }
        chk.xi = std::min(chk.xi, r.alpha);
    }

    double energy = 0.0;
    double total = 0.0;
    for (const std::size_t i : selected) {
        const scoring::ScoreRecord& r = scores[i];
        const double zu = num::vec_dot(z_rows.row_span(i), u);
        const double predicted = r.z_norm * r.alpha;
        const double scale = std::max({std::abs(zu), std::abs(predicted),
                                       1e-30});
        chk.identity_max_rel =
            std::max(chk.identity_max_rel, std::abs(zu - predicted) / scale);
        energy += predicted * predicted;
        total += r.z_norm * r.z_norm;
    }
    chk.lhs = energy;
    chk.rhs = chk.xi * chk.xi * total;
    chk.pass = chk.identity_max_rel <= 1e-10 &&
               chk.lhs >= chk.rhs - 1e-10 * std::max(chk.rhs, 1.0);
    return chk;
}

LemmaCheck check_corollary(std::span<const scoring::ScoreRecord> scores,
                           std::span<const std::size_t> selected,
                           const num::DenseMatrix& z_rows,
                           std::span<const double> u) {
    LemmaCheck chk;
    if (selected.empty()) {
        chk.applicable = false;
        return chk;
    }
    chk.xi = 1.0;
    for (const std::size_t i : selected) {
        if (scores[i].alpha <= 0.0) {
            chk.applicable = false;
            return chk;
        }
        chk.xi = std::min(chk.xi, scores[i].alpha);
    }

    const std::size_t dim = z_rows.cols();
    std::vector<double> mean(dim, 0.0);
    double norm_sum = 0.0;
    for (const std::size_t i : selected) {
        kernels::axpy(1.0, z_rows.row(i), mean.data(), dim);
        norm_sum += scores[i].z_norm;
    }
    const double k = static_cast<double>(selected.size());
    kernels::scale(1.0 / k, mean.data(), dim);

    chk.lhs = num::vec_norm(mean);
    chk.rhs = chk.xi * norm_sum / k;
    // Each step of the chain: ||mean|| >= <mean, u> >= xi * mean norm.
    chk.projected = num::vec_dot(mean, u);
    chk.pass = chk.lhs >= chk.projected - 1e-10 &&
               chk.projected >= chk.rhs - 1e-10 &&
               chk.lhs >= chk.rhs - 1e-10;
    return chk;
}

void write_check_csv(const std::string& path,
                     std::span<const CheckRow> rows) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open verification CSV for writing: " + path);
    }
    out << "check,param,value,bound,pass\n";
    char buf[80];
    for (const CheckRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.value, r.bound);
        out << r.check << ',' << r.param << ',' << buf << ',' << r.status
            << '\n';
    }
    if (!out) {
        throw IoError("failed writing verification CSV: " + path);
    }
}

}  // namespace sage::verify
