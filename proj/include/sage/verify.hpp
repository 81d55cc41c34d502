#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sage/dense.hpp"
#include "sage/scoring.hpp"
#include "sage/sketch.hpp"

// Brute-force oracles and bound checkers. Everything here materializes
// dense objects the streaming paths never form, so all entry points are
// guarded to oracle scale (D <= 512, N <= 5000).

namespace sage::verify {

inline constexpr std::size_t kMaxOracleDim = 512;
inline constexpr std::size_t kMaxOracleRows = 5000;

/// Verdict on the sketch guarantee 0 <= G^T G - S^T S <= (2/ell) tail_k.
struct SandwichReport {
    double min_eig_diff = 0.0;
    double max_eig_diff = 0.0;
    std::map<std::size_t, double> bounds;  // k -> (2/ell) * tail_energy(k)
    bool pass = false;
    std::size_t k_max = 0;
    std::size_t ell = 0;
    double tol_psd = 0.0;
    double tol_bound = 0.0;
};

/// Verdict on an energy/alignment inequality.
struct LemmaCheck {
    bool applicable = true;  // false when a selected alpha is not positive
    double xi = 0.0;         // min selected alpha
    double lhs = 0.0;
    double rhs = 0.0;
    double projected = 0.0;  // corollary only: <mean z, u>, the middle term
    double identity_max_rel = 0.0;  // worst <z,u> vs z_norm*alpha deviation
    bool pass = false;
};

/// Dense reference scores with everything materialized.
struct OracleScores {
    std::vector<scoring::ScoreRecord> records;        // alpha vs global u
    std::vector<scoring::ScoreRecord> class_records;  // alpha vs own u_c
    num::DenseMatrix z_rows;                          // N x ell_eff
    std::vector<double> u;
    std::map<std::uint32_t, std::vector<double>> u_class;
    bool degenerate = false;
    std::set<std::uint32_t> degenerate_classes;
};

/// Exact G^T G, symmetrized. ScaleGuardError beyond oracle scale.
num::DenseMatrix exact_gram(const num::DenseMatrix& g);

/// ||G - G_k||_F^2 from the exact Gram spectrum.
double tail_energy(const num::DenseMatrix& g, std::size_t k);

/// Both sides of the sketch guarantee for k = 0..k_max.
SandwichReport check_psd_sandwich(const num::DenseMatrix& g,
                                  const sketch::FrozenSketch& frozen,
                                  std::size_t k_max);

/// Default bound range for a sketch of size ell: k <= ceil(ell/2).
std::size_t default_k_max(std::size_t ell);

/// Naive dense Phase II: projections, consensus, agreement scores, and
/// per-class variants when labels are given.
OracleScores naive_scores(
    const num::DenseMatrix& g, const sketch::FrozenSketch& frozen,
    const std::optional<std::vector<std::uint32_t>>& labels);

/// Energy inequality: sum z_norm^2 alpha^2 >= xi^2 sum z_norm^2 over T,
/// plus the identity <z_i,u> = z_norm_i * alpha_i checked to 1e-10
/// relative against the materialized z rows.
LemmaCheck check_lemma1(std::span<const scoring::ScoreRecord> scores,
                        std::span<const std::size_t> selected,
                        const num::DenseMatrix& z_rows,
                        std::span<const double> u);

/// Mean-alignment bound: ||mean_T z|| >= xi * mean_T ||z|| - 1e-10.
LemmaCheck check_corollary(std::span<const scoring::ScoreRecord> scores,
                           std::span<const std::size_t> selected,
                           const num::DenseMatrix& z_rows,
                           std::span<const double> u);

/// One row of the machine-readable verification report.
struct CheckRow {
    std::string check;
    std::string param;
    double value = 0.0;
    double bound = 0.0;
    std::string status;  // "pass", "fail", or "skip"
};

/// CSV with header check,param,value,bound,pass.
void write_check_csv(const std::string& path,
                     std::span<const CheckRow> rows);

}  // namespace sage::verify
