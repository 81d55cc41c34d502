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
#include "sage/sketch.hpp"

namespace sage::scoring {

/// One example's projected-gradient summary.
struct ScoreRecord {
    std::size_t index = 0;
    std::optional<std::uint32_t> label;
    double z_norm = 0.0;  // ||z_i||_2
    double alpha = 0.0;   // <z_hat_i, u>, clamped to [-1, 1]
};

/// Finalized consensus over N normalized projections.
struct ConsensusState {
    std::vector<double> sum_unit;  // running sum of z_hat
    std::size_t count = 0;
    std::vector<double> u;         // unit consensus, or all zeros
    double mean_norm = 0.0;        // ||sum_unit|| / count
    bool degenerate = false;       // u collapsed to zero
};

/// Selected index set.
struct SelectionResult {
    std::vector<std::size_t> indices;  // strictly increasing
    std::size_t budget = 0;
    std::optional<std::map<std::uint32_t, std::size_t>> per_class_quotas;
    bool degenerate_consensus = false;
    bool truncated = false;  // budget exceeded available examples
};

/// Norms at or below this threshold normalize to the zero vector.
double zero_norm_threshold(std::size_t dim);

/// z = S * g through the frozen sketch.
std::vector<double> project(const sketch::FrozenSketch& fs,
                            std::span<const double> g);

/// z / ||z||, or the zero vector when ||z|| is at the noise floor.
std::vector<double> normalize_or_zero(std::span<const double> z);

/// Streaming consensus accumulator. Uses Neumaier-compensated per-
/// component sums; chunk accumulators merged in fixed order keep the
/// result independent of thread count.
class ConsensusAccumulator {
public:
    explicit ConsensusAccumulator(std::size_t dim);

    void add(std::span<const double> z_hat);
    void merge(const ConsensusAccumulator& other);
    std::size_t count() const { return count_; }

    ConsensusState finalize() const;

private:
    std::vector<double> sum_;
    std::vector<double> comp_;
    std::size_t count_ = 0;
};

/// Inner product of unit-or-zero vectors, clamped to [-1, 1].
double agreement(std::span<const double> z_hat, std::span<const double> u);

/// Bounded selection structure: keeps the k best records seen, ordered by
/// (alpha descending, index ascending). O(log k) per offer.
class TopKSelector {
public:
    explicit TopKSelector(std::size_t k);

    void offer(double alpha, std::size_t index);
    std::size_t offered() const { return offered_; }

    /// Selected indices in ascending index order. Resets nothing.
    std::vector<std::size_t> sorted_indices() const;

private:
    std::size_t k_;
    std::size_t offered_ = 0;
    // min-heap on goodness: the worst kept record sits at the front.
    std::vector<std::pair<double, std::size_t>> heap_;
};

/// Top-k by alpha with ties broken toward the smaller index. k >= 1.
/// When k exceeds the record count, everything is selected and the
/// truncated flag is set.
SelectionResult select_top_k(std::span<const ScoreRecord> scores,
                             std::size_t k);

/// Splits budget k across classes proportionally to class size using
/// largest-remainder rounding; quotas are capped at class sizes with
/// surplus redistributed, and every nonempty class receives at least one
/// slot when k is large enough to allow it. Throws BudgetError when k
/// exceeds the total size.
std::map<std::uint32_t, std::size_t> allocate_class_budgets(
    const std::map<std::uint32_t, std::size_t>& class_sizes, std::size_t k);

/// Per-class top-k_c selection. Each record's alpha must already be the
/// agreement against its own class consensus u_c; records must be
/// labeled with a class present in `quotas` (DataError otherwise).
/// Classes listed in `degenerate_classes` mark the result degenerate.
SelectionResult select_class_balanced(
    std::span<const ScoreRecord> scores,
    const std::map<std::uint32_t, std::size_t>& quotas,
    const std::set<std::uint32_t>& degenerate_classes);

/// Score dump: CSV with header index,label,z_norm,alpha.
void write_scores_csv(const std::string& path,
                      std::span<const ScoreRecord> records);

}  // namespace sage::scoring
