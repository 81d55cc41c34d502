#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sage/dense.hpp"
#include "sage/synth.hpp"

namespace sage::data {

/// Multinomial logistic regression: weights (class_count x d_feat) plus a
/// bias per class. Flattened parameter layout is weights row-major then
/// biases, giving gradient dimension class_count * (d_feat + 1).
struct LogRegModel {
    num::DenseMatrix weights;
    std::vector<double> bias;

    std::size_t class_count() const { return weights.rows(); }
    std::size_t d_feat() const { return weights.cols(); }
    std::size_t grad_dim() const { return class_count() * (d_feat() + 1); }
};

LogRegModel make_model(std::size_t class_count, std::size_t d_feat);

/// Class probabilities for one example (stable softmax).
std::vector<double> predict_proba(const LogRegModel& model,
                                  std::span<const double> x);

/// Softmax cross-entropy loss of one example.
double example_loss(const LogRegModel& model, std::span<const double> x,
                    std::uint32_t y);

/// Per-example gradient, flattened (weights then bias), written to `out`
/// (length grad_dim).
void example_gradient(const LogRegModel& model, std::span<const double> x,
                      std::uint32_t y, std::span<double> out);

/// Gradient rows for the given examples (default all), one per row.
num::DenseMatrix per_example_gradients(
    const LogRegModel& model, const BlobDataset& dataset,
    std::span<const std::size_t> example_ids = {});

/// Deterministic 80/20 split of [0, n).
struct Split {
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
};
Split make_split(std::size_t n, std::uint64_t seed);

struct TrainOptions {
    std::size_t epochs = 40;
    double lr = 0.5;
    std::size_t batch_size = 32;
};

struct TrainResult {
    LogRegModel model;
    double accuracy = 0.0;  // top-1 on the held-out split
    std::size_t train_count = 0;
};

/// Mini-batch gradient descent on `subset` (dataset ids; empty optional
/// trains on the whole 80% pool), evaluated on the held-out 20%.
/// Deterministic per seed. Throws BudgetError on an empty subset.
TrainResult train_logreg(const BlobDataset& dataset,
                         const std::optional<std::vector<std::size_t>>& subset,
                         const TrainOptions& opts, std::uint64_t seed);

/// Parameter snapshot used as the gradient source: one warmup epoch on a
/// seeded random 10% of the training pool.
LogRegModel warmup_model(const BlobDataset& dataset,
                         std::span<const std::size_t> pool,
                         const TrainOptions& opts, std::uint64_t seed);

}  // namespace sage::data
