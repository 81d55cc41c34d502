#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/dense.hpp"

namespace sage::pipeline {

/// One contiguous block of gradient rows handed to a sweep callback.
/// `first_index` is the absolute index of row 0; labels (when present)
/// align with rows.
struct RowBlock {
    std::size_t first_index = 0;
    std::size_t row_count = 0;
    std::size_t dim = 0;
    const double* rows = nullptr;
    const std::uint32_t* labels = nullptr;  // null when unlabeled

    std::span<const double> row(std::size_t r) const {
        return {rows + r * dim, dim};
    }
};

using BlockFn = std::function<void(const RowBlock&)>;

/// Restartable stream of gradient rows; the selection pipeline sweeps it
/// several times (sketch pass, consensus pass, scoring pass) and each
/// sweep must yield the same rows in the same order.
class GradientSource {
public:
    virtual ~GradientSource() = default;

    virtual std::size_t dim() const = 0;
    virtual bool has_labels() const = 0;

    /// Streams every row once, in index order, in blocks of at most
    /// block_rows. Returns the number of rows yielded.
    virtual std::size_t sweep(std::size_t block_rows, const BlockFn& fn) = 0;
};

/// In-memory matrix (borrowed; caller keeps it alive).
class MatrixSource final : public GradientSource {
public:
    MatrixSource(const num::DenseMatrix& g,
                 const std::optional<std::vector<std::uint32_t>>& labels);

    std::size_t dim() const override { return g_.cols(); }
    bool has_labels() const override { return labels_ != nullptr; }
    std::size_t sweep(std::size_t block_rows, const BlockFn& fn) override;

private:
    const num::DenseMatrix& g_;
    const std::vector<std::uint32_t>* labels_ = nullptr;
};

/// Gradient file on disk; every sweep re-reads the values section.
class FileSource final : public GradientSource {
public:
    explicit FileSource(std::string path);

    std::size_t dim() const override { return dim_; }
    bool has_labels() const override { return has_labels_; }
    std::size_t sweep(std::size_t block_rows, const BlockFn& fn) override;

private:
    std::string path_;
    std::size_t dim_ = 0;
    bool has_labels_ = false;
};

/// Synthetic low-rank-plus-noise stream generated on demand; row i is a
/// pure function of (seed, i), so sweeps are repeatable without storing
/// anything of size N. Used by the bench tool.
class LowRankStreamSource final : public GradientSource {
public:
    LowRankStreamSource(std::size_t n, std::size_t dim, std::size_t rank,
                        double noise_sigma, std::uint64_t seed);

    std::size_t dim() const override { return dim_; }
    bool has_labels() const override { return false; }
    std::size_t sweep(std::size_t block_rows, const BlockFn& fn) override;

private:
    std::size_t n_;
    std::size_t dim_;
    std::size_t rank_;
    double noise_sigma_;
    std::uint64_t seed_;
    std::vector<double> factor_;  // rank x dim, fixed row basis
};

}  // namespace sage::pipeline
