#include "sage/sources.hpp"

#include <algorithm>

#include "sage/errors.hpp"
#include "sage/gradient_file.hpp"
#include "sage/kernels.hpp"
#include "sage/rng.hpp"

namespace sage::pipeline {

MatrixSource::MatrixSource(
    const num::DenseMatrix& g,
    const std::optional<std::vector<std::uint32_t>>& labels)
    : g_(g) {
    if (labels.has_value()) {
        if (labels->size() != g.rows()) {
            throw ShapeError("MatrixSource: label count does not match rows");
        }
        labels_ = &*labels;
    }
}

std::size_t MatrixSource::sweep(std::size_t block_rows, const BlockFn& fn) {
    const std::size_t n = g_.rows();
    for (std::size_t start = 0; start < n; start += block_rows) {
        const std::size_t count = std::min(block_rows, n - start);
        RowBlock block;
        block.first_index = start;
        block.row_count = count;
        block.dim = g_.cols();
        block.rows = g_.row(start);
        block.labels = labels_ ? labels_->data() + start : nullptr;
        fn(block);
    }
    return n;
}

FileSource::FileSource(std::string path) : path_(std::move(path)) {
    const data::GradientHeader h = data::read_gradient_header(path_);
    dim_ = static_cast<std::size_t>(h.d);
    has_labels_ = h.has_labels;
}

std::size_t FileSource::sweep(std::size_t block_rows, const BlockFn& fn) {
    data::GradientFileReader reader(path_);
    if (static_cast<std::size_t>(reader.header().d) != dim_) {
        throw StreamError(path_ + ": dimension changed between sweeps");
    }
    std::vector<double> buffer;
    std::size_t index = 0;
    while (true) {
        const std::size_t got = reader.read_rows(block_rows, buffer);
        if (got == 0) {
            break;
        }
        RowBlock block;
        block.first_index = index;
        block.row_count = got;
        block.dim = dim_;
        block.rows = buffer.data();
        block.labels = reader.labels().has_value()
                           ? reader.labels()->data() + index
                           : nullptr;
        fn(block);
        index += got;
    }
    return index;
}

LowRankStreamSource::LowRankStreamSource(std::size_t n, std::size_t dim,
                                         std::size_t rank, double noise_sigma,
                                         std::uint64_t seed)
    : n_(n),
      dim_(dim),
      rank_(std::max<std::size_t>(rank, 1)),
      noise_sigma_(noise_sigma),
      seed_(seed),
      factor_(rank_ * dim) {
    Rng rng(seed);
    for (double& v : factor_) {
        v = rng.normal();
    }
}

std::size_t LowRankStreamSource::sweep(std::size_t block_rows,
                                       const BlockFn& fn) {
    std::vector<double> buffer;
    for (std::size_t start = 0; start < n_; start += block_rows) {
        const std::size_t count = std::min(block_rows, n_ - start);
        buffer.assign(count * dim_, 0.0);
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t i = start + r;
            Rng row_rng(mix_seed(seed_, i));
            double* row = buffer.data() + r * dim_;
            for (std::size_t k = 0; k < rank_; ++k) {
                kernels::axpy(row_rng.normal(), factor_.data() + k * dim_,
                              row, dim_);
            }
            if (noise_sigma_ > 0.0) {
                for (std::size_t j = 0; j < dim_; ++j) {
                    row[j] += noise_sigma_ * row_rng.normal();
                }
            }
        }
        RowBlock block;
        block.first_index = start;
        block.row_count = count;
        block.dim = dim_;
        block.rows = buffer.data();
        fn(block);
    }
    return n_;
}

}  // namespace sage::pipeline
