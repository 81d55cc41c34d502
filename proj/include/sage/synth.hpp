#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sage/dense.hpp"

namespace sage::data {

/// G = A*B + noise with A (n x rank), B (rank x d) standard normal from
/// the seed; bit-reproducible per seed.
num::DenseMatrix synth_lowrank(std::size_t n, std::size_t d, std::size_t rank,
                               double noise_sigma, std::uint64_t seed);

/// Gaussian blob classification data. Class centers are placed on a
/// seeded random sphere with pairwise distance at least 4*cluster_sigma.
struct BlobDataset {
    num::DenseMatrix features;          // n x d_feat
    std::vector<std::uint32_t> labels;  // values in [0, class_count)
    std::size_t class_count = 0;
    std::uint64_t seed = 0;
};

struct BlobParams {
    std::size_t n = 1000;
    std::size_t d_feat = 16;
    std::size_t class_count = 3;
    double cluster_sigma = 1.0;
    std::uint64_t seed = 29;
    /// 0 disables imbalance; otherwise class c gets weight ratio^c
    /// (geometric class proportions).
    double imbalance_ratio = 0.0;
};

BlobDataset make_blobs(const BlobParams& params);

/// CSV export: feature...,label rows.
void write_blobs_csv(const std::string& path, const BlobDataset& data);

}  // namespace sage::data
