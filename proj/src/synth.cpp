#include "sage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"
#include "sage/rng.hpp"

namespace sage::data {

num::DenseMatrix synth_lowrank(std::size_t n, std::size_t d, std::size_t rank,
                               double noise_sigma, std::uint64_t seed) {
    if (rank > std::min(n, d)) {
        throw ConfigError("synth_lowrank: rank exceeds min(n, d)");
    }
    Rng rng(seed);
    num::DenseMatrix a(n, rank);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.data()[i] = rng.normal();
    }
    num::DenseMatrix b(rank, d);
    for (std::size_t i = 0; i < b.size(); ++i) {
        b.data()[i] = rng.normal();
    }

    num::DenseMatrix g(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = g.row(i);
        for (std::size_t r = 0; r < rank; ++r) {
            kernels::axpy(a.at(i, r), b.row(r), row, d);
        }
    }
    if (noise_sigma > 0.0) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            g.data()[i] += noise_sigma * rng.normal();
        }
    }
    return g;
}

namespace {

// Regular simplex vertices in a seeded random orientation: every pair of
// centers sits at the same distance (just above the 4*sigma floor), so
// no class is geometrically preferred. Falls back to rejection-sampled
// sphere points when the feature space is too small for a simplex.
num::DenseMatrix simplex_centers(std::size_t class_count, std::size_t d_feat,
                                 double edge, Rng& rng) {
    // random orthonormal frame q_1..q_C by Gram-Schmidt on Gaussians
    num::DenseMatrix frame(class_count, d_feat);
    for (std::size_t c = 0; c < class_count; ++c) {
        double* row = frame.row(c);
        for (std::size_t j = 0; j < d_feat; ++j) {
            row[j] = rng.normal();
        }
        for (std::size_t p = 0; p < c; ++p) {
            const double proj = kernels::dot(row, frame.row(p), d_feat);
            kernels::axpy(-proj, frame.row(p), row, d_feat);
        }
        const double norm = std::sqrt(kernels::sumsq(row, d_feat));
        kernels::scale(1.0 / norm, row, d_feat);
    }

    // vertex c of the unit-edge simplex: (e_c - 1/C) / sqrt(2), mapped
    // through the frame and scaled to the requested edge length
    const double shift = 1.0 / static_cast<double>(class_count);
    const double scale = edge / std::sqrt(2.0);
    num::DenseMatrix centers(class_count, d_feat);
    for (std::size_t c = 0; c < class_count; ++c) {
        double* row = centers.row(c);
        for (std::size_t v = 0; v < class_count; ++v) {
            const double coord = ((v == c) ? 1.0 : 0.0) - shift;
            kernels::axpy(scale * coord, frame.row(v), row, d_feat);
        }
    }
    return centers;
}

num::DenseMatrix rejection_centers(std::size_t class_count,
                                   std::size_t d_feat, double sigma,
                                   Rng& rng) {
    const double min_dist = 4.0 * sigma;
    double radius = std::max(3.0 * sigma, 1.0);
    num::DenseMatrix centers(class_count, d_feat);
    std::vector<double> candidate(d_feat);

    std::size_t placed = 0;
    int attempts = 0;
    while (placed < class_count) {
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < d_feat; ++j) {
            candidate[j] = rng.normal();
            norm_sq += candidate[j] * candidate[j];
        }
        const double inv = radius / std::sqrt(std::max(norm_sq, 1e-300));
        for (std::size_t j = 0; j < d_feat; ++j) {
            candidate[j] *= inv;
        }

        bool ok = true;
        for (std::size_t c = 0; c < placed; ++c) {
            double dist_sq = 0.0;
            for (std::size_t j = 0; j < d_feat; ++j) {
                const double diff = candidate[j] - centers.at(c, j);
                dist_sq += diff * diff;
            }
            if (dist_sq < min_dist * min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) {
            std::copy(candidate.begin(), candidate.end(),
                      centers.row(placed));
            ++placed;
            attempts = 0;
        } else if (++attempts >= 64) {
            radius *= 1.5;
            placed = 0;
            attempts = 0;
        }
    }
    return centers;
}

num::DenseMatrix place_centers(std::size_t class_count, std::size_t d_feat,
                               double sigma, Rng& rng) {
    const double edge = std::max(4.25 * sigma, 1.0);
    if (d_feat >= class_count) {
        return simplex_centers(class_count, d_feat, edge, rng);
    }
    return rejection_centers(class_count, d_feat, sigma, rng);
}

// Class sizes by largest remainder over the weights; every class gets at
// least one member.
std::vector<std::size_t> apportion_sizes(std::size_t n,
                                         const std::vector<double>& weights) {
    const std::size_t c = weights.size();
    double total = 0.0;
    for (const double w : weights) {
        total += w;
    }
    std::vector<std::size_t> sizes(c, 0);
    std::vector<std::pair<double, std::size_t>> remainders(c);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < c; ++i) {
        const double ideal = static_cast<double>(n) * weights[i] / total;
        sizes[i] = static_cast<std::size_t>(ideal);
        assigned += sizes[i];
        remainders[i] = {ideal - static_cast<double>(sizes[i]), i};
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) {
                      return a.first > b.first;
                  }
                  return a.second < b.second;
              });
    for (std::size_t e = 0; e < n - assigned; ++e) {
        ++sizes[remainders[e % c].second];
    }
    for (std::size_t i = 0; i < c; ++i) {
        if (sizes[i] == 0) {
            // steal one from the largest class
            std::size_t donor = 0;
            for (std::size_t j = 1; j < c; ++j) {
                if (sizes[j] > sizes[donor]) {
                    donor = j;
                }
            }
            --sizes[donor];
            sizes[i] = 1;
        }
    }
    return sizes;
}

}  // namespace

BlobDataset make_blobs(const BlobParams& params) {
    if (params.class_count < 2) {
        throw ConfigError("make_blobs: need at least 2 classes");
    }
    if (params.n < params.class_count) {
        throw ConfigError("make_blobs: n smaller than class count");
    }

    Rng rng(params.seed);
    const num::DenseMatrix centers = place_centers(
        params.class_count, params.d_feat, params.cluster_sigma, rng);

    std::vector<double> weights(params.class_count, 1.0);
    if (params.imbalance_ratio > 0.0) {
        double w = 1.0;
        for (std::size_t c = 0; c < params.class_count; ++c) {
            weights[c] = w;
            w *= params.imbalance_ratio;
        }
    }
    const std::vector<std::size_t> sizes = apportion_sizes(params.n, weights);

    BlobDataset out;
    out.class_count = params.class_count;
    out.seed = params.seed;
    out.labels.reserve(params.n);
    for (std::size_t c = 0; c < params.class_count; ++c) {
        out.labels.insert(out.labels.end(), sizes[c],
                          static_cast<std::uint32_t>(c));
    }
    rng.shuffle(out.labels);

    out.features = num::DenseMatrix(params.n, params.d_feat);
    for (std::size_t i = 0; i < params.n; ++i) {
        const std::uint32_t c = out.labels[i];
        double* row = out.features.row(i);
        for (std::size_t j = 0; j < params.d_feat; ++j) {
            row[j] = centers.at(c, j) + params.cluster_sigma * rng.normal();
        }
    }
    return out;
}

void write_blobs_csv(const std::string& path, const BlobDataset& data) {
    std::ofstream out(path);
    if (!out) {
        throw IoError(path + ": cannot open for writing");
    }
    char buf[40];
    for (std::size_t i = 0; i < data.features.rows(); ++i) {
        for (std::size_t j = 0; j < data.features.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g,",
                          data.features.at(i, j));
            out << buf;
        }
        out << data.labels[i] << '\n';
    }
    if (!out) {
        throw IoError(path + ": write failed");
    }
}

}  // namespace sage::data
