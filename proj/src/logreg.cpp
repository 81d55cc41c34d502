#include "sage/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"
#include "sage/rng.hpp"

namespace sage::data {

LogRegModel make_model(std::size_t class_count, std::size_t d_feat) {
    LogRegModel m;
    m.weights = num::DenseMatrix(class_count, d_feat);
    m.bias.assign(class_count, 0.0);
    return m;
}

std::vector<double> predict_proba(const LogRegModel& model,
                                  std::span<const double> x) {
    const std::size_t c = model.class_count();
    std::vector<double> logits(c);
    for (std::size_t k = 0; k < c; ++k) {
        logits[k] =
            kernels::dot(model.weights.row(k), x.data(), x.size()) +
            model.bias[k];
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        logits[k] = std::exp(logits[k] - peak);
        total += logits[k];
    }
    for (std::size_t k = 0; k < c; ++k) {
        logits[k] /= total;
    }
    return logits;
}

double example_loss(const LogRegModel& model, std::span<const double> x,
                    std::uint32_t y) {
    const std::vector<double> p = predict_proba(model, x);
    return -std::log(std::max(p[y], 1e-300));
}

void example_gradient(const LogRegModel& model, std::span<const double> x,
                      std::uint32_t y, std::span<double> out) {
    const std::size_t c = model.class_count();
    const std::size_t d = model.d_feat();
    if (out.size() != model.grad_dim()) {
        throw ShapeError("example_gradient: output length mismatch");
    }
    std::vector<double> p = predict_proba(model, x);
    p[y] -= 1.0;
    // dL/dW[k] = (p_k - 1[y=k]) * x, dL/db[k] = p_k - 1[y=k]
    for (std::size_t k = 0; k < c; ++k) {
        double* row = out.data() + k * d;
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = p[k] * x[j];
        }
        out[c * d + k] = p[k];
    }
}

num::DenseMatrix per_example_gradients(const LogRegModel& model,
                                       const BlobDataset& dataset,
                                       std::span<const std::size_t> ids) {
    std::vector<std::size_t> all;
    if (ids.empty()) {
        all.resize(dataset.features.rows());
        std::iota(all.begin(), all.end(), 0);
        ids = all;
    }
    num::DenseMatrix g(ids.size(), model.grad_dim());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const std::size_t i = ids[r];
        example_gradient(model, dataset.features.row_span(i),
                         dataset.labels[i], g.row_span(r));
    }
    return g;
}

Split make_split(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed ^ 0x5311f0a2c3d4e5f6ULL);
    rng.shuffle(perm);
    const std::size_t test_n = n / 5;
    Split s;
    s.test_ids.assign(perm.begin(), perm.begin() + test_n);
    s.train_ids.assign(perm.begin() + test_n, perm.end());
    std::sort(s.test_ids.begin(), s.test_ids.end());
    std::sort(s.train_ids.begin(), s.train_ids.end());
    return s;
}

namespace {

void sgd_epochs(LogRegModel& model, const BlobDataset& data,
                std::vector<std::size_t>& order, const TrainOptions& opts,
                std::size_t epochs, Rng& rng) {
    const std::size_t c = model.class_count();
    const std::size_t d = model.d_feat();
    std::vector<double> grad_w(c * d);
    std::vector<double> grad_b(c);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += opts.batch_size) {
            const std::size_t stop =
                std::min(start + opts.batch_size, order.size());
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            std::fill(grad_b.begin(), grad_b.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                std::vector<double> p =
                    predict_proba(model, data.features.row_span(i));
                p[data.labels[i]] -= 1.0;
                const double* x = data.features.row(i);
                for (std::size_t k = 0; k < c; ++k) {
                    kernels::axpy(p[k], x, grad_w.data() + k * d, d);
                    grad_b[k] += p[k];
                }
            }
            const double step =
                -opts.lr / static_cast<double>(stop - start);
            for (std::size_t k = 0; k < c; ++k) {
                kernels::axpy(step, grad_w.data() + k * d,
                              model.weights.row(k), d);
                model.bias[k] += step * grad_b[k];
            }
        }
    }
}

double top1_accuracy(const LogRegModel& model, const BlobDataset& data,
                     std::span<const std::size_t> ids) {
    if (ids.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (const std::size_t i : ids) {
        const std::vector<double> p =
            predict_proba(model, data.features.row_span(i));
        std::size_t arg = 0;
        for (std::size_t k = 1; k < p.size(); ++k) {
            if (p[k] > p[arg]) {
                arg = k;
            }
        }
        if (arg == data.labels[i]) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ids.size());
}

}  // namespace

TrainResult train_logreg(const BlobDataset& dataset,
                         const std::optional<std::vector<std::size_t>>& subset,
                         const TrainOptions& opts, std::uint64_t seed) {
    const std::size_t n = dataset.features.rows();
    const Split split = make_split(n, seed);

    std::vector<std::size_t> train_ids =
        subset.has_value() ? *subset : split.train_ids;
    if (train_ids.empty()) {
        throw BudgetError("train_logreg: empty training subset");
    }
    for (const std::size_t i : train_ids) {
        if (i >= n) {
            throw ConfigError("train_logreg: subset index out of range");
        }
    }

    LogRegModel model =
        make_model(dataset.class_count, dataset.features.cols());
    Rng rng(seed ^ 0x70a1b2c3d4e5f607ULL);
    sgd_epochs(model, dataset, train_ids, opts, opts.epochs, rng);

    if (!model.weights.all_finite()) {
        throw DataError("train_logreg: parameters diverged");
    }

    TrainResult res;
    res.accuracy = top1_accuracy(model, dataset, split.test_ids);
    res.train_count = train_ids.size();
    res.model = std::move(model);
    return res;
}

LogRegModel warmup_model(const BlobDataset& dataset,
                         std::span<const std::size_t> pool,
                         const TrainOptions& opts, std::uint64_t seed) {
    Rng rng(seed ^ 0xaa12f00dULL);
    std::vector<std::size_t> shuffled(pool.begin(), pool.end());
    rng.shuffle(shuffled);
    const std::size_t take = std::max<std::size_t>(1, pool.size() / 10);
    shuffled.resize(take);

    LogRegModel model =
        make_model(dataset.class_count, dataset.features.cols());
    sgd_epochs(model, dataset, shuffled, opts, 1, rng);
    return model;
}

}  // namespace sage::data
