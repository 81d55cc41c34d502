#include "sage/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <thread>

#include "sage/errors.hpp"
#include "sage/kernels.hpp"
#include "sage/rng.hpp"
#include "sage/sketch.hpp"

namespace sage::pipeline {

namespace {

// Phase II reduction chunks have fixed absolute boundaries so results do
// not depend on thread count or I/O block size. Sweep blocks are a
// multiple of the chunk so chunks never straddle blocks.
constexpr std::size_t kReductionChunk = 512;
constexpr std::size_t kPhase2Block = 4096;
static_assert(kPhase2Block % kReductionChunk == 0);

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start)
        .count();
}

std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs fn(chunk_index) for chunk_index in [0, chunk_count) across up to
/// `threads` workers. Caller merges per-chunk results in index order.
void for_each_chunk(std::size_t chunk_count, std::size_t threads,
                    const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(threads, chunk_count);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunk_count; ++c) {
            fn(c);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&]() {
        while (true) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunk_count) {
                return;
            }
            try {
                fn(c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 0; t + 1 < workers; ++t) {
        pool.emplace_back(body);
    }
    body();
    for (std::thread& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

void validate_config(const SageConfig& config) {
    if (!(config.budget_fraction > 0.0) || config.budget_fraction > 1.0) {
        throw ConfigError("budget_fraction must lie in (0, 1]");
    }
    if (config.batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
}

struct ConsensusPartial {
    explicit ConsensusPartial(std::size_t dim) : global(dim) {}
    scoring::ConsensusAccumulator global;
    std::map<std::uint32_t, scoring::ConsensusAccumulator> per_class;
};

struct ScorePartial {
    std::vector<scoring::ScoreRecord> records;
    double alpha_sum = 0.0;
    double alpha_min = 1.0;
    double alpha_max = -1.0;
};

}  // namespace

std::size_t budget_from_fraction(double fraction, std::size_t n) {
    const auto k = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n)));
    return std::max<std::size_t>(1, k);
}

RunReport run_sage(GradientSource& source, const SageConfig& config,
                   std::vector<scoring::ScoreRecord>* score_out) {
    validate_config(config);
    if (config.class_balanced && !source.has_labels()) {
        throw DataError("class-balanced selection requires a labeled source");
    }
    const std::size_t threads = resolve_threads(config.threads);
    const std::size_t dim = source.dim();

    RunReport report;
    report.kernel_backend =
        kernels::backend_name(kernels::active_backend());
    report.dim = dim;

    // Phase I: stream every gradient into the sketch once.
    const auto t0 = Clock::now();
    sketch::SketchState sk(config.ell, dim);
    const std::size_t n1 =
        source.sweep(config.batch_size, [&](const RowBlock& blk) {
            for (std::size_t r = 0; r < blk.row_count; ++r) {
                sk.insert(blk.row(r));
            }
        });
    if (n1 == 0) {
        throw StreamError("gradient source yielded no rows");
    }
    report.sketch_stats.shrink_count = sk.shrink_count();
    report.sketch_stats.last_delta = sk.last_delta();
    report.peak_sketch_bytes = sk.footprint_bytes();
    const sketch::FrozenSketch frozen = sk.freeze();
    report.peak_sketch_bytes += frozen.matrix().footprint_bytes();
    report.sketch_stats.frozen_rows = frozen.matrix().rows();
    report.phase1_ms = ms_since(t0);
    report.n = n1;
    report.k = budget_from_fraction(config.budget_fraction, n1);

    const std::size_t ell_eff = frozen.matrix().rows();

    // Phase II sweep A: fold normalized projections into the consensus.
    const auto t1 = Clock::now();
    scoring::ConsensusAccumulator consensus(ell_eff);
    std::map<std::uint32_t, scoring::ConsensusAccumulator> class_consensus;
    std::size_t n2 = 0;
    source.sweep(kPhase2Block, [&](const RowBlock& blk) {
        if (blk.dim != dim) {
            throw ShapeError("gradient source changed dimension mid-stream");
        }
        const std::size_t chunks =
            (blk.row_count + kReductionChunk - 1) / kReductionChunk;
        std::vector<std::optional<ConsensusPartial>> partials(chunks);
        for_each_chunk(chunks, threads, [&](std::size_t c) {
            ConsensusPartial part(ell_eff);
            const std::size_t lo = c * kReductionChunk;
            const std::size_t hi =
                std::min(lo + kReductionChunk, blk.row_count);
            for (std::size_t r = lo; r < hi; ++r) {
                const std::vector<double> z =
                    scoring::project(frozen, blk.row(r));
                const std::vector<double> zh = scoring::normalize_or_zero(z);
                part.global.add(zh);
                if (config.class_balanced) {
                    const std::uint32_t label = blk.labels[r];
                    part.per_class
                        .try_emplace(label,
                                     scoring::ConsensusAccumulator(ell_eff))
                        .first->second.add(zh);
                }
            }
            partials[c].emplace(std::move(part));
        });
        for (std::size_t c = 0; c < chunks; ++c) {
            consensus.merge(partials[c]->global);
            for (const auto& [cls, acc] : partials[c]->per_class) {
                class_consensus
                    .try_emplace(cls, scoring::ConsensusAccumulator(ell_eff))
                    .first->second.merge(acc);
            }
        }
        n2 += blk.row_count;
    });
    if (n2 != n1) {
        throw StreamError("gradient source yielded " + std::to_string(n2) +
                          " rows in pass 2 but " + std::to_string(n1) +
                          " in pass 1");
    }

    const scoring::ConsensusState cons = consensus.finalize();
    report.consensus_u = cons.u;
    report.consensus_mean_norm = cons.mean_norm;

    std::map<std::uint32_t, scoring::ConsensusState> class_cons;
    std::set<std::uint32_t> degenerate_classes;
    std::map<std::uint32_t, std::size_t> class_sizes;
    if (config.class_balanced) {
        for (const auto& [cls, acc] : class_consensus) {
            class_cons[cls] = acc.finalize();
            class_sizes[cls] = acc.count();
            if (class_cons[cls].degenerate) {
                degenerate_classes.insert(cls);
            }
        }
    }

    // Phase II sweep B: score every example against its consensus and
    // feed the bounded selectors.
    std::optional<scoring::TopKSelector> selector;
    std::map<std::uint32_t, scoring::TopKSelector> class_selectors;
    std::map<std::uint32_t, std::size_t> quotas;
    if (config.class_balanced) {
        quotas = scoring::allocate_class_budgets(class_sizes, report.k);
        for (const auto& [cls, quota] : quotas) {
            if (quota > 0) {
                class_selectors.emplace(cls, scoring::TopKSelector(quota));
            }
        }
    } else {
        selector.emplace(report.k);
    }

    double alpha_sum = 0.0;
    double alpha_min = 1.0;
    double alpha_max = -1.0;
    std::size_t n3 = 0;
    source.sweep(kPhase2Block, [&](const RowBlock& blk) {
        const std::size_t chunks =
            (blk.row_count + kReductionChunk - 1) / kReductionChunk;
        std::vector<ScorePartial> partials(chunks);
        for_each_chunk(chunks, threads, [&](std::size_t c) {
            ScorePartial& part = partials[c];
            const std::size_t lo = c * kReductionChunk;
            const std::size_t hi =
                std::min(lo + kReductionChunk, blk.row_count);
            part.records.reserve(hi - lo);
            for (std::size_t r = lo; r < hi; ++r) {
                const std::vector<double> z =
                    scoring::project(frozen, blk.row(r));
                const std::vector<double> zh = scoring::normalize_or_zero(z);
                scoring::ScoreRecord rec;
                rec.index = blk.first_index + r;
                if (blk.labels != nullptr) {
                    rec.label = blk.labels[r];
                }
                rec.z_norm = num::vec_norm(z);
                if (config.class_balanced) {
                    rec.alpha = scoring::agreement(
                        zh, class_cons.at(*rec.label).u);
                } else {
                    rec.alpha = scoring::agreement(zh, cons.u);
                }
                part.alpha_sum += rec.alpha;
                part.alpha_min = std::min(part.alpha_min, rec.alpha);
                part.alpha_max = std::max(part.alpha_max, rec.alpha);
                part.records.push_back(std::move(rec));
            }
        });
        for (std::size_t c = 0; c < chunks; ++c) {
            for (const scoring::ScoreRecord& rec : partials[c].records) {
                if (config.class_balanced) {
                    const auto it = class_selectors.find(*rec.label);
                    if (it != class_selectors.end()) {
                        it->second.offer(rec.alpha, rec.index);
                    }
                } else {
                    selector->offer(rec.alpha, rec.index);
                }
                if (score_out != nullptr) {
                    score_out->push_back(rec);
                }
            }
            alpha_sum += partials[c].alpha_sum;
            if (!partials[c].records.empty()) {
                alpha_min = std::min(alpha_min, partials[c].alpha_min);
                alpha_max = std::max(alpha_max, partials[c].alpha_max);
            }
            n3 += partials[c].records.size();
        }
    });
    if (n3 != n1) {
        throw StreamError("gradient source yielded " + std::to_string(n3) +
                          " rows in pass 3 but " + std::to_string(n1) +
                          " in pass 1");
    }

    scoring::SelectionResult sel;
    sel.budget = report.k;
    if (config.class_balanced) {
        for (const auto& [cls, s] : class_selectors) {
            const auto idx = s.sorted_indices();
            sel.indices.insert(sel.indices.end(), idx.begin(), idx.end());
        }
        std::sort(sel.indices.begin(), sel.indices.end());
        sel.per_class_quotas = quotas;
        sel.degenerate_consensus = !degenerate_classes.empty();
    } else {
        sel.indices = selector->sorted_indices();
        sel.degenerate_consensus = cons.degenerate;
        sel.truncated = (report.k > n1);
    }
    report.degenerate = sel.degenerate_consensus;
    report.selection = std::move(sel);
    report.score_summary.min_alpha = alpha_min;
    report.score_summary.max_alpha = alpha_max;
    report.score_summary.mean_alpha =
        alpha_sum / static_cast<double>(n1);
    report.phase2_ms = ms_since(t1);
    return report;
}

RunReport run_random_baseline(GradientSource& source,
                              const SageConfig& config) {
    validate_config(config);
    const auto t0 = Clock::now();
    std::size_t n = 0;
    source.sweep(config.batch_size,
                 [&](const RowBlock& blk) { n += blk.row_count; });
    if (n == 0) {
        throw StreamError("gradient source yielded no rows");
    }

    RunReport report;
    report.kernel_backend =
        kernels::backend_name(kernels::active_backend());
    report.n = n;
    report.dim = source.dim();
    report.k = budget_from_fraction(config.budget_fraction, n);
    const std::size_t k = std::min(report.k, n);

    // Partial Fisher-Yates: the first k entries become the sample.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(config.seed ^ 0xba5e11e5ULL);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      rng.below(n - i));
        std::swap(perm[i], perm[j]);
    }
    report.selection.indices.assign(perm.begin(), perm.begin() + k);
    std::sort(report.selection.indices.begin(),
              report.selection.indices.end());
    report.selection.budget = report.k;
    report.selection.truncated = (report.k > n);
    report.phase2_ms = ms_since(t0);
    return report;
}

ExperimentReport accuracy_retention_experiment(
    const ExperimentParams& params) {
    for (const std::string& m : params.methods) {
        if (m != "sage" && m != "cb_sage" && m != "random") {
            throw ConfigError("unknown method: " + m);
        }
    }
    if (params.methods.empty()) {
        throw ConfigError("no methods requested");
    }
    for (const double f : params.fractions) {
        if (!(f > 0.0) || f > 1.0) {
            throw ConfigError("fractions must lie in (0, 1]");
        }
    }

    const data::BlobDataset blobs = data::make_blobs(params.blob);
    const std::size_t n = blobs.features.rows();

    ExperimentReport report;
    for (const std::uint64_t seed : params.seeds) {
        const data::Split split = data::make_split(n, seed);
        const data::TrainResult full =
            data::train_logreg(blobs, std::nullopt, params.train, seed);
        report.full_accuracy[seed] = full.accuracy;

        const data::LogRegModel snapshot =
            data::warmup_model(blobs, split.train_ids, params.train, seed);
        const num::DenseMatrix grads =
            data::per_example_gradients(snapshot, blobs, split.train_ids);
        std::vector<std::uint32_t> grad_labels(split.train_ids.size());
        for (std::size_t i = 0; i < split.train_ids.size(); ++i) {
            grad_labels[i] = blobs.labels[split.train_ids[i]];
        }
        const std::optional<std::vector<std::uint32_t>> labels_opt(
            grad_labels);

        for (const std::string& method : params.methods) {
            for (const double fraction : params.fractions) {
                SageConfig cfg;
                cfg.ell = params.ell;
                cfg.budget_fraction = fraction;
                cfg.class_balanced = (method == "cb_sage");
                cfg.seed = seed;
                cfg.threads = params.threads;

                MatrixSource source(grads, labels_opt);
                const auto t_sel = Clock::now();
                const RunReport run = (method == "random")
                                          ? run_random_baseline(source, cfg)
                                          : run_sage(source, cfg);
                const double select_ms = ms_since(t_sel);

                std::vector<std::size_t> subset;
                subset.reserve(run.selection.indices.size());
                for (const std::size_t pos : run.selection.indices) {
                    subset.push_back(split.train_ids[pos]);
                }

                const auto t_train = Clock::now();
                const data::TrainResult trained = data::train_logreg(
                    blobs, subset, params.train, seed);
                const double train_ms = ms_since(t_train);

                ExperimentCell cell;
                cell.method = method;
                cell.fraction = fraction;
                cell.seed = seed;
                cell.accuracy = trained.accuracy;
                cell.relative_accuracy =
                    (full.accuracy > 0.0) ? trained.accuracy / full.accuracy
                                          : 0.0;
                cell.select_ms = select_ms;
                cell.train_ms = train_ms;
                cell.total_ms = select_ms + train_ms;
                report.cells.push_back(std::move(cell));
            }
        }
    }

    // Aggregates per (method, fraction), seeds pooled.
    for (const std::string& method : params.methods) {
        for (const double fraction : params.fractions) {
            std::vector<const ExperimentCell*> group;
            for (const ExperimentCell& c : report.cells) {
                if (c.method == method && c.fraction == fraction) {
                    group.push_back(&c);
                }
            }
            if (group.empty()) {
                continue;
            }
            ExperimentAggregate agg;
            agg.method = method;
            agg.fraction = fraction;
            for (const ExperimentCell* c : group) {
                agg.mean_accuracy += c->accuracy;
                agg.mean_relative += c->relative_accuracy;
                agg.mean_total_ms += c->total_ms;
            }
            const double m = static_cast<double>(group.size());
            agg.mean_accuracy /= m;
            agg.mean_relative /= m;
            agg.mean_total_ms /= m;
            if (group.size() > 1) {
                double ss = 0.0;
                for (const ExperimentCell* c : group) {
                    const double d = c->accuracy - agg.mean_accuracy;
                    ss += d * d;
                }
                agg.std_accuracy = std::sqrt(ss / (m - 1.0));
            }
            report.aggregates.push_back(std::move(agg));
        }
    }
    return report;
}

void write_experiment_csv(const std::string& path,
                          const ExperimentReport& report) {
    std::ofstream out(path);
    if (!out) {
        throw IoError(path + ": cannot open for writing");
    }
    out << "method,fraction,seed,accuracy,relative_accuracy,select_ms,"
           "train_ms,total_ms\n";
    char buf[200];
    for (const ExperimentCell& c : report.cells) {
        std::snprintf(buf, sizeof(buf),
                      "%s,%.17g,%llu,%.17g,%.17g,%.3f,%.3f,%.3f\n",
                      c.method.c_str(), c.fraction,
                      static_cast<unsigned long long>(c.seed), c.accuracy,
                      c.relative_accuracy, c.select_ms, c.train_ms,
                      c.total_ms);
        out << buf;
    }
    if (!out) {
        throw IoError(path + ": write failed");
    }
}

void write_experiment_summary_csv(const std::string& path,
                                  const ExperimentReport& report) {
    std::ofstream out(path);
    if (!out) {
        throw IoError(path + ": cannot open for writing");
    }
    out << "method,fraction,mean_accuracy,std_accuracy,mean_relative,"
           "mean_total_ms\n";
    char buf[200];
    for (const ExperimentAggregate& a : report.aggregates) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                      a.method.c_str(), a.fraction, a.mean_accuracy,
                      a.std_accuracy, a.mean_relative, a.mean_total_ms);
        out << buf;
    }
    if (!out) {
        throw IoError(path + ": write failed");
    }
}

}  // namespace sage::pipeline
