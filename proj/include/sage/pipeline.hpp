#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sage/logreg.hpp"
#include "sage/scoring.hpp"
#include "sage/sources.hpp"
#include "sage/synth.hpp"

namespace sage::pipeline {

/// Selection run configuration. batch_size is the Phase I streaming
/// granularity and cannot change results; Phase II reductions always use
/// fixed 512-row chunk boundaries so thread count cannot either.
struct SageConfig {
    std::size_t ell = 16;
    double budget_fraction = 0.25;
    bool class_balanced = false;
    std::uint64_t seed = 42;
    std::size_t batch_size = 256;
    std::size_t threads = 0;  // 0 = hardware concurrency
};

struct ScoreSummary {
    double min_alpha = 0.0;
    double max_alpha = 0.0;
    double mean_alpha = 0.0;
};

struct SketchStats {
    std::uint64_t shrink_count = 0;
    double last_delta = 0.0;
    std::size_t frozen_rows = 0;
};

struct RunReport {
    scoring::SelectionResult selection;
    ScoreSummary score_summary;
    SketchStats sketch_stats;
    double phase1_ms = 0.0;
    double phase2_ms = 0.0;
    std::size_t peak_sketch_bytes = 0;
    bool degenerate = false;
    std::size_t n = 0;
    std::size_t dim = 0;
    std::size_t k = 0;
    std::vector<double> consensus_u;  // global unit consensus (or zeros)
    double consensus_mean_norm = 0.0;
    std::string kernel_backend;
};

/// Full selection pipeline: Phase I streams every gradient into the
/// sketch once; Phase II sweeps the source twice more (consensus, then
/// scoring) and selects top-k globally or per class. Deterministic given
/// (source bytes, config); score records (index order) are copied into
/// score_out when provided.
RunReport run_sage(GradientSource& source, const SageConfig& config,
                   std::vector<scoring::ScoreRecord>* score_out = nullptr);

/// Uniform sample without replacement of the same budget, same report
/// shape (sketch and score fields zeroed).
RunReport run_random_baseline(GradientSource& source,
                              const SageConfig& config);

/// Budget rule shared by both runners.
std::size_t budget_from_fraction(double fraction, std::size_t n);

struct ExperimentParams {
    data::BlobParams blob;
    std::vector<double> fractions{0.05, 0.15, 0.25, 1.0};
    std::vector<std::string> methods{"sage", "random"};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::size_t ell = 16;
    data::TrainOptions train;
    std::size_t threads = 0;
};

struct ExperimentCell {
    std::string method;
    double fraction = 0.0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double relative_accuracy = 0.0;
    double select_ms = 0.0;
    double train_ms = 0.0;
    double total_ms = 0.0;
};

struct ExperimentAggregate {
    std::string method;
    double fraction = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample standard deviation
    double mean_relative = 0.0;
    double mean_total_ms = 0.0;
};

struct ExperimentReport {
    std::vector<ExperimentCell> cells;
    std::vector<ExperimentAggregate> aggregates;
    std::map<std::uint64_t, double> full_accuracy;  // per seed
};

/// Subset-fraction accuracy retention on blob data: per (method,
/// fraction, seed) select, train on the subset, and score on the held-out
/// split. Valid methods: sage, cb_sage, random.
ExperimentReport accuracy_retention_experiment(const ExperimentParams& params);

/// CSV: method,fraction,seed,accuracy,relative_accuracy,select_ms,
/// train_ms,total_ms.
void write_experiment_csv(const std::string& path,
                          const ExperimentReport& report);

/// Companion aggregate CSV (mean and sample std per cell).
void write_experiment_summary_csv(const std::string& path,
                                  const ExperimentReport& report);

}  // namespace sage::pipeline
