#include <cmath>
#include <cstring>
#include <filesystem>
#include <optional>
#include <vector>

#include "doctest.h"
#include "sage/errors.hpp"
#include "sage/gradient_file.hpp"
#include "sage/pipeline.hpp"
#include "sage/rng.hpp"
#include "sage/verify.hpp"

namespace fs = std::filesystem;
using sage::num::DenseMatrix;
using sage::pipeline::MatrixSource;
using sage::pipeline::RunReport;
using sage::pipeline::SageConfig;

namespace {

DenseMatrix random_rows(std::size_t n, std::size_t d, sage::Rng& rng) {
    DenseMatrix g(n, d);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.data()[i] = rng.normal();
    }
    return g;
}

bool same_report(const RunReport& a, const RunReport& b) {
    return a.selection.indices == b.selection.indices &&
           a.selection.degenerate_consensus ==
               b.selection.degenerate_consensus &&
           a.score_summary.min_alpha == b.score_summary.min_alpha &&
           a.score_summary.max_alpha == b.score_summary.max_alpha &&
           a.score_summary.mean_alpha == b.score_summary.mean_alpha &&
           a.consensus_u == b.consensus_u && a.k == b.k && a.n == b.n;
}

// Source that loses a row after its first sweep; used to provoke the
// cross-pass count check.
class FlakySource final : public sage::pipeline::GradientSource {
public:
    explicit FlakySource(const DenseMatrix& g) : g_(g) {}
    std::size_t dim() const override { return g_.cols(); }
    bool has_labels() const override { return false; }
    std::size_t sweep(std::size_t block_rows,
                      const sage::pipeline::BlockFn& fn) override {
        const std::size_t n = g_.rows() - (sweeps_ > 0 ? 1 : 0);
        ++sweeps_;
        for (std::size_t start = 0; start < n; start += block_rows) {
            sage::pipeline::RowBlock blk;
            blk.first_index = start;
            blk.row_count = std::min(block_rows, n - start);
            blk.dim = g_.cols();
            blk.rows = g_.row(start);
            fn(blk);
        }
        return n;
    }

private:
    const DenseMatrix& g_;
    int sweeps_ = 0;
};

}  // namespace

TEST_CASE("budget rule") {
    CHECK(sage::pipeline::budget_from_fraction(1.0, 100) == 100);
    CHECK(sage::pipeline::budget_from_fraction(0.05, 1000) == 50);
    CHECK(sage::pipeline::budget_from_fraction(0.001, 10) == 1);  // floor 1
    CHECK(sage::pipeline::budget_from_fraction(0.1, 200) == 20);
}

TEST_CASE("rank-1 stream scores everything at alpha one and falls back "
          "to index order") {
    // gradients m_i * e_3 with power-of-two magnitudes: normalized
    // projections are identical doubles, so ties decide everything
    const std::size_t n = 200, d = 32;
    DenseMatrix g(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        g.at(i, 3) = std::ldexp(1.0, int(i % 5) - 2);
    }
    MatrixSource source(g, std::nullopt);
    SageConfig cfg;
    cfg.ell = 8;
    cfg.budget_fraction = 0.1;
    cfg.threads = 1;

    std::vector<sage::scoring::ScoreRecord> scores;
    const RunReport rep = sage::pipeline::run_sage(source, cfg, &scores);
    CHECK(rep.n == n);
    CHECK(rep.k == 20);
    REQUIRE(scores.size() == n);
    for (const auto& r : scores) {
        CHECK(std::abs(r.alpha - 1.0) <= 1e-12);
    }
    std::vector<std::size_t> want(20);
    std::iota(want.begin(), want.end(), 0);
    CHECK(rep.selection.indices == want);
    CHECK(!rep.degenerate);
}

TEST_CASE("majority direction wins over the antipodal minority") {
    sage::Rng rng(90);
    const std::size_t n = 100, d = 24;
    std::vector<double> v(d);
    for (double& x : v) {
        x = rng.normal();
    }
    DenseMatrix g(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        // power-of-two magnitudes scale exactly, so every same-group
        // normalized projection is the identical double and ties are real
        const double mag =
            std::ldexp(1.0, int(i % 4) - 1) * (i < 90 ? 1.0 : -1.0);
        for (std::size_t j = 0; j < d; ++j) {
            g.at(i, j) = mag * v[j];
        }
    }
    MatrixSource source(g, std::nullopt);
    SageConfig cfg;
    cfg.ell = 4;
    cfg.budget_fraction = 0.5;
    const RunReport rep = sage::pipeline::run_sage(source, cfg);
    REQUIRE(rep.selection.indices.size() == 50);
    for (const std::size_t i : rep.selection.indices) {
        CHECK(i < 90);
    }

    // brute-force scoring oracle agrees on the same stream
    sage::sketch::SketchState sk(4, d);
    for (std::size_t i = 0; i < n; ++i) {
        sk.insert(g.row_span(i));
    }
    const auto fs = sk.freeze();
    const auto oracle = sage::verify::naive_scores(g, fs, std::nullopt);
    const auto sel = sage::scoring::select_top_k(oracle.records, 50);
    CHECK(sel.indices == rep.selection.indices);
}

TEST_CASE("streaming pipeline matches the dense oracle on random cases") {
    sage::Rng rng(91);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 50 + rng.below(400);
        const std::size_t d = 8 + rng.below(56);
        const std::size_t ell = std::min<std::size_t>(4 + 4 * rng.below(3), d);
        const DenseMatrix g = random_rows(n, d, rng);

        MatrixSource source(g, std::nullopt);
        SageConfig cfg;
        cfg.ell = ell;
        cfg.budget_fraction = 0.2;
        std::vector<sage::scoring::ScoreRecord> scores;
        const RunReport rep = sage::pipeline::run_sage(source, cfg, &scores);

        sage::sketch::SketchState sk(ell, d);
        for (std::size_t i = 0; i < n; ++i) {
            sk.insert(g.row_span(i));
        }
        const auto fs = sk.freeze();
        const auto oracle = sage::verify::naive_scores(g, fs, std::nullopt);
        REQUIRE(scores.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(scores[i].index == i);
            CHECK(std::abs(scores[i].alpha - oracle.records[i].alpha) <=
                  1e-10);
        }
        const auto sel = sage::scoring::select_top_k(oracle.records, rep.k);
        CHECK(sel.indices == rep.selection.indices);
    }
}

TEST_CASE("results are independent of batch size and thread count") {
    sage::Rng rng(92);
    const DenseMatrix g = random_rows(700, 20, rng);
    MatrixSource s1(g, std::nullopt);
    MatrixSource s2(g, std::nullopt);
    MatrixSource s3(g, std::nullopt);

    SageConfig base;
    base.ell = 8;
    base.budget_fraction = 0.25;
    base.batch_size = 64;
    base.threads = 1;

    SageConfig bigger = base;
    bigger.batch_size = 1024;
    SageConfig threaded = base;
    threaded.threads = 4;

    const RunReport a = sage::pipeline::run_sage(s1, base);
    const RunReport b = sage::pipeline::run_sage(s2, bigger);
    const RunReport c = sage::pipeline::run_sage(s3, threaded);
    CHECK(same_report(a, b));
    CHECK(same_report(a, c));
}

TEST_CASE("pipeline is deterministic end to end") {
    sage::Rng rng(93);
    const DenseMatrix g = random_rows(300, 16, rng);
    MatrixSource s1(g, std::nullopt);
    MatrixSource s2(g, std::nullopt);
    SageConfig cfg;
    cfg.ell = 8;
    const RunReport a = sage::pipeline::run_sage(s1, cfg);
    const RunReport b = sage::pipeline::run_sage(s2, cfg);
    CHECK(same_report(a, b));
}

TEST_CASE("file source and memory source agree bit for bit") {
    sage::Rng rng(94);
    const DenseMatrix g = random_rows(150, 12, rng);
    const fs::path tmp =
        fs::temp_directory_path() / "sage_pipe_file_test.sagegrdm";
    sage::data::write_gradients(tmp.string(), g, std::nullopt);

    MatrixSource mem(g, std::nullopt);
    sage::pipeline::FileSource file(tmp.string());
    SageConfig cfg;
    cfg.ell = 4;
    const RunReport a = sage::pipeline::run_sage(mem, cfg);
    const RunReport b = sage::pipeline::run_sage(file, cfg);
    CHECK(same_report(a, b));
    fs::remove(tmp);
}

TEST_CASE("count drift across passes is a stream error") {
    sage::Rng rng(95);
    const DenseMatrix g = random_rows(40, 8, rng);
    FlakySource source(g);
    SageConfig cfg;
    cfg.ell = 4;
    CHECK_THROWS_AS(sage::pipeline::run_sage(source, cfg),
                    sage::StreamError);
}

TEST_CASE("class-balanced run fills quotas exactly") {
    sage::Rng rng(31);
    sage::data::BlobParams p;
    p.n = 400;
    p.d_feat = 6;
    p.class_count = 4;
    p.seed = 31;
    p.imbalance_ratio = 0.5;
    const auto blobs = sage::data::make_blobs(p);
    const auto model = sage::data::warmup_model(
        blobs, [] {
            std::vector<std::size_t> ids(400);
            std::iota(ids.begin(), ids.end(), 0);
            return ids;
        }(),
        {10, 0.5, 32}, 31);
    const DenseMatrix g = sage::data::per_example_gradients(model, blobs);
    const std::optional<std::vector<std::uint32_t>> labels(blobs.labels);

    MatrixSource source(g, labels);
    SageConfig cfg;
    cfg.ell = 16;
    cfg.budget_fraction = 0.25;
    cfg.class_balanced = true;
    cfg.seed = 31;
    const RunReport rep = sage::pipeline::run_sage(source, cfg);

    REQUIRE(rep.selection.per_class_quotas.has_value());
    std::map<std::uint32_t, std::size_t> counts;
    for (const std::size_t i : rep.selection.indices) {
        ++counts[blobs.labels[i]];
    }
    std::size_t total = 0;
    for (const auto& [cls, quota] : *rep.selection.per_class_quotas) {
        CHECK(counts[cls] == quota);
        total += quota;
    }
    CHECK(total == rep.k);
    CHECK(rep.selection.indices.size() == rep.k);
    CHECK(!rep.degenerate);
}

TEST_CASE("class-balanced selection demands labels") {
    sage::Rng rng(96);
    const DenseMatrix g = random_rows(50, 8, rng);
    MatrixSource source(g, std::nullopt);
    SageConfig cfg;
    cfg.ell = 4;
    cfg.class_balanced = true;
    CHECK_THROWS_AS(sage::pipeline::run_sage(source, cfg), sage::DataError);
}

TEST_CASE("all-zero stream degenerates deterministically") {
    const DenseMatrix g(60, 10);
    MatrixSource source(g, std::nullopt);
    SageConfig cfg;
    cfg.ell = 4;
    cfg.budget_fraction = 0.1;
    const RunReport rep = sage::pipeline::run_sage(source, cfg);
    CHECK(rep.degenerate);
    CHECK(rep.selection.degenerate_consensus);
    std::vector<std::size_t> want(6);
    std::iota(want.begin(), want.end(), 0);
    CHECK(rep.selection.indices == want);
    CHECK(rep.score_summary.max_alpha == 0.0);
    CHECK(rep.score_summary.min_alpha == 0.0);
}

TEST_CASE("sketch memory in the report is bounded by c * ell * D") {
    sage::Rng rng(97);
    const DenseMatrix g = random_rows(500, 64, rng);
    MatrixSource source(g, std::nullopt);
    SageConfig cfg;
    cfg.ell = 16;
    const RunReport rep = sage::pipeline::run_sage(source, cfg);
    CHECK(rep.peak_sketch_bytes <= 12 * cfg.ell * 64 * 8);
}

TEST_CASE("random baseline is seeded and exact") {
    sage::Rng rng(98);
    const DenseMatrix g = random_rows(1000, 8, rng);
    SageConfig cfg;
    cfg.ell = 4;
    cfg.budget_fraction = 0.05;
    cfg.seed = 7;

    MatrixSource s1(g, std::nullopt);
    const RunReport a = sage::pipeline::run_random_baseline(s1, cfg);
    CHECK(a.selection.indices.size() == 50);
    for (std::size_t i = 1; i < a.selection.indices.size(); ++i) {
        CHECK(a.selection.indices[i - 1] < a.selection.indices[i]);
    }

    MatrixSource s2(g, std::nullopt);
    const RunReport b = sage::pipeline::run_random_baseline(s2, cfg);
    CHECK(a.selection.indices == b.selection.indices);

    SageConfig full = cfg;
    full.budget_fraction = 1.0;
    MatrixSource s3(g, std::nullopt);
    const RunReport c = sage::pipeline::run_random_baseline(s3, full);
    CHECK(c.selection.indices.size() == 1000);
}

TEST_CASE("low-rank stream source is restartable and consistent") {
    sage::pipeline::LowRankStreamSource src(200, 16, 3, 0.1, 5);
    DenseMatrix first(200, 16);
    src.sweep(64, [&](const sage::pipeline::RowBlock& blk) {
        for (std::size_t r = 0; r < blk.row_count; ++r) {
            std::memcpy(first.row(blk.first_index + r), blk.row(r).data(),
                        16 * sizeof(double));
        }
    });
    DenseMatrix second(200, 16);
    src.sweep(17, [&](const sage::pipeline::RowBlock& blk) {
        for (std::size_t r = 0; r < blk.row_count; ++r) {
            std::memcpy(second.row(blk.first_index + r), blk.row(r).data(),
                        16 * sizeof(double));
        }
    });
    CHECK(first == second);
}

TEST_CASE("experiment report covers every cell and normalizes at f=1") {
    sage::pipeline::ExperimentParams params;
    params.blob.n = 240;
    params.blob.d_feat = 6;
    params.blob.class_count = 3;
    params.blob.seed = 29;
    params.fractions = {0.25, 1.0};
    params.methods = {"sage", "random"};
    params.seeds = {1, 2};
    params.ell = 8;
    params.train = {10, 0.5, 32};
    params.threads = 1;

    const auto rep = sage::pipeline::accuracy_retention_experiment(params);
    CHECK(rep.cells.size() == 2 * 2 * 2);
    for (const auto& cell : rep.cells) {
        if (cell.fraction == 1.0) {
            CHECK(cell.accuracy == rep.full_accuracy.at(cell.seed));
            CHECK(cell.relative_accuracy == doctest::Approx(1.0));
        }
        CHECK(cell.total_ms >= cell.train_ms);
    }
    CHECK(rep.aggregates.size() == 4);

    // determinism of the accuracy columns
    const auto rep2 = sage::pipeline::accuracy_retention_experiment(params);
    REQUIRE(rep2.cells.size() == rep.cells.size());
    for (std::size_t i = 0; i < rep.cells.size(); ++i) {
        CHECK(rep.cells[i].accuracy == rep2.cells[i].accuracy);
    }

    // empty fraction list: empty report, no error
    sage::pipeline::ExperimentParams empty = params;
    empty.fractions = {};
    const auto rep3 = sage::pipeline::accuracy_retention_experiment(empty);
    CHECK(rep3.cells.empty());

    sage::pipeline::ExperimentParams bad = params;
    bad.methods = {};
    CHECK_THROWS_AS(sage::pipeline::accuracy_retention_experiment(bad),
                    sage::ConfigError);
}
