#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <vector>

#include "doctest.h"
#include "sage/errors.hpp"
#include "sage/rng.hpp"
#include "sage/sketch.hpp"
#include "sage/synth.hpp"
#include "sage/verify.hpp"

using sage::num::DenseMatrix;

namespace {

DenseMatrix random_rows(std::size_t n, std::size_t d, sage::Rng& rng) {
    DenseMatrix g(n, d);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.data()[i] = rng.normal();
    }
    return g;
}

sage::sketch::FrozenSketch sketch_of(const DenseMatrix& g, std::size_t ell) {
    sage::sketch::SketchState sk(ell, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
        sk.insert(g.row_span(i));
    }
    return sk.freeze();
}

}  // namespace

TEST_CASE("exact_gram basics") {
    const DenseMatrix id = DenseMatrix::identity(4);
    CHECK(sage::verify::exact_gram(id) == id);

    DenseMatrix one_row(1, 3, {1.0, 2.0, -1.0});
    const DenseMatrix outer = sage::verify::exact_gram(one_row);
    CHECK(outer.at(0, 0) == 1.0);
    CHECK(outer.at(0, 1) == 2.0);
    CHECK(outer.at(1, 1) == 4.0);
    CHECK(outer.at(2, 1) == -2.0);

    sage::Rng rng(50);
    const DenseMatrix g = random_rows(50, 20, rng);
    const DenseMatrix gram = sage::verify::exact_gram(g);
    double trace = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
        trace += gram.at(i, i);
    }
    CHECK(trace ==
          doctest::Approx(sage::num::frobenius_norm_sq(g)).epsilon(1e-10));
}

TEST_CASE("oracle scale guard rejects large problems") {
    CHECK_THROWS_AS(sage::verify::exact_gram(DenseMatrix(2, 600)),
                    sage::ScaleGuardError);
    CHECK_THROWS_AS(sage::verify::tail_energy(DenseMatrix(5001, 8), 0),
                    sage::ScaleGuardError);
}

TEST_CASE("tail_energy endpoints and low-rank fixtures") {
    const DenseMatrix g = sage::data::synth_lowrank(30, 12, 2, 0.0, 1);
    const double total = sage::num::frobenius_norm_sq(g);
    CHECK(sage::verify::tail_energy(g, 0) ==
          doctest::Approx(total).epsilon(1e-10));
    CHECK(sage::verify::tail_energy(g, 2) <= 1e-9 * total);

    const DenseMatrix noisy = sage::data::synth_lowrank(40, 16, 3, 0.05, 2);
    const double tail3 = sage::verify::tail_energy(noisy, 3);
    CHECK(tail3 > 0.0);
    CHECK(tail3 <= sage::num::frobenius_norm_sq(noisy));
}

TEST_CASE("sandwich is exact for streams shorter than ell") {
    sage::Rng rng(60);
    const DenseMatrix g = random_rows(3, 10, rng);
    const auto fs = sketch_of(g, 8);
    const auto rep = sage::verify::check_psd_sandwich(g, fs, 4);
    CHECK(rep.pass);
    CHECK(std::abs(rep.min_eig_diff) <= rep.tol_psd);
    CHECK(std::abs(rep.max_eig_diff) <= rep.tol_bound);
}

TEST_CASE("hand-checkable sandwich: orthonormal stream, ell=2") {
    const std::size_t dim = 4;
    sage::sketch::SketchState sk(2, dim);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> e(dim, 0.0);
        e[i] = 1.0;
        sk.insert(e);
    }
    const auto fs = sk.freeze();
    REQUIRE(fs.matrix().rows() == 0);  // sketch shrank to nothing

    DenseMatrix g = DenseMatrix::identity(4);
    const auto rep = sage::verify::check_psd_sandwich(g, fs, 1);
    // G^T G - S^T S = I: every eigenvalue is exactly 1
    CHECK(rep.max_eig_diff == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.min_eig_diff == doctest::Approx(1.0).epsilon(1e-12));
    // bound at k=1: (2/2) * ||G - G_1||_F^2 = 3
    CHECK(rep.bounds.at(1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(rep.pass);
}

TEST_CASE("naive_scores on a single example scores alpha one") {
    sage::Rng rng(70);
    const DenseMatrix g = random_rows(1, 8, rng);
    const auto fs = sketch_of(g, 4);
    const auto sc = sage::verify::naive_scores(g, fs, std::nullopt);
    REQUIRE(sc.records.size() == 1);
    CHECK(sc.records[0].alpha == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(!sc.degenerate);
}

TEST_CASE("naive_scores on all-zero gradients is degenerate") {
    const DenseMatrix g(5, 6);
    sage::sketch::SketchState sk(3, 6);
    for (std::size_t i = 0; i < 5; ++i) {
        sk.insert(g.row_span(i));
    }
    const auto fs = sk.freeze();
    const auto sc = sage::verify::naive_scores(g, fs, std::nullopt);
    CHECK(sc.degenerate);
    for (const auto& r : sc.records) {
        CHECK(r.alpha == 0.0);
        CHECK(r.z_norm == 0.0);
    }
}

TEST_CASE("naive_scores produces per-class consensus when labeled") {
    sage::Rng rng(71);
    const DenseMatrix g = random_rows(30, 12, rng);
    std::vector<std::uint32_t> labels(30);
    for (std::size_t i = 0; i < 30; ++i) {
        labels[i] = i % 3;
    }
    const auto fs = sketch_of(g, 4);
    const auto sc = sage::verify::naive_scores(g, fs, labels);
    CHECK(sc.u_class.size() == 3);
    CHECK(sc.class_records.size() == 30);
    for (const auto& r : sc.class_records) {
        CHECK(std::abs(r.alpha) <= 1.0 + 1e-12);
    }
}

TEST_CASE("lemma checks: single element and uniform ties") {
    sage::Rng rng(72);
    const DenseMatrix g = random_rows(12, 10, rng);
    const auto fs = sketch_of(g, 4);
    const auto sc = sage::verify::naive_scores(g, fs, std::nullopt);

    // |T| = 1: identity with equality (alpha == xi)
    std::vector<std::size_t> single = {3};
    const auto one = sage::verify::check_lemma1(sc.records, single,
                                                sc.z_rows, sc.u);
    if (one.applicable) {
        CHECK(one.pass);
        CHECK(one.lhs == doctest::Approx(one.rhs).epsilon(1e-10));
        const auto cor = sage::verify::check_corollary(sc.records, single,
                                                       sc.z_rows, sc.u);
        CHECK(cor.pass);
        // projection step is tight at |T| = 1: <z, u> = alpha * ||z||
        CHECK(cor.projected == doctest::Approx(cor.rhs).epsilon(1e-10));
        CHECK(cor.lhs >= cor.rhs - 1e-10);
    }

    // equal alphas: the inequality is an equality
    std::vector<sage::scoring::ScoreRecord> equal(4);
    DenseMatrix z(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        equal[i].index = i;
        equal[i].alpha = 0.5;
        equal[i].z_norm = double(i + 1);
        z.at(i, 0) = 0.5 * double(i + 1);       // <z, u> = z_norm * 0.5
        z.at(i, 1) = std::sqrt(0.75) * double(i + 1);
    }
    const std::vector<double> u = {1.0, 0.0};
    std::vector<std::size_t> all = {0, 1, 2, 3};
    const auto tie = sage::verify::check_lemma1(equal, all, z, u);
    CHECK(tie.applicable);
    CHECK(tie.pass);
    CHECK(tie.lhs == doctest::Approx(tie.rhs).epsilon(1e-10));
}

TEST_CASE("corollary is tight for identical z vectors") {
    std::vector<sage::scoring::ScoreRecord> recs(3);
    DenseMatrix z(3, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        recs[i].index = i;
        recs[i].alpha = 1.0;
        recs[i].z_norm = 5.0;
        z.at(i, 0) = 3.0;
        z.at(i, 1) = 4.0;
    }
    const std::vector<double> u = {0.6, 0.8};
    std::vector<std::size_t> all = {0, 1, 2};
    const auto cor = sage::verify::check_corollary(recs, all, z, u);
    CHECK(cor.applicable);
    CHECK(cor.xi == 1.0);
    CHECK(cor.pass);
    CHECK(cor.lhs == doctest::Approx(cor.rhs).epsilon(1e-12));
}

TEST_CASE("lemma and corollary hold on random selections") {
    sage::Rng rng(73);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 50 + rng.below(200);
        const std::size_t d = 8 + rng.below(40);
        const DenseMatrix g = random_rows(n, d, rng);
        const auto fs = sketch_of(g, 4 + 4 * rng.below(3));
        const auto sc = sage::verify::naive_scores(g, fs, std::nullopt);

        const auto sel = sage::scoring::select_top_k(
            sc.records, std::max<std::size_t>(1, n / 10));
        const auto lem = sage::verify::check_lemma1(sc.records, sel.indices,
                                                    sc.z_rows, sc.u);
        const auto cor = sage::verify::check_corollary(
            sc.records, sel.indices, sc.z_rows, sc.u);
        if (lem.applicable) {
            CHECK(lem.pass);
            CHECK(lem.identity_max_rel <= 1e-10);
        }
        if (cor.applicable) {
            CHECK(cor.pass);
        }
    }
}

TEST_CASE("lemma reports not-applicable on non-positive selections") {
    std::vector<sage::scoring::ScoreRecord> recs(2);
    recs[0] = {0, std::nullopt, 1.0, 0.5};
    recs[1] = {1, std::nullopt, 1.0, -0.5};
    DenseMatrix z(2, 1);
    const std::vector<double> u = {1.0};
    std::vector<std::size_t> sel = {0, 1};
    const auto lem = sage::verify::check_lemma1(recs, sel, z, u);
    CHECK(!lem.applicable);
}

TEST_CASE("check CSV writer emits the documented header") {
    std::vector<sage::verify::CheckRow> rows(2);
    rows[0] = {"psd_sandwich", "N=10;D=4;ell=2;k=1", 1.0, 3.0, "pass"};
    rows[1] = {"lemma1", "n/a", 0.0, 0.0, "skip"};
    const std::string path = "/tmp/sage_check_test.csv";
    sage::verify::write_check_csv(path, rows);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "check,param,value,bound,pass");
    std::string line1;
    std::getline(in, line1);
    CHECK(line1.find("psd_sandwich") == 0);
    CHECK(line1.find("pass") != std::string::npos);
}
