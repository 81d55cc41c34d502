#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include "doctest.h"
#include "sage/errors.hpp"
#include "sage/gradient_file.hpp"
#include "sage/logreg.hpp"
#include "sage/rng.hpp"
#include "sage/synth.hpp"

namespace fs = std::filesystem;
using sage::num::DenseMatrix;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sage_data_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const char* name) const { return (path / name).string(); }
};

DenseMatrix random_rows(std::size_t n, std::size_t d, sage::Rng& rng) {
    DenseMatrix g(n, d);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.data()[i] = rng.normal();
    }
    return g;
}

}  // namespace

TEST_CASE("gradient file round-trip is bit-identical at float64") {
    TempDir tmp;
    sage::Rng rng(1);
    const DenseMatrix g = random_rows(10, 4, rng);
    std::vector<std::uint32_t> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    const std::string path = tmp.file("roundtrip.sagegrdm");
    sage::data::write_gradients(path, g, labels);

    const auto back = sage::data::read_gradients(path);
    CHECK(back.values == g);
    REQUIRE(back.labels.has_value());
    CHECK(*back.labels == labels);
    CHECK(back.stored_dtype == sage::data::GradDtype::f64);
}

TEST_CASE("float32 files upcast with float32 precision") {
    TempDir tmp;
    sage::Rng rng(2);
    const DenseMatrix g = random_rows(6, 5, rng);
    const std::string path = tmp.file("f32.sagegrdm");
    sage::data::write_gradients(path, g, std::nullopt,
                                sage::data::GradDtype::f32);
    const auto back = sage::data::read_gradients(path);
    CHECK(back.stored_dtype == sage::data::GradDtype::f32);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(back.values.data()[i] ==
              double(static_cast<float>(g.data()[i])));
    }
}

TEST_CASE("truncated and corrupted files raise format errors") {
    TempDir tmp;
    sage::Rng rng(3);
    const DenseMatrix g = random_rows(8, 3, rng);
    const std::string path = tmp.file("trunc.sagegrdm");
    sage::data::write_gradients(path, g, std::nullopt);

    // chop the last 7 bytes
    const auto full = fs::file_size(path);
    fs::resize_file(path, full - 7);
    CHECK_THROWS_AS(sage::data::read_gradients(path), sage::FormatError);

    // bad magic
    const std::string bad = tmp.file("magic.sagegrdm");
    sage::data::write_gradients(bad, g, std::nullopt);
    {
        std::fstream f(bad, std::ios::in | std::ios::out | std::ios::binary);
        f.write("NOTSAGE!", 8);
    }
    CHECK_THROWS_AS(sage::data::read_gradients(bad), sage::FormatError);

    // trailing garbage
    const std::string fat = tmp.file("fat.sagegrdm");
    sage::data::write_gradients(fat, g, std::nullopt);
    {
        std::ofstream f(fat, std::ios::app | std::ios::binary);
        f.write("xx", 2);
    }
    CHECK_THROWS_AS(sage::data::read_gradients(fat), sage::FormatError);
}

TEST_CASE("non-finite values are rejected on write") {
    TempDir tmp;
    DenseMatrix g(2, 2);
    g.at(1, 0) = std::nan("");
    CHECK_THROWS_WITH_AS(
        sage::data::write_gradients(tmp.file("nan.sagegrdm"), g,
                                    std::nullopt),
        doctest::Contains("row 1"), sage::DataError);
}

TEST_CASE("synth_lowrank produces exact low rank without noise") {
    const DenseMatrix g = sage::data::synth_lowrank(30, 12, 2, 0.0, 7);
    // oracle tail energy at k = rank is zero: verified through the
    // spectrum in test_verify; here a cheap structural check
    CHECK(g.rows() == 30);
    CHECK(g.cols() == 12);
    CHECK(g.all_finite());

    const DenseMatrix again = sage::data::synth_lowrank(30, 12, 2, 0.0, 7);
    CHECK(g == again);

    CHECK_THROWS_AS(sage::data::synth_lowrank(4, 4, 5, 0.0, 1),
                    sage::ConfigError);
}

TEST_CASE("make_blobs honors shape, determinism, and imbalance") {
    sage::data::BlobParams p;
    p.n = 300;
    p.d_feat = 8;
    p.class_count = 3;
    p.seed = 29;
    const auto blobs = sage::data::make_blobs(p);
    CHECK(blobs.features.rows() == 300);
    CHECK(blobs.labels.size() == 300);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto l : blobs.labels) {
        REQUIRE(l < 3);
        ++counts[l];
    }
    // near-equal class sizes
    CHECK(counts[0] == 100);
    CHECK(counts[1] == 100);
    CHECK(counts[2] == 100);

    const auto again = sage::data::make_blobs(p);
    CHECK(blobs.features == again.features);
    CHECK(blobs.labels == again.labels);

    // geometric imbalance 8:4:2:1
    sage::data::BlobParams imb;
    imb.n = 1500;
    imb.d_feat = 6;
    imb.class_count = 4;
    imb.imbalance_ratio = 0.5;
    imb.seed = 5;
    const auto skewed = sage::data::make_blobs(imb);
    std::size_t sc[4] = {0, 0, 0, 0};
    for (const auto l : skewed.labels) {
        ++sc[l];
    }
    CHECK(std::abs(int(sc[0]) - 800) <= 1);
    CHECK(std::abs(int(sc[1]) - 400) <= 1);
    CHECK(std::abs(int(sc[2]) - 200) <= 1);
    CHECK(std::abs(int(sc[3]) - 100) <= 1);

    CHECK_THROWS_AS(
        sage::data::make_blobs(sage::data::BlobParams{2, 4, 3, 1.0, 1, 0.0}),
        sage::ConfigError);
}

TEST_CASE("separable blobs in the zero-noise limit train to 100%") {
    sage::data::BlobParams p;
    p.n = 200;
    p.d_feat = 4;
    p.class_count = 3;
    p.cluster_sigma = 1e-6;
    p.seed = 3;
    const auto blobs = sage::data::make_blobs(p);
    const auto res = sage::data::train_logreg(blobs, std::nullopt,
                                              {20, 0.5, 32}, 1);
    CHECK(res.accuracy == 1.0);
}

TEST_CASE("per-example gradients match central finite differences") {
    sage::Rng rng(11);
    sage::data::BlobParams p;
    p.n = 24;
    p.d_feat = 5;
    p.class_count = 3;
    p.seed = 13;
    const auto blobs = sage::data::make_blobs(p);

    for (int trial = 0; trial < 20; ++trial) {
        // random model, random example
        sage::data::LogRegModel model = sage::data::make_model(3, 5);
        for (std::size_t i = 0; i < model.weights.size(); ++i) {
            model.weights.data()[i] = 0.5 * rng.normal();
        }
        for (double& b : model.bias) {
            b = 0.5 * rng.normal();
        }
        const std::size_t ex = rng.below(24);
        const auto x = blobs.features.row_span(ex);
        const std::uint32_t y = blobs.labels[ex];

        std::vector<double> grad(model.grad_dim());
        sage::data::example_gradient(model, x, y, grad);

        const double h = 1e-5;
        double err_sq = 0.0, norm_sq = 0.0;
        for (std::size_t j = 0; j < model.grad_dim(); ++j) {
            auto poke = [&](double delta) {
                sage::data::LogRegModel m2 = model;
                const std::size_t c = model.class_count();
                const std::size_t d = model.d_feat();
                if (j < c * d) {
                    m2.weights.data()[j] += delta;
                } else {
                    m2.bias[j - c * d] += delta;
                }
                return sage::data::example_loss(m2, x, y);
            };
            const double fd = (poke(h) - poke(-h)) / (2.0 * h);
            err_sq += (fd - grad[j]) * (fd - grad[j]);
            norm_sq += grad[j] * grad[j];
        }
        CHECK(std::sqrt(err_sq) <=
              1e-6 * std::max(std::sqrt(norm_sq), 1e-3));
    }
}

TEST_CASE("gradient norm vanishes as the prediction approaches one-hot") {
    sage::data::LogRegModel model = sage::data::make_model(2, 2);
    // huge margin toward class 0
    model.weights.at(0, 0) = 50.0;
    model.weights.at(1, 0) = -50.0;
    const std::vector<double> x = {1.0, 0.0};
    std::vector<double> grad(model.grad_dim());
    sage::data::example_gradient(model, x, 0, grad);
    double norm = 0.0;
    for (const double v : grad) {
        norm += v * v;
    }
    CHECK(std::sqrt(norm) <= 1e-20);
}

TEST_CASE("duplicated examples produce identical gradient rows") {
    sage::data::BlobParams p;
    p.n = 10;
    p.d_feat = 3;
    p.class_count = 2;
    p.seed = 17;
    auto blobs = sage::data::make_blobs(p);
    // force rows 4 and 5 identical
    for (std::size_t j = 0; j < 3; ++j) {
        blobs.features.at(5, j) = blobs.features.at(4, j);
    }
    blobs.labels[5] = blobs.labels[4];

    const auto model = sage::data::make_model(2, 3);
    const auto g = sage::data::per_example_gradients(model, blobs);
    CHECK(std::memcmp(g.row(4), g.row(5), 3 * sizeof(double)) != 1);
    for (std::size_t j = 0; j < g.cols(); ++j) {
        CHECK(g.at(4, j) == g.at(5, j));
    }
}

TEST_CASE("training is deterministic and handles tiny subsets") {
    sage::data::BlobParams p;
    p.n = 120;
    p.d_feat = 4;
    p.class_count = 3;
    p.seed = 23;
    const auto blobs = sage::data::make_blobs(p);

    const auto a = sage::data::train_logreg(blobs, std::nullopt,
                                            {15, 0.5, 32}, 9);
    const auto b = sage::data::train_logreg(blobs, std::nullopt,
                                            {15, 0.5, 32}, 9);
    CHECK(a.accuracy == b.accuracy);

    const std::vector<std::size_t> one = {0};
    const auto tiny = sage::data::train_logreg(blobs, one, {5, 0.5, 32}, 9);
    const auto tiny2 = sage::data::train_logreg(blobs, one, {5, 0.5, 32}, 9);
    CHECK(tiny.accuracy == tiny2.accuracy);
    CHECK(tiny.train_count == 1);

    CHECK_THROWS_AS(sage::data::train_logreg(
                        blobs, std::vector<std::size_t>{}, {5, 0.5, 32}, 9),
                    sage::BudgetError);
}

TEST_CASE("default blob benchmark trains to the pinned accuracy floor") {
    sage::data::BlobParams p;
    p.n = 600;
    p.d_feat = 8;
    p.class_count = 3;
    p.seed = 29;
    const auto blobs = sage::data::make_blobs(p);
    const auto res = sage::data::train_logreg(blobs, std::nullopt,
                                              {40, 0.5, 32}, 29);
    CHECK(res.accuracy >= 0.9);
}

TEST_CASE("blob CSV export writes feature...,label rows") {
    TempDir tmp;
    sage::data::BlobParams p;
    p.n = 5;
    p.d_feat = 2;
    p.class_count = 2;
    p.seed = 31;
    const auto blobs = sage::data::make_blobs(p);
    const std::string path = tmp.file("blobs.csv");
    sage::data::write_blobs_csv(path, blobs);

    std::ifstream in(path);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 2);
        ++rows;
    }
    CHECK(rows == 5);
}
