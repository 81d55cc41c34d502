// sage: streaming gradient-agreement subset selection toolkit.
//
// Subcommands: synth, select, verify, experiment, bench. Every run echoes
// its fully resolved configuration (defaults included) to a JSON sidecar;
// re-running with --config <sidecar> reproduces the same outputs.
//
// Exit codes: 0 success, 2 configuration/usage, 3 I/O or data,
// 4 numerics convergence failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sage/errors.hpp"
#include "sage/gradient_file.hpp"
#include "sage/kernels.hpp"
#include "sage/logreg.hpp"
#include "sage/memtrack.hpp"
#include "sage/pipeline.hpp"
#include "sage/rng.hpp"
#include "sage/scoring.hpp"
#include "sage/sketch.hpp"
#include "sage/synth.hpp"
#include "sage/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw sage::IoError(path + ": cannot open config");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw sage::FormatError(path + ": bad JSON: " + e.what());
    }
    return j;
}

void write_sidecar(const std::string& subcommand, const fs::path& out_dir,
                   const json& options) {
    json side;
    side["tool"] = "sage";
    side["version"] = kToolVersion;
    side["subcommand"] = subcommand;
    side["kernel_backend"] =
        sage::kernels::backend_name(sage::kernels::active_backend());
    side["options"] = options;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const fs::path path = out_dir / (subcommand + ".config.json");
    std::ofstream out(path);
    if (!out) {
        throw sage::IoError(path.string() + ": cannot write sidecar");
    }
    out << side.dump(2) << '\n';
}

json sidecar_options(const std::string& path) {
    const json j = load_json(path);
    if (j.contains("options")) {
        return j.at("options");
    }
    return j;  // allow a bare options object as well
}

// Fields the user did not pass on argv take their values from the config
// file; explicit flags win.
template <typename T>
void merge_field(const CLI::App& app, const std::string& flag, const json& j,
                 const char* key, T& value) {
    const CLI::Option* opt = app.get_option(flag);
    if (opt != nullptr && opt->count() > 0) {
        return;
    }
    if (j.contains(key)) {
        j.at(key).get_to(value);
    }
}

void resolve_kernels(const std::string& name) {
    sage::kernels::force_backend(sage::kernels::parse_backend(name));
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
    bool blob = false;
    bool lowrank = false;
    std::size_t n = 1000;
    std::size_t d = 64;
    std::size_t rank = 4;
    double noise = 0.0;
    std::size_t classes = 3;
    std::size_t dim_feat = 16;
    double sigma = 1.0;
    double imbalance = 0.0;
    std::uint64_t seed = 29;
    std::string out;
    std::string grads_out;
    std::string kernels = "auto";
};

void to_json(json& j, const SynthOpts& o) {
    j = json{{"blob", o.blob},           {"lowrank", o.lowrank},
             {"n", o.n},                 {"d", o.d},
             {"rank", o.rank},           {"noise", o.noise},
             {"classes", o.classes},     {"dim_feat", o.dim_feat},
             {"sigma", o.sigma},         {"imbalance", o.imbalance},
             {"seed", o.seed},           {"out", o.out},
             {"grads_out", o.grads_out}, {"kernels", o.kernels}};
}

int run_synth(const CLI::App& app, SynthOpts o, const std::string& config) {
    if (!config.empty()) {
        const json j = sidecar_options(config);
        merge_field(app, "--blob", j, "blob", o.blob);
        merge_field(app, "--lowrank", j, "lowrank", o.lowrank);
        merge_field(app, "--n", j, "n", o.n);
        merge_field(app, "--d", j, "d", o.d);
        merge_field(app, "--rank", j, "rank", o.rank);
        merge_field(app, "--noise", j, "noise", o.noise);
        merge_field(app, "--classes", j, "classes", o.classes);
        merge_field(app, "--dim", j, "dim_feat", o.dim_feat);
        merge_field(app, "--sigma", j, "sigma", o.sigma);
        merge_field(app, "--imbalance", j, "imbalance", o.imbalance);
        merge_field(app, "--seed", j, "seed", o.seed);
        merge_field(app, "--grads-out", j, "grads_out", o.grads_out);
        merge_field(app, "--kernels", j, "kernels", o.kernels);
    }
    resolve_kernels(o.kernels);
    if (o.blob == o.lowrank) {
        throw sage::ConfigError("synth: pass exactly one of --blob/--lowrank");
    }

    if (o.lowrank) {
        const sage::num::DenseMatrix g =
            sage::data::synth_lowrank(o.n, o.d, o.rank, o.noise, o.seed);
        sage::data::write_gradients(o.out, g, std::nullopt);
        write_sidecar("synth", fs::path(o.out).parent_path(), json(o));
        std::cout << "wrote " << o.out << " (" << o.n << "x" << o.d << ")\n";
        return 0;
    }

    sage::data::BlobParams params;
    params.n = o.n;
    params.d_feat = o.dim_feat;
    params.class_count = o.classes;
    params.cluster_sigma = o.sigma;
    params.imbalance_ratio = o.imbalance;
    params.seed = o.seed;
    const sage::data::BlobDataset blobs = sage::data::make_blobs(params);

    fs::create_directories(o.out);
    const fs::path csv = fs::path(o.out) / "blobs.csv";
    sage::data::write_blobs_csv(csv.string(), blobs);
    std::cout << "wrote " << csv.string() << " (" << o.n << " examples, "
              << o.classes << " classes)\n";

    if (!o.grads_out.empty()) {
        // gradient snapshot: one warmup epoch on a seeded 10% subset
        std::vector<std::size_t> all(blobs.features.rows());
        std::iota(all.begin(), all.end(), 0);
        const sage::data::LogRegModel snapshot =
            sage::data::warmup_model(blobs, all, {}, o.seed);
        const sage::num::DenseMatrix g =
            sage::data::per_example_gradients(snapshot, blobs);
        sage::data::write_gradients(o.grads_out, g, blobs.labels);
        std::cout << "wrote " << o.grads_out << " (" << g.rows() << "x"
                  << g.cols() << ", labeled)\n";
    }
    write_sidecar("synth", o.out, json(o));
    return 0;
}

// --------------------------------------------------------------- select

struct SelectOpts {
    std::string grads;
    std::size_t ell = 16;
    double fraction = 0.25;
    bool class_balanced = false;
    std::uint64_t seed = 42;
    std::size_t batch = 256;
    std::size_t threads = 0;
    std::string out;
    std::string kernels = "auto";
};

void to_json(json& j, const SelectOpts& o) {
    j = json{{"grads", o.grads},     {"ell", o.ell},
             {"fraction", o.fraction},
             {"class_balanced", o.class_balanced},
             {"seed", o.seed},       {"batch", o.batch},
             {"threads", o.threads}, {"out", o.out},
             {"kernels", o.kernels}};
}

int run_select(const CLI::App& app, SelectOpts o, const std::string& config) {
    if (!config.empty()) {
        const json j = sidecar_options(config);
        merge_field(app, "--grads", j, "grads", o.grads);
        merge_field(app, "--ell", j, "ell", o.ell);
        merge_field(app, "--fraction", j, "fraction", o.fraction);
        merge_field(app, "--class-balanced", j, "class_balanced",
                    o.class_balanced);
        merge_field(app, "--seed", j, "seed", o.seed);
        merge_field(app, "--batch", j, "batch", o.batch);
        merge_field(app, "--threads", j, "threads", o.threads);
        merge_field(app, "--kernels", j, "kernels", o.kernels);
    }
    resolve_kernels(o.kernels);
    if (o.grads.empty()) {
        throw sage::ConfigError("select: --grads is required");
    }

    sage::pipeline::FileSource source(o.grads);
    sage::pipeline::SageConfig cfg;
    cfg.ell = o.ell;
    cfg.budget_fraction = o.fraction;
    cfg.class_balanced = o.class_balanced;
    cfg.seed = o.seed;
    cfg.batch_size = o.batch;
    cfg.threads = o.threads;

    std::vector<sage::scoring::ScoreRecord> scores;
    const sage::pipeline::RunReport rep =
        sage::pipeline::run_sage(source, cfg, &scores);

    if (rep.degenerate) {
        std::cerr << "warning: degenerate consensus (all agreement scores "
                     "zero); selection fell back to index order\n";
    }

    fs::create_directories(o.out);
    const fs::path out_dir(o.out);

    {
        std::ofstream idx(out_dir / "indices.txt");
        if (!idx) {
            throw sage::IoError(o.out + ": cannot write indices.txt");
        }
        for (const std::size_t i : rep.selection.indices) {
            idx << i << '\n';
        }
    }
    sage::scoring::write_scores_csv((out_dir / "scores.csv").string(),
                                    scores);

    json jr;
    jr["n"] = rep.n;
    jr["dim"] = rep.dim;
    jr["k"] = rep.k;
    jr["selected"] = rep.selection.indices.size();
    jr["degenerate_consensus"] = rep.degenerate;
    jr["truncated"] = rep.selection.truncated;
    jr["phase1_ms"] = rep.phase1_ms;
    jr["phase2_ms"] = rep.phase2_ms;
    jr["peak_sketch_bytes"] = rep.peak_sketch_bytes;
    jr["kernel_backend"] = rep.kernel_backend;
    jr["sketch"] = {{"shrink_count", rep.sketch_stats.shrink_count},
                    {"last_delta", rep.sketch_stats.last_delta},
                    {"frozen_rows", rep.sketch_stats.frozen_rows}};
    jr["scores"] = {{"min_alpha", rep.score_summary.min_alpha},
                    {"max_alpha", rep.score_summary.max_alpha},
                    {"mean_alpha", rep.score_summary.mean_alpha}};
    jr["consensus_mean_norm"] = rep.consensus_mean_norm;
    if (rep.selection.per_class_quotas.has_value()) {
        json q = json::object();
        for (const auto& [cls, quota] : *rep.selection.per_class_quotas) {
            q[std::to_string(cls)] = quota;
        }
        jr["per_class_quotas"] = q;
    }
    std::ofstream repout(out_dir / "report.json");
    repout << jr.dump(2) << '\n';

    write_sidecar("select", out_dir, json(o));
    std::cout << "selected " << rep.selection.indices.size() << " of "
              << rep.n << " (k=" << rep.k << ")\n";
    return 0;
}

// --------------------------------------------------------------- verify

struct VerifyOpts {
    std::string grads;
    std::size_t ell = 16;
    std::size_t kmax = 0;  // 0 = ceil(ell/2)
    bool suite = false;
    std::size_t cases = 100;
    std::uint64_t seed = 1;
    std::string out;
    std::string kernels = "auto";
};

void to_json(json& j, const VerifyOpts& o) {
    j = json{{"grads", o.grads}, {"ell", o.ell},   {"kmax", o.kmax},
             {"suite", o.suite}, {"cases", o.cases}, {"seed", o.seed},
             {"out", o.out},     {"kernels", o.kernels}};
}

struct VerifyTally {
    std::vector<sage::verify::CheckRow> rows;
    std::size_t failures = 0;
    std::size_t skips = 0;
};

void verify_one_stream(const sage::num::DenseMatrix& g, std::size_t ell,
                       std::size_t kmax, const std::string& tag,
                       VerifyTally& tally) {
    char param[160];

    try {
        sage::sketch::SketchState sk(ell, g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            sk.insert(g.row_span(i));
        }
        const sage::sketch::FrozenSketch fs = sk.freeze();
        const std::size_t k_hi =
            (kmax > 0) ? kmax : sage::verify::default_k_max(ell);
        const auto rep = sage::verify::check_psd_sandwich(g, fs, k_hi);

        std::snprintf(param, sizeof(param), "%s;psd;N=%zu;D=%zu;ell=%zu",
                      tag.c_str(), g.rows(), g.cols(), ell);
        tally.rows.push_back({"psd_min_eig", param, rep.min_eig_diff,
                              -rep.tol_psd,
                              rep.min_eig_diff >= -rep.tol_psd ? "pass"
                                                               : "fail"});
        for (const auto& [k, bound] : rep.bounds) {
            std::snprintf(param, sizeof(param),
                          "%s;N=%zu;D=%zu;ell=%zu;k=%zu", tag.c_str(),
                          g.rows(), g.cols(), ell, k);
            const bool ok = rep.max_eig_diff <= bound + rep.tol_bound;
            tally.rows.push_back({"fd_bound", param, rep.max_eig_diff,
                                  bound, ok ? "pass" : "fail"});
            if (!ok) {
                ++tally.failures;
            }
        }
        if (rep.min_eig_diff < -rep.tol_psd) {
            ++tally.failures;
        }

        // agreement-energy checks on the top-10% selection
        const auto oracle = sage::verify::naive_scores(g, fs, std::nullopt);
        const std::size_t k_sel =
            std::max<std::size_t>(1, g.rows() / 10);
        const auto sel = sage::scoring::select_top_k(oracle.records, k_sel);
        const auto lemma = sage::verify::check_lemma1(
            oracle.records, sel.indices, oracle.z_rows, oracle.u);
        std::snprintf(param, sizeof(param), "%s;T=%zu;xi=%.6g", tag.c_str(),
                      sel.indices.size(), lemma.xi);
        if (!lemma.applicable) {
            tally.rows.push_back({"lemma1", param, 0.0, 0.0, "skip"});
            ++tally.skips;
        } else {
            tally.rows.push_back({"lemma1", param, lemma.lhs, lemma.rhs,
                                  lemma.pass ? "pass" : "fail"});
            if (!lemma.pass) {
                ++tally.failures;
            }
        }
        const auto coro = sage::verify::check_corollary(
            oracle.records, sel.indices, oracle.z_rows, oracle.u);
        if (!coro.applicable) {
            tally.rows.push_back({"corollary", param, 0.0, 0.0, "skip"});
            ++tally.skips;
        } else {
            tally.rows.push_back({"corollary", param, coro.lhs, coro.rhs,
                                  coro.pass ? "pass" : "fail"});
            if (!coro.pass) {
                ++tally.failures;
            }
        }
    } catch (const sage::ScaleGuardError& e) {
        std::snprintf(param, sizeof(param), "%s;N=%zu;D=%zu;ell=%zu",
                      tag.c_str(), g.rows(), g.cols(), ell);
        tally.rows.push_back({"scale_guard", param, 0.0, 0.0, "skip"});
        ++tally.skips;
    }
}

int run_verify(const CLI::App& app, VerifyOpts o, const std::string& config) {
    if (!config.empty()) {
        const json j = sidecar_options(config);
        merge_field(app, "--grads", j, "grads", o.grads);
        merge_field(app, "--ell", j, "ell", o.ell);
        merge_field(app, "--kmax", j, "kmax", o.kmax);
        merge_field(app, "--suite", j, "suite", o.suite);
        merge_field(app, "--cases", j, "cases", o.cases);
        merge_field(app, "--seed", j, "seed", o.seed);
        merge_field(app, "--kernels", j, "kernels", o.kernels);
    }
    resolve_kernels(o.kernels);

    VerifyTally tally;
    if (o.suite) {
        sage::Rng rng(o.seed);
        const std::size_t ells[] = {4, 8, 16, 32};
        for (std::size_t c = 0; c < o.cases; ++c) {
            const std::size_t n = 100 + rng.below(4901);
            const std::size_t d = 16 + rng.below(113);
            const std::size_t ell = std::min(ells[rng.below(4)], d);
            const bool lowrank = (rng.below(2) == 0);
            sage::num::DenseMatrix g(0, 0);
            if (lowrank) {
                const std::size_t rank =
                    1 + rng.below(std::min<std::size_t>(8, d));
                const double noise = 0.01 + 0.5 * rng.uniform01();
                g = sage::data::synth_lowrank(n, d, rank, noise,
                                              rng.next_u64());
            } else {
                g = sage::num::DenseMatrix(n, d);
                sage::Rng gen(rng.next_u64());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g.data()[i] = gen.normal();
                }
            }
            verify_one_stream(g, ell, o.kmax, "case" + std::to_string(c),
                              tally);
        }
    } else {
        if (o.grads.empty()) {
            throw sage::ConfigError(
                "verify: pass --grads FILE or --suite");
        }
        const auto gm = sage::data::read_gradients(o.grads);
        verify_one_stream(gm.values, o.ell, o.kmax, "file", tally);
    }

    if (!o.out.empty()) {
        sage::verify::write_check_csv(o.out, tally.rows);
    }
    std::size_t passes = 0;
    for (const auto& r : tally.rows) {
        if (r.status == "pass") {
            ++passes;
        }
    }
    std::cout << "checks: " << passes << " pass, " << tally.failures
              << " fail, " << tally.skips << " skip\n";
    if (!config.empty() || true) {
        // sidecar next to the CSV when one was written
        if (!o.out.empty()) {
            write_sidecar("verify", fs::path(o.out).parent_path(), json(o));
        }
    }
    return tally.failures == 0 ? 0 : 1;
}

// ----------------------------------------------------------- experiment

struct ExperimentOpts {
    std::size_t n = 3000;
    std::size_t classes = 5;
    std::size_t dim_feat = 16;
    double sigma = 1.0;
    double imbalance = 0.0;
    std::uint64_t data_seed = 29;
    std::vector<double> fractions = {0.05, 0.15, 0.25, 1.0};
    std::vector<std::string> methods = {"sage", "random"};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::size_t ell = 16;
    std::size_t epochs = 40;
    double lr = 0.5;
    std::size_t batch = 32;
    std::size_t threads = 0;
    std::string out;
    std::string kernels = "auto";
};

void to_json(json& j, const ExperimentOpts& o) {
    j = json{{"n", o.n},
             {"classes", o.classes},
             {"dim_feat", o.dim_feat},
             {"sigma", o.sigma},
             {"imbalance", o.imbalance},
             {"data_seed", o.data_seed},
             {"fractions", o.fractions},
             {"methods", o.methods},
             {"seeds", o.seeds},
             {"ell", o.ell},
             {"epochs", o.epochs},
             {"lr", o.lr},
             {"batch", o.batch},
             {"threads", o.threads},
             {"out", o.out},
             {"kernels", o.kernels}};
}

int run_experiment(const CLI::App& app, ExperimentOpts o,
                   const std::string& config) {
    if (!config.empty()) {
        const json j = sidecar_options(config);
        merge_field(app, "--n", j, "n", o.n);
        merge_field(app, "--classes", j, "classes", o.classes);
        merge_field(app, "--dim", j, "dim_feat", o.dim_feat);
        merge_field(app, "--sigma", j, "sigma", o.sigma);
        merge_field(app, "--imbalance", j, "imbalance", o.imbalance);
        merge_field(app, "--data-seed", j, "data_seed", o.data_seed);
        merge_field(app, "--fractions", j, "fractions", o.fractions);
        merge_field(app, "--methods", j, "methods", o.methods);
        merge_field(app, "--seeds", j, "seeds", o.seeds);
        merge_field(app, "--ell", j, "ell", o.ell);
        merge_field(app, "--epochs", j, "epochs", o.epochs);
        merge_field(app, "--lr", j, "lr", o.lr);
        merge_field(app, "--batch", j, "batch", o.batch);
        merge_field(app, "--threads", j, "threads", o.threads);
        merge_field(app, "--kernels", j, "kernels", o.kernels);
    }
    resolve_kernels(o.kernels);

    sage::pipeline::ExperimentParams params;
    params.blob.n = o.n;
    params.blob.class_count = o.classes;
    params.blob.d_feat = o.dim_feat;
    params.blob.cluster_sigma = o.sigma;
    params.blob.imbalance_ratio = o.imbalance;
    params.blob.seed = o.data_seed;
    params.fractions = o.fractions;
    params.methods = o.methods;
    params.seeds = o.seeds;
    params.ell = o.ell;
    params.train = {o.epochs, o.lr, o.batch};
    params.threads = o.threads;

    const auto report = sage::pipeline::accuracy_retention_experiment(params);

    fs::create_directories(o.out);
    const fs::path out_dir(o.out);
    sage::pipeline::write_experiment_csv((out_dir / "report.csv").string(),
                                         report);
    sage::pipeline::write_experiment_summary_csv(
        (out_dir / "report_summary.csv").string(), report);
    write_sidecar("experiment", out_dir, json(o));

    for (const auto& agg : report.aggregates) {
        std::printf("%-8s f=%.2f  acc=%.4f +/- %.4f  rel=%.4f\n",
                    agg.method.c_str(), agg.fraction, agg.mean_accuracy,
                    agg.std_accuracy, agg.mean_relative);
    }
    return 0;
}

// ---------------------------------------------------------------- bench

struct BenchOpts {
    std::vector<std::size_t> n_list = {1000, 100000};
    std::size_t d = 128;
    std::size_t ell = 16;
    std::size_t rank = 8;
    double noise = 0.1;
    double fraction = 0.1;
    std::size_t repeats = 1;
    std::uint64_t seed = 3;
    std::size_t threads = 0;
    std::string out;
    std::string kernels = "auto";
};

void to_json(json& j, const BenchOpts& o) {
    j = json{{"n_list", o.n_list},     {"d", o.d},
             {"ell", o.ell},           {"rank", o.rank},
             {"noise", o.noise},       {"fraction", o.fraction},
             {"repeats", o.repeats},   {"seed", o.seed},
             {"threads", o.threads},   {"out", o.out},
             {"kernels", o.kernels}};
}

int run_bench(const CLI::App& app, BenchOpts o, const std::string& config) {
    if (!config.empty()) {
        const json j = sidecar_options(config);
        merge_field(app, "--n-list", j, "n_list", o.n_list);
        merge_field(app, "--d", j, "d", o.d);
        merge_field(app, "--ell", j, "ell", o.ell);
        merge_field(app, "--rank", j, "rank", o.rank);
        merge_field(app, "--noise", j, "noise", o.noise);
        merge_field(app, "--fraction", j, "fraction", o.fraction);
        merge_field(app, "--repeats", j, "repeats", o.repeats);
        merge_field(app, "--seed", j, "seed", o.seed);
        merge_field(app, "--threads", j, "threads", o.threads);
        merge_field(app, "--kernels", j, "kernels", o.kernels);
    }
    resolve_kernels(o.kernels);
    if (o.repeats == 0) {
        throw sage::ConfigError("bench: --repeats must be positive");
    }

    std::ofstream csv;
    if (!o.out.empty()) {
        csv.open(o.out);
        if (!csv) {
            throw sage::IoError(o.out + ": cannot open for writing");
        }
    }
    const char* header =
        "n,d,ell,phase1_ms,phase2_ms,total_ms,peak_sketch_bytes,"
        "tracked_peak_bytes\n";
    if (csv.is_open()) {
        csv << header;
    }
    std::printf("%s", header);

    for (const std::size_t n : o.n_list) {
        double best_p1 = 0.0, best_p2 = 0.0;
        std::size_t peak_bytes = 0, tracked = 0;
        for (std::size_t r = 0; r < o.repeats; ++r) {
            sage::pipeline::LowRankStreamSource source(n, o.d, o.rank,
                                                       o.noise, o.seed);
            sage::pipeline::SageConfig cfg;
            cfg.ell = o.ell;
            cfg.budget_fraction = o.fraction;
            cfg.seed = o.seed;
            cfg.threads = o.threads;

            const std::size_t live0 = sage::memtrack::live_bytes();
            sage::memtrack::reset_peak();
            const auto rep = sage::pipeline::run_sage(source, cfg);
            const std::size_t delta = sage::memtrack::peak_bytes() - live0;

            if (r == 0 || rep.phase1_ms < best_p1) {
                best_p1 = rep.phase1_ms;
            }
            if (r == 0 || rep.phase2_ms < best_p2) {
                best_p2 = rep.phase2_ms;
            }
            peak_bytes = rep.peak_sketch_bytes;
            tracked = delta;
        }
        char line[200];
        std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%.3f,%.3f,%.3f,%zu,%zu\n",
                      n, o.d, o.ell, best_p1, best_p2, best_p1 + best_p2,
                      peak_bytes, tracked);
        if (csv.is_open()) {
            csv << line;
        }
        std::printf("%s", line);
    }
    if (!o.out.empty()) {
        write_sidecar("bench", fs::path(o.out).parent_path(), json(o));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sage: streaming gradient-agreement subset selection"};
    app.require_subcommand(1);

    SynthOpts synth;
    std::string synth_config;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate datasets and gradient files");
    synth_cmd->add_flag("--blob", synth.blob, "Gaussian blob dataset");
    synth_cmd->add_flag("--lowrank", synth.lowrank,
                        "low-rank-plus-noise gradient matrix");
    synth_cmd->add_option("--n", synth.n, "example count");
    synth_cmd->add_option("--d", synth.d, "gradient dimension (lowrank)");
    synth_cmd->add_option("--rank", synth.rank, "target rank (lowrank)");
    synth_cmd->add_option("--noise", synth.noise, "noise sigma (lowrank)");
    synth_cmd->add_option("--classes", synth.classes, "class count (blob)");
    synth_cmd->add_option("--dim", synth.dim_feat, "feature dim (blob)");
    synth_cmd->add_option("--sigma", synth.sigma, "cluster sigma (blob)");
    synth_cmd->add_option("--imbalance", synth.imbalance,
                          "geometric class-ratio (blob; 0 = balanced)");
    synth_cmd->add_option("--seed", synth.seed, "rng seed");
    synth_cmd->add_option("--out", synth.out,
                          "output dir (blob) or file (lowrank)")
        ->required();
    synth_cmd->add_option("--grads-out", synth.grads_out,
                          "also write a labeled gradient file (blob)");
    synth_cmd->add_option("--kernels", synth.kernels,
                          "kernel backend: auto|scalar|avx2|neon");
    synth_cmd->add_option("--config", synth_config,
                          "load options from a sidecar JSON");

    SelectOpts select;
    std::string select_config;
    CLI::App* select_cmd =
        app.add_subcommand("select", "run subset selection on gradients");
    select_cmd->add_option("--grads", select.grads, "gradient file");
    select_cmd->add_option("--ell", select.ell, "sketch size");
    select_cmd->add_option("--fraction", select.fraction,
                           "subset fraction in (0,1]");
    select_cmd->add_flag("--class-balanced", select.class_balanced,
                         "per-class consensus and quotas");
    select_cmd->add_option("--seed", select.seed, "rng seed");
    select_cmd->add_option("--batch", select.batch,
                           "phase 1 streaming batch rows");
    select_cmd->add_option("--threads", select.threads,
                           "worker cap (0 = hardware)");
    select_cmd->add_option("--out", select.out, "output directory")
        ->required();
    select_cmd->add_option("--kernels", select.kernels,
                           "kernel backend: auto|scalar|avx2|neon");
    select_cmd->add_option("--config", select_config,
                           "load options from a sidecar JSON");

    VerifyOpts verify;
    std::string verify_config;
    CLI::App* verify_cmd = app.add_subcommand(
        "verify", "check the sketch guarantee and score inequalities");
    verify_cmd->add_option("--grads", verify.grads, "gradient file");
    verify_cmd->add_option("--ell", verify.ell, "sketch size");
    verify_cmd->add_option("--kmax", verify.kmax,
                           "bound range (0 = ceil(ell/2))");
    verify_cmd->add_flag("--suite", verify.suite,
                         "run the seeded randomized suite");
    verify_cmd->add_option("--cases", verify.cases, "suite case count");
    verify_cmd->add_option("--seed", verify.seed, "suite seed");
    verify_cmd->add_option("--out", verify.out, "verdict CSV path");
    verify_cmd->add_option("--kernels", verify.kernels,
                           "kernel backend: auto|scalar|avx2|neon");
    verify_cmd->add_option("--config", verify_config,
                           "load options from a sidecar JSON");

    ExperimentOpts exp;
    std::string exp_config;
    CLI::App* exp_cmd = app.add_subcommand(
        "experiment", "subset-fraction accuracy retention on blob data");
    exp_cmd->add_option("--n", exp.n, "dataset size");
    exp_cmd->add_option("--classes", exp.classes, "class count");
    exp_cmd->add_option("--dim", exp.dim_feat, "feature dimension");
    exp_cmd->add_option("--sigma", exp.sigma, "cluster sigma");
    exp_cmd->add_option("--imbalance", exp.imbalance,
                        "geometric class-ratio (0 = balanced)");
    exp_cmd->add_option("--data-seed", exp.data_seed, "dataset seed");
    exp_cmd->add_option("--fractions", exp.fractions, "subset fractions")
        ->delimiter(',');
    exp_cmd->add_option("--methods", exp.methods,
                        "methods: sage,cb_sage,random")
        ->delimiter(',');
    exp_cmd->add_option("--seeds", exp.seeds, "repetition seeds")
        ->delimiter(',');
    exp_cmd->add_option("--ell", exp.ell, "sketch size");
    exp_cmd->add_option("--epochs", exp.epochs, "training epochs");
    exp_cmd->add_option("--lr", exp.lr, "learning rate");
    exp_cmd->add_option("--batch", exp.batch, "training batch size");
    exp_cmd->add_option("--threads", exp.threads, "worker cap");
    exp_cmd->add_option("--out", exp.out, "output directory")->required();
    exp_cmd->add_option("--kernels", exp.kernels,
                        "kernel backend: auto|scalar|avx2|neon");
    exp_cmd->add_option("--config", exp_config,
                        "load options from a sidecar JSON");

    BenchOpts bench;
    std::string bench_config;
    CLI::App* bench_cmd = app.add_subcommand(
        "bench", "timing and sketch-memory measurements over n");
    bench_cmd->add_option("--n-list", bench.n_list, "stream lengths")
        ->delimiter(',');
    bench_cmd->add_option("--d", bench.d, "gradient dimension");
    bench_cmd->add_option("--ell", bench.ell, "sketch size");
    bench_cmd->add_option("--rank", bench.rank, "stream rank");
    bench_cmd->add_option("--noise", bench.noise, "stream noise sigma");
    bench_cmd->add_option("--fraction", bench.fraction, "subset fraction");
    bench_cmd->add_option("--repeats", bench.repeats,
                          "repetitions (min is reported)");
    bench_cmd->add_option("--seed", bench.seed, "stream seed");
    bench_cmd->add_option("--threads", bench.threads, "worker cap");
    bench_cmd->add_option("--out", bench.out, "CSV path");
    bench_cmd->add_option("--kernels", bench.kernels,
                          "kernel backend: auto|scalar|avx2|neon");
    bench_cmd->add_option("--config", bench_config,
                          "load options from a sidecar JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) {
            return run_synth(*synth_cmd, synth, synth_config);
        }
        if (select_cmd->parsed()) {
            return run_select(*select_cmd, select, select_config);
        }
        if (verify_cmd->parsed()) {
            return run_verify(*verify_cmd, verify, verify_config);
        }
        if (exp_cmd->parsed()) {
            return run_experiment(*exp_cmd, exp, exp_config);
        }
        if (bench_cmd->parsed()) {
            return run_bench(*bench_cmd, bench, bench_config);
        }
    } catch (const sage::ConvergenceError& e) {
        std::cerr << "numerics error: " << e.what() << "\n";
        return 4;
    } catch (const sage::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sage::BudgetError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sage::ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sage::ScaleGuardError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sage::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
