// SPDX-License-Identifier: MIT
//
// tenfactor: tensor factor model estimation, factor-count testing, and
// Monte-Carlo studies on dense d-way tensors.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tenfactor/tenfactor.hpp"

namespace {

using namespace tenfactor;

std::string detect_format(const std::string& path, const std::string& requested) {
    if (!requested.empty()) return requested;
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return "csv-long";
    return "tnsr";
}

int resolve_cli_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("TENFACTOR_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 0;  // library default: all cores
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw io_error("short write: " + path);
}

void emit_json(const nlohmann::json& j, const std::string& out_path) {
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        write_text(out_path, text);
}

/// Percent with up to two decimals, trailing zeros trimmed: 0.25%, 1.17%, 7%.
std::string format_percent(double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s + "%";
}

std::vector<double> load_or_build_null(const TestSpec& spec, const std::string& cache_path,
                                        int threads) {
    if (!cache_path.empty()) {
        std::ifstream in(cache_path);
        if (in) {
            nlohmann::json j;
            in >> j;
            if (j.value("schema", "") == "null-cache/1" && j.at("k").get<int>() == spec.k &&
                j.at("K").get<int>() == spec.K && j.at("m").get<int>() == spec.m &&
                j.at("null_dim").get<Index>() == spec.null_dim &&
                j.at("seed").get<std::uint64_t>() == spec.seed) {
                return j.at("draws").get<std::vector<double>>();
            }
            std::cerr << "tenfactor: null cache parameters differ; regenerating\n";
        }
    }
    std::vector<double> draws = simulate_null(spec, threads);
    if (!cache_path.empty()) {
        nlohmann::json j;
        j["schema"] = "null-cache/1";
        j["library_version"] = k_version;
        j["k"] = spec.k;
        j["K"] = spec.K;
        j["m"] = spec.m;
        j["null_dim"] = spec.null_dim;
        j["seed"] = spec.seed;
        j["draws"] = draws;
        write_text(cache_path, j.dump() + "\n");
    }
    return draws;
}

int run(int argc, char** argv) {
    CLI::App app{"tensor factor models: mode-wise PCA estimation, ALS baseline, "
                 "factor-count test, Monte-Carlo studies"};
    app.require_subcommand(1);
    int threads_flag = 0;
    app.add_option("--threads", threads_flag, "thread cap (0 = all cores or TENFACTOR_THREADS)");

    // unfold
    auto* cmd_unfold = app.add_subcommand("unfold", "print a mode-j matricization as CSV");
    int unfold_mode = 1;
    std::string unfold_input, unfold_output, unfold_format;
    cmd_unfold->add_option("--mode", unfold_mode, "mode to unfold along (1-based)")->required();
    cmd_unfold->add_option("input", unfold_input, "tensor file")->required();
    cmd_unfold->add_option("-o,--output", unfold_output, "output CSV path (default stdout)");
    cmd_unfold->add_option("--format", unfold_format, "input format: tnsr or csv-long");

    // tpca
    auto* cmd_tpca = app.add_subcommand("tpca", "mode-wise PCA fit");
    Index tpca_rank = 1;
    std::string tpca_input, tpca_output, tpca_format, tpca_scale_rule = "largest-mode";
    std::uint64_t tpca_seed = 0;
    bool tpca_seed_given = false;
    cmd_tpca->add_option("--rank", tpca_rank, "number of factors")->required();
    cmd_tpca->add_option("--scale-rule", tpca_scale_rule,
                         "largest-mode, mean, or per-mode");
    cmd_tpca->add_option("--seed", tpca_seed, "echoed into the output for provenance")
        ->each([&](const std::string&) { tpca_seed_given = true; });
    cmd_tpca->add_option("input", tpca_input, "tensor file")->required();
    cmd_tpca->add_option("-o,--output", tpca_output, "output JSON path (default stdout)");
    cmd_tpca->add_option("--format", tpca_format, "input format: tnsr or csv-long");

    // pooled-pca
    auto* cmd_pooled = app.add_subcommand("pooled-pca", "pooled 2-way PCA baseline");
    Index pooled_rank = 1;
    int pooled_keep = 1;
    std::string pooled_input, pooled_output, pooled_format;
    cmd_pooled->add_option("--rank", pooled_rank, "number of factors")->required();
    cmd_pooled->add_option("--keep-mode", pooled_keep,
                           "mode kept unpooled (1-based, default 1)");
    cmd_pooled->add_option("input", pooled_input, "tensor file")->required();
    cmd_pooled->add_option("-o,--output", pooled_output, "output JSON path (default stdout)");
    cmd_pooled->add_option("--format", pooled_format, "input format: tnsr or csv-long");

    // als
    auto* cmd_als = app.add_subcommand("als", "alternating least squares CP fit");
    Index als_rank = 1;
    std::uint64_t als_seed = 0;
    int als_max_iter = 500;
    double als_tol = 1e-8;
    std::string als_init = "random-uniform";
    std::string als_input, als_output, als_format;
    cmd_als->add_option("--rank", als_rank, "number of factors")->required();
    cmd_als->add_option("--seed", als_seed, "RNG seed for the initialization")->required();
    cmd_als->add_option("--max-iter", als_max_iter, "maximum sweeps");
    cmd_als->add_option("--tol", als_tol, "fit-change stopping tolerance");
    cmd_als->add_option("--init", als_init, "random-uniform or hosvd-warm");
    cmd_als->add_option("input", als_input, "tensor file")->required();
    cmd_als->add_option("-o,--output", als_output, "output JSON path (default stdout)");
    cmd_als->add_option("--format", als_format, "input format: tnsr or csv-long");

    // test
    auto* cmd_test = app.add_subcommand("test", "factor-count hypothesis test");
    TestSpec tspec;
    std::string test_input, test_output, test_format, null_cache;
    cmd_test->add_option("--k", tspec.k, "null: at most k factors")->required();
    cmd_test->add_option("--K", tspec.K, "alternative upper bound")->required();
    cmd_test->add_option("--m", tspec.m, "Monte-Carlo null draws");
    cmd_test->add_option("--seed", tspec.seed, "RNG seed for the null")->required();
    cmd_test->add_option("--null-dim", tspec.null_dim,
                         "null matrix side (default: smallest mode dim, capped 256)");
    cmd_test->add_option("--null-cache", null_cache, "persist/reuse the sorted null sample");
    cmd_test->add_option("input", test_input, "tensor file")->required();
    cmd_test->add_option("-o,--output", test_output, "output JSON path (default stdout)");
    cmd_test->add_option("--format", test_format, "input format: tnsr or csv-long");

    // simulate
    auto* cmd_sim = app.add_subcommand("simulate", "run a Monte-Carlo study");
    std::string sim_config, sim_study, sim_output, sim_csv;
    std::uint64_t sim_seed = 0;
    int sim_reps = 0;
    cmd_sim->add_option("--config", sim_config, "study config file (mc-study/1 keys)")->required();
    cmd_sim->add_option("--study", sim_study, "override the study kind");
    cmd_sim->add_option("--reps", sim_reps, "override replication count");
    cmd_sim->add_option("--seed", sim_seed, "RNG seed")->required();
    cmd_sim->add_option("-o,--output", sim_output, "output JSON path (default stdout)");
    cmd_sim->add_option("--csv", sim_csv, "also write the tidy CSV here");

    // complexity
    auto* cmd_cplx = app.add_subcommand("complexity", "model parameter count as % of data size");
    std::string cplx_shape;
    Index cplx_rank = 1;
    bool cplx_pooled = false;
    int cplx_keep = 1;
    cmd_cplx->add_option("--shape", cplx_shape, "comma-separated dims, e.g. 100,30,20")->required();
    cmd_cplx->add_option("--rank", cplx_rank, "number of factors")->required();
    cmd_cplx->add_flag("--pooled", cplx_pooled, "pooled 2-way model instead of d-way");
    cmd_cplx->add_option("--keep-mode", cplx_keep, "mode kept unpooled (1-based, default 1)");

    app.parse(argc, argv);
    const int threads = resolve_cli_threads(threads_flag);

    if (*cmd_unfold) {
        DenseTensor t = read_tensor(unfold_input, detect_format(unfold_input, unfold_format));
        if (unfold_mode < 1 || unfold_mode > t.order())
            throw std::domain_error("unfold: --mode must be in [1, tensor order]");
        const std::string csv = matrix_to_csv(unfold(t, unfold_mode - 1).values);
        if (unfold_output.empty())
            std::cout << csv;
        else
            write_text(unfold_output, csv);
        return 0;
    }

    if (*cmd_tpca) {
        DenseTensor t = read_tensor(tpca_input, detect_format(tpca_input, tpca_format));
        TpcaFit fit = tpca_fit(t, tpca_rank, scale_rule_from_string(tpca_scale_rule));
        for (const auto& msg : fit.diagnostics) std::cerr << "tenfactor: " << msg << "\n";
        emit_json(tpca_result_to_json(fit, tpca_seed_given
                                               ? std::optional<std::uint64_t>(tpca_seed)
                                               : std::nullopt),
                  tpca_output);
        return 0;
    }

    if (*cmd_pooled) {
        DenseTensor t = read_tensor(pooled_input, detect_format(pooled_input, pooled_format));
        if (pooled_keep < 1 || pooled_keep > t.order())
            throw std::domain_error("pooled-pca: --keep-mode must be in [1, tensor order]");
        PooledPcaFit fit = pooled_pca_fit(t, pooled_rank, pooled_keep - 1);
        nlohmann::json j;
        j["schema"] = "tpca-result/1";
        j["library_version"] = k_version;
        j["estimator"] = "pooled-pca";
        j["kept_mode"] = pooled_keep;
        j["original_shape"] = t.shape;
        j["shape"] = std::vector<Index>{fit.pooled_loadings.rows(), fit.factors.rows()};
        j["rank"] = pooled_rank;
        j["scales"] = detail::vector_json(fit.scales);
        j["modes"] = nlohmann::json::array(
            {detail::matrix_row_major(fit.pooled_loadings), detail::matrix_row_major(fit.factors)});
        j["r_squared"] = fit.r_squared;
        j["residual_fro"] = fit.residual_fro;
        j["param_count"] = fit.param_count;
        emit_json(j, pooled_output);
        return 0;
    }

    if (*cmd_als) {
        DenseTensor t = read_tensor(als_input, detect_format(als_input, als_format));
        AlsOptions opts;
        opts.seed = als_seed;
        opts.max_iter = als_max_iter;
        opts.rel_fit_tol = als_tol;
        if (als_init == "random-uniform")
            opts.init = AlsOptions::Init::random_uniform;
        else if (als_init == "hosvd-warm")
            opts.init = AlsOptions::Init::hosvd_warm;
        else
            throw std::domain_error("als: unknown --init " + als_init);
        AlsFit fit = als_fit(t, als_rank, opts);
        if (!fit.converged)
            std::cerr << "tenfactor: als did not converge within " << als_max_iter
                      << " sweeps\n";
        emit_json(als_result_to_json(fit, als_seed), als_output);
        return 0;
    }

    if (*cmd_test) {
        DenseTensor t = read_tensor(test_input, detect_format(test_input, test_format));
        TestSpec spec = tspec;
        if (spec.null_dim == 0) spec.null_dim = default_null_dim(t.shape);
        spec.validate();
        const std::vector<double> null_sample = load_or_build_null(spec, null_cache, threads);
        FactorCountResult res =
            test_num_factors_with_null(t, spec, null_sample, spec.null_dim, threads);
        for (const auto& w : res.warnings) std::cerr << "tenfactor: " << w << "\n";
        emit_json(factor_test_to_json(res), test_output);
        return 0;
    }

    if (*cmd_sim) {
        McStudyConfig cfg = parse_mc_config_file(sim_config);
        if (!sim_study.empty()) cfg.kind = study_kind_from_string(sim_study);
        if (sim_reps > 0) cfg.reps = sim_reps;
        cfg.seed = sim_seed;
        cfg.threads = threads;
        McSummary summary = run_mc_study(cfg);
        emit_json(mc_summary_to_json(summary), sim_output);
        if (!sim_csv.empty()) write_text(sim_csv, mc_summary_to_csv(summary));
        return 0;
    }

    if (*cmd_cplx) {
        const std::vector<Index> shape = detail::parse_shape(cplx_shape);
        if (cplx_keep < 1 || cplx_keep > static_cast<int>(shape.size()))
            throw std::domain_error("complexity: --keep-mode must be in [1, shape order]");
        std::cout << format_percent(
                         model_complexity(shape, cplx_rank, cplx_pooled, cplx_keep - 1))
                  << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const tenfactor::parse_error& e) {
        std::cerr << "tenfactor: " << e.what() << "\n";
        return 2;
    } catch (const tenfactor::io_error& e) {
        std::cerr << "tenfactor: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "tenfactor: " << e.what() << "\n";
        return 1;
    }
}
