// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tenfactor/als.hpp"
#include "tenfactor/factor_test.hpp"
#include "tenfactor/model.hpp"
#include "tenfactor/parallel.hpp"
#include "tenfactor/rng.hpp"
#include "tenfactor/tpca.hpp"

namespace tenfactor {

enum class ErrorDist { gaussian, student_t };

/// Data-generating process: orthonormal loadings on every mode except the
/// last, unit-norm AR(1) factor paths on the last (time) mode, signal
/// strengths σ_r = d_r · sqrt(∏ dims), additive i.i.d. noise with sd s_u.
/// The default strength rule d_r = R - r + 1 is strictly decreasing; an
/// explicit signal vector may hold equal or zero entries (dormant factors).
struct DgpSpec {
    std::vector<Index> shape;
    Index rank = 1;
    double rho = 0.5;
    double s_eps = 0.1;
    double s_u = 1.0;
    std::vector<double> signal_strengths;  // empty -> d_r = R - r + 1
    ErrorDist error_dist = ErrorDist::gaussian;
    double t_dof = 5.0;
    std::uint64_t seed = 0;

    double signal_strength(Index r) const {
        if (signal_strengths.empty()) return static_cast<double>(rank - r);
        return signal_strengths[static_cast<std::size_t>(r)];
    }

    void validate() const {
        DenseTensor::validate_shape(shape);
        Index min_dim = shape[0];
        for (Index n : shape) min_dim = std::min(min_dim, n);
        if (rank < 1 || rank > min_dim)
            throw std::domain_error("dgp spec: rank must be in [1, min mode dimension]");
        if (!(std::abs(rho) < 1.0)) throw std::domain_error("dgp spec: |rho| must be < 1");
        if (!(s_eps > 0.0)) throw std::domain_error("dgp spec: s_eps must be > 0");
        if (s_u < 0.0) throw std::domain_error("dgp spec: s_u must be >= 0");
        if (!signal_strengths.empty()) {
            if (static_cast<Index>(signal_strengths.size()) != rank)
                throw std::domain_error("dgp spec: signal vector length must equal rank");
            for (double v : signal_strengths)
                if (v < 0.0) throw std::domain_error("dgp spec: signal strengths must be >= 0");
        }
        if (error_dist == ErrorDist::student_t && !(t_dof > 2.0))
            throw std::domain_error("dgp spec: student-t needs dof > 2 for finite variance");
        if (shape.back() < 2)
            throw std::domain_error("dgp spec: time (last) mode needs at least 2 points");
    }
};

/// n×R matrix of the top-R eigenvectors (descending, sign-fixed) of AᵀA for
/// a uniform[0,1) n×n draw A; columns are exactly orthonormal.
inline MatrixXd gen_orthonormal_loadings(Index n, Index r, std::mt19937_64& rng) {
    if (r < 1 || r > n)
        throw std::domain_error("gen_orthonormal_loadings: need 1 <= R <= n");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MatrixXd a(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) a(i, j) = unif(rng);
    MatrixXd b = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(b);
    MatrixXd out = solver.eigenvectors().rowwise().reverse().leftCols(r);
    fix_sign_columns(out);
    return out;
}

/// T×R matrix of unit-norm AR(1) paths, each initialized at the stationary
/// distribution N(0, s_eps² / (1 - rho²)).
inline MatrixXd gen_ar1_factors(Index t, Index r, double rho, double s_eps,
                                std::mt19937_64& rng) {
    if (t < 2) throw std::domain_error("gen_ar1_factors: need T >= 2");
    if (!(std::abs(rho) < 1.0)) throw std::domain_error("gen_ar1_factors: |rho| must be < 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    const double stationary_sd = s_eps / std::sqrt(1.0 - rho * rho);
    MatrixXd f(t, r);
    for (Index c = 0; c < r; ++c) {
        f(0, c) = stationary_sd * normal(rng);
        for (Index i = 1; i < t; ++i) f(i, c) = rho * f(i - 1, c) + s_eps * normal(rng);
        f.col(c) /= f.col(c).norm();
    }
    return f;
}

/// Ground-truth model for the given DGP (uses noise-independent RNG stream 0).
inline CpModel gen_truth(const DgpSpec& spec) {
    spec.validate();
    auto rng = make_rng(spec.seed, 0);
    const Index d = static_cast<Index>(spec.shape.size());
    CpModel truth;
    truth.shape = spec.shape;
    truth.modes.resize(static_cast<std::size_t>(d));
    for (Index j = 0; j + 1 < d; ++j)
        truth.modes[static_cast<std::size_t>(j)] =
            gen_orthonormal_loadings(spec.shape[static_cast<std::size_t>(j)], spec.rank, rng);
    truth.modes[static_cast<std::size_t>(d - 1)] =
        gen_ar1_factors(spec.shape.back(), spec.rank, spec.rho, spec.s_eps, rng);
    const double root_size = std::sqrt(static_cast<double>(DenseTensor::element_count(spec.shape)));
    truth.scales.resize(spec.rank);
    for (Index r = 0; r < spec.rank; ++r)
        truth.scales(r) = spec.signal_strength(r) * root_size;
    return truth;
}

/// signal + noise, with the noise drawn from RNG stream 1 + noise_stream.
/// Student-t draws are rescaled to unit variance before applying s_u.
inline DenseTensor add_noise(const DenseTensor& signal, const DgpSpec& spec,
                             std::uint64_t noise_stream) {
    DenseTensor y = signal;
    if (spec.s_u == 0.0) return y;
    auto rng = make_rng(spec.seed, 1 + noise_stream);
    if (spec.error_dist == ErrorDist::gaussian) {
        std::normal_distribution<double> normal(0.0, spec.s_u);
        for (auto& v : y.data) v += normal(rng);
    } else {
        std::student_t_distribution<double> tdist(spec.t_dof);
        const double scale = spec.s_u / std::sqrt(spec.t_dof / (spec.t_dof - 2.0));
        for (auto& v : y.data) v += scale * tdist(rng);
    }
    return y;
}

/// One draw of the DGP: (observed tensor, ground truth). The truth depends
/// only on the seed; `rep` selects the noise stream.
inline std::pair<DenseTensor, CpModel> gen_dgp(const DgpSpec& spec, std::uint64_t rep = 0) {
    CpModel truth = gen_truth(spec);
    DenseTensor y = add_noise(cp_reconstruct(truth), spec, rep);
    return {std::move(y), std::move(truth)};
}

/// Sign-aligned Euclidean distance ||est · sign(estᵀtruth) - truth||, with
/// sign(0) taken as +1.
inline double l2_loss(const VectorXd& est, const VectorXd& truth) {
    if (est.size() != truth.size()) throw std::domain_error("l2_loss: length mismatch");
    if (truth.norm() == 0.0) throw std::domain_error("l2_loss: zero truth vector");
    const double s = est.dot(truth) < 0.0 ? -1.0 : 1.0;
    return (s * est - truth).norm();
}

enum class StudyKind { fit_complexity, tpca_vs_als, rate_scaling, test_power };

inline const char* to_string(StudyKind kind) {
    switch (kind) {
        case StudyKind::fit_complexity: return "fit-complexity";
        case StudyKind::tpca_vs_als: return "tpca-vs-als";
        case StudyKind::rate_scaling: return "rate-scaling";
        case StudyKind::test_power: return "test-power";
    }
    return "fit-complexity";
}

inline StudyKind study_kind_from_string(const std::string& s) {
    if (s == "fit-complexity") return StudyKind::fit_complexity;
    if (s == "tpca-vs-als") return StudyKind::tpca_vs_als;
    if (s == "rate-scaling") return StudyKind::rate_scaling;
    if (s == "test-power") return StudyKind::test_power;
    throw std::domain_error("unknown study kind: " + s);
}

/// Declarative study configuration (schema mc-study/1). Fields not used by a
/// study kind are ignored. shapes[0] is the baseline for rate-scaling.
struct McStudyConfig {
    StudyKind kind = StudyKind::fit_complexity;
    std::vector<std::vector<Index>> shapes;
    std::vector<Index> ranks;        // fit-complexity / tpca-vs-als true ranks
    Index fit_rank = 1;              // rank fitted in loss studies
    DgpSpec base;                    // rho, s_eps, s_u, error_dist, t_dof
    std::vector<double> d2_grid;     // test-power second-factor strengths
    double d1 = 2.0;
    int test_k = 1;
    int test_K = 3;
    int test_m = 2000;
    double alpha = 0.05;
    Index null_dim = 0;
    int als_max_iter = 500;
    double als_tol = 1e-8;
    int reps = 100;
    std::uint64_t seed = 0;
    int threads = 0;
};

/// Tidy study output: one row per replication or grid point, plus named
/// aggregates. Bit-identical for identical (config, seed, reps).
struct McSummary {
    std::string study;
    int reps = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::string, double>> aggregates;
    std::vector<std::string> notes;
};

namespace detail {

inline std::string shape_label(const std::vector<Index>& shape) {
    std::ostringstream os;
    for (std::size_t j = 0; j < shape.size(); ++j) {
        if (j) os << "x";
        os << shape[j];
    }
    return os.str();
}

inline McSummary run_fit_complexity(const McStudyConfig& cfg) {
    McSummary out;
    out.study = to_string(StudyKind::fit_complexity);
    out.reps = cfg.reps;
    out.seed = cfg.seed;
    out.columns = {"shape_idx", "r_true", "rank", "pooled", "params_pct", "mean_r2"};
    std::uint64_t grid = 0;
    for (std::size_t si = 0; si < cfg.shapes.size(); ++si) {
        for (Index r_true : cfg.ranks) {
            DgpSpec spec = cfg.base;
            spec.shape = cfg.shapes[si];
            spec.rank = r_true;
            spec.signal_strengths.clear();
            spec.seed = derive_stream(cfg.seed, grid++);
            CpModel truth = gen_truth(spec);
            DenseTensor signal = cp_reconstruct(truth);
            const int time_mode = static_cast<int>(spec.shape.size()) - 1;

            MatrixXd r2_tpca = MatrixXd::Zero(cfg.reps, r_true);
            MatrixXd r2_pooled = MatrixXd::Zero(cfg.reps, r_true);
            parallel_for(
                cfg.reps,
                [&](std::int64_t rep) {
                    DenseTensor y = add_noise(signal, spec, static_cast<std::uint64_t>(rep));
                    TpcaFit fit = tpca_fit(y, r_true);
                    r2_tpca.row(rep) = nested_r_squared(y, fit.model).transpose();
                    // Pooled PCA reconstruction is a projection, so nested R²
                    // accumulates the eigenvalue shares directly.
                    UnfoldedMatrix unf = unfold(y, time_mode);
                    EigenLadder ladder = gram_eigen(unf, 0);
                    const double tss = unf.values.squaredNorm();
                    double acc = 0.0;
                    for (Index r = 0; r < r_true; ++r) {
                        acc += ladder.values(r);
                        r2_pooled(rep, r) = acc / tss;
                    }
                },
                cfg.threads);

            for (Index r = 1; r <= r_true; ++r) {
                out.rows.push_back({static_cast<double>(si), static_cast<double>(r_true),
                                    static_cast<double>(r), 0.0,
                                    100.0 * model_complexity(spec.shape, r, false),
                                    r2_tpca.col(r - 1).mean()});
                out.rows.push_back({static_cast<double>(si), static_cast<double>(r_true),
                                    static_cast<double>(r), 1.0,
                                    100.0 * model_complexity(spec.shape, r, true, time_mode),
                                    r2_pooled.col(r - 1).mean()});
            }
            out.notes.push_back("shape " + std::to_string(si) + " = " +
                                shape_label(spec.shape));
        }
    }
    return out;
}

inline McSummary run_tpca_vs_als(const McStudyConfig& cfg) {
    McSummary out;
    out.study = to_string(StudyKind::tpca_vs_als);
    out.reps = cfg.reps;
    out.seed = cfg.seed;
    const std::vector<Index>& shape = cfg.shapes.at(0);
    const Index d = static_cast<Index>(shape.size());
    out.columns = {"r_true", "rep", "estimator"};
    for (Index j = 0; j < d; ++j) out.columns.push_back("l2_mode" + std::to_string(j + 1));

    std::uint64_t grid = 0;
    for (Index r_true : cfg.ranks) {
        DgpSpec spec = cfg.base;
        spec.shape = shape;
        spec.rank = r_true;
        spec.signal_strengths.clear();
        spec.seed = derive_stream(cfg.seed, grid++);
        CpModel truth = gen_truth(spec);
        DenseTensor signal = cp_reconstruct(truth);

        MatrixXd loss_tpca(cfg.reps, d), loss_als(cfg.reps, d);
        parallel_for(
            cfg.reps,
            [&](std::int64_t rep) {
                DenseTensor y = add_noise(signal, spec, static_cast<std::uint64_t>(rep));
                TpcaFit tf = tpca_fit(y, cfg.fit_rank);
                AlsOptions opts;
                opts.seed = derive_stream(spec.seed, 0x415Cu + static_cast<std::uint64_t>(rep));
                opts.max_iter = cfg.als_max_iter;
                opts.rel_fit_tol = cfg.als_tol;
                AlsFit af = als_fit(y, cfg.fit_rank, opts);
                for (Index j = 0; j < d; ++j) {
                    const VectorXd t = truth.modes[static_cast<std::size_t>(j)].col(0);
                    loss_tpca(rep, j) =
                        l2_loss(tf.model.modes[static_cast<std::size_t>(j)].col(0), t);
                    loss_als(rep, j) =
                        l2_loss(af.model.modes[static_cast<std::size_t>(j)].col(0), t);
                }
            },
            cfg.threads);

        for (int rep = 0; rep < cfg.reps; ++rep) {
            std::vector<double> row_t{static_cast<double>(r_true), static_cast<double>(rep), 0.0};
            std::vector<double> row_a{static_cast<double>(r_true), static_cast<double>(rep), 1.0};
            for (Index j = 0; j < d; ++j) {
                row_t.push_back(loss_tpca(rep, j));
                row_a.push_back(loss_als(rep, j));
            }
            out.rows.push_back(std::move(row_t));
            out.rows.push_back(std::move(row_a));
        }
        auto variance = [&](const VectorXd& col) {
            if (cfg.reps < 2) return 0.0;
            return (col.array() - col.mean()).square().sum() /
                   static_cast<double>(cfg.reps - 1);
        };
        for (Index j = 0; j < d; ++j) {
            const std::string suffix = "_R" + std::to_string(r_true) + "_mode" + std::to_string(j + 1);
            out.aggregates.emplace_back("mean_l2_tpca" + suffix, loss_tpca.col(j).mean());
            out.aggregates.emplace_back("var_l2_tpca" + suffix, variance(loss_tpca.col(j)));
            out.aggregates.emplace_back("mean_l2_als" + suffix, loss_als.col(j).mean());
            out.aggregates.emplace_back("var_l2_als" + suffix, variance(loss_als.col(j)));
        }
    }
    out.notes.push_back("shape = " + shape_label(shape));
    return out;
}

inline McSummary run_rate_scaling(const McStudyConfig& cfg) {
    McSummary out;
    out.study = to_string(StudyKind::rate_scaling);
    out.reps = cfg.reps;
    out.seed = cfg.seed;
    const Index d = static_cast<Index>(cfg.shapes.at(0).size());
    out.columns = {"shape_idx", "rep"};
    for (Index j = 0; j < d; ++j) out.columns.push_back("l2_mode" + std::to_string(j + 1));

    std::vector<VectorXd> mean_loss;
    for (std::size_t si = 0; si < cfg.shapes.size(); ++si) {
        DgpSpec spec = cfg.base;
        spec.shape = cfg.shapes[si];
        spec.rank = cfg.fit_rank;
        spec.signal_strengths.clear();
        spec.seed = derive_stream(cfg.seed, si);
        CpModel truth = gen_truth(spec);
        DenseTensor signal = cp_reconstruct(truth);

        MatrixXd loss(cfg.reps, d);
        parallel_for(
            cfg.reps,
            [&](std::int64_t rep) {
                DenseTensor y = add_noise(signal, spec, static_cast<std::uint64_t>(rep));
                TpcaFit fit = tpca_fit(y, cfg.fit_rank);
                for (Index j = 0; j < d; ++j)
                    loss(rep, j) = l2_loss(fit.model.modes[static_cast<std::size_t>(j)].col(0),
                                           truth.modes[static_cast<std::size_t>(j)].col(0));
            },
            cfg.threads);

        for (int rep = 0; rep < cfg.reps; ++rep) {
            std::vector<double> row{static_cast<double>(si), static_cast<double>(rep)};
            for (Index j = 0; j < d; ++j) row.push_back(loss(rep, j));
            out.rows.push_back(std::move(row));
        }
        mean_loss.push_back(loss.colwise().mean());
        for (Index j = 0; j < d; ++j) {
            out.aggregates.emplace_back("mean_l2_shape" + std::to_string(si) + "_mode" +
                                            std::to_string(j + 1),
                                        mean_loss.back()(j));
            double var = 0.0;
            if (cfg.reps >= 2)
                var = (loss.col(j).array() - mean_loss.back()(j)).square().sum() /
                      static_cast<double>(cfg.reps - 1);
            out.aggregates.emplace_back("var_l2_shape" + std::to_string(si) + "_mode" +
                                            std::to_string(j + 1),
                                        var);
        }
        out.notes.push_back("shape " + std::to_string(si) + " = " +
                            shape_label(spec.shape));
    }
    for (std::size_t si = 1; si < cfg.shapes.size(); ++si)
        for (Index j = 0; j < d; ++j)
            out.aggregates.emplace_back("loss_ratio_shape" + std::to_string(si) + "_mode" +
                                            std::to_string(j + 1),
                                        mean_loss[si](j) / mean_loss[0](j));
    return out;
}

inline McSummary run_test_power(const McStudyConfig& cfg) {
    McSummary out;
    out.study = to_string(StudyKind::test_power);
    out.reps = cfg.reps;
    out.seed = cfg.seed;
    const std::vector<Index>& shape = cfg.shapes.at(0);
    const Index d = static_cast<Index>(shape.size());
    out.columns = {"d2", "reps"};
    for (Index j = 0; j < d; ++j) out.columns.push_back("reject_mode" + std::to_string(j + 1));
    for (const char* rule : {"min", "median", "mean", "max"})
        out.columns.push_back(std::string("reject_") + rule);

    TestSpec tspec;
    tspec.k = cfg.test_k;
    tspec.K = cfg.test_K;
    tspec.m = cfg.test_m;
    tspec.null_dim = cfg.null_dim != 0 ? cfg.null_dim : default_null_dim(shape);
    tspec.seed = derive_stream(cfg.seed, 0xBADCAFEull);
    const std::vector<double> null_sample = simulate_null(tspec, cfg.threads);
    out.notes.push_back("null_dim = " + std::to_string(tspec.null_dim) +
                        ", m = " + std::to_string(tspec.m));

    for (std::size_t gi = 0; gi < cfg.d2_grid.size(); ++gi) {
        DgpSpec spec = cfg.base;
        spec.shape = shape;
        spec.rank = 2;
        spec.signal_strengths = {cfg.d1, cfg.d2_grid[gi]};
        spec.seed = derive_stream(cfg.seed, gi);
        CpModel truth = gen_truth(spec);
        DenseTensor signal = cp_reconstruct(truth);

        const int n_rules = 4;
        MatrixXd reject = MatrixXd::Zero(cfg.reps, d + n_rules);
        parallel_for(
            cfg.reps,
            [&](std::int64_t rep) {
                DenseTensor y = add_noise(signal, spec, static_cast<std::uint64_t>(rep));
                FactorCountResult res =
                    test_num_factors_with_null(y, tspec, null_sample, tspec.null_dim, 1);
                for (Index j = 0; j < d; ++j)
                    reject(rep, j) = res.pvalues(j) <= cfg.alpha ? 1.0 : 0.0;
                const char* rules[] = {"min", "median", "mean", "max"};
                for (int q = 0; q < n_rules; ++q)
                    reject(rep, d + q) = res.combined.at(rules[q]) <= cfg.alpha ? 1.0 : 0.0;
            },
            cfg.threads);

        std::vector<double> row{cfg.d2_grid[gi], static_cast<double>(cfg.reps)};
        for (Index c = 0; c < d + n_rules; ++c) row.push_back(reject.col(c).mean());
        out.rows.push_back(row);
        for (Index j = 0; j < d; ++j)
            out.aggregates.emplace_back("reject_d2_" + std::to_string(gi) + "_mode" +
                                            std::to_string(j + 1),
                                        reject.col(j).mean());
    }
    out.notes.push_back("shape = " + shape_label(shape) + ", d1 = " + std::to_string(cfg.d1) +
                        ", alpha = " + std::to_string(cfg.alpha));
    return out;
}

}  // namespace detail

/// Runs one of the Monte-Carlo studies. Ground-truth factors/loadings are
/// drawn once per grid point and held fixed across replications; only the
/// noise is redrawn. Replications use counter-derived RNG streams and are
/// reduced in replication order, so results do not depend on thread count.
inline McSummary run_mc_study(const McStudyConfig& cfg) {
    if (cfg.reps < 1) throw std::domain_error("run_mc_study: reps must be >= 1");
    if (cfg.shapes.empty()) throw std::domain_error("run_mc_study: no shapes given");
    switch (cfg.kind) {
        case StudyKind::fit_complexity:
            if (cfg.ranks.empty())
                throw std::domain_error("run_mc_study: fit-complexity needs true ranks");
            return detail::run_fit_complexity(cfg);
        case StudyKind::tpca_vs_als:
            if (cfg.ranks.empty())
                throw std::domain_error("run_mc_study: tpca-vs-als needs true ranks");
            return detail::run_tpca_vs_als(cfg);
        case StudyKind::rate_scaling:
            return detail::run_rate_scaling(cfg);
        case StudyKind::test_power:
            if (cfg.d2_grid.empty())
                throw std::domain_error("run_mc_study: test-power needs a d2 grid");
            return detail::run_test_power(cfg);
    }
    throw std::domain_error("run_mc_study: unknown study kind");
}

}  // namespace tenfactor
