// SPDX-License-Identifier: MIT
#include <gtest/gtest.h>

#include <cmath>

#include "tenfactor/rng.hpp"
#include "tenfactor/simulate.hpp"

namespace tenfactor {
namespace {

TEST(GenOrthonormalLoadings, ColumnsOrthonormal) {
    auto rng = make_rng(3, 0);
    MatrixXd m = gen_orthonormal_loadings(25, 4, rng);
    EXPECT_LT((m.transpose() * m - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GenOrthonormalLoadings, FullBasisWhenREqualsN) {
    auto rng = make_rng(5, 0);
    MatrixXd m = gen_orthonormal_loadings(6, 6, rng);
    EXPECT_LT((m.transpose() * m - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((m * m.transpose() - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GenOrthonormalLoadings, DeterministicUnderSeed) {
    auto rng1 = make_rng(7, 1);
    auto rng2 = make_rng(7, 1);
    EXPECT_EQ(gen_orthonormal_loadings(12, 3, rng1), gen_orthonormal_loadings(12, 3, rng2));
}

TEST(GenAr1Factors, UnitNormColumns) {
    auto rng = make_rng(11, 0);
    MatrixXd f = gen_ar1_factors(40, 3, 0.5, 0.1, rng);
    for (Index r = 0; r < 3; ++r) EXPECT_NEAR(f.col(r).norm(), 1.0, 1e-12);
}

TEST(GenAr1Factors, LagOneAutocorrelationNearRho) {
    auto rng = make_rng(13, 0);
    MatrixXd f = gen_ar1_factors(10000, 1, 0.5, 0.1, rng);
    VectorXd x = f.col(0);
    const double mean = x.mean();
    double num = 0.0, den = 0.0;
    for (Index t = 1; t < x.size(); ++t)
        num += (x(t) - mean) * (x(t - 1) - mean);
    for (Index t = 0; t < x.size(); ++t) den += (x(t) - mean) * (x(t) - mean);
    EXPECT_NEAR(num / den, 0.5, 0.1);
}

TEST(GenAr1Factors, RhoZeroIsWhiteNoise) {
    auto rng = make_rng(17, 0);
    MatrixXd f = gen_ar1_factors(20000, 1, 0.0, 0.1, rng);
    VectorXd x = f.col(0);
    const double mean = x.mean();
    double num = 0.0, den = 0.0;
    for (Index t = 1; t < x.size(); ++t)
        num += (x(t) - mean) * (x(t - 1) - mean);
    for (Index t = 0; t < x.size(); ++t) den += (x(t) - mean) * (x(t) - mean);
    EXPECT_NEAR(num / den, 0.0, 0.05);
}

TEST(GenDgp, NoiselessEqualsReconstruction) {
    DgpSpec spec;
    spec.shape = {8, 7, 9};
    spec.rank = 2;
    spec.s_u = 0.0;
    spec.seed = 19;
    auto [y, truth] = gen_dgp(spec);
    DenseTensor recon = cp_reconstruct(truth);
    EXPECT_EQ(y.data, recon.data);
}

TEST(GenDgp, NoiseVarianceMatchesSpec) {
    DgpSpec spec;
    spec.shape = {60, 80, 100};
    spec.rank = 1;
    spec.s_u = 1.0;
    spec.seed = 23;
    auto [y, truth] = gen_dgp(spec);
    DenseTensor signal = cp_reconstruct(truth);
    double sum = 0.0, sum_sq = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double u = y.data[static_cast<std::size_t>(i)] -
                         signal.data[static_cast<std::size_t>(i)];
        sum += u;
        sum_sq += u * u;
    }
    const double n = static_cast<double>(y.size());
    const double var = sum_sq / n - (sum / n) * (sum / n);
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(GenDgp, StudentTNoiseNormalizedToUnitVariance) {
    DgpSpec spec;
    spec.shape = {50, 60, 70};
    spec.rank = 1;
    spec.s_u = 1.0;
    spec.error_dist = ErrorDist::student_t;
    spec.t_dof = 5.0;
    spec.seed = 29;
    auto [y, truth] = gen_dgp(spec);
    DenseTensor signal = cp_reconstruct(truth);
    double sum_sq = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double u = y.data[static_cast<std::size_t>(i)] -
                         signal.data[static_cast<std::size_t>(i)];
        sum_sq += u * u;
    }
    EXPECT_NEAR(sum_sq / static_cast<double>(y.size()), 1.0, 0.05);
}

TEST(GenDgp, DefaultSignalStrengths) {
    DgpSpec spec;
    spec.shape = {10, 12, 14};
    spec.rank = 3;
    spec.seed = 31;
    CpModel truth = gen_truth(spec);
    const double root = std::sqrt(10.0 * 12.0 * 14.0);
    EXPECT_NEAR(truth.scales(0), 3.0 * root, 1e-10);
    EXPECT_NEAR(truth.scales(1), 2.0 * root, 1e-10);
    EXPECT_NEAR(truth.scales(2), 1.0 * root, 1e-10);
}

TEST(GenDgp, TruthFixedAcrossNoiseStreams) {
    DgpSpec spec;
    spec.shape = {6, 7, 8};
    spec.rank = 2;
    spec.seed = 37;
    auto [y0, t0] = gen_dgp(spec, 0);
    auto [y1, t1] = gen_dgp(spec, 1);
    EXPECT_EQ(t0.scales, t1.scales);
    for (int j = 0; j < 3; ++j)
        EXPECT_EQ(t0.modes[static_cast<std::size_t>(j)], t1.modes[static_cast<std::size_t>(j)]);
    EXPECT_NE(y0.data, y1.data);
}

TEST(DgpSpec, Validation) {
    DgpSpec spec;
    spec.shape = {10, 10, 10};
    spec.rank = 2;
    spec.rho = 1.0;
    EXPECT_THROW(spec.validate(), std::domain_error);
    spec.rho = 0.5;
    spec.signal_strengths = {2.0};
    EXPECT_THROW(spec.validate(), std::domain_error);
    spec.signal_strengths = {2.0, 0.0};  // dormant second factor is allowed
    EXPECT_NO_THROW(spec.validate());
    spec.signal_strengths = {2.0, -0.5};
    EXPECT_THROW(spec.validate(), std::domain_error);
}

TEST(L2Loss, Examples) {
    VectorXd a(3), b(3);
    a << 0.6, 0.0, 0.8;
    b = a;
    EXPECT_DOUBLE_EQ(l2_loss(a, b), 0.0);
    EXPECT_DOUBLE_EQ(l2_loss(VectorXd(-a), b), 0.0);
    VectorXd e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    EXPECT_DOUBLE_EQ(l2_loss(e1, e2), std::sqrt(2.0));
}

TEST(L2Loss, Errors) {
    VectorXd a(2), b(3);
    EXPECT_THROW(l2_loss(a, b), std::domain_error);
    VectorXd z = VectorXd::Zero(2), u(2);
    u << 1, 0;
    EXPECT_THROW(l2_loss(u, z), std::domain_error);
}

TEST(RunMcStudy, Reproducible) {
    McStudyConfig cfg;
    cfg.kind = StudyKind::rate_scaling;
    cfg.shapes = {{8, 7, 10}, {16, 14, 20}};
    cfg.fit_rank = 1;
    cfg.reps = 5;
    cfg.seed = 41;
    McSummary a = run_mc_study(cfg);
    McSummary b = run_mc_study(cfg);
    EXPECT_EQ(a.rows, b.rows);
    EXPECT_EQ(a.aggregates, b.aggregates);
}

TEST(RunMcStudy, ThreadCountDoesNotChangeResults) {
    McStudyConfig cfg;
    cfg.kind = StudyKind::rate_scaling;
    cfg.shapes = {{8, 7, 10}};
    cfg.fit_rank = 1;
    cfg.reps = 6;
    cfg.seed = 43;
    cfg.threads = 1;
    McSummary a = run_mc_study(cfg);
    cfg.threads = 3;
    McSummary b = run_mc_study(cfg);
    EXPECT_EQ(a.rows, b.rows);
}

TEST(RunMcStudy, FitComplexityR2MonotoneInRank) {
    McStudyConfig cfg;
    cfg.kind = StudyKind::fit_complexity;
    cfg.shapes = {{12, 10, 15}};
    cfg.ranks = {3};
    cfg.reps = 3;
    cfg.seed = 47;
    McSummary s = run_mc_study(cfg);
    // rows: shape_idx, r_true, rank, pooled, params_pct, mean_r2
    double prev_tpca = -1.0, prev_pooled = -1.0;
    for (const auto& row : s.rows) {
        if (row[3] == 0.0) {
            EXPECT_GE(row[5], prev_tpca - 1e-12);
            prev_tpca = row[5];
        } else {
            EXPECT_GE(row[5], prev_pooled - 1e-12);
            prev_pooled = row[5];
        }
    }
    // 3-way complexity below pooled complexity at every rank.
    for (std::size_t i = 0; i + 1 < s.rows.size(); i += 2)
        EXPECT_LT(s.rows[i][4], s.rows[i + 1][4]);
}

TEST(RunMcStudy, FiveWayPowerStudyRuns) {
    // The 5-way design: smallest dimension first, time mode last.
    McStudyConfig cfg;
    cfg.kind = StudyKind::test_power;
    cfg.shapes = {{10, 20, 30, 40, 50}};
    cfg.d2_grid = {2.0};
    cfg.d1 = 2.0;
    cfg.test_k = 1;
    cfg.test_K = 3;
    cfg.test_m = 150;
    cfg.reps = 2;
    cfg.seed = 51;
    McSummary s = run_mc_study(cfg);
    ASSERT_EQ(s.rows.size(), 1u);
    ASSERT_EQ(s.columns.size(), 2u + 5u + 4u);
    // A second factor as strong as the first is detected in every mode.
    for (int j = 0; j < 5; ++j) EXPECT_EQ(s.rows[0][2 + static_cast<std::size_t>(j)], 1.0);
    EXPECT_NE(s.notes[0].find("null_dim = 10"), std::string::npos);
}

TEST(RunMcStudy, TestPowerColumnsAndBounds) {
    McStudyConfig cfg;
    cfg.kind = StudyKind::test_power;
    cfg.shapes = {{15, 18, 21}};
    cfg.d2_grid = {0.0, 2.0};
    cfg.d1 = 2.0;
    cfg.test_k = 1;
    cfg.test_K = 3;
    cfg.test_m = 200;
    cfg.reps = 10;
    cfg.seed = 53;
    McSummary s = run_mc_study(cfg);
    ASSERT_EQ(s.rows.size(), 2u);
    for (const auto& row : s.rows)
        for (std::size_t c = 2; c < row.size(); ++c) {
            EXPECT_GE(row[c], 0.0);
            EXPECT_LE(row[c], 1.0);
        }
    // Strong second factor rejects far more often than none.
    EXPECT_GT(s.rows[1][2], s.rows[0][2]);
}

}  // namespace
}  // namespace tenfactor
