// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "tenfactor/parallel.hpp"
#include "tenfactor/rng.hpp"
#include "tenfactor/spectrum.hpp"
#include "tenfactor/tensor.hpp"

namespace tenfactor {

/// Hypothesis test configuration: at most k factors against more than k but
/// at most K, with an m-draw Monte-Carlo null. null_dim = 0 selects the
/// default (smallest mode dimension, capped at 256).
struct TestSpec {
    int k = 0;
    int K = 1;
    int m = 5000;
    Index null_dim = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 0) throw std::domain_error("test spec: k must be >= 0");
        if (K < k + 1) throw std::domain_error("test spec: K must be >= k + 1");
        if (m < 100) throw std::domain_error("test spec: m must be >= 100");
        if (null_dim != 0 && null_dim < static_cast<Index>(K - k + 2))
            throw std::domain_error("test spec: null dimension must be >= K - k + 2");
    }
};

struct GapRatioStat {
    double value = 0.0;
    bool divergent = false;  // a consecutive-gap denominator was exactly zero
};

/// Maximum ratio of consecutive eigenvalue gaps over candidate ranks
/// r = k+1..K (1-based positions in the descending ladder). Requires at
/// least K+2 eigenvalues. A zero denominator yields +infinity with the
/// divergent flag set; the statistic is invariant to positive rescaling.
inline GapRatioStat eigenratio_stat(const VectorXd& values, int k, int K) {
    if (K < k + 1) throw std::domain_error("eigenratio_stat: K must be >= k + 1");
    if (values.size() < static_cast<Index>(K + 2))
        throw std::domain_error("eigenratio_stat: ladder needs at least K + 2 eigenvalues");
    GapRatioStat out;
    out.value = -std::numeric_limits<double>::infinity();
    for (int r = k; r < K; ++r) {
        const double num = values(r) - values(r + 1);
        const double den = values(r + 1) - values(r + 2);
        double ratio;
        if (den == 0.0) {
            ratio = std::numeric_limits<double>::infinity();
            out.divergent = true;
        } else {
            ratio = num / den;
        }
        out.value = std::max(out.value, ratio);
    }
    return out;
}

inline GapRatioStat eigenratio_stat(const EigenLadder& ladder, int k, int K) {
    return eigenratio_stat(ladder.values, k, K);
}

namespace detail {

/// One draw of the null statistic: the gap-ratio maximum over the top
/// eigenvalues of a symmetric Gaussian matrix with the given entry
/// variances (off-diagonal var_off, diagonal var_diag).
inline double goe_gap_ratio_draw(Index dim, int k, int K, std::mt19937_64& rng,
                                 double var_off, double var_diag) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd_off = std::sqrt(var_off);
    const double sd_diag = std::sqrt(var_diag);
    MatrixXd a(dim, dim);
    for (Index j = 0; j < dim; ++j) {
        for (Index i = 0; i <= j; ++i) {
            const double z = normal(rng) * (i == j ? sd_diag : sd_off);
            a(i, j) = z;
            a(j, i) = z;
        }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a, Eigen::EigenvaluesOnly);
    const int need = K - k + 2;
    VectorXd top(need);
    for (int i = 0; i < need; ++i) top(i) = solver.eigenvalues()(dim - 1 - i);
    return eigenratio_stat(top, 0, K - k).value;
}

inline std::vector<double> simulate_null_scaled(const TestSpec& spec, Index dim,
                                                double var_off, double var_diag,
                                                int threads) {
    spec.validate();
    if (dim < static_cast<Index>(spec.K - spec.k + 2))
        throw std::domain_error("simulate_null: null dimension must be >= K - k + 2");
    std::vector<double> draws(static_cast<std::size_t>(spec.m));
    parallel_for(
        spec.m,
        [&](std::int64_t i) {
            auto rng = make_rng(spec.seed, static_cast<std::uint64_t>(i));
            draws[static_cast<std::size_t>(i)] =
                goe_gap_ratio_draw(dim, spec.k, spec.K, rng, var_off, var_diag);
        },
        threads);
    std::sort(draws.begin(), draws.end());
    return draws;
}

}  // namespace detail

/// m independent draws of the null gap-ratio statistic from symmetric
/// Gaussian matrices (unit off-diagonal variance, doubled on the diagonal),
/// sorted ascending. Deterministic given the seed, for any thread count.
inline std::vector<double> simulate_null(const TestSpec& spec, int threads = 0) {
    spec.validate();
    if (spec.null_dim == 0)
        throw std::domain_error("simulate_null: null dimension must be set");
    return detail::simulate_null_scaled(spec, spec.null_dim, 1.0, 2.0, threads);
}

/// Right-continuous empirical CDF complement: share of null draws strictly
/// above x. The p-value is floored at 1/(m+1) so that log p stays finite;
/// `floored` reports when the floor was applied.
inline double empirical_pvalue(const std::vector<double>& sorted_null, double x,
                               bool& floored) {
    const auto m = static_cast<double>(sorted_null.size());
    const auto above = sorted_null.end() -
                       std::upper_bound(sorted_null.begin(), sorted_null.end(), x);
    double p = static_cast<double>(above) / m;
    const double floor = 1.0 / (m + 1.0);
    floored = p < floor;
    return floored ? floor : p;
}

/// Per-mode statistics, p-values, and the scaled combination rules.
struct FactorCountResult {
    VectorXd stats;
    VectorXd pvalues;
    std::vector<bool> divergent;
    std::vector<bool> floored;
    std::map<std::string, double> combined;  // keys: min, median, mean, max
    int k = 0;
    int K = 0;
    int m = 0;
    Index null_dim = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline Index default_null_dim(const std::vector<Index>& shape) {
    Index dim = shape[0];
    for (Index n : shape) dim = std::min(dim, n);
    return std::min<Index>(dim, 256);
}

/// Runs the per-mode gap-ratio test against a precomputed sorted null
/// sample. Combined p-values: d·min, 2·median, (2/d)·mean sum, and the
/// plain maximum, all clipped to [0, 1].
inline FactorCountResult test_num_factors_with_null(const DenseTensor& y,
                                                    const TestSpec& spec,
                                                    const std::vector<double>& sorted_null,
                                                    Index null_dim_used,
                                                    int threads = 0) {
    spec.validate();
    const Index d = y.order();
    for (Index j = 0; j < d; ++j)
        if (y.shape[static_cast<std::size_t>(j)] < static_cast<Index>(spec.K + 2))
            throw std::domain_error(
                "test_num_factors: mode " + std::to_string(j + 1) +
                " has fewer than K + 2 eigenvalues; reduce K");

    FactorCountResult res;
    res.k = spec.k;
    res.K = spec.K;
    res.m = spec.m;
    res.null_dim = null_dim_used;
    res.seed = spec.seed;
    res.stats.resize(d);
    res.pvalues.resize(d);
    res.divergent.assign(static_cast<std::size_t>(d), false);
    res.floored.assign(static_cast<std::size_t>(d), false);

    std::vector<GapRatioStat> stats(static_cast<std::size_t>(d));
    parallel_for(
        d,
        [&](std::int64_t j) {
            EigenLadder ladder = gram_eigen(unfold(y, static_cast<int>(j)), 0);
            stats[static_cast<std::size_t>(j)] = eigenratio_stat(ladder, spec.k, spec.K);
        },
        threads);

    std::vector<double> ps;
    for (Index j = 0; j < d; ++j) {
        res.stats(j) = stats[static_cast<std::size_t>(j)].value;
        res.divergent[static_cast<std::size_t>(j)] = stats[static_cast<std::size_t>(j)].divergent;
        bool floored = false;
        res.pvalues(j) = empirical_pvalue(sorted_null, res.stats(j), floored);
        res.floored[static_cast<std::size_t>(j)] = floored;
        ps.push_back(res.pvalues(j));

        const double others = static_cast<double>(y.size()) /
                              static_cast<double>(y.shape[static_cast<std::size_t>(j)]);
        if (static_cast<double>(y.shape[static_cast<std::size_t>(j)]) > others)
            res.warnings.push_back("mode " + std::to_string(j + 1) +
                                   " dimension exceeds the product of the remaining "
                                   "dimensions; the null approximation may be unreliable");
    }

    const double dd = static_cast<double>(d);
    auto clip = [](double p) { return std::min(1.0, std::max(0.0, p)); };
    res.combined["min"] = clip(dd * *std::min_element(ps.begin(), ps.end()));
    res.combined["median"] = clip(2.0 * detail::median_of(ps));
    double sum = 0.0;
    for (double p : ps) sum += p;
    res.combined["mean"] = clip(2.0 / dd * sum);
    res.combined["max"] = clip(*std::max_element(ps.begin(), ps.end()));
    return res;
}

/// Full test: simulates the shared null (one sample for all modes, sized by
/// the smallest mode dimension unless overridden) and evaluates every mode.
inline FactorCountResult test_num_factors(const DenseTensor& y, const TestSpec& spec,
                                          int threads = 0) {
    spec.validate();
    TestSpec resolved = spec;
    if (resolved.null_dim == 0) resolved.null_dim = default_null_dim(y.shape);
    std::vector<double> null_sample = simulate_null(resolved, threads);
    return test_num_factors_with_null(y, resolved, null_sample, resolved.null_dim, threads);
}

}  // namespace tenfactor
