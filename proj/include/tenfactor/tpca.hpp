// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "tenfactor/model.hpp"
#include "tenfactor/spectrum.hpp"
#include "tenfactor/tensor.hpp"

namespace tenfactor {

/// How the canonical per-component scale is derived from the d per-mode
/// eigenvalue estimates. largest_mode takes the mode with the largest
/// dimension (best-conditioned Gram side); mean averages the per-mode square
/// roots; per_mode keeps the full table authoritative and falls back to the
/// largest-mode value wherever a single scale is needed (reconstruction, R²).
enum class ScaleRule { largest_mode, mean, per_mode };

inline const char* to_string(ScaleRule rule) {
    switch (rule) {
        case ScaleRule::largest_mode: return "largest-mode";
        case ScaleRule::mean: return "mean";
        case ScaleRule::per_mode: return "per-mode";
    }
    return "largest-mode";
}

inline ScaleRule scale_rule_from_string(const std::string& s) {
    if (s == "largest-mode") return ScaleRule::largest_mode;
    if (s == "mean") return ScaleRule::mean;
    if (s == "per-mode") return ScaleRule::per_mode;
    throw std::domain_error("unknown scale rule: " + s);
}

/// Output of the mode-wise PCA estimator.
///
/// model.scales are signed: |scales(r)| is the canonical scale estimate and
/// the sign s_r orients the reconstruction (an even number of mode-sign flips
/// is invisible in the per-mode vectors). projection_scales(r) is the
/// alternative scale route m̂_{1,r}ᵀ Y_(1) (⨀_{k≠1} m̂_{k,r}); for 2-way data
/// it coincides with the singular value up to rounding, for d ≥ 3 the two
/// routes differ in finite samples and both are reported.
struct TpcaFit {
    CpModel model;
    MatrixXd per_mode_scale_sq;   // d x R eigenvalues, rows non-increasing
    VectorXd projection_scales;   // signed, length R
    std::vector<EigenLadder> ladders;
    double r_squared = 0.0;       // 1 - RSS/TSS; can dip below 0 on pure noise
    double residual_fro = 0.0;
    ScaleRule scale_rule = ScaleRule::largest_mode;
    std::vector<std::string> diagnostics;
};

/// 1 - RSS/TSS of reconstructing y with the given model (rank 0 gives an
/// exact 0). RSS and TSS are accumulated in the same order so the identity
/// holds bit-exactly in the degenerate cases.
inline double r_squared(const DenseTensor& y, const CpModel& model) {
    if (model.shape != y.shape)
        throw std::domain_error("r_squared: model shape does not match tensor");
    DenseTensor recon = cp_reconstruct(model);
    double rss = 0.0, tss = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double v = y.data[static_cast<std::size_t>(i)];
        const double u = v - recon.data[static_cast<std::size_t>(i)];
        rss += u * u;
        tss += v * v;
    }
    if (tss == 0.0) throw std::domain_error("r_squared: total sum of squares is zero");
    return 1.0 - rss / tss;
}

inline double r_squared(const TpcaFit& fit, const DenseTensor& y) {
    return r_squared(y, fit.model);
}

/// R² of every leading sub-model: entry r is 1 - RSS/TSS using only the
/// first r+1 components. Leading components of a rank-R fit coincide with
/// the lower-rank fits, so this evaluates all nested fits in one pass.
inline VectorXd nested_r_squared(const DenseTensor& y, const CpModel& model) {
    validate_cp_model(model);
    if (model.shape != y.shape)
        throw std::domain_error("nested_r_squared: model shape does not match tensor");
    const double tss = Eigen::Map<const VectorXd>(y.data.data(), y.size()).squaredNorm();
    if (tss == 0.0) throw std::domain_error("nested_r_squared: total sum of squares is zero");
    std::vector<double> residual = y.data;
    VectorXd out(model.rank());
    for (Index r = 0; r < model.rank(); ++r) {
        detail::accumulate_component(model, r, -1.0, residual);
        double rss = 0.0;
        for (double u : residual) rss += u * u;
        out(r) = 1.0 - rss / tss;
    }
    return out;
}

/// Mode-wise PCA estimator: unfold along every mode, eigendecompose the
/// small-side Gram, take the sign-fixed top-R eigenvectors as loadings and
/// the top-R eigenvalues as squared scales.
inline TpcaFit tpca_fit(const DenseTensor& y, Index rank,
                        ScaleRule rule = ScaleRule::largest_mode) {
    const Index d = y.order();
    Index min_dim = y.shape[0];
    for (Index n : y.shape) min_dim = std::min(min_dim, n);
    if (rank < 1 || rank > min_dim)
        throw std::domain_error("tpca_fit: rank must be in [1, min mode dimension]");
    if (!Eigen::Map<const VectorXd>(y.data.data(), y.size()).allFinite())
        throw numeric_error("tpca_fit: non-finite entries in data");

    TpcaFit fit;
    fit.scale_rule = rule;
    fit.model.shape = y.shape;
    fit.model.modes.resize(static_cast<std::size_t>(d));
    fit.per_mode_scale_sq.resize(d, rank);
    fit.ladders.reserve(static_cast<std::size_t>(d));

    UnfoldedMatrix unf0;
    for (Index j = 0; j < d; ++j) {
        UnfoldedMatrix unf = unfold(y, static_cast<int>(j));
        EigenLadder ladder = gram_eigen(unf, rank);
        fit.model.modes[static_cast<std::size_t>(j)] = ladder.vectors;
        for (Index r = 0; r < rank; ++r)
            fit.per_mode_scale_sq(j, r) = ladder.values(r);
        const double top_val = std::max(std::abs(ladder.values(0)), 1e-300);
        for (Index r = 0; r < rank && r + 1 < ladder.values.size(); ++r) {
            const double gap = ladder.values(r) - ladder.values(r + 1);
            if (gap < 1e-6 * top_val) {
                std::ostringstream msg;
                msg << "near-tied eigenvalues in mode " << (j + 1) << " between components "
                    << (r + 1) << " and " << (r + 2)
                    << ": relative gap below 1e-6; cross-mode component matching by "
                       "eigenvalue rank may be unstable";
                fit.diagnostics.push_back(msg.str());
            }
        }
        fit.ladders.push_back(std::move(ladder));
        if (j == 0) unf0 = std::move(unf);
    }

    // Canonical scale magnitudes.
    Index best_mode = 0;
    for (Index j = 1; j < d; ++j)
        if (y.shape[static_cast<std::size_t>(j)] > y.shape[static_cast<std::size_t>(best_mode)])
            best_mode = j;
    VectorXd magnitude(rank);
    for (Index r = 0; r < rank; ++r) {
        if (rule == ScaleRule::mean) {
            double acc = 0.0;
            for (Index j = 0; j < d; ++j)
                acc += std::sqrt(std::max(fit.per_mode_scale_sq(j, r), 0.0));
            magnitude(r) = acc / static_cast<double>(d);
        } else {
            magnitude(r) = std::sqrt(std::max(fit.per_mode_scale_sq(best_mode, r), 0.0));
        }
    }

    // Component orientation from the mode-1 projection; its sign also
    // resolves the reconstruction sign ambiguity.
    MatrixXd kr = khatri_rao(fit.model.modes, /*skip=*/0);
    MatrixXd proj = fit.model.modes[0].transpose() * (unf0.values * kr);
    fit.projection_scales.resize(rank);
    fit.model.scales.resize(rank);
    for (Index r = 0; r < rank; ++r) {
        fit.projection_scales(r) = proj(r, r);
        const double sign = proj(r, r) < 0.0 ? -1.0 : 1.0;
        fit.model.scales(r) = sign * magnitude(r);
    }

    DenseTensor recon = cp_reconstruct(fit.model);
    double rss = 0.0, tss = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double v = y.data[static_cast<std::size_t>(i)];
        const double u = v - recon.data[static_cast<std::size_t>(i)];
        rss += u * u;
        tss += v * v;
    }
    if (tss == 0.0) throw std::domain_error("tpca_fit: zero tensor has no factor structure");
    fit.residual_fro = std::sqrt(rss);
    fit.r_squared = 1.0 - rss / tss;
    return fit;
}

/// Pooled 2-way baseline: everything except `kept_mode` is collapsed into
/// one cross-sectional dimension and ordinary PCA runs on the kept-mode
/// unfolding. Loadings are recovered by projection, so on exact low-rank
/// data they equal the Khatri-Rao (outer) product of the per-mode loadings.
struct PooledPcaFit {
    int kept_mode = 0;
    MatrixXd factors;          // N_kept x R, unit columns, sign-fixed
    MatrixXd pooled_loadings;  // (prod other dims) x R, unit columns
    VectorXd scales;           // non-negative
    VectorXd scale_sq;
    double r_squared = 0.0;
    double residual_fro = 0.0;
    Index param_count = 0;
};

inline PooledPcaFit pooled_pca_fit(const DenseTensor& y, Index rank, int kept_mode);

/// Set-of-pooled-modes form: the set must cover every mode except one.
inline PooledPcaFit pooled_pca_fit(const DenseTensor& y, const std::vector<int>& pool_modes,
                                   Index rank) {
    std::vector<bool> pooled(static_cast<std::size_t>(y.order()), false);
    for (int m : pool_modes) {
        if (m < 0 || m >= y.order())
            throw std::domain_error("pooled_pca_fit: pooled mode out of range");
        pooled[static_cast<std::size_t>(m)] = true;
    }
    int kept = -1;
    for (Index j = 0; j < y.order(); ++j) {
        if (pooled[static_cast<std::size_t>(j)]) continue;
        if (kept >= 0)
            throw std::domain_error("pooled_pca_fit: pooling must leave exactly one mode");
        kept = static_cast<int>(j);
    }
    if (kept < 0)
        throw std::domain_error("pooled_pca_fit: pooling must leave exactly one mode");
    return pooled_pca_fit(y, rank, kept);
}

inline PooledPcaFit pooled_pca_fit(const DenseTensor& y, Index rank, int kept_mode) {
    if (kept_mode < 0 || kept_mode >= y.order())
        throw std::domain_error("pooled_pca_fit: kept mode out of range");
    const Index n_kept = y.shape[static_cast<std::size_t>(kept_mode)];
    const Index n_rest = y.size() / n_kept;
    if (rank < 1 || rank > std::min(n_kept, n_rest))
        throw std::domain_error("pooled_pca_fit: rank out of range");

    UnfoldedMatrix unf = unfold(y, kept_mode);
    EigenLadder ladder = gram_eigen(unf, rank);

    PooledPcaFit fit;
    fit.kept_mode = kept_mode;
    fit.factors = ladder.vectors;
    fit.scale_sq = ladder.values.head(rank);
    fit.scales.resize(rank);
    fit.pooled_loadings.resize(n_rest, rank);
    for (Index r = 0; r < rank; ++r) {
        fit.scales(r) = std::sqrt(std::max(fit.scale_sq(r), 0.0));
        VectorXd beta = unf.values.transpose() * fit.factors.col(r);
        const double nrm = beta.norm();
        fit.pooled_loadings.col(r) = nrm > 0.0 ? VectorXd(beta / nrm) : beta;
    }
    fit.param_count = rank * (n_kept + n_rest);

    // Rank-R PCA reconstruction on the unfolding is the projection onto the
    // leading eigenvectors.
    MatrixXd recon = fit.factors * (fit.factors.transpose() * unf.values);
    const double tss = unf.values.squaredNorm();
    if (tss == 0.0) throw std::domain_error("pooled_pca_fit: total sum of squares is zero");
    fit.residual_fro = (unf.values - recon).norm();
    fit.r_squared = 1.0 - fit.residual_fro * fit.residual_fro / tss;
    return fit;
}

/// Parameter count as a fraction of the data size. The d-way model spends
/// R·ΣN_j parameters; the pooled 2-way model keeps one mode and spends
/// R·(N_kept + ∏ other dims).
inline double model_complexity(const std::vector<Index>& shape, Index rank,
                               bool pooled, int kept_mode = 0) {
    DenseTensor::validate_shape(shape);
    if (rank < 1) throw std::domain_error("model_complexity: rank must be >= 1");
    const double total = static_cast<double>(DenseTensor::element_count(shape));
    if (!pooled) {
        double sum = 0.0;
        for (Index n : shape) sum += static_cast<double>(n);
        return rank * sum / total;
    }
    if (kept_mode < 0 || kept_mode >= static_cast<int>(shape.size()))
        throw std::domain_error("model_complexity: kept mode out of range");
    const double n_kept = static_cast<double>(shape[static_cast<std::size_t>(kept_mode)]);
    return rank * (n_kept + total / n_kept) / total;
}

}  // namespace tenfactor
