// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "tenfactor/model.hpp"
#include "tenfactor/rng.hpp"
#include "tenfactor/spectrum.hpp"
#include "tenfactor/tensor.hpp"

namespace tenfactor {

struct AlsOptions {
    std::uint64_t seed = 0;  // always set explicitly; used by random init
    int max_iter = 500;
    double rel_fit_tol = 1e-8;
    enum class Init { random_uniform, hosvd_warm } init = Init::random_uniform;
};

/// CP model plus the per-sweep convergence trace. fit = 1 - relative
/// residual; ridge_events records (sweep, mode) pairs where the normal
/// equations needed jitter.
struct AlsFit {
    CpModel model;
    std::vector<double> fit_trace;
    bool converged = false;
    std::vector<std::pair<int, int>> ridge_events;
};

namespace detail {

/// Solves X = B G^{-1} for the normal equations of one ALS block. Applies
/// ridge jitter 1e-12·trace(G) when G is numerically rank-deficient and
/// reports whether it did; throws if G stays singular.
inline MatrixXd solve_normal_equations(const MatrixXd& b, MatrixXd gram, int mode,
                                       bool& used_ridge) {
    used_ridge = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
        Eigen::LDLT<MatrixXd> ldlt(gram);
        if (ldlt.info() == Eigen::Success) {
            const VectorXd d = ldlt.vectorD();
            const double dmax = d.cwiseAbs().maxCoeff();
            const double dmin = d.minCoeff();
            // After the ridge any positive-definite factorization is accepted.
            const bool ok = attempt == 0 ? (dmax > 0.0 && dmin > 1e-12 * dmax)
                                         : (dmin > 0.0);
            if (ok) return ldlt.solve(b.transpose()).transpose();
        }
        const double tr = gram.trace();
        if (attempt == 1 || tr <= 0.0)
            throw numeric_error("als_fit: singular least-squares Gram at mode " +
                                std::to_string(mode + 1));
        gram.diagonal().array() += 1e-12 * tr;
        used_ridge = true;
    }
    throw numeric_error("als_fit: singular least-squares Gram at mode " +
                        std::to_string(mode + 1));
}

}  // namespace detail

/// Alternating least squares for the rank-R CP model. Each sweep solves the
/// mode-j least-squares block V_j ← Y_(j) W (WᵀW)^{-1} with W the Khatri-Rao
/// product of the other modes, using the Hadamard Gram identity
/// WᵀW = ∘_{k≠j} V_kᵀV_k. After every sweep columns are unit-normalized with
/// scales absorbed into σ (signed via the canonical column sign) and sorted
/// by |σ| with a consistent permutation across modes. Stops when the fit
/// change drops below rel_fit_tol; non-convergence is reported, not thrown.
///
/// Unlike the mode-wise PCA estimator, the components depend on the chosen
/// rank: the best rank-1 fit of a rank-2 tensor generally differs from the
/// first component of its rank-2 fit.
inline AlsFit als_fit(const DenseTensor& y, Index rank, const AlsOptions& opts) {
    const Index d = y.order();
    if (rank < 1) throw std::domain_error("als_fit: rank must be >= 1");
    if (opts.max_iter < 1) throw std::domain_error("als_fit: max_iter must be >= 1");
    if (!(opts.rel_fit_tol > 0.0)) throw std::domain_error("als_fit: rel_fit_tol must be > 0");
    for (Index j = 0; j < d; ++j)
        if (rank > y.size() / y.shape[static_cast<std::size_t>(j)])
            throw std::domain_error(
                "als_fit: rank exceeds the least-squares system width of mode " +
                std::to_string(j + 1));
    if (!Eigen::Map<const VectorXd>(y.data.data(), y.size()).allFinite())
        throw numeric_error("als_fit: non-finite entries in data");

    std::vector<UnfoldedMatrix> unfolds;
    unfolds.reserve(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) unfolds.push_back(unfold(y, static_cast<int>(j)));

    std::vector<MatrixXd> modes(static_cast<std::size_t>(d));
    if (opts.init == AlsOptions::Init::random_uniform) {
        for (Index j = 0; j < d; ++j) {
            auto rng = make_rng(opts.seed, static_cast<std::uint64_t>(j));
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            MatrixXd v(y.shape[static_cast<std::size_t>(j)], rank);
            for (Index c = 0; c < rank; ++c)
                for (Index i = 0; i < v.rows(); ++i) v(i, c) = unif(rng);
            modes[static_cast<std::size_t>(j)] = std::move(v);
        }
    } else {
        for (Index j = 0; j < d; ++j) {
            Index nj = y.shape[static_cast<std::size_t>(j)];
            if (rank > nj)
                throw std::domain_error("als_fit: hosvd-warm init needs rank <= every mode dim");
            modes[static_cast<std::size_t>(j)] =
                gram_eigen(unfolds[static_cast<std::size_t>(j)], rank).vectors;
        }
    }

    const double norm_y = frobenius_norm(y);
    VectorXd scales = VectorXd::Ones(rank);

    AlsFit result;
    double prev_fit = 0.0;
    for (int sweep = 0; sweep < opts.max_iter; ++sweep) {
        for (Index j = 0; j < d; ++j) {
            MatrixXd w = khatri_rao(modes, static_cast<int>(j));
            MatrixXd gram = MatrixXd::Ones(rank, rank);
            for (Index k = 0; k < d; ++k) {
                if (k == j) continue;
                const MatrixXd& vk = modes[static_cast<std::size_t>(k)];
                gram = gram.cwiseProduct(vk.transpose() * vk);
            }
            MatrixXd b = unfolds[static_cast<std::size_t>(j)].values * w;
            bool ridge = false;
            modes[static_cast<std::size_t>(j)] =
                detail::solve_normal_equations(b, std::move(gram), static_cast<int>(j), ridge);
            if (ridge) result.ridge_events.emplace_back(sweep, static_cast<int>(j));
        }

        // Normalize, sign-fix, and order components.
        scales = VectorXd::Ones(rank);
        for (Index r = 0; r < rank; ++r) {
            double sign = 1.0;
            for (Index j = 0; j < d; ++j) {
                MatrixXd& v = modes[static_cast<std::size_t>(j)];
                const double nrm = v.col(r).norm();
                if (nrm == 0.0)
                    throw numeric_error("als_fit: zero component column at mode " +
                                        std::to_string(j + 1));
                v.col(r) /= nrm;
                scales(r) *= nrm;
                Index best = 0;
                for (Index i = 1; i < v.rows(); ++i)
                    if (std::abs(v(i, r)) > std::abs(v(best, r))) best = i;
                if (v(best, r) < 0.0) {
                    v.col(r) = -v.col(r);
                    sign = -sign;
                }
            }
            scales(r) *= sign;
        }
        std::vector<Index> order(static_cast<std::size_t>(rank));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b2) {
            return std::abs(scales(a)) > std::abs(scales(b2));
        });
        VectorXd sorted_scales(rank);
        for (Index r = 0; r < rank; ++r) sorted_scales(r) = scales(order[static_cast<std::size_t>(r)]);
        for (Index j = 0; j < d; ++j) {
            MatrixXd& v = modes[static_cast<std::size_t>(j)];
            MatrixXd permuted(v.rows(), rank);
            for (Index r = 0; r < rank; ++r)
                permuted.col(r) = v.col(order[static_cast<std::size_t>(r)]);
            v.swap(permuted);
        }
        scales = sorted_scales;

        // fit = 1 - ||Y - model|| / ||Y|| via <Y, model> and ||model||^2.
        MatrixXd w0 = khatri_rao(modes, 0);
        MatrixXd c = modes[0].transpose() * (unfolds[0].values * w0);
        double inner = 0.0;
        for (Index r = 0; r < rank; ++r) inner += scales(r) * c(r, r);
        MatrixXd gram_all = MatrixXd::Ones(rank, rank);
        for (Index j = 0; j < d; ++j) {
            const MatrixXd& vj = modes[static_cast<std::size_t>(j)];
            gram_all = gram_all.cwiseProduct(vj.transpose() * vj);
        }
        const double model_sq = scales.dot(gram_all * scales);
        const double rss = std::max(0.0, norm_y * norm_y - 2.0 * inner + model_sq);
        const double fit = 1.0 - std::sqrt(rss) / norm_y;
        result.fit_trace.push_back(fit);

        if (sweep > 0 && std::abs(fit - prev_fit) < opts.rel_fit_tol) {
            result.converged = true;
            prev_fit = fit;
            break;
        }
        prev_fit = fit;
    }

    result.model.shape = y.shape;
    result.model.modes = std::move(modes);
    result.model.scales = scales;
    return result;
}

/// Replaces every mode matrix by its Gram-Schmidt orthonormalization (in
/// column order) and recomputes the scales so that the reconstruction stays
/// as close as possible to the pre-orthogonalization one. The orthonormal
/// rank-1 components form an orthonormal family, so the optimal per-column
/// rescaling is the inner product with the original reconstruction.
inline CpModel orthogonalize(const CpModel& model) {
    validate_cp_model(model);
    const Index rank = model.rank();
    const Index d = model.order();

    CpModel out;
    out.shape = model.shape;
    out.modes.resize(static_cast<std::size_t>(d));
    std::vector<MatrixXd> transforms(static_cast<std::size_t>(d));  // T: V = Q T

    for (Index j = 0; j < d; ++j) {
        const MatrixXd& v = model.modes[static_cast<std::size_t>(j)];
        MatrixXd q(v.rows(), rank);
        MatrixXd t = MatrixXd::Zero(rank, rank);
        double col_scale = 0.0;
        for (Index r = 0; r < rank; ++r) col_scale = std::max(col_scale, v.col(r).norm());
        for (Index r = 0; r < rank; ++r) {
            VectorXd u = v.col(r);
            for (Index s = 0; s < r; ++s) {
                const double coef = q.col(s).dot(v.col(r));
                t(s, r) = coef;
                u -= coef * q.col(s);
            }
            const double nrm = u.norm();
            if (nrm <= 1e-12 * std::max(col_scale, 1e-300))
                throw std::domain_error("orthogonalize: rank-deficient mode matrix at mode " +
                                        std::to_string(j + 1));
            t(r, r) = nrm;
            q.col(r) = u / nrm;
        }
        out.modes[static_cast<std::size_t>(j)] = std::move(q);
        transforms[static_cast<std::size_t>(j)] = std::move(t);
    }

    out.scales.resize(rank);
    for (Index r = 0; r < rank; ++r) {
        double acc = 0.0;
        for (Index q = r; q < rank; ++q) {
            double prod = model.scales(q);
            for (Index j = 0; j < d; ++j)
                prod *= transforms[static_cast<std::size_t>(j)](r, q);
            acc += prod;
        }
        out.scales(r) = acc;
    }
    return out;
}

}  // namespace tenfactor
