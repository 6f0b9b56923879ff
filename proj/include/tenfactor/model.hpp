// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tenfactor/tensor.hpp"

namespace tenfactor {

/// Rank-R CP model: per-mode matrices with unit-norm columns and a scale per
/// component. Ground-truth models carry non-negative scales sorted
/// non-increasing; fitted models may carry signed scales (the sign absorbs
/// the residual orientation of the component after per-mode sign fixing).
struct CpModel {
    std::vector<Index> shape;
    std::vector<MatrixXd> modes;  // modes[j] is shape[j] x R
    VectorXd scales;              // length R

    Index rank() const { return scales.size(); }
    Index order() const { return static_cast<Index>(shape.size()); }
};

/// Structural consistency: mode count, per-mode row counts, column counts.
inline void validate_cp_model(const CpModel& m) {
    DenseTensor::validate_shape(m.shape);
    if (m.modes.size() != m.shape.size())
        throw std::domain_error("cp model: mode count does not match shape order");
    for (std::size_t j = 0; j < m.modes.size(); ++j) {
        if (m.modes[j].rows() != m.shape[j])
            throw std::domain_error("cp model: mode " + std::to_string(j + 1) +
                                    " row count does not match shape");
        if (m.modes[j].cols() != m.rank())
            throw std::domain_error("cp model: mode " + std::to_string(j + 1) +
                                    " column count does not match rank");
    }
    if (m.rank() < 0) throw std::domain_error("cp model: negative rank");
}

/// Largest deviation of any mode column from unit Euclidean norm.
inline double max_unit_norm_deviation(const CpModel& m) {
    double dev = 0.0;
    for (const auto& mode : m.modes)
        for (Index r = 0; r < mode.cols(); ++r)
            dev = std::max(dev, std::abs(mode.col(r).norm() - 1.0));
    return dev;
}

namespace detail {

/// Adds weight · σ_r ⊗_j m_{j,r} into out (length ∏ shape). Expanding the
/// modes in ascending order reproduces the mode-1-fastest linearization.
inline void accumulate_component(const CpModel& model, Index r, double weight,
                                 std::vector<double>& out) {
    std::vector<double> buf(1, weight * model.scales(r));
    std::vector<double> next;
    for (Index j = 0; j < model.order(); ++j) {
        const MatrixXd& mj = model.modes[static_cast<std::size_t>(j)];
        const std::size_t len = buf.size();
        next.resize(len * static_cast<std::size_t>(mj.rows()));
        for (Index i = 0; i < mj.rows(); ++i) {
            const double w = mj(i, r);
            double* dst = next.data() + static_cast<std::size_t>(i) * len;
            for (std::size_t ell = 0; ell < len; ++ell) dst[ell] = w * buf[ell];
        }
        buf.swap(next);
    }
    for (std::size_t ell = 0; ell < buf.size(); ++ell) out[ell] += buf[ell];
}

}  // namespace detail

/// Dense tensor Σ_r σ_r ⊗_j m_{j,r}; element (i_1,…,i_d) is
/// Σ_r σ_r ∏_j M_j(i_j, r).
inline DenseTensor cp_reconstruct(const CpModel& model) {
    validate_cp_model(model);
    DenseTensor out(model.shape);
    for (Index r = 0; r < model.rank(); ++r)
        detail::accumulate_component(model, r, 1.0, out.data);
    return out;
}

}  // namespace tenfactor
