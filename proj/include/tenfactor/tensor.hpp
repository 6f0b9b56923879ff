// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tenfactor/errors.hpp"

namespace tenfactor {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense d-way tensor of doubles, linearized mode-1-fastest (column-major:
/// the first index varies fastest). Immutable by convention once filled.
struct DenseTensor {
    std::vector<Index> shape;
    std::vector<double> data;

    DenseTensor() = default;

    explicit DenseTensor(std::vector<Index> dims) : shape(std::move(dims)) {
        validate_shape(shape);
        data.assign(static_cast<std::size_t>(element_count(shape)), 0.0);
    }

    DenseTensor(std::vector<Index> dims, std::vector<double> values)
        : shape(std::move(dims)), data(std::move(values)) {
        validate_shape(shape);
        if (static_cast<Index>(data.size()) != element_count(shape))
            throw std::domain_error("tensor data length does not match shape product");
    }

    Index order() const { return static_cast<Index>(shape.size()); }
    Index size() const { return static_cast<Index>(data.size()); }

    double operator()(const std::vector<Index>& idx) const { return data[linear_index(idx)]; }
    double& operator()(const std::vector<Index>& idx) { return data[linear_index(idx)]; }

    std::size_t linear_index(const std::vector<Index>& idx) const {
        if (static_cast<Index>(idx.size()) != order())
            throw std::domain_error("index order does not match tensor order");
        std::size_t lin = 0;
        std::size_t stride = 1;
        for (Index j = 0; j < order(); ++j) {
            if (idx[j] < 0 || idx[j] >= shape[j])
                throw std::domain_error("tensor index out of range");
            lin += static_cast<std::size_t>(idx[j]) * stride;
            stride *= static_cast<std::size_t>(shape[j]);
        }
        return lin;
    }

    static Index element_count(const std::vector<Index>& dims) {
        Index n = 1;
        for (Index d : dims) n *= d;
        return n;
    }

    static void validate_shape(const std::vector<Index>& dims) {
        if (dims.empty()) throw std::domain_error("tensor order must be at least 1");
        for (Index d : dims)
            if (d < 1) throw std::domain_error("tensor dimensions must be positive");
    }
};

/// Mode-j matricization: rows index the unfolded mode, columns enumerate the
/// remaining indices with the lowest surviving mode varying fastest.
struct UnfoldedMatrix {
    int mode = 0;  // 0-based
    std::vector<Index> origin_shape;
    MatrixXd values;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

namespace detail {

/// Column strides of each mode inside the linearized buffer.
inline std::vector<std::size_t> mode_strides(const std::vector<Index>& shape) {
    std::vector<std::size_t> strides(shape.size());
    std::size_t s = 1;
    for (std::size_t j = 0; j < shape.size(); ++j) {
        strides[j] = s;
        s *= static_cast<std::size_t>(shape[j]);
    }
    return strides;
}

/// Walks the columns of a mode-`mode` unfolding in their canonical order,
/// invoking fn(col, base_offset) where base_offset is the linear offset of
/// the fiber start. Fiber element i sits at base_offset + i * stride(mode).
template <typename F>
void for_each_fiber(const std::vector<Index>& shape, int mode, F&& fn) {
    const auto strides = mode_strides(shape);
    const Index d = static_cast<Index>(shape.size());
    std::vector<Index> idx(shape.size(), 0);
    std::size_t base = 0;
    Index cols = 1;
    for (Index j = 0; j < d; ++j)
        if (j != mode) cols *= shape[j];
    for (Index c = 0; c < cols; ++c) {
        fn(c, base);
        for (Index j = 0; j < d; ++j) {
            if (j == mode) continue;
            ++idx[j];
            base += strides[j];
            if (idx[j] < shape[j]) break;
            base -= static_cast<std::size_t>(idx[j]) * strides[j];
            idx[j] = 0;
        }
    }
}

}  // namespace detail

/// Mode-j unfolding. Column k of the result holds the fiber with the
/// remaining indices fixed; columns are ordered lowest-mode-fastest.
inline UnfoldedMatrix unfold(const DenseTensor& t, int mode) {
    if (mode < 0 || mode >= t.order())
        throw std::domain_error("unfold: mode " + std::to_string(mode) +
                                " out of range for order-" + std::to_string(t.order()) +
                                " tensor");
    const Index rows = t.shape[mode];
    const Index cols = t.size() / rows;
    const std::size_t stride = detail::mode_strides(t.shape)[static_cast<std::size_t>(mode)];

    UnfoldedMatrix out;
    out.mode = mode;
    out.origin_shape = t.shape;
    out.values.resize(rows, cols);
    detail::for_each_fiber(t.shape, mode, [&](Index c, std::size_t base) {
        for (Index i = 0; i < rows; ++i)
            out.values(i, c) = t.data[base + static_cast<std::size_t>(i) * stride];
    });
    return out;
}

/// Inverse of unfold: scatters the matrix back into the origin shape.
inline DenseTensor fold(const UnfoldedMatrix& m) {
    DenseTensor::validate_shape(m.origin_shape);
    const Index d = static_cast<Index>(m.origin_shape.size());
    if (m.mode < 0 || m.mode >= d)
        throw std::domain_error("fold: mode out of range for origin shape");
    const Index rows = m.origin_shape[static_cast<std::size_t>(m.mode)];
    const Index cols = DenseTensor::element_count(m.origin_shape) / rows;
    if (m.values.rows() != rows || m.values.cols() != cols)
        throw std::domain_error("fold: matrix dimensions inconsistent with origin shape");

    DenseTensor t(m.origin_shape);
    const std::size_t stride =
        detail::mode_strides(t.shape)[static_cast<std::size_t>(m.mode)];
    detail::for_each_fiber(t.shape, m.mode, [&](Index c, std::size_t base) {
        for (Index i = 0; i < rows; ++i)
            t.data[base + static_cast<std::size_t>(i) * stride] = m.values(i, c);
    });
    return t;
}

/// Khatri-Rao (column-wise Kronecker) product of the matrices, composed in
/// descending mode order V_d ⊙ … ⊙ V_1, optionally skipping one mode. `mats`
/// is given in ascending mode order; `skip` is a 0-based position or -1.
/// Row ordering matches the unfolding columns: the lowest retained mode's
/// index varies fastest.
inline MatrixXd khatri_rao(const std::vector<MatrixXd>& mats, int skip = -1) {
    if (mats.empty()) throw std::domain_error("khatri_rao: empty matrix list");
    if (skip >= static_cast<int>(mats.size()))
        throw std::domain_error("khatri_rao: skip index out of range");
    Index r = -1;
    int first = -1;
    for (int j = 0; j < static_cast<int>(mats.size()); ++j) {
        if (j == skip) continue;
        if (first < 0) {
            first = j;
            r = mats[static_cast<std::size_t>(j)].cols();
        } else if (mats[static_cast<std::size_t>(j)].cols() != r) {
            throw std::domain_error("khatri_rao: column counts differ");
        }
    }
    if (first < 0) throw std::domain_error("khatri_rao: all matrices skipped");

    MatrixXd out = mats[static_cast<std::size_t>(first)];
    for (int j = first + 1; j < static_cast<int>(mats.size()); ++j) {
        if (j == skip) continue;
        const MatrixXd& v = mats[static_cast<std::size_t>(j)];
        MatrixXd next(out.rows() * v.rows(), r);
        for (Index col = 0; col < r; ++col)
            for (Index i = 0; i < v.rows(); ++i)
                next.col(col).segment(i * out.rows(), out.rows()) =
                    v(i, col) * out.col(col);
        out.swap(next);
    }
    return out;
}

inline double frobenius_norm(const DenseTensor& t) {
    return Eigen::Map<const VectorXd>(t.data.data(), t.size()).norm();
}

}  // namespace tenfactor
