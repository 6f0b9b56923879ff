// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tenfactor/errors.hpp"
#include "tenfactor/tensor.hpp"

namespace tenfactor {

/// Descending eigenvalue ladder of an unfolding's Gram matrix. `values`
/// always holds all N_j eigenvalues; `vectors` holds the leading columns
/// requested from gram_eigen (sign-fixed, pairwise orthonormal).
/// `near_degenerate` lists positions r where the gap values[r]-values[r+1]
/// fell below 1e-12 relative to the top eigenvalue.
struct EigenLadder {
    int mode = 0;
    VectorXd values;
    MatrixXd vectors;
    std::vector<Index> near_degenerate;
};

/// Canonical sign: flips v so that the entry of largest magnitude is
/// positive (ties resolved by the lowest index).
inline VectorXd fix_sign(const VectorXd& v) {
    if (v.size() == 0 || v.norm() == 0.0)
        throw std::domain_error("fix_sign: zero vector has no canonical sign");
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(best))) best = i;
    return v(best) < 0.0 ? VectorXd(-v) : v;
}

inline void fix_sign_columns(MatrixXd& m) {
    for (Index c = 0; c < m.cols(); ++c) m.col(c) = fix_sign(m.col(c));
}

/// Eigendecomposition of the small-side Gram matrix Y_(j) Y_(j)ᵀ.
/// `top` = number of eigenvectors to return: all rows when negative, none
/// when 0 (eigenvalues-only, cheaper). Eigenvalues are always all returned,
/// descending. Deterministic: identical input gives bit-identical output.
inline EigenLadder gram_eigen(const UnfoldedMatrix& m, Index top = -1) {
    const Index n = m.rows();
    if (n < 1) throw std::domain_error("gram_eigen: empty matrix");
    if (top > n) throw std::domain_error("gram_eigen: top exceeds row count");
    if (!m.values.allFinite())
        throw numeric_error("gram_eigen: non-finite entries in unfolding");

    MatrixXd gram = MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(m.values);

    const bool want_vectors = (top != 0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver;
    solver.compute(gram, want_vectors ? Eigen::ComputeEigenvectors
                                      : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw numeric_error("gram_eigen: eigensolver did not converge");

    EigenLadder ladder;
    ladder.mode = m.mode;
    ladder.values = solver.eigenvalues().reverse();
    if (want_vectors) {
        Index keep = top < 0 ? n : top;
        ladder.vectors = solver.eigenvectors().rowwise().reverse().leftCols(keep);
        fix_sign_columns(ladder.vectors);
    }
    const double scale = std::max(std::abs(ladder.values(0)), 1e-300);
    for (Index r = 0; r + 1 < n; ++r)
        if (ladder.values(r) - ladder.values(r + 1) < 1e-12 * scale)
            ladder.near_degenerate.push_back(r);
    return ladder;
}

}  // namespace tenfactor
