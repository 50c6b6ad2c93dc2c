// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/numeric.hpp"

#include "dmoe/errors.hpp"

namespace dmoe {

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double ridge) {
    Eigen::MatrixXd M = A;
    M.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() == Eigen::Success) {
        Eigen::VectorXd x = llt.solve(b);
        if (x.allFinite()) return x;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    Eigen::VectorXd x = ldlt.solve(b);
    if (ldlt.info() != Eigen::Success || !x.allFinite()) {
        throw SolverFailureError("normal equations are singular beyond ridge rescue");
    }
    return x;
}

}  // namespace dmoe
