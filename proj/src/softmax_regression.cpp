// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/softmax_regression.hpp"

#include "dmoe/errors.hpp"
#include "dmoe/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace dmoe {

namespace {

struct Evaluation {
    double objective = 0.0;
    Matrix probs;  // N x K
};

Evaluation evaluate(const Matrix& X, const Matrix& targets, const Matrix& alpha) {
    const Eigen::Index N = X.rows();
    const Eigen::Index K = targets.cols();
    Matrix logits(N, K);
    logits.leftCols(K - 1).noalias() = X * alpha.transpose();
    logits.col(K - 1).setZero();
    const Vector m = logits.rowwise().maxCoeff();
    Evaluation ev;
    ev.probs = (logits.colwise() - m).array().exp();
    const Vector lse = m.array() + ev.probs.rowwise().sum().array().log();
    logits.colwise() -= lse;  // log-probabilities
    ev.probs = logits.array().exp();
    ev.objective = (targets.array() * logits.array()).sum();
    return ev;
}

}  // namespace

SoftmaxFit fit_softmax_regression(const Matrix& X, const Matrix& targets, const GatingParams& init,
                                  const SoftmaxFitOptions& options) {
    const Eigen::Index N = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::Index K = targets.cols();
    if (targets.rows() != N || K < 1) {
        throw std::invalid_argument("targets must be N x K with K >= 1");
    }
    if (init.alpha.rows() != K - 1 || (K > 1 && init.alpha.cols() != p)) {
        throw std::invalid_argument("initial gating must be (K-1) x (d+1)");
    }
    SoftmaxFit fit;
    fit.gating.alpha = init.alpha;
    if (K == 1) {
        fit.gating.alpha.resize(0, p);
        fit.objective = 0.0;
        return fit;
    }
    const Eigen::Index J = K - 1;
    const Vector weights = targets.rowwise().sum();

    Evaluation ev = evaluate(X, targets, fit.gating.alpha);
    if (!std::isfinite(ev.objective)) {
        throw SolverFailureError("softmax objective is not finite at the starting point");
    }
    Matrix Xw(N, p);
    Matrix Z(N, J * p);
    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        // Gradient, stacked by class: g_j = X^T (t_j - w * p_j).
        Vector grad(J * p);
        for (Eigen::Index j = 0; j < J; ++j) {
            const Vector resid = targets.col(j) - weights.cwiseProduct(ev.probs.col(j));
            grad.segment(j * p, p).noalias() = X.transpose() * resid;
        }
        fit.grad_norm = grad.norm();
        if (fit.grad_norm <= options.grad_tol) break;

        // Negative Hessian: blockdiag(X^T diag(w p_j) X) - Z^T Z, Z = [sqrt(w) p_j x].
        const Vector sqrt_w = weights.cwiseSqrt();
        for (Eigen::Index j = 0; j < J; ++j) {
            Z.middleCols(j * p, p) = X.array().colwise() * (sqrt_w.cwiseProduct(ev.probs.col(j))).array();
        }
        Matrix H = Matrix::Zero(J * p, J * p);
        H.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose(), -1.0);
        for (Eigen::Index j = 0; j < J; ++j) {
            Xw = X.array().colwise() * weights.cwiseProduct(ev.probs.col(j)).array();
            H.block(j * p, j * p, p, p).noalias() += Xw.transpose() * X;
        }
        H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
        if (!H.allFinite()) {
            throw SolverFailureError("softmax Hessian is not finite");
        }
        const double scale = H.diagonal().cwiseAbs().mean();
        Vector step;
        try {
            step = solve_spd(H, grad, 1e-12 * (scale > 0.0 ? scale : 1.0));
        } catch (const SolverFailureError&) {
            throw SolverFailureError("softmax Newton system is singular");
        }
        // Predicted gain below the objective's rounding level: numerically converged.
        if (0.5 * grad.dot(step) <= 1e-15 * std::max(1.0, std::abs(ev.objective))) {
            fit.iterations = iter;
            break;
        }

        double t = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving) {
            Matrix candidate = fit.gating.alpha;
            for (Eigen::Index j = 0; j < J; ++j) {
                candidate.row(j) += t * step.segment(j * p, p).transpose();
            }
            Evaluation cand = evaluate(X, targets, candidate);
            if (std::isfinite(cand.objective) && cand.objective > ev.objective) {
                fit.gating.alpha = std::move(candidate);
                ev = std::move(cand);
                improved = true;
                break;
            }
            t *= 0.5;
        }
        fit.iterations = iter + 1;
        if (!improved) break;
    }
    fit.objective = ev.objective;
    return fit;
}

Vector fit_weighted_logistic(const Matrix& X, const Vector& responses, const Vector& weights, const Vector& init,
                             const SoftmaxFitOptions& options) {
    if (responses.size() != X.rows() || weights.size() != X.rows() || init.size() != X.cols()) {
        throw std::invalid_argument("weighted logistic regression: inconsistent shapes");
    }
    Matrix targets(X.rows(), 2);
    targets.col(0) = weights.cwiseProduct(responses);
    targets.col(1) = weights - targets.col(0);
    GatingParams start;
    start.alpha = init.transpose();
    const SoftmaxFit fit = fit_softmax_regression(X, targets, start, options);
    return fit.gating.alpha.row(0).transpose();
}

}  // namespace dmoe
