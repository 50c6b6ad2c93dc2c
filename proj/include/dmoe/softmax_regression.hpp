// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"

#include <cstddef>

namespace dmoe {

struct SoftmaxFitOptions {
    std::size_t max_iter = 100;
    double grad_tol = 1e-8;
};

struct SoftmaxFit {
    GatingParams gating;
    double objective = 0.0;  // sum_i sum_k t_ik log pi_k(x_i)
    double grad_norm = 0.0;
    std::size_t iterations = 0;
};

/// Maximizes sum_i sum_k targets(i,k) * log pi_k(x_i; alpha) over alpha with the
/// K-th logit pinned at zero, by damped Newton with step halving. Target rows
/// need not sum to one; a row sum acts as an observation weight.
SoftmaxFit fit_softmax_regression(const Matrix& X, const Matrix& targets, const GatingParams& init,
                                  const SoftmaxFitOptions& options = {});

/// Weighted binary logistic regression with fractional responses in [0,1]:
/// maximizes sum_i w_i [v_i eta_i - log(1 + exp(eta_i))], eta = X beta.
Vector fit_weighted_logistic(const Matrix& X, const Vector& responses, const Vector& weights, const Vector& init,
                             const SoftmaxFitOptions& options = {});

}  // namespace dmoe
