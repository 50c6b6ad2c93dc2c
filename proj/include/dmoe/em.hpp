// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"
#include "dmoe/softmax_regression.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dmoe {

struct EmConfig {
    std::size_t max_iter = 500;
    double tol = 1e-8;          // relative log-likelihood change
    std::size_t n_init = 5;
    double ridge = 1e-8;        // scaled by trace/dim of each normal-equations matrix
    std::uint64_t seed = 0;
    ExpertKind kind = ExpertKind::GaussianRegression;

    void validate() const;
};

/// Posterior component probabilities, N x K, computed in log space.
Matrix e_step(const Dataset& data, const MoEParams& params);

/// Weighted least squares (Gaussian) or weighted logistic regression per
/// expert, with column k of `resp` as weights.
std::vector<ExpertParams> m_step_experts(const Dataset& data, const Matrix& resp, ExpertKind kind,
                                         double ridge = 1e-8);

/// Softmax regression of the responsibilities on X, warm-started at `prev`.
SoftmaxFit m_step_gating(const Matrix& X, const Matrix& resp, const GatingParams& prev,
                         const SoftmaxFitOptions& options = {});

struct EmResult {
    MoEParams params;
    double log_likelihood = 0.0;
    std::size_t iterations = 0;
    std::vector<double> trace;  // log-likelihood before each M-step, then the final value
    std::size_t restart = 0;
};

/// One EM run from a given starting point (no restarts, no reordering).
EmResult em_run(const Dataset& data, const MoEParams& init, const EmConfig& config);

/// Starting point for restart `restart`: K distinct anchor rows, each expert
/// fitted on the N/K rows nearest its anchor, global residual variance, alpha = 0.
MoEParams em_initialize(const Dataset& data, std::size_t K, const EmConfig& config, std::size_t restart);

/// Best of `n_init` EM runs, canonically ordered.
EmResult em_fit(const Dataset& data, std::size_t K, const EmConfig& config);

}  // namespace dmoe
