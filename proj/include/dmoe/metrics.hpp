// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"
#include "dmoe/pooled.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace dmoe {

struct MetricsReport {
    std::optional<double> divergence;  // expected transport divergence from the truth
    std::optional<double> loglik;      // test log-likelihood (sum over rows)
    std::optional<double> mse;         // parameter MSE against the truth
    std::optional<double> rpe;         // relative prediction error
    std::optional<double> ari;         // adjusted Rand index against latent labels
    double time_s = 0.0;
    std::size_t comm_scalars = 0;
};

/// Mean squared difference over (alpha, betas, sigma2s) after canonical
/// ordering of both models. With `best_permutation`, the minimum over all
/// expert relabelings of `est` instead.
double param_mse(const MoEParams& est, const MoEParams& truth, bool best_permutation = false);

/// sum (y - yhat)^2 / sum y^2.
double rpe(const Vector& y, const Vector& yhat);

double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

/// Transport divergence with the truth as the source.
double divergence_to_truth(const MoEParams& est, const MoEParams& truth, const SupportSample& support);

/// Mean responses (Gaussian) or class-1 probabilities (logistic) for every row.
Vector predict_all(const Matrix& X, const MoEParams& params);

/// Index of the largest gate at every row, lowest index on ties.
std::vector<int> map_labels(const Matrix& X, const MoEParams& params);

double rmse(const Vector& y, const Vector& yhat);

/// RMSE divided by the mean observed response.
double scatter_index(const Vector& y, const Vector& yhat);

/// Fills loglik, rpe and, when given, ari, mse and divergence.
MetricsReport evaluate_model(const MoEParams& est, const Dataset& test, const MoEParams* truth,
                             const std::vector<int>* test_labels, const SupportSample* support);

}  // namespace dmoe
