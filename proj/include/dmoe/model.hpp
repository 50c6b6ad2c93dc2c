// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dmoe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowRef = Eigen::Ref<const Eigen::VectorXd>;

/// Per-point log-density floor (close to log of the smallest normal double).
inline constexpr double kLogDensityFloor = -745.0;

enum class ExpertKind { GaussianRegression, BinaryLogistic };

/// One expert: a linear predictor over the intercept-augmented covariate.
/// `sigma2` is the residual variance for Gaussian experts and is ignored
/// (kept at zero) for logistic ones.
struct ExpertParams {
    ExpertKind kind = ExpertKind::GaussianRegression;
    Vector beta;
    double sigma2 = 1.0;

    static ExpertParams gaussian(Vector beta, double sigma2);
    static ExpertParams logistic(Vector beta);
};

/// Softmax gate coefficients. Row k holds the logit weights of class k; the
/// K-th class is the zero-logit reference and is never stored.
struct GatingParams {
    Matrix alpha;  // (K-1) x (d+1)
};

class MoEParams {
public:
    MoEParams() = default;
    MoEParams(GatingParams gating, std::vector<ExpertParams> experts);

    std::size_t K() const noexcept { return experts_.size(); }
    std::size_t d() const noexcept { return d_; }
    std::size_t dim() const noexcept { return d_ + 1; }
    ExpertKind kind() const noexcept { return experts_.front().kind; }

    const GatingParams& gating() const noexcept { return gating_; }
    const std::vector<ExpertParams>& experts() const noexcept { return experts_; }
    const ExpertParams& expert(std::size_t k) const { return experts_.at(k); }

    /// Full K x (d+1) logit weight matrix, last row zero.
    Matrix full_logit_weights() const;

    /// Throws std::invalid_argument when a structural invariant is broken.
    void validate() const;

private:
    std::size_t d_ = 0;
    GatingParams gating_;
    std::vector<ExpertParams> experts_;
};

/// Design matrix with the intercept in column 0, and responses.
struct Dataset {
    Matrix X;
    Vector y;

    std::size_t size() const noexcept { return static_cast<std::size_t>(X.rows()); }
    std::size_t d() const noexcept { return X.cols() > 0 ? static_cast<std::size_t>(X.cols() - 1) : 0; }

    /// Builds a dataset from raw covariates (no intercept) and responses.
    static Dataset from_covariates(const Matrix& covariates, Vector y);

    Dataset subset(const std::vector<std::size_t>& rows) const;

    void validate() const;
};

/// Adds the leading column of ones.
Matrix augment_intercept(const Matrix& covariates);

// Gating ---------------------------------------------------------------------

/// Softmax gate probabilities at one augmented covariate row.
Vector softmax_gating(RowRef x, const GatingParams& gating, std::size_t K);

/// Log of softmax_gating, computed stably.
Vector log_softmax_gating(RowRef x, const GatingParams& gating, std::size_t K);

/// Row-wise gate probabilities for a whole design matrix (N x K).
Matrix gate_matrix(const Matrix& X, const GatingParams& gating, std::size_t K);

// Densities ------------------------------------------------------------------

double expert_log_density(double y, RowRef x, const ExpertParams& expert);

double conditional_density(double y, RowRef x, const MoEParams& params);
double log_conditional_density(double y, RowRef x, const MoEParams& params);

/// N x K matrix of log pi_k(x_i) + log phi_k(y_i | x_i).
Matrix log_joint_matrix(const Dataset& data, const MoEParams& params);

/// Sum of floored per-point log-densities.
double log_likelihood(const Dataset& data, const MoEParams& params);

struct Prediction {
    double value = 0.0;       // mean response, or class-1 probability
    std::size_t map_index = 0;  // argmax gate, lowest index on ties
};

Prediction predict(RowRef x, const MoEParams& params);

// Sampling -------------------------------------------------------------------

struct SampledResponses {
    Vector y;
    std::vector<int> labels;
};

/// Draws a latent component from the gates, then a response from that expert.
SampledResponses sample_responses(const Matrix& X, const MoEParams& params, std::uint64_t seed);

// Ordering -------------------------------------------------------------------

/// Reorders experts so that new expert k is old expert perm[k]. The gate is
/// re-referenced so that the conditional law is unchanged.
MoEParams permute_experts(const MoEParams& params, const std::vector<std::size_t>& perm);

/// Permutation sorting experts lexicographically by beta.
std::vector<std::size_t> canonical_order(const std::vector<ExpertParams>& experts);

MoEParams canonicalize(const MoEParams& params);

/// Flattened (alpha row-major, betas, sigma2s) vector used by the MSE metric.
Vector flatten(const MoEParams& params);

}  // namespace dmoe
