// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/pooled.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmoe {

PooledMixture::PooledMixture(std::vector<LocalModel> locals) : locals_(std::move(locals)) {}

const ExpertParams& PooledMixture::expert(std::size_t l) const {
    const std::size_t K = local_K();
    return locals_.at(l / K).params.expert(l % K);
}

Vector PooledMixture::gates(RowRef x) const {
    const std::size_t K = local_K();
    Vector out(static_cast<Eigen::Index>(L()));
    for (std::size_t m = 0; m < M(); ++m) {
        const auto& local = locals_[m];
        out.segment(static_cast<Eigen::Index>(m * K), static_cast<Eigen::Index>(K)) =
            local.lambda * softmax_gating(x, local.params.gating(), K);
    }
    return out;
}

Matrix PooledMixture::gate_matrix(const Matrix& X) const {
    const auto K = static_cast<Eigen::Index>(local_K());
    Matrix out(X.rows(), static_cast<Eigen::Index>(L()));
    for (std::size_t m = 0; m < M(); ++m) {
        const auto& local = locals_[m];
        out.middleCols(static_cast<Eigen::Index>(m) * K, K) =
            local.lambda * dmoe::gate_matrix(X, local.params.gating(), local_K());
    }
    return out;
}

Matrix PooledMixture::beta_matrix() const {
    Matrix B(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(L()));
    for (std::size_t l = 0; l < L(); ++l) B.col(static_cast<Eigen::Index>(l)) = expert(l).beta;
    return B;
}

Vector PooledMixture::sigma2_vector() const {
    Vector s(static_cast<Eigen::Index>(L()));
    for (std::size_t l = 0; l < L(); ++l) {
        s(static_cast<Eigen::Index>(l)) = kind() == ExpertKind::GaussianRegression ? expert(l).sigma2 : 0.0;
    }
    return s;
}

double PooledMixture::conditional_density(double y, RowRef x) const {
    double total = 0.0;
    for (const auto& local : locals_) total += local.lambda * dmoe::conditional_density(y, x, local.params);
    return total;
}

PooledMixture build_pooled(std::vector<LocalModel> locals) {
    if (locals.empty()) throw std::invalid_argument("build_pooled needs at least one local model");
    const auto& first = locals.front().params;
    double total = 0.0;
    for (std::size_t m = 0; m < locals.size(); ++m) {
        const auto& p = locals[m].params;
        if (p.K() != first.K() || p.d() != first.d() || p.kind() != first.kind()) {
            throw std::invalid_argument("local model " + std::to_string(m) + " does not match the shape of local 0");
        }
        if (!(locals[m].lambda >= 0.0) || !std::isfinite(locals[m].lambda)) {
            throw std::invalid_argument("lambda must be nonnegative");
        }
        total += locals[m].lambda;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("lambdas must sum to 1, got " + std::to_string(total));
    }
    return PooledMixture(std::move(locals));
}

PooledMixture as_pooled(const MoEParams& model) { return PooledMixture({LocalModel{model, 1.0}}); }

void SupportSample::validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("support sample must be nonempty");
    if (!X.allFinite()) throw std::invalid_argument("support sample contains non-finite entries");
    if ((X.col(0).array() != 1.0).any()) throw std::invalid_argument("support sample lacks the intercept column");
}

}  // namespace dmoe
