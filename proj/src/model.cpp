// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/model.hpp"

#include "dmoe/numeric.hpp"
#include "dmoe/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dmoe {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string("non-finite ") + what);
    }
}

void check_row(RowRef x, std::size_t dim) {
    if (static_cast<std::size_t>(x.size()) != dim) {
        throw std::invalid_argument("covariate row has " + std::to_string(x.size()) +
                                    " entries, expected " + std::to_string(dim));
    }
    if (!x.allFinite()) {
        throw std::invalid_argument("non-finite covariate entry");
    }
}

}  // namespace

ExpertParams ExpertParams::gaussian(Vector beta, double sigma2) {
    return ExpertParams{ExpertKind::GaussianRegression, std::move(beta), sigma2};
}

ExpertParams ExpertParams::logistic(Vector beta) {
    return ExpertParams{ExpertKind::BinaryLogistic, std::move(beta), 0.0};
}

MoEParams::MoEParams(GatingParams gating, std::vector<ExpertParams> experts)
    : gating_(std::move(gating)), experts_(std::move(experts)) {
    if (experts_.empty()) {
        throw std::invalid_argument("MoEParams requires at least one expert");
    }
    if (experts_.front().beta.size() < 1) {
        throw std::invalid_argument("expert beta must contain the intercept");
    }
    d_ = static_cast<std::size_t>(experts_.front().beta.size() - 1);
    if (experts_.size() == 1 && gating_.alpha.size() == 0) {
        gating_.alpha.resize(0, static_cast<Eigen::Index>(d_ + 1));
    }
    validate();
}

Matrix MoEParams::full_logit_weights() const {
    Matrix full = Matrix::Zero(static_cast<Eigen::Index>(K()), static_cast<Eigen::Index>(dim()));
    if (K() > 1) {
        full.topRows(static_cast<Eigen::Index>(K() - 1)) = gating_.alpha;
    }
    return full;
}

void MoEParams::validate() const {
    const auto kind0 = experts_.front().kind;
    for (std::size_t k = 0; k < experts_.size(); ++k) {
        const auto& e = experts_[k];
        if (e.kind != kind0) {
            throw std::invalid_argument("experts must share one kind");
        }
        if (static_cast<std::size_t>(e.beta.size()) != d_ + 1) {
            throw std::invalid_argument("expert " + std::to_string(k) + " beta has length " +
                                        std::to_string(e.beta.size()) + ", expected " +
                                        std::to_string(d_ + 1));
        }
        if (!e.beta.allFinite()) {
            throw std::invalid_argument("expert " + std::to_string(k) + " beta is not finite");
        }
        if (e.kind == ExpertKind::GaussianRegression && !(e.sigma2 > 0.0 && std::isfinite(e.sigma2))) {
            throw std::invalid_argument("expert " + std::to_string(k) + " sigma2 must be positive");
        }
    }
    if (static_cast<std::size_t>(gating_.alpha.rows()) != experts_.size() - 1 ||
        static_cast<std::size_t>(gating_.alpha.cols()) != d_ + 1) {
        throw std::invalid_argument("gating alpha must be (K-1) x (d+1)");
    }
    if (!gating_.alpha.allFinite()) {
        throw std::invalid_argument("gating alpha is not finite");
    }
}

Matrix augment_intercept(const Matrix& covariates) {
    Matrix X(covariates.rows(), covariates.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(covariates.cols()) = covariates;
    return X;
}

Dataset Dataset::from_covariates(const Matrix& covariates, Vector y) {
    Dataset data{augment_intercept(covariates), std::move(y)};
    data.validate();
    return data;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        out.X.row(static_cast<Eigen::Index>(i)) = X.row(r);
        out.y(static_cast<Eigen::Index>(i)) = y(r);
    }
    return out;
}

void Dataset::validate() const {
    if (X.rows() < 1 || X.cols() < 1) {
        throw std::invalid_argument("dataset must have at least one row and the intercept column");
    }
    if (X.rows() != y.size()) {
        throw std::invalid_argument("design matrix and response length differ");
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw std::invalid_argument("dataset contains non-finite entries");
    }
    if ((X.col(0).array() != 1.0).any()) {
        throw std::invalid_argument("column 0 of the design matrix must be all ones");
    }
}

Vector log_softmax_gating(RowRef x, const GatingParams& gating, std::size_t K) {
    if (K == 0 || static_cast<std::size_t>(gating.alpha.rows()) + 1 != K) {
        throw std::invalid_argument("gating has " + std::to_string(gating.alpha.rows()) +
                                    " rows, expected K-1 = " + std::to_string(K == 0 ? 0 : K - 1));
    }
    if (K > 1 && gating.alpha.cols() != x.size()) {
        throw std::invalid_argument("covariate row length does not match gating columns");
    }
    Vector logits(static_cast<Eigen::Index>(K));
    if (K > 1) {
        logits.head(static_cast<Eigen::Index>(K - 1)) = gating.alpha * x;
    }
    logits(static_cast<Eigen::Index>(K - 1)) = 0.0;
    const double lse = log_sum_exp(logits);
    return logits.array() - lse;
}

Vector softmax_gating(RowRef x, const GatingParams& gating, std::size_t K) {
    return log_softmax_gating(x, gating, K).array().exp();
}

Matrix gate_matrix(const Matrix& X, const GatingParams& gating, std::size_t K) {
    if (K == 0 || static_cast<std::size_t>(gating.alpha.rows()) + 1 != K) {
        throw std::invalid_argument("gating rows do not match K-1");
    }
    Matrix gates(X.rows(), static_cast<Eigen::Index>(K));
    if (K == 1) {
        gates.setOnes();
        return gates;
    }
    if (gating.alpha.cols() != X.cols()) {
        throw std::invalid_argument("design matrix width does not match gating columns");
    }
    gates.leftCols(static_cast<Eigen::Index>(K - 1)).noalias() = X * gating.alpha.transpose();
    gates.col(static_cast<Eigen::Index>(K - 1)).setZero();
    softmax_rows_inplace(gates);
    return gates;
}

double expert_log_density(double y, RowRef x, const ExpertParams& expert) {
    const double eta = x.dot(expert.beta);
    if (expert.kind == ExpertKind::GaussianRegression) {
        const double r = y - eta;
        return -0.5 * (kLogTwoPi + std::log(expert.sigma2) + r * r / expert.sigma2);
    }
    return y > 0.5 ? -softplus(-eta) : -softplus(eta);
}

double conditional_density(double y, RowRef x, const MoEParams& params) {
    check_finite(y, "response");
    check_row(x, params.dim());
    const Vector gates = softmax_gating(x, params.gating(), params.K());
    double total = 0.0;
    for (std::size_t k = 0; k < params.K(); ++k) {
        total += gates(static_cast<Eigen::Index>(k)) * std::exp(expert_log_density(y, x, params.expert(k)));
    }
    return total;
}

double log_conditional_density(double y, RowRef x, const MoEParams& params) {
    check_finite(y, "response");
    check_row(x, params.dim());
    Vector terms = log_softmax_gating(x, params.gating(), params.K());
    for (std::size_t k = 0; k < params.K(); ++k) {
        terms(static_cast<Eigen::Index>(k)) += expert_log_density(y, x, params.expert(k));
    }
    return log_sum_exp(terms);
}

Matrix log_joint_matrix(const Dataset& data, const MoEParams& params) {
    const auto K = static_cast<Eigen::Index>(params.K());
    const Matrix& X = data.X;
    Matrix out(X.rows(), K);
    if (K > 1) {
        out.leftCols(K - 1).noalias() = X * params.gating().alpha.transpose();
    }
    out.col(K - 1).setZero();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        auto row = out.row(i);
        const double m = row.maxCoeff();
        row.array() -= m + std::log((row.array() - m).exp().sum());
    }
    Matrix B(X.cols(), K);
    for (Eigen::Index k = 0; k < K; ++k) B.col(k) = params.expert(static_cast<std::size_t>(k)).beta;
    const Matrix eta = X * B;
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto& e = params.expert(static_cast<std::size_t>(k));
        if (e.kind == ExpertKind::GaussianRegression) {
            const double c = -0.5 * (kLogTwoPi + std::log(e.sigma2));
            const double inv = 1.0 / e.sigma2;
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const double r = data.y(i) - eta(i, k);
                out(i, k) += c - 0.5 * r * r * inv;
            }
        } else {
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                out(i, k) += data.y(i) > 0.5 ? -softplus(-eta(i, k)) : -softplus(eta(i, k));
            }
        }
    }
    return out;
}

double log_likelihood(const Dataset& data, const MoEParams& params) {
    if (data.size() == 0) {
        throw std::invalid_argument("log_likelihood requires a nonempty dataset");
    }
    if (static_cast<std::size_t>(data.X.cols()) != params.dim()) {
        throw std::invalid_argument("dataset dimension does not match the model");
    }
    const Matrix log_joint = log_joint_matrix(data, params);
    double total = 0.0;
    for (Eigen::Index i = 0; i < log_joint.rows(); ++i) {
        total += std::max(log_sum_exp(log_joint.row(i).transpose()), kLogDensityFloor);
    }
    return total;
}

Prediction predict(RowRef x, const MoEParams& params) {
    check_row(x, params.dim());
    const Vector gates = softmax_gating(x, params.gating(), params.K());
    Prediction out;
    for (std::size_t k = 0; k < params.K(); ++k) {
        const double eta = x.dot(params.expert(k).beta);
        const double mean = params.kind() == ExpertKind::GaussianRegression ? eta : sigmoid(eta);
        out.value += gates(static_cast<Eigen::Index>(k)) * mean;
    }
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < gates.size(); ++k) {
        if (gates(k) > gates(best)) best = k;
    }
    out.map_index = static_cast<std::size_t>(best);
    return out;
}

SampledResponses sample_responses(const Matrix& X, const MoEParams& params, std::uint64_t seed) {
    if (static_cast<std::size_t>(X.cols()) != params.dim()) {
        throw std::invalid_argument("design matrix dimension does not match the model");
    }
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Matrix gates = gate_matrix(X, params.gating(), params.K());
    SampledResponses out;
    out.y.resize(X.rows());
    out.labels.resize(static_cast<std::size_t>(X.rows()));
    const auto K = static_cast<Eigen::Index>(params.K());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double u = unif(rng);
        Eigen::Index k = 0;
        double cum = gates(i, 0);
        while (k + 1 < K && u >= cum) {
            ++k;
            cum += gates(i, k);
        }
        const auto& e = params.expert(static_cast<std::size_t>(k));
        const double eta = X.row(i).dot(e.beta);
        if (e.kind == ExpertKind::GaussianRegression) {
            out.y(i) = eta + std::sqrt(e.sigma2) * normal(rng);
        } else {
            out.y(i) = unif(rng) < sigmoid(eta) ? 1.0 : 0.0;
        }
        out.labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
    return out;
}

MoEParams permute_experts(const MoEParams& params, const std::vector<std::size_t>& perm) {
    const std::size_t K = params.K();
    if (perm.size() != K) {
        throw std::invalid_argument("permutation length does not match K");
    }
    std::vector<bool> seen(K, false);
    for (auto p : perm) {
        if (p >= K || seen[p]) throw std::invalid_argument("not a permutation");
        seen[p] = true;
    }
    const Matrix full = params.full_logit_weights();
    GatingParams gating;
    gating.alpha.resize(static_cast<Eigen::Index>(K - 1), static_cast<Eigen::Index>(params.dim()));
    const auto ref = full.row(static_cast<Eigen::Index>(perm[K - 1]));
    std::vector<ExpertParams> experts;
    experts.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (k + 1 < K) {
            gating.alpha.row(static_cast<Eigen::Index>(k)) = full.row(static_cast<Eigen::Index>(perm[k])) - ref;
        }
        experts.push_back(params.expert(perm[k]));
    }
    return MoEParams(std::move(gating), std::move(experts));
}

std::vector<std::size_t> canonical_order(const std::vector<ExpertParams>& experts) {
    std::vector<std::size_t> perm(experts.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        const auto& ba = experts[a].beta;
        const auto& bb = experts[b].beta;
        return std::lexicographical_compare(ba.data(), ba.data() + ba.size(), bb.data(), bb.data() + bb.size());
    });
    return perm;
}

MoEParams canonicalize(const MoEParams& params) {
    const auto perm = canonical_order(params.experts());
    if (std::is_sorted(perm.begin(), perm.end())) {
        return params;
    }
    return permute_experts(params, perm);
}

Vector flatten(const MoEParams& params) {
    const auto p = static_cast<Eigen::Index>(params.dim());
    const auto K = static_cast<Eigen::Index>(params.K());
    const bool gaussian = params.kind() == ExpertKind::GaussianRegression;
    Vector out((K - 1) * p + K * p + (gaussian ? K : 0));
    Eigen::Index pos = 0;
    for (Eigen::Index k = 0; k + 1 < K; ++k) {
        for (Eigen::Index j = 0; j < p; ++j) out(pos++) = params.gating().alpha(k, j);
    }
    for (const auto& e : params.experts()) {
        out.segment(pos, p) = e.beta;
        pos += p;
    }
    if (gaussian) {
        for (const auto& e : params.experts()) out(pos++) = e.sigma2;
    }
    return out;
}

}  // namespace dmoe
