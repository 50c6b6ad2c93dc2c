// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/estimators.hpp"

#include "dmoe/transport.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dmoe {

namespace {

Matrix beta_distances(const MoEParams& model, const MoEParams& reference) {
    const auto K = static_cast<Eigen::Index>(model.K());
    Matrix c(K, K);  // c(i, j): reference expert i against model expert j
    for (Eigen::Index i = 0; i < K; ++i) {
        for (Eigen::Index j = 0; j < K; ++j) {
            c(i, j) = (reference.expert(static_cast<std::size_t>(i)).beta -
                       model.expert(static_cast<std::size_t>(j)).beta)
                          .squaredNorm();
        }
    }
    return c;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Global: return "global";
        case EstimatorKind::Reduction: return "reduction";
        case EstimatorKind::Middle: return "middle";
        case EstimatorKind::WeightedAverage: return "weighted_average";
    }
    return "unknown";
}

std::optional<EstimatorKind> parse_estimator(std::string_view name) {
    for (EstimatorKind k : kAllEstimators) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

EmResult global_estimator(const Dataset& data, std::size_t K, const EmConfig& config) {
    return em_fit(data, K, config);
}

MiddleResult middle_estimator(const std::vector<LocalModel>& locals, const SupportSample& support) {
    if (locals.empty()) throw std::invalid_argument("middle estimator needs at least one local model");
    const std::size_t M = locals.size();
    MiddleResult out;
    out.scores = Vector::Zero(static_cast<Eigen::Index>(M));
    for (std::size_t m = 0; m < M; ++m) {
        double total = 0.0;
        for (std::size_t mp = 0; mp < M; ++mp) {
            if (mp == m) continue;
            total += locals[mp].lambda *
                     expected_transport_divergence(locals[mp].params, locals[m].params, support);
        }
        out.scores(static_cast<Eigen::Index>(m)) = total;
    }
    for (std::size_t m = 1; m < M; ++m) {
        if (out.scores(static_cast<Eigen::Index>(m)) < out.scores(static_cast<Eigen::Index>(out.index))) out.index = m;
    }
    out.model = canonicalize(locals[out.index].params);
    return out;
}

std::vector<std::size_t> align_to(const MoEParams& model, const MoEParams& reference) {
    if (model.K() != reference.K() || model.dim() != reference.dim()) {
        throw std::invalid_argument("cannot align models of different shapes");
    }
    const std::size_t K = model.K();
    const Matrix c = beta_distances(model, reference);
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (K <= 8) {
        std::vector<std::size_t> best = perm;
        double best_cost = std::numeric_limits<double>::infinity();
        do {
            double cost = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                cost += c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(perm[k]));
            }
            if (cost < best_cost) {
                best_cost = cost;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    std::vector<bool> taken(K, false);
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t pick = K;
        for (std::size_t j = 0; j < K; ++j) {
            if (taken[j]) continue;
            if (pick == K || c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) <
                                 c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(pick))) {
                pick = j;
            }
        }
        taken[pick] = true;
        perm[k] = pick;
    }
    return perm;
}

MoEParams weighted_average_estimator(const std::vector<LocalModel>& locals, bool align) {
    if (locals.empty()) throw std::invalid_argument("weighted average needs at least one local model");
    const MoEParams& reference = locals.front().params;
    const std::size_t K = reference.K();
    // Accumulated as reference + sum_m lambda_m (theta_m - reference), so that
    // identical locals come back bit for bit.
    Matrix alpha = reference.gating().alpha;
    std::vector<Vector> betas;
    std::vector<double> sigma2;
    for (const auto& e : reference.experts()) {
        betas.push_back(e.beta);
        sigma2.push_back(e.sigma2);
    }
    for (std::size_t m = 0; m < locals.size(); ++m) {
        const MoEParams& p = locals[m].params;
        if (p.K() != K || p.dim() != reference.dim() || p.kind() != reference.kind()) {
            throw std::invalid_argument("local models have different shapes");
        }
        if (m == 0) continue;
        const MoEParams aligned = align ? permute_experts(p, align_to(p, reference)) : p;
        const double w = locals[m].lambda;
        alpha += w * (aligned.gating().alpha - reference.gating().alpha);
        for (std::size_t k = 0; k < K; ++k) {
            betas[k] += w * (aligned.expert(k).beta - reference.expert(k).beta);
            sigma2[k] += w * (aligned.expert(k).sigma2 - reference.expert(k).sigma2);
        }
    }
    std::vector<ExpertParams> experts;
    for (std::size_t k = 0; k < K; ++k) {
        experts.push_back(reference.kind() == ExpertKind::GaussianRegression
                              ? ExpertParams::gaussian(std::move(betas[k]), sigma2[k])
                              : ExpertParams::logistic(std::move(betas[k])));
    }
    return canonicalize(MoEParams(GatingParams{std::move(alpha)}, std::move(experts)));
}

MmResult reduction_estimator(const std::vector<LocalModel>& locals, std::size_t K, const SupportSample& support,
                             const MmConfig& config) {
    return mm_reduce(build_pooled(locals), K, support, config);
}

}  // namespace dmoe
