// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"
#include "dmoe/pooled.hpp"
#include "dmoe/softmax_regression.hpp"
#include "dmoe/transport.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dmoe {

enum class MmInit { BestLocal, RandomKOfPooled };

struct MmConfig {
    std::size_t max_iter = 200;
    double tol = 1e-8;  // relative objective change
    MmInit init = MmInit::BestLocal;
    double ridge = 1e-8;  // absolute, added to each normal-equations matrix
    std::uint64_t seed = 0;

    void validate() const;
};

/// Row-sparse transport plans over a support sample. Pooled component l at
/// support point s sends all of its gate mass mass(s, l) to expert target(s, l).
struct PlanTensor {
    Eigen::MatrixXi target;  // S x L
    Matrix mass;             // S x L
    std::size_t K = 0;

    std::size_t S() const noexcept { return static_cast<std::size_t>(mass.rows()); }
    std::size_t L() const noexcept { return static_cast<std::size_t>(mass.cols()); }

    /// Dense L x K plan at support point s.
    TransportPlan at(std::size_t s) const;

    /// S x K matrix of per-point column sums (the implied gates of g).
    Matrix column_sums() const;

    /// Diagonal of D_k: per-point mass received by expert k.
    Vector received(std::size_t k) const;

    /// W_k: L x S matrix of mass sent from component l to expert k at point s.
    Matrix sent(std::size_t k) const;
};

/// Pooled quantities evaluated once on the support sample.
struct PooledOnSupport {
    Matrix gates;      // S x L
    Matrix predictor;  // S x L, x_s' beta_l
    Vector sigma2;     // L (zeros for logistic)
    ExpertKind kind = ExpertKind::GaussianRegression;
};

PooledOnSupport evaluate_pooled(const PooledMixture& pooled, const SupportSample& support);

/// Per point and pooled component, the cheapest target expert under the
/// expert-to-expert cost, lowest index on ties.
PlanTensor plan_update(const PooledMixture& pooled, const MoEParams& g, const SupportSample& support,
                       CostKind kind = CostKind::KullbackLeibler);

/// Average over the support of sum_{l,k} P_lk(x_s) c(phi_l, phi_k) at x_s.
double majorizer_value(const PooledMixture& pooled, const std::vector<ExpertParams>& experts, const PlanTensor& plan,
                       const SupportSample& support, CostKind kind = CostKind::KullbackLeibler);

/// R_c(g): the majorizer evaluated at g's own optimal plan.
double relaxed_objective(const PooledMixture& pooled, const MoEParams& g, const SupportSample& support,
                         CostKind kind = CostKind::KullbackLeibler);

/// Minimizes the majorizer over Gaussian (beta_k, sigma2_k) given the plan.
/// Throws EmptyComponentError for an expert that receives no mass.
std::vector<ExpertParams> update_gaussian_experts(const PooledMixture& pooled, const PlanTensor& plan,
                                                  const SupportSample& support, double ridge = 1e-8);

/// Least-squares fit of logit(V_k) on X_S over the points where expert k
/// receives mass, with V_k the received-mass-weighted pooled probabilities.
std::vector<ExpertParams> logistic_experts_closed_form(const PooledMixture& pooled, const PlanTensor& plan,
                                                       const SupportSample& support, double ridge = 1e-8);

/// Minimizes the majorizer over logistic beta_k given the plan: Newton on the
/// weighted cross-entropy, started from the closed form.
std::vector<ExpertParams> update_logistic_experts(const PooledMixture& pooled, const PlanTensor& plan,
                                                  const SupportSample& support, double ridge = 1e-8);

/// Softmax MLE on the plan's column sums a_sk, warm-started at `init`.
GatingParams gating_refit(const PlanTensor& plan, const SupportSample& support, const GatingParams& init,
                          const SoftmaxFitOptions& options = {});
GatingParams gating_refit(const PlanTensor& plan, const SupportSample& support);

struct MmResult {
    MoEParams model;                     // canonical order, refitted gate
    std::vector<double> objective_trace;  // R_c at the start and after every update
    std::size_t iterations = 0;
    std::size_t reseeds = 0;
    std::size_t init_local = 0;  // chosen local for BestLocal starts
    Matrix plan_gates;            // S x K column sums of the final plan, canonical order
};

/// Reduces the pooled mixture to K components by majorization-minimization.
MmResult mm_reduce(const PooledMixture& pooled, std::size_t K, const SupportSample& support,
                   const MmConfig& config = {});

}  // namespace dmoe
