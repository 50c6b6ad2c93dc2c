// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"
#include "dmoe/pooled.hpp"

#include <cstddef>
#include <vector>

namespace dmoe {

/// Ground cost between two expert conditional laws at a fixed x.
enum class CostKind { KullbackLeibler };

struct CostMatrix {
    Matrix values;  // L x K, entry (l, k) = c(phi_l(.|x), phi_k(.|x))
};

struct TransportPlan {
    Matrix values;         // L x K
    Vector row_marginals;  // length L

    Vector column_sums() const { return values.colwise().sum().transpose(); }
    double cost(const CostMatrix& c) const;
};

double kl_gaussian_experts(RowRef x, const ExpertParams& e1, const ExpertParams& e2);
double kl_logistic_experts(RowRef x, const ExpertParams& e1, const ExpertParams& e2);

/// KL between N(mean1, var1) and N(mean2, var2).
double kl_gaussian(double mean1, double var1, double mean2, double var2);

/// KL between Bernoulli(sigmoid(eta1)) and Bernoulli(sigmoid(eta2)).
double kl_bernoulli_logits(double eta1, double eta2);

double expert_cost(RowRef x, const ExpertParams& e1, const ExpertParams& e2, CostKind kind = CostKind::KullbackLeibler);

CostMatrix cost_matrix(RowRef x, const std::vector<ExpertParams>& from, const std::vector<ExpertParams>& to,
                       CostKind kind = CostKind::KullbackLeibler);

/// Sends all of row l's mass to its cheapest column (lowest index on ties).
/// Minimizes sum P .* C over plans constrained on rows only.
TransportPlan relaxed_optimal_plan(const CostMatrix& cost, const Vector& row_marginals);

struct OtSolution {
    TransportPlan plan;
    double cost = 0.0;
    std::size_t pivots = 0;
};

/// Exact discrete optimal transport between two marginals by the transportation
/// (network) simplex method. Column marginals within 1e-9 of the row total are
/// rescaled to it; larger imbalance is rejected.
OtSolution full_ot_plan(const CostMatrix& cost, const Vector& row_marginals, const Vector& col_marginals);

/// Empirical mean over the support of the optimal transport cost between the
/// gates of h and g, with expert-to-expert ground cost.
double expected_transport_divergence(const PooledMixture& h, const MoEParams& g, const SupportSample& support,
                                     CostKind kind = CostKind::KullbackLeibler);
double expected_transport_divergence(const MoEParams& h, const MoEParams& g, const SupportSample& support,
                                     CostKind kind = CostKind::KullbackLeibler);

}  // namespace dmoe
