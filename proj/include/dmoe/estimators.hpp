// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/em.hpp"
#include "dmoe/mm.hpp"
#include "dmoe/model.hpp"
#include "dmoe/pooled.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dmoe {

enum class EstimatorKind { Global, Reduction, Middle, WeightedAverage };

inline constexpr EstimatorKind kAllEstimators[] = {EstimatorKind::Global, EstimatorKind::Reduction,
                                                   EstimatorKind::Middle, EstimatorKind::WeightedAverage};

/// "global", "reduction", "middle", "weighted_average".
std::string_view to_string(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator(std::string_view name);

/// EM on the undivided data.
EmResult global_estimator(const Dataset& data, std::size_t K, const EmConfig& config);

struct MiddleResult {
    MoEParams model;
    std::size_t index = 0;  // zero-based position in the locals list
    Vector scores;          // lambda-weighted divergence sums, one per local
};

/// The local minimizing sum_m' lambda_m' T_c(f_m', f_m); ties go to the lowest m.
MiddleResult middle_estimator(const std::vector<LocalModel>& locals, const SupportSample& support);

/// Permutation of `model`'s experts that best matches `reference` in summed
/// squared beta distance. Exhaustive for K <= 8, greedy beyond.
std::vector<std::size_t> align_to(const MoEParams& model, const MoEParams& reference);

/// Lambda-weighted average of (alpha, betas, sigma2s). With `align`, every
/// local is first permuted to match local 0; otherwise stored order is used.
MoEParams weighted_average_estimator(const std::vector<LocalModel>& locals, bool align = true);

/// Pools the locals and reduces the mixture to K components.
MmResult reduction_estimator(const std::vector<LocalModel>& locals, std::size_t K, const SupportSample& support,
                             const MmConfig& config = {});

}  // namespace dmoe
