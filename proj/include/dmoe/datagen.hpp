// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dmoe {

struct GenConfig {
    std::size_t K = 4;
    std::size_t d = 20;
    std::size_t N = 0;
    std::uint64_t seed = 0;
    int param_low = -5;
    int param_high = 5;
    double test_fraction = 0.2;

    void validate() const;
};

struct GeneratedTruth {
    MoEParams params;  // canonical order
    Matrix centers;    // K x d covariate cluster centers
};

/// Integer-valued alpha, beta and centers from [param_low, param_high];
/// variances from the integers 1..5.
GeneratedTruth generate_truth(const GenConfig& config);

/// Covariance with entries 0.25^|u-v|.
Matrix covariate_covariance(std::size_t d);

struct GeneratedData {
    Dataset data;
    std::vector<int> labels;  // latent expert index per row
};

/// N/K covariate rows around each center (the remainder goes to the lowest
/// clusters), then responses drawn from the truth.
GeneratedData generate_dataset(const GeneratedTruth& truth, const GenConfig& config);

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// Uniform random split with floor(N * (1 - fraction)) training rows.
SplitResult split(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace dmoe
