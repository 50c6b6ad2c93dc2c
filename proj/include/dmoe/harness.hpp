// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/em.hpp"
#include "dmoe/estimators.hpp"
#include "dmoe/metrics.hpp"
#include "dmoe/mm.hpp"
#include "dmoe/model.hpp"
#include "dmoe/pooled.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dmoe {

struct RunConfig {
    std::size_t M = 4;
    std::size_t K = 4;
    std::size_t S = 0;  // 0 means N / M
    std::uint64_t seed = 0;
    std::vector<EstimatorKind> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
    EmConfig em;
    MmConfig mm;
    std::size_t workers = 0;  // 0 means hardware concurrency
    bool align_average = true;

    void validate() const;
};

struct Shard {
    Dataset data;
    std::vector<std::size_t> rows;  // positions in the source dataset
    double lambda = 1.0;
};

/// Random disjoint shards of sizes differing by at most one. M = 1 returns the
/// dataset itself in its original order.
std::vector<Shard> partition(const Dataset& data, std::size_t M, std::uint64_t seed);

/// S covariate rows drawn uniformly without replacement.
SupportSample draw_support(const Dataset& data, std::size_t S, std::uint64_t seed);

struct TimingReport {
    std::vector<double> local_seconds;       // thread CPU time per machine
    std::vector<double> local_wall_seconds;  // wall clock per machine
    double max_local_seconds = 0.0;
    double global_seconds = 0.0;
    double reduction_aggregation_seconds = 0.0;
    double middle_aggregation_seconds = 0.0;
    double average_aggregation_seconds = 0.0;

    /// Global: the EM time. Others: max local time plus that estimator's aggregation.
    double learning_seconds(EstimatorKind kind) const;
};

struct CommReport {
    std::size_t parameters_sent = 0;  // M * (K(d+1) + K + (K-1)(d+1))
    std::size_t support_sent = 0;     // S * (d+1)
    std::size_t data_rows_scalars = 0;  // N * (d+2), shipping everything for the global fit

    /// Scalars moved from the machines to the centre for one estimator.
    std::size_t scalars(EstimatorKind kind) const;
};

CommReport communication_cost(std::size_t M, std::size_t K, std::size_t d, std::size_t S, std::size_t N);

struct EstimatorOutcome {
    EstimatorKind kind = EstimatorKind::Global;
    std::optional<MoEParams> model;
    MetricsReport metrics;
    std::string error;
    std::vector<double> objective_trace;  // reduction only
};

struct ExperimentResult {
    std::vector<EstimatorOutcome> outcomes;  // in config.estimators order
    std::vector<LocalModel> locals;
    TimingReport timing;
    CommReport comm;
    std::string local_error;
};

/// Seed of the EM run on shard m; the global fit uses the seed of shard 0 so
/// that a single shard reproduces it.
std::uint64_t shard_seed(std::uint64_t seed, std::size_t m);

/// Shards the training data, fits the locals concurrently, aggregates, and
/// evaluates every requested estimator on the test data.
ExperimentResult run_experiment(const Dataset& train, const Dataset& test, const MoEParams* truth,
                                const std::vector<int>* test_labels, const RunConfig& config);

}  // namespace dmoe
