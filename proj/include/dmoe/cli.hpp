// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/datagen.hpp"
#include "dmoe/harness.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace dmoe {

/// Experiment document:
///   { "seed": int, "gen": {...}, "run": {...}, "replicates": int, "output_dir": str }
/// gen.K, gen.d, gen.N, replicates and output_dir are required.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    GenConfig gen;
    RunConfig run;
    std::size_t replicates = 1;
    std::filesystem::path output_dir;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Writes dataset.csv, labels.csv and truth.json under output_dir.
void cmd_generate(const ExperimentConfig& config, std::ostream& log);

struct RunSummary {
    std::size_t rows = 0;
    std::size_t errors = 0;
};

/// Runs every replicate and writes results.csv, timing.csv and one
/// trace_<replicate>.csv per replicate under output_dir.
RunSummary cmd_run(const ExperimentConfig& config, std::ostream& log);

struct EvalInputs {
    std::filesystem::path model;
    std::filesystem::path data;
    std::optional<std::filesystem::path> truth;
    std::optional<std::filesystem::path> labels;
    std::size_t support_size = 0;  // 0 means every row
    std::uint64_t seed = 0;
};

/// Metrics of a stored model on a dataset, as a JSON object.
nlohmann::json cmd_eval(const EvalInputs& inputs);

/// Results CSV header shared by cmd_run and the tests.
inline constexpr const char* kResultsHeader =
    "replicate,seed,estimator,divergence,loglik,mse,rpe,ari,time_s,comm_scalars,error";

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace dmoe
