// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dmoe {

/// Model document:
///   { "kind": "gaussian_regression" | "binary_logistic", "K": int, "d": int,
///     "alpha": [[...d+1...] x (K-1)],
///     "experts": [{"beta": [...d+1...], "sigma2": number}, ...] }
/// `sigma2` is required for Gaussian experts and must be absent otherwise.
nlohmann::json model_to_json(const MoEParams& params);
MoEParams model_from_json(const nlohmann::json& doc);

std::string serialize(const MoEParams& params);
MoEParams deserialize(const std::string& text);

void write_model(const std::filesystem::path& path, const MoEParams& params);
MoEParams read_model(const std::filesystem::path& path);

/// Formats a double with 17 significant digits, '.' decimal, no locale.
std::string format_double(double v);

/// Dataset CSV: header `x1,...,xd,y`, one row per observation. The intercept
/// is implicit in the file and added on load.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Single-column integer CSV with header `label`.
void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_labels_csv(const std::filesystem::path& path);

}  // namespace dmoe
