// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dmoe/model.hpp"

#include <cstddef>
#include <vector>

namespace dmoe {

/// A local estimator together with its sample proportion lambda_m = N_m / N.
struct LocalModel {
    MoEParams params;
    double lambda = 1.0;
};

/// The MK-component mixture sum_m lambda_m f_m. Component l = m*K + k carries
/// gate lambda_m * pi_k(x; alpha_m) and expert k of local m.
class PooledMixture {
public:
    PooledMixture() = default;
    explicit PooledMixture(std::vector<LocalModel> locals);

    std::size_t M() const noexcept { return locals_.size(); }
    std::size_t local_K() const noexcept { return locals_.front().params.K(); }
    std::size_t L() const noexcept { return M() * local_K(); }
    std::size_t dim() const noexcept { return locals_.front().params.dim(); }
    ExpertKind kind() const noexcept { return locals_.front().params.kind(); }

    const std::vector<LocalModel>& locals() const noexcept { return locals_; }
    const ExpertParams& expert(std::size_t l) const;
    double lambda(std::size_t m) const { return locals_.at(m).lambda; }

    /// Gate vector of all L components at one covariate row.
    Vector gates(RowRef x) const;

    /// S x L matrix of component gates at each row of X.
    Matrix gate_matrix(const Matrix& X) const;

    /// d+1 x L matrix of component coefficient vectors.
    Matrix beta_matrix() const;

    /// Length-L vector of component variances (zeros for logistic experts).
    Vector sigma2_vector() const;

    /// Conditional density of the pooled mixture.
    double conditional_density(double y, RowRef x) const;

private:
    std::vector<LocalModel> locals_;
};

/// Validates shapes and the lambda simplex, then flattens the locals.
PooledMixture build_pooled(std::vector<LocalModel> locals);

/// A single model viewed as a one-machine pooled mixture.
PooledMixture as_pooled(const MoEParams& model);

/// Covariate-only sample used as the empirical measure over x.
struct SupportSample {
    Matrix X;  // S x (d+1), intercept in column 0

    std::size_t size() const noexcept { return static_cast<std::size_t>(X.rows()); }
    void validate() const;
};

}  // namespace dmoe
