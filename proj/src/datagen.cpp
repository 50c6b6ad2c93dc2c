// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/datagen.hpp"

#include "dmoe/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dmoe {

namespace {

enum Stream : std::uint64_t { kTruthStream = 1, kCovariateStream = 2, kResponseStream = 3 };

}  // namespace

void GenConfig::validate() const {
    if (K < 1) throw std::invalid_argument("gen.K must be >= 1");
    if (d < 1) throw std::invalid_argument("gen.d must be >= 1");
    if (N < K) throw std::invalid_argument("gen.N must be >= gen.K");
    if (param_low > param_high) throw std::invalid_argument("gen.param_range is empty");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("gen.test_fraction must lie in (0, 1)");
    }
}

GeneratedTruth generate_truth(const GenConfig& config) {
    if (config.K < 1 || config.d < 1 || config.param_low > config.param_high) {
        throw std::invalid_argument("invalid generator configuration");
    }
    Rng rng = make_rng(derive_seed(config.seed, kTruthStream));
    std::uniform_int_distribution<int> param(config.param_low, config.param_high);
    std::uniform_int_distribution<int> variance(1, 5);
    const auto K = static_cast<Eigen::Index>(config.K);
    const auto p = static_cast<Eigen::Index>(config.d + 1);

    GatingParams gating;
    gating.alpha.resize(K - 1, p);
    for (Eigen::Index k = 0; k < K - 1; ++k) {
        for (Eigen::Index j = 0; j < p; ++j) gating.alpha(k, j) = param(rng);
    }
    std::vector<ExpertParams> experts;
    for (Eigen::Index k = 0; k < K; ++k) {
        Vector beta(p);
        for (Eigen::Index j = 0; j < p; ++j) beta(j) = param(rng);
        experts.push_back(ExpertParams::gaussian(std::move(beta), variance(rng)));
    }
    GeneratedTruth truth;
    truth.centers.resize(K, p - 1);
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index j = 0; j < p - 1; ++j) truth.centers(k, j) = param(rng);
    }
    // Gate rows and experts are drawn independently, so sorting the experts
    // alone yields canonical order without re-referencing the gate.
    const auto order = canonical_order(experts);
    std::vector<ExpertParams> sorted;
    for (std::size_t k : order) sorted.push_back(experts[k]);
    truth.params = MoEParams(std::move(gating), std::move(sorted));
    return truth;
}

Matrix covariate_covariance(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    Matrix sigma(n, n);
    for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index v = 0; v < n; ++v) sigma(u, v) = std::pow(0.25, static_cast<double>(std::abs(u - v)));
    }
    return sigma;
}

GeneratedData generate_dataset(const GeneratedTruth& truth, const GenConfig& config) {
    config.validate();
    if (truth.params.kind() != ExpertKind::GaussianRegression) {
        throw std::invalid_argument("the generator draws Gaussian responses only");
    }
    const std::size_t K = static_cast<std::size_t>(truth.centers.rows());
    const auto d = truth.centers.cols();
    if (truth.params.d() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("truth and centers have different dimensions");
    }
    const Eigen::LLT<Matrix> chol(covariate_covariance(static_cast<std::size_t>(d)));
    const Matrix Lc = chol.matrixL();

    Rng rng = make_rng(derive_seed(config.seed, kCovariateStream));
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix cov(static_cast<Eigen::Index>(config.N), d);
    Eigen::Index row = 0;
    Vector draw(d);
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t count = config.N / K + (k < config.N % K ? 1 : 0);
        for (std::size_t i = 0; i < count; ++i, ++row) {
            for (Eigen::Index j = 0; j < d; ++j) draw(j) = z(rng);
            cov.row(row) = truth.centers.row(static_cast<Eigen::Index>(k)) + (Lc * draw).transpose();
        }
    }
    const Matrix X = augment_intercept(cov);
    SampledResponses sampled = sample_responses(X, truth.params, derive_seed(config.seed, kResponseStream));
    GeneratedData out;
    out.data.X = X;
    out.data.y = std::move(sampled.y);
    out.labels = std::move(sampled.labels);
    return out;
}

SplitResult split(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
    const std::size_t N = data.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    // Relative nudge so that e.g. 0.8 * 100000 is not floored to 79999.
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(N) * (1.0 - fraction) * (1.0 + 1e-12)));
    SplitResult out;
    out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    out.train = data.subset(out.train_rows);
    out.test = data.subset(out.test_rows);
    return out;
}

}  // namespace dmoe
