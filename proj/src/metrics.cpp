// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/metrics.hpp"

#include "dmoe/numeric.hpp"
#include "dmoe/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace dmoe {

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double param_mse(const MoEParams& est, const MoEParams& truth, bool best_permutation) {
    if (est.K() != truth.K() || est.d() != truth.d() || est.kind() != truth.kind()) {
        throw std::invalid_argument("param_mse: models have different shapes");
    }
    const Vector t = flatten(canonicalize(truth));
    const MoEParams e = canonicalize(est);
    if (!best_permutation) return (flatten(e) - t).squaredNorm() / static_cast<double>(t.size());

    std::vector<std::size_t> perm(e.K());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, (flatten(permute_experts(e, perm)) - t).squaredNorm());
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(t.size());
}

double rpe(const Vector& y, const Vector& yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("rpe: length mismatch");
    const double denom = y.squaredNorm();
    if (!(denom > 0.0)) throw std::invalid_argument("rpe: responses are all zero");
    return (y - yhat).squaredNorm() / denom;
}

double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
    if (labels_a.size() != labels_b.size()) throw std::invalid_argument("ari: length mismatch");
    if (labels_a.size() < 2) throw std::invalid_argument("ari: needs at least two items");
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < labels_a.size(); ++i) {
        cells[{labels_a[i], labels_b[i]}] += 1.0;
        rows[labels_a[i]] += 1.0;
        cols[labels_b[i]] += 1.0;
    }
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, n] : cells) index += choose2(n);
    for (const auto& [key, n] : rows) sum_a += choose2(n);
    for (const auto& [key, n] : cols) sum_b += choose2(n);
    const double total = choose2(static_cast<double>(labels_a.size()));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both partitions trivial and equal
    return (index - expected) / (max_index - expected);
}

double divergence_to_truth(const MoEParams& est, const MoEParams& truth, const SupportSample& support) {
    return expected_transport_divergence(truth, est, support);
}

Vector predict_all(const Matrix& X, const MoEParams& params) {
    const Matrix gates = gate_matrix(X, params.gating(), params.K());
    Matrix B(X.cols(), static_cast<Eigen::Index>(params.K()));
    for (std::size_t k = 0; k < params.K(); ++k) B.col(static_cast<Eigen::Index>(k)) = params.expert(k).beta;
    Matrix eta = X * B;
    if (params.kind() == ExpertKind::BinaryLogistic) {
        eta = eta.unaryExpr([](double z) { return sigmoid(z); });
    }
    return gates.cwiseProduct(eta).rowwise().sum();
}

std::vector<int> map_labels(const Matrix& X, const MoEParams& params) {
    const Matrix gates = gate_matrix(X, params.gating(), params.K());
    std::vector<int> labels(static_cast<std::size_t>(gates.rows()));
    for (Eigen::Index i = 0; i < gates.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < gates.cols(); ++k) {
            if (gates(i, k) > gates(i, best)) best = k;
        }
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return labels;
}

double rmse(const Vector& y, const Vector& yhat) {
    if (y.size() != yhat.size() || y.size() == 0) throw std::invalid_argument("rmse: length mismatch");
    return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

double scatter_index(const Vector& y, const Vector& yhat) {
    const double mean = y.mean();
    if (mean == 0.0) throw std::invalid_argument("scatter_index: mean response is zero");
    return rmse(y, yhat) / mean;
}

MetricsReport evaluate_model(const MoEParams& est, const Dataset& test, const MoEParams* truth,
                             const std::vector<int>* test_labels, const SupportSample* support) {
    MetricsReport r;
    r.loglik = log_likelihood(test, est);
    if (est.kind() == ExpertKind::GaussianRegression) r.rpe = rpe(test.y, predict_all(test.X, est));
    if (test_labels && test_labels->size() >= 2) r.ari = ari(*test_labels, map_labels(test.X, est));
    if (truth) {
        r.mse = param_mse(est, *truth);
        if (support) r.divergence = divergence_to_truth(est, *truth, *support);
    }
    return r;
}

}  // namespace dmoe
