// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/em.hpp"

#include "dmoe/errors.hpp"
#include "dmoe/numeric.hpp"
#include "dmoe/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dmoe {

namespace {

constexpr double kMinVariance = 1e-10;
constexpr double kMinColumnMass = 1e-12;

/// Row-wise log normalizers of a log-joint matrix; throws on a dead row.
Vector row_log_normalizers(const Matrix& log_joint) {
    Vector lse(log_joint.rows());
    for (Eigen::Index i = 0; i < log_joint.rows(); ++i) {
        lse(i) = log_sum_exp(log_joint.row(i).transpose());
        if (!std::isfinite(lse(i))) {
            throw NumericalDegeneracyError(static_cast<std::size_t>(i),
                                           "all component densities vanish at row " + std::to_string(i));
        }
    }
    return lse;
}

Vector weighted_least_squares(const Matrix& X, const Vector& y, const Vector& w, double ridge) {
    const Matrix Xw = X.array().colwise() * w.array();
    const Matrix A = Xw.transpose() * X;
    const Vector b = Xw.transpose() * y;
    const double jitter = ridge * A.trace() / static_cast<double>(A.rows());
    return solve_spd(A, b, jitter);
}

}  // namespace

void EmConfig::validate() const {
    if (max_iter < 1) throw std::invalid_argument("EmConfig.max_iter must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("EmConfig.tol must be > 0");
    if (n_init < 1) throw std::invalid_argument("EmConfig.n_init must be >= 1");
    if (!(ridge >= 0.0)) throw std::invalid_argument("EmConfig.ridge must be >= 0");
}

Matrix e_step(const Dataset& data, const MoEParams& params) {
    const Matrix lj = log_joint_matrix(data, params);
    const Vector lse = row_log_normalizers(lj);
    return (lj.colwise() - lse).array().exp();
}

std::vector<ExpertParams> m_step_experts(const Dataset& data, const Matrix& resp, ExpertKind kind, double ridge) {
    if (resp.rows() != data.X.rows()) {
        throw std::invalid_argument("responsibility matrix has the wrong number of rows");
    }
    std::vector<ExpertParams> experts;
    experts.reserve(static_cast<std::size_t>(resp.cols()));
    for (Eigen::Index k = 0; k < resp.cols(); ++k) {
        const Vector w = resp.col(k);
        const double mass = w.sum();
        if (!(mass >= kMinColumnMass)) {
            throw EmptyComponentError(static_cast<std::size_t>(k),
                                      "component " + std::to_string(k) + " has no responsibility mass");
        }
        if (kind == ExpertKind::GaussianRegression) {
            Vector beta = weighted_least_squares(data.X, data.y, w, ridge);
            const Vector r = data.y - data.X * beta;
            const double s2 = w.dot(r.cwiseProduct(r)) / mass;
            experts.push_back(ExpertParams::gaussian(std::move(beta), std::max(s2, kMinVariance)));
        } else {
            Vector beta = fit_weighted_logistic(data.X, data.y, w, Vector::Zero(data.X.cols()));
            experts.push_back(ExpertParams::logistic(std::move(beta)));
        }
    }
    return experts;
}

SoftmaxFit m_step_gating(const Matrix& X, const Matrix& resp, const GatingParams& prev,
                         const SoftmaxFitOptions& options) {
    return fit_softmax_regression(X, resp, prev, options);
}

EmResult em_run(const Dataset& data, const MoEParams& init, const EmConfig& config) {
    config.validate();
    EmResult out;
    out.params = init;
    double ll_prev = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t iter = 0;; ++iter) {
        const Matrix lj = log_joint_matrix(data, out.params);
        const Vector lse = row_log_normalizers(lj);
        double ll = 0.0;
        for (Eigen::Index i = 0; i < lse.size(); ++i) ll += std::max(lse(i), kLogDensityFloor);
        out.trace.push_back(ll);
        out.log_likelihood = ll;
        if (iter > 0 && std::abs(ll - ll_prev) <= config.tol * std::max(std::abs(ll_prev), 1e-300)) break;
        if (iter == config.max_iter) break;

        const Matrix resp = (lj.colwise() - lse).array().exp();
        auto experts = m_step_experts(data, resp, config.kind, config.ridge);
        GatingParams gating = out.params.gating();
        if (out.params.K() > 1) {
            gating = m_step_gating(data.X, resp, gating).gating;
        }
        out.params = MoEParams(std::move(gating), std::move(experts));
        out.iterations = iter + 1;
        ll_prev = ll;
    }
    return out;
}

MoEParams em_initialize(const Dataset& data, std::size_t K, const EmConfig& config, std::size_t restart) {
    const auto N = static_cast<Eigen::Index>(data.size());
    const Eigen::Index p = data.X.cols();
    Rng rng = make_rng(derive_seed(config.seed, restart));

    std::vector<std::size_t> rows(static_cast<std::size_t>(N));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    // Partial Fisher-Yates for K distinct anchors.
    for (std::size_t k = 0; k < K; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, rows.size() - 1);
        std::swap(rows[k], rows[pick(rng)]);
    }
    const std::vector<std::size_t> anchors(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(K));

    const std::size_t neighbours =
        std::min<std::size_t>(static_cast<std::size_t>(N),
                              std::max<std::size_t>((static_cast<std::size_t>(N) + K - 1) / K, static_cast<std::size_t>(p) + 1));

    double global_var = 1.0;
    if (config.kind == ExpertKind::GaussianRegression) {
        const Vector beta = weighted_least_squares(data.X, data.y, Vector::Ones(N), config.ridge);
        const Vector r = data.y - data.X * beta;
        global_var = std::max(r.squaredNorm() / static_cast<double>(N), kMinVariance);
    }

    std::vector<ExpertParams> experts;
    std::vector<double> dist(static_cast<std::size_t>(N));
    std::vector<std::size_t> order(static_cast<std::size_t>(N));
    for (std::size_t k = 0; k < K; ++k) {
        const auto anchor = data.X.row(static_cast<Eigen::Index>(anchors[k]));
        for (Eigen::Index i = 0; i < N; ++i) {
            dist[static_cast<std::size_t>(i)] = (data.X.row(i).tail(p - 1) - anchor.tail(p - 1)).squaredNorm();
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(neighbours - 1), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                         });
        Vector w = Vector::Zero(N);
        for (std::size_t j = 0; j < neighbours; ++j) w(static_cast<Eigen::Index>(order[j])) = 1.0;
        if (config.kind == ExpertKind::GaussianRegression) {
            experts.push_back(ExpertParams::gaussian(weighted_least_squares(data.X, data.y, w, config.ridge), global_var));
        } else {
            SoftmaxFitOptions opts;
            opts.max_iter = 25;
            experts.push_back(ExpertParams::logistic(fit_weighted_logistic(data.X, data.y, w, Vector::Zero(p), opts)));
        }
    }
    GatingParams gating;
    gating.alpha = Matrix::Zero(static_cast<Eigen::Index>(K - 1), p);
    return MoEParams(std::move(gating), std::move(experts));
}

EmResult em_fit(const Dataset& data, std::size_t K, const EmConfig& config) {
    config.validate();
    data.validate();
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (data.size() < K * (data.d() + 2)) {
        throw std::invalid_argument("em_fit needs N >= K*(d+2) rows, got " + std::to_string(data.size()));
    }
    bool have = false;
    EmResult best;
    std::string last_error;
    for (std::size_t r = 0; r < config.n_init; ++r) {
        try {
            EmResult run = em_run(data, em_initialize(data, K, config, r), config);
            run.restart = r;
            if (!have || run.log_likelihood > best.log_likelihood) {
                best = std::move(run);
                have = true;
            }
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    if (!have) {
        throw FitFailureError("all " + std::to_string(config.n_init) + " EM restarts degenerated: " + last_error);
    }
    best.params = canonicalize(best.params);
    return best;
}

}  // namespace dmoe
