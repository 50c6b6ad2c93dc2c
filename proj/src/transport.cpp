// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/transport.hpp"

#include "dmoe/errors.hpp"
#include "dmoe/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dmoe {

namespace {

void check_pair(RowRef x, const ExpertParams& e1, const ExpertParams& e2, ExpertKind kind) {
    if (e1.kind != kind || e2.kind != kind) {
        throw std::invalid_argument("expert kind does not match the requested cost");
    }
    if (e1.beta.size() != e2.beta.size() || e1.beta.size() != x.size()) {
        throw std::invalid_argument("expert dimensions do not match the covariate row");
    }
}

/// Spanning-tree basis of the transportation simplex over L row nodes and K
/// column nodes (column j is node L + j).
class TransportationSimplex {
public:
    TransportationSimplex(const Matrix& cost, const Vector& rows, const Vector& cols)
        : c_(cost), L_(cost.rows()), K_(cost.cols()), flow_(Matrix::Zero(L_, K_)),
          basic_(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(L_, K_, false)) {
        north_west_corner(rows, cols);
    }

    std::size_t solve() {
        const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
        const double eps = 1e-12 * scale;
        std::size_t pivots = 0;
        Vector u(L_), v(K_);
        while (true) {
            potentials(u, v);
            Eigen::Index ei = -1, ej = -1;
            // Bland's rule: first improving cell in index order.
            for (Eigen::Index i = 0; i < L_ && ei < 0; ++i) {
                for (Eigen::Index j = 0; j < K_; ++j) {
                    if (!basic_(i, j) && c_(i, j) - u(i) - v(j) < -eps) {
                        ei = i;
                        ej = j;
                        break;
                    }
                }
            }
            if (ei < 0) return pivots;
            pivot(ei, ej);
            if (++pivots > 100000) {
                throw SolverFailureError("transportation simplex did not terminate");
            }
        }
    }

    const Matrix& flow() const { return flow_; }

private:
    void north_west_corner(const Vector& rows, const Vector& cols) {
        Vector ra = rows, rb = cols;
        Eigen::Index i = 0, j = 0;
        while (true) {
            const double x = std::min(ra(i), rb(j));
            flow_(i, j) = x;
            basic_(i, j) = true;
            ra(i) -= x;
            rb(j) -= x;
            if (i == L_ - 1 && j == K_ - 1) break;
            if (i == L_ - 1) {
                ++j;
            } else if (j == K_ - 1) {
                ++i;
            } else if (ra(i) <= rb(j)) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    std::vector<std::vector<Eigen::Index>> adjacency() const {
        std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(L_ + K_));
        for (Eigen::Index i = 0; i < L_; ++i) {
            for (Eigen::Index j = 0; j < K_; ++j) {
                if (basic_(i, j)) {
                    adj[static_cast<std::size_t>(i)].push_back(L_ + j);
                    adj[static_cast<std::size_t>(L_ + j)].push_back(i);
                }
            }
        }
        return adj;
    }

    void potentials(Vector& u, Vector& v) const {
        const auto adj = adjacency();
        std::vector<bool> seen(static_cast<std::size_t>(L_ + K_), false);
        std::vector<Eigen::Index> queue{0};
        seen[0] = true;
        u(0) = 0.0;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const Eigen::Index n = queue[q];
            for (Eigen::Index m : adj[static_cast<std::size_t>(n)]) {
                if (seen[static_cast<std::size_t>(m)]) continue;
                seen[static_cast<std::size_t>(m)] = true;
                if (n < L_) {
                    v(m - L_) = c_(n, m - L_) - u(n);
                } else {
                    u(m) = c_(m, n - L_) - v(n - L_);
                }
                queue.push_back(m);
            }
        }
        if (queue.size() != static_cast<std::size_t>(L_ + K_)) {
            throw SolverFailureError("transportation basis is not a spanning tree");
        }
    }

    void pivot(Eigen::Index ei, Eigen::Index ej) {
        // Tree path from column node ej to row node ei closes the cycle.
        const auto adj = adjacency();
        std::vector<Eigen::Index> parent(static_cast<std::size_t>(L_ + K_), -1);
        std::vector<Eigen::Index> queue{L_ + ej};
        parent[static_cast<std::size_t>(L_ + ej)] = L_ + ej;
        for (std::size_t q = 0; q < queue.size() && parent[static_cast<std::size_t>(ei)] < 0; ++q) {
            const Eigen::Index n = queue[q];
            for (Eigen::Index m : adj[static_cast<std::size_t>(n)]) {
                if (parent[static_cast<std::size_t>(m)] >= 0) continue;
                parent[static_cast<std::size_t>(m)] = n;
                queue.push_back(m);
            }
        }
        // Edges walked from ei back to ej; reversing gives the order from ej.
        std::vector<std::pair<Eigen::Index, Eigen::Index>> path;
        for (Eigen::Index n = ei; n != L_ + ej; n = parent[static_cast<std::size_t>(n)]) {
            const Eigen::Index p = parent[static_cast<std::size_t>(n)];
            path.emplace_back(n < L_ ? n : p, n < L_ ? p - L_ : n - L_);
        }
        std::reverse(path.begin(), path.end());

        double theta = std::numeric_limits<double>::infinity();
        Eigen::Index leave = -1;
        for (std::size_t e = 0; e < path.size(); e += 2) {
            const auto [i, j] = path[e];
            const double x = flow_(i, j);
            const Eigen::Index id = i * K_ + j;
            if (x < theta || (x == theta && id < leave)) {
                theta = x;
                leave = id;
            }
        }
        theta = std::max(theta, 0.0);
        for (std::size_t e = 0; e < path.size(); ++e) {
            const auto [i, j] = path[e];
            flow_(i, j) += (e % 2 == 0) ? -theta : theta;
        }
        flow_(ei, ej) = theta;
        basic_(ei, ej) = true;
        const Eigen::Index li = leave / K_, lj = leave % K_;
        basic_(li, lj) = false;
        flow_(li, lj) = 0.0;
    }

    const Matrix& c_;
    Eigen::Index L_, K_;
    Matrix flow_;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> basic_;
};

Matrix predictor_matrix(const Matrix& X, const std::vector<ExpertParams>& experts) {
    Matrix B(X.cols(), static_cast<Eigen::Index>(experts.size()));
    for (std::size_t k = 0; k < experts.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = experts[k].beta;
    return X * B;
}

}  // namespace

double TransportPlan::cost(const CostMatrix& c) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (values(i, j) != 0.0) total += values(i, j) * c.values(i, j);
        }
    }
    return total;
}

double kl_gaussian(double mean1, double var1, double mean2, double var2) {
    if (!(var1 > 0.0) || !(var2 > 0.0)) {
        throw std::invalid_argument("Gaussian KL requires positive variances");
    }
    const double u = var1 / var2 - 1.0;
    const double diff = mean2 - mean1;
    const double value = 0.5 * ((u - std::log1p(u)) + diff * diff / var2);
    return std::max(value, 0.0);
}

double kl_bernoulli_logits(double eta1, double eta2) {
    const double p1 = sigmoid(eta1);
    // log p = -softplus(-eta), log(1 - p) = -softplus(eta)
    const double value = p1 * (softplus(-eta2) - softplus(-eta1)) + (1.0 - p1) * (softplus(eta2) - softplus(eta1));
    return std::max(value, 0.0);
}

double kl_gaussian_experts(RowRef x, const ExpertParams& e1, const ExpertParams& e2) {
    check_pair(x, e1, e2, ExpertKind::GaussianRegression);
    return kl_gaussian(x.dot(e1.beta), e1.sigma2, x.dot(e2.beta), e2.sigma2);
}

double kl_logistic_experts(RowRef x, const ExpertParams& e1, const ExpertParams& e2) {
    check_pair(x, e1, e2, ExpertKind::BinaryLogistic);
    return kl_bernoulli_logits(x.dot(e1.beta), x.dot(e2.beta));
}

double expert_cost(RowRef x, const ExpertParams& e1, const ExpertParams& e2, CostKind) {
    return e1.kind == ExpertKind::GaussianRegression ? kl_gaussian_experts(x, e1, e2) : kl_logistic_experts(x, e1, e2);
}

CostMatrix cost_matrix(RowRef x, const std::vector<ExpertParams>& from, const std::vector<ExpertParams>& to,
                       CostKind kind) {
    CostMatrix c{Matrix(static_cast<Eigen::Index>(from.size()), static_cast<Eigen::Index>(to.size()))};
    for (std::size_t l = 0; l < from.size(); ++l) {
        for (std::size_t k = 0; k < to.size(); ++k) {
            c.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = expert_cost(x, from[l], to[k], kind);
        }
    }
    return c;
}

TransportPlan relaxed_optimal_plan(const CostMatrix& cost, const Vector& row_marginals) {
    const Matrix& c = cost.values;
    if (row_marginals.size() != c.rows() || c.cols() < 1) {
        throw std::invalid_argument("row marginals do not match the cost matrix");
    }
    if ((row_marginals.array() < 0.0).any()) {
        throw std::invalid_argument("row marginals must be nonnegative");
    }
    TransportPlan plan{Matrix::Zero(c.rows(), c.cols()), row_marginals};
    for (Eigen::Index l = 0; l < c.rows(); ++l) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < c.cols(); ++k) {
            if (c(l, k) < c(l, best)) best = k;
        }
        plan.values(l, best) = row_marginals(l);
    }
    return plan;
}

OtSolution full_ot_plan(const CostMatrix& cost, const Vector& row_marginals, const Vector& col_marginals) {
    const Matrix& c = cost.values;
    if (row_marginals.size() != c.rows() || col_marginals.size() != c.cols() || c.size() == 0) {
        throw std::invalid_argument("marginals do not match the cost matrix");
    }
    if ((row_marginals.array() < 0.0).any() || (col_marginals.array() < 0.0).any()) {
        throw std::invalid_argument("marginals must be nonnegative");
    }
    if (!c.allFinite()) {
        throw std::invalid_argument("cost matrix must be finite");
    }
    const double row_total = row_marginals.sum();
    const double col_total = col_marginals.sum();
    if (std::abs(row_total - col_total) > 1e-9) {
        throw std::invalid_argument("marginal totals differ: " + std::to_string(row_total) + " vs " +
                                    std::to_string(col_total));
    }
    OtSolution out;
    out.plan.row_marginals = row_marginals;
    if (row_total <= 0.0) {
        out.plan.values = Matrix::Zero(c.rows(), c.cols());
        return out;
    }
    const Vector cols = col_total > 0.0 ? Vector(col_marginals * (row_total / col_total)) : col_marginals;

    TransportationSimplex simplex(c, row_marginals, cols);
    out.pivots = simplex.solve();
    out.plan.values = simplex.flow().cwiseMax(0.0);
    out.cost = out.plan.cost(cost);
    return out;
}

double expected_transport_divergence(const PooledMixture& h, const MoEParams& g, const SupportSample& support,
                                     CostKind kind) {
    support.validate();
    if (h.dim() != g.dim() || static_cast<std::size_t>(support.X.cols()) != g.dim()) {
        throw std::invalid_argument("models and support sample have different dimensions");
    }
    if (h.kind() != g.kind()) {
        throw std::invalid_argument("models have different expert kinds");
    }
    const Matrix& X = support.X;
    const Matrix gates_h = h.gate_matrix(X);
    const Matrix gates_g = gate_matrix(X, g.gating(), g.K());
    std::vector<ExpertParams> h_experts;
    for (std::size_t l = 0; l < h.L(); ++l) h_experts.push_back(h.expert(l));
    const Matrix eta_h = predictor_matrix(X, h_experts);
    const Matrix eta_g = predictor_matrix(X, g.experts());
    const bool gaussian = g.kind() == ExpertKind::GaussianRegression;

    CostMatrix cost{Matrix(static_cast<Eigen::Index>(h.L()), static_cast<Eigen::Index>(g.K()))};
    double total = 0.0;
    for (Eigen::Index s = 0; s < X.rows(); ++s) {
        for (std::size_t l = 0; l < h.L(); ++l) {
            for (std::size_t k = 0; k < g.K(); ++k) {
                const auto li = static_cast<Eigen::Index>(l);
                const auto ki = static_cast<Eigen::Index>(k);
                cost.values(li, ki) = gaussian ? kl_gaussian(eta_h(s, li), h_experts[l].sigma2, eta_g(s, ki), g.expert(k).sigma2)
                                               : kl_bernoulli_logits(eta_h(s, li), eta_g(s, ki));
            }
        }
        total += full_ot_plan(cost, gates_h.row(s).transpose(), gates_g.row(s).transpose()).cost;
    }
    (void)kind;
    return total / static_cast<double>(X.rows());
}

double expected_transport_divergence(const MoEParams& h, const MoEParams& g, const SupportSample& support,
                                     CostKind kind) {
    return expected_transport_divergence(as_pooled(h), g, support, kind);
}

}  // namespace dmoe
