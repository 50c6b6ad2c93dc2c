// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/mm.hpp"

#include "dmoe/errors.hpp"
#include "dmoe/numeric.hpp"
#include "dmoe/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dmoe {

namespace {

constexpr double kMinVariance = 1e-10;
constexpr double kMinReceived = 1e-12;
constexpr double kProbClip = 1e-12;

Matrix target_predictor(const Matrix& X, const std::vector<ExpertParams>& experts) {
    Matrix B(X.cols(), static_cast<Eigen::Index>(experts.size()));
    for (std::size_t k = 0; k < experts.size(); ++k) {
        if (experts[k].beta.size() != X.cols()) {
            throw std::invalid_argument("expert dimension does not match the support sample");
        }
        B.col(static_cast<Eigen::Index>(k)) = experts[k].beta;
    }
    return X * B;
}

double pair_cost(const PooledOnSupport& ps, Eigen::Index s, Eigen::Index l, double eta_k, double sigma2_k) {
    if (ps.kind == ExpertKind::GaussianRegression) {
        return kl_gaussian(ps.predictor(s, l), ps.sigma2(l), eta_k, sigma2_k);
    }
    return kl_bernoulli_logits(ps.predictor(s, l), eta_k);
}

void check_kind(const PooledOnSupport& ps, const std::vector<ExpertParams>& experts) {
    for (const auto& e : experts) {
        if (e.kind != ps.kind) throw std::invalid_argument("target experts do not match the pooled expert kind");
    }
}

struct PlanWithObjective {
    PlanTensor plan;
    double objective = 0.0;
};

PlanWithObjective plan_update_cached(const PooledOnSupport& ps, const Matrix& X,
                                     const std::vector<ExpertParams>& experts) {
    check_kind(ps, experts);
    const Matrix eta = target_predictor(X, experts);
    const Eigen::Index S = X.rows();
    const Eigen::Index L = ps.gates.cols();
    const auto K = static_cast<Eigen::Index>(experts.size());
    PlanWithObjective out;
    out.plan.K = experts.size();
    out.plan.mass = ps.gates;
    out.plan.target.resize(S, L);
    double total = 0.0;
    for (Eigen::Index s = 0; s < S; ++s) {
        double row_total = 0.0;
        for (Eigen::Index l = 0; l < L; ++l) {
            Eigen::Index best = 0;
            double best_cost = std::numeric_limits<double>::infinity();
            for (Eigen::Index k = 0; k < K; ++k) {
                const double c = pair_cost(ps, s, l, eta(s, k), experts[static_cast<std::size_t>(k)].sigma2);
                if (c < best_cost) {
                    best_cost = c;
                    best = k;
                }
            }
            out.plan.target(s, l) = static_cast<int>(best);
            row_total += ps.gates(s, l) * best_cost;
        }
        total += row_total;
    }
    out.objective = total / static_cast<double>(S);
    return out;
}

double majorizer_cached(const PooledOnSupport& ps, const Matrix& X, const std::vector<ExpertParams>& experts,
                        const PlanTensor& plan) {
    check_kind(ps, experts);
    const Matrix eta = target_predictor(X, experts);
    double total = 0.0;
    for (Eigen::Index s = 0; s < X.rows(); ++s) {
        double row_total = 0.0;
        for (Eigen::Index l = 0; l < plan.mass.cols(); ++l) {
            const double m = plan.mass(s, l);
            if (m == 0.0) continue;
            const int k = plan.target(s, l);
            row_total += m * pair_cost(ps, s, l, eta(s, k), experts[static_cast<std::size_t>(k)].sigma2);
        }
        total += row_total;
    }
    return total / static_cast<double>(X.rows());
}

void check_plan(const PlanTensor& plan, const PooledOnSupport& ps, const Matrix& X) {
    if (plan.mass.rows() != X.rows() || plan.mass.cols() != ps.gates.cols() || plan.target.rows() != X.rows() ||
        plan.target.cols() != ps.gates.cols()) {
        throw std::invalid_argument("plan does not match the pooled mixture and support sample");
    }
    if (plan.K < 1) throw std::invalid_argument("plan has no target experts");
}

/// Per-expert sufficient statistics of the plan: received mass D_k(s) and
/// received-mass-weighted sums of pooled quantities.
struct Received {
    Vector mass;  // D_k diagonal
    Vector sum;   // sum_l P_lk(x_s) * q_l(x_s)
};

std::vector<Received> accumulate(const PlanTensor& plan, const Matrix& quantity) {
    const Eigen::Index S = plan.mass.rows();
    std::vector<Received> acc(plan.K, Received{Vector::Zero(S), Vector::Zero(S)});
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index l = 0; l < plan.mass.cols(); ++l) {
            const double m = plan.mass(s, l);
            if (m == 0.0) continue;
            auto& r = acc[static_cast<std::size_t>(plan.target(s, l))];
            r.mass(s) += m;
            r.sum(s) += m * quantity(s, l);
        }
    }
    return acc;
}

Vector ridge_solve(const Matrix& X, const Vector& w, const Vector& rhs_weights, double ridge) {
    const Matrix Xw = X.array().colwise() * w.array();
    const Matrix A = Xw.transpose() * X;
    const Vector b = X.transpose() * rhs_weights;
    return solve_spd(A, b, ridge);
}

std::vector<ExpertParams> gaussian_update(const PooledOnSupport& ps, const Matrix& X, const PlanTensor& plan,
                                          double ridge, const std::vector<ExpertParams>* fallback,
                                          std::vector<std::size_t>& empty) {
    const auto acc = accumulate(plan, ps.predictor);
    std::vector<ExpertParams> experts;
    for (std::size_t k = 0; k < plan.K; ++k) {
        const double trace = acc[k].mass.sum();
        if (!(trace >= kMinReceived)) {
            empty.push_back(k);
            experts.push_back(fallback ? (*fallback)[k] : ExpertParams::gaussian(Vector::Zero(X.cols()), 1.0));
            continue;
        }
        Vector beta = ridge_solve(X, acc[k].mass, acc[k].sum, ridge);
        const Vector mu = X * beta;
        double num = 0.0;
        for (Eigen::Index s = 0; s < X.rows(); ++s) {
            for (Eigen::Index l = 0; l < plan.mass.cols(); ++l) {
                const double m = plan.mass(s, l);
                if (m == 0.0 || plan.target(s, l) != static_cast<int>(k)) continue;
                const double diff = mu(s) - ps.predictor(s, l);
                num += m * (ps.sigma2(l) + diff * diff);
            }
        }
        experts.push_back(ExpertParams::gaussian(std::move(beta), std::max(num / trace, kMinVariance)));
    }
    return experts;
}

std::vector<Received> logistic_targets(const PooledOnSupport& ps, const PlanTensor& plan) {
    Matrix probs(ps.predictor.rows(), ps.predictor.cols());
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
        for (Eigen::Index l = 0; l < probs.cols(); ++l) probs(s, l) = sigmoid(ps.predictor(s, l));
    }
    return accumulate(plan, probs);
}

Vector logistic_closed_form(const Matrix& X, const Received& r, double ridge) {
    Vector w(X.rows());
    Vector z = Vector::Zero(X.rows());
    for (Eigen::Index s = 0; s < X.rows(); ++s) {
        w(s) = r.mass(s) > 0.0 ? 1.0 : 0.0;
        if (r.mass(s) > 0.0) {
            const double v = std::clamp(r.sum(s) / r.mass(s), kProbClip, 1.0 - kProbClip);
            z(s) = std::log(v) - std::log1p(-v);
        }
    }
    return ridge_solve(X, w, z, ridge);
}

std::vector<ExpertParams> logistic_update(const PooledOnSupport& ps, const Matrix& X, const PlanTensor& plan,
                                          double ridge, bool refine, const std::vector<ExpertParams>* fallback,
                                          std::vector<std::size_t>& empty) {
    const auto acc = logistic_targets(ps, plan);
    std::vector<ExpertParams> experts;
    for (std::size_t k = 0; k < plan.K; ++k) {
        if (!(acc[k].mass.sum() >= kMinReceived)) {
            empty.push_back(k);
            experts.push_back(fallback ? (*fallback)[k] : ExpertParams::logistic(Vector::Zero(X.cols())));
            continue;
        }
        Vector beta = logistic_closed_form(X, acc[k], ridge);
        if (refine) {
            Vector v = Vector::Zero(X.rows());
            for (Eigen::Index s = 0; s < X.rows(); ++s) {
                if (acc[k].mass(s) > 0.0) v(s) = std::clamp(acc[k].sum(s) / acc[k].mass(s), 0.0, 1.0);
            }
            beta = fit_weighted_logistic(X, v, acc[k].mass, beta);
        }
        experts.push_back(ExpertParams::logistic(std::move(beta)));
    }
    return experts;
}

void throw_if_empty(const std::vector<std::size_t>& empty) {
    if (!empty.empty()) {
        throw EmptyComponentError(empty.front(),
                                  "expert " + std::to_string(empty.front()) + " receives no transport mass");
    }
}

std::vector<ExpertParams> update_cached(const PooledOnSupport& ps, const Matrix& X, const PlanTensor& plan,
                                        double ridge, const std::vector<ExpertParams>& current,
                                        std::vector<std::size_t>& empty) {
    if (ps.kind == ExpertKind::GaussianRegression) return gaussian_update(ps, X, plan, ridge, &current, empty);
    return logistic_update(ps, X, plan, ridge, true, &current, empty);
}

MoEParams random_k_of_pooled(const PooledMixture& pooled, const PooledOnSupport& ps, std::size_t K,
                             std::uint64_t seed) {
    Vector weight = ps.gates.colwise().mean().transpose();
    std::vector<bool> taken(pooled.L(), false);
    Rng rng = make_rng(derive_seed(seed, 0));
    std::vector<ExpertParams> experts;
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t pick = 0;
        if (weight.sum() > 0.0) {
            std::discrete_distribution<std::size_t> draw(weight.data(), weight.data() + weight.size());
            pick = draw(rng);
        } else {
            while (taken[pick]) ++pick;
        }
        taken[pick] = true;
        weight(static_cast<Eigen::Index>(pick)) = 0.0;
        experts.push_back(pooled.expert(pick));
    }
    GatingParams gating;
    gating.alpha = Matrix::Zero(static_cast<Eigen::Index>(K - 1), static_cast<Eigen::Index>(pooled.dim()));
    return MoEParams(std::move(gating), std::move(experts));
}

}  // namespace

void MmConfig::validate() const {
    if (max_iter < 1) throw std::invalid_argument("MmConfig.max_iter must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("MmConfig.tol must be > 0");
    if (!(ridge >= 0.0)) throw std::invalid_argument("MmConfig.ridge must be >= 0");
}

TransportPlan PlanTensor::at(std::size_t s) const {
    const auto si = static_cast<Eigen::Index>(s);
    TransportPlan p{Matrix::Zero(mass.cols(), static_cast<Eigen::Index>(K)), mass.row(si).transpose()};
    for (Eigen::Index l = 0; l < mass.cols(); ++l) p.values(l, target(si, l)) = mass(si, l);
    return p;
}

Matrix PlanTensor::column_sums() const {
    Matrix a = Matrix::Zero(mass.rows(), static_cast<Eigen::Index>(K));
    for (Eigen::Index s = 0; s < mass.rows(); ++s) {
        for (Eigen::Index l = 0; l < mass.cols(); ++l) a(s, target(s, l)) += mass(s, l);
    }
    return a;
}

Vector PlanTensor::received(std::size_t k) const {
    Vector d = Vector::Zero(mass.rows());
    for (Eigen::Index s = 0; s < mass.rows(); ++s) {
        for (Eigen::Index l = 0; l < mass.cols(); ++l) {
            if (target(s, l) == static_cast<int>(k)) d(s) += mass(s, l);
        }
    }
    return d;
}

Matrix PlanTensor::sent(std::size_t k) const {
    Matrix w = Matrix::Zero(mass.cols(), mass.rows());
    for (Eigen::Index s = 0; s < mass.rows(); ++s) {
        for (Eigen::Index l = 0; l < mass.cols(); ++l) {
            if (target(s, l) == static_cast<int>(k)) w(l, s) = mass(s, l);
        }
    }
    return w;
}

PooledOnSupport evaluate_pooled(const PooledMixture& pooled, const SupportSample& support) {
    support.validate();
    if (static_cast<std::size_t>(support.X.cols()) != pooled.dim()) {
        throw std::invalid_argument("support sample dimension does not match the pooled mixture");
    }
    PooledOnSupport ps;
    ps.kind = pooled.kind();
    ps.gates = pooled.gate_matrix(support.X);
    ps.predictor = support.X * pooled.beta_matrix();
    ps.sigma2 = pooled.sigma2_vector();
    return ps;
}

PlanTensor plan_update(const PooledMixture& pooled, const MoEParams& g, const SupportSample& support, CostKind) {
    return plan_update_cached(evaluate_pooled(pooled, support), support.X, g.experts()).plan;
}

double majorizer_value(const PooledMixture& pooled, const std::vector<ExpertParams>& experts, const PlanTensor& plan,
                       const SupportSample& support, CostKind) {
    const auto ps = evaluate_pooled(pooled, support);
    check_plan(plan, ps, support.X);
    if (experts.size() != plan.K) throw std::invalid_argument("expert count does not match the plan");
    return majorizer_cached(ps, support.X, experts, plan);
}

double relaxed_objective(const PooledMixture& pooled, const MoEParams& g, const SupportSample& support, CostKind) {
    return plan_update_cached(evaluate_pooled(pooled, support), support.X, g.experts()).objective;
}

std::vector<ExpertParams> update_gaussian_experts(const PooledMixture& pooled, const PlanTensor& plan,
                                                  const SupportSample& support, double ridge) {
    const auto ps = evaluate_pooled(pooled, support);
    check_plan(plan, ps, support.X);
    if (ps.kind != ExpertKind::GaussianRegression) throw std::invalid_argument("pooled experts are not Gaussian");
    std::vector<std::size_t> empty;
    auto experts = gaussian_update(ps, support.X, plan, ridge, nullptr, empty);
    throw_if_empty(empty);
    return experts;
}

std::vector<ExpertParams> logistic_experts_closed_form(const PooledMixture& pooled, const PlanTensor& plan,
                                                       const SupportSample& support, double ridge) {
    const auto ps = evaluate_pooled(pooled, support);
    check_plan(plan, ps, support.X);
    if (ps.kind != ExpertKind::BinaryLogistic) throw std::invalid_argument("pooled experts are not logistic");
    std::vector<std::size_t> empty;
    auto experts = logistic_update(ps, support.X, plan, ridge, false, nullptr, empty);
    throw_if_empty(empty);
    return experts;
}

std::vector<ExpertParams> update_logistic_experts(const PooledMixture& pooled, const PlanTensor& plan,
                                                  const SupportSample& support, double ridge) {
    const auto ps = evaluate_pooled(pooled, support);
    check_plan(plan, ps, support.X);
    if (ps.kind != ExpertKind::BinaryLogistic) throw std::invalid_argument("pooled experts are not logistic");
    std::vector<std::size_t> empty;
    auto experts = logistic_update(ps, support.X, plan, ridge, true, nullptr, empty);
    throw_if_empty(empty);
    return experts;
}

GatingParams gating_refit(const PlanTensor& plan, const SupportSample& support, const GatingParams& init,
                          const SoftmaxFitOptions& options) {
    support.validate();
    if (plan.mass.rows() != support.X.rows()) throw std::invalid_argument("plan does not match the support sample");
    return fit_softmax_regression(support.X, plan.column_sums(), init, options).gating;
}

GatingParams gating_refit(const PlanTensor& plan, const SupportSample& support) {
    GatingParams init;
    init.alpha = Matrix::Zero(static_cast<Eigen::Index>(plan.K) - 1, support.X.cols());
    return gating_refit(plan, support, init);
}

MmResult mm_reduce(const PooledMixture& pooled, std::size_t K, const SupportSample& support, const MmConfig& config) {
    config.validate();
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (pooled.L() < K) throw std::invalid_argument("pooled mixture has fewer than K components");
    const auto ps = evaluate_pooled(pooled, support);
    const Matrix& X = support.X;

    MmResult out;
    MoEParams g;
    PlanWithObjective current;
    if (config.init == MmInit::BestLocal && pooled.local_K() == K) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < pooled.M(); ++m) {
            auto cand = plan_update_cached(ps, X, pooled.locals()[m].params.experts());
            if (cand.objective < best) {
                best = cand.objective;
                current = std::move(cand);
                out.init_local = m;
            }
        }
        g = pooled.locals()[out.init_local].params;
    } else {
        g = random_k_of_pooled(pooled, ps, K, config.seed);
        current = plan_update_cached(ps, X, g.experts());
    }
    out.objective_trace.push_back(current.objective);

    std::vector<ExpertParams> experts = g.experts();
    std::vector<bool> used_as_seed(pooled.L(), false);
    const Vector avg_gate = ps.gates.colwise().mean().transpose();
    for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
        const double prev = current.objective;
        if (prev <= 0.0) break;
        std::vector<std::size_t> empty;
        experts = update_cached(ps, X, current.plan, config.ridge, experts, empty);
        for (std::size_t k : empty) {
            if (++out.reseeds > K) {
                throw AggregationFailureError("more than " + std::to_string(K) + " empty-expert reseeds");
            }
            Eigen::Index pick = -1;
            for (Eigen::Index l = 0; l < avg_gate.size(); ++l) {
                if (used_as_seed[static_cast<std::size_t>(l)]) continue;
                if (pick < 0 || avg_gate(l) > avg_gate(pick)) pick = l;
            }
            if (pick < 0) throw AggregationFailureError("no pooled component left to reseed an empty expert");
            used_as_seed[static_cast<std::size_t>(pick)] = true;
            experts[k] = pooled.expert(static_cast<std::size_t>(pick));
        }
        current = plan_update_cached(ps, X, experts);
        out.objective_trace.push_back(current.objective);
        out.iterations = iter;
        if (prev - current.objective <= config.tol * prev && empty.empty()) break;
    }

    g = MoEParams(g.gating(), std::move(experts));
    const auto perm = canonical_order(g.experts());
    std::vector<int> inverse(K);
    for (std::size_t k = 0; k < K; ++k) inverse[perm[k]] = static_cast<int>(k);
    PlanTensor plan = std::move(current.plan);
    for (Eigen::Index s = 0; s < plan.target.rows(); ++s) {
        for (Eigen::Index l = 0; l < plan.target.cols(); ++l) {
            plan.target(s, l) = inverse[static_cast<std::size_t>(plan.target(s, l))];
        }
    }
    const MoEParams ordered = permute_experts(g, perm);
    GatingParams gating = gating_refit(plan, support, ordered.gating());
    out.model = MoEParams(std::move(gating), ordered.experts());
    out.plan_gates = plan.column_sums();
    return out;
}

}  // namespace dmoe
