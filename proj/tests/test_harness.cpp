// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/datagen.hpp"
#include "dmoe/harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace dmoe;

namespace {

Dataset numbered(std::size_t N, std::size_t d) {
    Dataset data{Matrix(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d + 1)), Vector(static_cast<Eigen::Index>(N))};
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
        data.X(i, 0) = 1.0;
        for (Eigen::Index j = 1; j < data.X.cols(); ++j) data.X(i, j) = static_cast<double>(i) + 0.001 * static_cast<double>(j);
        data.y(i) = -static_cast<double>(i);
    }
    return data;
}

struct Problem {
    GeneratedTruth truth;
    SplitResult parts;
    std::vector<int> test_labels;
};

Problem problem(std::size_t K, std::size_t d, std::size_t N, std::uint64_t seed) {
    GenConfig gen;
    gen.K = K;
    gen.d = d;
    gen.N = N;
    gen.seed = seed;
    Problem p{generate_truth(gen), {}, {}};
    const auto g = generate_dataset(p.truth, gen);
    p.parts = split(g.data, 0.2, seed + 7);
    for (std::size_t r : p.parts.test_rows) p.test_labels.push_back(g.labels[r]);
    return p;
}

}  // namespace

TEST_CASE("partition") {
    const auto data = numbered(10, 2);
    const auto one = partition(data, 1, 3);
    REQUIRE(one.size() == 1);
    CHECK(one[0].data.X == data.X);
    CHECK(one[0].lambda == 1.0);

    const auto three = partition(data, 3, 3);
    std::vector<std::size_t> sizes;
    double total = 0.0;
    for (const auto& s : three) {
        sizes.push_back(s.data.size());
        total += s.lambda;
    }
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{3, 3, 4});
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));

    SUBCASE("shards are a multiset partition of the rows") {
        const auto big = numbered(1000, 3);
        const auto shards = partition(big, 7, 11);
        std::vector<double> seen, all(1000);
        for (const auto& s : shards) {
            for (Eigen::Index i = 0; i < s.data.X.rows(); ++i) {
                seen.push_back(s.data.y(i));
                CHECK(s.data.X.row(i) == big.X.row(static_cast<Eigen::Index>(s.rows[static_cast<std::size_t>(i)])));
            }
        }
        for (std::size_t i = 0; i < 1000; ++i) all[i] = -static_cast<double>(i);
        std::sort(seen.begin(), seen.end());
        std::sort(all.begin(), all.end());
        CHECK(seen == all);
    }
    CHECK_THROWS_AS(partition(data, 11, 1), std::invalid_argument);
    CHECK_THROWS_AS(partition(data, 0, 1), std::invalid_argument);
}

TEST_CASE("support sampling") {
    const auto data = numbered(40, 2);
    const auto all = draw_support(data, 40, 5);
    std::vector<double> a, b;
    for (Eigen::Index i = 0; i < 40; ++i) {
        a.push_back(all.X(i, 1));
        b.push_back(data.X(i, 1));
    }
    std::sort(a.begin(), a.end());
    CHECK(a == b);

    const auto single = draw_support(data, 1, 5);
    CHECK(std::find(b.begin(), b.end(), single.X(0, 1)) != b.end());

    GenConfig gen;
    gen.K = 2;
    gen.d = 3;
    gen.N = 50000;
    gen.seed = 8;
    const auto g = generate_dataset(generate_truth(gen), gen);
    const auto sub = draw_support(g.data, 5000, 9);
    for (Eigen::Index j = 1; j < 4; ++j) {
        const auto col = g.data.X.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / (50000 - 1));
        CHECK(std::abs(sub.X.col(j).mean() - mean) <= 3.0 * sd / std::sqrt(5000.0));
    }
    CHECK_THROWS_AS(draw_support(data, 41, 1), std::invalid_argument);
}

TEST_CASE("communication cost") {
    const auto c = communication_cost(4, 4, 20, 250, 1000);
    CHECK(c.parameters_sent == 604);
    CHECK(c.support_sent == 250 * 21);
    CHECK(c.scalars(EstimatorKind::Reduction) == 604 + 250 * 21);
    CHECK(c.scalars(EstimatorKind::Middle) == 604 + 250 * 21);
    CHECK(c.scalars(EstimatorKind::WeightedAverage) == 604);
    CHECK(c.scalars(EstimatorKind::Global) == 1000 * 22);
}

TEST_CASE("single shard equivalence") {
    const auto p = problem(2, 2, 3000, 1);
    RunConfig cfg;
    cfg.M = 1;
    cfg.K = 2;
    cfg.seed = 3;
    cfg.em.n_init = 2;
    const auto res = run_experiment(p.parts.train, p.parts.test, &p.truth.params, &p.test_labels, cfg);
    REQUIRE(res.outcomes.size() == 4);
    REQUIRE(res.locals.size() == 1);
    const Vector global = flatten(*res.outcomes[0].model);
    CHECK((flatten(res.locals[0].params) - global).cwiseAbs().maxCoeff() <= 1e-8);
    for (const auto& o : res.outcomes) {
        REQUIRE(o.model.has_value());
        CHECK((flatten(*o.model) - global).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(std::abs(*o.metrics.mse - *res.outcomes[0].metrics.mse) <= 1e-8);
    }
}

TEST_CASE("timing and communication fields") {
    const auto p = problem(2, 2, 4000, 2);
    RunConfig cfg;
    cfg.M = 4;
    cfg.K = 2;
    cfg.seed = 5;
    cfg.em.n_init = 2;
    const auto res = run_experiment(p.parts.train, p.parts.test, &p.truth.params, &p.test_labels, cfg);
    const auto& t = res.timing;
    CHECK(t.max_local_seconds == *std::max_element(t.local_seconds.begin(), t.local_seconds.end()));
    for (const auto& o : res.outcomes) {
        CHECK(o.error.empty());
        CHECK(o.metrics.comm_scalars == res.comm.scalars(o.kind));
        switch (o.kind) {
            case EstimatorKind::Global: CHECK(o.metrics.time_s == t.global_seconds); break;
            case EstimatorKind::Reduction:
                CHECK(o.metrics.time_s == t.max_local_seconds + t.reduction_aggregation_seconds);
                CHECK_FALSE(o.objective_trace.empty());
                break;
            case EstimatorKind::Middle: CHECK(o.metrics.time_s == t.max_local_seconds + t.middle_aggregation_seconds); break;
            case EstimatorKind::WeightedAverage:
                CHECK(o.metrics.time_s == t.max_local_seconds + t.average_aggregation_seconds);
                break;
        }
        CHECK(*o.metrics.divergence >= 0.0);
        CHECK(*o.metrics.ari <= 1.0);
        CHECK(*o.metrics.rpe >= 0.0);
    }
    CHECK(res.comm.support_sent == (p.parts.train.size() / 4) * 3);
}

TEST_CASE("results do not depend on the worker count or on repetition") {
    const auto p = problem(2, 2, 3000, 3);
    RunConfig cfg;
    cfg.M = 3;
    cfg.K = 2;
    cfg.seed = 6;
    cfg.em.n_init = 2;
    cfg.workers = 1;
    const auto a = run_experiment(p.parts.train, p.parts.test, &p.truth.params, &p.test_labels, cfg);
    cfg.workers = 3;
    const auto b = run_experiment(p.parts.train, p.parts.test, &p.truth.params, &p.test_labels, cfg);
    const auto c = run_experiment(p.parts.train, p.parts.test, &p.truth.params, &p.test_labels, cfg);
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        CHECK((flatten(*a.outcomes[i].model) - flatten(*b.outcomes[i].model)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(std::abs(*a.outcomes[i].metrics.loglik - *b.outcomes[i].metrics.loglik) <= 1e-10);
        CHECK(flatten(*b.outcomes[i].model) == flatten(*c.outcomes[i].model));
        CHECK(*b.outcomes[i].metrics.loglik == *c.outcomes[i].metrics.loglik);
        CHECK(*b.outcomes[i].metrics.divergence == *c.outcomes[i].metrics.divergence);
    }
}

TEST_CASE("a failed estimator does not stop the others") {
    const auto p = problem(3, 2, 50, 4);
    RunConfig cfg;
    cfg.M = 4;
    cfg.K = 3;  // ten rows per shard are too few for three experts
    cfg.seed = 1;
    cfg.em.n_init = 1;
    const auto res = run_experiment(p.parts.train, p.parts.test, nullptr, nullptr, cfg);
    CHECK_FALSE(res.local_error.empty());
    for (const auto& o : res.outcomes) {
        if (o.kind == EstimatorKind::Global) {
            CHECK(o.error.empty() == o.model.has_value());
        } else {
            CHECK_FALSE(o.error.empty());
        }
    }
}
