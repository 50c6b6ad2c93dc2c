// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/metrics.hpp"
#include "dmoe/transport.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dmoe;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x(i++) = e;
    return x;
}

MoEParams pair_model(double a0, double a1, const Vector& b0, const Vector& b1, double v0, double v1) {
    GatingParams g;
    g.alpha = Matrix(1, 2);
    g.alpha << a0, a1;
    return MoEParams(g, {ExpertParams::gaussian(b0, v0), ExpertParams::gaussian(b1, v1)});
}

SupportSample support_of(int S, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    SupportSample s;
    s.X.resize(S, 2);
    for (int i = 0; i < S; ++i) {
        s.X(i, 0) = 1.0;
        s.X(i, 1) = z(rng);
    }
    return s;
}

}  // namespace

TEST_CASE("parameter MSE") {
    const auto t = pair_model(0.5, -1.0, vec({-1, 2}), vec({3, 0}), 1.0, 2.0);
    CHECK(param_mse(t, t) == 0.0);

    // 2 alpha + 4 beta + 2 sigma2 entries.
    const auto shifted = pair_model(0.5, -1.0, vec({-1, 2}), vec({3, 2}), 1.0, 2.0);
    CHECK(param_mse(shifted, t) == 4.0 / 8.0);

    const auto e = pair_model(0.25, -0.5, vec({-1.5, 2.5}), vec({2.0, 0.5}), 1.5, 1.0);
    const double oracle_sum = (0.25 * 0.25 + 0.5 * 0.5) + (0.25 + 0.25) + (1.0 + 0.25) + (0.25 + 1.0);
    CHECK(param_mse(e, t) == doctest::Approx(oracle_sum / 8.0).epsilon(1e-15));

    SUBCASE("canonical ordering is applied to both") {
        const auto relabeled = permute_experts(e, {1, 0});
        CHECK(param_mse(relabeled, t) == doctest::Approx(param_mse(e, t)).epsilon(1e-14));
        CHECK(param_mse(canonicalize(e), canonicalize(t)) == param_mse(e, t));
        CHECK(param_mse(e, t, true) <= param_mse(e, t));
    }
    GatingParams g3;
    g3.alpha = Matrix::Zero(2, 2);
    const MoEParams three(g3, std::vector<ExpertParams>(3, ExpertParams::gaussian(vec({0, 0}), 1.0)));
    CHECK_THROWS_AS(param_mse(three, t), std::invalid_argument);
}

TEST_CASE("relative prediction error") {
    CHECK(rpe(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
    CHECK(rpe(vec({1, -2, 3}), vec({0, 0, 0})) == 1.0);
    CHECK(rpe(vec({1, 2}), vec({0, 2})) == doctest::Approx(0.2).epsilon(1e-15));
    const Vector y = vec({0.3, -1.7, 2.2, 5.0}), yh = vec({0.1, -1.0, 2.0, 4.0});
    for (double c : {-3.0, 0.01, 1e6}) CHECK(std::abs(rpe(c * y, c * yh) - rpe(y, yh)) <= 1e-12);
    CHECK_THROWS_AS(rpe(vec({0, 0}), vec({1, 1})), std::invalid_argument);
}

TEST_CASE("adjusted Rand index") {
    const std::vector<int> a{0, 0, 1, 1, 1}, b{0, 0, 0, 1, 1};
    CHECK(ari(a, a) == 1.0);
    CHECK(ari(a, {5, 5, 2, 2, 2}) == 1.0);
    CHECK(ari(a, b) == doctest::Approx(oracle::ari_pairs(a, b)).epsilon(1e-15));

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> lab(0, 3);
    for (int t = 0; t < 30; ++t) {
        std::vector<int> x(60), y(60);
        for (int i = 0; i < 60; ++i) {
            x[static_cast<std::size_t>(i)] = lab(rng);
            y[static_cast<std::size_t>(i)] = (i % 3 == 0) ? lab(rng) : x[static_cast<std::size_t>(i)];
        }
        const double v = ari(x, y);
        CHECK(std::abs(v - oracle::ari_pairs(x, y)) < 1e-12);
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
        std::vector<int> relabeled(60);
        for (int i = 0; i < 60; ++i) relabeled[static_cast<std::size_t>(i)] = 3 - y[static_cast<std::size_t>(i)];
        CHECK(std::abs(ari(x, relabeled) - v) < 1e-12);
    }
}

TEST_CASE("divergence to the truth") {
    const auto t = pair_model(0.5, -1.0, vec({-1, 2}), vec({3, 0}), 1.0, 2.0);
    const auto support = support_of(40, 2);
    CHECK(divergence_to_truth(t, t, support) == doctest::Approx(0.0).epsilon(1e-15));

    GatingParams none;
    none.alpha.resize(0, 2);
    const MoEParams one_a(none, {ExpertParams::gaussian(vec({0.5, 1.0}), 1.0)});
    const MoEParams one_b(none, {ExpertParams::gaussian(vec({-0.5, 2.0}), 3.0)});
    double loop = 0.0;
    for (int s = 0; s < 40; ++s) {
        const double x = support.X(s, 1);
        loop += oracle::kl_gaussian_quadrature(0.5 + x, 1.0, -0.5 + 2.0 * x, 3.0);
    }
    CHECK(std::abs(divergence_to_truth(one_b, one_a, support) - loop / 40.0) < 1e-9);

    double previous = 0.0;
    for (double mag : {0.1, 0.3, 1.0, 3.0, 10.0}) {
        const auto noisy = pair_model(0.5, -1.0, vec({-1 + mag, 2 + mag}), vec({3, 0}), 1.0, 2.0);
        const double d = divergence_to_truth(noisy, t, support);
        CHECK(d > previous);
        previous = d;
    }
}

TEST_CASE("predictions and labels") {
    const auto t = pair_model(0.0, 3.0, vec({-1, 0}), vec({1, 0}), 1.0, 1.0);
    Matrix X(3, 2);
    X << 1, -2, 1, 0, 1, 2;
    const Vector p = predict_all(X, t);
    for (int i = 0; i < 3; ++i) CHECK(p(i) == doctest::Approx(predict(X.row(i).transpose(), t).value).epsilon(1e-15));
    CHECK(map_labels(X, t) == std::vector<int>{1, 0, 0});
    CHECK(rmse(vec({1, 3}), vec({2, 2})) == 1.0);
    CHECK(scatter_index(vec({1, 3}), vec({2, 2})) == 0.5);
}

TEST_CASE("evaluate model") {
    const auto t = pair_model(0.5, -1.0, vec({-1, 2}), vec({3, 0}), 1.0, 2.0);
    Dataset test{Matrix(50, 2), Vector(50)};
    test.X.col(0).setOnes();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int i = 0; i < 50; ++i) test.X(i, 1) = z(rng);
    const auto draws = sample_responses(test.X, t, 4);
    test.y = draws.y;
    const auto support = support_of(30, 5);

    const auto full = evaluate_model(t, test, &t, &draws.labels, &support);
    CHECK(*full.mse == 0.0);
    CHECK(*full.divergence <= 1e-10);
    CHECK(*full.loglik == doctest::Approx(log_likelihood(test, t)));
    CHECK(*full.rpe == doctest::Approx(rpe(test.y, predict_all(test.X, t))));
    CHECK(*full.ari == doctest::Approx(ari(map_labels(test.X, t), draws.labels)));

    const auto bare = evaluate_model(t, test, nullptr, nullptr, nullptr);
    CHECK_FALSE(bare.mse.has_value());
    CHECK_FALSE(bare.divergence.has_value());
    CHECK_FALSE(bare.ari.has_value());
    CHECK(bare.loglik.has_value());
}
