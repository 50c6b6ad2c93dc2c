// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/datagen.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace dmoe;

namespace {

bool is_integer_in(double v, int lo, int hi) { return v == std::round(v) && v >= lo && v <= hi; }

GenConfig config(std::size_t K, std::size_t d, std::size_t N, std::uint64_t seed) {
    GenConfig c;
    c.K = K;
    c.d = d;
    c.N = N;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("truth parameters are integers in range") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto t = generate_truth(config(4, 20, 100, seed));
        CHECK(t.params.K() == 4);
        CHECK(t.params.d() == 20);
        const Matrix& a = t.params.gating().alpha;
        for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(is_integer_in(a.data()[i], -5, 5));
        for (const auto& e : t.params.experts()) {
            for (Eigen::Index j = 0; j < e.beta.size(); ++j) CHECK(is_integer_in(e.beta(j), -5, 5));
            CHECK(is_integer_in(e.sigma2, 1, 5));
        }
        for (Eigen::Index i = 0; i < t.centers.size(); ++i) CHECK(is_integer_in(t.centers.data()[i], -5, 5));
        CHECK(canonical_order(t.params.experts()) == std::vector<std::size_t>{0, 1, 2, 3});
    }
}

TEST_CASE("zero parameter range gives zero parameters and uniform gates") {
    auto c = config(3, 2, 30, 1);
    c.param_low = 0;
    c.param_high = 0;
    const auto t = generate_truth(c);
    CHECK(t.params.gating().alpha.isZero());
    for (const auto& e : t.params.experts()) CHECK(e.beta.isZero());
    Vector x(3);
    x << 1.0, 0.4, -2.0;
    const Vector g = softmax_gating(x, t.params.gating(), 3);
    for (int k = 0; k < 3; ++k) CHECK(g(k) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("same seed gives the same truth and data") {
    const auto c = config(3, 4, 500, 42);
    const auto a = generate_truth(c);
    const auto b = generate_truth(c);
    CHECK(flatten(a.params) == flatten(b.params));
    CHECK(a.centers == b.centers);
    const auto da = generate_dataset(a, c);
    const auto db = generate_dataset(b, c);
    CHECK(da.data.X == db.data.X);
    CHECK(da.data.y == db.data.y);
    CHECK(da.labels == db.labels);
    CHECK(flatten(generate_truth(config(3, 4, 500, 43)).params) != flatten(a.params));
}

TEST_CASE("covariance structure") {
    const Matrix s = covariate_covariance(20);
    for (Eigen::Index i = 0; i < 20; ++i) CHECK(s(i, i) == 1.0);
    CHECK(s(0, 1) == 0.25);
    CHECK(s(1, 0) == 0.25);
    CHECK(s(2, 5) == doctest::Approx(std::pow(0.25, 3)));
    for (std::size_t d = 1; d <= 30; ++d) {
        const Eigen::LLT<Matrix> llt(covariate_covariance(d));
        CHECK(llt.info() == Eigen::Success);
    }
}

TEST_CASE("cluster counts and covariate law") {
    const auto c = config(4, 3, 1003, 5);
    const auto t = generate_truth(c);
    const auto g = generate_dataset(t, c);
    CHECK(g.data.size() == 1003);
    CHECK(g.data.X.col(0).isOnes());
    CHECK(g.labels.size() == 1003);
    for (int l : g.labels) CHECK((l >= 0 && l < 4));

    // Rows are laid out cluster by cluster: 251, 251, 251, 250.
    const Eigen::Index sizes[] = {251, 251, 251, 250};
    Eigen::Index start = 0;
    for (int k = 0; k < 4; ++k) {
        const Matrix block = g.data.X.block(start, 1, sizes[k], 3);
        const Vector mean = block.colwise().mean().transpose();
        CHECK((mean - t.centers.row(k).transpose()).cwiseAbs().maxCoeff() < 0.3);
        start += sizes[k];
    }

    SUBCASE("one cluster's empirical covariance") {
        const auto c1 = config(1, 4, 100000, 6);
        const auto t1 = generate_truth(c1);
        const auto g1 = generate_dataset(t1, c1);
        const Matrix Z = g1.data.X.rightCols(4).rowwise() - t1.centers.row(0);
        const Matrix emp = Z.transpose() * Z / 100000.0;
        CHECK((emp - covariate_covariance(4)).cwiseAbs().maxCoeff() < 0.02);
    }
}

TEST_CASE("split") {
    const auto c = config(2, 2, 100000, 7);
    const auto g = generate_dataset(generate_truth(c), c);
    const auto s = split(g.data, 0.2, 9);
    CHECK(s.test.size() == 20000);
    CHECK(s.train.size() == 80000);

    std::vector<std::size_t> all = s.train_rows;
    all.insert(all.end(), s.test_rows.begin(), s.test_rows.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    CHECK(s.train.X.row(0) == g.data.X.row(static_cast<Eigen::Index>(s.train_rows[0])));

    const auto again = split(g.data, 0.2, 9);
    CHECK(again.train_rows == s.train_rows);
    CHECK(split(g.data, 0.2, 10).train_rows != s.train_rows);

    const auto small = split(g.data.subset({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.3, 1);
    CHECK(small.train.size() == 7);
    CHECK_THROWS_AS(split(g.data, 1.0, 1), std::invalid_argument);
}

TEST_CASE("latent labels follow the gates") {
    auto c = config(2, 1, 60000, 11);
    c.param_low = -1;
    c.param_high = 1;
    const auto t = generate_truth(c);
    const auto g = generate_dataset(t, c);
    // Coarse strata on the single covariate.
    for (double lo : {-6.0, -1.0, 0.0, 1.0}) {
        const double hi = lo + 1.0;
        double count = 0, hits = 0, expected = 0;
        for (Eigen::Index i = 0; i < g.data.X.rows(); ++i) {
            const double x = g.data.X(i, 1);
            if (x < lo || x >= hi) continue;
            count += 1;
            hits += g.labels[static_cast<std::size_t>(i)] == 0;
            expected += softmax_gating(g.data.X.row(i).transpose(), t.params.gating(), 2)(0);
        }
        if (count < 2000) continue;
        CHECK(std::abs(hits - expected) / count < 0.03);
    }
}

TEST_CASE("generator validation") {
    auto c = config(3, 2, 2, 1);
    CHECK_THROWS_AS(generate_dataset(generate_truth(c), c), std::invalid_argument);
    c.N = 30;
    c.test_fraction = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
