// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/harness.hpp"

#include "dmoe/random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace dmoe {

namespace {

enum Stream : std::uint64_t {
    kPartitionStream = 11,
    kSupportStream = 12,
    kEvalSupportStream = 13,
    kMmStream = 14,
    kShardBase = 1000,
};

double thread_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

double wall_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

/// Thread CPU time of `fn`, which runs on the calling thread.
template <class Fn>
double timed(Fn&& fn) {
    const double start = thread_cpu_seconds();
    fn();
    return thread_cpu_seconds() - start;
}

}  // namespace

void RunConfig::validate() const {
    if (M < 1) throw std::invalid_argument("run.M must be >= 1");
    if (K < 1) throw std::invalid_argument("run.K must be >= 1");
    if (estimators.empty()) throw std::invalid_argument("run.estimators must not be empty");
    em.validate();
    mm.validate();
}

std::vector<Shard> partition(const Dataset& data, std::size_t M, std::uint64_t seed) {
    const std::size_t N = data.size();
    if (M < 1) throw std::invalid_argument("partition needs M >= 1");
    if (M > N) throw std::invalid_argument("cannot split " + std::to_string(N) + " rows over " + std::to_string(M) + " machines");
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (M > 1) {
        Rng rng = make_rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<Shard> shards(M);
    std::size_t offset = 0;
    for (std::size_t m = 0; m < M; ++m) {
        const std::size_t size = N / M + (m < N % M ? 1 : 0);
        shards[m].rows.assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                              order.begin() + static_cast<std::ptrdiff_t>(offset + size));
        offset += size;
        shards[m].data = M == 1 ? data : data.subset(shards[m].rows);
        shards[m].lambda = static_cast<double>(size) / static_cast<double>(N);
    }
    return shards;
}

SupportSample draw_support(const Dataset& data, std::size_t S, std::uint64_t seed) {
    const std::size_t N = data.size();
    if (S < 1 || S > N) {
        throw std::invalid_argument("support size " + std::to_string(S) + " is outside [1, " + std::to_string(N) + "]");
    }
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed);
    for (std::size_t i = 0; i < S; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, N - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    SupportSample support;
    support.X.resize(static_cast<Eigen::Index>(S), data.X.cols());
    for (std::size_t i = 0; i < S; ++i) {
        support.X.row(static_cast<Eigen::Index>(i)) = data.X.row(static_cast<Eigen::Index>(order[i]));
    }
    return support;
}

double TimingReport::learning_seconds(EstimatorKind kind) const {
    switch (kind) {
        case EstimatorKind::Global: return global_seconds;
        case EstimatorKind::Reduction: return max_local_seconds + reduction_aggregation_seconds;
        case EstimatorKind::Middle: return max_local_seconds + middle_aggregation_seconds;
        case EstimatorKind::WeightedAverage: return max_local_seconds + average_aggregation_seconds;
    }
    return 0.0;
}

std::size_t CommReport::scalars(EstimatorKind kind) const {
    switch (kind) {
        case EstimatorKind::Global: return data_rows_scalars;
        case EstimatorKind::Reduction:
        case EstimatorKind::Middle: return parameters_sent + support_sent;
        case EstimatorKind::WeightedAverage: return parameters_sent;
    }
    return 0;
}

CommReport communication_cost(std::size_t M, std::size_t K, std::size_t d, std::size_t S, std::size_t N) {
    CommReport c;
    c.parameters_sent = M * (K * (d + 1) + K + (K - 1) * (d + 1));
    c.support_sent = S * (d + 1);
    c.data_rows_scalars = N * (d + 2);
    return c;
}

std::uint64_t shard_seed(std::uint64_t seed, std::size_t m) { return derive_seed(seed, kShardBase + m); }

ExperimentResult run_experiment(const Dataset& train, const Dataset& test, const MoEParams* truth,
                                const std::vector<int>* test_labels, const RunConfig& config) {
    config.validate();
    train.validate();
    test.validate();
    if (train.d() != test.d()) throw std::invalid_argument("training and test data have different dimensions");
    if (truth && (truth->d() != train.d() || truth->K() != config.K)) {
        throw std::invalid_argument("truth does not match the data dimension or K");
    }
    const std::size_t N = train.size();
    const std::size_t M = config.M;
    const std::size_t S = config.S > 0 ? config.S : std::max<std::size_t>(1, N / M);

    ExperimentResult out;
    out.comm = communication_cost(M, config.K, train.d(), S, N);
    const bool need_locals = std::any_of(config.estimators.begin(), config.estimators.end(),
                                         [](EstimatorKind k) { return k != EstimatorKind::Global; });

    // Local fits: one task per shard, pulled by a bounded set of workers.
    if (need_locals) {
        const auto shards = partition(train, M, derive_seed(config.seed, kPartitionStream));
        std::vector<std::optional<EmResult>> fits(M);
        std::vector<std::string> errors(M);
        out.timing.local_seconds.assign(M, 0.0);
        out.timing.local_wall_seconds.assign(M, 0.0);
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t m = next++; m < M; m = next++) {
                EmConfig em = config.em;
                em.seed = shard_seed(config.seed, m);
                const double wall0 = wall_seconds();
                out.timing.local_seconds[m] = timed([&] {
                    try {
                        fits[m] = em_fit(shards[m].data, config.K, em);
                    } catch (const std::exception& e) {
                        errors[m] = e.what();
                    }
                });
                out.timing.local_wall_seconds[m] = wall_seconds() - wall0;
            }
        };
        std::size_t workers = config.workers > 0 ? config.workers : std::max(1u, std::thread::hardware_concurrency());
        workers = std::min(workers, M);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();

        for (std::size_t m = 0; m < M; ++m) {
            if (!errors[m].empty()) {
                out.local_error = "local fit " + std::to_string(m) + " failed: " + errors[m];
                break;
            }
            out.locals.push_back(LocalModel{fits[m]->params, shards[m].lambda});
        }
        if (!out.local_error.empty()) out.locals.clear();
        out.timing.max_local_seconds =
            *std::max_element(out.timing.local_seconds.begin(), out.timing.local_seconds.end());
    }

    const SupportSample support = draw_support(train, std::min(S, N), derive_seed(config.seed, kSupportStream));
    const SupportSample eval_support =
        draw_support(test, std::min(S, test.size()), derive_seed(config.seed, kEvalSupportStream));

    for (EstimatorKind kind : config.estimators) {
        EstimatorOutcome o;
        o.kind = kind;
        try {
            if (kind != EstimatorKind::Global && !out.local_error.empty()) throw std::runtime_error(out.local_error);
            switch (kind) {
                case EstimatorKind::Global: {
                    EmConfig em = config.em;
                    em.seed = shard_seed(config.seed, 0);
                    out.timing.global_seconds = timed([&] { o.model = global_estimator(train, config.K, em).params; });
                    break;
                }
                case EstimatorKind::Reduction: {
                    MmConfig mm = config.mm;
                    mm.seed = derive_seed(config.seed, kMmStream);
                    out.timing.reduction_aggregation_seconds = timed([&] {
                        MmResult r = reduction_estimator(out.locals, config.K, support, mm);
                        o.objective_trace = std::move(r.objective_trace);
                        o.model = std::move(r.model);
                    });
                    break;
                }
                case EstimatorKind::Middle:
                    out.timing.middle_aggregation_seconds =
                        timed([&] { o.model = middle_estimator(out.locals, support).model; });
                    break;
                case EstimatorKind::WeightedAverage:
                    out.timing.average_aggregation_seconds =
                        timed([&] { o.model = weighted_average_estimator(out.locals, config.align_average); });
                    break;
            }
            o.metrics = evaluate_model(*o.model, test, truth, test_labels, &eval_support);
        } catch (const std::exception& e) {
            o.error = e.what();
        }
        out.outcomes.push_back(std::move(o));
    }
    for (auto& o : out.outcomes) {
        o.metrics.time_s = out.timing.learning_seconds(o.kind);
        o.metrics.comm_scalars = out.comm.scalars(o.kind);
    }
    return out;
}

}  // namespace dmoe
