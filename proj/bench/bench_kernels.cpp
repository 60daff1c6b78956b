// Serial reference paths vs their OpenMP counterparts. The second benchmark
// argument selects the path: 0 = serial, 1 = parallel.

#include <random>

#include <benchmark/benchmark.h>

#include "aashgp/baselines.hpp"
#include "aashgp/hgp.hpp"
#include "aashgp/learner.hpp"
#include "aashgp/models.hpp"
#include "aashgp/rv.hpp"
#include "aashgp/subspace.hpp"

using namespace aashgp;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::Parallel : Exec::Serial; }

gp::HgpModel toy_model(Index n, Index d) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    MatrixXd x(n, d);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) x(i, j) = u(rng);
        y(i) = std::sin(2 * x(i, 0)) + 0.1 * u(rng);
    }
    gp::HgpParams p;
    p.kernel_f = gp::SeArdKernel{1.0, VectorXd::Constant(d, 0.5)};
    p.kernel_g = gp::SeArdKernel{0.5, VectorXd::Constant(d, 0.8)};
    p.mu0 = -4.0;
    p.lambda = VectorXd::Constant(n, 0.5);
    return gp::HgpModel(x, y, p);
}

MatrixXd uniform_matrix(Index rows, Index cols, std::uint64_t seed) {
    return rv::sample(rv::RandomVectorSpec::iid(rv::MarginalSpec::uniform(-1, 1), cols), rows, seed);
}

void BM_Sample(benchmark::State& state) {
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::lognormal(0.0, 0.2), 50);
    for (auto _ : state) {
        const MatrixXd x = rv::sample(spec, state.range(0), {1, rng::Purpose::Generic, 0}, exec_of(state));
        benchmark::DoNotOptimize(x.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EstimateC(benchmark::State& state) {
    const MatrixXd g = uniform_matrix(state.range(0), 100, 5);
    for (auto _ : state) benchmark::DoNotOptimize(subspace::estimate_c(g, exec_of(state)).data());
}

void BM_PredictBatch(benchmark::State& state) {
    const gp::HgpModel model = toy_model(150, 4);
    const MatrixXd pool = uniform_matrix(state.range(0), 4, 7);
    VectorXd mean, var;
    for (auto _ : state) {
        model.predict_batch(pool, mean, &var, exec_of(state));
        benchmark::DoNotOptimize(mean.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EstimatePf(benchmark::State& state) {
    const gp::HgpModel model = toy_model(150, 4);
    const MatrixXd pool = uniform_matrix(state.range(0), 4, 9);
    for (auto _ : state) benchmark::DoNotOptimize(learner::estimate_pf(pool, model, 0.5, exec_of(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SelectNext(benchmark::State& state) {
    const Index n = state.range(0);
    const MatrixXd cand = uniform_matrix(n, 4, 11);
    const MatrixXd train = uniform_matrix(200, 4, 13);
    const VectorXd mean = VectorXd::Zero(n);
    const VectorXd var = VectorXd::Ones(n);
    std::vector<Index> critical(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) critical[static_cast<std::size_t>(k)] = k;
    for (auto _ : state) {
        benchmark::DoNotOptimize(learner::select_next(critical, cand, train, mean, var, 0.0, exec_of(state)).index);
    }
}

void BM_Mcs(benchmark::State& state) {
    const auto model = models::ProductModel::with_effective_dimension(30, 4);
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::uniform(0, 1), 30);
    for (auto _ : state) {
        benchmark::DoNotOptimize(baselines::mcs(model, spec, 0.65, state.range(0), 1, exec_of(state)).failures);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Sample)->ArgsProduct({{100000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EstimateC)->ArgsProduct({{2000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictBatch)->ArgsProduct({{100000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EstimatePf)->ArgsProduct({{100000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectNext)->ArgsProduct({{10000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Mcs)->ArgsProduct({{200000}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
