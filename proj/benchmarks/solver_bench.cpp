#include <benchmark/benchmark.h>

#include <random>

#include "olps/solver.hpp"

using namespace olps;

namespace {

Vector simplex_point(std::mt19937_64& rng, Eigen::Index n) {
    std::exponential_distribution<double> e(1.0);
    Vector v(n);
    for (auto& x : v) x = e(rng);
    return v / v.sum();
}

Vector relatives(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(0.8, 1.2);
    Vector x(n);
    for (auto& v : x) v = u(rng);
    return x;
}

CapeStepProblem make_step(std::mt19937_64& rng, Eigen::Index m) {
    CapeStepProblem p;
    p.w_current = AllocationVector(simplex_point(rng, m));
    const Vector r = relatives(rng, m);
    p.grad = -r / r.dot(p.w_current.weights());
    Matrix a = Matrix::Identity(m, m);
    for (int k = 0; k < 50; ++k) {
        const Vector rk = relatives(rng, m);
        const Vector g = -rk / rk.dot(simplex_point(rng, m));
        a += g * g.transpose();
    }
    p.metric = CurvatureMatrix(a);
    p.lambda = 0.005;
    return p;
}

}  // namespace

static void BM_CapeStep(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const auto p = make_step(rng, state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(solve_cape_step(p));
}
BENCHMARK(BM_CapeStep)->Arg(3)->Arg(5)->Arg(9)->Arg(17);

static void BM_OluStep(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const Eigen::Index n = state.range(0);
    const Vector x = relatives(rng, n);
    const Portfolio b(simplex_point(rng, n));
    for (auto _ : state) benchmark::DoNotOptimize(solve_olu_step(x, b, 0.1, 0.01));
}
BENCHMARK(BM_OluStep)->Arg(5)->Arg(25)->Arg(90);

static void BM_BestFixedAllocation(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto T = state.range(0);
    RowMatrix r(T, 5);
    for (Eigen::Index t = 0; t < T; ++t) r.row(t) = relatives(rng, 5).transpose();
    for (auto _ : state) benchmark::DoNotOptimize(best_fixed_allocation(r, 0.005));
}
BENCHMARK(BM_BestFixedAllocation)->Arg(1000)->Arg(10000);
