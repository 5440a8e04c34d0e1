#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "instances.hpp"
#include "olps/errors.hpp"
#include "olps/solver.hpp"

using namespace olps;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

CapeStepProblem random_step(std::mt19937_64& rng, Eigen::Index m) {
    CapeStepProblem p;
    const Vector r = fixtures::random_relatives(rng, m);
    p.w_current = AllocationVector(fixtures::random_simplex_point(rng, m));
    p.grad = -r / r.dot(p.w_current.weights());
    Matrix a = Matrix::Identity(m, m);
    const int history = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < history; ++k) {
        const Vector rk = fixtures::random_relatives(rng, m);
        const Vector g = -rk / rk.dot(fixtures::random_simplex_point(rng, m));
        a += g * g.transpose();
    }
    a += p.grad * p.grad.transpose();
    p.metric = CurvatureMatrix(a);
    p.eta = 1.0;
    p.lambda = std::uniform_real_distribution<double>(0.0, 0.05)(rng);
    return p;
}

}  // namespace

TEST(AllocationVector, Validation) {
    EXPECT_NO_THROW(AllocationVector(vec({0.25, 0.75})));
    EXPECT_THROW(AllocationVector(vec({0.5, 0.6})), std::invalid_argument);
    EXPECT_THROW(AllocationVector(vec({1.5, -0.5})), std::invalid_argument);
    EXPECT_EQ(AllocationVector::uniform(5).weights(), Vector::Constant(5, 0.2));
}

TEST(CurvatureMatrix, RejectsAsymmetricOrIndefinite) {
    Matrix asym(2, 2);
    asym << 1, 0.5, 0, 1;
    EXPECT_THROW(CurvatureMatrix{asym}, NumericalError);
    Matrix indef(2, 2);
    indef << 1, 2, 2, 1;
    EXPECT_THROW(CurvatureMatrix{indef}, NumericalError);
    EXPECT_EQ(CurvatureMatrix::scaled_identity(2, 1.0).matrix(), Matrix::Identity(2, 2));
}

TEST(CurvatureMatrix, OuterProductUpdate) {
    auto a = CurvatureMatrix::scaled_identity(2, 1.0);
    a.add_outer_product(vec({1, 2}));
    Matrix expected(2, 2);
    expected << 2, 2, 2, 5;
    EXPECT_EQ(a.matrix(), expected);
}

TEST(CapeStep, ZeroGradientZeroLambdaIsFixedPoint) {
    CapeStepProblem p;
    p.grad = Vector::Zero(3);
    p.w_current = AllocationVector(vec({0.2, 0.3, 0.5}));
    p.metric = CurvatureMatrix::scaled_identity(3, 1.0);
    p.lambda = 0.0;
    EXPECT_LE((solve_cape_step(p).weights() - p.w_current.weights()).norm(), 1e-15);
}

TEST(CapeStep, TwoExpertClosedForm) {
    CapeStepProblem p;
    p.grad = Vector::Zero(2);
    p.w_current = AllocationVector(vec({0.5, 0.5}));
    p.metric = CurvatureMatrix::scaled_identity(2, 1.0);
    p.eta = 1.0;
    p.lambda = 0.2;
    const auto w = solve_cape_step(p);
    EXPECT_NEAR(w[0], 0.4, 1e-14);
    EXPECT_NEAR(w[1], 0.6, 1e-14);
}

TEST(CapeStep, ScaledIdentityMetricIsEuclideanProjection) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rep % 5);
        const double c = 0.5 + static_cast<double>(rep % 7);
        CapeStepProblem p;
        p.w_current = AllocationVector(fixtures::random_simplex_point(rng, m));
        p.grad = -fixtures::random_relatives(rng, m, 0.2, 3.0);
        p.metric = CurvatureMatrix::scaled_identity(static_cast<std::size_t>(m), c);
        p.eta = 0.7;
        p.lambda = 0.0;
        const Vector expected = project_to_simplex_raw(p.w_current.weights() - p.grad / (p.eta * c));
        EXPECT_LE((solve_cape_step(p).weights() - expected).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(CapeStep, MatchesLatticeOracle) {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = random_step(rng, 3);
        const auto w = solve_cape_step(p);
        const auto oracle = brute_force_simplex_min([&](const Vector& v) { return p.objective(v); }, 3, 1e-3);
        EXPECT_LE(p.objective(w.weights()), oracle.value + 1e-12);
        EXPECT_LE(oracle.value - p.objective(w.weights()), 1e-5);
        EXPECT_LE((w.weights() - oracle.point).norm(), 2e-3);
    }
}

TEST(CapeStep, OptimalityResidualAndDescent) {
    std::mt19937_64 rng(43);
    for (int rep = 0; rep < 200; ++rep) {
        const auto p = random_step(rng, 2 + static_cast<Eigen::Index>(rep % 6));
        const auto w = solve_cape_step(p);
        Vector penalty = Vector::Constant(p.grad.size(), p.lambda);
        penalty[penalty.size() - 1] = 0.0;
        const Vector grad = p.grad + penalty + p.eta * p.metric.matrix() * (w.weights() - p.w_current.weights());
        EXPECT_LE(projected_gradient_residual(w.weights(), grad), 1e-8);
        EXPECT_LE(p.objective(w.weights()), p.objective(p.w_current.weights()) + 1e-12);
    }
}

TEST(CapeStep, HoldWeightGrowsWithLambda) {
    std::mt19937_64 rng(44);
    for (int rep = 0; rep < 30; ++rep) {
        auto p = random_step(rng, 4);
        p.grad.setZero();
        double previous = -1.0;
        for (double lambda : {0.0, 0.001, 0.01, 0.05, 0.1, 1.0, 10.0}) {
            p.lambda = lambda;
            const double hold = solve_cape_step(p)[3];
            EXPECT_GE(hold, previous - 1e-12);
            previous = hold;
        }
    }
}

TEST(CapeStep, IllConditionedMetricStaysExact) {
    // A huge eigenvalue along the all-ones direction does not affect the
    // problem on the simplex.
    CapeStepProblem p;
    p.grad = vec({-1.0, -1.2, -0.9});
    p.w_current = AllocationVector(vec({0.3, 0.3, 0.4}));
    Matrix a = Matrix::Identity(3, 3) + 1e6 * Matrix::Ones(3, 3);
    p.metric = CurvatureMatrix(a);
    p.lambda = 0.01;
    const auto w = solve_cape_step(p);
    CapeStepProblem plain = p;
    plain.metric = CurvatureMatrix::scaled_identity(3, 1.0);
    EXPECT_LE((w.weights() - solve_cape_step(plain).weights()).norm(), 1e-9);
}

TEST(CapeStep, InvalidProblemsThrow) {
    CapeStepProblem p;
    p.grad = Vector::Zero(3);
    p.w_current = AllocationVector::uniform(2);
    p.metric = CurvatureMatrix::scaled_identity(3, 1.0);
    EXPECT_THROW(solve_cape_step(p), std::invalid_argument);
    p.w_current = AllocationVector::uniform(3);
    p.eta = 0.0;
    EXPECT_THROW(solve_cape_step(p), std::invalid_argument);
}

TEST(SimplexQp, RandomProblemsSatisfyKkt) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rep % 8);
        Matrix b(m, m);
        for (auto& v : b.reshaped()) v = z(rng);
        const Matrix q = b * b.transpose() + 0.1 * Matrix::Identity(m, m);
        Vector c(m);
        for (auto& v : c) v = 3.0 * z(rng);
        const auto sol = solve_simplex_qp(q, c, fixtures::random_simplex_point(rng, m));
        EXPECT_LE(projected_gradient_residual(sol.point, q * sol.point + c), 1e-9);
        EXPECT_LE(sol.gap, 1e-9);
    }
}

TEST(OluStep, DominatingL1TermReturnsCurrent) {
    const Portfolio b(vec({0.2, 0.5, 0.3}));
    EXPECT_LE((solve_olu_step(vec({1.5, 0.7, 1.1}), b, 0.1, 1e6).weights() - b.weights()).norm(), 1e-12);
}

TEST(OluStep, FlatMarketReturnsCurrent) {
    const Portfolio b(vec({0.1, 0.6, 0.3}));
    for (double lambda : {0.0, 0.01, 1.0})
        EXPECT_LE((solve_olu_step(Vector::Ones(3), b, 0.1, lambda).weights() - b.weights()).norm(), 1e-12);
}

TEST(OluStep, NoStepSizeAndNoPenaltyReturnsCurrent) {
    const Portfolio b(vec({0.4, 0.6}));
    EXPECT_LE((solve_olu_step(vec({2.0, 0.5}), b, 0.0, 0.0).weights() - b.weights()).norm(), 1e-12);
}

TEST(OluStep, MatchesLatticeOracleAndCertificate) {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector x = fixtures::random_relatives(rng, 3);
        const Portfolio b(fixtures::random_simplex_point(rng, 3));
        const auto sol = solve_olu_step(x, b, 0.1, 0.01);
        const auto oracle = brute_force_simplex_min(
            [&](const Vector& v) { return olu_objective(v, x, b.weights(), 0.1, 0.01); }, 3, 1e-3);
        EXPECT_LE((sol.weights() - oracle.point).norm(), 2e-3);
        EXPECT_LE(olu_objective(sol.weights(), x, b.weights(), 0.1, 0.01), oracle.value + 1e-12);
        EXPECT_LE(olu_optimality_violation(sol.weights(), x, b.weights(), 0.1, 0.01), 1e-7);
    }
}

TEST(OluStep, CertificateOnLargerInstances) {
    std::mt19937_64 rng(78);
    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rep % 9);
        const Vector x = fixtures::random_relatives(rng, n, 0.3, 2.0);
        const Portfolio b(fixtures::random_simplex_point(rng, n));
        const double eta = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
        const double lambda = std::uniform_real_distribution<double>(0.0, 0.2)(rng);
        const auto sol = solve_olu_step(x, b, eta, lambda);
        EXPECT_LE(olu_optimality_violation(sol.weights(), x, b.weights(), eta, lambda), 1e-7);
        EXPECT_LE(olu_objective(sol.weights(), x, b.weights(), eta, lambda),
                  olu_objective(b.weights(), x, b.weights(), eta, lambda) + 1e-12);
    }
}

TEST(LatticeOracle, VertexAndConstantObjectives) {
    const auto e1 = brute_force_simplex_min(
        [](const Vector& w) { return (w - vec({1, 0})).squaredNorm(); }, 2, 1e-3);
    EXPECT_EQ(e1.point, vec({1, 0}));
    EXPECT_EQ(e1.value, 0.0);
    const auto flat = brute_force_simplex_min([](const Vector&) { return 3.5; }, 3, 0.1);
    EXPECT_EQ(flat.value, 3.5);
    EXPECT_NEAR(flat.point.sum(), 1.0, 1e-12);
    EXPECT_THROW(brute_force_simplex_min([](const Vector&) { return 0.0; }, 5, 0.1), std::invalid_argument);
    EXPECT_THROW(brute_force_simplex_min([](const Vector&) { return 0.0; }, 2, 1e-4), std::invalid_argument);
}

TEST(LogLoss, SingleRoundVertexOptimum) {
    RowMatrix r(1, 3);
    r << 1.0, 2.0, 0.5;
    const auto sol = best_fixed_allocation(r, 0.0);
    EXPECT_LE((sol.point - vec({0, 1, 0})).norm(), 1e-9);
}

TEST(LogLoss, IdenticalRoundsMatchSingleRound) {
    RowMatrix one(1, 3);
    one << 1.2, 0.8, 1.0;
    RowMatrix many = one.replicate(15, 1);
    const auto a = best_fixed_allocation(one, 0.01);
    const auto b = best_fixed_allocation(many, 0.01);
    EXPECT_LE((a.point - b.point).norm(), 1e-8);
}

TEST(LogLoss, MatchesLatticeOracle) {
    std::mt19937_64 rng(90);
    for (int rep = 0; rep < 10; ++rep) {
        RowMatrix r(20, 3);
        for (Eigen::Index t = 0; t < 20; ++t) r.row(t) = fixtures::random_relatives(rng, 3).transpose();
        const double lambda = 0.01 * (rep % 3);
        const auto sol = best_fixed_allocation(r, lambda);
        auto objective = [&](const Vector& w) {
            double f = 20.0 * lambda * (w[0] + w[1]);
            for (Eigen::Index t = 0; t < 20; ++t) f -= std::log(r.row(t).dot(w));
            return f;
        };
        const auto oracle = brute_force_simplex_min(objective, 3, 1e-3);
        EXPECT_LE((sol.point - oracle.point).norm(), 2e-3);
        EXPECT_LE(sol.objective, oracle.value + 1e-10);
        EXPECT_NEAR(sol.objective, objective(sol.point), 1e-10);
    }
}

TEST(LogLoss, DualityGapIsCertified) {
    std::mt19937_64 rng(91);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rep % 6);
        RowMatrix r(200, m);
        for (Eigen::Index t = 0; t < 200; ++t) r.row(t) = fixtures::random_relatives(rng, m).transpose();
        const auto sol = minimize_log_loss(r, Vector::Zero(m), 1e-10);
        EXPECT_LE(sol.gap, 1e-10);
        EXPECT_NEAR(sol.point.sum(), 1.0, 1e-12);
        EXPECT_GE(sol.point.minCoeff(), 0.0);
    }
}
