#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "olps/accounting.hpp"
#include "olps/market_data.hpp"

namespace olps {

/// Weights over d base experts plus the hold-current-portfolio expert (last).
class AllocationVector {
public:
    AllocationVector() = default;
    explicit AllocationVector(Vector weights);

    static AllocationVector uniform(std::size_t m);
    static AllocationVector vertex(std::size_t m, std::size_t i);

    const Vector& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    double operator[](std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }

    bool operator==(const AllocationVector& other) const { return weights_ == other.weights_; }

private:
    Vector weights_;
};

/// Symmetric positive-definite metric for the Newton step.
class CurvatureMatrix {
public:
    CurvatureMatrix() = default;
    /// Throws NumericalError unless symmetric to 1e-12 (relative) and positive definite.
    explicit CurvatureMatrix(Matrix a);

    static CurvatureMatrix scaled_identity(std::size_t m, double epsilon);

    const Matrix& matrix() const noexcept { return a_; }
    std::size_t order() const noexcept { return static_cast<std::size_t>(a_.rows()); }

    /// a += g g^T.
    void add_outer_product(const Vector& g);

    bool operator==(const CurvatureMatrix& o) const { return a_ == o.a_; }

private:
    Matrix a_;
};

struct SolverOptions {
    std::size_t max_iterations = 10'000;
    double objective_tolerance = 1e-12;
};

struct SimplexSolution {
    Vector point;
    double objective = 0.0;
    std::size_t iterations = 0;
    /// Upper bound on objective - optimum where the method provides one.
    double gap = 0.0;
};

/**
 * min 0.5 w^T Q w + c^T w  over the probability simplex.
 *
 * Primal active-set method started from the feasible point `start`. Q must be
 * positive definite on the simplex tangent space. Each iterate is feasible and
 * the objective never increases.
 */
SimplexSolution solve_simplex_qp(const Matrix& q, const Vector& c, const Vector& start,
                                 const SolverOptions& options = {});

/// Norm of w - P(w - grad f(w)), the unit-step projected-gradient residual.
double projected_gradient_residual(const Vector& w, const Vector& grad);

struct CapeStepProblem {
    Vector grad;               // gradient of the round loss at w_current
    AllocationVector w_current;
    CurvatureMatrix metric;
    double eta = 1.0;
    double lambda = 0.0;

    void validate() const;

    /// <grad, w - w_current> + lambda * sum_{i<m-1} w_i + (eta/2) (w - w_current)^T A (w - w_current)
    double objective(const Vector& w) const;
};

AllocationVector solve_cape_step(const CapeStepProblem& problem, const SolverOptions& options = {});

/// -eta log<b, x> + 0.5 ||b - b_current||^2 + lambda ||b - b_current||_1
double olu_objective(const Vector& b, const Vector& x, const Vector& b_current, double eta,
                     double lambda);

/// Lazy-update proximal step. Proximal gradient on the smooth part with an exact
/// prox for the centred l1 term restricted to the simplex.
Portfolio solve_olu_step(const Eigen::Ref<const Vector>& x_prev, const Portfolio& b_current,
                         double eta, double lambda, const SolverOptions& options = {});

/// Smallest additive slack that makes the first-order subgradient conditions
/// of the lazy-update problem hold at b. Zero at an exact minimizer.
double olu_optimality_violation(const Vector& b, const Vector& x, const Vector& b_current,
                                double eta, double lambda);

/**
 * min_{w in simplex}  -sum_t log<r_t, w> + c^T w
 *
 * Rows of `returns` are the per-round gross returns of each coordinate.
 * Projected Newton with an exact QP subproblem and Armijo backtracking; stops
 * on the Frank-Wolfe duality gap.
 */
SimplexSolution minimize_log_loss(const Eigen::Ref<const RowMatrix>& returns, const Vector& linear,
                                  double gap_tolerance = 1e-10, const Vector* start = nullptr,
                                  std::size_t max_iterations = 500);

/// Offline w* minimizing sum_t [g_t(w) + lambda R(w)] with g_t(w) = -log<r_t, w>
/// and R(w) = sum of all but the last coordinate.
SimplexSolution best_fixed_allocation(const Eigen::Ref<const RowMatrix>& expert_returns, double lambda,
                                      const Vector* warm_start = nullptr);

using SimplexObjective = std::function<double(const Vector&)>;

struct LatticeMinimum {
    Vector point;
    double value = 0.0;
};

/// Exhaustive search over {k * resolution} lattice points of the simplex.
/// Test oracle: m <= 4, resolution >= 1e-3.
LatticeMinimum brute_force_simplex_min(const SimplexObjective& objective, std::size_t m,
                                       double resolution);

}  // namespace olps
