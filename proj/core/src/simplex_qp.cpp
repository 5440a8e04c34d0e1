#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/LU>

#include "olps/errors.hpp"
#include "olps/solver.hpp"

namespace olps {

namespace {

double qp_objective(const Matrix& q, const Vector& c, const Vector& w) {
    return 0.5 * w.dot(q * w) + c.dot(w);
}

double frank_wolfe_gap(const Vector& w, const Vector& grad) { return grad.dot(w) - grad.minCoeff(); }

// Puts w exactly on the simplex: clamps round-off negatives and pushes the
// sum error onto the largest coordinate.
void snap_to_simplex(Vector& w) {
    w = w.cwiseMax(0.0);
    Eigen::Index big = 0;
    w.maxCoeff(&big);
    w[big] += 1.0 - w.sum();
    if (w[big] < 0.0) w[big] = 0.0;
}

}  // namespace

double projected_gradient_residual(const Vector& w, const Vector& grad) {
    return (w - project_to_simplex_raw(w - grad)).norm();
}

SimplexSolution solve_simplex_qp(const Matrix& q, const Vector& c, const Vector& start,
                                 const SolverOptions& options) {
    const Eigen::Index m = c.size();
    if (q.rows() != m || q.cols() != m || start.size() != m || m == 0)
        throw std::invalid_argument("solve_simplex_qp: dimension mismatch");
    if (!q.allFinite() || !c.allFinite() || !start.allFinite())
        throw NumericalError("solve_simplex_qp: non-finite problem data");
    if ((start.array() < -Portfolio::kClampTolerance).any() ||
        std::abs(start.sum() - 1.0) > Portfolio::kSumTolerance)
        throw std::invalid_argument("solve_simplex_qp: start point is not on the simplex");

    Vector w = start;
    snap_to_simplex(w);
    // at_zero[i]: coordinate i is held at zero (working set).
    std::vector<bool> at_zero(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) at_zero[static_cast<std::size_t>(i)] = (w[i] == 0.0);

    bool at_subspace_minimum = false;
    std::vector<Eigen::Index> free_idx;
    free_idx.reserve(static_cast<std::size_t>(m));

    for (std::size_t iter = 1; iter <= options.max_iterations; ++iter) {
        const Vector grad = q * w + c;
        const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());

        free_idx.clear();
        for (Eigen::Index i = 0; i < m; ++i)
            if (!at_zero[static_cast<std::size_t>(i)]) free_idx.push_back(i);
        const auto k = static_cast<Eigen::Index>(free_idx.size());

        // Equality-constrained step on the free coordinates:
        //   Q_FF p + nu 1 = -g_F,  1^T p = 0.
        Matrix kkt = Matrix::Zero(k + 1, k + 1);
        Vector rhs = Vector::Zero(k + 1);
        for (Eigen::Index a = 0; a < k; ++a) {
            for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = q(free_idx[a], free_idx[b]);
            kkt(a, k) = 1.0;
            kkt(k, a) = 1.0;
            rhs[a] = -grad[free_idx[a]];
        }
        const Vector sol = kkt.partialPivLu().solve(rhs);
        if (!sol.allFinite()) throw NumericalError("solve_simplex_qp: singular KKT system");
        const double mu = -sol[k];
        Vector p = Vector::Zero(m);
        for (Eigen::Index a = 0; a < k; ++a) p[free_idx[a]] = sol[a];

        const bool negligible = p.cwiseAbs().maxCoeff() <= 1e-15;
        if (at_subspace_minimum || negligible) {
            // Multipliers of the zero constraints: g_i - mu must be >= 0.
            Eigen::Index release = -1;
            double most_negative = -1e-13 * scale;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (!at_zero[static_cast<std::size_t>(i)]) continue;
                const double multiplier = grad[i] - mu;
                if (multiplier < most_negative) {
                    most_negative = multiplier;
                    release = i;
                }
            }
            if (release < 0) {
                SimplexSolution out;
                out.objective = qp_objective(q, c, w);
                out.gap = std::max(0.0, frank_wolfe_gap(w, grad));
                out.iterations = iter;
                out.point = std::move(w);
                return out;
            }
            at_zero[static_cast<std::size_t>(release)] = false;
            at_subspace_minimum = false;
            continue;
        }

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index i : free_idx) {
            if (p[i] < 0.0) {
                const double ratio = -w[i] / p[i];
                if (ratio < alpha) {
                    alpha = ratio;
                    blocking = i;
                }
            }
        }
        w += alpha * p;
        if (blocking >= 0) {
            w[blocking] = 0.0;
            at_zero[static_cast<std::size_t>(blocking)] = true;
            at_subspace_minimum = false;
        } else {
            at_subspace_minimum = true;
        }
        for (Eigen::Index i : free_idx)
            if (w[i] <= 0.0) {
                w[i] = 0.0;
                at_zero[static_cast<std::size_t>(i)] = true;
            }
        snap_to_simplex(w);
    }
    const Vector grad = q * w + c;
    throw ConvergenceError("simplex QP active-set", options.max_iterations,
                           frank_wolfe_gap(w, grad));
}

}  // namespace olps
