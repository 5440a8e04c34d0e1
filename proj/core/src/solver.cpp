#include "olps/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>

#include "olps/errors.hpp"

namespace olps {

AllocationVector::AllocationVector(Vector weights) : weights_(std::move(weights)) {
    if (weights_.size() == 0) throw std::invalid_argument("allocation vector must be non-empty");
    for (auto& w : weights_) {
        if (!std::isfinite(w)) throw std::invalid_argument("allocation weight is not finite");
        if (w < 0.0) {
            if (w < -Portfolio::kClampTolerance)
                throw std::invalid_argument("allocation weight is negative");
            w = 0.0;
        }
    }
    if (std::abs(weights_.sum() - 1.0) > Portfolio::kSumTolerance)
        throw std::invalid_argument("allocation weights do not sum to 1");
}

AllocationVector AllocationVector::uniform(std::size_t m) {
    if (m == 0) throw std::invalid_argument("allocation vector must be non-empty");
    return AllocationVector(
        Vector::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m)));
}

AllocationVector AllocationVector::vertex(std::size_t m, std::size_t i) {
    if (i >= m) throw std::invalid_argument("vertex index out of range");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(m));
    v[static_cast<Eigen::Index>(i)] = 1.0;
    return AllocationVector(std::move(v));
}

CurvatureMatrix::CurvatureMatrix(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols() || a_.rows() == 0)
        throw NumericalError("curvature matrix must be square and non-empty");
    if (!a_.allFinite()) throw NumericalError("curvature matrix has non-finite entries");
    const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NumericalError("curvature matrix is not symmetric");
    Eigen::LLT<Matrix> llt(a_);
    if (llt.info() != Eigen::Success) throw NumericalError("curvature matrix is not positive definite");
}

CurvatureMatrix CurvatureMatrix::scaled_identity(std::size_t m, double epsilon) {
    if (!(epsilon > 0.0)) throw NumericalError("curvature epsilon must be positive");
    const auto k = static_cast<Eigen::Index>(m);
    return CurvatureMatrix(epsilon * Matrix::Identity(k, k));
}

void CurvatureMatrix::add_outer_product(const Vector& g) {
    if (g.size() != a_.rows()) throw std::invalid_argument("outer product dimension mismatch");
    a_.noalias() += g * g.transpose();
}

// ---------------------------------------------------------------------------
// Ensemble step

void CapeStepProblem::validate() const {
    const auto m = w_current.size();
    if (m < 2) throw std::invalid_argument("cape step needs at least two coordinates");
    if (static_cast<std::size_t>(grad.size()) != m || metric.order() != m)
        throw std::invalid_argument("cape step: dimension mismatch");
    if (!grad.allFinite()) throw NumericalError("cape step: non-finite gradient");
    if (!(eta > 0.0)) throw std::invalid_argument("cape step: eta must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("cape step: lambda must be non-negative");
}

namespace {

Vector penalty_vector(Eigen::Index m, double lambda) {
    Vector r = Vector::Constant(m, lambda);
    r[m - 1] = 0.0;
    return r;
}

}  // namespace

double CapeStepProblem::objective(const Vector& w) const {
    const Vector diff = w - w_current.weights();
    const auto m = static_cast<Eigen::Index>(w_current.size());
    return grad.dot(diff) + lambda * w.head(m - 1).sum() +
           0.5 * eta * diff.dot(metric.matrix() * diff);
}

AllocationVector solve_cape_step(const CapeStepProblem& problem, const SolverOptions& options) {
    problem.validate();
    const auto m = static_cast<Eigen::Index>(problem.w_current.size());
    const Vector& w0 = problem.w_current.weights();
    // On the simplex sum_{i<m-1} w_i = 1 - w_m, so the regularizer is linear and
    // the step is a strictly convex QP.
    const Matrix q = problem.eta * problem.metric.matrix();
    const Vector c = problem.grad + penalty_vector(m, problem.lambda) - q * w0;
    auto sol = solve_simplex_qp(q, c, w0, options);
    return AllocationVector(std::move(sol.point));
}

// ---------------------------------------------------------------------------
// Lazy updates

double olu_objective(const Vector& b, const Vector& x, const Vector& b_current, double eta,
                     double lambda) {
    const double gross = b.dot(x);
    if (!(gross > 0.0)) return std::numeric_limits<double>::infinity();
    return -eta * std::log(gross) + 0.5 * (b - b_current).squaredNorm() +
           lambda * (b - b_current).lpNorm<1>();
}

namespace {

// argmin_b 0.5||b - v||^2 + tau ||b - center||_1 over the simplex.
// Each coordinate is max(0, soft_threshold_around_center(v_i + mu)); the sum is
// monotone piecewise linear in mu, so mu is found exactly from the breakpoints.
Vector centred_l1_simplex_prox(const Vector& v, const Vector& center, double tau) {
    const Eigen::Index n = v.size();
    auto coord = [&](Eigen::Index i, double mu) {
        const double u = v[i] + mu;
        double s;
        if (u > center[i] + tau) s = u - tau;
        else if (u < center[i] - tau) s = u + tau;
        else s = center[i];
        return std::max(0.0, s);
    };
    auto total = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += coord(i, mu);
        return s;
    };

    std::vector<double> bps;
    bps.reserve(static_cast<std::size_t>(3 * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        bps.push_back(-tau - v[i]);
        bps.push_back(center[i] - tau - v[i]);
        bps.push_back(center[i] + tau - v[i]);
    }
    std::sort(bps.begin(), bps.end());
    bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

    // Binary search for the first breakpoint with total >= 1.
    std::size_t lo = 0, hi = bps.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (total(bps[mid]) >= 1.0) hi = mid;
        else lo = mid + 1;
    }
    double mu;
    if (lo == bps.size()) {
        const double last = bps.back();
        mu = last + (1.0 - total(last)) / static_cast<double>(n);
    } else if (lo == 0) {
        mu = bps.front();
    } else {
        const double a = bps[lo - 1], b = bps[lo];
        const double fa = total(a), fb = total(b);
        mu = fb > fa ? a + (1.0 - fa) * (b - a) / (fb - fa) : b;
    }
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = coord(i, mu);
    return out;
}

}  // namespace

Portfolio solve_olu_step(const Eigen::Ref<const Vector>& x_prev, const Portfolio& b_current,
                         double eta, double lambda, const SolverOptions& options) {
    const Vector x = x_prev;
    const Vector& b0 = b_current.weights();
    if (x.size() != b0.size()) throw std::invalid_argument("olu step: dimension mismatch");
    if (!(eta >= 0.0) || !(lambda >= 0.0))
        throw std::invalid_argument("olu step: eta and lambda must be non-negative");
    if (!(x.maxCoeff() > 0.0)) throw BankruptError(0);

    auto smooth = [&](const Vector& b) {
        const double gross = b.dot(x);
        if (!(gross > 0.0)) return std::numeric_limits<double>::infinity();
        return (eta > 0.0 ? -eta * std::log(gross) : 0.0) + 0.5 * (b - b0).squaredNorm();
    };
    auto smooth_grad = [&](const Vector& b) -> Vector {
        return -eta * x / b.dot(x) + (b - b0);
    };

    Vector b = b0;
    if (!(b.dot(x) > 0.0)) {
        Eigen::Index best = 0;
        x.maxCoeff(&best);
        b = Vector::Zero(b0.size());
        b[best] = 1.0;
    }

    double step = 1.0;
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        const Vector g = smooth_grad(b);
        Vector next;
        for (int tries = 0;; ++tries) {
            next = centred_l1_simplex_prox(b - step * g, b0, step * lambda);
            const Vector d = next - b;
            const double fn = smooth(next);
            if (std::isfinite(fn) && (smooth_grad(next) - g).dot(d) <= d.squaredNorm() / step)
                break;
            step *= 0.5;
            if (tries > 200) throw NumericalError("olu step: line search failed");
        }
        const double moved = (next - b).cwiseAbs().maxCoeff();
        b = std::move(next);
        if (moved <= 1e-16 || olu_optimality_violation(b, x, b0, eta, lambda) <= 1e-12)
            return Portfolio(b);
        step = std::min(1.0, step * 1.25);
    }
    throw ConvergenceError("olu proximal gradient", options.max_iterations,
                           olu_optimality_violation(b, x, b0, eta, lambda));
}

double olu_optimality_violation(const Vector& b, const Vector& x, const Vector& b_current,
                                double eta, double lambda) {
    const double gross = b.dot(x);
    if (!(gross > 0.0)) return std::numeric_limits<double>::infinity();
    const Vector g = -eta * x / gross + (b - b_current);
    constexpr double kZero = 1e-12;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const double diff = b[i] - b_current[i];
        double s_lo = -1.0, s_hi = 1.0;
        if (diff > kZero) s_lo = s_hi = 1.0;
        else if (diff < -kZero) s_lo = s_hi = -1.0;
        // Stationarity: mu = g_i + lambda s_i - nu_i, nu_i >= 0, nu_i b_i = 0.
        upper = std::min(upper, g[i] + lambda * s_hi);
        if (b[i] > kZero) lower = std::max(lower, g[i] + lambda * s_lo);
    }
    return std::max(0.0, lower - upper);
}

// ---------------------------------------------------------------------------
// Log-loss minimisation (best fixed allocation, BCRP)

SimplexSolution minimize_log_loss(const Eigen::Ref<const RowMatrix>& returns, const Vector& linear,
                                  double gap_tolerance, const Vector* start,
                                  std::size_t max_iterations) {
    const Eigen::Index m = returns.cols();
    if (returns.rows() == 0 || m == 0) throw std::invalid_argument("minimize_log_loss: empty problem");
    if (linear.size() != m) throw std::invalid_argument("minimize_log_loss: dimension mismatch");

    Vector w = start ? *start : Vector::Constant(m, 1.0 / static_cast<double>(m));
    if ((returns * w).minCoeff() <= 0.0) w = Vector::Constant(m, 1.0 / static_cast<double>(m));

    auto value = [&](const Vector& v, Vector* gross_out) {
        const Vector gross = returns * v;
        if (gross.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
        const double f = -gross.array().log().sum() + linear.dot(v);
        if (gross_out) *gross_out = gross;
        return f;
    };

    Vector gross;
    double f = value(w, &gross);
    if (!std::isfinite(f)) throw BankruptError(0);

    SimplexSolution out;
    for (std::size_t iter = 1; iter <= max_iterations; ++iter) {
        const Vector inv = gross.cwiseInverse();
        const Vector grad = -returns.transpose() * inv + linear;
        const double gap = grad.dot(w) - grad.minCoeff();
        out.point = w;
        out.objective = f;
        out.gap = std::max(0.0, gap);
        out.iterations = iter;
        if (gap <= gap_tolerance) return out;

        const RowMatrix weighted = returns.array().colwise() * inv.array();
        Matrix hessian = weighted.transpose() * weighted;
        const double damping = 1e-12 * std::max(1.0, hessian.trace() / static_cast<double>(m));
        hessian.diagonal().array() += damping;

        // A constant shift of the gradient is invisible on the simplex and keeps
        // the slope free of cancellation.
        const Vector centred = grad.array() - grad.minCoeff();
        const Vector c = centred - hessian * w;
        SimplexSolution qp = solve_simplex_qp(hessian, c, w);
        const Vector dir = qp.point - w;
        const double slope = centred.dot(dir);
        if (!(slope < 0.0)) return out;  // no descent direction left at machine precision  // no descent direction left at machine precision

        double alpha = 1.0;
        Vector next, next_gross;
        double fn = std::numeric_limits<double>::infinity();
        for (int tries = 0; tries < 60; ++tries) {
            next = w + alpha * dir;
            fn = value(next, &next_gross);
            if (fn <= f + 1e-4 * alpha * slope) break;
            alpha *= 0.5;
        }
        if (!(fn <= f)) {
            // f no longer resolves the decrease; fall back to the gradient-based gap
            next = qp.point;
            const Vector ng = returns * next;
            if (ng.minCoeff() <= 0.0) return out;
            const Vector g2 = -returns.transpose() * ng.cwiseInverse() + linear;
            if (!(g2.dot(next) - g2.minCoeff() < gap)) return out;
        }
        w = next.cwiseMax(0.0);
        w /= w.sum();
        f = value(w, &gross);
    }
    throw ConvergenceError("projected Newton (log loss)", max_iterations, out.gap);
}

SimplexSolution best_fixed_allocation(const Eigen::Ref<const RowMatrix>& expert_returns,
                                      double lambda, const Vector* warm_start) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("best_fixed_allocation: lambda < 0");
    const Eigen::Index m = expert_returns.cols();
    const double rounds = static_cast<double>(expert_returns.rows());
    Vector linear = Vector::Constant(m, rounds * lambda);
    linear[m - 1] = 0.0;
    return minimize_log_loss(expert_returns, linear, 1e-10, warm_start);
}

// ---------------------------------------------------------------------------
// Lattice oracle

LatticeMinimum brute_force_simplex_min(const SimplexObjective& objective, std::size_t m,
                                       double resolution) {
    if (m == 0 || m > 4) throw std::invalid_argument("brute_force_simplex_min: need 1 <= m <= 4");
    if (!(resolution >= 1e-3 - 1e-15) || resolution > 1.0)
        throw std::invalid_argument("brute_force_simplex_min: resolution must be in [1e-3, 1]");
    const auto steps = static_cast<int>(std::lround(1.0 / resolution));
    const double h = 1.0 / steps;

    LatticeMinimum best;
    best.value = std::numeric_limits<double>::infinity();
    Vector w(static_cast<Eigen::Index>(m));
    std::vector<int> k(m, 0);

    // Enumerate compositions of `steps` into m non-negative parts.
    auto visit = [&](auto&& self, std::size_t pos, int remaining) -> void {
        if (pos + 1 == m) {
            k[pos] = remaining;
            for (std::size_t i = 0; i < m; ++i) w[static_cast<Eigen::Index>(i)] = k[i] * h;
            const double v = objective(w);
            if (v < best.value) {
                best.value = v;
                best.point = w;
            }
            return;
        }
        for (int j = 0; j <= remaining; ++j) {
            k[pos] = j;
            self(self, pos + 1, remaining - j);
        }
    };
    visit(visit, 0, steps);
    return best;
}

}  // namespace olps
