#include "olps/cape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "olps/errors.hpp"

namespace olps {

void CapeConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("cape eta must be positive");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ConfigError("cape epsilon must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("cape lambda must be non-negative");
}

AugmentedPortfolioMatrix::AugmentedPortfolioMatrix(Matrix columns) : columns_(std::move(columns)) {
    if (columns_.rows() == 0 || columns_.cols() < 1)
        throw std::invalid_argument("augmented matrix must be non-empty");
    for (Eigen::Index k = 0; k < columns_.cols(); ++k) {
        const Portfolio check(columns_.col(k));
        columns_.col(k) = check.weights();
    }
}

AugmentedPortfolioMatrix::AugmentedPortfolioMatrix(const Matrix& base, const Portfolio& hold) {
    if (base.rows() != static_cast<Eigen::Index>(hold.size()))
        throw std::invalid_argument("hold column does not match the base matrix");
    Matrix cols(base.rows(), base.cols() + 1);
    cols.leftCols(base.cols()) = base;
    cols.col(base.cols()) = hold.weights();
    *this = AugmentedPortfolioMatrix(std::move(cols));
}

EnsembleState init(std::size_t d, std::size_t n, const CapeConfig& config, const Matrix* first_base) {
    config.validate();
    if (d == 0 || n == 0) throw ConfigError("ensemble needs at least one expert and one stock");
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(d);
    Matrix base;
    if (first_base) {
        if (first_base->rows() != rows || first_base->cols() != cols)
            throw std::invalid_argument("init: first base matrix has the wrong shape");
        base = *first_base;
    } else {
        base = Matrix::Constant(rows, cols, 1.0 / static_cast<double>(n));
    }
    EnsembleState state;
    state.round = 1;
    state.w = AllocationVector::uniform(d + 1);
    state.a = CurvatureMatrix::scaled_identity(d + 1, config.epsilon);
    state.b_hat = Portfolio::uniform(n);
    state.p_plus = AugmentedPortfolioMatrix(base, state.b_hat);
    state.config = config;
    return state;
}

Portfolio stock_portfolio(const AugmentedPortfolioMatrix& p_plus, const AllocationVector& w) {
    if (p_plus.experts() != w.size())
        throw std::invalid_argument("stock_portfolio: dimension mismatch");
    return Portfolio(p_plus.columns() * w.weights());
}

double loss(const AllocationVector& w, const Eigen::Ref<const Vector>& x,
            const AugmentedPortfolioMatrix& p_plus) {
    const double gross = x.dot(p_plus.columns() * w.weights());
    if (!(gross > 0.0)) throw BankruptError(0);
    return -std::log(gross);
}

Vector loss_gradient(const AllocationVector& w, const Eigen::Ref<const Vector>& x,
                     const AugmentedPortfolioMatrix& p_plus) {
    const Vector r = p_plus.columns().transpose() * x;
    const double gross = r.dot(w.weights());
    if (!(gross > 0.0)) throw BankruptError(0);
    return -r / gross;
}

double regularizer(const AllocationVector& w) {
    if (w.size() == 0) return 0.0;
    return w.weights().head(w.weights().size() - 1).sum();
}

RoundOutcome advance(EnsembleState& state, const Eigen::Ref<const Vector>& x,
                     const Matrix& next_base) {
    const auto n = static_cast<Eigen::Index>(state.p_plus.stocks());
    if (x.size() != n) throw std::invalid_argument("advance: market vector has the wrong size");
    if (next_base.rows() != n ||
        next_base.cols() != static_cast<Eigen::Index>(state.base_experts()))
        throw std::invalid_argument("advance: next base matrix has the wrong shape");

    RoundOutcome out;
    out.round = state.round;
    out.allocation = state.w;
    out.played = stock_portfolio(state.p_plus, state.w);
    out.expert_returns = state.p_plus.columns().transpose() * x;
    out.gross_return = out.expert_returns.dot(state.w.weights());
    if (!(out.gross_return > 0.0)) throw BankruptError(state.round);
    out.loss = -std::log(out.gross_return);
    out.lambda = state.config.lambda;

    const Vector grad = -out.expert_returns / out.gross_return;
    const Portfolio drifted = drift(out.played, x);

    CurvatureMatrix metric = state.a;
    metric.add_outer_product(grad);

    CapeStepProblem step;
    step.grad = grad;
    step.w_current = state.w;
    step.metric = metric;
    step.eta = state.config.eta;
    step.lambda = state.config.lambda;
    AllocationVector next_w = solve_cape_step(step);

    state.a = std::move(metric);
    state.w = std::move(next_w);
    state.p_plus = AugmentedPortfolioMatrix(next_base, drifted);
    state.b_hat = drifted;
    ++state.updates;
    ++state.round;
    return out;
}

Matrix base_matrix(std::span<const std::vector<Portfolio>> experts, std::size_t t) {
    if (experts.empty()) throw std::invalid_argument("base_matrix: no experts");
    const auto n = static_cast<Eigen::Index>(experts.front().at(t).size());
    Matrix m(n, static_cast<Eigen::Index>(experts.size()));
    for (std::size_t k = 0; k < experts.size(); ++k) {
        const Portfolio& b = experts[k].at(t);
        if (static_cast<Eigen::Index>(b.size()) != n)
            throw std::invalid_argument("base_matrix: experts disagree on the number of stocks");
        m.col(static_cast<Eigen::Index>(k)) = b.weights();
    }
    return m;
}

CapeTrajectory run_cape(const MarketSequence& market,
                        std::span<const std::vector<Portfolio>> experts, const CapeConfig& config) {
    const std::size_t T = market.rounds();
    if (T == 0) throw DataError("market has no rounds");
    for (const auto& e : experts)
        if (e.size() != T) throw std::invalid_argument("run_cape: expert decision count mismatch");

    const Matrix first = base_matrix(experts, 0);
    EnsembleState state = init(experts.size(), market.stocks(), config, &first);

    CapeTrajectory traj;
    traj.decisions.reserve(T);
    traj.weights.reserve(T);
    traj.expert_returns.reserve(T);
    traj.lambdas.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto x = market.day(t);
        try {
            RoundOutcome out = advance(state, x, base_matrix(experts, std::min(t + 1, T - 1)));
            traj.decisions.push_back(std::move(out.played));
            traj.weights.push_back(std::move(out.allocation));
            traj.expert_returns.push_back(std::move(out.expert_returns));
            traj.lambdas.push_back(out.lambda);
        } catch (const BankruptError&) {
            // Wealth is frozen at zero; the remaining rounds repeat the last decision.
            traj.bankrupt_round = t + 1;
            const Portfolio b = stock_portfolio(state.p_plus, state.w);
            const Vector r = state.p_plus.columns().transpose() * x;
            for (std::size_t s = t; s < T; ++s) {
                traj.decisions.push_back(b);
                traj.weights.push_back(state.w);
                traj.expert_returns.push_back(r);
                traj.lambdas.push_back(config.lambda);
            }
            break;
        }
    }
    return traj;
}

std::vector<std::size_t> log_spaced_prefixes(std::size_t T, std::size_t count) {
    std::vector<std::size_t> out;
    if (T == 0) return out;
    if (count == 0 || count >= T) {
        out.resize(T);
        for (std::size_t i = 0; i < T; ++i) out[i] = i + 1;
        return out;
    }
    const double log_t = std::log(static_cast<double>(T));
    for (std::size_t k = 0; k < count; ++k) {
        const double frac = count == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        auto p = static_cast<std::size_t>(std::llround(std::exp(frac * log_t)));
        p = std::clamp<std::size_t>(p, 1, T);
        if (out.empty() || out.back() < p) out.push_back(p);
    }
    if (out.back() != T) out.push_back(T);
    return out;
}

RegretTrace regret_trace(std::span<const Vector> expert_returns,
                         std::span<const AllocationVector> played, double lambda,
                         std::span<const std::size_t> prefixes) {
    const std::size_t T = expert_returns.size();
    if (played.size() != T) throw std::invalid_argument("regret_trace: length mismatch");
    RegretTrace trace;
    if (T == 0) return trace;
    const auto m = expert_returns.front().size();

    RowMatrix returns(static_cast<Eigen::Index>(T), m);
    std::vector<double> online(T + 1, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        if (expert_returns[t].size() != m || static_cast<Eigen::Index>(played[t].size()) != m)
            throw std::invalid_argument("regret_trace: dimension mismatch");
        returns.row(static_cast<Eigen::Index>(t)) = expert_returns[t].transpose();
        const double gross = expert_returns[t].dot(played[t].weights());
        if (!(gross > 0.0)) throw BankruptError(t + 1);
        online[t + 1] = online[t] - std::log(gross) + lambda * regularizer(played[t]);
    }

    std::vector<std::size_t> points(prefixes.begin(), prefixes.end());
    if (points.empty()) points = log_spaced_prefixes(T, 0);
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    Vector warm;
    double num = 0.0, den = 0.0;
    for (std::size_t p : points) {
        if (p == 0 || p > T) throw std::invalid_argument("regret_trace: prefix out of range");
        const auto best = best_fixed_allocation(returns.topRows(static_cast<Eigen::Index>(p)), lambda,
                                                warm.size() ? &warm : nullptr);
        warm = best.point;
        const double regret = online[p] - best.objective;
        trace.rounds.push_back(p);
        trace.regret.push_back(regret);
        const double lt = std::log(static_cast<double>(p));
        num += regret * lt;
        den += lt * lt;
    }
    trace.log_fit = den > 0.0 ? num / den : 0.0;
    return trace;
}

void to_json(nlohmann::json& j, const CapeConfig& c) {
    j = {{"eta", c.eta}, {"epsilon", c.epsilon}, {"lambda", c.lambda}};
}

void from_json(const nlohmann::json& j, CapeConfig& c) {
    c.eta = j.value("eta", c.eta);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.lambda = j.value("lambda", c.lambda);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index k = 0; k < m.cols(); ++k) row[static_cast<std::size_t>(k)] = m(i, k);
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return {};
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw ConfigError("ragged matrix in state snapshot");
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return m;
}

Vector vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.begin(), v.end()}; }

}  // namespace

void to_json(nlohmann::json& j, const EnsembleState& s) {
    j = {{"round", s.round},
         {"w", to_std(s.w.weights())},
         {"a", matrix_to_json(s.a.matrix())},
         {"p_plus", matrix_to_json(s.p_plus.columns())},
         {"b_hat", to_std(s.b_hat.weights())},
         {"config", s.config},
         {"updates", s.updates}};
}

void from_json(const nlohmann::json& j, EnsembleState& s) {
    try {
        s.round = j.at("round").get<std::size_t>();
        s.w = AllocationVector(vector_from_json(j.at("w")));
        s.a = CurvatureMatrix(matrix_from_json(j.at("a")));
        s.p_plus = AugmentedPortfolioMatrix(matrix_from_json(j.at("p_plus")));
        s.b_hat = Portfolio(vector_from_json(j.at("b_hat")));
        s.config = j.at("config").get<CapeConfig>();
        s.updates = j.value("updates", std::size_t{0});
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid ensemble snapshot: ") + e.what());
    }
    if (s.w.size() != s.a.order() || s.w.size() != s.p_plus.experts() ||
        s.b_hat.size() != s.p_plus.stocks())
        throw ConfigError("invalid ensemble snapshot: inconsistent dimensions");
}

}  // namespace olps
