#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "olps/accounting.hpp"
#include "olps/market_data.hpp"
#include "olps/solver.hpp"

namespace olps {

/// Ensemble hyperparameters. eta and epsilon default to 1; lambda to the
/// fixed "naive" setting 0.005.
struct CapeConfig {
    double eta = 1.0;
    double epsilon = 1.0;
    double lambda = 0.005;

    void validate() const;
    bool operator==(const CapeConfig&) const = default;
};

/**
 * n x (d+1) matrix whose first d columns are the base strategies' portfolios
 * for the round and whose last column is the ensemble's drifted holdings from
 * the previous round (the hold expert).
 */
class AugmentedPortfolioMatrix {
public:
    AugmentedPortfolioMatrix() = default;
    /// Every column must be a valid portfolio.
    explicit AugmentedPortfolioMatrix(Matrix columns);
    AugmentedPortfolioMatrix(const Matrix& base, const Portfolio& hold);

    const Matrix& columns() const noexcept { return columns_; }
    std::size_t stocks() const noexcept { return static_cast<std::size_t>(columns_.rows()); }
    std::size_t experts() const noexcept { return static_cast<std::size_t>(columns_.cols()); }

    bool operator==(const AugmentedPortfolioMatrix& o) const { return columns_ == o.columns_; }

private:
    Matrix columns_;
};

/// Full mutable state of the ensemble between rounds. Copyable, so a copy is
/// a checkpoint that can be replayed.
struct EnsembleState {
    std::size_t round = 1;  // round about to be played, 1-based
    AllocationVector w;
    CurvatureMatrix a;
    AugmentedPortfolioMatrix p_plus;
    Portfolio b_hat;
    CapeConfig config;
    /// Sum of gradient outer products added to epsilon*I so far.
    std::size_t updates = 0;

    std::size_t base_experts() const noexcept { return w.size() - 1; }

    bool operator==(const EnsembleState&) const = default;
};

/// Uniform w over d+1 experts, A = epsilon*I, uniform hold column. When
/// `first_base` (n x d) is absent every base column starts uniform too.
EnsembleState init(std::size_t d, std::size_t n, const CapeConfig& config,
                   const Matrix* first_base = nullptr);

/// P+ w.
Portfolio stock_portfolio(const AugmentedPortfolioMatrix& p_plus, const AllocationVector& w);

/// g(w) = -log <x, P+ w>. Throws BankruptError on a zero gross return.
double loss(const AllocationVector& w, const Eigen::Ref<const Vector>& x,
            const AugmentedPortfolioMatrix& p_plus);

/// -(P+^T x) / <x, P+ w>.
Vector loss_gradient(const AllocationVector& w, const Eigen::Ref<const Vector>& x,
                     const AugmentedPortfolioMatrix& p_plus);

/// Sum of the base-expert weights, i.e. 1 - w_hold.
double regularizer(const AllocationVector& w);

struct RoundOutcome {
    std::size_t round = 0;
    Portfolio played;            // b_t
    AllocationVector allocation; // w_t
    Vector expert_returns;       // P+_t^T x_t
    double gross_return = 0.0;
    double loss = 0.0;
    double lambda = 0.0;         // lambda used for the step that produced w_{t+1}
};

/// One round of the ensemble:
/// play b_t = P+_t w_t, drift it, append the hold column, update A with the
/// gradient outer product and take the regularized Newton step.
/// `next_base` holds the base strategies' portfolios for round t+1 (n x d).
RoundOutcome advance(EnsembleState& state, const Eigen::Ref<const Vector>& x,
                     const Matrix& next_base);

/// Base decisions laid out [expert][round]; returns the n x d matrix of round t (0-based).
Matrix base_matrix(std::span<const std::vector<Portfolio>> experts, std::size_t t);

struct CapeTrajectory {
    std::vector<Portfolio> decisions;      // b_1..b_T
    std::vector<AllocationVector> weights; // w_1..w_T
    std::vector<Vector> expert_returns;    // r_t = P+_t^T x_t
    std::vector<double> lambdas;           // lambda applied at each round's step
    std::optional<std::size_t> bankrupt_round;
};

/// Runs the ensemble with a fixed lambda over precomputed base decisions.
CapeTrajectory run_cape(const MarketSequence& market,
                        std::span<const std::vector<Portfolio>> experts, const CapeConfig& config);

struct RegretTrace {
    std::vector<std::size_t> rounds;  // prefix lengths T'
    std::vector<double> regret;
    /// Least-squares c in regret ~ c log T'.
    double log_fit = 0.0;
};

/// Composite regret sum_t [g_t(w_t) + lambda R(w_t)] - min_w sum_t [g_t(w) + lambda R(w)]
/// evaluated at each requested prefix (all prefixes when `prefixes` is empty).
RegretTrace regret_trace(std::span<const Vector> expert_returns,
                         std::span<const AllocationVector> played, double lambda,
                         std::span<const std::size_t> prefixes = {});

/// About `count` log-spaced prefix lengths in [1, T], always including T.
std::vector<std::size_t> log_spaced_prefixes(std::size_t T, std::size_t count);

void to_json(nlohmann::json& j, const CapeConfig& c);
void from_json(const nlohmann::json& j, CapeConfig& c);
void to_json(nlohmann::json& j, const EnsembleState& s);
void from_json(const nlohmann::json& j, EnsembleState& s);

}  // namespace olps
