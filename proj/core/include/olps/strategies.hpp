#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "olps/accounting.hpp"
#include "olps/market_data.hpp"

namespace olps {

/// Tunables for the base strategies. Defaults follow the OLPS toolbox.
struct StrategyParams {
    double eg_eta = 0.05;
    double pamr_epsilon = 0.5;
    std::size_t olmar_window = 5;
    double olmar_epsilon = 10.0;
    std::size_t anticor_window = 30;
    double olu_eta = 0.1;
    double olu_lambda = 0.01;
    /// Use lambda = 1/sqrt(T) for OLU instead of olu_lambda.
    bool olu_lambda_inv_sqrt_t = false;

    void validate() const;
    bool operator==(const StrategyParams&) const = default;
};

void to_json(nlohmann::json& j, const StrategyParams& p);
void from_json(const nlohmann::json& j, StrategyParams& p);

// Pure update rules. Each takes the strategy's previous decision and the
// market history it has seen, and returns the next decision.

Portfolio ucrp_next(std::size_t n);
Portfolio eg_next(const Portfolio& b_prev, const Eigen::Ref<const Vector>& x_prev, double eta);
Portfolio pamr_next(const Portfolio& b_prev, const Eigen::Ref<const Vector>& x_prev,
                    double epsilon);
/// `history` is oldest-first; only the last `window - 1` days are used.
Vector olmar_predictor(std::span<const Vector> history, std::size_t window);
Portfolio olmar_next(std::span<const Vector> history, const Portfolio& b_prev,
                     std::size_t window, double epsilon);
/// Plain single-window Anticor transfer applied to `b_prev`.
Portfolio anticor_next(std::span<const Vector> history, const Portfolio& b_prev,
                       std::size_t window);
/// Best constant rebalanced portfolio in hindsight.
Portfolio bcrp(const MarketSequence& market);
Portfolio olu_next(const Portfolio& b_prev, const Eigen::Ref<const Vector>& x_prev, double eta,
                   double lambda);

/**
 * Online strategy protocol: next_portfolio() is the decision for the coming
 * day, observe() reveals that day's market vector.
 */
class Strategy {
public:
    virtual ~Strategy() = default;

    virtual std::string name() const = 0;
    virtual Portfolio next_portfolio() const = 0;
    virtual void observe(const Eigen::Ref<const Vector>& x) = 0;
    virtual void reset() = 0;
    virtual std::unique_ptr<Strategy> clone() const = 0;
};

/// Known names: ucrp, eg, pamr, olmar, anticor, bcrp, olu.
/// `market` is needed for bcrp (hindsight) and for OLU's 1/sqrt(T) mode.
std::unique_ptr<Strategy> make_strategy(const std::string& name, std::size_t n,
                                        const StrategyParams& params,
                                        const MarketSequence* market = nullptr);

bool is_base_strategy(const std::string& name);

/// Plays the strategy over the whole market and returns b_1..b_T.
std::vector<Portfolio> simulate(Strategy& strategy, const MarketSequence& market);

}  // namespace olps
