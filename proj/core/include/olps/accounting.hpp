#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "olps/market_data.hpp"

namespace olps {

/// A point on the probability simplex: fractions of wealth per asset.
class Portfolio {
public:
    static constexpr double kClampTolerance = 1e-12;
    static constexpr double kSumTolerance = 1e-9;

    Portfolio() = default;

    /// Clamps entries in [-1e-12, 0) to zero. Throws std::invalid_argument on
    /// larger negative entries, non-finite entries, or a sum off by more than 1e-9.
    explicit Portfolio(Vector weights);

    static Portfolio uniform(std::size_t n);
    static Portfolio vertex(std::size_t n, std::size_t i);

    const Vector& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    double operator[](std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }

    bool operator==(const Portfolio& other) const { return weights_ == other.weights_; }

private:
    Vector weights_;
};

/// Proportional commission: gamma/2 is paid per unit of wealth bought or sold.
class CommissionRate {
public:
    CommissionRate() = default;
    explicit CommissionRate(double gamma);

    double gamma() const noexcept { return gamma_; }

private:
    double gamma_ = 0.0;
};

/// Holdings after one day of price movement: b_i x_i / <b, x>.
/// Throws BankruptError (round 0) when <b, x> is zero.
Portfolio drift(const Portfolio& b, const Eigen::Ref<const Vector>& x);

/// (gamma/2) * ||b_next - b_hat||_1.
double rebalance_cost_fraction(const Portfolio& b_hat, const Portfolio& b_next,
                               const CommissionRate& rate);

double l1_distance(const Vector& a, const Vector& b);

/// Euclidean projection onto the probability simplex (sort-based, O(n log n)).
Portfolio project_to_simplex(const Vector& v);
Vector project_to_simplex_raw(const Vector& v);

struct LedgerRecord {
    std::size_t round = 0;  // 1-based
    double gross_return = 0.0;
    double turnover = 0.0;
    double commission_fraction = 0.0;
    double net_factor = 0.0;
    double cumulative_wealth = 0.0;

    bool operator==(const LedgerRecord&) const = default;
};

/**
 * Per-round wealth bookkeeping under proportional commissions.
 *
 * Round t multiplies wealth by <b_t, X_t> * (1 - (gamma/2) ||b_{t+1} - b_hat_t||_1).
 * Establishing b_1 is free and the last round pays no forward rebalance.
 * A zero gross return freezes wealth at 0 and ends the ledger.
 */
struct WealthLedger {
    double initial_wealth = 1.0;
    double gamma = 0.0;
    std::vector<LedgerRecord> records;
    std::optional<std::size_t> bankrupt_round;

    // Cost conventions, kept with the ledger so reports can state them.
    bool charges_entry_cost = false;
    bool charges_final_rebalance = false;

    double final_wealth() const noexcept;
    double total_turnover() const noexcept;

    bool operator==(const WealthLedger&) const = default;
};

WealthLedger run_ledger(std::span<const Portfolio> decisions, const MarketSequence& market,
                        const CommissionRate& rate, double initial_wealth = 1.0);

/// Plain product of <b_t, X_t>, no commissions.
double cumulative_wealth(std::span<const Portfolio> decisions, const MarketSequence& market);

std::string ledger_to_csv(const WealthLedger& ledger);

void to_json(nlohmann::json& j, const LedgerRecord& r);
void from_json(const nlohmann::json& j, LedgerRecord& r);
void to_json(nlohmann::json& j, const WealthLedger& l);
void from_json(const nlohmann::json& j, WealthLedger& l);

}  // namespace olps
