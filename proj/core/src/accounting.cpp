#include "olps/accounting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "olps/errors.hpp"

namespace olps {

Portfolio::Portfolio(Vector weights) : weights_(std::move(weights)) {
    if (weights_.size() == 0) throw std::invalid_argument("portfolio must be non-empty");
    for (auto& w : weights_) {
        if (!std::isfinite(w)) throw std::invalid_argument("portfolio weight is not finite");
        if (w < 0.0) {
            if (w < -kClampTolerance)
                throw std::invalid_argument("portfolio weight " + std::to_string(w) +
                                            " is negative");
            w = 0.0;
        }
    }
    const double sum = weights_.sum();
    if (std::abs(sum - 1.0) > kSumTolerance)
        throw std::invalid_argument("portfolio weights sum to " + std::to_string(sum));
}

Portfolio Portfolio::uniform(std::size_t n) {
    if (n == 0) throw std::invalid_argument("portfolio must be non-empty");
    return Portfolio(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

Portfolio Portfolio::vertex(std::size_t n, std::size_t i) {
    if (i >= n) throw std::invalid_argument("vertex index out of range");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
    v[static_cast<Eigen::Index>(i)] = 1.0;
    return Portfolio(std::move(v));
}

CommissionRate::CommissionRate(double gamma) : gamma_(gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("commission rate must lie in [0, 1]");
}

Portfolio drift(const Portfolio& b, const Eigen::Ref<const Vector>& x) {
    if (static_cast<std::size_t>(x.size()) != b.size())
        throw std::invalid_argument("drift: dimension mismatch");
    const double gross = b.weights().dot(x);
    if (!(gross > 0.0)) throw BankruptError(0);
    return Portfolio(b.weights().cwiseProduct(x) / gross);
}

double l1_distance(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l1_distance: dimension mismatch");
    return (a - b).lpNorm<1>();
}

double rebalance_cost_fraction(const Portfolio& b_hat, const Portfolio& b_next,
                               const CommissionRate& rate) {
    return rate.gamma() * 0.5 * l1_distance(b_hat.weights(), b_next.weights());
}

Vector project_to_simplex_raw(const Vector& v) {
    const auto n = v.size();
    if (n == 0) throw std::invalid_argument("project_to_simplex: empty vector");
    if (!v.allFinite()) throw std::invalid_argument("project_to_simplex: non-finite entry");

    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumsum += u[static_cast<std::size_t>(j)];
        const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

Portfolio project_to_simplex(const Vector& v) { return Portfolio(project_to_simplex_raw(v)); }

double WealthLedger::final_wealth() const noexcept {
    return records.empty() ? initial_wealth : records.back().cumulative_wealth;
}

double WealthLedger::total_turnover() const noexcept {
    return std::accumulate(records.begin(), records.end(), 0.0,
                           [](double acc, const LedgerRecord& r) { return acc + r.turnover; });
}

WealthLedger run_ledger(std::span<const Portfolio> decisions, const MarketSequence& market,
                        const CommissionRate& rate, double initial_wealth) {
    const std::size_t T = market.rounds();
    if (decisions.size() != T)
        throw std::invalid_argument("run_ledger: " + std::to_string(decisions.size()) +
                                    " decisions for " + std::to_string(T) + " rounds");
    for (const auto& b : decisions)
        if (b.size() != market.stocks())
            throw std::invalid_argument("run_ledger: decision dimension mismatch");

    WealthLedger ledger;
    ledger.initial_wealth = initial_wealth;
    ledger.gamma = rate.gamma();
    ledger.records.reserve(T);

    const double half_gamma = rate.gamma() * 0.5;
    double wealth = initial_wealth;
    for (std::size_t t = 0; t < T; ++t) {
        const auto x = market.day(t);
        LedgerRecord rec;
        rec.round = t + 1;
        rec.gross_return = decisions[t].weights().dot(x);
        if (!(rec.gross_return > 0.0)) {
            rec.gross_return = 0.0;
            rec.cumulative_wealth = 0.0;
            ledger.records.push_back(rec);
            ledger.bankrupt_round = t + 1;
            return ledger;
        }
        if (t + 1 < T) {
            const Vector b_hat = decisions[t].weights().cwiseProduct(x) / rec.gross_return;
            rec.turnover = (decisions[t + 1].weights() - b_hat).lpNorm<1>();
        }
        rec.commission_fraction = half_gamma * rec.turnover;
        rec.net_factor = rec.gross_return * (1.0 - rec.commission_fraction);
        wealth *= rec.net_factor;
        rec.cumulative_wealth = wealth;
        ledger.records.push_back(rec);
    }
    return ledger;
}

double cumulative_wealth(std::span<const Portfolio> decisions, const MarketSequence& market) {
    if (decisions.size() != market.rounds())
        throw std::invalid_argument("cumulative_wealth: decision count mismatch");
    double wealth = 1.0;
    for (std::size_t t = 0; t < decisions.size(); ++t)
        wealth *= decisions[t].weights().dot(market.day(t));
    return wealth;
}

std::string ledger_to_csv(const WealthLedger& ledger) {
    std::string out = "t,gross_return,turnover,commission_fraction,net_factor,cumulative_wealth\n";
    for (const auto& r : ledger.records) {
        out += std::to_string(r.round);
        for (double v : {r.gross_return, r.turnover, r.commission_fraction, r.net_factor,
                         r.cumulative_wealth}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

void to_json(nlohmann::json& j, const LedgerRecord& r) {
    j = {{"t", r.round},
         {"gross_return", r.gross_return},
         {"turnover", r.turnover},
         {"commission_fraction", r.commission_fraction},
         {"net_factor", r.net_factor},
         {"cumulative_wealth", r.cumulative_wealth}};
}

void from_json(const nlohmann::json& j, LedgerRecord& r) {
    j.at("t").get_to(r.round);
    j.at("gross_return").get_to(r.gross_return);
    j.at("turnover").get_to(r.turnover);
    j.at("commission_fraction").get_to(r.commission_fraction);
    j.at("net_factor").get_to(r.net_factor);
    j.at("cumulative_wealth").get_to(r.cumulative_wealth);
}

void to_json(nlohmann::json& j, const WealthLedger& l) {
    j = {{"initial_wealth", l.initial_wealth},
         {"gamma", l.gamma},
         {"records", l.records},
         {"charges_entry_cost", l.charges_entry_cost},
         {"charges_final_rebalance", l.charges_final_rebalance}};
    j["bankrupt_round"] = l.bankrupt_round ? nlohmann::json(*l.bankrupt_round) : nlohmann::json();
}

void from_json(const nlohmann::json& j, WealthLedger& l) {
    j.at("initial_wealth").get_to(l.initial_wealth);
    j.at("gamma").get_to(l.gamma);
    j.at("records").get_to(l.records);
    l.charges_entry_cost = j.value("charges_entry_cost", false);
    l.charges_final_rebalance = j.value("charges_final_rebalance", false);
    if (j.contains("bankrupt_round") && !j.at("bankrupt_round").is_null())
        l.bankrupt_round = j.at("bankrupt_round").get<std::size_t>();
    else
        l.bankrupt_round.reset();
}

}  // namespace olps
