#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "olps/accounting.hpp"
#include "olps/cape.hpp"
#include "olps/market_data.hpp"
#include "olps/strategies.hpp"

namespace olps {

enum class CapeMode { Naive, WalkForward };
enum class Reselect { EveryRound, EveryWindow };

std::vector<double> default_lambda_grid();
std::vector<double> default_gamma_grid();

struct CapeSettings {
    CapeMode mode = CapeMode::Naive;
    double lambda = 0.005;
    double eta = 1.0;
    double epsilon = 1.0;
    std::size_t wf_window = 25;
    std::vector<double> lambda_grid = default_lambda_grid();
    Reselect reselect = Reselect::EveryRound;
    std::vector<std::string> experts = {"eg", "pamr", "anticor", "olmar"};
    /// Number of log-spaced prefixes in the regret trace; 0 means every round.
    std::size_t regret_points = 200;

    CapeConfig config() const { return {eta, epsilon, lambda}; }
};

struct DatasetSource {
    std::optional<std::filesystem::path> path;
    std::optional<SyntheticMarketSpec> synthetic;
};

/**
 * One experiment: a dataset, the strategies to run, and the commission grid.
 *
 * Strategy names are the base strategies (ucrp, eg, pamr, olmar, anticor, bcrp,
 * olu) plus cape-naive, cape-wf, and cape (resolved through cape.mode).
 */
struct ExperimentSpec {
    DatasetSource dataset;
    std::vector<std::string> strategies = {"ucrp", "eg", "pamr", "anticor", "olmar", "cape-naive", "cape-wf"};
    std::vector<double> gammas = default_gamma_grid();
    CapeSettings cape;
    StrategyParams params;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    /// Worker threads for independent cells; 0 picks hardware concurrency.
    std::size_t threads = 0;

    void validate() const;
};

ExperimentSpec parse_experiment_spec(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

MarketSequence load_dataset(const ExperimentSpec& spec);

struct CellResult {
    std::string strategy;
    double gamma = 0.0;
    double final_wealth = 0.0;
    WealthLedger ledger;
    bool failed = false;
    std::string error;
    std::optional<std::size_t> failed_round;

    bool operator==(const CellResult&) const = default;
};

/// Allocation time series of one CAPE run. `gamma` is set for walk-forward
/// runs, whose decisions depend on the commission rate.
struct CapeSeries {
    std::string variant;
    std::optional<double> gamma;
    std::vector<std::string> experts;         // base experts followed by "hold"
    std::vector<std::vector<double>> weights;  // per round, d+1 entries
    std::vector<double> lambdas;
    std::size_t warmup_rounds = 0;             // rounds played with the naive lambda

    bool operator==(const CapeSeries&) const = default;
};

struct RunReport {
    std::string dataset;
    std::size_t rounds = 0;
    std::size_t stocks = 0;
    std::vector<double> gammas;
    std::vector<std::string> strategies;
    std::vector<CellResult> cells;
    std::vector<CapeSeries> cape_series;
    std::optional<RegretTrace> regret;
    double wall_clock_seconds = 0.0;
    nlohmann::json metadata = nlohmann::json::object();

    const CellResult* find(const std::string& strategy, double gamma) const;
};

bool operator==(const RegretTrace& a, const RegretTrace& b);
/// Field-wise equality, wall-clock time included.
bool operator==(const RunReport& a, const RunReport& b);

RunReport run_experiment(const ExperimentSpec& spec);
RunReport run_experiment(const ExperimentSpec& spec, const MarketSequence& market);

/// Base decisions b_1..b_T for each named strategy (commission-free simulation).
std::vector<std::vector<Portfolio>> simulate_experts(std::span<const std::string> names,
                                                     const MarketSequence& market,
                                                     const StrategyParams& params);

/// Days [first_day, first_day + length) of the market together with the
/// precomputed base decisions used to replay them.
struct WalkForwardWindow {
    const MarketSequence* market = nullptr;
    std::span<const std::vector<Portfolio>> experts;
    std::size_t first_day = 0;
    std::size_t length = 0;
};

/// Net wealth (commissions at `rate` included) of replaying the window from
/// `checkpoint` with the given lambda.
double score_lambda(const EnsembleState& checkpoint, const WalkForwardWindow& window,
                    double lambda, const CommissionRate& rate);

/// Grid lambda with the highest replay score. Scores within a relative 1e-12
/// of the best are ties and resolve to the smaller lambda.
double walk_forward_lambda(const EnsembleState& checkpoint, const WalkForwardWindow& window,
                           std::span<const double> grid, const CommissionRate& rate);

/// CAPE with lambda re-selected by walk-forward replay. Rounds before the first
/// full window use `settings.lambda`.
CapeTrajectory run_cape_walk_forward(const MarketSequence& market,
                                     std::span<const std::vector<Portfolio>> experts,
                                     const CapeSettings& settings, const CommissionRate& rate);

struct SensitivityRow {
    std::size_t window = 0;
    double gamma = 0.0;
    double final_wealth = 0.0;
};

std::vector<SensitivityRow> sensitivity_sweep(const ExperimentSpec& spec,
                                              std::span<const std::size_t> windows);
std::vector<SensitivityRow> sensitivity_sweep(const ExperimentSpec& spec,
                                              const MarketSequence& market,
                                              std::span<const std::size_t> windows);

enum class ReportFormat { Csv, Json, Both };

/// Writes wealth_table.csv, ledger_<strategy>_<gamma>.csv, weights_cape.csv,
/// regret.csv, wealth_long.csv and/or report.json under `dir`.
std::vector<std::filesystem::path> emit_report(const RunReport& report,
                                               const std::filesystem::path& dir,
                                               ReportFormat format = ReportFormat::Both);

/// Rows = dataset x gamma, columns = strategies.
std::string wealth_table_csv(const RunReport& report);
std::string sensitivity_csv(std::span<const SensitivityRow> rows);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

}  // namespace olps
