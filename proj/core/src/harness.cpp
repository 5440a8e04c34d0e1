#include "olps/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <thread>

#include "olps/errors.hpp"

namespace olps {

std::vector<double> default_lambda_grid() {
    return {0.0, 0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05};
}

std::vector<double> default_gamma_grid() { return {0.0025, 0.005, 0.0075, 0.01}; }

namespace {

bool is_cape_name(const std::string& name) {
    return name == "cape" || name == "cape-naive" || name == "cape-wf";
}

CapeMode resolve_mode(const std::string& name, CapeMode configured) {
    if (name == "cape-naive") return CapeMode::Naive;
    if (name == "cape-wf") return CapeMode::WalkForward;
    return configured;
}

// Runs fn(0..count-1) on up to `threads` workers. Each index is claimed by
// exactly one worker through an atomic counter.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t k = 0; k < threads; ++k)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

struct Failure {
    std::string message;
    std::optional<std::size_t> round;
};

template <class F>
std::optional<Failure> capture(F&& f) {
    try {
        f();
    } catch (const BankruptError& e) {
        return Failure{e.what(), e.round() ? std::optional<std::size_t>(e.round()) : std::nullopt};
    } catch (const NumericalError& e) {
        return Failure{e.what(), std::nullopt};
    } catch (const std::invalid_argument& e) {
        return Failure{e.what(), std::nullopt};
    }
    return std::nullopt;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (!dataset.path && !dataset.synthetic) throw ConfigError("experiment needs a dataset");
    if (dataset.synthetic) dataset.synthetic->validate();
    for (double g : gammas)
        if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("commission rates must lie in [0, 1]");
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        const auto& s = strategies[i];
        if (!is_base_strategy(s) && !is_cape_name(s))
            throw ConfigError("unknown strategy '" + s + "'");
        if (std::find(strategies.begin(), strategies.begin() + static_cast<long>(i), s) !=
            strategies.begin() + static_cast<long>(i))
            throw ConfigError("duplicate strategy '" + s + "'");
    }
    params.validate();
    cape.config().validate();
    if (cape.wf_window < 2) throw ConfigError("wf_window must be at least 2");
    if (cape.lambda_grid.empty()) throw ConfigError("lambda_grid must be non-empty");
    if (!std::is_sorted(cape.lambda_grid.begin(), cape.lambda_grid.end()))
        throw ConfigError("lambda_grid must be sorted");
    for (double l : cape.lambda_grid)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda_grid entries must be non-negative");
    if (cape.experts.empty()) throw ConfigError("cape needs at least one base expert");
    for (const auto& e : cape.experts)
        if (!is_base_strategy(e)) throw ConfigError("cape expert '" + e + "' is not a base strategy");
}

MarketSequence load_dataset(const ExperimentSpec& spec) {
    if (spec.dataset.path) return load_market_csv(*spec.dataset.path);
    if (spec.dataset.synthetic) return generate_synthetic(*spec.dataset.synthetic);
    throw ConfigError("experiment needs a dataset");
}

const CellResult* RunReport::find(const std::string& strategy, double gamma) const {
    for (const auto& c : cells)
        if (c.strategy == strategy && c.gamma == gamma) return &c;
    return nullptr;
}

std::vector<std::vector<Portfolio>> simulate_experts(std::span<const std::string> names,
                                                     const MarketSequence& market,
                                                     const StrategyParams& params) {
    std::vector<std::vector<Portfolio>> out;
    out.reserve(names.size());
    for (const auto& name : names) {
        auto strategy = make_strategy(name, market.stocks(), params, &market);
        out.push_back(simulate(*strategy, market));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Walk-forward calibration

double score_lambda(const EnsembleState& checkpoint, const WalkForwardWindow& window, double lambda,
                    const CommissionRate& rate) {
    if (!window.market) throw std::invalid_argument("score_lambda: window has no market");
    const std::size_t T = window.market->rounds();
    if (window.length == 0 || window.first_day + window.length > T)
        throw std::invalid_argument("score_lambda: window out of range");

    EnsembleState state = checkpoint;
    state.config.lambda = lambda;
    const double half_gamma = 0.5 * rate.gamma();
    double wealth = 1.0;
    Vector holdings = checkpoint.b_hat.weights();
    for (std::size_t k = 0; k < window.length; ++k) {
        const std::size_t day = window.first_day + k;
        RoundOutcome out;
        try {
            out = advance(state, window.market->day(day),
                          base_matrix(window.experts, std::min(day + 1, T - 1)));
        } catch (const BankruptError&) {
            return 0.0;
        }
        if (day > 0)
            wealth *= 1.0 - half_gamma * (out.played.weights() - holdings).lpNorm<1>();
        wealth *= out.gross_return;
        holdings = state.b_hat.weights();
    }
    return wealth;
}

double walk_forward_lambda(const EnsembleState& checkpoint, const WalkForwardWindow& window,
                           std::span<const double> grid, const CommissionRate& rate) {
    if (grid.empty()) throw ConfigError("lambda grid is empty");
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    double best_lambda = sorted.front();
    double best_score = score_lambda(checkpoint, window, best_lambda, rate);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double score = score_lambda(checkpoint, window, sorted[i], rate);
        if (score > best_score + 1e-12 * std::abs(best_score)) {
            best_score = score;
            best_lambda = sorted[i];
        }
    }
    return best_lambda;
}

CapeTrajectory run_cape_walk_forward(const MarketSequence& market,
                                     std::span<const std::vector<Portfolio>> experts,
                                     const CapeSettings& settings, const CommissionRate& rate) {
    const std::size_t T = market.rounds();
    if (T == 0) throw DataError("market has no rounds");
    if (settings.wf_window < 2) throw ConfigError("wf_window must be at least 2");
    for (const auto& e : experts)
        if (e.size() != T) throw std::invalid_argument("walk-forward: expert decision count mismatch");

    const std::size_t w = settings.wf_window;
    const Matrix first = base_matrix(experts, 0);
    EnsembleState state = init(experts.size(), market.stocks(), settings.config(), &first);
    std::deque<EnsembleState> checkpoints;  // states at the start of the last w rounds

    CapeTrajectory traj;
    double lambda = settings.lambda;
    for (std::size_t t = 0; t < T; ++t) {
        checkpoints.push_back(state);
        if (checkpoints.size() > w) checkpoints.pop_front();

        const std::size_t round = t + 1;
        const bool reselect = settings.reselect == Reselect::EveryRound ? round >= w
                                                                        : round >= w && round % w == 0;
        if (reselect) {
            const WalkForwardWindow window{&market, experts, round - w, w};
            lambda = walk_forward_lambda(checkpoints.front(), window, settings.lambda_grid, rate);
        }
        state.config.lambda = lambda;

        const auto x = market.day(t);
        try {
            RoundOutcome out = advance(state, x, base_matrix(experts, std::min(t + 1, T - 1)));
            traj.decisions.push_back(std::move(out.played));
            traj.weights.push_back(std::move(out.allocation));
            traj.expert_returns.push_back(std::move(out.expert_returns));
            traj.lambdas.push_back(lambda);
        } catch (const BankruptError&) {
            traj.bankrupt_round = round;
            const Portfolio b = stock_portfolio(state.p_plus, state.w);
            const Vector r = state.p_plus.columns().transpose() * x;
            for (std::size_t s = t; s < T; ++s) {
                traj.decisions.push_back(b);
                traj.weights.push_back(state.w);
                traj.expert_returns.push_back(r);
                traj.lambdas.push_back(lambda);
            }
            break;
        }
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

CapeSeries make_series(const std::string& variant, std::optional<double> gamma,
                       const std::vector<std::string>& experts, const CapeTrajectory& traj,
                       std::size_t warmup) {
    CapeSeries s;
    s.variant = variant;
    s.gamma = gamma;
    s.experts = experts;
    s.experts.push_back("hold");
    s.weights.reserve(traj.weights.size());
    for (const auto& w : traj.weights) s.weights.emplace_back(w.weights().begin(), w.weights().end());
    s.lambdas = traj.lambdas;
    s.warmup_rounds = warmup;
    return s;
}

CellResult ledger_cell(const std::string& strategy, double gamma, std::span<const Portfolio> decisions,
                       const MarketSequence& market) {
    CellResult cell;
    cell.strategy = strategy;
    cell.gamma = gamma;
    cell.ledger = run_ledger(decisions, market, CommissionRate(gamma));
    cell.final_wealth = cell.ledger.final_wealth();
    return cell;
}

CellResult failed_cell(const std::string& strategy, double gamma, const Failure& f) {
    CellResult cell;
    cell.strategy = strategy;
    cell.gamma = gamma;
    cell.failed = true;
    cell.error = f.message;
    cell.failed_round = f.round;
    return cell;
}

}  // namespace

RunReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    return run_experiment(spec, load_dataset(spec));
}

RunReport run_experiment(const ExperimentSpec& spec, const MarketSequence& market) {
    spec.validate();
    const auto started = std::chrono::steady_clock::now();
    const std::size_t T = market.rounds();
    if (T == 0) throw DataError("market has no rounds");

    bool wants_naive = false, wants_wf = false;
    for (const auto& s : spec.strategies) {
        if (!is_cape_name(s)) continue;
        (resolve_mode(s, spec.cape.mode) == CapeMode::Naive ? wants_naive : wants_wf) = true;
    }

    // Base decision sequences, one simulation per distinct name.
    std::vector<std::string> base_names;
    auto add_base = [&](const std::string& n) {
        if (std::find(base_names.begin(), base_names.end(), n) == base_names.end()) base_names.push_back(n);
    };
    for (const auto& s : spec.strategies)
        if (is_base_strategy(s)) add_base(s);
    if (wants_naive || wants_wf)
        for (const auto& e : spec.cape.experts) add_base(e);

    std::vector<std::vector<Portfolio>> base(base_names.size());
    std::vector<std::optional<Failure>> base_failure(base_names.size());
    parallel_for(base_names.size(), spec.threads, [&](std::size_t i) {
        base_failure[i] = capture([&] {
            auto strategy = make_strategy(base_names[i], market.stocks(), spec.params, &market);
            base[i] = simulate(*strategy, market);
        });
    });
    auto base_index = [&](const std::string& n) {
        return static_cast<std::size_t>(std::find(base_names.begin(), base_names.end(), n) - base_names.begin());
    };

    std::vector<std::vector<Portfolio>> experts;
    std::optional<Failure> expert_failure;
    if (wants_naive || wants_wf) {
        for (const auto& e : spec.cape.experts) {
            const std::size_t i = base_index(e);
            if (base_failure[i]) {
                expert_failure = Failure{"base expert " + e + " failed: " + base_failure[i]->message,
                                         base_failure[i]->round};
                break;
            }
            experts.push_back(base[i]);
        }
    }

    // CAPE runs: one naive trajectory, one walk-forward trajectory per gamma.
    const std::size_t wf_jobs = wants_wf ? spec.gammas.size() : 0;
    const std::size_t jobs = (wants_naive ? 1 : 0) + wf_jobs;
    std::vector<CapeTrajectory> cape_runs(jobs);
    std::vector<std::optional<Failure>> cape_failure(jobs);
    if (!expert_failure) {
        parallel_for(jobs, spec.threads, [&](std::size_t j) {
            cape_failure[j] = capture([&] {
                if (wants_naive && j == 0) {
                    cape_runs[j] = run_cape(market, experts, spec.cape.config());
                } else {
                    const double gamma = spec.gammas[j - (wants_naive ? 1 : 0)];
                    cape_runs[j] = run_cape_walk_forward(market, experts, spec.cape, CommissionRate(gamma));
                }
            });
        });
    } else {
        for (auto& f : cape_failure) f = expert_failure;
    }

    RunReport report;
    report.dataset = market.name();
    report.rounds = T;
    report.stocks = market.stocks();
    report.gammas = spec.gammas;
    report.strategies = spec.strategies;

    const std::size_t naive_job = 0;
    auto wf_job = [&](std::size_t g) { return (wants_naive ? 1 : 0) + g; };

    for (const auto& s : spec.strategies) {
        for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
            const double gamma = spec.gammas[g];
            const std::optional<Failure>* failure = nullptr;
            const std::vector<Portfolio>* decisions = nullptr;
            if (is_base_strategy(s)) {
                const std::size_t i = base_index(s);
                failure = &base_failure[i];
                decisions = &base[i];
            } else {
                const std::size_t j = resolve_mode(s, spec.cape.mode) == CapeMode::Naive ? naive_job : wf_job(g);
                failure = &cape_failure[j];
                decisions = &cape_runs[j].decisions;
            }
            if (*failure)
                report.cells.push_back(failed_cell(s, gamma, **failure));
            else
                report.cells.push_back(ledger_cell(s, gamma, *decisions, market));
        }
    }

    if (wants_naive && !cape_failure[naive_job]) {
        const auto& traj = cape_runs[naive_job];
        report.cape_series.push_back(make_series("cape-naive", std::nullopt, spec.cape.experts, traj, 0));
        if (!traj.bankrupt_round) {
            const auto prefixes = log_spaced_prefixes(T, spec.cape.regret_points);
            report.regret = regret_trace(traj.expert_returns, traj.weights, spec.cape.lambda, prefixes);
        }
    }
    for (std::size_t g = 0; g < wf_jobs; ++g) {
        if (cape_failure[wf_job(g)]) continue;
        report.cape_series.push_back(make_series("cape-wf", spec.gammas[g], spec.cape.experts,
                                                 cape_runs[wf_job(g)],
                                                 std::min(T, spec.cape.wf_window - 1)));
    }

    report.metadata = {
        {"seed", spec.seed},
        {"entry_commission", false},
        {"final_round_commission", false},
        {"wf_scoring", "net wealth including commission at the run's gamma"},
        {"wf_window", spec.cape.wf_window},
        {"wf_reselect", spec.cape.reselect == Reselect::EveryRound ? "every_round" : "every_window"},
        {"cape_mode", spec.cape.mode == CapeMode::Naive ? "naive" : "wf"},
        {"lambda", spec.cape.lambda},
        {"eta", spec.cape.eta},
        {"epsilon", spec.cape.epsilon},
        {"warnings", market.warnings()},
    };
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::vector<SensitivityRow> sensitivity_sweep(const ExperimentSpec& spec,
                                              std::span<const std::size_t> windows) {
    spec.validate();
    return sensitivity_sweep(spec, load_dataset(spec), windows);
}

std::vector<SensitivityRow> sensitivity_sweep(const ExperimentSpec& spec, const MarketSequence& market,
                                              std::span<const std::size_t> windows) {
    spec.validate();
    for (std::size_t w : windows)
        if (w < 2) throw ConfigError("sensitivity windows must be at least 2");
    const auto experts = simulate_experts(spec.cape.experts, market, spec.params);

    std::vector<SensitivityRow> rows(windows.size() * spec.gammas.size());
    parallel_for(rows.size(), spec.threads, [&](std::size_t k) {
        const std::size_t wi = k / spec.gammas.size();
        const double gamma = spec.gammas[k % spec.gammas.size()];
        CapeSettings settings = spec.cape;
        settings.mode = CapeMode::WalkForward;
        settings.wf_window = windows[wi];
        const CommissionRate rate(gamma);
        const auto traj = run_cape_walk_forward(market, experts, settings, rate);
        rows[k] = {windows[wi], gamma, run_ledger(traj.decisions, market, rate).final_wealth()};
    });
    return rows;
}

}  // namespace olps
