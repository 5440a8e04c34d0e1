#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "instances.hpp"
#include "olps/accounting.hpp"
#include "olps/errors.hpp"
#include "olps/cape.hpp"
#include "olps/harness.hpp"
#include "olps/solver.hpp"
#include "olps/strategies.hpp"

using namespace olps;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// A simplex point whose coordinates are multiples of `resolution`.
Vector lattice_simplex_point(std::mt19937_64& rng, Eigen::Index n, double resolution) {
    const auto steps = static_cast<long>(std::lround(1.0 / resolution));
    std::vector<long> cuts = {0, steps};
    for (Eigen::Index i = 1; i < n; ++i)
        cuts.push_back(std::uniform_int_distribution<long>(0, steps)(rng));
    std::sort(cuts.begin(), cuts.end());
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = static_cast<double>(cuts[static_cast<std::size_t>(i) + 1] - cuts[static_cast<std::size_t>(i)]) /
               static_cast<double>(steps);
    return v;
}

Outcome accounting_identity() {
    std::mt19937_64 rng(1001);
    const auto start = Clock::now();
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = uniform_int(rng, 1, 5);
        const std::size_t T = uniform_int(rng, 1, 50);
        const auto market = fixtures::random_market(rng, T, n);
        const auto decisions = fixtures::random_decisions(rng, T, n);
        const double ledger = run_ledger(decisions, market, CommissionRate(0.0)).final_wealth();
        double product = 1.0;
        for (std::size_t t = 0; t < T; ++t) {
            double gross = 0.0;
            for (std::size_t i = 0; i < n; ++i) gross += decisions[t][i] * market.day(t)[static_cast<Eigen::Index>(i)];
            product *= gross;
        }
        worst = std::max(worst, std::abs(ledger - product) / product);
    }
    const double elapsed = seconds_since(start);
    const bool ok = worst <= 1e-12 && elapsed < 5.0;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("1000 instances, worst relative error %.3g, %.2f s", worst, elapsed)};
}

Outcome gamma_monotonicity() {
    std::mt19937_64 rng(1002);
    const std::array<double, 5> gammas = {0.0, 0.0025, 0.005, 0.0075, 0.01};
    int violations = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = uniform_int(rng, 2, 8);
        const std::size_t T = uniform_int(rng, 1, 200);
        const auto market = fixtures::random_market(rng, T, n);
        const auto decisions = fixtures::random_decisions(rng, T, n);
        double previous = std::numeric_limits<double>::infinity();
        for (double g : gammas) {
            const double w = run_ledger(decisions, market, CommissionRate(g)).final_wealth();
            if (!(w <= previous)) ++violations;
            previous = w;
        }
    }
    return {violations == 0 ? Verdict::Pass : Verdict::Fail,
            fmt("100 instances x 5 rates, %.0f violations", violations)};
}

Outcome solver_oracle() {
    std::mt19937_64 rng(1003);
    constexpr double kResolution = 1e-3;
    const auto start = Clock::now();
    double worst_cape = 0.0, worst_olu = 0.0;

    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index m = 2 + rep % 2;
        CapeStepProblem p;
        p.w_current = AllocationVector(fixtures::random_simplex_point(rng, m));
        const Vector r = fixtures::random_relatives(rng, m);
        p.grad = -r / r.dot(p.w_current.weights());
        Matrix a = Matrix::Identity(m, m);
        const std::size_t history = uniform_int(rng, 0, 4);
        for (std::size_t k = 0; k < history; ++k) {
            const Vector rk = fixtures::random_relatives(rng, m);
            const Vector g = -rk / rk.dot(fixtures::random_simplex_point(rng, m));
            a += g * g.transpose();
        }
        a += p.grad * p.grad.transpose();
        p.metric = CurvatureMatrix(a);
        p.eta = 1.0;
        p.lambda = uniform_real(rng, 0.0, 0.05);
        const auto w = solve_cape_step(p);
        const auto oracle = brute_force_simplex_min([&](const Vector& v) { return p.objective(v); },
                                                    static_cast<std::size_t>(m), kResolution);
        worst_cape = std::max(worst_cape, std::abs(p.objective(w.weights()) - oracle.value));
    }

    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index n = 2 + rep % 2;
        const Vector x = fixtures::random_relatives(rng, n);
        const Portfolio b(lattice_simplex_point(rng, n, kResolution));
        const double eta = uniform_real(rng, 0.01, 1.0);
        const double lambda = uniform_real(rng, 0.0, 0.05);
        const auto sol = solve_olu_step(x, b, eta, lambda);
        const auto oracle = brute_force_simplex_min(
            [&](const Vector& v) { return olu_objective(v, x, b.weights(), eta, lambda); },
            static_cast<std::size_t>(n), kResolution);
        worst_olu = std::max(worst_olu,
                             std::abs(olu_objective(sol.weights(), x, b.weights(), eta, lambda) - oracle.value));
    }

    const double elapsed = seconds_since(start);
    const bool ok = worst_cape <= 1e-5 && worst_olu <= 1e-5 && elapsed < 60.0;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("worst objective gap cape %.3g, olu %.3g, %.1f s", worst_cape, worst_olu, elapsed)};
}

Outcome gradient_check() {
    std::mt19937_64 rng(1004);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = uniform_int(rng, 2, 6);
        const std::size_t d = uniform_int(rng, 1, 5);
        Matrix cols(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
        for (Eigen::Index j = 0; j < cols.cols(); ++j)
            cols.col(j) = fixtures::random_simplex_point(rng, cols.rows());
        const AugmentedPortfolioMatrix p_plus(cols);
        const AllocationVector w(fixtures::random_simplex_point(rng, cols.cols()));
        const Vector x = fixtures::random_relatives(rng, cols.rows());

        const Vector analytic = loss_gradient(w, x, p_plus);
        const double h = 1e-6;
        Vector numeric(analytic.size());
        for (Eigen::Index k = 0; k < numeric.size(); ++k) {
            Vector up = w.weights(), down = w.weights();
            up[k] += h;
            down[k] -= h;
            const double f_up = -std::log(x.dot(cols * up));
            const double f_down = -std::log(x.dot(cols * down));
            numeric[k] = (f_up - f_down) / (2.0 * h);
        }
        worst = std::max(worst, (analytic - numeric).norm() / analytic.norm());
        // The loss itself must agree with the same formula.
        worst = std::max(worst, std::abs(loss(w, x, p_plus) + std::log(x.dot(cols * w.weights()))));
    }
    return {worst <= 1e-5 ? Verdict::Pass : Verdict::Fail,
            fmt("100 instances, worst relative error %.3g", worst)};
}

MarketSequence lognormal_market(std::size_t n, std::size_t T, double mu, double sigma, std::uint64_t seed) {
    SyntheticMarketSpec spec;
    spec.n = n;
    spec.T = T;
    spec.seed = seed;
    spec.model = IidLognormal{Vector::Constant(static_cast<Eigen::Index>(n), mu),
                              Vector::Constant(static_cast<Eigen::Index>(n), sigma)};
    return generate_synthetic(spec);
}

Outcome hold_expert_avoidance() {
    const auto market = lognormal_market(5, 300, 0.0005, 0.02, 1005);
    const std::vector<std::string> names = {"ucrp", "eg", "pamr", "olmar"};
    const auto experts = simulate_experts(names, market, {});
    const CommissionRate rate(0.01);

    const auto sticky = run_cape(market, experts, CapeConfig{1.0, 1.0, 10.0});
    const auto ledger = run_ledger(sticky.decisions, market, rate);
    double max_turnover = 0.0, commission = 0.0;
    double wealth = ledger.initial_wealth;
    for (std::size_t t = 0; t < ledger.records.size(); ++t) {
        const auto& rec = ledger.records[t];
        if (t >= 10) {
            max_turnover = std::max(max_turnover, rec.turnover);
            commission += wealth * rec.gross_return * rec.commission_fraction;
        }
        wealth = rec.cumulative_wealth;
    }
    const double commission_share = commission / ledger.final_wealth();

    const auto free = run_cape(market, experts, CapeConfig{1.0, 1.0, 0.0});
    const double free_turnover = run_ledger(free.decisions, market, rate).total_turnover();

    const bool ok = max_turnover <= 1e-6 && commission_share <= 1e-4 && free_turnover > 0.0;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("lambda=10: max turnover %.3g, commission/wealth %.3g; lambda=0: turnover %.3g", max_turnover,
                commission_share, free_turnover)};
}

std::array<double, 3> regret_ratios(double sigma) {
    const auto market = lognormal_market(10, 10000, 0.0002, sigma, 1006);
    const std::vector<std::string> names = {"ucrp", "eg", "pamr", "olmar"};
    const auto experts = simulate_experts(names, market, {});
    const CapeConfig config;
    const auto traj = run_cape(market, experts, config);
    if (traj.bankrupt_round) throw NumericalError("cape went bankrupt");
    const std::vector<std::size_t> prefixes = {100, 1000, 10000};
    const auto trace = regret_trace(traj.expert_returns, traj.weights, config.lambda, prefixes);
    std::array<double, 3> ratio{};
    for (std::size_t k = 0; k < 3; ++k)
        ratio[k] = trace.regret[k] / std::log(static_cast<double>(prefixes[k]));
    return ratio;
}

// Default parameters on a 2% daily-volatility market decide the verdict; the
// calmer 1% market is reported alongside for context only.
Outcome regret_growth() {
    const auto start = Clock::now();
    const auto ratio = regret_ratios(0.02);
    const auto calm = regret_ratios(0.01);
    const double elapsed = seconds_since(start);
    const bool ok = ratio[2] <= 1.1 * ratio[1] && elapsed < 600.0;
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "regret/log T at 1e2, 1e3, 1e4: %.4g, %.4g, %.4g (sigma 0.01 for reference: %.4g, %.4g, %.4g); "
                  "%.1f s",
                  ratio[0], ratio[1], ratio[2], calm[0], calm[1], calm[2], elapsed);
    return {ok ? Verdict::Pass : Verdict::Fail, buf};
}

std::optional<fs::path> data_directory() {
    if (const char* env = std::getenv("OLPS_DATA_DIR")) {
        if (fs::is_directory(env)) return fs::path(env);
    }
    const fs::path fallback = OLPS_DEFAULT_DATA_DIR;
    if (fs::is_directory(fallback)) return fallback;
    return std::nullopt;
}

struct PublishedRow {
    std::string file;
    std::array<double, 4> ucrp;  // gamma = 0.25%, 0.5%, 0.75%, 1%
    double eg, anticor, pamr, olmar;
};

const std::vector<PublishedRow>& published_rows() {
    static const std::vector<PublishedRow> rows = {
        {"nyse_n.csv", {28.59, 25.9, 23.4, 21.2}, 31.0, 6.2e6, 1.2e6, 4e8},
        {"nyse_o.csv", {24.9, 22.9, 21.0, 19.4}, 27.09, 2.4e8, 5e15, 6e16},
        {"msci.csv", {0.91, 0.9, 0.89, 0.88}, 0.92, 3.2, 15.2, 14.8},
        {"djia.csv", {0.78, 0.78, 0.78, 0.78}, 0.8, 2.29, 0.68, 2.7},
        {"tse.csv", {1.55, 1.52, 1.48, 1.45}, 1.59, 39.36, 264.8, 69.9},
        {"sp500.csv", {1.60, 1.56, 1.52, 1.48}, 1.63, 5.9, 5.1, 16.9},
    };
    return rows;
}

ExperimentSpec table_spec(std::vector<std::string> strategies, std::vector<double> gammas) {
    ExperimentSpec spec;
    spec.strategies = std::move(strategies);
    spec.gammas = std::move(gammas);
    spec.threads = 0;
    return spec;
}

Outcome table_reproduction() {
    const auto dir = data_directory();
    if (!dir) return {Verdict::Skip, "no benchmark datasets (set OLPS_DATA_DIR)"};
    int checked = 0, failed = 0;
    std::string misses;
    auto check = [&](bool ok, const std::string& what) {
        ++checked;
        if (!ok) {
            ++failed;
            misses += " " + what;
        }
    };
    for (const auto& row : published_rows()) {
        const fs::path file = *dir / row.file;
        if (!fs::exists(file)) continue;
        const auto market = load_market_csv(file);
        const std::vector<double> gammas = {0.0025, 0.005, 0.0075, 0.01};
        const auto with_costs = run_experiment(table_spec({"ucrp"}, gammas), market);
        for (std::size_t k = 0; k < gammas.size(); ++k) {
            const double got = with_costs.find("ucrp", gammas[k])->final_wealth;
            check(std::abs(got / row.ucrp[k] - 1.0) <= 0.05, row.file + ":ucrp@" + format_double(gammas[k]));
        }
        const auto free = run_experiment(table_spec({"eg", "anticor", "pamr", "olmar"}, {0.0}), market);
        check(std::abs(free.find("eg", 0.0)->final_wealth / row.eg - 1.0) <= 0.10, row.file + ":eg");
        const std::map<std::string, double> reverting = {
            {"anticor", row.anticor}, {"pamr", row.pamr}, {"olmar", row.olmar}};
        for (const auto& [name, target] : reverting) {
            const double got = free.find(name, 0.0)->final_wealth;
            check(got > 0.0 && got <= 30.0 * target && got >= target / 30.0, row.file + ":" + name);
        }
    }
    if (checked == 0) return {Verdict::Skip, "no benchmark datasets found in " + dir->string()};
    return {failed == 0 ? Verdict::Pass : Verdict::Fail,
            std::to_string(checked - failed) + "/" + std::to_string(checked) + " cells" +
                (misses.empty() ? "" : "; missed:" + misses)};
}

Outcome qualitative_pattern() {
    const auto dir = data_directory();
    if (!dir || !fs::exists(*dir / "nyse_n.csv")) return {Verdict::Skip, "NYSE-N dataset not supplied"};
    const auto market = load_market_csv(*dir / "nyse_n.csv");
    auto spec = table_spec({"olmar", "cape-wf"}, {0.01});
    const auto report = run_experiment(spec, market);
    const double olmar = report.find("olmar", 0.01)->final_wealth;
    const double wf = report.find("cape-wf", 0.01)->final_wealth;
    return {olmar < 1.0 && wf > 1.0 ? Verdict::Pass : Verdict::Fail,
            fmt("olmar %.4g, cape-wf %.4g at 1%% commission", olmar, wf)};
}

Outcome walk_forward_plumbing() {
    const CommissionRate rate(0.01);
    std::vector<Portfolio> swinging;
    for (std::size_t t = 0; t < 12; ++t) swinging.push_back(Portfolio::vertex(2, t % 2));
    const std::vector<std::vector<Portfolio>> swing = {swinging};
    const MarketSequence flat("flat", {}, RowMatrix::Ones(12, 2));
    std::string notes;

    const auto state = init(1, 2, {}, nullptr);
    const std::vector<double> single = {0.005};
    const bool singleton = walk_forward_lambda(state, {&flat, swing, 0, 5}, single, rate) == 0.005;
    if (!singleton) notes += " singleton";

    const std::vector<std::vector<Portfolio>> still = {std::vector<Portfolio>(12, Portfolio::uniform(2))};
    const std::vector<double> shuffled = {0.05, 0.0, 0.01, 0.02};
    bool ties = true;
    for (int rep = 0; rep < 3; ++rep)
        ties = ties && walk_forward_lambda(state, {&flat, still, 0, 5}, shuffled, rate) == 0.0;
    if (!ties) notes += " tie-break";

    const Matrix first = base_matrix(swing, 0);
    const auto anchored = init(1, 2, {}, &first);
    const std::vector<double> grid = {0.0, 0.005, 0.01, 0.02};
    const WalkForwardWindow window{&flat, swing, 0, 8};
    bool increasing = true;
    double previous = 0.0;
    for (double l : grid) {
        const double score = score_lambda(anchored, window, l, rate);
        increasing = increasing && score > previous && score < 1.0;
        previous = score;
    }
    const bool constructed = increasing && walk_forward_lambda(anchored, window, grid, rate) == 0.02;
    if (!constructed) notes += " constructed";

    return {notes.empty() ? Verdict::Pass : Verdict::Fail,
            notes.empty() ? "singleton, tie-break and constructed flat-market examples exact"
                          : "failed:" + notes};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "accounting identity", accounting_identity},
        {2, "commission monotonicity", gamma_monotonicity},
        {3, "solver oracle equivalence", solver_oracle},
        {4, "loss gradient check", gradient_check},
        {5, "hold-expert avoidance", hold_expert_avoidance},
        {6, "empirical regret growth", regret_growth},
        {7, "benchmark table reproduction", table_reproduction},
        {8, "qualitative commission pattern", qualitative_pattern},
        {9, "walk-forward plumbing", walk_forward_plumbing},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {Verdict::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = out.verdict == Verdict::Pass ? "PASS" : out.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        if (out.verdict == Verdict::Fail) ++failures;
        std::printf("%s criterion %d (%s): %s\n", tag, c.id, c.name, out.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
