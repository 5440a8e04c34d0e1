#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "olps/errors.hpp"
#include "olps/harness.hpp"
#include "olps/market_data.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string dataset;
    std::vector<double> gammas;
    std::optional<double> gamma;
    std::optional<double> lambda;
    std::string mode;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> strategies;
    std::vector<std::string> experts;
    std::optional<std::size_t> wf_window;
    std::vector<double> lambda_grid;
    std::string reselect;
    std::optional<double> eta;
    std::optional<double> epsilon;
    std::optional<std::size_t> threads;
    std::optional<std::size_t> regret_points;
    std::string format = "both";
};

void add_spec_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Experiment config (JSON)");
    cmd->add_option("--dataset", o.dataset, "Market CSV of price relatives (overrides config)");
    cmd->add_option("--gamma", o.gamma, "Single commission rate");
    cmd->add_option("--gammas", o.gammas, "Commission-rate grid")->delimiter(',');
    cmd->add_option("--lambda", o.lambda, "Fixed CAPE lambda (naive mode and WF warmup)");
    cmd->add_option("--mode", o.mode, "CAPE mode for the 'cape' strategy")
        ->check(CLI::IsMember({"naive", "wf"}));
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--seed", o.seed, "Seed for synthetic datasets");
    cmd->add_option("--strategies", o.strategies, "Strategies to run")->delimiter(',');
    cmd->add_option("--experts", o.experts, "Base experts for CAPE")->delimiter(',');
    cmd->add_option("--wf-window", o.wf_window, "Walk-forward window length");
    cmd->add_option("--lambda-grid", o.lambda_grid, "Walk-forward lambda grid")->delimiter(',');
    cmd->add_option("--reselect", o.reselect, "Walk-forward reselection")
        ->check(CLI::IsMember({"every_round", "every_window"}));
    cmd->add_option("--eta", o.eta, "CAPE step size");
    cmd->add_option("--epsilon", o.epsilon, "CAPE initial curvature");
    cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");
    cmd->add_option("--regret-points", o.regret_points, "Prefixes in the regret trace (0 = all)");
    cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"csv", "json", "both"}));
}

olps::ExperimentSpec build_spec(const Overrides& o) {
    olps::ExperimentSpec spec;
    if (!o.config.empty()) spec = olps::load_experiment_spec(o.config);
    if (o.seed) {
        spec.seed = *o.seed;
        if (spec.dataset.synthetic) spec.dataset.synthetic->seed = *o.seed;
    }
    if (!o.dataset.empty()) {
        spec.dataset.path = o.dataset;
        spec.dataset.synthetic.reset();
    }
    if (!o.gammas.empty()) spec.gammas = o.gammas;
    if (o.gamma) spec.gammas = {*o.gamma};
    if (o.lambda) spec.cape.lambda = *o.lambda;
    if (o.mode == "naive") spec.cape.mode = olps::CapeMode::Naive;
    if (o.mode == "wf") spec.cape.mode = olps::CapeMode::WalkForward;
    if (!o.out.empty()) spec.output_dir = o.out;
    if (!o.strategies.empty()) spec.strategies = o.strategies;
    if (!o.experts.empty()) spec.cape.experts = o.experts;
    if (o.wf_window) spec.cape.wf_window = *o.wf_window;
    if (!o.lambda_grid.empty()) spec.cape.lambda_grid = o.lambda_grid;
    if (o.reselect == "every_round") spec.cape.reselect = olps::Reselect::EveryRound;
    if (o.reselect == "every_window") spec.cape.reselect = olps::Reselect::EveryWindow;
    if (o.eta) spec.cape.eta = *o.eta;
    if (o.epsilon) spec.cape.epsilon = *o.epsilon;
    if (o.threads) spec.threads = *o.threads;
    if (o.regret_points) spec.cape.regret_points = *o.regret_points;
    spec.validate();
    return spec;
}

olps::ReportFormat parse_format(const std::string& f) {
    if (f == "csv") return olps::ReportFormat::Csv;
    if (f == "json") return olps::ReportFormat::Json;
    return olps::ReportFormat::Both;
}

void print_table(const olps::RunReport& report) {
    std::cout << olps::wealth_table_csv(report);
    for (const auto& c : report.cells)
        if (c.failed) std::cerr << "warning: " << c.strategy << " at gamma " << c.gamma << " failed: " << c.error << '\n';
}

int run_and_emit(const olps::ExperimentSpec& spec, const std::string& format) {
    const auto report = olps::run_experiment(spec);
    olps::emit_report(report, spec.output_dir, parse_format(format));
    print_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Commission-aware online portfolio selection"};
    app.require_subcommand(1);

    Overrides run_opts, sweep_opts, calib_opts, sens_opts;
    auto* run = app.add_subcommand("run", "Run one experiment");
    add_spec_options(run, run_opts);
    auto* sweep = app.add_subcommand("sweep", "Commission grid x strategies table");
    add_spec_options(sweep, sweep_opts);
    auto* calibrate = app.add_subcommand("calibrate", "Compare fixed-lambda and walk-forward CAPE");
    add_spec_options(calibrate, calib_opts);
    auto* sensitivity = app.add_subcommand("sensitivity", "Walk-forward window-size sweep");
    add_spec_options(sensitivity, sens_opts);
    std::vector<std::size_t> windows = {10, 15, 20, 25, 30, 35, 40, 45, 50};
    sensitivity->add_option("--windows", windows, "Window sizes")->delimiter(',');

    auto* synth = app.add_subcommand("synth", "Generate a synthetic market CSV");
    std::string synth_spec, synth_out, synth_model = "mean-reverting";
    std::size_t synth_n = 5, synth_t = 500;
    std::uint64_t synth_seed = 0;
    double synth_mu = 0.0005, synth_sigma = 0.02;
    synth->add_option("--spec", synth_spec, "Synthetic market spec (JSON); flags are ignored when given");
    synth->add_option("--n", synth_n, "Number of stocks");
    synth->add_option("--T", synth_t, "Number of rounds");
    synth->add_option("--model", synth_model, "Market model")
        ->check(CLI::IsMember({"iid-lognormal", "mean-reverting"}));
    synth->add_option("--mu", synth_mu, "Mean log relative (iid-lognormal)");
    synth->add_option("--sigma", synth_sigma, "Stddev of log relative (iid-lognormal)");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output CSV path")->required();

    auto* report_cmd = app.add_subcommand("report", "Re-emit CSV outputs from a report.json");
    std::string report_in, report_out;
    report_cmd->add_option("--in", report_in, "report.json to read")->required();
    report_cmd->add_option("--out", report_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run) return run_and_emit(build_spec(run_opts), run_opts.format);

        if (*sweep) {
            auto spec = build_spec(sweep_opts);
            if (sweep_opts.gammas.empty() && !sweep_opts.gamma && sweep_opts.config.empty())
                spec.gammas = olps::default_gamma_grid();
            return run_and_emit(spec, sweep_opts.format);
        }

        if (*calibrate) {
            auto spec = build_spec(calib_opts);
            spec.strategies = {"cape-naive", "cape-wf"};
            return run_and_emit(spec, calib_opts.format);
        }

        if (*sensitivity) {
            auto spec = build_spec(sens_opts);
            const auto rows = olps::sensitivity_sweep(spec, windows);
            const auto csv = olps::sensitivity_csv(rows);
            std::filesystem::create_directories(spec.output_dir);
            std::ofstream(spec.output_dir / "sensitivity.csv") << csv;
            std::cout << csv;
            return 0;
        }

        if (*synth) {
            olps::SyntheticMarketSpec spec;
            if (!synth_spec.empty()) {
                std::ifstream in(synth_spec);
                if (!in) throw olps::ConfigError("cannot open " + synth_spec);
                nlohmann::json j;
                try {
                    in >> j;
                } catch (const nlohmann::json::exception& e) {
                    throw olps::ConfigError(std::string("synthetic spec: ") + e.what());
                }
                spec = j.get<olps::SyntheticMarketSpec>();
            } else {
                spec.n = synth_n;
                spec.T = synth_t;
                spec.seed = synth_seed;
                if (synth_model == "iid-lognormal")
                    spec.model = olps::IidLognormal{
                        olps::Vector::Constant(static_cast<Eigen::Index>(synth_n), synth_mu),
                        olps::Vector::Constant(static_cast<Eigen::Index>(synth_n), synth_sigma)};
                else
                    spec.model = olps::MeanReverting{};
            }
            olps::write_market_csv(olps::generate_synthetic(spec), synth_out);
            return 0;
        }

        if (*report_cmd) {
            std::ifstream in(report_in);
            if (!in) throw olps::ConfigError("cannot open " + report_in);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw olps::ConfigError(std::string("report: ") + e.what());
            }
            const auto report = olps::report_from_json(j);
            olps::emit_report(report, report_out, olps::ReportFormat::Csv);
            print_table(report);
            return 0;
        }
    } catch (const olps::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const olps::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const olps::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
