#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "olps/errors.hpp"
#include "olps/harness.hpp"

namespace olps {

namespace {

using nlohmann::json;

template <class T>
json optional_to_json(const std::optional<T>& v) {
    return v ? json(*v) : json();
}

template <class T>
std::optional<T> optional_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

CapeMode parse_mode(const std::string& s) {
    if (s == "naive" || s == "Naive") return CapeMode::Naive;
    if (s == "wf" || s == "WF" || s == "walk-forward") return CapeMode::WalkForward;
    throw ConfigError("cape.mode must be 'naive' or 'wf', got '" + s + "'");
}

Reselect parse_reselect(const std::string& s) {
    if (s == "every_round") return Reselect::EveryRound;
    if (s == "every_window") return Reselect::EveryWindow;
    throw ConfigError("cape.reselect must be 'every_round' or 'every_window', got '" + s + "'");
}

CapeSettings parse_cape(const json& j, CapeSettings c) {
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.lambda = j.value("lambda", c.lambda);
    c.eta = j.value("eta", c.eta);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.wf_window = j.value("wf_window", c.wf_window);
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
    if (j.contains("reselect")) c.reselect = parse_reselect(j.at("reselect").get<std::string>());
    c.experts = j.value("experts", c.experts);
    c.regret_points = j.value("regret_points", c.regret_points);
    return c;
}

json cape_to_json(const CapeSettings& c) {
    return {{"mode", c.mode == CapeMode::Naive ? "naive" : "wf"},
            {"lambda", c.lambda},
            {"eta", c.eta},
            {"epsilon", c.epsilon},
            {"wf_window", c.wf_window},
            {"lambda_grid", c.lambda_grid},
            {"reselect", c.reselect == Reselect::EveryRound ? "every_round" : "every_window"},
            {"experts", c.experts},
            {"regret_points", c.regret_points}};
}

std::string strategy_name(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_object() && j.contains("name")) return j.at("name").get<std::string>();
    throw ConfigError("strategy entries must be names or objects with a 'name' field");
}

json cell_to_json(const CellResult& c) {
    return {{"strategy", c.strategy},
            {"gamma", c.gamma},
            {"final_wealth", c.final_wealth},
            {"ledger", c.ledger},
            {"failed", c.failed},
            {"error", c.error},
            {"failed_round", optional_to_json(c.failed_round)}};
}

CellResult cell_from_json(const json& j) {
    CellResult c;
    j.at("strategy").get_to(c.strategy);
    j.at("gamma").get_to(c.gamma);
    j.at("final_wealth").get_to(c.final_wealth);
    j.at("ledger").get_to(c.ledger);
    c.failed = j.value("failed", false);
    c.error = j.value("error", std::string());
    c.failed_round = optional_from_json<std::size_t>(j, "failed_round");
    return c;
}

json series_to_json(const CapeSeries& s) {
    return {{"variant", s.variant},       {"gamma", optional_to_json(s.gamma)},
            {"experts", s.experts},       {"weights", s.weights},
            {"lambdas", s.lambdas},       {"warmup_rounds", s.warmup_rounds}};
}

CapeSeries series_from_json(const json& j) {
    CapeSeries s;
    j.at("variant").get_to(s.variant);
    s.gamma = optional_from_json<double>(j, "gamma");
    j.at("experts").get_to(s.experts);
    j.at("weights").get_to(s.weights);
    j.at("lambdas").get_to(s.lambdas);
    j.at("warmup_rounds").get_to(s.warmup_rounds);
    return s;
}

}  // namespace

ExperimentSpec parse_experiment_spec(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentSpec spec;
    try {
        spec.seed = j.value("seed", spec.seed);
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            if (d.is_string()) {
                spec.dataset.path = d.get<std::string>();
            } else if (d.is_object() && d.contains("path")) {
                spec.dataset.path = d.at("path").get<std::string>();
            } else if (d.is_object()) {
                const json& syn = d.contains("synthetic") ? d.at("synthetic") : d;
                SyntheticMarketSpec s = syn.get<SyntheticMarketSpec>();
                if (!syn.contains("seed")) s.seed = spec.seed;
                spec.dataset.synthetic = s;
            } else {
                throw ConfigError("dataset must be a path or an object");
            }
        }
        if (j.contains("strategies")) {
            spec.strategies.clear();
            for (const auto& s : j.at("strategies")) spec.strategies.push_back(strategy_name(s));
        }
        spec.gammas = j.value("gammas", spec.gammas);
        if (j.contains("cape")) spec.cape = parse_cape(j.at("cape"), spec.cape);
        if (j.contains("params")) spec.params = j.at("params").get<StrategyParams>();
        spec.output_dir = j.value("output_dir", spec.output_dir.string());
        spec.threads = j.value("threads", spec.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    return spec;
}

json to_json(const ExperimentSpec& spec) {
    json j;
    if (spec.dataset.path)
        j["dataset"] = {{"path", spec.dataset.path->string()}};
    else if (spec.dataset.synthetic)
        j["dataset"] = {{"synthetic", *spec.dataset.synthetic}};
    j["strategies"] = spec.strategies;
    j["gammas"] = spec.gammas;
    j["cape"] = cape_to_json(spec.cape);
    j["params"] = spec.params;
    j["seed"] = spec.seed;
    j["output_dir"] = spec.output_dir.string();
    j["threads"] = spec.threads;
    return j;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    ExperimentSpec spec = parse_experiment_spec(j);
    if (spec.dataset.path && spec.dataset.path->is_relative())
        spec.dataset.path = path.parent_path() / *spec.dataset.path;
    return spec;
}

bool operator==(const RegretTrace& a, const RegretTrace& b) {
    return a.rounds == b.rounds && a.regret == b.regret && a.log_fit == b.log_fit;
}

bool operator==(const RunReport& a, const RunReport& b) {
    return a.dataset == b.dataset && a.rounds == b.rounds && a.stocks == b.stocks &&
           a.gammas == b.gammas && a.strategies == b.strategies && a.cells == b.cells &&
           a.cape_series == b.cape_series && a.regret == b.regret &&
           a.wall_clock_seconds == b.wall_clock_seconds && a.metadata == b.metadata;
}

json report_to_json(const RunReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells) cells.push_back(cell_to_json(c));
    json series = json::array();
    for (const auto& s : r.cape_series) series.push_back(series_to_json(s));
    json regret;
    if (r.regret)
        regret = {{"rounds", r.regret->rounds}, {"regret", r.regret->regret}, {"log_fit", r.regret->log_fit}};
    return {{"dataset", r.dataset},
            {"rounds", r.rounds},
            {"stocks", r.stocks},
            {"gammas", r.gammas},
            {"strategies", r.strategies},
            {"cells", cells},
            {"cape_series", series},
            {"regret", regret},
            {"wall_clock_seconds", r.wall_clock_seconds},
            {"metadata", r.metadata}};
}

RunReport report_from_json(const json& j) {
    RunReport r;
    try {
        j.at("dataset").get_to(r.dataset);
        j.at("rounds").get_to(r.rounds);
        j.at("stocks").get_to(r.stocks);
        j.at("gammas").get_to(r.gammas);
        j.at("strategies").get_to(r.strategies);
        for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
        for (const auto& s : j.at("cape_series")) r.cape_series.push_back(series_from_json(s));
        if (j.contains("regret") && !j.at("regret").is_null()) {
            RegretTrace t;
            j.at("regret").at("rounds").get_to(t.rounds);
            j.at("regret").at("regret").get_to(t.regret);
            j.at("regret").at("log_fit").get_to(t.log_fit);
            r.regret = std::move(t);
        }
        r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
        r.metadata = j.value("metadata", json::object());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report JSON: ") + e.what());
    }
    return r;
}

}  // namespace olps
