#include <cmath>
#include <fstream>

#include "olps/errors.hpp"
#include "olps/harness.hpp"

namespace olps {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

std::string weights_csv(const RunReport& report) {
    std::string out = "variant,gamma,t,lambda";
    if (!report.cape_series.empty())
        for (const auto& e : report.cape_series.front().experts) out += ",w_" + e;
    out += '\n';
    for (const auto& s : report.cape_series) {
        const std::string gamma = s.gamma ? format_double(*s.gamma) : "";
        for (std::size_t t = 0; t < s.weights.size(); ++t) {
            out += s.variant + ',' + gamma + ',' + std::to_string(t + 1) + ',' +
                   format_double(s.lambdas[t]);
            for (double w : s.weights[t]) out += ',' + format_double(w);
            out += '\n';
        }
    }
    return out;
}

std::string regret_csv(const RegretTrace& trace) {
    std::string out = "t,regret,log_fit\n";
    for (std::size_t i = 0; i < trace.rounds.size(); ++i) {
        const double fit = trace.log_fit * std::log(static_cast<double>(trace.rounds[i]));
        out += std::to_string(trace.rounds[i]) + ',' + format_double(trace.regret[i]) + ',' +
               format_double(fit) + '\n';
    }
    return out;
}

std::string wealth_long_csv(const RunReport& report) {
    std::string out = "dataset,strategy,gamma,t,cumulative_wealth\n";
    for (const auto& c : report.cells) {
        if (c.failed) continue;
        const std::string prefix = report.dataset + ',' + c.strategy + ',' + format_double(c.gamma) + ',';
        for (const auto& r : c.ledger.records)
            out += prefix + std::to_string(r.round) + ',' + format_double(r.cumulative_wealth) + '\n';
    }
    return out;
}

}  // namespace

std::string wealth_table_csv(const RunReport& report) {
    std::string out = "dataset,gamma";
    for (const auto& s : report.strategies) out += ',' + s;
    out += '\n';
    if (report.strategies.empty()) return out;
    for (double g : report.gammas) {
        out += report.dataset + ',' + format_double(g);
        for (const auto& s : report.strategies) {
            const CellResult* cell = report.find(s, g);
            out += ',';
            out += (cell && !cell->failed) ? format_double(cell->final_wealth) : "NA";
        }
        out += '\n';
    }
    return out;
}

std::string sensitivity_csv(std::span<const SensitivityRow> rows) {
    std::string out = "window,gamma,final_wealth\n";
    for (const auto& r : rows)
        out += std::to_string(r.window) + ',' + format_double(r.gamma) + ',' +
               format_double(r.final_wealth) + '\n';
    return out;
}

std::vector<std::filesystem::path> emit_report(const RunReport& report, const std::filesystem::path& dir,
                                               ReportFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw Error("cannot create output directory " + dir.string());

    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        written.push_back(dir / name);
    };

    if (format != ReportFormat::Json) {
        emit("wealth_table.csv", wealth_table_csv(report));
        emit("wealth_long.csv", wealth_long_csv(report));
        for (const auto& c : report.cells)
            if (!c.failed)
                emit("ledger_" + c.strategy + "_" + format_double(c.gamma) + ".csv", ledger_to_csv(c.ledger));
        if (!report.cape_series.empty()) emit("weights_cape.csv", weights_csv(report));
        if (report.regret) emit("regret.csv", regret_csv(*report.regret));
    }
    if (format != ReportFormat::Csv) emit("report.json", report_to_json(report).dump(1));
    return written;
}

}  // namespace olps
