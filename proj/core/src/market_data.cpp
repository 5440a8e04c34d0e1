#include "olps/market_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string_view>

#include <nlohmann/json.hpp>

#include "olps/errors.hpp"

namespace olps {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

std::vector<std::string> default_symbols(std::size_t n) {
    std::vector<std::string> s;
    s.reserve(n);
    for (std::size_t i = 0; i < n; ++i) s.push_back("S" + std::to_string(i + 1));
    return s;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

MarketSequence::MarketSequence(std::string name, std::vector<std::string> symbols,
                               RowMatrix relatives, std::string start_day)
    : name_(std::move(name)),
      symbols_(std::move(symbols)),
      relatives_(std::move(relatives)),
      start_day_(std::move(start_day)) {
    if (relatives_.rows() < 1) throw DataError("market sequence needs at least one day");
    if (relatives_.cols() < 1) throw DataError("market sequence needs at least one stock");
    if (symbols_.empty()) symbols_ = default_symbols(stocks());
    if (symbols_.size() != stocks())
        throw DataError("symbol count " + std::to_string(symbols_.size()) +
                        " does not match column count " + std::to_string(stocks()));

    std::size_t zeros = 0;
    for (Eigen::Index t = 0; t < relatives_.rows(); ++t) {
        bool any_positive = false;
        for (Eigen::Index i = 0; i < relatives_.cols(); ++i) {
            const double v = relatives_(t, i);
            const auto row = static_cast<std::size_t>(t) + 1;
            const auto col = static_cast<std::size_t>(i) + 1;
            if (!std::isfinite(v)) throw DataError("non-finite relative price", row, col);
            if (v < 0.0) throw DataError("negative relative price", row, col);
            if (v > 0.0) any_positive = true;
            else ++zeros;
        }
        if (!any_positive)
            throw DataError("all relative prices are zero", static_cast<std::size_t>(t) + 1);
    }
    if (zeros > 0)
        warnings_.push_back(std::to_string(zeros) +
                            " zero relative price(s): log-loss is undefined for portfolios "
                            "concentrated in those stocks");
}

Eigen::Map<const Vector> MarketSequence::day(std::size_t t) const {
    if (t >= rounds()) throw std::out_of_range("MarketSequence::day: index out of range");
    return {relatives_.row(static_cast<Eigen::Index>(t)).data(), relatives_.cols()};
}

MarketSequence MarketSequence::slice(std::size_t first, std::size_t count) const {
    if (first + count > rounds() || count == 0)
        throw std::out_of_range("MarketSequence::slice: range out of bounds");
    RowMatrix sub = relatives_.middleRows(static_cast<Eigen::Index>(first),
                                          static_cast<Eigen::Index>(count));
    return {name_, symbols_, std::move(sub), start_day_};
}

bool MarketSequence::operator==(const MarketSequence& other) const {
    return name_ == other.name_ && symbols_ == other.symbols_ &&
           start_day_ == other.start_day_ && relatives_.rows() == other.relatives_.rows() &&
           relatives_.cols() == other.relatives_.cols() && relatives_ == other.relatives_;
}

MarketSequence parse_market_csv(std::string_view text, std::string name) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw DataError("empty market file");

    std::vector<std::string> symbols;
    for (auto field : split(lines.front(), ',')) {
        if (field.empty()) throw DataError("empty symbol in header", 1, symbols.size() + 1);
        symbols.emplace_back(field);
    }
    const std::size_t n = symbols.size();
    if (lines.size() < 2) throw DataError("market file has a header but no data rows");

    RowMatrix rel(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(n));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r], ',');
        const std::size_t line_no = r + 1;
        if (fields.size() != n)
            throw DataError("ragged row: expected " + std::to_string(n) + " fields, found " +
                                std::to_string(fields.size()),
                            line_no, std::min(fields.size(), n) + 1);
        for (std::size_t c = 0; c < n; ++c) {
            const auto f = fields[c];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size())
                throw DataError("non-numeric cell '" + std::string(f) + "'", line_no, c + 1);
            if (!std::isfinite(v)) throw DataError("non-finite relative price", line_no, c + 1);
            if (v < 0.0) throw DataError("negative relative price", line_no, c + 1);
            rel(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return {std::move(name), std::move(symbols), std::move(rel)};
}

MarketSequence load_market_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open market file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_market_csv(buf.str(), path.stem().string());
}

std::string format_market_csv(const MarketSequence& seq) {
    std::string out;
    const auto& syms = seq.symbols();
    for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i) out += ',';
        out += syms[i];
    }
    out += '\n';
    const auto& rel = seq.relatives();
    for (Eigen::Index t = 0; t < rel.rows(); ++t) {
        for (Eigen::Index i = 0; i < rel.cols(); ++i) {
            if (i) out += ',';
            out += format_double(rel(t, i));
        }
        out += '\n';
    }
    return out;
}

void write_market_csv(const MarketSequence& seq, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write market file '" + path.string() + "'");
    out << format_market_csv(seq);
}

MarketSequence from_price_levels(const RowMatrix& closes, std::vector<std::string> symbols,
                                 std::string name) {
    if (closes.rows() < 2) throw DataError("need at least two rows of closing prices");
    for (Eigen::Index t = 0; t < closes.rows(); ++t)
        for (Eigen::Index i = 0; i < closes.cols(); ++i)
            if (!(closes(t, i) > 0.0) || !std::isfinite(closes(t, i)))
                throw DataError("closing prices must be positive", static_cast<std::size_t>(t) + 1,
                                static_cast<std::size_t>(i) + 1);
    RowMatrix rel = closes.bottomRows(closes.rows() - 1).array() /
                    closes.topRows(closes.rows() - 1).array();
    return {std::move(name), std::move(symbols), std::move(rel)};
}

void SyntheticMarketSpec::validate() const {
    if (n < 2) throw ConfigError("synthetic market: n must be at least 2");
    if (T < 1) throw ConfigError("synthetic market: T must be at least 1");
    if (const auto* iid = std::get_if<IidLognormal>(&model)) {
        if (static_cast<std::size_t>(iid->mu.size()) != n ||
            static_cast<std::size_t>(iid->sigma.size()) != n)
            throw ConfigError("synthetic market: mu and sigma need n entries");
        if ((iid->sigma.array() <= 0.0).any())
            throw ConfigError("synthetic market: sigma entries must be positive");
        if (!iid->mu.allFinite() || !iid->sigma.allFinite())
            throw ConfigError("synthetic market: mu and sigma must be finite");
    } else {
        const auto& mr = std::get<MeanReverting>(model);
        if (!(mr.up > 0.0) || !(mr.down > 0.0))
            throw ConfigError("synthetic market: relative levels must be positive");
        if (!(mr.switch_probability >= 0.0 && mr.switch_probability <= 1.0))
            throw ConfigError("synthetic market: switch probability must be in [0, 1]");
    }
}

MarketSequence generate_synthetic(const SyntheticMarketSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const auto T = static_cast<Eigen::Index>(spec.T);
    const auto n = static_cast<Eigen::Index>(spec.n);
    RowMatrix rel(T, n);

    if (const auto* iid = std::get_if<IidLognormal>(&spec.model)) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index t = 0; t < T; ++t)
            for (Eigen::Index i = 0; i < n; ++i)
                rel(t, i) = std::exp(iid->mu[i] + iid->sigma[i] * normal(rng));
    } else {
        const auto& mr = std::get<MeanReverting>(spec.model);
        std::bernoulli_distribution coin(0.5);
        std::bernoulli_distribution flip(mr.switch_probability);
        std::vector<bool> high(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) high[i] = coin(rng);
        for (Eigen::Index t = 0; t < T; ++t)
            for (Eigen::Index i = 0; i < n; ++i) {
                auto state = high[static_cast<std::size_t>(i)];
                rel(t, i) = state ? mr.up : mr.down;
                if (flip(rng)) high[static_cast<std::size_t>(i)] = !state;
            }
    }
    return {spec.name, {}, std::move(rel)};
}

namespace {

Vector broadcast(const nlohmann::json& j, std::size_t n, const char* field) {
    if (j.is_number()) return Vector::Constant(static_cast<Eigen::Index>(n), j.get<double>());
    if (!j.is_array()) throw ConfigError(std::string("synthetic market: '") + field +
                                         "' must be a number or an array");
    auto values = j.get<std::vector<double>>();
    return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void to_json(nlohmann::json& j, const SyntheticMarketSpec& spec) {
    j = nlohmann::json{{"n", spec.n}, {"T", spec.T}, {"seed", spec.seed}, {"name", spec.name}};
    if (const auto* iid = std::get_if<IidLognormal>(&spec.model)) {
        j["model"] = {{"type", "iid-lognormal"},
                      {"mu", std::vector<double>(iid->mu.begin(), iid->mu.end())},
                      {"sigma", std::vector<double>(iid->sigma.begin(), iid->sigma.end())}};
    } else {
        const auto& mr = std::get<MeanReverting>(spec.model);
        j["model"] = {{"type", "mean-reverting"},
                      {"up", mr.up},
                      {"down", mr.down},
                      {"switch_probability", mr.switch_probability}};
    }
}

void from_json(const nlohmann::json& j, SyntheticMarketSpec& spec) {
    try {
        spec.n = j.at("n").get<std::size_t>();
        spec.T = j.at("T").get<std::size_t>();
        spec.seed = j.value("seed", spec.seed);
        spec.name = j.value("name", std::string("synthetic"));
        const auto& m = j.at("model");
        const auto type = m.at("type").get<std::string>();
        if (type == "iid-lognormal") {
            spec.model = IidLognormal{broadcast(m.at("mu"), spec.n, "mu"),
                                      broadcast(m.at("sigma"), spec.n, "sigma")};
        } else if (type == "mean-reverting") {
            MeanReverting mr;
            mr.up = m.value("up", mr.up);
            mr.down = m.value("down", mr.down);
            mr.switch_probability = m.value("switch_probability", mr.switch_probability);
            spec.model = mr;
        } else {
            throw ConfigError("synthetic market: unknown model type '" + type + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic market spec: ") + e.what());
    }
}

}  // namespace olps
