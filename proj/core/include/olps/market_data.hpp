#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace olps {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One day of relative prices x_i = close_t / close_{t-1}.
using MarketVector = Vector;

/**
 * An ordered T x n sequence of market vectors.
 *
 * Row t holds the relatives of day t. Storage is row-major so a row maps onto
 * a contiguous vector without copying.
 */
class MarketSequence {
public:
    MarketSequence() = default;

    /// Validates shape and entries; throws DataError on the first bad cell.
    MarketSequence(std::string name, std::vector<std::string> symbols, RowMatrix relatives,
                   std::string start_day = {});

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }
    const std::string& start_day() const noexcept { return start_day_; }
    const RowMatrix& relatives() const noexcept { return relatives_; }

    std::size_t rounds() const noexcept { return static_cast<std::size_t>(relatives_.rows()); }
    std::size_t stocks() const noexcept { return static_cast<std::size_t>(relatives_.cols()); }

    /// Market vector of 0-based day t.
    Eigen::Map<const Vector> day(std::size_t t) const;

    /// Days [first, first + count) as a new sequence.
    MarketSequence slice(std::size_t first, std::size_t count) const;

    /// Non-fatal findings from construction, e.g. zero relatives.
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    bool operator==(const MarketSequence& other) const;

private:
    std::string name_;
    std::vector<std::string> symbols_;
    RowMatrix relatives_;
    std::string start_day_;
    std::vector<std::string> warnings_;
};

/// Reads a header row of symbols followed by one row of relatives per day.
MarketSequence load_market_csv(const std::filesystem::path& path);
MarketSequence parse_market_csv(std::string_view text, std::string name = "inline");

/// Writes relatives using shortest round-trip decimals so that
/// load_market_csv(write_market_csv(seq)) == seq.
void write_market_csv(const MarketSequence& seq, const std::filesystem::path& path);
std::string format_market_csv(const MarketSequence& seq);

/// Converts a (T+1) x n matrix of positive closing prices into T relatives.
MarketSequence from_price_levels(const RowMatrix& closes, std::vector<std::string> symbols = {},
                                 std::string name = "prices");

struct IidLognormal {
    Vector mu;     // per-stock mean of log relative
    Vector sigma;  // per-stock stddev of log relative, > 0
};

/// Every stock cycles between two relative levels, switching state with
/// the given probability each day. Initial states are drawn from the seed.
struct MeanReverting {
    double up = 1.05;
    double down = 1.0 / 1.05;
    double switch_probability = 0.5;
};

struct SyntheticMarketSpec {
    std::size_t n = 2;
    std::size_t T = 1;
    std::variant<IidLognormal, MeanReverting> model = MeanReverting{};
    std::uint64_t seed = 0;
    std::string name = "synthetic";

    void validate() const;
};

MarketSequence generate_synthetic(const SyntheticMarketSpec& spec);

void to_json(nlohmann::json& j, const SyntheticMarketSpec& spec);
void from_json(const nlohmann::json& j, SyntheticMarketSpec& spec);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace olps
