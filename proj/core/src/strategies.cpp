#include "olps/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <nlohmann/json.hpp>

#include "olps/errors.hpp"
#include "olps/solver.hpp"

namespace olps {

void StrategyParams::validate() const {
    if (!(eg_eta > 0.0)) throw ConfigError("eg_eta must be positive");
    if (!(pamr_epsilon > 0.0)) throw ConfigError("pamr_epsilon must be positive");
    if (olmar_window < 2) throw ConfigError("olmar_window must be at least 2");
    if (!(olmar_epsilon > 0.0)) throw ConfigError("olmar_epsilon must be positive");
    if (anticor_window < 2) throw ConfigError("anticor_window must be at least 2");
    if (!(olu_eta > 0.0)) throw ConfigError("olu_eta must be positive");
    if (!(olu_lambda >= 0.0)) throw ConfigError("olu_lambda must be non-negative");
}

void to_json(nlohmann::json& j, const StrategyParams& p) {
    j = {{"eg_eta", p.eg_eta},
         {"pamr_epsilon", p.pamr_epsilon},
         {"olmar_window", p.olmar_window},
         {"olmar_epsilon", p.olmar_epsilon},
         {"anticor_window", p.anticor_window},
         {"olu_eta", p.olu_eta},
         {"olu_lambda", p.olu_lambda},
         {"olu_lambda_inv_sqrt_t", p.olu_lambda_inv_sqrt_t}};
}

void from_json(const nlohmann::json& j, StrategyParams& p) {
    p.eg_eta = j.value("eg_eta", p.eg_eta);
    p.pamr_epsilon = j.value("pamr_epsilon", p.pamr_epsilon);
    p.olmar_window = j.value("olmar_window", p.olmar_window);
    p.olmar_epsilon = j.value("olmar_epsilon", p.olmar_epsilon);
    p.anticor_window = j.value("anticor_window", p.anticor_window);
    p.olu_eta = j.value("olu_eta", p.olu_eta);
    p.olu_lambda = j.value("olu_lambda", p.olu_lambda);
    p.olu_lambda_inv_sqrt_t = j.value("olu_lambda_inv_sqrt_t", p.olu_lambda_inv_sqrt_t);
}

// ---------------------------------------------------------------------------
// Update rules

Portfolio ucrp_next(std::size_t n) { return Portfolio::uniform(n); }

Portfolio eg_next(const Portfolio& b_prev, const Eigen::Ref<const Vector>& x_prev, double eta) {
    const double gross = b_prev.weights().dot(x_prev);
    if (!(gross > 0.0)) throw BankruptError(0);
    const Vector exponent = eta * x_prev / gross;
    // Shift by the max exponent; the common factor cancels on renormalisation.
    const Vector w = b_prev.weights().cwiseProduct(
        (exponent.array() - exponent.maxCoeff()).exp().matrix());
    return Portfolio(w / w.sum());
}

Portfolio pamr_next(const Portfolio& b_prev, const Eigen::Ref<const Vector>& x_prev,
                    double epsilon) {
    const double loss = std::max(0.0, b_prev.weights().dot(x_prev) - epsilon);
    const Vector centred = x_prev.array() - x_prev.mean();
    const double denom = centred.squaredNorm();
    if (loss == 0.0 || denom == 0.0) return b_prev;
    const double tau = loss / denom;
    return project_to_simplex(b_prev.weights() - tau * centred);
}

Vector olmar_predictor(std::span<const Vector> history, std::size_t window) {
    if (history.empty()) throw std::invalid_argument("olmar_predictor: empty history");
    const Eigen::Index n = history.back().size();
    const std::size_t terms = std::min(window, history.size() + 1);
    Vector sum = Vector::Ones(n);  // j = 0 term: today's price / today's price
    Vector cumulative = Vector::Ones(n);
    for (std::size_t j = 1; j < terms; ++j) {
        cumulative = cumulative.cwiseProduct(history[history.size() - j]);
        sum += cumulative.cwiseInverse();
    }
    return sum / static_cast<double>(terms);
}

Portfolio olmar_next(std::span<const Vector> history, const Portfolio& b_prev,
                     std::size_t window, double epsilon) {
    if (history.empty()) return b_prev;
    const Vector predicted = olmar_predictor(history, window);
    if (!predicted.allFinite()) return b_prev;
    const Vector centred = predicted.array() - predicted.mean();
    const double denom = centred.squaredNorm();
    if (denom == 0.0) return b_prev;
    const double tau = std::max(0.0, (epsilon - b_prev.weights().dot(predicted)) / denom);
    if (tau == 0.0) return b_prev;
    return project_to_simplex(b_prev.weights() + tau * centred);
}

Portfolio anticor_next(std::span<const Vector> history, const Portfolio& b_prev,
                       std::size_t window) {
    if (window < 2) throw std::invalid_argument("anticor: window must be at least 2");
    if (history.size() < 2 * window) return b_prev;

    const auto n = static_cast<Eigen::Index>(b_prev.size());
    const auto w = static_cast<Eigen::Index>(window);
    const std::size_t first = history.size() - 2 * window;
    constexpr double kLogFloor = -18.420680743952367;  // log(1e-8)

    Matrix lx1(w, n), lx2(w, n);
    for (Eigen::Index k = 0; k < w; ++k) {
        const auto& a = history[first + static_cast<std::size_t>(k)];
        const auto& b = history[first + window + static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < n; ++i) {
            lx1(k, i) = a[i] > 0.0 ? std::max(std::log(a[i]), kLogFloor) : kLogFloor;
            lx2(k, i) = b[i] > 0.0 ? std::max(std::log(b[i]), kLogFloor) : kLogFloor;
        }
    }
    const Vector mu1 = lx1.colwise().mean();
    const Vector mu2 = lx2.colwise().mean();
    const Matrix c1 = lx1.rowwise() - mu1.transpose();
    const Matrix c2 = lx2.rowwise() - mu2.transpose();
    const double dof = static_cast<double>(w - 1);
    const Matrix cov = c1.transpose() * c2 / dof;
    const Vector sd1 = (c1.colwise().squaredNorm() / dof).cwiseSqrt();
    const Vector sd2 = (c2.colwise().squaredNorm() / dof).cwiseSqrt();

    Matrix cor = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (sd1[i] > 0.0 && sd2[j] > 0.0) cor(i, j) = cov(i, j) / (sd1[i] * sd2[j]);

    Matrix claim = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || !(mu2[i] > mu2[j]) || !(cor(i, j) > 0.0)) continue;
            claim(i, j) = cor(i, j) + std::max(0.0, -cor(i, i)) + std::max(0.0, -cor(j, j));
        }

    Vector next = b_prev.weights();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double total = claim.row(i).sum();
        if (total <= 0.0) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double moved = b_prev[static_cast<std::size_t>(i)] * claim(i, j) / total;
            next[i] -= moved;
            next[j] += moved;
        }
    }
    return Portfolio(next.cwiseMax(0.0) / next.cwiseMax(0.0).sum());
}

Portfolio bcrp(const MarketSequence& market) {
    const auto sol = minimize_log_loss(market.relatives(),
                                       Vector::Zero(static_cast<Eigen::Index>(market.stocks())),
                                       1e-10);
    return Portfolio(sol.point);
}

Portfolio olu_next(const Portfolio& b_prev, const Eigen::Ref<const Vector>& x_prev, double eta,
                   double lambda) {
    return solve_olu_step(x_prev, b_prev, eta, lambda);
}

// ---------------------------------------------------------------------------
// Stateful wrappers

namespace {

class Ucrp final : public Strategy {
public:
    explicit Ucrp(std::size_t n) : b_(Portfolio::uniform(n)) {}
    std::string name() const override { return "ucrp"; }
    Portfolio next_portfolio() const override { return b_; }
    void observe(const Eigen::Ref<const Vector>&) override {}
    void reset() override {}
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Ucrp>(*this); }

private:
    Portfolio b_;
};

class Eg final : public Strategy {
public:
    Eg(std::size_t n, double eta) : n_(n), eta_(eta), b_(Portfolio::uniform(n)) {}
    std::string name() const override { return "eg"; }
    Portfolio next_portfolio() const override { return b_; }
    void observe(const Eigen::Ref<const Vector>& x) override { b_ = eg_next(b_, x, eta_); }
    void reset() override { b_ = Portfolio::uniform(n_); }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Eg>(*this); }

private:
    std::size_t n_;
    double eta_;
    Portfolio b_;
};

class Pamr final : public Strategy {
public:
    Pamr(std::size_t n, double epsilon) : n_(n), epsilon_(epsilon), b_(Portfolio::uniform(n)) {}
    std::string name() const override { return "pamr"; }
    Portfolio next_portfolio() const override { return b_; }
    void observe(const Eigen::Ref<const Vector>& x) override { b_ = pamr_next(b_, x, epsilon_); }
    void reset() override { b_ = Portfolio::uniform(n_); }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Pamr>(*this); }

private:
    std::size_t n_;
    double epsilon_;
    Portfolio b_;
};

class Olmar final : public Strategy {
public:
    Olmar(std::size_t n, std::size_t window, double epsilon)
        : n_(n), window_(window), epsilon_(epsilon), b_(Portfolio::uniform(n)) {}
    std::string name() const override { return "olmar"; }
    Portfolio next_portfolio() const override { return b_; }
    void observe(const Eigen::Ref<const Vector>& x) override {
        history_.emplace_back(x);
        if (history_.size() > window_) history_.pop_front();
        const std::vector<Vector> h(history_.begin(), history_.end());
        b_ = olmar_next(h, b_, window_, epsilon_);
    }
    void reset() override {
        b_ = Portfolio::uniform(n_);
        history_.clear();
    }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Olmar>(*this); }

private:
    std::size_t n_;
    std::size_t window_;
    double epsilon_;
    Portfolio b_;
    std::deque<Vector> history_;
};

class Anticor final : public Strategy {
public:
    Anticor(std::size_t n, std::size_t window)
        : n_(n), window_(window), b_(Portfolio::uniform(n)) {}
    std::string name() const override { return "anticor"; }
    Portfolio next_portfolio() const override { return b_; }
    void observe(const Eigen::Ref<const Vector>& x) override {
        // Transfers act on the holdings after the day's price move.
        const double gross = b_.weights().dot(x);
        const Portfolio holdings = gross > 0.0 ? drift(b_, x) : b_;
        history_.emplace_back(x);
        if (history_.size() > 2 * window_) history_.pop_front();
        const std::vector<Vector> h(history_.begin(), history_.end());
        b_ = anticor_next(h, holdings, window_);
    }
    void reset() override {
        b_ = Portfolio::uniform(n_);
        history_.clear();
    }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Anticor>(*this); }

private:
    std::size_t n_;
    std::size_t window_;
    Portfolio b_;
    std::deque<Vector> history_;
};

class Bcrp final : public Strategy {
public:
    explicit Bcrp(Portfolio b) : b_(std::move(b)) {}
    std::string name() const override { return "bcrp"; }
    Portfolio next_portfolio() const override { return b_; }
    void observe(const Eigen::Ref<const Vector>&) override {}
    void reset() override {}
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Bcrp>(*this); }

private:
    Portfolio b_;
};

class Olu final : public Strategy {
public:
    Olu(std::size_t n, double eta, double lambda)
        : n_(n), eta_(eta), lambda_(lambda), b_(Portfolio::uniform(n)) {}
    std::string name() const override { return "olu"; }
    Portfolio next_portfolio() const override { return b_; }
    void observe(const Eigen::Ref<const Vector>& x) override {
        if (!(b_.weights().dot(x) > 0.0) && !(x.maxCoeff() > 0.0)) return;
        b_ = olu_next(b_, x, eta_, lambda_);
    }
    void reset() override { b_ = Portfolio::uniform(n_); }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Olu>(*this); }

private:
    std::size_t n_;
    double eta_;
    double lambda_;
    Portfolio b_;
};

}  // namespace

bool is_base_strategy(const std::string& name) {
    static const char* const kNames[] = {"ucrp", "eg", "pamr", "olmar", "anticor", "bcrp", "olu"};
    return std::any_of(std::begin(kNames), std::end(kNames),
                       [&](const char* k) { return name == k; });
}

std::unique_ptr<Strategy> make_strategy(const std::string& name, std::size_t n,
                                        const StrategyParams& params,
                                        const MarketSequence* market) {
    params.validate();
    if (n == 0) throw ConfigError("strategy needs at least one stock");
    if (name == "ucrp") return std::make_unique<Ucrp>(n);
    if (name == "eg") return std::make_unique<Eg>(n, params.eg_eta);
    if (name == "pamr") return std::make_unique<Pamr>(n, params.pamr_epsilon);
    if (name == "olmar") return std::make_unique<Olmar>(n, params.olmar_window, params.olmar_epsilon);
    if (name == "anticor") return std::make_unique<Anticor>(n, params.anticor_window);
    if (name == "bcrp") {
        if (!market) throw ConfigError("bcrp needs the full market sequence");
        return std::make_unique<Bcrp>(bcrp(*market));
    }
    if (name == "olu") {
        double lambda = params.olu_lambda;
        if (params.olu_lambda_inv_sqrt_t) {
            if (!market) throw ConfigError("olu 1/sqrt(T) mode needs the market length");
            lambda = 1.0 / std::sqrt(static_cast<double>(market->rounds()));
        }
        return std::make_unique<Olu>(n, params.olu_eta, lambda);
    }
    throw ConfigError("unknown strategy '" + name + "'");
}

std::vector<Portfolio> simulate(Strategy& strategy, const MarketSequence& market) {
    strategy.reset();
    std::vector<Portfolio> decisions;
    decisions.reserve(market.rounds());
    for (std::size_t t = 0; t < market.rounds(); ++t) {
        decisions.push_back(strategy.next_portfolio());
        if (decisions.back().size() != market.stocks())
            throw std::invalid_argument("strategy dimension does not match the market");
        strategy.observe(market.day(t));
    }
    return decisions;
}

}  // namespace olps
