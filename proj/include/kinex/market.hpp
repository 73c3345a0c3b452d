#pragma once

// Market mathematics shared by every solver: Cobb-Douglas utility and its
// optimum, the relative price of good Y, agent wealth, and the random trade
// coefficients.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "kinex/errors.hpp"
#include "kinex/rng.hpp"

namespace kinex {

/// Cobb-Douglas exponents with alpha + beta = 1.
class Preferences {
public:
    static constexpr double kSumTolerance = 1e-12;

    /// Rejects |alpha + beta - 1| > 1e-12; otherwise stores beta = 1 - alpha.
    Preferences(double alpha, double beta) : alpha_(alpha), beta_(1.0 - alpha) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw DomainError("preferences: alpha must lie in (0,1), got " + std::to_string(alpha));
        if (!(std::abs(alpha + beta - 1.0) <= kSumTolerance))
            throw DomainError("preferences: alpha + beta must equal 1, got " +
                              std::to_string(alpha + beta));
    }

    static Preferences from_alpha(double alpha) { return {alpha, 1.0 - alpha}; }

    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }

    bool operator==(const Preferences&) const = default;

private:
    double alpha_;
    double beta_;
};

/// Fractions (lambda_x, lambda_y) of their goods that speculators bring to a trade.
class SavingPolicy {
public:
    SavingPolicy(double lambda_x, double lambda_y) : lambda_x_(lambda_x), lambda_y_(lambda_y) {
        if (!(lambda_x >= 0.0 && lambda_x <= 1.0) || !(lambda_y >= 0.0 && lambda_y <= 1.0))
            throw DomainError("saving policy: lambda_x and lambda_y must lie in [0,1]");
    }

    /// Speculators trade everything: they behave exactly like dealers.
    static SavingPolicy none() { return {1.0, 1.0}; }
    /// Speculators trade nothing: they are absent from the market.
    static SavingPolicy absent() { return {0.0, 0.0}; }

    double lambda_x() const noexcept { return lambda_x_; }
    double lambda_y() const noexcept { return lambda_y_; }

    bool operator==(const SavingPolicy&) const = default;

private:
    double lambda_x_;
    double lambda_y_;
};

/// Holdings of one agent.
struct GoodsPair {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const GoodsPair&) const = default;
};

/// Mean holdings of dealers (Mx, My) and speculators (mx, my).
struct MeanState {
    double Mx = 0.0;
    double My = 0.0;
    double mx = 0.0;
    double my = 0.0;

    bool operator==(const MeanState&) const = default;

    bool nonnegative() const noexcept { return Mx >= 0.0 && My >= 0.0 && mx >= 0.0 && my >= 0.0; }
};

/// Quantity of each good actually offered on the market: dealers bring all
/// of theirs, speculators the saving fraction.
struct EffectiveSupply {
    double x;
    double y;
};

inline EffectiveSupply effective_supply(const MeanState& m, const SavingPolicy& s) noexcept {
    return {m.Mx + s.lambda_x() * m.mx, m.My + s.lambda_y() * m.my};
}

/// U(x) = x^alpha (w - x)^beta.
inline double cobb_douglas_utility(double x, double w, const Preferences& prefs) {
    if (!(x >= 0.0) || !(x <= w))
        throw DomainError("cobb_douglas_utility: allocation must satisfy 0 <= x <= w");
    return std::pow(x, prefs.alpha()) * std::pow(w - x, prefs.beta());
}

/// Utility-maximizing split of wealth `w` at relative price `price` of good Y.
inline GoodsPair optimal_allocation(double w, double price, const Preferences& prefs) {
    if (!(price > 0.0)) throw DomainError("optimal_allocation: price must be positive");
    if (!(w >= 0.0)) throw DomainError("optimal_allocation: wealth must be nonnegative");
    return {prefs.alpha() * w, prefs.beta() * w / price};
}

/// Mean-field price (beta/alpha) (Mx + lx mx) / (My + ly my). With no
/// speculators this is the fixed dealers-only price.
inline double market_price(const MeanState& means, const SavingPolicy& saving,
                           const Preferences& prefs) {
    const auto supply = effective_supply(means, saving);
    if (!(supply.y > 0.0))
        throw SingularMarketError("market_price: no good Y offered on the market");
    return prefs.beta() / prefs.alpha() * supply.x / supply.y;
}

inline double wealth(const GoodsPair& holdings, double price) {
    if (!(price > 0.0)) throw DomainError("wealth: price must be positive");
    return holdings.x + price * holdings.y;
}

/// Realized (alpha(w), beta(w)) for one interaction.
struct TradeCoefficients {
    double alpha;
    double beta;
};

/// Law of the random trade coefficients. Deterministic returns the mean
/// preferences; uniform draws alpha(w) and beta(w) independently from
/// symmetric intervals around them, so alpha(w) + beta(w) = 1 only on average.
struct CoefficientModel {
    enum class Mode { deterministic, uniform };

    Mode mode = Mode::deterministic;
    double half_width_alpha = 0.0;
    double half_width_beta = 0.0;

    static CoefficientModel deterministic() { return {}; }
    static CoefficientModel uniform(double half_width_alpha, double half_width_beta) {
        return {Mode::uniform, half_width_alpha, half_width_beta};
    }

    /// Slack for intervals that touch 0 or 1 up to rounding (beta = 1 - alpha).
    static constexpr double kEdgeTolerance = 1e-12;

    /// Throws ConfigError when the sampling intervals leave [0,1].
    void validate(const Preferences& prefs) const {
        if (mode == Mode::deterministic) return;
        if (!(half_width_alpha >= 0.0) || !(half_width_beta >= 0.0))
            throw ConfigError("coefficient model: half widths must be nonnegative");
        constexpr double lo = -kEdgeTolerance;
        constexpr double hi = 1.0 + kEdgeTolerance;
        if (prefs.alpha() - half_width_alpha < lo || prefs.alpha() + half_width_alpha > hi)
            throw ConfigError("coefficient model: [alpha - half_width_alpha, alpha + half_width_alpha] "
                              "must lie in [0,1]");
        if (prefs.beta() - half_width_beta < lo || prefs.beta() + half_width_beta > hi)
            throw ConfigError("coefficient model: [beta - half_width_beta, beta + half_width_beta] "
                              "must lie in [0,1]");
    }

    bool operator==(const CoefficientModel&) const = default;
};

/// Draws alpha(w) first, then beta(w), each clamped to [0,1]. Deterministic
/// mode consumes no randomness.
inline TradeCoefficients sample_coefficients(const CoefficientModel& model,
                                             const Preferences& prefs, Rng& rng) {
    if (model.mode == CoefficientModel::Mode::deterministic) return {prefs.alpha(), prefs.beta()};
    model.validate(prefs);
    const double a = rng.uniform(prefs.alpha() - model.half_width_alpha,
                                 prefs.alpha() + model.half_width_alpha);
    const double b = rng.uniform(prefs.beta() - model.half_width_beta,
                                 prefs.beta() + model.half_width_beta);
    return {std::clamp(a, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
}

} // namespace kinex
