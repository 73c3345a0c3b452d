#pragma once

// Monte Carlo for the linear system: every agent trades against the mean
// field of both populations, frozen at the start of each step.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kinex/errors.hpp"
#include "kinex/market.hpp"
#include "kinex/meanfield.hpp"
#include "kinex/observables.hpp"
#include "kinex/population.hpp"
#include "kinex/rng.hpp"

namespace kinex {

struct LinearSimConfig {
    Preferences prefs = Preferences::from_alpha(0.5);
    SavingPolicy saving = SavingPolicy::none();
    CoefficientModel coeff_model;
    /// Interaction frequency; sigma * dt is the per-step update probability.
    double sigma = 1.0;
    double dt = 0.01;
    double t_end = 1.0;
    std::uint64_t seed = 1;
    std::size_t N_A = 5000;
    std::size_t N_B = 5000;

    void validate() const {
        std::vector<std::string> errs;
        if (!(sigma > 0.0)) errs.emplace_back("sigma must be positive");
        if (!(dt > 0.0)) errs.emplace_back("dt must be positive");
        if (!(t_end > 0.0)) errs.emplace_back("t_end must be positive");
        if (sigma * dt > 1.0) errs.emplace_back("sigma * dt must not exceed 1");
        if (N_A == 0 || N_B == 0) errs.emplace_back("N_A and N_B must be positive");
        try {
            coeff_model.validate(prefs);
        } catch (const ConfigError& e) {
            errs.emplace_back(e.what());
        }
        if (!errs.empty()) throw ConfigError(std::move(errs));
    }
};

/// Post-trade holdings of a dealer against the mean field with supply ratio
/// `xy` = (Mx + lx mx) / (My + ly my).
inline GoodsPair dealer_field_update(const GoodsPair& a, double xy, double yx,
                                     const TradeCoefficients& c) noexcept {
    return {a.x + c.beta * (xy * a.y - a.x), a.y + c.alpha * (yx * a.x - a.y)};
}

/// Speculators bring only (lx x, ly y) to the trade.
inline GoodsPair speculator_field_update(const GoodsPair& a, double xy, double yx,
                                         const SavingPolicy& s,
                                         const TradeCoefficients& c) noexcept {
    const double ox = s.lambda_x() * a.x;
    const double oy = s.lambda_y() * a.y;
    return {a.x + c.beta * (xy * oy - ox), a.y + c.alpha * (yx * ox - oy)};
}

namespace detail {

inline Rng agent_stream(const Rng& base, std::uint64_t step, Role role, std::size_t index) {
    return base.substream({step, static_cast<std::uint64_t>(role), static_cast<std::uint64_t>(index)});
}

} // namespace detail

/// One synchronous step. Each agent independently trades with probability
/// sigma * dt, using its own substream of `base` keyed by (step, role, index).
/// Returns the number of agents that traded.
inline std::size_t linear_step(Population& dealers, Population& speculators,
                               const LinearSimConfig& cfg, const MeanState& field,
                               const Rng& base, std::uint64_t step) {
    const auto supply = effective_supply(field, cfg.saving);
    if (!(supply.x > 0.0) || !(supply.y > 0.0))
        throw SingularMarketError("linear_step: mean-field supply of a good is zero");
    const double xy = supply.x / supply.y;
    const double yx = supply.y / supply.x;
    const double p = cfg.sigma * cfg.dt;

    std::size_t traded = 0;
    for (std::size_t i = 0; i < dealers.holdings.size(); ++i) {
        auto rng = detail::agent_stream(base, step, Role::dealers, i);
        if (!rng.bernoulli(p)) continue;
        const auto c = sample_coefficients(cfg.coeff_model, cfg.prefs, rng);
        dealers.holdings[i] = dealer_field_update(dealers.holdings[i], xy, yx, c);
        ++traded;
    }
    for (std::size_t i = 0; i < speculators.holdings.size(); ++i) {
        auto rng = detail::agent_stream(base, step, Role::speculators, i);
        if (!rng.bernoulli(p)) continue;
        const auto c = sample_coefficients(cfg.coeff_model, cfg.prefs, rng);
        speculators.holdings[i] = speculator_field_update(speculators.holdings[i], xy, yx, cfg.saving, c);
        ++traded;
    }
    return traded;
}

/// Iterates linear_step from t = 0 to t_end, recomputing the empirical means
/// before every step.
inline RunSeries run_linear(const LinearSimConfig& cfg, Population dealers, Population speculators,
                            const RunOptions& opt = {}) {
    cfg.validate();
    if (dealers.empty() || speculators.empty())
        throw DomainError("run_linear: populations must be nonempty");

    const Rng base(cfg.seed);
    const auto n = static_cast<std::size_t>(detail::step_count(cfg.t_end, cfg.dt));
    Recorder rec;
    RunSeries out;
    auto observe = [&](std::size_t step) {
        const double t = static_cast<double>(step) * cfg.dt;
        if (detail::keep_step(step, n, opt.record_every))
            rec.push(record(dealers, speculators, cfg.prefs, cfg.saving, t));
        if (opt.snapshot_every > 0 && detail::keep_step(step, n, opt.snapshot_every))
            out.snapshots.push_back(detail::take_snapshots(dealers, speculators, opt.histogram_bins, t));
    };

    observe(0);
    for (std::size_t k = 0; k < n; ++k) {
        linear_step(dealers, speculators, cfg, empirical_means(dealers, speculators), base, k);
        observe(k + 1);
    }
    out.singular_rows = rec.singular_rows();
    out.rows = rec.release();
    out.dealers = std::move(dealers);
    out.speculators = std::move(speculators);
    return out;
}

} // namespace kinex
