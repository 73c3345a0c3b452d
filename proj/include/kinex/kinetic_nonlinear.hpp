#pragma once

// Binary-collision Monte Carlo for the nonlinear system: dealer-dealer
// trades (operator Q) and dealer-speculator trades (operators P and P-bar),
// driven through a two-phase experiment in which speculators enter late.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kinex/errors.hpp"
#include "kinex/market.hpp"
#include "kinex/meanfield.hpp"
#include "kinex/observables.hpp"
#include "kinex/population.hpp"
#include "kinex/rng.hpp"

namespace kinex {

struct NonlinearSimConfig {
    Preferences prefs = Preferences::from_alpha(0.5);
    SavingPolicy saving = SavingPolicy::none();
    CoefficientModel coeff_model;
    /// Dealer-dealer collision frequency.
    double sigma = 1.0;
    /// Dealer-speculator collision frequency.
    double mu = 1.0;
    double dt = 0.01;
    double t_end = 50.0;
    /// Speculators enter the market at this time.
    double phase1_end = 10.0;
    std::uint64_t seed = 1;
    std::size_t N_A = 5000;
    std::size_t N_B = 5000;

    void validate() const {
        std::vector<std::string> errs;
        if (!(sigma > 0.0)) errs.emplace_back("sigma must be positive");
        if (!(mu > 0.0)) errs.emplace_back("mu must be positive");
        if (!(dt > 0.0)) errs.emplace_back("dt must be positive");
        if (!(t_end > 0.0)) errs.emplace_back("t_end must be positive");
        if (!(phase1_end >= 0.0) || phase1_end > t_end)
            errs.emplace_back("phase1_end must lie in [0, t_end]");
        if (N_A < 2) errs.emplace_back("N_A must be at least 2 for dealer-dealer collisions");
        if (N_B < 1) errs.emplace_back("N_B must be positive");
        // Expected collisions per step must fit the population: sigma dt N_A / 2 <= N_A / 2
        // and mu dt N_B <= N_A N_B.
        if (sigma * dt > 1.0) errs.emplace_back("sigma * dt must not exceed 1");
        if (mu * dt > static_cast<double>(N_A)) errs.emplace_back("mu * dt must not exceed N_A");
        try {
            coeff_model.validate(prefs);
        } catch (const ConfigError& e) {
            errs.emplace_back(e.what());
        }
        if (!errs.empty()) throw ConfigError(std::move(errs));
    }
};

using CollisionResult = std::optional<std::pair<GoodsPair, GoodsPair>>;

/// Trade between two dealers at the price fixed by their pooled goods. Both
/// partners use the same coefficients, so each good is conserved exactly by
/// the pair. Returns nullopt (skip) when either pooled good is zero.
inline CollisionResult dd_collision(const GoodsPair& a, const GoodsPair& b,
                                    const TradeCoefficients& c) noexcept {
    const double X = a.x + b.x;
    const double Y = a.y + b.y;
    if (!(X > 0.0) || !(Y > 0.0)) return std::nullopt;
    const double xy = X / Y;
    const double yx = Y / X;
    return std::pair{GoodsPair{a.x + c.beta * (xy * a.y - a.x), a.y + c.alpha * (yx * a.x - a.y)},
                     GoodsPair{b.x + c.beta * (xy * b.y - b.x), b.y + c.alpha * (yx * b.x - b.y)}};
}

/// Trade between a dealer and a speculator who offers only (lx x, ly y).
/// With lx = ly = 1 this is bit-for-bit dd_collision.
inline CollisionResult ds_collision(const GoodsPair& dealer, const GoodsPair& spec,
                                    const SavingPolicy& s, const TradeCoefficients& c) noexcept {
    const double ox = s.lambda_x() * spec.x;
    const double oy = s.lambda_y() * spec.y;
    const double X = dealer.x + ox;
    const double Y = dealer.y + oy;
    if (!(X > 0.0) || !(Y > 0.0)) return std::nullopt;
    const double xy = X / Y;
    const double yx = Y / X;
    return std::pair{
        GoodsPair{dealer.x + c.beta * (xy * dealer.y - dealer.x), dealer.y + c.alpha * (yx * dealer.x - dealer.y)},
        GoodsPair{spec.x + c.beta * (xy * oy - ox), spec.y + c.alpha * (yx * ox - oy)}};
}

struct StepCounts {
    std::size_t dd = 0;
    std::size_t ds = 0;
    std::size_t skipped = 0;
};

/// One time step. Phase 1 runs stochastic_round(sigma dt N_A / 2) dealer
/// pair collisions; phase 2 adds stochastic_round(mu dt N_B) dealer-speculator
/// collisions. Partners are drawn uniformly with replacement across
/// collisions and processed in order.
inline StepCounts nonlinear_step(Population& dealers, Population& speculators,
                                 const NonlinearSimConfig& cfg, int phase, Rng& rng) {
    StepCounts counts;
    auto& A = dealers.holdings;
    auto& B = speculators.holdings;
    const auto na = static_cast<std::uint64_t>(A.size());
    const auto nb = static_cast<std::uint64_t>(B.size());

    const auto k_dd = stochastic_round(cfg.sigma * cfg.dt * static_cast<double>(na) / 2.0, rng);
    if (na >= 2) {
        for (std::uint64_t k = 0; k < k_dd; ++k) {
            const auto i = rng.below(na);
            auto j = rng.below(na - 1);
            if (j >= i) ++j;
            const auto c = sample_coefficients(cfg.coeff_model, cfg.prefs, rng);
            if (auto r = dd_collision(A[i], A[j], c)) {
                A[i] = r->first;
                A[j] = r->second;
                ++counts.dd;
            } else {
                ++counts.skipped;
            }
        }
    }
    if (phase < 2 || na == 0 || nb == 0) return counts;

    const auto k_ds = stochastic_round(cfg.mu * cfg.dt * static_cast<double>(nb), rng);
    for (std::uint64_t k = 0; k < k_ds; ++k) {
        const auto i = rng.below(na);
        const auto j = rng.below(nb);
        const auto c = sample_coefficients(cfg.coeff_model, cfg.prefs, rng);
        if (auto r = ds_collision(A[i], B[j], cfg.saving, c)) {
            A[i] = r->first;
            B[j] = r->second;
            ++counts.ds;
        } else {
            ++counts.skipped;
        }
    }
    return counts;
}

/// Step index from which speculators take part.
inline std::size_t entry_step(const NonlinearSimConfig& cfg) {
    return static_cast<std::size_t>(std::max(0L, detail::step_count(cfg.phase1_end, cfg.dt)));
}

/// Two-phase experiment. The recorded price at time t is the market price of
/// the agents present at t: dealers only before phase1_end, then dealers and
/// speculators with their saving policy.
inline RunSeries two_phase_run(const NonlinearSimConfig& cfg, Population dealers,
                               Population speculators, const RunOptions& opt = {}) {
    cfg.validate();
    if (dealers.size() < 2 || speculators.empty())
        throw DomainError("two_phase_run: need at least two dealers and one speculator");

    Rng rng(cfg.seed);
    const auto n = static_cast<std::size_t>(detail::step_count(cfg.t_end, cfg.dt));
    const auto entry = entry_step(cfg);
    Recorder rec;
    RunSeries out;
    auto observe = [&](std::size_t step) {
        const double t = static_cast<double>(step) * cfg.dt;
        const auto& market = step >= entry ? cfg.saving : SavingPolicy::absent();
        if (detail::keep_step(step, n, opt.record_every) || step == entry)
            rec.push(record(dealers, speculators, cfg.prefs, market, t));
        if (opt.snapshot_every > 0 && detail::keep_step(step, n, opt.snapshot_every))
            out.snapshots.push_back(detail::take_snapshots(dealers, speculators, opt.histogram_bins, t));
    };

    observe(0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto c = nonlinear_step(dealers, speculators, cfg, k >= entry ? 2 : 1, rng);
        out.skipped_collisions += c.skipped;
        observe(k + 1);
    }
    out.singular_rows = rec.singular_rows();
    out.rows = rec.release();
    out.dealers = std::move(dealers);
    out.speculators = std::move(speculators);
    return out;
}

} // namespace kinex
