#pragma once

// First-moment analytics of the linear model: the mean ODE, its two
// conservation laws, the solvable case lambda = (0, 1), and the equilibrium
// reached for positive saving fractions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "kinex/errors.hpp"
#include "kinex/market.hpp"

namespace kinex {

/// Time derivative of a MeanState.
struct MeanRates {
    double dMx = 0.0;
    double dMy = 0.0;
    double dmx = 0.0;
    double dmy = 0.0;
};

/// Conserved totals Ix = Mx + mx and Iy = My + my.
struct GoodsTotals {
    double x = 0.0;
    double y = 0.0;
};

inline GoodsTotals totals_of(const MeanState& m) noexcept { return {m.Mx + m.mx, m.My + m.my}; }

struct MeanTrajectory {
    std::vector<double> times;
    std::vector<MeanState> states;
    std::vector<double> prices;
    GoodsTotals totals;
};

struct RhoPair {
    double x = 1.0;
    double y = 1.0;
};

struct RhoTrajectory {
    std::vector<double> times;
    std::vector<RhoPair> states;
};

struct EquilibriumResult {
    double rho = 0.0;
    double limit_price = 0.0;
    MeanState limit_means;
    int iterations = 0;
};

struct ExplicitSolution {
    MeanState means;
    double price = 0.0;
};

struct MeanWealths {
    double dealers = 0.0;
    double speculators = 0.0;
};

namespace detail {

template <std::size_t N, class Rhs>
std::array<double, N> rk4_step(const std::array<double, N>& y, double h, Rhs&& rhs) {
    auto axpy = [](const std::array<double, N>& a, double s, const std::array<double, N>& b) {
        std::array<double, N> out;
        for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + s * b[i];
        return out;
    };
    const auto k1 = rhs(y);
    const auto k2 = rhs(axpy(y, 0.5 * h, k1));
    const auto k3 = rhs(axpy(y, 0.5 * h, k2));
    const auto k4 = rhs(axpy(y, h, k3));
    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Number of fixed steps covering [0, t_end]; the last one may be shorter.
inline long step_count(double t_end, double dt) {
    return static_cast<long>(std::ceil(t_end / dt - 1e-9));
}

inline std::array<double, 4> pack(const MeanState& m) { return {m.Mx, m.My, m.mx, m.my}; }
inline MeanState unpack(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

/// True when |1 - lambda| is small enough to use the lambda -> 1 limit form.
inline bool near_one(double lambda) { return std::abs(1.0 - lambda) < 1e-8; }

/// (1 / (c (1 - lambda))) log(1 - (1 - lambda) u); tends to -u / c as lambda -> 1.
inline double log_potential(double u, double lambda, double c) {
    if (near_one(lambda)) return -u / c;
    return std::log1p(-(1.0 - lambda) * u) / (c * (1.0 - lambda));
}

} // namespace detail

/// Right-hand side of the mean equations for dealers and speculators.
inline MeanRates mean_rhs(const MeanState& m, const Preferences& prefs, const SavingPolicy& s) {
    const auto supply = effective_supply(m, s);
    if (!(supply.x > 0.0) || !(supply.y > 0.0))
        throw SingularMarketError("mean_rhs: effective supply of a good is zero");
    const double xy = supply.x / supply.y;
    const double yx = supply.y / supply.x;
    const double a = prefs.alpha();
    const double b = prefs.beta();
    const double lx = s.lambda_x();
    const double ly = s.lambda_y();
    return {b * (xy * m.My - m.Mx), a * (yx * m.Mx - m.My), b * (xy * ly * m.my - lx * m.mx),
            a * (yx * lx * m.mx - ly * m.my)};
}

/// Classical RK4 with fixed step. Every `stride`-th sample is kept, plus the last.
inline MeanTrajectory integrate_means(const MeanState& initial, const Preferences& prefs,
                                      const SavingPolicy& saving, double t_end, double dt = 1e-3,
                                      std::size_t stride = 1) {
    if (!(dt > 0.0)) throw DomainError("integrate_means: dt must be positive");
    if (!(t_end >= 0.0)) throw DomainError("integrate_means: t_end must be nonnegative");
    if (!initial.nonnegative()) throw DomainError("integrate_means: initial means must be nonnegative");
    stride = std::max<std::size_t>(stride, 1);

    MeanTrajectory traj;
    traj.totals = totals_of(initial);
    auto push = [&](double t, const MeanState& m) {
        traj.times.push_back(t);
        traj.states.push_back(m);
        traj.prices.push_back(market_price(m, saving, prefs));
    };
    auto rhs = [&](const std::array<double, 4>& y) {
        const auto r = mean_rhs(detail::unpack(y), prefs, saving);
        return std::array<double, 4>{r.dMx, r.dMy, r.dmx, r.dmy};
    };

    const long n = detail::step_count(t_end, dt);
    auto y = detail::pack(initial);
    push(0.0, initial);
    for (long k = 0; k < n; ++k) {
        const double t0 = static_cast<double>(k) * dt;
        const double t1 = (k + 1 == n) ? t_end : static_cast<double>(k + 1) * dt;
        y = detail::rk4_step(y, t1 - t0, rhs);
        for (double v : y)
            if (v < -1e-12)
                throw IntegrationError("integrate_means: a mean became negative at t = " +
                                       std::to_string(t1));
        if ((k + 1) % static_cast<long>(stride) == 0 || k + 1 == n) push(t1, detail::unpack(y));
    }
    return traj;
}

/// (rho_x, rho_y): share of the effective supply of each good held by dealers.
inline RhoPair rho_transform(const MeanState& m, const SavingPolicy& s) {
    const auto supply = effective_supply(m, s);
    if (!(supply.x > 0.0) || !(supply.y > 0.0))
        throw SingularMarketError("rho_transform: effective supply of a good is zero");
    return {m.Mx / supply.x, m.My / supply.y};
}

/// Right-hand side of the reduced two-dimensional system in (rho_x, rho_y).
inline RhoPair rho_rhs(const RhoPair& r, const Preferences& prefs, const SavingPolicy& s) {
    return {prefs.beta() * (1.0 - (1.0 - s.lambda_x()) * r.x) * (r.y - r.x),
            prefs.alpha() * (1.0 - (1.0 - s.lambda_y()) * r.y) * (r.x - r.y)};
}

inline RhoTrajectory integrate_rho(const RhoPair& initial, const Preferences& prefs,
                                   const SavingPolicy& saving, double t_end, double dt = 1e-3,
                                   std::size_t stride = 1) {
    if (!(dt > 0.0)) throw DomainError("integrate_rho: dt must be positive");
    stride = std::max<std::size_t>(stride, 1);
    auto rhs = [&](const std::array<double, 2>& y) {
        const auto d = rho_rhs({y[0], y[1]}, prefs, saving);
        return std::array<double, 2>{d.x, d.y};
    };
    RhoTrajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(initial);
    std::array<double, 2> y{initial.x, initial.y};
    const long n = detail::step_count(t_end, dt);
    for (long k = 0; k < n; ++k) {
        const double t0 = static_cast<double>(k) * dt;
        const double t1 = (k + 1 == n) ? t_end : static_cast<double>(k + 1) * dt;
        y = detail::rk4_step(y, t1 - t0, rhs);
        if ((k + 1) % static_cast<long>(stride) == 0 || k + 1 == n) {
            traj.times.push_back(t1);
            traj.states.push_back({y[0], y[1]});
        }
    }
    return traj;
}

/// log C0 = log(Ix - (1-lx) mx) / (beta (1-lx)) + log(Iy - (1-ly) my) / (alpha (1-ly)).
///
/// Invariant along mean trajectories when both saving fractions are positive.
/// For lambda within 1e-8 of 1 the divergent constant log(I) / (c (1-lambda))
/// is dropped and the finite remainder -m / (c I) is used instead.
inline double conserved_quantity(const MeanState& m, const Preferences& prefs,
                                 const SavingPolicy& s, const GoodsTotals& totals) {
    if (s.lambda_x() == 0.0 || s.lambda_y() == 0.0)
        throw NotConservedError(
            "conserved_quantity: requires strictly positive saving fractions lambda_x, lambda_y");
    auto term = [](double total, double spec, double lambda, double c) {
        if (detail::near_one(lambda)) return -spec / (c * total);
        const double arg = total - (1.0 - lambda) * spec;
        if (!(arg > 0.0)) throw DomainError("conserved_quantity: logarithm argument must be positive");
        return std::log(arg) / (c * (1.0 - lambda));
    };
    return term(totals.x, m.mx, s.lambda_x(), prefs.beta()) +
           term(totals.y, m.my, s.lambda_y(), prefs.alpha());
}

namespace detail {

/// log H(u, v) up to a constant; strictly decreasing in u and in v on (0,1).
inline double log_h(double u, double v, const Preferences& prefs, const SavingPolicy& s) {
    return log_potential(u, s.lambda_x(), prefs.beta()) +
           log_potential(v, s.lambda_y(), prefs.alpha());
}

inline void require_positive_saving(const SavingPolicy& s, const char* who) {
    if (s.lambda_x() == 0.0 || s.lambda_y() == 0.0)
        throw UnsupportedError(std::string(who) +
                               ": closed form needs lambda_x > 0 and lambda_y > 0; integrate the "
                               "mean equations to steady state instead (explicit_solution covers "
                               "lambda = (0, 1))");
}

struct BisectionResult {
    double rho;
    int iterations;
};

inline BisectionResult bisect_equilibrium(const MeanState& initial, const Preferences& prefs,
                                          const SavingPolicy& s) {
    require_positive_saving(s, "equilibrium_rho");
    if (!initial.nonnegative()) throw DomainError("equilibrium_rho: means must be nonnegative");
    const auto r0 = rho_transform(initial, s);
    if (r0.x == r0.y) return {r0.x, 0};

    const double target = log_h(r0.x, r0.y, prefs, s);
    double lo = std::min(r0.x, r0.y);
    double hi = std::max(r0.x, r0.y);
    // log_h(rho, rho) - target is >= 0 at lo and <= 0 at hi.
    int it = 0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (log_h(mid, mid, prefs, s) - target > 0.0)
            lo = mid;
        else
            hi = mid;
        ++it;
    }
    return {0.5 * (lo + hi), it};
}

} // namespace detail

/// Common limit of rho_x and rho_y for positive saving fractions.
inline double equilibrium_rho(const MeanState& initial, const Preferences& prefs,
                              const SavingPolicy& saving) {
    return detail::bisect_equilibrium(initial, prefs, saving).rho;
}

/// Long-time price of the linear model and the means it is reached at.
inline EquilibriumResult limit_price(const MeanState& initial, const Preferences& prefs,
                                     const SavingPolicy& s) {
    detail::require_positive_saving(s, "limit_price");
    const auto eq = detail::bisect_equilibrium(initial, prefs, s);
    const auto I = totals_of(initial);
    const double rho = eq.rho;
    const double lx = s.lambda_x();
    const double ly = s.lambda_y();
    const double dx = 1.0 - (1.0 - lx) * rho;
    const double dy = 1.0 - (1.0 - ly) * rho;

    EquilibriumResult out;
    out.rho = rho;
    out.iterations = eq.iterations;
    out.limit_price = prefs.beta() * lx * I.x / (prefs.alpha() * ly * I.y) * dy / dx;
    out.limit_means.Mx = rho * lx * I.x / dx;
    out.limit_means.My = rho * ly * I.y / dy;
    out.limit_means.mx = I.x - out.limit_means.Mx;
    out.limit_means.my = I.y - out.limit_means.My;
    return out;
}

/// Closed-form solution for lambda_x = 0, lambda_y = 1: speculators sell all
/// their Y and never offer X.
inline ExplicitSolution explicit_solution(const MeanState& initial, const Preferences& prefs,
                                          double t) {
    if (!(t >= 0.0)) throw DomainError("explicit_solution: t must be nonnegative");
    const auto I = totals_of(initial);
    if (!(I.y > 0.0)) throw SingularMarketError("explicit_solution: total of good Y is zero");
    const double a = prefs.alpha();
    const double b = prefs.beta();
    const double decay = std::exp(-a * t);
    const double shrink = std::exp(-(b / a) * (initial.my / I.y) * (-std::expm1(-a * t)));

    ExplicitSolution out;
    out.means.my = initial.my * decay;
    out.means.Mx = initial.Mx * shrink;
    out.means.mx = I.x - out.means.Mx;
    out.means.My = I.y - out.means.my;
    out.price = (b / a) * (initial.Mx / I.y) * shrink;
    return out;
}

/// t -> infinity limit of explicit_solution.
inline ExplicitSolution explicit_limit(const MeanState& initial, const Preferences& prefs) {
    const auto I = totals_of(initial);
    if (!(I.y > 0.0)) throw SingularMarketError("explicit_limit: total of good Y is zero");
    const double b_over_a = prefs.beta() / prefs.alpha();
    const double shrink = std::exp(-b_over_a * initial.my / I.y);
    ExplicitSolution out;
    out.means = {initial.Mx * shrink, I.y, I.x - initial.Mx * shrink, 0.0};
    out.price = b_over_a * initial.Mx / I.y * shrink;
    return out;
}

/// Mean wealth of a dealer (Mx + P My) and of a speculator (mx + P my) at the market price.
inline MeanWealths mean_wealths(const MeanState& m, const Preferences& prefs,
                                const SavingPolicy& s) {
    const double p = market_price(m, s, prefs);
    return {m.Mx + p * m.My, m.mx + p * m.my};
}

} // namespace kinex
