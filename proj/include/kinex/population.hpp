#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "kinex/errors.hpp"
#include "kinex/market.hpp"
#include "kinex/rng.hpp"

namespace kinex {

enum class Role : std::uint8_t { dealers = 0, speculators = 1 };

constexpr std::string_view to_string(Role r) noexcept {
    return r == Role::dealers ? "dealers" : "speculators";
}

/// Empirical measure of one class of agents.
struct Population {
    Role role = Role::dealers;
    std::vector<GoodsPair> holdings;

    std::size_t size() const noexcept { return holdings.size(); }
    bool empty() const noexcept { return holdings.empty(); }

    bool operator==(const Population&) const = default;
};

/// Shape of the initial holdings around the prescribed means.
struct InitShape {
    enum class Kind { degenerate, uniform_spread };

    Kind kind = Kind::degenerate;
    /// Relative half width in [0,1]: each coordinate is drawn uniformly on
    /// mean * [1 - width, 1 + width] and the sample is then rescaled so that
    /// its empirical mean equals the prescribed mean exactly.
    double width = 0.0;

    static InitShape degenerate() { return {}; }
    static InitShape uniform_spread(double width) { return {Kind::uniform_spread, width}; }

    bool operator==(const InitShape&) const = default;
};

inline GoodsPair population_mean(std::span<const GoodsPair> agents) {
    if (agents.empty()) throw DomainError("empirical mean of an empty population");
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& a : agents) {
        sx += a.x;
        sy += a.y;
    }
    const auto n = static_cast<double>(agents.size());
    return {sx / n, sy / n};
}

inline GoodsPair population_total(std::span<const GoodsPair> agents) noexcept {
    GoodsPair t;
    for (const auto& a : agents) {
        t.x += a.x;
        t.y += a.y;
    }
    return t;
}

/// Arithmetic means of each population, packed as a MeanState.
inline MeanState empirical_means(const Population& dealers, const Population& speculators) {
    const auto d = population_mean(dealers.holdings);
    const auto s = population_mean(speculators.holdings);
    return {d.x, d.y, s.x, s.y};
}

inline Population make_population(Role role, std::size_t n, GoodsPair mean, const InitShape& shape,
                                  Rng& rng) {
    if (n == 0) throw DomainError("make_population: population must be nonempty");
    if (!(mean.x >= 0.0) || !(mean.y >= 0.0))
        throw DomainError("make_population: mean holdings must be nonnegative");
    Population pop{role, std::vector<GoodsPair>(n, mean)};
    if (shape.kind == InitShape::Kind::degenerate || shape.width == 0.0) return pop;
    if (!(shape.width > 0.0 && shape.width <= 1.0))
        throw DomainError("make_population: spread width must lie in [0,1]");

    for (auto& a : pop.holdings) {
        a.x = mean.x * (1.0 + shape.width * (2.0 * rng.uniform() - 1.0));
        a.y = mean.y * (1.0 + shape.width * (2.0 * rng.uniform() - 1.0));
    }
    const auto got = population_mean(pop.holdings);
    const double fx = got.x > 0.0 ? mean.x / got.x : 0.0;
    const double fy = got.y > 0.0 ? mean.y / got.y : 0.0;
    for (auto& a : pop.holdings) {
        a.x *= fx;
        a.y *= fy;
    }
    return pop;
}

} // namespace kinex
