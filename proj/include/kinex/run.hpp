#pragma once

// Dispatches a validated scenario to its solver and writes the outputs:
// <dir>/<name>_<seed>.{csv,jsonl}, <dir>/<name>_<seed>_hist_<t>.json and
// <dir>/<name>_<seed>_summary.json.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinex/errors.hpp"
#include "kinex/kinetic_linear.hpp"
#include "kinex/kinetic_nonlinear.hpp"
#include "kinex/meanfield.hpp"
#include "kinex/observables.hpp"
#include "kinex/population.hpp"
#include "kinex/scenario.hpp"

namespace kinex {

struct RunSummary {
    std::string scenario;
    Model model = Model::meanfield;
    std::uint64_t seed = 0;
    double terminal_time = 0.0;
    double terminal_price = 0.0;
    /// Long-time price of the linear model, when it has a closed form.
    std::optional<double> predicted_price;
    std::optional<double> equilibrium_rho;
    /// Terminal rho_x of the series (equilibrium model only).
    std::optional<double> terminal_rho;
    /// Last price before speculators entered (nonlinear model only).
    std::optional<double> plateau_price;
    /// max_t |total(t) - total(0)| / total(0) for each good.
    double drift_x = 0.0;
    double drift_y = 0.0;
    std::size_t singular_rows = 0;
    std::size_t skipped_collisions = 0;
};

struct ScenarioOutcome {
    RunSummary summary;
    std::vector<ObservableRow> rows;
    std::vector<SnapshotPair> snapshots;
    std::vector<std::filesystem::path> files;
};

namespace detail {

inline ObservableRow mean_row(double t, const MeanState& m, const Preferences& prefs,
                              const SavingPolicy& s) {
    ObservableRow row;
    row.t = t;
    row.Mx = m.Mx;
    row.My = m.My;
    row.mx = m.mx;
    row.my = m.my;
    row.price = market_price(m, s, prefs);
    row.W_A = m.Mx + row.price * m.My;
    row.W_B = m.mx + row.price * m.my;
    row.total_x = m.Mx + m.mx;
    row.total_y = m.My + m.my;
    return row;
}

inline std::vector<ObservableRow> trajectory_rows(const MeanTrajectory& traj, const Preferences& prefs,
                                                  const SavingPolicy& s) {
    std::vector<ObservableRow> rows;
    rows.reserve(traj.times.size());
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        rows.push_back(mean_row(traj.times[i], traj.states[i], prefs, s));
    return rows;
}

inline std::optional<double> linear_prediction(const ScenarioConfig& c) {
    if (c.lambda_x > 0.0 && c.lambda_y > 0.0)
        return limit_price(c.means0, c.prefs(), c.saving()).limit_price;
    if (c.lambda_x == 0.0 && c.lambda_y == 1.0) return explicit_limit(c.means0, c.prefs()).price;
    return std::nullopt;
}

inline std::string time_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    return buf;
}

} // namespace detail

inline std::filesystem::path series_path(const ScenarioConfig& c) {
    return c.output.dir /
           (c.name + "_" + std::to_string(c.seed) + (c.output.format == SeriesFormat::csv ? ".csv" : ".jsonl"));
}

inline nlohmann::json to_json(const RunSummary& s) {
    nlohmann::json j;
    j["scenario"] = s.scenario;
    j["model"] = std::string(to_string(s.model));
    j["seed"] = s.seed;
    j["terminal_time"] = s.terminal_time;
    j["terminal_price"] = s.terminal_price;
    j["predicted_price"] = s.predicted_price ? nlohmann::json(*s.predicted_price) : nlohmann::json();
    j["equilibrium_rho"] = s.equilibrium_rho ? nlohmann::json(*s.equilibrium_rho) : nlohmann::json();
    j["terminal_rho"] = s.terminal_rho ? nlohmann::json(*s.terminal_rho) : nlohmann::json();
    j["plateau_price"] = s.plateau_price ? nlohmann::json(*s.plateau_price) : nlohmann::json();
    j["drift_x"] = s.drift_x;
    j["drift_y"] = s.drift_y;
    j["singular_rows"] = s.singular_rows;
    j["skipped_collisions"] = s.skipped_collisions;
    return j;
}

/// One-line verdict for scripts.
inline std::string summary_line(const RunSummary& s) {
    auto fmt = [](double v) { return detail::num(v); };
    std::string out = "scenario=" + s.scenario + " model=" + std::string(to_string(s.model)) +
                      " seed=" + std::to_string(s.seed) + " t=" + fmt(s.terminal_time) +
                      " terminal_price=" + fmt(s.terminal_price);
    if (s.plateau_price) out += " plateau_price=" + fmt(*s.plateau_price);
    out += " predicted_price=" + (s.predicted_price ? fmt(*s.predicted_price) : std::string("n/a"));
    if (s.equilibrium_rho) out += " rho=" + fmt(*s.equilibrium_rho);
    if (s.terminal_rho) out += " rho_ode=" + fmt(*s.terminal_rho);
    out += " drift_x=" + fmt(s.drift_x) + " drift_y=" + fmt(s.drift_y);
    if (s.singular_rows) out += " singular_rows=" + std::to_string(s.singular_rows);
    if (s.skipped_collisions) out += " skipped=" + std::to_string(s.skipped_collisions);
    return out;
}

/// Initial populations for the Monte Carlo models, drawn from a stream that
/// is independent of the simulation stream.
inline std::pair<Population, Population> initial_populations(const ScenarioConfig& c) {
    Rng rng = Rng(c.seed).substream({0x696e6974ULL});
    auto dealers = make_population(Role::dealers, c.N_A, {c.means0.Mx, c.means0.My}, c.init_shape, rng);
    auto specs = make_population(Role::speculators, c.N_B, {c.means0.mx, c.means0.my}, c.init_shape, rng);
    return {std::move(dealers), std::move(specs)};
}

/// Runs the scenario; writes files when `write_files` is set.
inline ScenarioOutcome run_scenario(const ScenarioConfig& c, bool write_files = true) {
    require_valid(c);
    const auto prefs = c.prefs();
    const auto saving = c.saving();
    ScenarioOutcome out;
    auto& sum = out.summary;
    sum.scenario = c.name;
    sum.model = c.model;
    sum.seed = c.seed;
    const RunOptions opt{c.output.record_every, c.output.snapshot_every, c.output.histogram_bins};

    switch (c.model) {
    case Model::meanfield: {
        const auto traj = integrate_means(c.means0, prefs, saving, c.t_end, c.dt, c.output.record_every);
        out.rows = detail::trajectory_rows(traj, prefs, saving);
        sum.predicted_price = detail::linear_prediction(c);
        break;
    }
    case Model::equilibrium: {
        const auto eq = limit_price(c.means0, prefs, saving);
        sum.predicted_price = eq.limit_price;
        sum.equilibrium_rho = eq.rho;
        const auto traj = integrate_means(c.means0, prefs, saving, c.t_end, c.dt, c.output.record_every);
        out.rows = detail::trajectory_rows(traj, prefs, saving);
        sum.terminal_rho = rho_transform(traj.states.back(), saving).x;
        break;
    }
    case Model::explicit_case: {
        const auto n = detail::step_count(c.t_end, c.dt);
        const auto every = static_cast<long>(c.output.record_every);
        for (long k = 0; k <= n; ++k) {
            if (k % every != 0 && k != n) continue;
            const double t = k == n ? c.t_end : static_cast<double>(k) * c.dt;
            const auto sol = explicit_solution(c.means0, prefs, t);
            auto row = detail::mean_row(t, sol.means, prefs, saving);
            row.price = sol.price;
            row.W_A = sol.means.Mx + sol.price * sol.means.My;
            row.W_B = sol.means.mx + sol.price * sol.means.my;
            out.rows.push_back(row);
        }
        sum.predicted_price = explicit_limit(c.means0, prefs).price;
        break;
    }
    case Model::linear_mc: {
        auto [dealers, specs] = initial_populations(c);
        LinearSimConfig lc;
        lc.prefs = prefs;
        lc.saving = saving;
        lc.coeff_model = c.coeff_model;
        lc.sigma = c.sigma;
        lc.dt = c.dt;
        lc.t_end = c.t_end;
        lc.seed = c.seed;
        lc.N_A = c.N_A;
        lc.N_B = c.N_B;
        auto series = run_linear(lc, std::move(dealers), std::move(specs), opt);
        out.rows = std::move(series.rows);
        out.snapshots = std::move(series.snapshots);
        sum.singular_rows = series.singular_rows;
        sum.predicted_price = detail::linear_prediction(c);
        break;
    }
    case Model::nonlinear_mc: {
        auto [dealers, specs] = initial_populations(c);
        NonlinearSimConfig nc;
        nc.prefs = prefs;
        nc.saving = saving;
        nc.coeff_model = c.coeff_model;
        nc.sigma = c.sigma;
        nc.mu = c.mu;
        nc.dt = c.dt;
        nc.t_end = c.t_end;
        nc.phase1_end = c.entry_time();
        nc.seed = c.seed;
        nc.N_A = c.N_A;
        nc.N_B = c.N_B;
        auto series = two_phase_run(nc, std::move(dealers), std::move(specs), opt);
        out.rows = std::move(series.rows);
        out.snapshots = std::move(series.snapshots);
        sum.singular_rows = series.singular_rows;
        sum.skipped_collisions = series.skipped_collisions;
        const double entry = static_cast<double>(entry_step(nc)) * nc.dt;
        for (const auto& r : out.rows)
            if (r.t < entry - 0.5 * nc.dt) sum.plateau_price = r.price;
        break;
    }
    }

    const auto& first = out.rows.front();
    const auto& last = out.rows.back();
    sum.terminal_time = last.t;
    sum.terminal_price = last.price;
    for (const auto& r : out.rows) {
        sum.drift_x = std::max(sum.drift_x, std::abs(r.total_x - first.total_x) / first.total_x);
        sum.drift_y = std::max(sum.drift_y, std::abs(r.total_y - first.total_y) / first.total_y);
    }

    if (write_files) {
        const auto series = series_path(c);
        write_series(out.rows, series, c.output.format);
        out.files.push_back(series);
        for (const auto& snap : out.snapshots) {
            const auto path = c.output.dir / (c.name + "_" + std::to_string(c.seed) + "_hist_" +
                                              detail::time_tag(snap.dealers.t) + ".json");
            const std::array<HistogramSnapshot, 2> pair{snap.dealers, snap.speculators};
            write_histograms(pair, path);
            out.files.push_back(path);
        }
        const auto summary = c.output.dir / (c.name + "_" + std::to_string(c.seed) + "_summary.json");
        detail::write_atomically(summary, to_json(sum).dump(2) + "\n");
        out.files.push_back(summary);
    }
    return out;
}

} // namespace kinex
