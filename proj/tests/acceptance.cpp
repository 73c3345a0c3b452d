// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <future>
#include <string>
#include <vector>

#include "kinex/kinex.hpp"

using namespace kinex;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Population degenerate(Role role, std::size_t n, GoodsPair at) { return {role, std::vector<GoodsPair>(n, at)}; }

const MeanState kCaption{3, 3, 10, 2};

// 1. RK4 against the closed form for lambda = (0, 1).
Verdict explicit_oracle() {
    const auto t0 = Clock::now();
    const auto prefs = Preferences::from_alpha(0.5);
    const auto traj = integrate_means(kCaption, prefs, {0.0, 1.0}, 10.0, 1e-3);
    const double Iy = 5.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        const double my = 2.0 * std::exp(-0.5 * t);
        const double Mx = 3.0 * std::exp(-(0.5 / 0.5) * (2.0 / Iy) * (1.0 - std::exp(-0.5 * t)));
        worst = std::max({worst, std::abs(traj.states[i].my - my) / my, std::abs(traj.states[i].Mx - Mx) / Mx});
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-8 && secs < 1.0,
            "max rel error " + fmt("%.3e", worst) + " (<= 1e-8), " + fmt("%.3f", secs) + " s (< 1 s)"};
}

// 2. Totals and the log-conserved quantity along the fig1-left ODE.
Verdict conserved_quantities() {
    const auto t0 = Clock::now();
    const auto prefs = Preferences::from_alpha(0.5);
    const SavingPolicy s(0.8, 0.2);
    const auto traj = integrate_means(kCaption, prefs, s, 50.0, 1e-3);
    const double q0 = conserved_quantity(kCaption, prefs, s, traj.totals);
    double dx = 0.0;
    double dy = 0.0;
    double dq = 0.0;
    for (const auto& m : traj.states) {
        dx = std::max(dx, std::abs(m.Mx + m.mx - 13.0) / 13.0);
        dy = std::max(dy, std::abs(m.My + m.my - 5.0) / 5.0);
        dq = std::max(dq, std::abs(conserved_quantity(m, prefs, s, traj.totals) - q0) / std::abs(q0));
    }
    const double secs = seconds_since(t0);
    return {dx <= 1e-9 && dy <= 1e-9 && dq <= 1e-9 && secs < 1.0,
            "drift X " + fmt("%.2e", dx) + ", Y " + fmt("%.2e", dy) + ", log-conserved " + fmt("%.2e", dq) +
                " (<= 1e-9), " + fmt("%.3f", secs) + " s (< 1 s)"};
}

// 3. ODE to T = 200 against bisection for every preset parameter set.
Verdict equilibrium_dual() {
    const auto t0 = Clock::now();
    double worst_rho = 0.0;
    double worst_p = 0.0;
    for (auto id : kFigurePresets) {
        const auto c = figure_preset(id);
        const auto eq = limit_price(c.means0, c.prefs(), c.saving());
        const auto traj = integrate_means(c.means0, c.prefs(), c.saving(), 200.0, 1e-3, 1000);
        const auto r = rho_transform(traj.states.back(), c.saving());
        worst_rho = std::max({worst_rho, std::abs(r.x - eq.rho), std::abs(r.y - eq.rho)});
        worst_p = std::max(worst_p, std::abs(traj.prices.back() - eq.limit_price) / eq.limit_price);
    }
    const double secs = seconds_since(t0);
    return {worst_rho <= 1e-6 && worst_p <= 1e-4 && secs < 5.0,
            "6 presets: max |rho_ode - rho| " + fmt("%.2e", worst_rho) + " (<= 1e-6), max price rel " +
                fmt("%.2e", worst_p) + " (<= 1e-4), " + fmt("%.2f", secs) + " s (< 5 s)"};
}

// 4. Linear MC with sigma dt = 1 is forward Euler of the mean equations.
Verdict linear_euler() {
    LinearSimConfig cfg;
    cfg.prefs = Preferences::from_alpha(0.5);
    cfg.saving = {0.8, 0.2};
    cfg.sigma = 1.0;
    cfg.dt = 1.0;
    cfg.t_end = 10000.0;
    cfg.N_A = cfg.N_B = 5000;
    const auto t0 = Clock::now();
    const auto series = run_linear(cfg, degenerate(Role::dealers, 5000, {3, 3}),
                                   degenerate(Role::speculators, 5000, {10, 2}));
    const double secs = seconds_since(t0);

    MeanState m = kCaption;
    double worst = 0.0;
    for (const auto& row : series.rows) {
        worst = std::max({worst, std::abs(row.Mx - m.Mx), std::abs(row.My - m.My), std::abs(row.mx - m.mx),
                          std::abs(row.my - m.my)});
        const double R = (m.Mx + 0.8 * m.mx) / (m.My + 0.2 * m.my);
        m = {m.Mx + 0.5 * (R * m.My - m.Mx), m.My + 0.5 * (m.Mx / R - m.My), m.mx + 0.5 * (R * 0.2 * m.my - 0.8 * m.mx),
             m.my + 0.5 * (0.8 * m.mx / R - 0.2 * m.my)};
    }
    const bool steps_ok = series.rows.size() == 10001;
    return {steps_ok && worst <= 1e-10 && secs < 10.0,
            "N = 10^4, 10^4 steps: max |mean - euler| " + fmt("%.2e", worst) + " (<= 1e-10), " + fmt("%.2f", secs) +
                " s (< 10 s)"};
}

// 5. Pairwise conservation and positivity over 10^6 random collisions of each kind.
Verdict pairwise_conservation() {
    const auto t0 = Clock::now();
    Rng rng(20240501);
    double worst = 0.0;
    double lowest = 0.0;
    bool all_done = true;
    for (int k = 0; k < 1'000'000; ++k) {
        const GoodsPair a{rng.uniform(0, 10), rng.uniform(0, 10)};
        const GoodsPair b{rng.uniform(0, 10), rng.uniform(0, 10)};
        const SavingPolicy s(rng.uniform(), rng.uniform());
        const auto c = sample_coefficients(CoefficientModel::uniform(0.5, 0.5), Preferences::from_alpha(0.5), rng);
        for (const auto& r : {dd_collision(a, b, c), ds_collision(a, b, s, c)}) {
            if (!r) {
                all_done = false;
                continue;
            }
            worst = std::max({worst, std::abs(r->first.x + r->second.x - (a.x + b.x)) / (a.x + b.x),
                              std::abs(r->first.y + r->second.y - (a.y + b.y)) / (a.y + b.y)});
            lowest = std::min({lowest, r->first.x, r->first.y, r->second.x, r->second.y});
        }
    }
    const double secs = seconds_since(t0);
    return {all_done && worst <= 1e-12 && lowest >= 0.0 && secs < 5.0,
            "max rel change " + fmt("%.2e", worst) + " (<= 1e-12), min holding " + fmt("%.3g", lowest) +
                " (>= 0), " + fmt("%.2f", secs) + " s (< 5 s)"};
}

// 6. ds_collision with lambda = (1, 1) is bit-identical to dd_collision.
Verdict lambda_reduction() {
    Rng rng(6);
    int mismatches = 0;
    for (int k = 0; k < 100'000; ++k) {
        const GoodsPair a{rng.uniform(0, 10), rng.uniform(0, 10)};
        const GoodsPair b{rng.uniform(0, 10), rng.uniform(0, 10)};
        const auto c = sample_coefficients(CoefficientModel::uniform(0.5, 0.5), Preferences::from_alpha(0.5), rng);
        const auto dd = dd_collision(a, b, c);
        const auto ds = ds_collision(a, b, SavingPolicy::none(), c);
        if (!dd || !ds || std::memcmp(&*dd, &*ds, sizeof(*dd)) != 0) ++mismatches;
    }
    return {mismatches == 0, "10^5 inputs, " + std::to_string(mismatches) + " bitwise mismatches"};
}

struct PresetRuns {
    std::vector<RunSummary> summaries;
    std::vector<std::vector<ObservableRow>> rows;
    double seconds = 0.0;
};

// Ten seeded runs of a preset, executed concurrently.
PresetRuns run_preset(std::string_view id, std::size_t record_every) {
    const auto t0 = Clock::now();
    std::vector<std::future<ScenarioOutcome>> futures;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto c = figure_preset(id);
        c.seed = seed;
        c.output.record_every = record_every;
        c.output.snapshot_every = 0;
        futures.push_back(std::async(std::launch::async, [c] { return run_scenario(c, false); }));
    }
    PresetRuns out;
    for (auto& f : futures) {
        auto o = f.get();
        out.summaries.push_back(o.summary);
        out.rows.push_back(std::move(o.rows));
    }
    out.seconds = seconds_since(t0);
    return out;
}

// 7. Global conservation over a full two-phase run at N = 10^4.
Verdict global_conservation() {
    const auto t0 = Clock::now();
    auto c = figure_preset("fig1-left");
    c.coeff_model = CoefficientModel::uniform(0.2, 0.2);
    c.output.snapshot_every = 0;
    const auto out = run_scenario(c, false);
    const double secs = seconds_since(t0);
    const auto& s = out.summary;
    return {s.drift_x <= 1e-9 && s.drift_y <= 1e-9 && out.rows.size() == 5001 && secs < 60.0,
            "fig1-left, N = " + std::to_string(c.N_A + c.N_B) + ", t_end = 50: drift X " + fmt("%.2e", s.drift_x) +
                ", Y " + fmt("%.2e", s.drift_y) + " (<= 1e-9), " + fmt("%.2f", secs) + " s (< 60 s)"};
}

double mean_terminal(const PresetRuns& r) {
    double sum = 0.0;
    for (const auto& s : r.summaries) sum += s.terminal_price;
    return sum / static_cast<double>(r.summaries.size());
}

// 8. Terminal prices of the second figure, averaged over 10 seeds.
Verdict figure2() {
    const auto left = run_preset("fig2-left", 100);
    const auto right = run_preset("fig2-right", 100);
    const double pl = mean_terminal(left);
    const double pr = mean_terminal(right);
    const double secs = left.seconds + right.seconds;
    return {pl >= 3.0 && pl <= 3.5 && pr >= 0.30 && pr <= 0.40 && secs < 600.0,
            "fig2-left " + fmt("%.4f", pl) + " (in [3, 3.5]), fig2-right " + fmt("%.4f", pr) +
                " (in [0.30, 0.40]), 10 seeds each, " + fmt("%.1f", secs) + " s (< 600 s)"};
}

// 9. fig1-left: price rises above the plateau after entry and the oscillation
// envelope, the seed-averaged maximum of |P - P_final| over consecutive
// windows, decays monotonically.
constexpr double kWindow = 5.0;
constexpr double kEnvelopeSlack = 0.0;

Verdict figure1_left() {
    const auto runs = run_preset("fig1-left", 1);
    const double entry = 10.0;
    const double t_end = 50.0;
    const auto windows = static_cast<std::size_t>((t_end - entry) / kWindow) - 1; // last window defines P_final
    std::vector<double> envelope(windows, 0.0);
    double plateau = 0.0;
    double final_price = 0.0;
    for (std::size_t s = 0; s < runs.rows.size(); ++s) {
        const auto& rows = runs.rows[s];
        double fsum = 0.0;
        int fcount = 0;
        for (const auto& r : rows)
            if (r.t >= t_end - kWindow - 1e-9) {
                fsum += r.price;
                ++fcount;
            }
        const double p_final = fsum / fcount;
        final_price += p_final / static_cast<double>(runs.rows.size());
        plateau += *runs.summaries[s].plateau_price / static_cast<double>(runs.rows.size());
        std::vector<double> env(windows, 0.0);
        for (const auto& r : rows) {
            if (r.t < entry - 1e-9 || r.t >= t_end - kWindow - 1e-9) continue;
            const auto w = std::min(windows - 1, static_cast<std::size_t>((r.t - entry + 1e-9) / kWindow));
            env[w] = std::max(env[w], std::abs(r.price - p_final));
        }
        for (std::size_t w = 0; w < windows; ++w) envelope[w] += env[w] / static_cast<double>(runs.rows.size());
    }
    bool monotone = true;
    std::string env_text;
    for (std::size_t w = 0; w < windows; ++w) {
        if (w > 0 && envelope[w] > envelope[w - 1] + kEnvelopeSlack) monotone = false;
        env_text += (w ? " " : "") + fmt("%.4f", envelope[w]);
    }
    return {final_price > plateau && monotone,
            "plateau " + fmt("%.4f", plateau) + " -> final " + fmt("%.4f", final_price) + "; envelope [" + env_text +
                "] non-increasing, 10 seeds, " + fmt("%.1f", runs.seconds) + " s"};
}

// 10. Uniform coefficient draws average to (alpha, beta).
Verdict coefficient_statistics() {
    const auto prefs = Preferences::from_alpha(0.3);
    const auto model = CoefficientModel::uniform(0.2, 0.15);
    Rng rng(10);
    constexpr int n = 1'000'000;
    double sa = 0.0;
    double sb = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto c = sample_coefficients(model, prefs, rng);
        sa += c.alpha;
        sb += c.beta;
    }
    const double se_a = 0.2 / std::sqrt(3.0 * n);
    const double se_b = 0.15 / std::sqrt(3.0 * n);
    const double za = std::abs(sa / n - 0.3) / se_a;
    const double zb = std::abs(sb / n - 0.7) / se_b;
    return {za <= 3.0 && zb <= 3.0, "10^6 draws: |z_alpha| " + fmt("%.2f", za) + ", |z_beta| " + fmt("%.2f", zb) +
                                        " (<= 3)"};
}

} // namespace

int main() {
    const std::array<std::pair<const char*, std::function<Verdict()>>, 10> criteria{{
        {"explicit-case oracle", explicit_oracle},
        {"conserved quantities", conserved_quantities},
        {"equilibrium dual oracle", equilibrium_dual},
        {"linear MC equals forward Euler", linear_euler},
        {"pairwise collision conservation", pairwise_conservation},
        {"lambda reduction", lambda_reduction},
        {"global conservation, nonlinear run", global_conservation},
        {"figure 2 terminal prices", figure2},
        {"figure 1 left qualitative", figure1_left},
        {"uniform coefficient statistics", coefficient_statistics},
    }};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("criterion %zu %s: %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
