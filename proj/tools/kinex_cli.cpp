// Command-line driver: run scenarios, figure presets, equilibrium analysis
// and seeded ensembles.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.

#include <cmath>
#include <cstdint>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kinex/kinex.hpp"

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> t_end;
    std::optional<std::string> out;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Override the RNG seed");
    cmd->add_option("--t-end", o.t_end, "Override the final time");
    cmd->add_option("--out", o.out, "Output directory");
}

kinex::ScenarioConfig apply(kinex::ScenarioConfig c, const Overrides& o) {
    if (o.seed) c.seed = *o.seed;
    if (o.t_end) c.t_end = *o.t_end;
    if (o.out) c.output.dir = *o.out;
    kinex::require_valid(c);
    return c;
}

int report(const kinex::RunSummary& s, bool summary) {
    if (summary) std::cout << kinex::summary_line(s) << '\n';
    if (s.singular_rows > 0 || !std::isfinite(s.terminal_price)) {
        std::cerr << "error: market price became singular in " << s.singular_rows << " recorded rows\n";
        return kNumeric;
    }
    return kOk;
}

int run_one(const kinex::ScenarioConfig& c, bool summary) {
    const auto outcome = kinex::run_scenario(c);
    if (!summary) {
        for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << '\n';
    }
    return report(outcome.summary, summary);
}

int run_equilibrium(kinex::ScenarioConfig c, bool summary) {
    c.model = kinex::Model::equilibrium;
    kinex::require_valid(c);
    const auto eq = kinex::limit_price(c.means0, c.prefs(), c.saving());
    const auto outcome = kinex::run_scenario(c);
    const auto& s = outcome.summary;
    std::cout << "rho = " << kinex::detail::num(eq.rho) << " (" << eq.iterations << " bisection steps)\n"
              << "limit_price = " << kinex::detail::num(eq.limit_price) << '\n'
              << "limit_means = Mx " << kinex::detail::num(eq.limit_means.Mx) << ", My "
              << kinex::detail::num(eq.limit_means.My) << ", mx " << kinex::detail::num(eq.limit_means.mx)
              << ", my " << kinex::detail::num(eq.limit_means.my) << '\n'
              << "ode at t = " << kinex::detail::num(s.terminal_time) << ": rho_x = "
              << kinex::detail::num(*s.terminal_rho) << ", price = " << kinex::detail::num(s.terminal_price)
              << '\n';
    return report(s, summary);
}

int run_ensemble(const kinex::ScenarioConfig& base, std::size_t replicas, std::size_t threads, bool summary) {
    if (replicas == 0) throw kinex::ConfigError("--replicas must be positive");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<kinex::RunSummary> results(replicas);
    std::size_t next = 0;
    while (next < replicas) {
        std::vector<std::future<kinex::RunSummary>> batch;
        for (std::size_t k = 0; k < threads && next < replicas; ++k, ++next) {
            auto c = base;
            c.seed = base.seed + next;
            batch.push_back(std::async(std::launch::async, [c] { return kinex::run_scenario(c).summary; }));
        }
        const std::size_t first = next - batch.size();
        for (std::size_t k = 0; k < batch.size(); ++k) results[first + k] = batch[k].get();
    }

    int code = kOk;
    double sum = 0.0;
    double sum2 = 0.0;
    for (const auto& s : results) {
        code = std::max(code, report(s, summary));
        sum += s.terminal_price;
        sum2 += s.terminal_price * s.terminal_price;
    }
    const auto n = static_cast<double>(replicas);
    const double mean = sum / n;
    const double se = replicas > 1 ? std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0)) / n) : 0.0;
    std::cout << "ensemble scenario=" << base.name << " replicas=" << replicas
              << " mean_terminal_price=" << kinex::detail::num(mean)
              << " standard_error=" << kinex::detail::num(se) << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinex: kinetic two-population goods-exchange market simulator"};
    app.require_subcommand(1);

    bool summary = false;
    app.add_flag("--summary", summary, "Print a one-line verdict per run");

    Overrides run_o;
    std::string run_config;
    auto* run = app.add_subcommand("run", "Run a scenario file");
    run->add_option("config", run_config, "Scenario JSON")->required();
    run->add_flag("--summary", summary, "Print a one-line verdict");
    add_overrides(run, run_o);

    Overrides preset_o;
    std::string preset_id;
    bool print_config = false;
    auto* preset = app.add_subcommand("preset", "Run a figure preset (fig1-left ... fig3-right)");
    preset->add_option("id", preset_id, "Preset id")->required();
    preset->add_flag("--print-config", print_config, "Print the preset as a scenario document and exit");
    preset->add_flag("--summary", summary, "Print a one-line verdict");
    add_overrides(preset, preset_o);

    Overrides eq_o;
    std::string eq_config;
    auto* equilibrium = app.add_subcommand("equilibrium", "Limit price of the linear model plus ODE check");
    equilibrium->add_option("config", eq_config, "Scenario JSON")->required();
    equilibrium->add_flag("--summary", summary, "Print a one-line verdict");
    add_overrides(equilibrium, eq_o);

    Overrides ens_o;
    std::string ens_config;
    std::size_t replicas = 0;
    std::size_t threads = 0;
    auto* ensemble = app.add_subcommand("ensemble", "Run R seeded replicas concurrently");
    ensemble->add_option("config", ens_config, "Scenario JSON")->required();
    ensemble->add_option("--replicas", replicas, "Number of replicas (seeds seed, seed+1, ...)")->required();
    ensemble->add_option("--threads", threads, "Concurrent replicas (default: hardware threads)");
    ensemble->add_flag("--summary", summary, "Print a one-line verdict per replica");
    add_overrides(ensemble, ens_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (run->parsed()) return run_one(apply(kinex::load_config(run_config), run_o), summary);
        if (preset->parsed()) {
            auto c = kinex::figure_preset(preset_id);
            if (print_config) {
                std::cout << kinex::to_json(apply(c, preset_o)).dump(2) << '\n';
                return kOk;
            }
            return run_one(apply(c, preset_o), summary);
        }
        if (equilibrium->parsed())
            return run_equilibrium(apply(kinex::load_config(eq_config), eq_o), summary);
        if (ensemble->parsed())
            return run_ensemble(apply(kinex::load_config(ens_config), ens_o), replicas, threads, summary);
    } catch (const kinex::ConfigError& e) {
        for (const auto& v : e.violations()) std::cerr << "config error: " << v << '\n';
        return kConfig;
    } catch (const kinex::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumeric;
    }
    return kOk;
}
