#pragma once

// Experiment descriptions: the JSON scenario format, its exhaustive
// validation with line-accurate diagnostics, and the figure presets.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kinex/errors.hpp"
#include "kinex/market.hpp"
#include "kinex/observables.hpp"
#include "kinex/population.hpp"

namespace kinex {

enum class Model { meanfield, linear_mc, nonlinear_mc, equilibrium, explicit_case };

inline constexpr std::array<std::pair<Model, std::string_view>, 5> kModelNames{{
    {Model::meanfield, "meanfield"},
    {Model::linear_mc, "linear_mc"},
    {Model::nonlinear_mc, "nonlinear_mc"},
    {Model::equilibrium, "equilibrium"},
    {Model::explicit_case, "explicit"},
}};

constexpr std::string_view to_string(Model m) noexcept {
    for (const auto& [model, name] : kModelNames)
        if (model == m) return name;
    return "?";
}

inline std::optional<Model> parse_model(std::string_view s) {
    for (const auto& [model, name] : kModelNames)
        if (name == s) return model;
    return std::nullopt;
}

struct OutputSpec {
    std::filesystem::path dir = ".";
    SeriesFormat format = SeriesFormat::csv;
    std::size_t record_every = 1;
    std::size_t snapshot_every = 100;
    std::size_t histogram_bins = 32;
};

/// Full description of one experiment. Plain values; `validate` reports every
/// violated constraint and the typed accessors assume a valid config.
struct ScenarioConfig {
    std::string name = "scenario";
    Model model = Model::meanfield;
    double alpha = 0.5;
    double beta = 0.5;
    double lambda_x = 1.0;
    double lambda_y = 1.0;
    CoefficientModel coeff_model;
    MeanState means0;
    std::size_t N_A = 5000;
    std::size_t N_B = 5000;
    double sigma = 1.0;
    double mu = 1.0;
    double dt = 0.01;
    double t_end = 50.0;
    /// Defaults to 10 / sigma.
    std::optional<double> phase1_end;
    std::uint64_t seed = 1;
    OutputSpec output;
    InitShape init_shape;

    Preferences prefs() const { return {alpha, beta}; }
    SavingPolicy saving() const { return {lambda_x, lambda_y}; }
    double entry_time() const { return phase1_end.value_or(10.0 / sigma); }
};

/// One violated constraint, located by JSON pointer.
struct Violation {
    std::string pointer;
    std::string message;
};

namespace detail {

inline std::string num(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

} // namespace detail

/// Every constraint the solvers rely on, checked up front.
inline std::vector<Violation> validate(const ScenarioConfig& c) {
    std::vector<Violation> v;
    auto fail = [&](std::string ptr, std::string msg) { v.push_back({std::move(ptr), std::move(msg)}); };
    using detail::num;

    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
        fail("/name", "must be a nonempty file-name-safe string");

    const bool alpha_ok = c.alpha > 0.0 && c.alpha < 1.0;
    if (!alpha_ok) fail("/prefs/alpha", "must lie in (0,1), got " + num(c.alpha));
    if (!(c.beta > 0.0 && c.beta < 1.0)) fail("/prefs/beta", "must lie in (0,1), got " + num(c.beta));
    if (!(std::abs(c.alpha + c.beta - 1.0) <= Preferences::kSumTolerance))
        fail("/prefs", "alpha + beta must equal 1 (got " + num(c.alpha) + " + " + num(c.beta) + ")");

    const bool lx_ok = c.lambda_x >= 0.0 && c.lambda_x <= 1.0;
    const bool ly_ok = c.lambda_y >= 0.0 && c.lambda_y <= 1.0;
    if (!lx_ok) fail("/saving/lambda_x", "must lie in [0,1], got " + num(c.lambda_x));
    if (!ly_ok) fail("/saving/lambda_y", "must lie in [0,1], got " + num(c.lambda_y));

    const auto& m = c.means0;
    const std::array<std::pair<const char*, double>, 4> means{
        {{"/means0/Mx", m.Mx}, {"/means0/My", m.My}, {"/means0/mx", m.mx}, {"/means0/my", m.my}}};
    bool means_ok = true;
    for (const auto& [ptr, val] : means) {
        if (!(val >= 0.0) || !std::isfinite(val)) {
            fail(ptr, "must be a finite nonnegative number, got " + num(val));
            means_ok = false;
        }
    }
    if (means_ok && lx_ok && ly_ok) {
        if (!(m.Mx + c.lambda_x * m.mx > 0.0))
            fail("/means0", "no good X on the market: Mx + lambda_x * mx must be positive");
        if (!(m.My + c.lambda_y * m.my > 0.0))
            fail("/means0", "no good Y on the market: My + lambda_y * my must be positive");
    }

    if (c.coeff_model.mode == CoefficientModel::Mode::uniform) {
        const double da = c.coeff_model.half_width_alpha;
        const double db = c.coeff_model.half_width_beta;
        if (!(da >= 0.0)) fail("/coeff_model/half_width_alpha", "must be nonnegative");
        if (!(db >= 0.0)) fail("/coeff_model/half_width_beta", "must be nonnegative");
        constexpr double lo = -CoefficientModel::kEdgeTolerance;
        constexpr double hi = 1.0 + CoefficientModel::kEdgeTolerance;
        if (alpha_ok && (c.alpha - da < lo || c.alpha + da > hi))
            fail("/coeff_model/half_width_alpha", "[alpha - d, alpha + d] must lie in [0,1]");
        if (c.beta > 0.0 && c.beta < 1.0 && (c.beta - db < lo || c.beta + db > hi))
            fail("/coeff_model/half_width_beta", "[beta - d, beta + d] must lie in [0,1]");
    }

    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) fail("/dt", "must be positive, got " + num(c.dt));
    if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) fail("/t_end", "must be positive, got " + num(c.t_end));
    if (!(c.sigma > 0.0) || !std::isfinite(c.sigma)) fail("/sigma", "must be positive, got " + num(c.sigma));
    if (!(c.mu > 0.0) || !std::isfinite(c.mu)) fail("/mu", "must be positive, got " + num(c.mu));
    if (c.N_A < 1) fail("/N_A", "must be positive");
    if (c.N_B < 1) fail("/N_B", "must be positive");
    if (c.output.record_every < 1) fail("/output/record_every", "must be at least 1");
    if (c.output.histogram_bins < 1) fail("/output/histogram_bins", "must be at least 1");
    if (c.init_shape.kind == InitShape::Kind::uniform_spread &&
        !(c.init_shape.width >= 0.0 && c.init_shape.width <= 1.0))
        fail("/init_shape/width", "must lie in [0,1], got " + num(c.init_shape.width));

    switch (c.model) {
    case Model::linear_mc:
        if (c.sigma * c.dt > 1.0) fail("/dt", "sigma * dt must not exceed 1 (it is an update probability)");
        break;
    case Model::nonlinear_mc: {
        if (c.N_A < 2) fail("/N_A", "nonlinear_mc needs at least 2 dealers");
        if (c.sigma * c.dt > 1.0) fail("/dt", "sigma * dt must not exceed 1");
        if (c.mu * c.dt > static_cast<double>(c.N_A)) fail("/dt", "mu * dt must not exceed N_A");
        const double entry = c.entry_time();
        if (!(entry >= 0.0) || entry > c.t_end)
            fail("/phase1_end", "must lie in [0, t_end], got " + num(entry));
        break;
    }
    case Model::equilibrium:
        if (c.lambda_x == 0.0 || c.lambda_y == 0.0)
            fail("/saving", "equilibrium needs lambda_x > 0 and lambda_y > 0; use model meanfield "
                            "(or explicit for lambda = (0, 1)) instead");
        break;
    case Model::explicit_case:
        if (c.lambda_x != 0.0 || c.lambda_y != 1.0)
            fail("/saving", "explicit model requires lambda_x = 0 and lambda_y = 1");
        if (!(m.My + m.my > 0.0)) fail("/means0", "explicit model requires My + my > 0");
        break;
    case Model::meanfield:
        break;
    }
    return v;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["model"] = std::string(to_string(c.model));
    j["prefs"] = {{"alpha", c.alpha}, {"beta", c.beta}};
    j["saving"] = {{"lambda_x", c.lambda_x}, {"lambda_y", c.lambda_y}};
    j["coeff_model"] = {
        {"mode", c.coeff_model.mode == CoefficientModel::Mode::uniform ? "uniform" : "deterministic"},
        {"half_width_alpha", c.coeff_model.half_width_alpha},
        {"half_width_beta", c.coeff_model.half_width_beta}};
    j["means0"] = {{"Mx", c.means0.Mx}, {"My", c.means0.My}, {"mx", c.means0.mx}, {"my", c.means0.my}};
    j["N_A"] = c.N_A;
    j["N_B"] = c.N_B;
    j["sigma"] = c.sigma;
    j["mu"] = c.mu;
    j["dt"] = c.dt;
    j["t_end"] = c.t_end;
    if (c.phase1_end) j["phase1_end"] = *c.phase1_end;
    j["seed"] = c.seed;
    j["output"] = {{"dir", c.output.dir.string()},
                   {"format", c.output.format == SeriesFormat::csv ? "csv" : "jsonl"},
                   {"record_every", c.output.record_every},
                   {"snapshot_every", c.output.snapshot_every},
                   {"histogram_bins", c.output.histogram_bins}};
    if (c.init_shape.kind == InitShape::Kind::degenerate)
        j["init_shape"] = {{"kind", "degenerate"}};
    else
        j["init_shape"] = {{"kind", "uniform_spread"}, {"width", c.init_shape.width}};
    return j;
}

namespace detail {

/// Maps the JSON pointer of every object member to the 1-based line of its key.
inline std::map<std::string, int> key_lines(std::string_view text) {
    struct Frame {
        bool object;
        std::string prefix;
        std::size_t index = 0;
        bool expect_key = true;
        std::string key;
    };
    std::map<std::string, int> lines;
    lines[""] = 1;
    std::vector<Frame> stack;
    int line = 1;
    auto child_pointer = [&]() -> std::string {
        if (stack.empty()) return "";
        auto& f = stack.back();
        return f.prefix + "/" + (f.object ? f.key : std::to_string(f.index));
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch == '\n') {
            ++line;
        } else if (ch == '"') {
            std::string s;
            const int start_line = line;
            for (++i; i < text.size() && text[i] != '"'; ++i) {
                if (text[i] == '\\' && i + 1 < text.size()) {
                    ++i;
                    s += text[i] == '/' ? '/' : text[i];
                } else {
                    if (text[i] == '\n') ++line;
                    s += text[i];
                }
            }
            if (!stack.empty() && stack.back().object && stack.back().expect_key) {
                auto& f = stack.back();
                std::string escaped;
                for (char k : s) {
                    if (k == '~') escaped += "~0";
                    else if (k == '/') escaped += "~1";
                    else escaped += k;
                }
                f.key = escaped;
                f.expect_key = false;
                lines[f.prefix + "/" + f.key] = start_line;
            }
        } else if (ch == '{' || ch == '[') {
            const auto ptr = child_pointer();
            if (!lines.count(ptr)) lines[ptr] = line;
            stack.push_back({ch == '{', ptr, 0, true, {}});
        } else if (ch == '}' || ch == ']') {
            if (!stack.empty()) stack.pop_back();
        } else if (ch == ',' && !stack.empty()) {
            auto& f = stack.back();
            if (f.object)
                f.expect_key = true;
            else
                ++f.index;
        }
    }
    return lines;
}

/// Line of `pointer`, falling back to its closest located ancestor.
inline int line_of(const std::map<std::string, int>& lines, std::string pointer) {
    for (;;) {
        if (auto it = lines.find(pointer); it != lines.end()) return it->second;
        if (pointer.empty()) return 1;
        pointer.erase(pointer.rfind('/'));
    }
}

class ConfigReader {
public:
    explicit ConfigReader(std::vector<Violation>& errs) : errs_(errs) {}

    void fail(const std::string& ptr, const std::string& msg) { errs_.push_back({ptr, msg}); }

    /// Rejects members not listed in `allowed`.
    void check_keys(const nlohmann::json& obj, const std::string& ptr,
                    std::initializer_list<std::string_view> allowed) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool known = false;
            for (auto a : allowed) known = known || it.key() == a;
            if (!known) {
                std::string options;
                for (auto a : allowed) options += (options.empty() ? "" : ", ") + std::string(a);
                fail(ptr + "/" + it.key(), "unknown key '" + it.key() + "' (expected one of: " + options + ")");
            }
        }
    }

    const nlohmann::json* object(const nlohmann::json& parent, const std::string& ptr,
                                 const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(ptr, std::string("missing required key '") + key + "'");
            return nullptr;
        }
        const auto& v = parent.at(key);
        if (!v.is_object()) {
            fail(ptr + "/" + key, "must be an object");
            return nullptr;
        }
        return &v;
    }

    void number(const nlohmann::json& parent, const std::string& ptr, const char* key, double& out,
                bool required) {
        if (!parent.contains(key)) {
            if (required) fail(ptr, std::string("missing required key '") + key + "'");
            return;
        }
        const auto& v = parent.at(key);
        if (!v.is_number()) {
            fail(ptr + "/" + key, "must be a number");
            return;
        }
        out = v.get<double>();
    }

    template <class Int>
    void integer(const nlohmann::json& parent, const std::string& ptr, const char* key, Int& out) {
        if (!parent.contains(key)) return;
        const auto& v = parent.at(key);
        if (v.is_number_unsigned()) {
            out = static_cast<Int>(v.get<std::uint64_t>());
        } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
            out = static_cast<Int>(v.get<std::int64_t>());
        } else {
            fail(ptr + "/" + key, "must be a nonnegative integer");
        }
    }

    std::optional<std::string> string(const nlohmann::json& parent, const std::string& ptr,
                                      const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(ptr, std::string("missing required key '") + key + "'");
            return std::nullopt;
        }
        const auto& v = parent.at(key);
        if (!v.is_string()) {
            fail(ptr + "/" + key, "must be a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

private:
    std::vector<Violation>& errs_;
};

} // namespace detail

/// Builds a config from a parsed document. Structural problems (unknown keys,
/// wrong types, missing sections) and constraint violations are all appended
/// to `errs`; the returned config is meaningful only when `errs` stays empty.
inline ScenarioConfig from_json(const nlohmann::json& j, std::vector<Violation>& errs) {
    ScenarioConfig c;
    detail::ConfigReader r(errs);
    if (!j.is_object()) {
        r.fail("", "scenario must be a JSON object");
        return c;
    }
    r.check_keys(j, "", {"name", "model", "prefs", "saving", "coeff_model", "means0", "N_A", "N_B",
                         "sigma", "mu", "dt", "t_end", "phase1_end", "seed", "output", "init_shape"});

    if (auto s = r.string(j, "", "name", false)) c.name = *s;
    if (auto s = r.string(j, "", "model", true)) {
        if (auto m = parse_model(*s))
            c.model = *m;
        else
            r.fail("/model", "unknown model '" + *s +
                                 "' (expected meanfield, linear_mc, nonlinear_mc, equilibrium or explicit)");
    }

    if (const auto* p = r.object(j, "", "prefs", true)) {
        r.check_keys(*p, "/prefs", {"alpha", "beta"});
        r.number(*p, "/prefs", "alpha", c.alpha, true);
        r.number(*p, "/prefs", "beta", c.beta, true);
    }
    if (const auto* p = r.object(j, "", "saving", true)) {
        r.check_keys(*p, "/saving", {"lambda_x", "lambda_y"});
        r.number(*p, "/saving", "lambda_x", c.lambda_x, true);
        r.number(*p, "/saving", "lambda_y", c.lambda_y, true);
    }
    if (const auto* p = r.object(j, "", "means0", true)) {
        r.check_keys(*p, "/means0", {"Mx", "My", "mx", "my"});
        r.number(*p, "/means0", "Mx", c.means0.Mx, true);
        r.number(*p, "/means0", "My", c.means0.My, true);
        r.number(*p, "/means0", "mx", c.means0.mx, true);
        r.number(*p, "/means0", "my", c.means0.my, true);
    }
    if (const auto* p = r.object(j, "", "coeff_model", false)) {
        r.check_keys(*p, "/coeff_model", {"mode", "half_width_alpha", "half_width_beta"});
        if (auto mode = r.string(*p, "/coeff_model", "mode", true)) {
            if (*mode == "uniform")
                c.coeff_model.mode = CoefficientModel::Mode::uniform;
            else if (*mode != "deterministic")
                r.fail("/coeff_model/mode", "must be 'deterministic' or 'uniform'");
        }
        r.number(*p, "/coeff_model", "half_width_alpha", c.coeff_model.half_width_alpha, false);
        r.number(*p, "/coeff_model", "half_width_beta", c.coeff_model.half_width_beta, false);
    }

    r.integer(j, "", "N_A", c.N_A);
    r.integer(j, "", "N_B", c.N_B);
    r.number(j, "", "sigma", c.sigma, false);
    r.number(j, "", "mu", c.mu, false);
    r.number(j, "", "dt", c.dt, false);
    r.number(j, "", "t_end", c.t_end, false);
    if (j.contains("phase1_end")) {
        double v = 0.0;
        r.number(j, "", "phase1_end", v, false);
        c.phase1_end = v;
    }
    r.integer(j, "", "seed", c.seed);

    if (const auto* p = r.object(j, "", "output", false)) {
        r.check_keys(*p, "/output", {"dir", "format", "record_every", "snapshot_every", "histogram_bins"});
        if (auto d = r.string(*p, "/output", "dir", false)) c.output.dir = *d;
        if (auto f = r.string(*p, "/output", "format", false)) {
            if (*f == "jsonl")
                c.output.format = SeriesFormat::jsonl;
            else if (*f != "csv")
                r.fail("/output/format", "must be 'csv' or 'jsonl'");
        }
        r.integer(*p, "/output", "record_every", c.output.record_every);
        r.integer(*p, "/output", "snapshot_every", c.output.snapshot_every);
        r.integer(*p, "/output", "histogram_bins", c.output.histogram_bins);
    }
    if (const auto* p = r.object(j, "", "init_shape", false)) {
        r.check_keys(*p, "/init_shape", {"kind", "width"});
        if (auto kind = r.string(*p, "/init_shape", "kind", true)) {
            if (*kind == "uniform_spread") {
                c.init_shape.kind = InitShape::Kind::uniform_spread;
                r.number(*p, "/init_shape", "width", c.init_shape.width, true);
            } else if (*kind == "degenerate") {
                if (p->contains("width")) r.fail("/init_shape/width", "only valid for kind 'uniform_spread'");
            } else {
                r.fail("/init_shape/kind", "must be 'degenerate' or 'uniform_spread'");
            }
        }
    }

    auto more = validate(c);
    errs.insert(errs.end(), more.begin(), more.end());
    return c;
}

/// Parses and validates a scenario document. `source` names it in messages.
inline ScenarioConfig parse_config(std::string_view text, const std::string& source = "<config>") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Locate the byte offset reported by the parser.
        int line = 1;
        for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError(source + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
    }
    std::vector<Violation> errs;
    auto cfg = from_json(j, errs);
    if (errs.empty()) return cfg;

    const auto lines = detail::key_lines(text);
    std::vector<std::string> msgs;
    msgs.reserve(errs.size());
    for (const auto& e : errs)
        msgs.push_back(source + ":" + std::to_string(detail::line_of(lines, e.pointer)) + ": " +
                       (e.pointer.empty() ? "/" : e.pointer) + ": " + e.message);
    throw ConfigError(std::move(msgs));
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
    return parse_config(detail::read_file(path), path.string());
}

/// Throws ConfigError listing every violation of an already-built config.
inline void require_valid(const ScenarioConfig& c) {
    const auto errs = validate(c);
    if (errs.empty()) return;
    std::vector<std::string> msgs;
    for (const auto& e : errs) msgs.push_back(e.pointer + ": " + e.message);
    throw ConfigError(std::move(msgs));
}

inline constexpr std::array<std::string_view, 6> kFigurePresets{
    "fig1-left", "fig1-right", "fig2-left", "fig2-right", "fig3-left", "fig3-right"};

/// Speculator share of the N = 10^4 agents in the figure presets.
inline constexpr std::size_t kPresetDealers = 9800;
inline constexpr std::size_t kPresetSpeculators = 200;

/// Parameter sets of the published price figures, run as two-phase
/// nonlinear experiments: 10^4 agents of which 2% are speculators, entry at
/// t = 10 / sigma, t_end = 50. The third figure's "7,5" is read as 7.5.
inline ScenarioConfig figure_preset(std::string_view id) {
    struct Row {
        std::string_view id;
        double alpha, Mx, mx, My, my, lx, ly;
    };
    static constexpr std::array<Row, 6> rows{{
        {"fig1-left", 0.5, 3, 10, 3, 2, 0.8, 0.2},
        {"fig1-right", 0.5, 3, 10, 3, 2, 0.5, 0.5},
        {"fig2-left", 0.25, 3, 10, 3, 2, 0.8, 0.2},
        {"fig2-right", 0.75, 3, 10, 3, 2, 0.5, 0.5},
        {"fig3-left", 0.5, 3, 20, 7.5, 5, 0.8, 0.2},
        {"fig3-right", 0.5, 3, 7.5, 20, 5, 0.2, 0.8},
    }};
    for (const auto& r : rows) {
        if (r.id != id) continue;
        ScenarioConfig c;
        c.name = std::string(r.id);
        c.model = Model::nonlinear_mc;
        c.alpha = r.alpha;
        c.beta = 1.0 - r.alpha;
        c.lambda_x = r.lx;
        c.lambda_y = r.ly;
        c.means0 = {r.Mx, r.My, r.mx, r.my};
        c.N_A = kPresetDealers;
        c.N_B = kPresetSpeculators;
        c.sigma = 1.0;
        c.mu = 1.0;
        c.dt = 0.01;
        c.t_end = 50.0;
        c.phase1_end = 10.0 / c.sigma;
        return c;
    }
    std::string known;
    for (auto k : kFigurePresets) known += (known.empty() ? "" : ", ") + std::string(k);
    throw ConfigError("unknown preset '" + std::string(id) + "' (known: " + known + ")");
}

} // namespace kinex
