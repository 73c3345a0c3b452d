#pragma once

// Per-step observables, distribution snapshots and their file formats.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "kinex/errors.hpp"
#include "kinex/market.hpp"
#include "kinex/population.hpp"

namespace kinex {

struct ObservableRow {
    double t = 0.0;
    double price = 0.0;
    double Mx = 0.0;
    double My = 0.0;
    double mx = 0.0;
    double my = 0.0;
    double W_A = 0.0;
    double W_B = 0.0;
    double var_x_A = 0.0;
    double var_y_A = 0.0;
    double var_x_B = 0.0;
    double var_y_B = 0.0;
    double total_x = 0.0;
    double total_y = 0.0;
};

inline constexpr std::array<std::string_view, 14> kSeriesColumns{
    "t", "price", "Mx", "My", "mx", "my", "W_A", "W_B",
    "var_x_A", "var_y_A", "var_x_B", "var_y_B", "total_x", "total_y"};

inline constexpr std::array<double ObservableRow::*, 14> kSeriesFields{
    &ObservableRow::t,       &ObservableRow::price,   &ObservableRow::Mx,      &ObservableRow::My,
    &ObservableRow::mx,      &ObservableRow::my,      &ObservableRow::W_A,     &ObservableRow::W_B,
    &ObservableRow::var_x_A, &ObservableRow::var_y_A, &ObservableRow::var_x_B, &ObservableRow::var_y_B,
    &ObservableRow::total_x, &ObservableRow::total_y};

namespace detail {

inline std::array<double, 2> central_second_moments(std::span<const GoodsPair> agents,
                                                    GoodsPair mean) {
    double vx = 0.0;
    double vy = 0.0;
    for (const auto& a : agents) {
        vx += (a.x - mean.x) * (a.x - mean.x);
        vy += (a.y - mean.y) * (a.y - mean.y);
    }
    const auto n = static_cast<double>(agents.size());
    return {vx / n, vy / n};
}

} // namespace detail

/// Observables of the current state. `saving` is the policy active on the
/// market at time t (SavingPolicy::absent() while speculators stay out).
///
/// A vanishing price denominator yields NaN in price, W_A and W_B instead of
/// throwing; everything else is still filled in.
inline ObservableRow record(const Population& dealers, const Population& speculators,
                            const Preferences& prefs, const SavingPolicy& saving, double t) {
    const auto d = population_mean(dealers.holdings);
    const auto s = population_mean(speculators.holdings);
    ObservableRow row;
    row.t = t;
    row.Mx = d.x;
    row.My = d.y;
    row.mx = s.x;
    row.my = s.y;
    const MeanState means{d.x, d.y, s.x, s.y};
    if (effective_supply(means, saving).y > 0.0) {
        row.price = market_price(means, saving, prefs);
        row.W_A = d.x + row.price * d.y;
        row.W_B = s.x + row.price * s.y;
    } else {
        row.price = row.W_A = row.W_B = std::numeric_limits<double>::quiet_NaN();
    }
    const auto vd = detail::central_second_moments(dealers.holdings, d);
    const auto vs = detail::central_second_moments(speculators.holdings, s);
    row.var_x_A = vd[0];
    row.var_y_A = vd[1];
    row.var_x_B = vs[0];
    row.var_y_B = vs[1];
    const auto td = population_total(dealers.holdings);
    const auto ts = population_total(speculators.holdings);
    row.total_x = td.x + ts.x;
    row.total_y = td.y + ts.y;
    return row;
}

/// Accumulates rows for one run and counts those with a singular price.
class Recorder {
public:
    void push(const ObservableRow& row) {
        if (std::isnan(row.price)) ++singular_rows_;
        rows_.push_back(row);
    }

    const std::vector<ObservableRow>& rows() const noexcept { return rows_; }
    std::vector<ObservableRow> release() { return std::move(rows_); }
    std::size_t singular_rows() const noexcept { return singular_rows_; }

private:
    std::vector<ObservableRow> rows_;
    std::size_t singular_rows_ = 0;
};

struct HistogramRange {
    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;
    double ratio_min = 0.0;
    double ratio_max = 1.0;

    /// Smallest range starting at zero that covers every holding and ratio.
    static HistogramRange covering(std::span<const GoodsPair> agents) {
        HistogramRange r;
        double mx = 0.0;
        double my = 0.0;
        double mr = 0.0;
        for (const auto& a : agents) {
            mx = std::max(mx, a.x);
            my = std::max(my, a.y);
            if (a.x > 0.0) mr = std::max(mr, a.y / a.x);
        }
        auto pad = [](double v) { return v > 0.0 ? v * (1.0 + 1e-9) : 1.0; };
        r.x_max = pad(mx);
        r.y_max = pad(my);
        r.ratio_max = pad(mr);
        return r;
    }
};

struct HistogramSnapshot {
    double t = 0.0;
    Role population = Role::dealers;
    std::vector<double> x_edges;
    std::vector<double> y_edges;
    /// counts[i * bins + j] for x bin i and y bin j.
    std::vector<std::uint64_t> counts;
    std::vector<double> ratio_edges;
    /// Histogram of y/x over agents with x > 0.
    std::vector<std::uint64_t> ratio_counts;

    std::size_t bins() const noexcept { return x_edges.empty() ? 0 : x_edges.size() - 1; }
};

namespace detail {

inline std::vector<double> edges(double lo, double hi, std::size_t bins) {
    std::vector<double> e(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    e.back() = hi;
    return e;
}

/// Bin of v in [lo, hi); values outside are clipped into the boundary bins.
inline std::size_t bin_of(double v, double lo, double hi, std::size_t bins) {
    const double f = (v - lo) / (hi - lo) * static_cast<double>(bins);
    if (!(f > 0.0)) return 0;
    if (f >= static_cast<double>(bins)) return bins - 1;
    return static_cast<std::size_t>(f);
}

inline void check_interval(double lo, double hi, const char* what) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw DomainError(std::string("snapshot_histogram: invalid ") + what + " range");
}

} // namespace detail

inline HistogramSnapshot snapshot_histogram(const Population& pop, std::size_t bins,
                                            const HistogramRange& range, double t) {
    if (bins < 1) throw DomainError("snapshot_histogram: bins must be at least 1");
    detail::check_interval(range.x_min, range.x_max, "x");
    detail::check_interval(range.y_min, range.y_max, "y");
    detail::check_interval(range.ratio_min, range.ratio_max, "ratio");

    HistogramSnapshot h;
    h.t = t;
    h.population = pop.role;
    h.x_edges = detail::edges(range.x_min, range.x_max, bins);
    h.y_edges = detail::edges(range.y_min, range.y_max, bins);
    h.ratio_edges = detail::edges(range.ratio_min, range.ratio_max, bins);
    h.counts.assign(bins * bins, 0);
    h.ratio_counts.assign(bins, 0);
    for (const auto& a : pop.holdings) {
        const auto i = detail::bin_of(a.x, range.x_min, range.x_max, bins);
        const auto j = detail::bin_of(a.y, range.y_min, range.y_max, bins);
        ++h.counts[i * bins + j];
        if (a.x > 0.0) ++h.ratio_counts[detail::bin_of(a.y / a.x, range.ratio_min, range.ratio_max, bins)];
    }
    return h;
}

enum class SeriesFormat { csv, jsonl };

namespace detail {

/// Shortest form is not required; 17 significant digits always round-trip.
inline void append_double(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "nan";
        return;
    }
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::general, 17);
    out.append(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s) {
    if (s == "nan" || s == "NaN" || s == "null") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DomainError("cannot parse number '" + std::string(s) + "'");
    return v;
}

/// Writes `content` to `path` through a temporary file so that the target is
/// either complete or absent.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path.string() + ": cannot create directory: " + ec.message());
    }
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError(tmp.string() + ": cannot open for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        os.flush();
        if (!os) throw IoError(tmp.string() + ": write failed");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError(path.string() + ": cannot move file into place");
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path.string() + ": cannot open for reading");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace detail

inline std::string format_series(std::span<const ObservableRow> rows, SeriesFormat format) {
    std::string out;
    if (format == SeriesFormat::csv) {
        for (std::size_t c = 0; c < kSeriesColumns.size(); ++c) {
            if (c) out += ',';
            out += kSeriesColumns[c];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < kSeriesFields.size(); ++c) {
                if (c) out += ',';
                detail::append_double(out, row.*kSeriesFields[c]);
            }
            out += '\n';
        }
        return out;
    }
    for (const auto& row : rows) {
        out += '{';
        for (std::size_t c = 0; c < kSeriesFields.size(); ++c) {
            if (c) out += ',';
            out += '"';
            out += kSeriesColumns[c];
            out += "\":";
            const double v = row.*kSeriesFields[c];
            if (std::isnan(v))
                out += "null";
            else
                detail::append_double(out, v);
        }
        out += "}\n";
    }
    return out;
}

inline void write_series(std::span<const ObservableRow> rows, const std::filesystem::path& path,
                         SeriesFormat format) {
    detail::write_atomically(path, format_series(rows, format));
}

inline std::vector<ObservableRow> parse_series_csv(std::string_view text) {
    std::vector<ObservableRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        auto line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cells.size() != kSeriesColumns.size())
            throw DomainError("series csv: expected " + std::to_string(kSeriesColumns.size()) +
                              " columns, got " + std::to_string(cells.size()));
        if (header) {
            for (std::size_t c = 0; c < cells.size(); ++c)
                if (cells[c] != kSeriesColumns[c])
                    throw DomainError("series csv: unexpected column '" + std::string(cells[c]) + "'");
            header = false;
            continue;
        }
        ObservableRow row;
        for (std::size_t c = 0; c < cells.size(); ++c) row.*kSeriesFields[c] = detail::parse_double(cells[c]);
        rows.push_back(row);
    }
    if (header) throw DomainError("series csv: missing header");
    return rows;
}

inline std::vector<ObservableRow> parse_series_jsonl(std::string_view text) {
    std::vector<ObservableRow> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const auto line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        ObservableRow row;
        for (std::size_t c = 0; c < kSeriesColumns.size(); ++c) {
            const auto& v = j.at(std::string(kSeriesColumns[c]));
            row.*kSeriesFields[c] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<ObservableRow> read_series(const std::filesystem::path& path, SeriesFormat format) {
    const auto text = detail::read_file(path);
    return format == SeriesFormat::csv ? parse_series_csv(text) : parse_series_jsonl(text);
}

inline nlohmann::json to_json(const HistogramSnapshot& h) {
    nlohmann::json j;
    j["t"] = h.t;
    j["population"] = std::string(to_string(h.population));
    j["x_edges"] = h.x_edges;
    j["y_edges"] = h.y_edges;
    auto counts = nlohmann::json::array();
    const auto bins = h.bins();
    for (std::size_t i = 0; i < bins; ++i)
        counts.push_back(std::vector<std::uint64_t>(h.counts.begin() + static_cast<std::ptrdiff_t>(i * bins),
                                                    h.counts.begin() + static_cast<std::ptrdiff_t>((i + 1) * bins)));
    j["counts"] = std::move(counts);
    j["ratio_edges"] = h.ratio_edges;
    j["ratio_counts"] = h.ratio_counts;
    return j;
}

/// Writes `{dealers: ..., speculators: ...}` snapshots taken at one time.
inline void write_histograms(std::span<const HistogramSnapshot> snaps, const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& h : snaps) j[std::string(to_string(h.population))] = to_json(h);
    detail::write_atomically(path, j.dump(1) + "\n");
}

/// Recording cadence of a simulation run.
struct RunOptions {
    /// Keep every n-th step (the first and last step are always kept).
    std::size_t record_every = 1;
    /// Histogram snapshot every n steps plus first and last; 0 disables snapshots.
    std::size_t snapshot_every = 0;
    std::size_t histogram_bins = 32;
};

/// Histograms of both populations taken at the same time.
struct SnapshotPair {
    HistogramSnapshot dealers;
    HistogramSnapshot speculators;
};

struct RunSeries {
    std::vector<ObservableRow> rows;
    std::vector<SnapshotPair> snapshots;
    std::size_t singular_rows = 0;
    /// Collisions skipped because a combined quantity vanished.
    std::size_t skipped_collisions = 0;
    Population dealers;
    Population speculators;
};

namespace detail {

inline bool keep_step(std::size_t step, std::size_t last, std::size_t every) {
    return step == 0 || step == last || (every > 0 && step % every == 0);
}

inline SnapshotPair take_snapshots(const Population& dealers, const Population& speculators,
                                   std::size_t bins, double t) {
    return {snapshot_histogram(dealers, bins, HistogramRange::covering(dealers.holdings), t),
            snapshot_histogram(speculators, bins, HistogramRange::covering(speculators.holdings), t)};
}

} // namespace detail

} // namespace kinex
