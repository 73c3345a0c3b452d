#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>

#include "kinex/observables.hpp"

using namespace kinex;
namespace fs = std::filesystem;

namespace {

const Preferences kHalf = Preferences::from_alpha(0.5);

Population degenerate(Role role, std::size_t n, GoodsPair at) { return {role, std::vector<GoodsPair>(n, at)}; }

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("kinex_obs_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ObservableRow random_row(Rng& rng) {
    ObservableRow r;
    for (auto f : kSeriesFields) r.*f = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(80)) - 40);
    return r;
}

bool same_bits(const ObservableRow& a, const ObservableRow& b) {
    for (auto f : kSeriesFields)
        if (std::bit_cast<std::uint64_t>(a.*f) != std::bit_cast<std::uint64_t>(b.*f)) return false;
    return true;
}

} // namespace

TEST(Record, CaptionMeans) {
    const auto row = record(degenerate(Role::dealers, 50, {3, 3}), degenerate(Role::speculators, 20, {10, 2}), kHalf,
                            {0.8, 0.2}, 0.0);
    EXPECT_NEAR(row.price, 3.2352941176470589, 1e-14);
    EXPECT_NEAR(row.W_A, 3 + 3 * row.price, 1e-13);
    EXPECT_NEAR(row.W_B, 10 + 2 * row.price, 1e-13);
    EXPECT_DOUBLE_EQ(row.total_x, 50 * 3.0 + 20 * 10.0);
    EXPECT_DOUBLE_EQ(row.total_y, 50 * 3.0 + 20 * 2.0);
    EXPECT_EQ(row.var_x_A, 0.0);
    EXPECT_EQ(row.var_y_B, 0.0);
}

TEST(Record, SingleAgents) {
    const auto row = record(degenerate(Role::dealers, 1, {1, 1}), degenerate(Role::speculators, 1, {1, 1}), kHalf,
                            SavingPolicy::none(), 2.5);
    EXPECT_EQ(row.t, 2.5);
    EXPECT_EQ(row.price, 1.0);
    EXPECT_EQ(row.W_A, 2.0);
    EXPECT_EQ(row.W_B, 2.0);
    EXPECT_EQ(row.var_x_A + row.var_y_A + row.var_x_B + row.var_y_B, 0.0);
}

TEST(Record, VariancesArePopulationMoments) {
    Population d{Role::dealers, {{1, 2}, {3, 6}}};
    Population s{Role::speculators, {{0, 1}, {2, 1}, {4, 1}}};
    const auto row = record(d, s, kHalf, SavingPolicy::none(), 0.0);
    EXPECT_DOUBLE_EQ(row.var_x_A, 1.0);
    EXPECT_DOUBLE_EQ(row.var_y_A, 4.0);
    EXPECT_DOUBLE_EQ(row.var_x_B, 8.0 / 3.0);
    EXPECT_DOUBLE_EQ(row.var_y_B, 0.0);
}

TEST(Record, IsPure) {
    Rng rng(1);
    Population d{Role::dealers, {}};
    for (int i = 0; i < 100; ++i) d.holdings.push_back({rng.uniform(0, 5), rng.uniform(0, 5)});
    const auto s = degenerate(Role::speculators, 3, {1, 2});
    const auto copy = d;
    const auto a = record(d, s, kHalf, {0.3, 0.4}, 1.0);
    const auto b = record(d, s, kHalf, {0.3, 0.4}, 1.0);
    EXPECT_TRUE(same_bits(a, b));
    EXPECT_EQ(d, copy);
}

TEST(Record, SingularPriceIsASentinel) {
    const auto row = record(degenerate(Role::dealers, 2, {1, 0}), degenerate(Role::speculators, 2, {1, 1}), kHalf,
                            {1.0, 0.0}, 0.0);
    EXPECT_TRUE(std::isnan(row.price));
    EXPECT_TRUE(std::isnan(row.W_A));
    EXPECT_DOUBLE_EQ(row.total_x, 4.0);
    Recorder rec;
    rec.push(row);
    rec.push(record(degenerate(Role::dealers, 1, {1, 1}), degenerate(Role::speculators, 1, {1, 1}), kHalf,
                    SavingPolicy::none(), 1.0));
    EXPECT_EQ(rec.singular_rows(), 1u);
    EXPECT_EQ(rec.rows().size(), 2u);
}

TEST(Histogram, SinglePointSingleCell) {
    const auto pop = degenerate(Role::dealers, 1000, {2, 3});
    const auto h = snapshot_histogram(pop, 10, {0, 4, 0, 4, 0, 4}, 1.0);
    std::uint64_t total = 0;
    int nonzero = 0;
    for (auto c : h.counts) {
        total += c;
        nonzero += c > 0;
    }
    EXPECT_EQ(total, 1000u);
    EXPECT_EQ(nonzero, 1);
    EXPECT_EQ(h.counts[5 * 10 + 7], 1000u);
    EXPECT_EQ(h.ratio_counts[3], 1000u); // 1.5 in [1.2, 1.6)
}

TEST(Histogram, UniformAgentsPassChiSquare) {
    Rng rng(77);
    Population pop{Role::speculators, {}};
    constexpr std::size_t n = 200000;
    for (std::size_t i = 0; i < n; ++i) pop.holdings.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    constexpr std::size_t bins = 20;
    const auto h = snapshot_histogram(pop, bins, {0, 1, 0, 1, 0, 1}, 0.0);
    const double expected = static_cast<double>(n) / (bins * bins);
    double chi2 = 0.0;
    for (auto c : h.counts) chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    const double dof = bins * bins - 1.0;
    EXPECT_LE(chi2, dof + 3.0 * std::sqrt(2.0 * dof));
}

TEST(Histogram, ClipsOutOfRangeAndPreservesCounts) {
    Rng rng(5);
    Population pop{Role::dealers, {}};
    for (int i = 0; i < 5000; ++i) pop.holdings.push_back({rng.uniform(-3, 8), rng.uniform(-3, 8)});
    const auto h = snapshot_histogram(pop, 7, {0, 2, 1, 3, 0, 0.5}, 0.0);
    std::uint64_t total = 0;
    for (auto c : h.counts) total += c;
    EXPECT_EQ(total, 5000u);
    EXPECT_EQ(h.x_edges.size(), 8u);
    EXPECT_EQ(h.x_edges.back(), 2.0);
}

TEST(Histogram, EmptyRatioSubset) {
    const auto h = snapshot_histogram(degenerate(Role::dealers, 10, {0, 1}), 4, {0, 1, 0, 2, 0, 1}, 0.0);
    std::uint64_t ratio_total = 0;
    for (auto c : h.ratio_counts) ratio_total += c;
    EXPECT_EQ(ratio_total, 0u);
}

TEST(Histogram, InvalidArguments) {
    const auto pop = degenerate(Role::dealers, 3, {1, 1});
    EXPECT_THROW(snapshot_histogram(pop, 0, {}, 0.0), DomainError);
    EXPECT_THROW(snapshot_histogram(pop, 4, {1, 1, 0, 1, 0, 1}, 0.0), DomainError);
    EXPECT_THROW(snapshot_histogram(pop, 4, {0, 1, 0, NAN, 0, 1}, 0.0), DomainError);
}

TEST(Histogram, CoveringRangeHoldsEveryAgent) {
    Population pop{Role::dealers, {{0.5, 4}, {9, 0.1}, {0, 2}}};
    const auto r = HistogramRange::covering(pop.holdings);
    EXPECT_GE(r.x_max, 9.0);
    EXPECT_GE(r.y_max, 4.0);
    EXPECT_GE(r.ratio_max, 8.0);
    const auto h = snapshot_histogram(pop, 3, r, 0.0);
    EXPECT_EQ(h.counts[2 * 3 + 0], 1u);
}

TEST(Series, EmptyIsHeaderOnly) {
    EXPECT_EQ(format_series({}, SeriesFormat::csv),
              "t,price,Mx,My,mx,my,W_A,W_B,var_x_A,var_y_A,var_x_B,var_y_B,total_x,total_y\n");
    EXPECT_EQ(format_series({}, SeriesFormat::jsonl), "");
}

TEST(Series, OneRowRoundTrips) {
    ObservableRow r;
    r.t = 0.1;
    r.price = 1.0 / 3.0;
    r.Mx = 3.2352941176470589;
    r.total_y = 1e300;
    r.var_x_B = 5e-324;
    const std::vector<ObservableRow> rows{r};
    const auto back = parse_series_csv(format_series(rows, SeriesFormat::csv));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_TRUE(same_bits(back[0], r));
    const auto back_j = parse_series_jsonl(format_series(rows, SeriesFormat::jsonl));
    ASSERT_EQ(back_j.size(), 1u);
    EXPECT_TRUE(same_bits(back_j[0], r));
}

TEST(Series, NanSentinelSurvivesBothFormats) {
    ObservableRow r;
    r.price = std::numeric_limits<double>::quiet_NaN();
    const std::vector<ObservableRow> rows{r};
    EXPECT_TRUE(std::isnan(parse_series_csv(format_series(rows, SeriesFormat::csv))[0].price));
    EXPECT_TRUE(std::isnan(parse_series_jsonl(format_series(rows, SeriesFormat::jsonl))[0].price));
}

TEST(Series, HundredThousandRowsBitwiseThroughFiles) {
    Rng rng(2);
    std::vector<ObservableRow> rows;
    for (int i = 0; i < 100000; ++i) rows.push_back(random_row(rng));
    const auto dir = scratch("roundtrip");
    for (auto format : {SeriesFormat::csv, SeriesFormat::jsonl}) {
        const auto path = dir / (format == SeriesFormat::csv ? "s.csv" : "s.jsonl");
        write_series(rows, path, format);
        EXPECT_FALSE(fs::exists(path.string() + ".partial"));
        const auto back = read_series(path, format);
        ASSERT_EQ(back.size(), rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) ASSERT_TRUE(same_bits(back[i], rows[i])) << "row " << i;
    }
    fs::remove_all(dir);
}

TEST(Series, CsvHeaderIsChecked) {
    EXPECT_ANY_THROW(parse_series_csv("t,price\n1,2\n"));
}

TEST(Series, IoErrorNamesThePath) {
    const fs::path bad = fs::temp_directory_path() / "kinex_no_such_dir" / "deeper" / "x.csv";
    fs::remove_all(fs::temp_directory_path() / "kinex_no_such_dir");
    // Make the parent a regular file so the directory cannot be created.
    const auto blocker = fs::temp_directory_path() / "kinex_no_such_dir";
    { std::ofstream(blocker) << "x"; }
    try {
        write_series({}, bad, SeriesFormat::csv);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("x.csv"), std::string::npos);
    }
    fs::remove(blocker);
}

TEST(Histograms, JsonCarriesCounts) {
    const auto h = snapshot_histogram(degenerate(Role::speculators, 4, {1, 1}), 2, {0, 2, 0, 2, 0, 2}, 3.0);
    const auto j = to_json(h);
    EXPECT_EQ(j["population"], "speculators");
    EXPECT_EQ(j["t"], 3.0);
    std::uint64_t total = 0;
    for (const auto& row : j["counts"])
        for (const auto& c : row) total += c.get<std::uint64_t>();
    EXPECT_EQ(total, 4u);
}
