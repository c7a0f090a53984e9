#include "mast/ingestion.hpp"

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

using namespace mast;
using namespace mast::ingest;
using namespace std::chrono;

namespace {

CountSeries parse(const std::string& text, const TableFormat& fmt = {})
{
    std::istringstream in(text);
    return parse_counts(in, fmt);
}

Date ymd(int y, unsigned m, unsigned d)
{
    return Date{year{y} / month{m} / d};
}

CountSeries consecutive(const std::vector<double>& counts)
{
    std::vector<CountEntry> e;
    Date d = ymd(2020, 10, 1);
    for (double c : counts) {
        e.push_back({d, c});
        d += days{1};
    }
    return CountSeries(std::move(e));
}

std::size_t error_line(const std::string& text)
{
    try {
        parse(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("parse minimal headerless input")
{
    const auto s = parse("2020-10-01,100\n2020-10-02,120");
    REQUIRE(s.size() == 2);
    CHECK(s.entries()[0].date == ymd(2020, 10, 1));
    CHECK(s.entries()[1].count == 120.0);
}

TEST_CASE("parse header, tabs and custom columns")
{
    TableFormat fmt;
    fmt.date_column = "day";
    fmt.count_column = "new_cases";
    const auto s = parse("region\tday\tnew_cases\nX\t2020-10-01\t5\nX\t2020-10-03\t7\n", fmt);
    REQUIRE(s.size() == 2);
    CHECK(s.missing_days() == 1);

    TableFormat dmy;
    dmy.date_format = "%d/%m/%Y";
    const auto t = parse("date,count\r\n01/10/2020,3\r\n02/10/2020,4\r\n", dmy);
    CHECK(t.entries()[1].date == ymd(2020, 10, 2));
}

TEST_CASE("parse errors carry line numbers")
{
    CHECK(error_line("2020-10-02,1\n2020-10-01,2\n") == 2);
    CHECK(error_line("date,count\n2020-10-01,1\n2020-10-01,2\n") == 3);
    CHECK(error_line("2020-10-01,-5\n") == 1);
    CHECK(error_line("2020-10-01,1\n2020-10-02,abc\n") == 2);
    CHECK(error_line("2020-10-01,1\n2020-02-31,2\n") == 2);
    CHECK(error_line("2020-10-01,1.5\n") == 1);
    CHECK(error_line("2020-10-01\n") == 1);
    try {
        parse("2020-10-01,-5\n");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("negative") != std::string::npos);
    }
}

TEST_CASE("ratios from counts")
{
    auto r = to_ratios(consecutive({100, 120}));
    REQUIRE(r.size() == 1);
    CHECK(*r[0].x == doctest::Approx(1.2));

    r = to_ratios(consecutive({100, 0, 50}));
    REQUIRE(r.size() == 2);
    CHECK(*r[0].x == 0.0);
    CHECK_FALSE(r[1].x);

    r = to_ratios(consecutive({100, 100, 100}));
    CHECK(*r[0].x == 1.0);
    CHECK(*r[1].x == 1.0);

    CHECK_THROWS_AS(to_ratios(consecutive({100})), InsufficientData);
}

TEST_CASE("missing calendar days become gaps")
{
    const auto s = parse("2020-10-01,10\n2020-10-02,20\n2020-10-04,40\n2020-10-05,20\n");
    const auto r = to_ratios(s);
    REQUIRE(r.size() == 3);
    CHECK(*r[0].x == 2.0);
    CHECK_FALSE(r[1].x);
    CHECK(r[1].date == ymd(2020, 10, 4));
    CHECK(*r[2].x == 0.5);
}

TEST_CASE("counts round-trip through ratios")
{
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> c(1, 100000);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> counts(200);
        for (auto& v : counts) {
            v = c(rng);
        }
        const auto back = reconstruct_counts(counts[0], to_ratios(consecutive(counts)));
        CHECK(back == counts);
    }
    // reconstruction stops at the first gap
    const auto back = reconstruct_counts(100, to_ratios(consecutive({100, 0, 50, 60})));
    CHECK(back == std::vector<double>{100, 0});
}

TEST_CASE("sigma estimation")
{
    std::mt19937_64 rng(32);
    std::normal_distribution<double> n(1.0, 0.1);
    RatioSeries r;
    Date d = ymd(2020, 1, 1);
    for (int i = 0; i < 1000; ++i) {
        r.push_back({d, n(rng)});
        d += days{1};
    }
    CHECK(estimate_sigma(r, 1000).sigma() == doctest::Approx(0.1).epsilon(0.1));
    CHECK_THROWS_AS(estimate_sigma(r, 1001), InsufficientData);
    CHECK_THROWS_AS(estimate_sigma(r, 4), std::invalid_argument);

    RatioSeries flat(40, RatioEntry{d, 1.0});
    CHECK_THROWS_AS(estimate_sigma(flat, 30), DegenerateSigma);

    // gaps are skipped: 30 valid values among 40 entries
    RatioSeries gappy = flat;
    for (int i = 0; i < 40; i += 4) {
        gappy[i].x.reset();
    }
    for (int i = 0; i < 40; ++i) {
        if (gappy[i].x) {
            gappy[i].x = 1.0 + 0.01 * (i % 3);
        }
    }
    CHECK_NOTHROW(estimate_sigma(gappy, 30));
    CHECK_THROWS_AS(estimate_sigma(gappy, 31), InsufficientData);
}

TEST_CASE("gaps leave the detector state untouched")
{
    const auto cfg = DetectorConfig::mast(NoiseModel(0.1), 100.0);
    const RatioSeries with_gaps = {{ymd(2020, 1, 1), 1.2},
                                   {ymd(2020, 1, 2), std::nullopt},
                                   {ymd(2020, 1, 3), 1.1},
                                   {ymd(2020, 1, 5), std::nullopt}};
    const RatioSeries without = {{ymd(2020, 1, 1), 1.2}, {ymd(2020, 1, 3), 1.1}};
    const auto a = run_detector(with_gaps, cfg);
    const auto b = run_detector(without, cfg);
    CHECK(a.final_state == b.final_state);
    REQUIRE(a.trace.size() == 4);
    CHECK(a.trace[1].statistic == a.trace[0].statistic);
    CHECK_FALSE(a.trace[1].x);
}

TEST_CASE("alarm on a doubling series")
{
    std::vector<double> counts(40, 100.0);
    for (std::size_t i = 30; i < counts.size(); ++i) {
        counts[i] = counts[i - 1] * 2.0;
    }
    const auto report = run_detector(to_ratios(consecutive(counts)), DetectorConfig::mast(NoiseModel(0.1), 5.0));
    REQUIRE(report.alarms.size() == 1);
    CHECK(report.alarms[0] == ymd(2020, 10, 1) + days{30});
}

TEST_CASE("centered smoothing")
{
    const auto s = consecutive({1, 2, 3, 4, 5, 6, 7, 8, 9});
    const auto m = smooth_centered(s, 3);
    REQUIRE(m.size() == 7);
    CHECK(m.entries()[0].count == doctest::Approx(2.0));
    CHECK(m.entries()[0].date == ymd(2020, 10, 2));
    CHECK_THROWS_AS(smooth_centered(s, 4), std::invalid_argument);

    const auto gapped = parse("2020-10-01,1\n2020-10-02,2\n2020-10-03,3\n2020-10-05,5\n2020-10-06,6\n2020-10-07,7\n");
    const auto g = smooth_centered(gapped, 3);
    REQUIRE(g.size() == 2);
    CHECK(g.entries()[1].date == ymd(2020, 10, 6));
}

TEST_CASE("ratio and trace export")
{
    const auto r = to_ratios(consecutive({100, 0, 50}));
    std::ostringstream out;
    write_ratios(out, r);
    CHECK(out.str() == "date,ratio\n2020-10-02,0\n2020-10-03,\n");

    std::ostringstream trace;
    write_series_trace(trace, run_detector(r, DetectorConfig::mast(NoiseModel(0.1), 1e9)));
    CHECK(trace.str().rfind("date,x,statistic,alarmed\n2020-10-02,0,0,0\n2020-10-03,,0,0\n", 0) == 0);
}
