#include "mast/detectors.hpp"
#include "oracles.hpp"

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace mast;

namespace {

const NoiseModel tenth{0.1};

std::vector<double> normal_samples(std::mt19937_64& rng, std::size_t n, double mean, double sd)
{
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> out(n);
    for (auto& v : out) {
        v = d(rng);
    }
    return out;
}

}  // namespace

TEST_CASE("fresh state is T_0 = 0")
{
    DetectorState s;
    CHECK(s.statistic == 0.0);
    CHECK(s.samples_seen == 0);
}

TEST_CASE("mast_update examples")
{
    const auto cfg = DetectorConfig::mast(tenth, 10.0);
    auto s = mast_update({0.0, 0}, 1.2, cfg);
    CHECK(s.statistic == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.samples_seen == 1);
    // 1.2 - 1 and 0.8 - 1 have the same magnitude in binary, so the clamp lands exactly on 0
    s = mast_update(s, 0.8, cfg);
    CHECK(s.statistic == 0.0);
    CHECK(s.samples_seen == 2);
    CHECK(mast_update({2.0, 1}, 0.8, cfg).statistic == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(mast_update({0.0, 0}, 1.0, cfg).statistic == 0.0);
}

TEST_CASE("page_update examples")
{
    const auto cfg = DetectorConfig::page(0.05, tenth, 10.0);
    CHECK(page_update({0.0, 0}, 1.02, cfg).statistic == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(page_update({0.1, 0}, 0.98, cfg).statistic == 0.0);
    CHECK(page_update({5.0, 0}, 1.0, cfg).statistic == 5.0);
}

TEST_CASE("updates reject the wrong configuration kind")
{
    CHECK_THROWS_AS(mast_update({}, 1.0, DetectorConfig::page(0.05, tenth, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(page_update({}, 1.0, DetectorConfig::mast(tenth, 1.0)), std::invalid_argument);
}

TEST_CASE("config validation")
{
    CHECK_THROWS_AS(DetectorConfig::mast(tenth, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(DetectorConfig::page(0.0, tenth, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(DetectorConfig::page(1.0, tenth, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(DetectorConfig::mast_delta(0.0, tenth, 1.0), std::invalid_argument);
    CHECK(DetectorConfig::mast_delta(0.9, tenth, 1.0).barriers().lower() == 0.9);
    CHECK(parse_detector_kind("mast-general") == DetectorKind::mast_general);
    CHECK(to_string(DetectorKind::mast_simple) == "mast");
    CHECK_THROWS_AS(parse_detector_kind("shiryaev"), std::invalid_argument);
}

TEST_CASE("run_stream stopping semantics")
{
    const auto cfg = DetectorConfig::mast(tenth, 3.0);
    const std::vector<double> two = {1.2, 1.2};
    auto r = run_stream(two, cfg, {StreamMode::stop_at_alarm, true});
    REQUIRE(r.alarm_index);
    CHECK(*r.alarm_index == 2);
    REQUIRE(r.trace.size() == 2);
    CHECK(r.trace[0].statistic == doctest::Approx(2.0));
    CHECK(r.trace[1].statistic == doctest::Approx(4.0));
    CHECK(r.trace[1].alarmed);

    const std::vector<double> flat(100, 1.0);
    CHECK_FALSE(run_stream(flat, cfg.with_threshold(1e-9)).alarm_index);

    const std::vector<double> one = {1.2};
    CHECK(run_stream(one, cfg.with_threshold(1.9)).alarm_index == 1u);

    CHECK_FALSE(run_stream({}, cfg).alarm_index);

    // processing stops at the alarm
    const std::vector<double> more = {1.2, 1.2, 1.2, 1.2};
    r = run_stream(more, cfg, {StreamMode::stop_at_alarm, true});
    CHECK(r.trace.size() == 2);
    CHECK(r.final_state.samples_seen == 2);
}

TEST_CASE("threshold comparison is strict")
{
    const std::vector<double> x = {1.2};
    const auto cfg = DetectorConfig::mast(tenth, 1e9);
    const double t1 = update({}, 1.2, cfg).statistic;
    CHECK_FALSE(run_stream(x, cfg.with_threshold(t1)).alarm_index);
    CHECK(run_stream(x, cfg.with_threshold(std::nextafter(t1, 0.0))).alarm_index == 1u);
}

TEST_CASE("run_stream rejects non-finite samples")
{
    const std::vector<double> x = {1.0, std::nan("")};
    CHECK_THROWS_AS(run_stream(x, DetectorConfig::mast(tenth, 1.0)), std::invalid_argument);
}

TEST_CASE("continuous monitoring resets after each crossing")
{
    const auto cfg = DetectorConfig::mast(tenth, 3.0);
    const std::vector<double> x = {1.2, 1.2, 1.2, 1.2, 1.0};
    const auto r = run_stream(x, cfg, {StreamMode::reset_on_alarm, true});
    CHECK(r.alarms == std::vector<std::size_t>{2, 4});
    CHECK(*r.alarm_index == 2);
    CHECK(r.trace[2].statistic == doctest::Approx(2.0));
    CHECK(r.final_state.statistic == 0.0);
}

TEST_CASE("brute force oracle examples")
{
    CHECK(brute_force_statistic({}, Barriers::single(1.0), tenth) == 0.0);
    const std::vector<double> x = {0.8, 1.2};
    CHECK(brute_force_statistic(x, Barriers::single(1.0), tenth) == doctest::Approx(2.0));
}

TEST_CASE("recursion equals exhaustive GLRT maximisation")
{
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> len(0, 64);
    std::uniform_real_distribution<double> b(0.5, 1.5);
    std::uniform_real_distribution<double> s(0.01, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        double lo = b(rng);
        double hi = b(rng);
        if (lo > hi) {
            std::swap(lo, hi);
        }
        const NoiseModel noise(s(rng));
        const auto x = normal_samples(rng, len(rng), 1.0, 2.0 * noise.sigma());
        const auto cfg = DetectorConfig::mast_general(Barriers(lo, hi), noise, 0.0);

        DetectorState st;
        for (double v : x) {
            st = mast_update(st, v, cfg);
        }
        const double brute = brute_force_statistic(x, cfg.barriers(), noise);
        const double glrt = oracle::glrt_statistic(x, lo, hi, noise.sigma());
        CHECK(st.statistic == doctest::Approx(brute).epsilon(1e-9).scale(1e-9));
        CHECK(st.statistic == doctest::Approx(glrt).epsilon(1e-9).scale(1e-9));
    }
}

TEST_CASE("statistic stays nonnegative")
{
    std::mt19937_64 rng(22);
    const auto x = normal_samples(rng, 5000, 0.97, 0.05);
    for (const auto& cfg : {DetectorConfig::mast(NoiseModel(0.05), 1e9), DetectorConfig::page(0.05, NoiseModel(0.05), 1e9)}) {
        DetectorState st;
        for (double v : x) {
            st = update(st, v, cfg);
            REQUIRE(st.statistic >= 0.0);
        }
    }
}

TEST_CASE("zero statistic renews the detector")
{
    std::mt19937_64 rng(23);
    const auto cfg = DetectorConfig::mast(NoiseModel(0.05), 1e9);
    const auto x = normal_samples(rng, 400, 0.98, 0.05);
    auto full = run_stream(x, cfg, {StreamMode::stop_at_alarm, true});
    int replays = 0;
    for (std::size_t m = 0; m + 1 < x.size(); ++m) {
        if (full.trace[m].statistic != 0.0) {
            continue;
        }
        const std::span<const double> tail(x.data() + m + 1, x.size() - m - 1);
        const auto fresh = run_stream(tail, cfg, {StreamMode::stop_at_alarm, true});
        for (std::size_t k = 0; k < tail.size(); ++k) {
            REQUIRE(fresh.trace[k].statistic == full.trace[m + 1 + k].statistic);
        }
        ++replays;
    }
    CHECK(replays > 10);
}

TEST_CASE("MAST increment is the Page increment with alpha estimated by |x - 1|")
{
    // g(x; 1, 1) = sign(x-1)(x-1)^2 / (2 s^2) and 2|x-1|(x-1)/s^2 differ by the constant 1/4.
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> xs(0.0, 2.0);
    std::uniform_real_distribution<double> s(0.01, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const double x = xs(rng);
        const NoiseModel noise(s(rng));
        const double g = g_nonlinearity(x, Barriers::single(1.0), noise);
        CHECK(g == doctest::Approx(0.25 * page_increment(x, std::abs(x - 1.0), noise)).epsilon(1e-12));
    }
}

TEST_CASE("alarm index is monotone in the threshold")
{
    std::mt19937_64 rng(25);
    for (int path = 0; path < 20; ++path) {
        auto x = normal_samples(rng, 300, 1.0, 0.05);
        const auto base = DetectorConfig::mast(NoiseModel(0.05), 0.0);
        std::size_t prev = 0;
        for (double gamma = 0.0; gamma < 30.0; gamma += 0.5) {
            const auto r = run_stream(x, base.with_threshold(gamma));
            const std::size_t idx = r.alarm_index.value_or(x.size() + 1);
            REQUIRE(idx >= prev);
            prev = idx;
        }
    }
}

TEST_CASE("trace CSV layout")
{
    const std::vector<double> x = {1.2, 1.2};
    const auto r = run_stream(x, DetectorConfig::mast(tenth, 3.0), {StreamMode::stop_at_alarm, true});
    std::ostringstream out;
    write_trace_csv(out, r.trace);
    const std::string csv = out.str();
    CHECK(csv.rfind("n,x,statistic,alarmed\n1,1.2,", 0) == 0);
    CHECK(csv.back() == '\n');
    CHECK(csv.find(",1\n") != std::string::npos);
}
