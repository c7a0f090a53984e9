#include "mast/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>
#include <utility>

namespace mast::sim {

namespace {

// Runs fn(i) for i in [0, n) over contiguous index blocks. Callers write into
// per-index slots and reduce in index order afterwards.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t block = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * block;
        const std::size_t end = std::min(n, begin + block);
        pool.emplace_back([&fn, begin, end] {
            for (std::size_t i = begin; i < end; ++i) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
}

struct RunLength {
    std::uint64_t samples = 0;
    bool censored = false;
};

constexpr std::size_t pilot_trials = 64;
constexpr std::uint64_t pilot_cap = 1'000'000;
constexpr std::uint64_t default_pf_horizon = 1'000'000;

std::vector<double> linspace(double first, double last, std::size_t count)
{
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = first + (last - first) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

void check_gamma(double gamma)
{
    if (!std::isfinite(gamma) || gamma < 0.0) {
        throw std::invalid_argument("gamma must be finite and >= 0");
    }
}

}  // namespace

std::string_view to_string(ScenarioKind kind) noexcept
{
    return kind == ScenarioKind::scenario1 ? "scenario1" : "scenario2";
}

ScenarioKind parse_scenario(std::string_view name)
{
    if (name == "1" || name == "scenario1")
        return ScenarioKind::scenario1;
    if (name == "2" || name == "scenario2")
        return ScenarioKind::scenario2;
    throw std::invalid_argument("unknown scenario '" + std::string(name) + "' (expected 1 or 2)");
}

void ScenarioSpec::validate() const
{
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("scenario alpha must lie in (0, 1)");
    }
    if (change_time && *change_time < 1) {
        throw std::invalid_argument("change time is 1-based and must be >= 1");
    }
}

ScenarioSpec ScenarioSpec::controlled() const
{
    ScenarioSpec out = *this;
    out.change_time.reset();
    return out;
}

ScenarioSpec ScenarioSpec::changed_at(std::size_t nu) const
{
    ScenarioSpec out = *this;
    out.change_time = nu;
    return out;
}

ScenarioSampler::ScenarioSampler(const ScenarioSpec& spec)
    : kind_(spec.kind)
    , alpha_(spec.alpha)
    , sigma_(spec.noise.sigma())
    , pre_mean_(1.0 - spec.alpha, 1.0)
    , post_mean_(1.0, 1.0 + 10.0 * spec.alpha)
{
    spec.validate();
}

double ScenarioSampler::pre_change(rng::Engine& engine)
{
    const double mean = kind_ == ScenarioKind::scenario1 ? 1.0 - alpha_ : pre_mean_(engine);
    return mean + sigma_ * noise_(engine);
}

double ScenarioSampler::post_change(rng::Engine& engine)
{
    const double mean = kind_ == ScenarioKind::scenario1 ? 1.0 + alpha_ : post_mean_(engine);
    return mean + sigma_ * noise_(engine);
}

std::vector<double> generate_path(const ScenarioSpec& spec, std::size_t length, std::uint64_t seed)
{
    if (length < 1) {
        throw std::invalid_argument("path length must be >= 1");
    }
    ScenarioSampler sampler(spec);
    auto engine = rng::trial_engine(seed, rng::Stream::path, 0);
    const std::size_t nu = spec.change_time.value_or(std::numeric_limits<std::size_t>::max());

    std::vector<double> path(length);
    for (std::size_t k = 1; k <= length; ++k) {
        path[k - 1] = k < nu ? sampler.pre_change(engine) : sampler.post_change(engine);
    }
    return path;
}

DelayEstimate estimate_delay(const ScenarioSpec& spec, const DetectorConfig& cfg, double gamma,
                             const MonteCarloOptions& options, std::uint64_t seed)
{
    spec.validate();
    check_gamma(gamma);
    if (!spec.change_time) {
        throw std::invalid_argument("delay estimation needs a scenario with a change time");
    }
    if (options.trials < 2) {
        throw std::invalid_argument("delay estimation needs at least 2 trials");
    }
    const DetectorConfig detector = cfg.with_threshold(gamma);
    const std::size_t run_in = options.run_in ? *spec.change_time - 1 : 0;

    auto trial = [&](std::size_t i, std::uint64_t cap) {
        auto engine = rng::trial_engine(seed, rng::Stream::delay, i);
        ScenarioSampler sampler(spec);
        DetectorState state;
        for (std::size_t k = 0; k < run_in; ++k) {
            state = update(state, sampler.pre_change(engine), detector);
            if (crosses(state, detector)) {
                state.statistic = 0.0;
            }
        }
        for (std::uint64_t d = 1; d <= cap; ++d) {
            state = update(state, sampler.post_change(engine), detector);
            if (crosses(state, detector)) {
                return RunLength{d, false};
            }
        }
        return RunLength{cap, true};
    };

    std::uint64_t horizon = 0;
    if (options.horizon) {
        horizon = *options.horizon;
    } else {
        const std::size_t n_pilot = std::min(options.trials, pilot_trials);
        std::vector<RunLength> pilot(n_pilot);
        parallel_for(n_pilot, options.threads, [&](std::size_t i) { pilot[i] = trial(i, pilot_cap); });
        double sum = 0.0;
        for (const auto& r : pilot) {
            sum += static_cast<double>(r.samples);
        }
        horizon = std::max<std::uint64_t>(1000, static_cast<std::uint64_t>(std::ceil(100.0 * sum / n_pilot)));
    }
    if (horizon < 1) {
        throw std::invalid_argument("delay horizon must be >= 1");
    }

    std::vector<RunLength> runs(options.trials);
    parallel_for(options.trials, options.threads, [&](std::size_t i) { runs[i] = trial(i, horizon); });

    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t censored = 0;
    for (const auto& r : runs) {
        const double d = static_cast<double>(r.samples);
        sum += d;
        sum_sq += d * d;
        censored += r.censored ? 1 : 0;
    }
    const double n = static_cast<double>(runs.size());
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));

    DelayEstimate out;
    out.gamma = gamma;
    out.mean_delay = mean;
    out.delay_se = std::sqrt(var / n);
    out.trials = runs.size();
    out.censored = censored;
    out.horizon = horizon;
    return out;
}

PfEstimate estimate_pf(const ScenarioSpec& spec, const DetectorConfig& cfg, double gamma,
                       const MonteCarloOptions& options, std::uint64_t seed)
{
    spec.validate();
    check_gamma(gamma);
    if (spec.change_time) {
        throw std::invalid_argument("false-alarm estimation needs a controlled-regime scenario (no change time)");
    }
    if (options.trials < 2) {
        throw std::invalid_argument("false-alarm estimation needs at least 2 trials");
    }
    const DetectorConfig detector = cfg.with_threshold(gamma);
    const std::uint64_t cap = options.horizon.value_or(default_pf_horizon);
    if (cap < 1) {
        throw std::invalid_argument("false-alarm horizon must be >= 1");
    }

    auto trial = [&](std::size_t i) {
        auto engine = rng::trial_engine(seed, rng::Stream::false_alarm, i);
        ScenarioSampler sampler(spec);
        DetectorState state;
        for (std::uint64_t t = 1; t <= cap; ++t) {
            state = update(state, sampler.pre_change(engine), detector);
            if (crosses(state, detector)) {
                return RunLength{t, false};
            }
        }
        return RunLength{cap, true};
    };

    std::vector<RunLength> runs(options.trials);
    const std::size_t n_pilot = std::min(options.trials, pilot_trials);
    parallel_for(n_pilot, options.threads, [&](std::size_t i) { runs[i] = trial(i); });
    if (std::all_of(runs.begin(), runs.begin() + static_cast<std::ptrdiff_t>(n_pilot),
                    [](const RunLength& r) { return r.censored; })) {
        throw InsufficientEvents("no threshold crossing within " + std::to_string(cap) + " samples in the first " +
                                 std::to_string(n_pilot) + " trials at gamma=" + format_real(gamma) +
                                 "; lower gamma or extrapolate from an operational curve");
    }
    parallel_for(options.trials - n_pilot, options.threads, [&](std::size_t i) { runs[n_pilot + i] = trial(n_pilot + i); });

    std::uint64_t total = 0;
    std::size_t events = 0;
    for (const auto& r : runs) {
        total += r.samples;
        events += r.censored ? 0 : 1;
    }
    if (events < options.min_events) {
        throw InsufficientEvents("only " + std::to_string(events) + " threshold crossings (need " +
                                 std::to_string(options.min_events) + ") at gamma=" + format_real(gamma) +
                                 "; lower gamma or extrapolate from an operational curve");
    }

    // Ratio estimator events/samples; variance by the delta method.
    const double n = static_cast<double>(runs.size());
    const double pf = static_cast<double>(events) / static_cast<double>(total);
    const double mean_t = static_cast<double>(total) / n;
    double resid_sq = 0.0;
    for (const auto& r : runs) {
        const double e = r.censored ? 0.0 : 1.0;
        const double d = e - pf * static_cast<double>(r.samples);
        resid_sq += d * d;
    }
    const double var_pf = resid_sq / (n * (n - 1.0)) / (mean_t * mean_t);

    PfEstimate out;
    out.gamma = gamma;
    out.pf = pf;
    out.pf_se = std::sqrt(var_pf);
    out.mean_time_between_alarms = 1.0 / pf;
    out.trials = runs.size();
    out.events = events;
    out.censored = runs.size() - events;
    out.total_samples = total;
    return out;
}

double LinearFit::inverse(double y) const
{
    if (slope == 0.0) {
        throw std::domain_error("cannot invert a flat linear fit");
    }
    return (y - intercept) / slope;
}

LinearFit fit_linear(std::span<const FitPoint> points)
{
    if (points.size() < 3) {
        throw std::invalid_argument("linear fit needs at least 3 points");
    }
    std::vector<double> xs;
    xs.reserve(points.size());
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw std::invalid_argument("linear fit points must be finite");
        }
        xs.push_back(p.x);
    }
    std::sort(xs.begin(), xs.end());
    if (std::unique(xs.begin(), xs.end()) - xs.begin() < 3) {
        throw std::invalid_argument("linear fit needs at least 3 distinct x values");
    }

    const double n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& p : points) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        syy += (p.y - my) * (p.y - my);
    }

    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& p : points) {
        const double r = p.y - fit(p.x);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

double OperationalCurve::delay_at_log10_pf(double log10_pf) const
{
    return delay_fit(log10_pf_fit.inverse(log10_pf));
}

OperationalCurve measure_curve(const ScenarioSpec& changed, const DetectorConfig& cfg,
                               std::span<const double> gamma_grid, const MonteCarloOptions& options,
                               std::uint64_t seed)
{
    const ScenarioSpec with_change = changed.change_time ? changed : changed.changed_at(1);
    const ScenarioSpec controlled = changed.controlled();

    OperationalCurve curve;
    curve.detector = cfg.kind();
    curve.scenario = changed.kind;

    std::vector<FitPoint> delay_pts;
    std::vector<FitPoint> pf_pts;
    for (double gamma : gamma_grid) {
        const auto delay = estimate_delay(with_change, cfg, gamma, options, seed);
        const auto pf = estimate_pf(controlled, cfg, gamma, options, seed);
        const double log10_pf = std::log10(pf.pf);
        curve.points.push_back({gamma, delay.mean_delay, delay.delay_se, log10_pf, pf.pf_se, true, delay.censored});
        delay_pts.push_back({gamma, delay.mean_delay});
        pf_pts.push_back({gamma, log10_pf});
    }
    curve.delay_fit = fit_linear(delay_pts);
    curve.log10_pf_fit = fit_linear(pf_pts);
    return curve;
}

void extrapolate(OperationalCurve& curve, std::span<const double> grid, double r2_floor)
{
    if (grid.empty()) {
        return;
    }
    if (curve.delay_fit.r_squared < r2_floor || curve.log10_pf_fit.r_squared < r2_floor) {
        throw ExtrapolationRefused("refusing to extrapolate " + std::string(to_string(curve.detector)) +
                                   ": fit r^2 (delay " + format_real(curve.delay_fit.r_squared) + ", log10 pf " +
                                   format_real(curve.log10_pf_fit.r_squared) + ") below floor " +
                                   format_real(r2_floor));
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double gamma : grid) {
        curve.points.push_back({gamma, curve.delay_fit(gamma), nan, curve.log10_pf_fit(gamma), nan, false});
    }
}

OperationalCurve operational_curve(const ScenarioSpec& changed, const DetectorConfig& cfg,
                                   std::span<const double> gamma_grid, std::span<const double> extrapolation_grid,
                                   const MonteCarloOptions& options, std::uint64_t seed, double r2_floor)
{
    auto curve = measure_curve(changed, cfg, gamma_grid, options, seed);
    extrapolate(curve, extrapolation_grid, r2_floor);
    return curve;
}

std::vector<double> auto_extrapolation_grid(const OperationalCurve& curve, double log10_pf_floor, std::size_t count)
{
    if (!(curve.log10_pf_fit.slope < 0.0)) {
        throw ExtrapolationRefused("log10 pf does not decrease with gamma; cannot extrapolate");
    }
    double start = 0.0;
    for (const auto& p : curve.points) {
        if (p.measured) {
            start = std::max(start, p.gamma);
        }
    }
    const double end = curve.log10_pf_fit.inverse(log10_pf_floor);
    std::vector<double> grid;
    if (end <= start || count == 0) {
        return grid;
    }
    for (std::size_t i = 1; i <= count; ++i) {
        grid.push_back(start + (end - start) * static_cast<double>(i) / static_cast<double>(count));
    }
    return grid;
}

std::vector<double> default_gamma_grid(DetectorKind detector, ScenarioKind scenario)
{
    const bool page = detector == DetectorKind::page;
    if (scenario == ScenarioKind::scenario1) {
        return page ? linspace(2.5, 8.0, 8) : linspace(1.5, 4.5, 8);
    }
    return page ? linspace(2.5, 16.0, 8) : linspace(1.5, 8.5, 8);
}

void write_curve_csv_header(std::ostream& out)
{
    out << "detector,scenario,gamma,delay,delay_se,log10_pf,pf_se,measured_or_extrapolated\n";
}

void write_curve_csv_rows(std::ostream& out, const OperationalCurve& curve)
{
    auto optional_real = [](double v) { return std::isnan(v) ? std::string() : format_real(v); };
    for (const auto& p : curve.points) {
        out << to_string(curve.detector) << ',' << (curve.scenario == ScenarioKind::scenario1 ? 1 : 2) << ','
            << format_real(p.gamma) << ',' << format_real(p.delay) << ',' << optional_real(p.delay_se) << ','
            << format_real(p.log10_pf) << ',' << optional_real(p.pf_se) << ','
            << (p.measured ? "measured" : "extrapolated") << '\n';
    }
}

}  // namespace mast::sim
