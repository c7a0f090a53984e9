#pragma once

#include "mast/core_statistics.hpp"
#include "mast/detectors.hpp"
#include "mast/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mast::sim {

enum class ScenarioKind {
    // Constant means: 1 - alpha before the change, 1 + alpha after.
    scenario1,
    // Means redrawn every day: Uniform(1 - alpha, 1) before, Uniform(1, 1 + 10 alpha) after.
    scenario2,
};

std::string_view to_string(ScenarioKind kind) noexcept;
ScenarioKind parse_scenario(std::string_view name);  // "1" / "2" / "scenario1" / "scenario2"

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::scenario1;
    double alpha = 0.05;
    NoiseModel noise{0.05};
    // 1-based index of the first post-change sample; nullopt = controlled regime only.
    std::optional<std::size_t> change_time;

    void validate() const;
    ScenarioSpec controlled() const;
    ScenarioSpec changed_at(std::size_t nu) const;
};

// Draws ratio samples for one scenario. Holds distribution state, so one
// sampler per trial.
class ScenarioSampler {
public:
    explicit ScenarioSampler(const ScenarioSpec& spec);

    double pre_change(rng::Engine& engine);
    double post_change(rng::Engine& engine);

private:
    ScenarioKind kind_;
    double alpha_;
    double sigma_;
    std::normal_distribution<double> noise_{0.0, 1.0};
    std::uniform_real_distribution<double> pre_mean_;
    std::uniform_real_distribution<double> post_mean_;
};

/// Deterministic sample path of `length` samples; sample k (1-based) is
/// post-change iff k >= change_time.
std::vector<double> generate_path(const ScenarioSpec& spec, std::size_t length, std::uint64_t seed);

// Raised when the false-alarm run saw too few threshold crossings to
// estimate Pf directly; extrapolate from lower thresholds instead.
class InsufficientEvents : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MonteCarloOptions {
    std::size_t trials = 10000;
    unsigned threads = 0;  // 0 = hardware concurrency; never changes results
    // Delay: per-trial cap on post-change samples (nullopt = 100x a pilot mean-delay estimate).
    // Pf: per-trial cap on controlled samples (nullopt = 10^6).
    std::optional<std::uint64_t> horizon;
    // Delay: evolve the statistic through change_time - 1 controlled samples before the change.
    bool run_in = false;
    // Pf: minimum number of crossings required.
    std::size_t min_events = 10;
};

struct DelayEstimate {
    double gamma = 0.0;
    double mean_delay = 0.0;
    double delay_se = 0.0;
    std::size_t trials = 0;
    std::size_t censored = 0;  // trials that hit the horizon; counted at the horizon
    std::uint64_t horizon = 0;
};

struct PfEstimate {
    double gamma = 0.0;
    double pf = 0.0;
    double pf_se = 0.0;
    double mean_time_between_alarms = 0.0;
    std::size_t trials = 0;
    std::size_t events = 0;
    std::size_t censored = 0;
    std::uint64_t total_samples = 0;
};

struct PerformanceEstimate {
    double gamma = 0.0;
    std::optional<DelayEstimate> delay;
    std::optional<PfEstimate> false_alarm;
};

/// Mean detection delay, Delta = alarm_index - change_time + 1, averaged over
/// trials. The statistic starts at 0 on the first post-change sample unless
/// options.run_in is set. Requires spec.change_time.
DelayEstimate estimate_delay(const ScenarioSpec& spec, const DetectorConfig& cfg, double gamma,
                             const MonteCarloOptions& options, std::uint64_t seed);

/// False-alarm probability: reciprocal of the mean time between crossings of a
/// detector that resets to 0 at every crossing in the controlled regime.
///
/// After a reset the statistic restarts from 0 on fresh iid samples, so the
/// intervals between crossings are iid copies of the run length from a fresh
/// state. Each trial draws one such interval on its own engine; pf is
/// (crossings) / (samples observed), which equals 1 / mean interval when no
/// trial is censored. Throws InsufficientEvents below options.min_events.
PfEstimate estimate_pf(const ScenarioSpec& spec, const DetectorConfig& cfg, double gamma,
                       const MonteCarloOptions& options, std::uint64_t seed);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;

    double operator()(double x) const noexcept { return intercept + slope * x; }
    // x at which the line reaches y; requires slope != 0.
    double inverse(double y) const;
};

struct FitPoint {
    double x;
    double y;
};

/// Ordinary least squares. Needs >= 3 points and >= 3 distinct x values.
LinearFit fit_linear(std::span<const FitPoint> points);

struct CurvePoint {
    double gamma;
    double delay;
    double delay_se;  // NaN for extrapolated points
    double log10_pf;
    double pf_se;     // NaN for extrapolated points
    bool measured;
    std::size_t delay_censored = 0;
};

struct OperationalCurve {
    DetectorKind detector = DetectorKind::mast_simple;
    ScenarioKind scenario = ScenarioKind::scenario1;
    std::vector<CurvePoint> points;
    LinearFit delay_fit;
    LinearFit log10_pf_fit;

    /// Delta at the given log10 Pf, read off both linear fits.
    double delay_at_log10_pf(double log10_pf) const;
};

class ExtrapolationRefused : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double default_r2_floor = 0.95;

/// Direct Monte Carlo estimates on gamma_grid plus the two linear fits.
/// Delay trials run on `changed` (change at sample 1 unless run-in is on);
/// Pf trials run on `changed.controlled()`.
OperationalCurve measure_curve(const ScenarioSpec& changed, const DetectorConfig& cfg,
                               std::span<const double> gamma_grid, const MonteCarloOptions& options,
                               std::uint64_t seed);

/// Appends fitted points for every gamma in grid. Throws ExtrapolationRefused
/// if either fit's r^2 is below r2_floor.
void extrapolate(OperationalCurve& curve, std::span<const double> grid, double r2_floor = default_r2_floor);

OperationalCurve operational_curve(const ScenarioSpec& changed, const DetectorConfig& cfg,
                                   std::span<const double> gamma_grid, std::span<const double> extrapolation_grid,
                                   const MonteCarloOptions& options, std::uint64_t seed,
                                   double r2_floor = default_r2_floor);

/// `count` evenly spaced thresholds from just above the last measured gamma up
/// to where the fitted log10 Pf reaches log10_pf_floor.
std::vector<double> auto_extrapolation_grid(const OperationalCurve& curve, double log10_pf_floor = -8.0,
                                            std::size_t count = 8);

/// Thresholds for which the direct estimates stay within Monte Carlo reach
/// (Pf >= 1e-4) for alpha = sigma = 0.05, tuned per detector and scenario.
std::vector<double> default_gamma_grid(DetectorKind detector, ScenarioKind scenario);

// Header: detector,scenario,gamma,delay,delay_se,log10_pf,pf_se,measured_or_extrapolated
void write_curve_csv_header(std::ostream& out);
void write_curve_csv_rows(std::ostream& out, const OperationalCurve& curve);

}  // namespace mast::sim
