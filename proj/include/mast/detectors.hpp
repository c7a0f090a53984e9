#pragma once

#include "mast/core_statistics.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mast {

enum class DetectorKind {
    mast_general,  // MAST(lower, upper)
    mast_delta,    // MAST(delta), lower == upper == delta
    mast_simple,   // MAST, delta == 1
    page,          // Page CUSUM with nominal means 1 -/+ alpha
};

std::string_view to_string(DetectorKind kind) noexcept;

// Accepts the CLI spellings: mast, mast-delta, mast-general, page.
DetectorKind parse_detector_kind(std::string_view name);

// Detector kind, its parameters, the noise level and the decision threshold.
// Built through the named factories so that the parameters always match the
// kind.
class DetectorConfig {
public:
    static DetectorConfig mast(NoiseModel noise, double threshold);
    static DetectorConfig mast_delta(double delta, NoiseModel noise, double threshold);
    static DetectorConfig mast_general(Barriers barriers, NoiseModel noise, double threshold);
    static DetectorConfig page(double alpha, NoiseModel noise, double threshold);

    DetectorKind kind() const noexcept { return kind_; }
    bool is_page() const noexcept { return kind_ == DetectorKind::page; }
    // For Page this is (1 - alpha, 1 + alpha), kept for reporting only.
    const Barriers& barriers() const noexcept { return barriers_; }
    // Nominal alpha of the Page test; 0 for the MAST family.
    double alpha() const noexcept { return alpha_; }
    const NoiseModel& noise() const noexcept { return noise_; }
    double threshold() const noexcept { return threshold_; }

    DetectorConfig with_threshold(double threshold) const;
    DetectorConfig with_noise(NoiseModel noise) const;

    // Per-sample increment of whichever recursion this config selects.
    double increment(double x) const noexcept
    {
        return kind_ == DetectorKind::page ? page_increment(x, alpha_, noise_) : g_nonlinearity(x, barriers_, noise_);
    }

private:
    DetectorConfig(DetectorKind kind, Barriers barriers, double alpha, NoiseModel noise, double threshold);

    DetectorKind kind_;
    Barriers barriers_;
    double alpha_;
    NoiseModel noise_;
    double threshold_;
};

// Current statistic (T_n or Q_n) and number of samples consumed.
// A default-constructed state is the fresh state T_0 = 0.
struct DetectorState {
    double statistic = 0.0;
    std::uint64_t samples_seen = 0;

    bool operator==(const DetectorState&) const = default;
};

/// T_n = max(0, T_{n-1} + g(x_n)). Throws std::invalid_argument for a Page config.
DetectorState mast_update(DetectorState state, double x, const DetectorConfig& cfg);

/// Q_n = max(0, Q_{n-1} + 2 alpha (x_n - 1) / sigma^2). Throws for a MAST config.
DetectorState page_update(DetectorState state, double x, const DetectorConfig& cfg);

// Dispatches on cfg.kind().
inline DetectorState update(DetectorState state, double x, const DetectorConfig& cfg) noexcept
{
    const double next = state.statistic + cfg.increment(x);
    return {next > 0.0 ? next : 0.0, state.samples_seen + 1};
}

// Threshold crossing is strict: alarm when statistic > threshold.
inline bool crosses(const DetectorState& state, const DetectorConfig& cfg) noexcept
{
    return state.statistic > cfg.threshold();
}

enum class StreamMode {
    stop_at_alarm,   // stopping time: processing ends at the first crossing
    reset_on_alarm,  // continuous monitoring: statistic reset to 0 after every crossing
};

struct StreamOptions {
    StreamMode mode = StreamMode::stop_at_alarm;
    bool keep_trace = false;
};

struct TracePoint {
    std::size_t n;     // 1-based sample index
    double x;
    double statistic;  // value compared with the threshold (before any reset)
    bool alarmed;
};

struct AlarmReport {
    std::optional<std::size_t> alarm_index;  // first crossing, 1-based
    std::vector<std::size_t> alarms;         // every crossing (one entry in stop mode)
    DetectorState final_state;
    std::vector<TracePoint> trace;
};

/// Runs cfg's recursion from a fresh state over `samples`. Throws
/// std::invalid_argument on non-finite samples.
AlarmReport run_stream(std::span<const double> samples, const DetectorConfig& cfg, StreamOptions options = {});

/// Exhaustive GLRT value max(0, max_j sum_{k=j}^{n} g(x_k)), evaluated by
/// explicit enumeration of the change index. Test oracle for the recursion.
double brute_force_statistic(std::span<const double> samples, const Barriers& barriers, const NoiseModel& noise);

// CSV rows "n,x,statistic,alarmed" with header.
void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);

// Fixed "%.17g" formatting used by every CSV writer; identical bytes for identical values.
std::string format_real(double value);

}  // namespace mast
