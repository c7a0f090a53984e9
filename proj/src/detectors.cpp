#include "mast/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace mast {

std::string_view to_string(DetectorKind kind) noexcept
{
    switch (kind) {
    case DetectorKind::mast_general:
        return "mast-general";
    case DetectorKind::mast_delta:
        return "mast-delta";
    case DetectorKind::mast_simple:
        return "mast";
    case DetectorKind::page:
        return "page";
    }
    return "unknown";
}

DetectorKind parse_detector_kind(std::string_view name)
{
    if (name == "mast")
        return DetectorKind::mast_simple;
    if (name == "mast-delta")
        return DetectorKind::mast_delta;
    if (name == "mast-general")
        return DetectorKind::mast_general;
    if (name == "page")
        return DetectorKind::page;
    throw std::invalid_argument("unknown detector '" + std::string(name) +
                                "' (expected mast, mast-delta, mast-general or page)");
}

DetectorConfig::DetectorConfig(DetectorKind kind, Barriers barriers, double alpha, NoiseModel noise,
                               double threshold)
    : kind_(kind), barriers_(barriers), alpha_(alpha), noise_(noise), threshold_(threshold)
{
    if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
        throw std::invalid_argument("threshold gamma must be finite and >= 0");
    }
}

DetectorConfig DetectorConfig::mast(NoiseModel noise, double threshold)
{
    return {DetectorKind::mast_simple, Barriers::single(1.0), 0.0, noise, threshold};
}

DetectorConfig DetectorConfig::mast_delta(double delta, NoiseModel noise, double threshold)
{
    return {DetectorKind::mast_delta, Barriers::single(delta), 0.0, noise, threshold};
}

DetectorConfig DetectorConfig::mast_general(Barriers barriers, NoiseModel noise, double threshold)
{
    return {DetectorKind::mast_general, barriers, 0.0, noise, threshold};
}

DetectorConfig DetectorConfig::page(double alpha, NoiseModel noise, double threshold)
{
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("page alpha must lie in (0, 1)");
    }
    return {DetectorKind::page, Barriers(1.0 - alpha, 1.0 + alpha), alpha, noise, threshold};
}

DetectorConfig DetectorConfig::with_threshold(double threshold) const
{
    return {kind_, barriers_, alpha_, noise_, threshold};
}

DetectorConfig DetectorConfig::with_noise(NoiseModel noise) const
{
    return {kind_, barriers_, alpha_, noise, threshold_};
}

DetectorState mast_update(DetectorState state, double x, const DetectorConfig& cfg)
{
    if (cfg.is_page()) {
        throw std::invalid_argument("mast_update called with a page configuration");
    }
    return update(state, x, cfg);
}

DetectorState page_update(DetectorState state, double x, const DetectorConfig& cfg)
{
    if (!cfg.is_page()) {
        throw std::invalid_argument("page_update called with a MAST configuration");
    }
    return update(state, x, cfg);
}

AlarmReport run_stream(std::span<const double> samples, const DetectorConfig& cfg, StreamOptions options)
{
    AlarmReport report;
    if (options.keep_trace) {
        report.trace.reserve(samples.size());
    }

    DetectorState state;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double x = samples[i];
        if (!std::isfinite(x)) {
            throw std::invalid_argument("non-finite sample at index " + std::to_string(i + 1));
        }
        state = update(state, x, cfg);
        const bool alarmed = crosses(state, cfg);
        if (options.keep_trace) {
            report.trace.push_back({i + 1, x, state.statistic, alarmed});
        }
        if (!alarmed) {
            continue;
        }
        report.alarms.push_back(i + 1);
        if (!report.alarm_index) {
            report.alarm_index = i + 1;
        }
        if (options.mode == StreamMode::stop_at_alarm) {
            break;
        }
        state.statistic = 0.0;
    }
    report.final_state = state;
    return report;
}

double brute_force_statistic(std::span<const double> samples, const Barriers& barriers, const NoiseModel& noise)
{
    const std::size_t n = samples.size();
    // j = n + 1 is the "no change" hypothesis with an empty sum.
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (std::size_t k = j; k < n; ++k) {
            sum += g_nonlinearity(samples[k], barriers, noise);
        }
        best = std::max(best, sum);
    }
    return best;
}

std::string format_real(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace)
{
    out << "n,x,statistic,alarmed\n";
    for (const auto& p : trace) {
        out << p.n << ',' << format_real(p.x) << ',' << format_real(p.statistic) << ',' << (p.alarmed ? 1 : 0)
            << '\n';
    }
}

}  // namespace mast
