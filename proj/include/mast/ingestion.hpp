#pragma once

#include "mast/core_statistics.hpp"
#include "mast/detectors.hpp"

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mast::ingest {

using Date = std::chrono::sys_days;

// Input row error; line is 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateSigma : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CountEntry {
    Date date;
    double count;  // integral for parsed input; fractional after smoothing
};

// Daily counts with strictly increasing dates. Missing days are allowed.
class CountSeries {
public:
    CountSeries() = default;
    explicit CountSeries(std::vector<CountEntry> entries);  // validates ordering and signs

    const std::vector<CountEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    // Calendar days between first and last entry that have no entry.
    std::size_t missing_days() const noexcept;

private:
    std::vector<CountEntry> entries_;
};

struct RatioEntry {
    Date date;
    std::optional<double> x;  // nullopt marks a gap
};

using RatioSeries = std::vector<RatioEntry>;

struct TableFormat {
    char delimiter = '\0';  // '\0' = detect from first line (tab if present, else comma)
    std::string date_column = "date";
    std::string count_column = "count";
    std::string date_format = "%Y-%m-%d";  // std::get_time syntax
};

/// Reads delimited date/count text. A first row containing both configured
/// column names is a header; otherwise the date is column 0 and the count
/// column 1. Throws ParseError on malformed, duplicate, out-of-order or
/// negative rows.
CountSeries parse_counts(std::istream& in, const TableFormat& format = {});

/// x_n = p_n / p_{n-1} for each consecutive entry. A missing calendar day or
/// p_{n-1} == 0 yields a gap; p_n == 0 after a positive count yields 0.0.
RatioSeries to_ratios(const CountSeries& series);

/// Rebuilds counts from p_0 via p_n = round(p_{n-1} x_n). Stops at the first gap.
std::vector<double> reconstruct_counts(double p0, const RatioSeries& ratios);

inline constexpr std::size_t default_sigma_window = 30;
inline constexpr std::size_t min_sigma_window = 8;

/// Sample standard deviation of the last `window` non-gap ratios about their
/// window mean.
NoiseModel estimate_sigma(const RatioSeries& ratios, std::size_t window = default_sigma_window);

/// Centered moving average over `window` (odd) consecutive days. Entries whose
/// window is incomplete or spans a missing day are dropped. Successive ratios
/// of a smoothed series are correlated.
CountSeries smooth_centered(const CountSeries& series, std::size_t window = 7);

struct SeriesTracePoint {
    Date date;
    std::optional<double> x;
    double statistic;
    bool alarmed;
};

struct SeriesReport {
    std::vector<Date> alarms;
    std::vector<SeriesTracePoint> trace;
    DetectorState final_state;
};

/// Runs the detector over a ratio series. Gaps leave the state untouched and
/// are traced with the carried statistic.
SeriesReport run_detector(const RatioSeries& ratios, const DetectorConfig& cfg,
                          StreamMode mode = StreamMode::stop_at_alarm);

std::string format_date(Date date, const std::string& format = "%Y-%m-%d");

// "date,ratio" rows, gaps as an empty ratio field.
void write_ratios(std::ostream& out, const RatioSeries& ratios, char delimiter = ',');

// "date,x,statistic,alarmed" rows.
void write_series_trace(std::ostream& out, const SeriesReport& report);

}  // namespace mast::ingest
