#include "mast/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mast::ingest {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char delimiter)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return fields;
}

std::optional<Date> parse_date(std::string_view field, const std::string& format)
{
    std::tm tm{};
    std::istringstream ss{std::string(field)};
    ss >> std::get_time(&tm, format.c_str());
    if (ss.fail()) {
        return std::nullopt;
    }
    ss >> std::ws;
    if (!ss.eof()) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{tm.tm_year + 1900},
                                          std::chrono::month{static_cast<unsigned>(tm.tm_mon + 1)},
                                          std::chrono::day{static_cast<unsigned>(tm.tm_mday)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Date{ymd};
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
{
}

CountSeries::CountSeries(std::vector<CountEntry> entries) : entries_(std::move(entries))
{
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!(entries_[i].count >= 0.0) || !std::isfinite(entries_[i].count)) {
            throw std::invalid_argument("count series entry " + std::to_string(i + 1) + " is negative or not finite");
        }
        if (i > 0 && !(entries_[i - 1].date < entries_[i].date)) {
            throw std::invalid_argument("count series dates must be strictly increasing (entry " +
                                        std::to_string(i + 1) + ")");
        }
    }
}

std::size_t CountSeries::missing_days() const noexcept
{
    if (entries_.size() < 2) {
        return 0;
    }
    const auto span = (entries_.back().date - entries_.front().date).count() + 1;
    return static_cast<std::size_t>(span) - entries_.size();
}

CountSeries parse_counts(std::istream& in, const TableFormat& format)
{
    std::vector<CountEntry> entries;
    std::size_t date_idx = 0;
    std::size_t count_idx = 1;
    char delimiter = format.delimiter;
    bool first_row = true;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        if (delimiter == '\0') {
            delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
        }
        const auto fields = split(line, delimiter);

        if (first_row) {
            first_row = false;
            const auto date_it = std::find(fields.begin(), fields.end(), format.date_column);
            const auto count_it = std::find(fields.begin(), fields.end(), format.count_column);
            if (date_it != fields.end() && count_it != fields.end()) {
                date_idx = static_cast<std::size_t>(date_it - fields.begin());
                count_idx = static_cast<std::size_t>(count_it - fields.begin());
                continue;
            }
        }

        if (fields.size() <= std::max(date_idx, count_idx)) {
            throw ParseError(line_no, "expected at least " + std::to_string(std::max(date_idx, count_idx) + 1) +
                                          " fields, found " + std::to_string(fields.size()));
        }
        const auto date = parse_date(fields[date_idx], format.date_format);
        if (!date) {
            throw ParseError(line_no, "unparseable date '" + std::string(fields[date_idx]) + "'");
        }

        const auto text = fields[count_idx];
        long long count = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), count);
        if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
            throw ParseError(line_no, "unparseable count '" + std::string(text) + "'");
        }
        if (count < 0) {
            throw ParseError(line_no, "negative count " + std::to_string(count));
        }

        if (!entries.empty()) {
            if (entries.back().date == *date) {
                throw ParseError(line_no, "duplicate date " + std::string(fields[date_idx]));
            }
            if (*date < entries.back().date) {
                throw ParseError(line_no, "date " + std::string(fields[date_idx]) + " is earlier than the previous row");
            }
        }
        entries.push_back({*date, static_cast<double>(count)});
    }
    return CountSeries(std::move(entries));
}

RatioSeries to_ratios(const CountSeries& series)
{
    const auto& e = series.entries();
    if (e.size() < 2) {
        throw InsufficientData("at least 2 counts are needed to form a ratio");
    }
    RatioSeries out;
    out.reserve(e.size() - 1);
    for (std::size_t i = 1; i < e.size(); ++i) {
        const bool consecutive = (e[i].date - e[i - 1].date).count() == 1;
        if (!consecutive || e[i - 1].count == 0.0) {
            out.push_back({e[i].date, std::nullopt});
        } else {
            out.push_back({e[i].date, e[i].count / e[i - 1].count});
        }
    }
    return out;
}

std::vector<double> reconstruct_counts(double p0, const RatioSeries& ratios)
{
    std::vector<double> counts{p0};
    for (const auto& r : ratios) {
        if (!r.x) {
            break;
        }
        counts.push_back(std::round(counts.back() * *r.x));
    }
    return counts;
}

NoiseModel estimate_sigma(const RatioSeries& ratios, std::size_t window)
{
    if (window < min_sigma_window) {
        throw std::invalid_argument("sigma window must be >= " + std::to_string(min_sigma_window));
    }
    std::vector<double> recent;
    recent.reserve(window);
    for (auto it = ratios.rbegin(); it != ratios.rend() && recent.size() < window; ++it) {
        if (it->x) {
            recent.push_back(*it->x);
        }
    }
    if (recent.size() < window) {
        throw InsufficientData("sigma window of " + std::to_string(window) + " needs that many non-gap ratios, found " +
                               std::to_string(recent.size()) + "; supply sigma explicitly");
    }
    const double n = static_cast<double>(recent.size());
    const double mean = std::accumulate(recent.begin(), recent.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : recent) {
        ss += (x - mean) * (x - mean);
    }
    const double sigma = std::sqrt(ss / (n - 1.0));
    if (!(sigma > 0.0)) {
        throw DegenerateSigma("degenerate sigma: the last " + std::to_string(window) +
                              " ratios are constant; supply sigma explicitly");
    }
    return NoiseModel(sigma);
}

CountSeries smooth_centered(const CountSeries& series, std::size_t window)
{
    if (window < 1 || window % 2 == 0) {
        throw std::invalid_argument("smoothing window must be odd and >= 1");
    }
    const auto& e = series.entries();
    const std::size_t half = window / 2;
    std::vector<CountEntry> out;
    for (std::size_t i = half; i + half < e.size(); ++i) {
        const std::size_t first = i - half;
        const std::size_t last = i + half;
        if ((e[last].date - e[first].date).count() != static_cast<long>(window - 1)) {
            continue;
        }
        double sum = 0.0;
        for (std::size_t k = first; k <= last; ++k) {
            sum += e[k].count;
        }
        out.push_back({e[i].date, sum / static_cast<double>(window)});
    }
    return CountSeries(std::move(out));
}

SeriesReport run_detector(const RatioSeries& ratios, const DetectorConfig& cfg, StreamMode mode)
{
    SeriesReport report;
    DetectorState state;
    for (const auto& r : ratios) {
        if (!r.x) {
            report.trace.push_back({r.date, std::nullopt, state.statistic, false});
            continue;
        }
        state = update(state, *r.x, cfg);
        const bool alarmed = crosses(state, cfg);
        report.trace.push_back({r.date, r.x, state.statistic, alarmed});
        if (alarmed) {
            report.alarms.push_back(r.date);
            if (mode == StreamMode::stop_at_alarm) {
                break;
            }
            state.statistic = 0.0;
        }
    }
    report.final_state = state;
    return report;
}

std::string format_date(Date date, const std::string& format)
{
    const std::chrono::year_month_day ymd{date};
    std::tm tm{};
    tm.tm_year = static_cast<int>(ymd.year()) - 1900;
    tm.tm_mon = static_cast<int>(static_cast<unsigned>(ymd.month())) - 1;
    tm.tm_mday = static_cast<int>(static_cast<unsigned>(ymd.day()));
    std::ostringstream ss;
    ss << std::put_time(&tm, format.c_str());
    return ss.str();
}

void write_ratios(std::ostream& out, const RatioSeries& ratios, char delimiter)
{
    out << "date" << delimiter << "ratio\n";
    for (const auto& r : ratios) {
        out << format_date(r.date) << delimiter << (r.x ? format_real(*r.x) : std::string()) << '\n';
    }
}

void write_series_trace(std::ostream& out, const SeriesReport& report)
{
    out << "date,x,statistic,alarmed\n";
    for (const auto& p : report.trace) {
        out << format_date(p.date) << ',' << (p.x ? format_real(*p.x) : std::string()) << ','
            << format_real(p.statistic) << ',' << (p.alarmed ? 1 : 0) << '\n';
    }
}

}  // namespace mast::ingest
