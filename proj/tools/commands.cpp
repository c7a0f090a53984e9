#include "commands.hpp"

#include "mast/detectors.hpp"
#include "mast/ingestion.hpp"
#include "mast/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mast::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t default_seed = 20201015;

struct DetectorFlags {
    std::string detector = "mast";
    std::optional<double> delta;
    std::optional<double> delta_lower;
    std::optional<double> delta_upper;
    double alpha = 0.05;
};

struct DetectOptions {
    DetectorFlags det;
    std::string input;
    std::optional<double> sigma;
    std::size_t sigma_window = ingest::default_sigma_window;
    std::optional<double> gamma;
    std::string output;
    std::string ratios_output;
    std::string delimiter;
    std::string date_column = "date";
    std::string count_column = "count";
    std::string date_format = "%Y-%m-%d";
    std::size_t smooth = 0;
    bool monitor = false;
};

struct MonteCarloFlags {
    std::string scenario = "1";
    double sigma = 0.05;
    std::size_t trials = 10000;
    std::uint64_t seed = default_seed;
    unsigned threads = 0;
    std::optional<std::uint64_t> horizon;
    std::size_t change_time = 1;
    bool run_in = false;
};

struct SimulateOptions {
    DetectorFlags det;
    MonteCarloFlags mc;
    std::optional<double> gamma;
    std::string mode = "both";
    std::string output;
};

struct CurveOptions {
    DetectorFlags det;
    MonteCarloFlags mc;
    std::string detectors = "mast,page";
    std::vector<std::string> gamma_grid;
    std::string extrapolate_grid = "auto";
    double log10_pf_floor = -8.0;
    double r2_floor = sim::default_r2_floor;
    std::string compare_pf = "1e-3,1e-4,1e-6,1e-8";
    std::string output;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',')
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const auto first = item.find_first_not_of(' ');
        const auto last = item.find_last_not_of(' ');
        if (first != std::string::npos) {
            out.push_back(item.substr(first, last - first + 1));
        }
    }
    return out;
}

std::vector<double> parse_reals(const std::string& text)
{
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) {
            throw std::invalid_argument("not a number: '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

void add_detector_flags(CLI::App& cmd, DetectorFlags& f, bool with_kind)
{
    if (with_kind) {
        cmd.add_option("--detector", f.detector, "mast | mast-delta | mast-general | page")
            ->check(CLI::IsMember({"mast", "mast-delta", "mast-general", "page"}))
            ->capture_default_str();
    }
    cmd.add_option("--delta", f.delta, "Barrier for mast-delta");
    cmd.add_option("--delta-lower", f.delta_lower, "Lower barrier for mast-general");
    cmd.add_option("--delta-upper", f.delta_upper, "Upper barrier for mast-general");
    cmd.add_option("--alpha", f.alpha, "Page nominal alpha (means 1 -/+ alpha); also the scenario alpha")
        ->capture_default_str();
}

void add_mc_flags(CLI::App& cmd, MonteCarloFlags& f)
{
    cmd.add_option("--scenario", f.scenario, "1 (constant means) or 2 (daily random means)")
        ->check(CLI::IsMember({"1", "2"}))
        ->capture_default_str();
    cmd.add_option("--sigma", f.sigma, "Noise standard deviation")->capture_default_str();
    cmd.add_option("--trials", f.trials, "Monte Carlo trials per estimate")->capture_default_str();
    cmd.add_option("--seed", f.seed, "Master seed")->capture_default_str();
    cmd.add_option("--threads", f.threads, "Worker threads, 0 = all cores (results do not depend on it)")
        ->capture_default_str();
    cmd.add_option("--horizon", f.horizon, "Per-trial sample cap");
    cmd.add_option("--change-time", f.change_time, "1-based index of the first post-change sample")
        ->capture_default_str();
    cmd.add_flag("--run-in", f.run_in, "Run the detector through the pre-change samples before measuring delay");
}

DetectorConfig make_detector(DetectorKind kind, const DetectorFlags& f, NoiseModel noise, double gamma)
{
    switch (kind) {
    case DetectorKind::mast_simple:
        return DetectorConfig::mast(noise, gamma);
    case DetectorKind::mast_delta:
        if (!f.delta) {
            throw std::invalid_argument("mast-delta needs --delta");
        }
        return DetectorConfig::mast_delta(*f.delta, noise, gamma);
    case DetectorKind::mast_general:
        if (!f.delta_lower || !f.delta_upper) {
            throw std::invalid_argument("mast-general needs --delta-lower and --delta-upper");
        }
        return DetectorConfig::mast_general(Barriers(*f.delta_lower, *f.delta_upper), noise, gamma);
    case DetectorKind::page:
        return DetectorConfig::page(f.alpha, noise, gamma);
    }
    throw std::logic_error("unhandled detector kind");
}

json detector_json(const DetectorConfig& cfg)
{
    json j;
    j["kind"] = std::string(to_string(cfg.kind()));
    if (cfg.is_page()) {
        j["alpha"] = cfg.alpha();
    } else {
        j["delta_lower"] = cfg.barriers().lower();
        j["delta_upper"] = cfg.barriers().upper();
    }
    return j;
}

json mc_json(const MonteCarloFlags& f)
{
    json j;
    j["scenario"] = f.scenario;
    j["sigma"] = f.sigma;
    j["trials"] = f.trials;
    j["seed"] = f.seed;
    j["change_time"] = f.change_time;
    j["run_in"] = f.run_in;
    j["horizon"] = f.horizon ? json(*f.horizon) : json(nullptr);
    return j;
}

// Writes `content` to path (or to out when path is empty) and the manifest next to it.
void emit(const std::string& path, const std::string& content, const json& manifest, std::ostream& out)
{
    if (path.empty()) {
        out << content;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw std::runtime_error("cannot open output file " + path);
    }
    file << content;
    std::ofstream mf(path + ".manifest.json", std::ios::binary);
    if (!mf) {
        throw std::runtime_error("cannot open manifest file " + path + ".manifest.json");
    }
    mf << manifest.dump(2) << '\n';
}

json base_manifest(const std::string& subcommand)
{
    json j;
    j["tool"] = "mast";
    j["version"] = tool_version;
    j["subcommand"] = subcommand;
    return j;
}

int cmd_detect(const DetectOptions& o, std::ostream& out, std::ostream& err)
{
    std::ifstream in(o.input);
    if (!in) {
        err << "error: cannot read input file '" << o.input << "'\n";
        return exit_input_error;
    }
    ingest::TableFormat fmt;
    if (o.delimiter == "tab" || o.delimiter == "\\t") {
        fmt.delimiter = '\t';
    } else if (o.delimiter.size() == 1) {
        fmt.delimiter = o.delimiter[0];
    } else if (!o.delimiter.empty()) {
        err << "error: --delimiter must be a single character or 'tab'\n";
        return exit_input_error;
    }
    fmt.date_column = o.date_column;
    fmt.count_column = o.count_column;
    fmt.date_format = o.date_format;

    ingest::CountSeries counts;
    try {
        counts = ingest::parse_counts(in, fmt);
    } catch (const ingest::ParseError& e) {
        err << "error: " << o.input << ": " << e.what() << '\n';
        return exit_input_error;
    }
    if (o.smooth > 1) {
        counts = ingest::smooth_centered(counts, o.smooth);
    }
    const auto ratios = ingest::to_ratios(counts);

    std::optional<NoiseModel> noise;
    std::string sigma_source = "flag";
    if (o.sigma) {
        noise = NoiseModel(*o.sigma);
    } else {
        try {
            noise = ingest::estimate_sigma(ratios, o.sigma_window);
            sigma_source = "estimated";
        } catch (const std::exception& e) {
            err << "error: sigma estimation failed: " << e.what() << " (supply --sigma)\n";
            return exit_input_error;
        }
    }

    const auto cfg = make_detector(parse_detector_kind(o.det.detector), o.det, *noise, *o.gamma);
    const auto report =
        ingest::run_detector(ratios, cfg, o.monitor ? StreamMode::reset_on_alarm : StreamMode::stop_at_alarm);

    json manifest = base_manifest("detect");
    manifest["input"] = o.input;
    manifest["detector"] = detector_json(cfg);
    manifest["sigma"] = noise->sigma();
    manifest["sigma_source"] = sigma_source;
    manifest["sigma_window"] = o.sigma ? json(nullptr) : json(o.sigma_window);
    manifest["gamma"] = cfg.threshold();
    manifest["smooth"] = o.smooth;
    manifest["monitor"] = o.monitor;

    out << "sigma: " << format_real(noise->sigma()) << " (" << sigma_source << ")\n";
    if (o.smooth > 1) {
        out << "warning: smoothing correlates successive ratios; the detector assumes independent samples\n";
    }
    if (report.alarms.empty()) {
        out << "no alarm\n";
    } else {
        for (const auto& d : report.alarms) {
            out << "alarm: " << ingest::format_date(d) << '\n';
        }
    }

    if (!o.output.empty()) {
        std::ostringstream trace;
        ingest::write_series_trace(trace, report);
        emit(o.output, trace.str(), manifest, out);
    }
    if (!o.ratios_output.empty()) {
        std::ostringstream rs;
        ingest::write_ratios(rs, ratios);
        emit(o.ratios_output, rs.str(), manifest, out);
    }
    return report.alarms.empty() ? exit_ok : exit_alarm;
}

sim::MonteCarloOptions mc_options(const MonteCarloFlags& f)
{
    sim::MonteCarloOptions mc;
    mc.trials = f.trials;
    mc.threads = f.threads;
    mc.horizon = f.horizon;
    mc.run_in = f.run_in;
    return mc;
}

sim::ScenarioSpec scenario_spec(const MonteCarloFlags& f, double alpha)
{
    sim::ScenarioSpec spec;
    spec.kind = sim::parse_scenario(f.scenario);
    spec.alpha = alpha;
    spec.noise = NoiseModel(f.sigma);
    spec.change_time = f.change_time;
    spec.validate();
    return spec;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err)
{
    const auto spec = scenario_spec(o.mc, o.det.alpha);
    const auto cfg = make_detector(parse_detector_kind(o.det.detector), o.det, spec.noise, *o.gamma);
    const auto mc = mc_options(o.mc);
    const bool want_delay = o.mode != "pf";
    const bool want_pf = o.mode != "delay";

    sim::PerformanceEstimate est;
    est.gamma = *o.gamma;
    if (want_delay) {
        est.delay = sim::estimate_delay(spec, cfg, *o.gamma, mc, o.mc.seed);
    }
    if (want_pf) {
        try {
            est.false_alarm = sim::estimate_pf(spec.controlled(), cfg, *o.gamma, mc, o.mc.seed);
        } catch (const sim::InsufficientEvents& e) {
            err << "error: " << e.what() << "\n"
                << "hint: lower --gamma or use 'mast curve' to extrapolate Pf from smaller thresholds\n";
            return exit_input_error;
        }
    }

    std::ostringstream summary;
    summary << "detector " << to_string(cfg.kind()) << ", scenario " << o.mc.scenario << ", gamma "
            << format_real(*o.gamma) << ", trials " << o.mc.trials << ", seed " << o.mc.seed << '\n';
    if (est.delay) {
        summary << "mean delay: " << format_real(est.delay->mean_delay) << " +/- " << format_real(est.delay->delay_se)
                << '\n';
        if (est.delay->censored > 0) {
            err << "warning: " << est.delay->censored << " delay trials hit the horizon of " << est.delay->horizon
                << " samples and were counted at the horizon\n";
        }
    }
    if (est.false_alarm) {
        summary << "pf: " << format_real(est.false_alarm->pf) << " +/- " << format_real(est.false_alarm->pf_se)
                << " (log10 " << format_real(std::log10(est.false_alarm->pf)) << ", " << est.false_alarm->events
                << " crossings)\n";
    }

    std::ostringstream csv;
    csv << "detector,scenario,gamma,delay,delay_se,delay_censored,pf,pf_se,log10_pf,trials\n";
    csv << to_string(cfg.kind()) << ',' << o.mc.scenario << ',' << format_real(*o.gamma) << ',';
    if (est.delay) {
        csv << format_real(est.delay->mean_delay) << ',' << format_real(est.delay->delay_se) << ','
            << est.delay->censored;
    } else {
        csv << ",,";
    }
    csv << ',';
    if (est.false_alarm) {
        csv << format_real(est.false_alarm->pf) << ',' << format_real(est.false_alarm->pf_se) << ','
            << format_real(std::log10(est.false_alarm->pf));
    } else {
        csv << ",,";
    }
    csv << ',' << o.mc.trials << '\n';

    json manifest = base_manifest("simulate");
    manifest["detector"] = detector_json(cfg);
    manifest["monte_carlo"] = mc_json(o.mc);
    manifest["alpha"] = o.det.alpha;
    manifest["gamma"] = *o.gamma;
    manifest["mode"] = o.mode;

    if (o.output.empty()) {
        out << summary.str() << csv.str();
    } else {
        out << summary.str();
        emit(o.output, csv.str(), manifest, out);
    }
    return exit_ok;
}

// Entries are either a bare list (all detectors) or "detector=list".
std::map<std::string, std::vector<double>> parse_grid_flags(const std::vector<std::string>& flags)
{
    std::map<std::string, std::vector<double>> grids;
    for (const auto& f : flags) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) {
            grids["*"] = parse_reals(f);
        } else {
            grids[f.substr(0, eq)] = parse_reals(f.substr(eq + 1));
        }
    }
    return grids;
}

int cmd_curve(const CurveOptions& o, std::ostream& out, std::ostream& err)
{
    const auto spec = scenario_spec(o.mc, o.det.alpha);
    const auto mc = mc_options(o.mc);
    const auto grids = parse_grid_flags(o.gamma_grid);
    const auto targets = parse_reals(o.compare_pf);

    std::optional<std::vector<double>> fixed_extrapolation;
    if (o.extrapolate_grid == "none") {
        fixed_extrapolation.emplace();
    } else if (o.extrapolate_grid != "auto") {
        fixed_extrapolation = parse_reals(o.extrapolate_grid);
    }

    json manifest = base_manifest("curve");
    manifest["monte_carlo"] = mc_json(o.mc);
    manifest["alpha"] = o.det.alpha;
    manifest["r2_floor"] = o.r2_floor;
    manifest["log10_pf_floor"] = o.log10_pf_floor;
    manifest["extrapolate_grid"] = o.extrapolate_grid;
    manifest["detectors"] = json::array();

    std::ostringstream csv;
    sim::write_curve_csv_header(csv);
    std::vector<sim::OperationalCurve> curves;
    int status = exit_ok;

    for (const auto& name : split_list(o.detectors)) {
        const auto kind = parse_detector_kind(name);
        const auto cfg = make_detector(kind, o.det, spec.noise, 0.0);
        std::vector<double> grid = sim::default_gamma_grid(kind, spec.kind);
        if (auto it = grids.find(name); it != grids.end()) {
            grid = it->second;
        } else if (auto all = grids.find("*"); all != grids.end()) {
            grid = all->second;
        }

        auto curve = sim::measure_curve(spec, cfg, grid, mc, o.mc.seed);
        for (const auto& p : curve.points) {
            if (p.delay_censored > 0) {
                err << "warning: " << to_string(kind) << " gamma " << format_real(p.gamma) << ": " << p.delay_censored
                    << " delay trials hit the horizon; the delay is a lower bound\n";
            }
        }
        try {
            const auto ext = fixed_extrapolation ? *fixed_extrapolation
                                                 : sim::auto_extrapolation_grid(curve, o.log10_pf_floor);
            sim::extrapolate(curve, ext, o.r2_floor);
        } catch (const sim::ExtrapolationRefused& e) {
            err << "error: " << e.what() << '\n';
            status = exit_input_error;
        }
        sim::write_curve_csv_rows(csv, curve);

        json d = detector_json(cfg);
        d["gamma_grid"] = grid;
        manifest["detectors"].push_back(d);

        out << to_string(kind) << ": delay = " << format_real(curve.delay_fit.intercept) << " + "
            << format_real(curve.delay_fit.slope) << " gamma (r2 " << format_real(curve.delay_fit.r_squared)
            << "), log10 pf = " << format_real(curve.log10_pf_fit.intercept) << " + "
            << format_real(curve.log10_pf_fit.slope) << " gamma (r2 " << format_real(curve.log10_pf_fit.r_squared)
            << ")\n";
        curves.push_back(std::move(curve));
    }

    for (double pf : targets) {
        out << "pf " << format_real(pf) << ":";
        for (const auto& c : curves) {
            out << ' ' << to_string(c.detector) << " delay " << format_real(c.delay_at_log10_pf(std::log10(pf)));
        }
        out << '\n';
    }

    emit(o.output, csv.str(), manifest, out);
    return status;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Mean-agnostic sequential tests (MAST) and Page CUSUM for ratio time series.\n"
                 "Exit codes: 0 success / no alarm, 1 usage or input error, 2 alarm raised (detect)."};
    app.set_version_flag("--version", tool_version);
    app.set_config("--config", "", "INI/TOML file with option values ([detect], [simulate], [curve] sections)");
    app.require_subcommand(1);

    DetectOptions detect;
    auto* detect_cmd = app.add_subcommand("detect", "Run a detector over a daily-count series");
    detect_cmd->add_option("--input", detect.input, "Delimited file with date and count columns")->required();
    add_detector_flags(*detect_cmd, detect.det, true);
    auto* sigma_opt = detect_cmd->add_option("--sigma", detect.sigma, "Known noise standard deviation");
    detect_cmd->add_option("--sigma-window", detect.sigma_window, "Trailing non-gap ratios used to estimate sigma")
        ->capture_default_str()
        ->excludes(sigma_opt);
    detect_cmd->add_option("--gamma", detect.gamma, "Decision threshold")->required();
    detect_cmd->add_option("--output", detect.output, "Statistic trace CSV");
    detect_cmd->add_option("--ratios-output", detect.ratios_output, "Ratio series CSV");
    detect_cmd->add_option("--delimiter", detect.delimiter, "Field delimiter (default: detect comma/tab)");
    detect_cmd->add_option("--date-column", detect.date_column)->capture_default_str();
    detect_cmd->add_option("--count-column", detect.count_column)->capture_default_str();
    detect_cmd->add_option("--date-format", detect.date_format, "strftime-style date format")->capture_default_str();
    detect_cmd->add_option("--smooth", detect.smooth, "Centered moving-average window (odd); 0 = off");
    detect_cmd->add_flag("--monitor", detect.monitor, "Reset after each alarm and keep going");

    SimulateOptions simulate;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo delay and false-alarm estimates at one threshold");
    add_detector_flags(*sim_cmd, simulate.det, true);
    add_mc_flags(*sim_cmd, simulate.mc);
    sim_cmd->add_option("--gamma", simulate.gamma, "Decision threshold")->required();
    sim_cmd->add_option("--mode", simulate.mode, "both | delay | pf")
        ->check(CLI::IsMember({"both", "delay", "pf"}))
        ->capture_default_str();
    sim_cmd->add_option("--output", simulate.output, "Estimate CSV (stdout if omitted)");

    CurveOptions curve;
    auto* curve_cmd = app.add_subcommand("curve", "Operational curve (delay vs log10 Pf) for one or more detectors");
    add_detector_flags(*curve_cmd, curve.det, false);
    add_mc_flags(*curve_cmd, curve.mc);
    curve_cmd->add_option("--detectors", curve.detectors, "Comma-separated detector list")->capture_default_str();
    curve_cmd->add_option("--gamma-grid", curve.gamma_grid,
                          "Measured thresholds: 'g1,g2,...' for all detectors or 'detector=g1,g2,...'");
    curve_cmd->add_option("--extrapolate-grid", curve.extrapolate_grid,
                          "Extrapolated thresholds: 'auto', 'none' or 'g1,g2,...'")
        ->capture_default_str();
    curve_cmd->add_option("--log10-pf-floor", curve.log10_pf_floor, "Lowest log10 Pf reached by the auto grid")
        ->capture_default_str();
    curve_cmd->add_option("--r2-floor", curve.r2_floor, "Minimum fit r^2 for extrapolation")->capture_default_str();
    curve_cmd->add_option("--compare-pf", curve.compare_pf, "Pf values at which delays are reported")
        ->capture_default_str();
    curve_cmd->add_option("--output", curve.output, "Curve CSV (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_input_error;
    }

    try {
        if (*detect_cmd) {
            return cmd_detect(detect, out, err);
        }
        if (*sim_cmd) {
            return cmd_simulate(simulate, out, err);
        }
        return cmd_curve(curve, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
}

}  // namespace mast::cli
