#pragma once

#include "bench.hpp"
#include "core.hpp"
#include "pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace structdecomp::io {

/// Shortest "%.12g"-style rendering, independent of the C locale.
inline std::string format_number(double x) {
    if (x == 0.0) return "0";  // also folds -0
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

/// The value a reader of format_number's output sees.
inline double rounded(double x) {
    const std::string s = format_number(x);
    double v = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

inline std::optional<double> parse_number(std::string_view text) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t next = line.find(sep, pos);
        out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline bool is_missing_token(std::string_view s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null" || s == "NULL";
}

}  // namespace detail

/// Raw CSV contents before validation.
struct CsvTable {
    std::optional<std::vector<std::string>> header;
    std::vector<std::string> labels;  // empty for single-column input
    std::vector<std::optional<double>> values;
};

/// One column of values, or two columns of time,value. A first row whose value
/// field is neither numeric nor a missing-value token is a header.
inline CsvTable read_csv_table(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t columns = 0;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split(line, ',');
        if (fields.size() > 2) {
            throw Error(ErrorCode::InputError, "expected 1 or 2 columns on line " + std::to_string(line_no));
        }
        const std::string_view value_field = fields.back();
        if (first) {
            first = false;
            columns = fields.size();
            if (!detail::is_missing_token(value_field) && !parse_number(value_field)) {
                table.header = std::vector<std::string>(fields.begin(), fields.end());
                continue;
            }
        }
        if (fields.size() != columns) {
            throw Error(ErrorCode::InputError, "inconsistent column count on line " + std::to_string(line_no));
        }
        if (detail::is_missing_token(value_field)) {
            table.values.emplace_back(std::nullopt);
        } else if (auto v = parse_number(value_field)) {
            table.values.emplace_back(*v);
        } else {
            throw Error(ErrorCode::InputError,
                        "cannot parse '" + std::string(value_field) + "' on line " + std::to_string(line_no));
        }
        if (columns == 2) table.labels.emplace_back(fields.front());
    }
    if (table.values.empty()) throw Error(ErrorCode::EmptySeries, "input has no data rows");
    return table;
}

inline TimeSeries read_series(std::istream& in, bool impute = false, std::optional<std::size_t> period = std::nullopt) {
    CsvTable table = read_csv_table(in);
    std::optional<std::vector<std::string>> labels;
    if (!table.labels.empty()) labels = std::move(table.labels);
    return validate_series(std::span<const std::optional<double>>(table.values), std::move(labels), impute, period);
}

inline TimeSeries read_series_file(const std::string& path, bool impute = false,
                                   std::optional<std::size_t> period = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InputError, "cannot open " + path);
    return read_series(in, impute, period);
}

inline constexpr std::string_view kComponentCsvHeader = "index,time,value,cleaned,trend,seasonal,residual,segment,anomaly";

/// Component table, one row per sample. `time` falls back to the index when
/// the input had no labels.
inline void write_components_csv(std::ostream& out, const DecompositionResult& r) {
    out << kComponentCsvHeader << '\n';
    std::vector<std::size_t> segment_of(r.cleaned.size());
    for (const Segment& seg : r.segments())
        for (std::size_t i = seg.start; i <= seg.end; ++i) segment_of[i] = seg.id;
    for (std::size_t i = 0; i < r.cleaned.size(); ++i) {
        out << i << ',' << (r.time_labels ? (*r.time_labels)[i] : std::to_string(i)) << ','
            << format_number(r.observed[i]) << ',' << format_number(r.cleaned[i]) << ',' << format_number(r.trend[i])
            << ',' << format_number(r.seasonal[i]) << ',' << format_number(r.residual[i]) << ',' << segment_of[i] << ','
            << (r.anomalies.flags[i] ? 1 : 0) << '\n';
    }
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["changepoint_method"] = to_string(c.changepoint_method);
    if (c.penalty.mode == PenaltyPolicy::Mode::automatic) {
        j["penalty"] = "auto";
    } else {
        j["penalty"] = rounded(c.penalty.value);
    }
    j["min_segment_length"] = c.min_segment_length;
    j["cusum_critical_value"] = rounded(c.cusum_critical_value);
    j["anomaly_method"] = to_string(c.anomaly_method);
    j["anomaly_threshold"] = c.anomaly_threshold ? nlohmann::ordered_json(rounded(*c.anomaly_threshold)) : nullptr;
    j["anomaly_policy"] = to_string(c.anomaly_policy);
    j["max_anomaly_fraction"] = rounded(c.max_anomaly_fraction);
    j["smoother"] = to_string(c.smoother);
    j["span"] = rounded(c.smoother_params.span);
    j["robustness_iterations"] = c.smoother_params.robustness_iterations;
    j["window"] = c.smoother_params.window ? nlohmann::ordered_json(*c.smoother_params.window) : nullptr;
    j["lambda"] = rounded(c.smoother_params.lambda);
    j["model"] = to_string(c.model);
    j["period"] = c.period ? nlohmann::ordered_json(*c.period) : nullptr;
    return j;
}

inline nlohmann::ordered_json anomalies_to_json(const AnomalyReport& report) {
    nlohmann::ordered_json j;
    const auto idx = report.flagged_indices();
    j["indices"] = idx;
    auto scores = nlohmann::ordered_json::array();
    for (std::size_t i : idx) scores.push_back(rounded(report.scores[i]));
    j["scores"] = scores;
    j["method"] = to_string(report.method);
    j["threshold"] = rounded(report.threshold_used);
    auto repl = nlohmann::ordered_json::array();
    for (const auto& [i, v] : report.replacements) repl.push_back({{"index", i}, {"value", rounded(v)}});
    j["replacements"] = repl;
    return j;
}

/// Resolved config, stage outputs and summary. Timings are left out so the
/// document is a pure function of the input and flags.
inline nlohmann::ordered_json summary_to_json(const DecompositionResult& r) {
    nlohmann::ordered_json j;
    j["n"] = r.summary.n;
    j["config"] = config_to_json(r.config_echo);
    j["breaks"] = std::vector<std::size_t>(r.changepoints.breaks().begin(), r.changepoints.breaks().end());
    j["anomalies"] = anomalies_to_json(r.anomalies);
    j["summary"] = {
        {"segment_count", r.summary.segment_count},
        {"anomaly_count", r.summary.anomaly_count},
        {"trend_variance_share", rounded(r.summary.trend_variance_share)},
        {"seasonal_variance_share", rounded(r.summary.seasonal_variance_share)},
        {"residual_variance_share", rounded(r.summary.residual_variance_share)},
        {"reconstruction_error", rounded(reconstruction_error(r))},
    };
    return j;
}

inline nlohmann::ordered_json breakpoints_to_json(const ChangepointSet& cps, ChangepointMethod method,
                                                  std::optional<double> penalty) {
    nlohmann::ordered_json j;
    j["breaks"] = std::vector<std::size_t>(cps.breaks().begin(), cps.breaks().end());
    j["method"] = to_string(method);
    j["penalty"] = penalty ? nlohmann::ordered_json(rounded(*penalty)) : nullptr;
    return j;
}

inline void write_scores_csv(std::ostream& out, std::span<const MethodScore> rows) {
    out << "config_id,trend_rmse,seasonal_rmse,changepoint_precision,changepoint_recall,changepoint_f1,"
           "anomaly_precision,anomaly_recall,runtime_ms,failed,error\n";
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        out << r.config_id << ',' << format_number(r.trend_rmse) << ',' << format_number(r.seasonal_rmse) << ','
            << format_number(r.changepoint_precision) << ',' << format_number(r.changepoint_recall) << ','
            << format_number(r.changepoint_f1) << ',' << format_number(r.anomaly_precision) << ','
            << format_number(r.anomaly_recall) << ',' << format_number(r.runtime_ms) << ',' << (r.failed ? 1 : 0)
            << ",\"" << err << "\"\n";
    }
}

inline nlohmann::ordered_json scores_to_json(std::span<const MethodScore> rows) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        arr.push_back({
            {"config_id", r.config_id},
            {"trend_rmse", rounded(r.trend_rmse)},
            {"seasonal_rmse", rounded(r.seasonal_rmse)},
            {"changepoint_precision", rounded(r.changepoint_precision)},
            {"changepoint_recall", rounded(r.changepoint_recall)},
            {"changepoint_f1", rounded(r.changepoint_f1)},
            {"anomaly_precision", rounded(r.anomaly_precision)},
            {"anomaly_recall", rounded(r.anomaly_recall)},
            {"runtime_ms", rounded(r.runtime_ms)},
            {"failed", r.failed},
            {"error", r.error},
        });
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Option names shared by the command line and configuration strings

inline ChangepointMethod parse_changepoint_method(std::string_view s) {
    if (s == "pelt") return ChangepointMethod::pelt;
    if (s == "binseg") return ChangepointMethod::binseg;
    if (s == "cusum") return ChangepointMethod::cusum;
    if (s == "none") return ChangepointMethod::none;
    throw Error(ErrorCode::InvalidConfig, "unknown changepoint method '" + std::string(s) + "'");
}

inline AnomalyMethod parse_anomaly_method(std::string_view s) {
    if (s == "rollmedian" || s == "rolling_median") return AnomalyMethod::rolling_median;
    if (s == "zscore") return AnomalyMethod::zscore;
    if (s == "mad") return AnomalyMethod::mad;
    if (s == "none") return AnomalyMethod::none;
    throw Error(ErrorCode::InvalidConfig, "unknown anomaly method '" + std::string(s) + "'");
}

inline AnomalyPolicy parse_anomaly_policy(std::string_view s) {
    if (s == "replace") return AnomalyPolicy::replace;
    if (s == "keep") return AnomalyPolicy::keep;
    throw Error(ErrorCode::InvalidConfig, "unknown anomaly policy '" + std::string(s) + "'");
}

inline SmootherMethod parse_smoother(std::string_view s) {
    if (s == "lowess" || s == "loess") return SmootherMethod::lowess;
    if (s == "ma" || s == "moving_average") return SmootherMethod::moving_average;
    if (s == "spline" || s == "penalized") return SmootherMethod::penalized;
    throw Error(ErrorCode::InvalidConfig, "unknown smoother '" + std::string(s) + "'");
}

inline DecompositionModel parse_model(std::string_view s) {
    if (s == "additive") return DecompositionModel::additive;
    if (s == "multiplicative") return DecompositionModel::multiplicative;
    throw Error(ErrorCode::InvalidConfig, "unknown model '" + std::string(s) + "'");
}

inline PenaltyPolicy parse_penalty(std::string_view s) {
    if (s == "auto") return PenaltyPolicy::automatic();
    const auto v = parse_number(s);
    if (!v) throw Error(ErrorCode::InvalidConfig, "penalty must be 'auto' or a positive number");
    return PenaltyPolicy::fixed(*v);
}

namespace detail {

inline double require_number(std::string_view key, std::string_view value) {
    const auto v = parse_number(value);
    if (!v) throw Error(ErrorCode::InvalidConfig, "option " + std::string(key) + " expects a number");
    return *v;
}

inline std::size_t require_count(std::string_view key, std::string_view value) {
    const double v = require_number(key, value);
    if (!(v >= 0.0) || v != std::floor(v)) {
        throw Error(ErrorCode::InvalidConfig, "option " + std::string(key) + " expects a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Applies one `key=value` setting using the command-line option names
/// (changepoint, penalty, min-seg, critical, anomaly, threshold, policy,
/// smoother, span, iterations, window, lambda, model, period).
inline void apply_setting(PipelineConfig& c, std::string_view key, std::string_view value) {
    if (key == "changepoint") c.changepoint_method = parse_changepoint_method(value);
    else if (key == "penalty") c.penalty = parse_penalty(value);
    else if (key == "min-seg") c.min_segment_length = detail::require_count(key, value);
    else if (key == "critical") c.cusum_critical_value = detail::require_number(key, value);
    else if (key == "anomaly") c.anomaly_method = parse_anomaly_method(value);
    else if (key == "threshold") c.anomaly_threshold = detail::require_number(key, value);
    else if (key == "policy") c.anomaly_policy = parse_anomaly_policy(value);
    else if (key == "smoother") c.smoother = parse_smoother(value);
    else if (key == "span") c.smoother_params.span = detail::require_number(key, value);
    else if (key == "iterations") c.smoother_params.robustness_iterations = detail::require_count(key, value);
    else if (key == "window") c.smoother_params.window = detail::require_count(key, value);
    else if (key == "lambda") c.smoother_params.lambda = detail::require_number(key, value);
    else if (key == "model") c.model = parse_model(value);
    else if (key == "period") c.period = detail::require_count(key, value);
    else throw Error(ErrorCode::InvalidConfig, "unknown setting '" + std::string(key) + "'");
}

/// Parses "id:key=value,key=value". Without an id the settings string itself is used.
inline NamedConfig parse_named_config(std::string_view spec) {
    NamedConfig out;
    std::string_view settings = spec;
    if (const auto colon = spec.find(':'); colon != std::string_view::npos) {
        out.id = std::string(spec.substr(0, colon));
        settings = spec.substr(colon + 1);
    } else {
        out.id = std::string(spec);
    }
    if (!settings.empty()) {
        for (std::string_view item : detail::split(settings, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) {
                throw Error(ErrorCode::InvalidConfig, "expected key=value, got '" + std::string(item) + "'");
            }
            apply_setting(out.config, detail::trim(item.substr(0, eq)), detail::trim(item.substr(eq + 1)));
        }
    }
    out.config.validate();
    return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

struct Panel {
    double top;
    double height;
    double lo;
    double hi;
};

inline constexpr double kCanvasWidth = 900.0;
inline constexpr double kCanvasHeight = 1200.0;
inline constexpr double kLeft = 70.0;
inline constexpr double kRight = 20.0;
inline constexpr double kPanelPad = 30.0;

inline Panel make_panel(std::size_t slot, std::initializer_list<std::span<const double>> series) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto s : series) {
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo < hi)) {
        const double mid = std::isfinite(lo) ? lo : 0.0;
        lo = mid - 1.0;
        hi = mid + 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    const double slot_height = kCanvasHeight / 4.0;
    return {static_cast<double>(slot) * slot_height + kPanelPad, slot_height - 2.0 * kPanelPad, lo - pad, hi + pad};
}

inline double x_of(std::size_t i, std::size_t n) {
    const double w = kCanvasWidth - kLeft - kRight;
    return kLeft + (n > 1 ? w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.5 * w);
}

inline double y_of(double v, const Panel& p) { return p.top + p.height * (p.hi - v) / (p.hi - p.lo); }

inline std::string fmt(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

inline void polyline(std::ostream& out, std::span<const double> v, const Panel& p, std::string_view cls,
                     std::string_view colour) {
    out << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ' ';
        out << fmt(x_of(i, v.size())) << ',' << fmt(y_of(v[i], p));
    }
    out << "\"/>\n";
}

inline void frame(std::ostream& out, const Panel& p, std::string_view title) {
    out << "<rect class=\"frame\" x=\"" << fmt(kLeft) << "\" y=\"" << fmt(p.top) << "\" width=\""
        << fmt(kCanvasWidth - kLeft - kRight) << "\" height=\"" << fmt(p.height)
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    out << "<text x=\"" << fmt(kLeft) << "\" y=\"" << fmt(p.top - 8.0) << "\" font-size=\"14\">" << title << "</text>\n";
    out << "<text x=\"" << fmt(kLeft - 6.0) << "\" y=\"" << fmt(p.top + 10.0)
        << "\" font-size=\"10\" text-anchor=\"end\">" << format_number(p.hi) << "</text>\n";
    out << "<text x=\"" << fmt(kLeft - 6.0) << "\" y=\"" << fmt(p.top + p.height)
        << "\" font-size=\"10\" text-anchor=\"end\">" << format_number(p.lo) << "</text>\n";
}

}  // namespace detail

/// Four stacked panels: observed and cleaned; trend with one vertical line per
/// break; seasonal; residual with anomaly markers. Output depends only on `r`.
inline void render_components_svg(std::ostream& out, const DecompositionResult& r) {
    using namespace detail;
    const std::size_t n = r.cleaned.size();
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"1200\" viewBox=\"0 0 900 1200\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"900\" height=\"1200\" fill=\"white\"/>\n";

    const Panel observed = make_panel(0, {r.observed, r.cleaned});
    frame(out, observed, "observed / cleaned");
    polyline(out, r.observed, observed, "observed", "#bbbbbb");
    polyline(out, r.cleaned, observed, "cleaned", "#1f77b4");

    const Panel trend = make_panel(1, {r.trend});
    frame(out, trend, "trend");
    polyline(out, r.trend, trend, "trend", "#d62728");
    for (std::size_t b : r.changepoints.breaks()) {
        const double x = 0.5 * (x_of(b, n) + x_of(b + 1, n));
        out << "<line class=\"changepoint\" x1=\"" << fmt(x) << "\" y1=\"" << fmt(trend.top) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << fmt(trend.top + trend.height) << "\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n";
    }

    const Panel seasonal = make_panel(2, {r.seasonal});
    frame(out, seasonal, "seasonal");
    polyline(out, r.seasonal, seasonal, "seasonal", "#2ca02c");

    const Panel residual = make_panel(3, {r.residual});
    frame(out, residual, "residual");
    polyline(out, r.residual, residual, "residual", "#7f7f7f");
    for (std::size_t i : r.anomalies.flagged_indices()) {
        out << "<circle class=\"anomaly\" cx=\"" << fmt(x_of(i, n)) << "\" cy=\"" << fmt(y_of(r.residual[i], residual))
            << "\" r=\"3\" fill=\"#ff7f0e\"/>\n";
    }
    out << "</svg>\n";
}

inline void render_components_svg(const DecompositionResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::FileWriteError, "cannot open " + path + " for writing");
    render_components_svg(out, r);
    if (!out) throw Error(ErrorCode::FileWriteError, "failed writing " + path);
}

}  // namespace structdecomp::io
