// sdecomp: command-line front end for the structdecomp library.
//
// Exit codes: 0 success, 1 input or validation error, 2 internal error.

#include <structdecomp/structdecomp.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace sd = structdecomp;

namespace {

struct StageOptions {
    std::string input;
    std::optional<std::size_t> period;
    std::string changepoint = "pelt";
    std::string penalty = "auto";
    std::size_t min_seg = 10;
    double critical = sd::kDefaultCusumCritical;
    std::string anomaly = "rollmedian";
    std::optional<double> threshold;
    std::string policy = "replace";
    std::string smoother = "lowess";
    double span = 0.3;
    std::size_t iterations = 2;
    std::optional<std::size_t> window;
    double lambda = 1600.0;
    std::string model = "additive";
    bool impute = false;

    sd::PipelineConfig config() const {
        sd::PipelineConfig c;
        c.changepoint_method = sd::io::parse_changepoint_method(changepoint);
        c.penalty = sd::io::parse_penalty(penalty);
        c.min_segment_length = min_seg;
        c.cusum_critical_value = critical;
        c.anomaly_method = sd::io::parse_anomaly_method(anomaly);
        c.anomaly_threshold = threshold;
        c.anomaly_policy = sd::io::parse_anomaly_policy(policy);
        c.smoother = sd::io::parse_smoother(smoother);
        c.smoother_params.span = span;
        c.smoother_params.robustness_iterations = iterations;
        c.smoother_params.window = window;
        c.smoother_params.lambda = lambda;
        c.model = sd::io::parse_model(model);
        c.period = period;
        c.validate();
        return c;
    }
};

void add_stage_options(CLI::App* cmd, StageOptions& o) {
    cmd->add_option("--input,-i", o.input, "Input CSV (value, or time,value)")->required();
    cmd->add_option("--period", o.period, "Samples per seasonal cycle");
    cmd->add_option("--changepoint", o.changepoint, "pelt|binseg|cusum|none");
    cmd->add_option("--penalty", o.penalty, "auto or a positive number");
    cmd->add_option("--min-seg", o.min_seg, "Minimum segment length");
    cmd->add_option("--critical", o.critical, "CUSUM critical value");
    cmd->add_option("--anomaly", o.anomaly, "rollmedian|zscore|mad|none");
    cmd->add_option("--threshold", o.threshold, "Anomaly score threshold");
    cmd->add_option("--policy", o.policy, "replace|keep");
    cmd->add_option("--smoother", o.smoother, "lowess|ma|spline");
    cmd->add_option("--span", o.span, "Lowess span in (0, 1]");
    cmd->add_option("--iterations", o.iterations, "Lowess robustness iterations");
    cmd->add_option("--window", o.window, "Odd window for moving average and rolling median");
    cmd->add_option("--lambda", o.lambda, "Penalized smoother lambda");
    cmd->add_option("--model", o.model, "additive|multiplicative");
    cmd->add_flag("--impute", o.impute, "Linearly interpolate interior missing values");
}

sd::TimeSeries load(const StageOptions& o) { return sd::io::read_series_file(o.input, o.impute); }

void write_text(const std::optional<std::string>& path, const std::string& text) {
    if (!path) {
        std::cout << text;
        return;
    }
    std::ofstream out(*path, std::ios::binary);
    if (!out) throw sd::Error(sd::ErrorCode::FileWriteError, "cannot open " + *path + " for writing");
    out << text;
    if (!out) throw sd::Error(sd::ErrorCode::FileWriteError, "failed writing " + *path);
}

int run_decompose(const StageOptions& o, const std::optional<std::string>& output,
                  const std::optional<std::string>& json_path, const std::optional<std::string>& plot_path) {
    const auto series = load(o);
    const auto result = sd::decompose_structural(series, o.config());
    std::ostringstream csv;
    sd::io::write_components_csv(csv, result);
    write_text(output, csv.str());
    if (json_path) write_text(json_path, sd::io::summary_to_json(result).dump(2) + "\n");
    if (plot_path) sd::io::render_components_svg(result, *plot_path);
    return 0;
}

int run_breakpoints(const StageOptions& o, const std::optional<std::string>& json_path) {
    const auto series = load(o);
    const auto config = o.config();
    const auto partition = [&] {
        try {
            return sd::detect_changepoints(series.values(), config);
        } catch (const sd::Error& err) {
            throw err.with_context("changepoint");
        }
    }();
    std::optional<double> penalty;
    if (config.changepoint_method != sd::ChangepointMethod::none) penalty = partition.penalty;
    write_text(json_path,
               sd::io::breakpoints_to_json(partition.changepoints, config.changepoint_method, penalty).dump(2) + "\n");
    return 0;
}

int run_anomalies(const StageOptions& o, const std::optional<std::string>& json_path) {
    const auto series = load(o);
    const auto config = o.config().resolved(series.period());
    const auto changepoints = [&] {
        try {
            return sd::detect_changepoints(series.values(), config).changepoints;
        } catch (const sd::Error& err) {
            throw err.with_context("changepoint");
        }
    }();
    const auto cleaning = [&] {
        try {
            return sd::detect_and_clean(series.values(), changepoints, config);
        } catch (const sd::Error& err) {
            throw err.stage() ? err : err.with_context("anomaly");
        }
    }();
    write_text(json_path, sd::io::anomalies_to_json(cleaning.report).dump(2) + "\n");
    return 0;
}

struct BenchOptions {
    std::size_t n = 300;
    std::uint64_t seed = 1;
    std::optional<std::size_t> period = 12;
    double amplitude = 2.0;
    double noise = 1.0;
    std::size_t breaks = 1;
    double jump = 8.0;
    double spike_fraction = 0.0;
    double spike_magnitude = 8.0;
    std::size_t tolerance = sd::kDefaultBreakTolerance;
    std::vector<std::string> configs;
    std::string format = "csv";
};

/// Level jumps of ±jump·noise at separated random positions; spikes of ±magnitude·noise.
sd::SyntheticSeries bench_series(const BenchOptions& b) {
    sd::SplitMix64 rng(b.seed ^ 0x5DEECE66DULL);
    sd::SyntheticSpec spec;
    spec.n = b.n;
    spec.base_level = 10.0;
    spec.period = b.amplitude != 0.0 ? b.period : std::nullopt;
    spec.seasonal_amplitude = b.amplitude;
    spec.noise_sd = b.noise;
    spec.seed = b.seed;
    for (std::size_t idx : sd::sample_separated_breaks(rng, b.breaks, b.n, 40)) {
        spec.trend_breaks.push_back({idx, 0.0, (rng.uniform() < 0.5 ? -1.0 : 1.0) * b.jump * b.noise});
    }
    const auto spike_count = static_cast<std::size_t>(std::round(b.spike_fraction * static_cast<double>(b.n)));
    if (spike_count > 0) spec.spike_indices = sd::sample_distinct_indices(rng, spike_count, 0, b.n - 1);
    spec.spike_magnitude = b.spike_magnitude * b.noise;
    return sd::generate_synthetic(spec);
}

int run_bench(const BenchOptions& b, const std::optional<std::string>& output) {
    std::vector<sd::NamedConfig> configs;
    for (const auto& c : b.configs) configs.push_back(sd::io::parse_named_config(c));
    if (configs.empty()) {
        for (const char* c : {"pelt:changepoint=pelt", "none:changepoint=none"})
            configs.push_back(sd::io::parse_named_config(c));
    }
    const auto truth = sd::GroundTruth::from(bench_series(b));
    const auto rows = sd::compare_methods(truth, configs, b.tolerance);
    if (b.format == "json") {
        write_text(output, sd::io::scores_to_json(rows).dump(2) + "\n");
    } else if (b.format == "csv") {
        std::ostringstream csv;
        sd::io::write_scores_csv(csv, rows);
        write_text(output, csv.str());
    } else {
        throw sd::Error(sd::ErrorCode::InvalidConfig, "format must be csv or json");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modular time-series decomposition: changepoints, anomalies, trend, seasonality"};
    app.require_subcommand(1);

    StageOptions decompose_opts;
    std::optional<std::string> output, json_path, plot_path;
    auto* decompose = app.add_subcommand("decompose", "Run all four stages and write the component table");
    add_stage_options(decompose, decompose_opts);
    decompose->add_option("--output,-o", output, "Component CSV (default: stdout)");
    decompose->add_option("--json", json_path, "JSON summary");
    decompose->add_option("--plot", plot_path, "SVG plot of the components");

    StageOptions breakpoint_opts;
    std::optional<std::string> breakpoint_json;
    auto* breakpoints = app.add_subcommand("breakpoints", "Run changepoint detection only");
    add_stage_options(breakpoints, breakpoint_opts);
    breakpoints->add_option("--json", breakpoint_json, "Output path (default: stdout)");

    StageOptions anomaly_opts;
    std::optional<std::string> anomaly_json;
    auto* anomalies = app.add_subcommand("anomalies", "Run changepoint and anomaly detection");
    add_stage_options(anomalies, anomaly_opts);
    anomalies->add_option("--json", anomaly_json, "Output path (default: stdout)");

    BenchOptions bench_opts;
    std::optional<std::string> bench_output;
    auto* bench = app.add_subcommand("bench", "Score configurations on a seeded synthetic series");
    bench->add_option("--n", bench_opts.n, "Series length");
    bench->add_option("--seed", bench_opts.seed, "Generator seed");
    bench->add_option("--period", bench_opts.period, "Seasonal period");
    bench->add_option("--amplitude", bench_opts.amplitude, "Seasonal amplitude (0 disables)");
    bench->add_option("--noise", bench_opts.noise, "Noise standard deviation");
    bench->add_option("--breaks", bench_opts.breaks, "Number of planted level shifts");
    bench->add_option("--jump", bench_opts.jump, "Level shift size in noise units");
    bench->add_option("--spike-fraction", bench_opts.spike_fraction, "Fraction of points turned into spikes");
    bench->add_option("--spike-magnitude", bench_opts.spike_magnitude, "Spike size in noise units");
    bench->add_option("--tolerance", bench_opts.tolerance, "Break matching tolerance in samples");
    bench->add_option("--config", bench_opts.configs, "id:key=value,... (repeatable)");
    bench->add_option("--format", bench_opts.format, "csv|json");
    bench->add_option("--output,-o", bench_output, "Output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*decompose) return run_decompose(decompose_opts, output, json_path, plot_path);
        if (*breakpoints) return run_breakpoints(breakpoint_opts, breakpoint_json);
        if (*anomalies) return run_anomalies(anomaly_opts, anomaly_json);
        if (*bench) return run_bench(bench_opts, bench_output);
    } catch (const sd::Error& e) {
        std::cerr << "sdecomp: " << e.what() << '\n';
        return e.code() == sd::ErrorCode::FileWriteError ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "sdecomp: internal error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
