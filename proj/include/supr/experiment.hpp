#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "supr/art.hpp"
#include "supr/engine.hpp"
#include "supr/image.hpp"
#include "supr/schedule.hpp"
#include "supr/system_matrix.hpp"
#include "supr/tomography.hpp"
#include "supr/tv_perturbations.hpp"

namespace supr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Method { Cw, Ng, None };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::Cw: return "cw";
        case Method::Ng: return "ng";
        case Method::None: return "none";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "cw") return Method::Cw;
    if (s == "ng") return Method::Ng;
    if (s == "none") return Method::None;
    throw ConfigError("method must be one of cw, ng, none (got \"" + s + "\")");
}

struct ExperimentConfig {
    int J = 256;
    int views = 24;
    Method method = Method::Cw;
    double lambda = 1.0;
    double epsilon = 1.0;
    double eta0 = 0.2;
    double kernel = 0.995;
    int nk = 10;
    double noise_level = 0.0;
    std::int64_t seed = 0;
    int trials = 1;
    long long max_iter = 5000;
    std::string output_dir = "out";

    void validate() const {
        if (J < 16) throw ConfigError("J must be >= 16");
        if (views < 1) throw ConfigError("views must be >= 1");
        if (!(lambda > 0.0 && lambda < 2.0)) throw ConfigError("lambda must lie in (0,2)");
        if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
        if (!(eta0 > 0.0)) throw ConfigError("eta0 must be positive");
        if (!(kernel > 0.0 && kernel < 1.0)) throw ConfigError("kernel must lie in (0,1)");
        if (nk < 1) throw ConfigError("nk must be >= 1");
        if (noise_level < 0.0) throw ConfigError("noise_level must be nonnegative");
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
        if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    }
};

/// Applies the flat-key JSON object on top of the given config. Keys match
/// the config fields exactly; unknown keys are rejected.
inline void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "J") cfg.J = value.get<int>();
            else if (key == "views") cfg.views = value.get<int>();
            else if (key == "method") cfg.method = parse_method(value.get<std::string>());
            else if (key == "lambda") cfg.lambda = value.get<double>();
            else if (key == "epsilon") cfg.epsilon = value.get<double>();
            else if (key == "eta0") cfg.eta0 = value.get<double>();
            else if (key == "kernel") cfg.kernel = value.get<double>();
            else if (key == "nk") cfg.nk = value.get<int>();
            else if (key == "noise_level") cfg.noise_level = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::int64_t>();
            else if (key == "trials") cfg.trials = value.get<int>();
            else if (key == "max_iter") cfg.max_iter = value.get<long long>();
            else if (key == "output_dir") cfg.output_dir = value.get<std::string>();
            else throw ConfigError("unknown config key \"" + key + "\"");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key \"" + key + "\": " + e.what());
        }
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    ExperimentConfig cfg;
    apply_config_json(cfg, j);
    return cfg;
}

struct TrialMetrics {
    int trial = 0;
    long long iterations = 0;
    double time_s = 0.0;
    double tv_out = 0.0;
    double prox_out = 0.0;
    double rel_error = 0.0;
    bool terminated = false;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

struct MetricsSummary {
    MeanStd iterations, time_s, tv_out, prox_out, rel_error, terminated;
    int count = 0;
};

inline MeanStd mean_std(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean_std: empty sample");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
    return {mean, std::sqrt(var)};
}

/// Sample mean and standard deviation (n-1 denominator, 0 for one trial)
/// of every metrics column.
inline MetricsSummary summarize(std::span<const TrialMetrics> metrics) {
    if (metrics.empty()) throw std::invalid_argument("summarize: empty metrics table");
    auto column = [&](auto get) {
        std::vector<double> xs;
        xs.reserve(metrics.size());
        for (const TrialMetrics& m : metrics) xs.push_back(get(m));
        return mean_std(xs);
    };
    MetricsSummary s;
    s.count = static_cast<int>(metrics.size());
    s.iterations = column([](const TrialMetrics& m) { return static_cast<double>(m.iterations); });
    s.time_s = column([](const TrialMetrics& m) { return m.time_s; });
    s.tv_out = column([](const TrialMetrics& m) { return m.tv_out; });
    s.prox_out = column([](const TrialMetrics& m) { return m.prox_out; });
    s.rel_error = column([](const TrialMetrics& m) { return m.rel_error; });
    s.terminated = column([](const TrialMetrics& m) { return m.terminated ? 1.0 : 0.0; });
    return s;
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

inline void export_metrics(std::span<const TrialMetrics> metrics, Method method,
                           const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_metrics: cannot open " + path.string());
    f << "trial,method,iterations,time_s,tv_out,prox_out,rel_error,terminated\n";
    for (const TrialMetrics& m : metrics) {
        f << m.trial << ',' << to_string(method) << ',' << m.iterations << ','
          << detail::fmt(m.time_s) << ',' << detail::fmt(m.tv_out) << ','
          << detail::fmt(m.prox_out) << ',' << detail::fmt(m.rel_error) << ','
          << (m.terminated ? "true" : "false") << '\n';
    }
    if (!f) throw std::runtime_error("export_metrics: write failed for " + path.string());
}

/// Parses a metrics CSV written by export_metrics; returns rows and the
/// method column value (which is uniform per file).
inline std::pair<std::vector<TrialMetrics>, std::string> import_metrics(
    const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("import_metrics: cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line) ||
        line != "trial,method,iterations,time_s,tv_out,prox_out,rel_error,terminated") {
        throw std::runtime_error("import_metrics: bad header in " + path.string());
    }
    std::vector<TrialMetrics> rows;
    std::string method;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        TrialMetrics m;
        std::getline(ls, field, ',');
        m.trial = std::stoi(field);
        std::getline(ls, method, ',');
        std::getline(ls, field, ',');
        m.iterations = std::stoll(field);
        std::getline(ls, field, ',');
        m.time_s = std::stod(field);
        std::getline(ls, field, ',');
        m.tv_out = std::stod(field);
        std::getline(ls, field, ',');
        m.prox_out = std::stod(field);
        std::getline(ls, field, ',');
        m.rel_error = std::stod(field);
        std::getline(ls, field, ',');
        m.terminated = (field == "true");
        rows.push_back(m);
    }
    return {rows, method};
}

/// Per-iteration series matching the comparison plots' axes:
/// k,time_s,tv,prox,log10_prox, one row per completed outer iteration.
inline void export_series(const RunTrace& trace, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_series: cannot open " + path.string());
    f << "k,time_s,tv,prox,log10_prox\n";
    for (const IterationRecord& rec : trace.iterations) {
        f << rec.k << ',' << detail::fmt(rec.time_s) << ',' << detail::fmt(rec.phi) << ','
          << detail::fmt(rec.proximity) << ',' << detail::fmt(std::log10(rec.proximity)) << '\n';
    }
    if (!f) throw std::runtime_error("export_series: write failed for " + path.string());
}

inline void export_summary(const MetricsSummary& s, Method method,
                           const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("export_summary: cannot open " + path.string());
    f << "method,trials,column,mean,std\n";
    auto row = [&](const char* name, const MeanStd& ms) {
        f << to_string(method) << ',' << s.count << ',' << name << ',' << detail::fmt(ms.mean)
          << ',' << detail::fmt(ms.std) << '\n';
    };
    row("iterations", s.iterations);
    row("time_s", s.time_s);
    row("tv_out", s.tv_out);
    row("prox_out", s.prox_out);
    row("rel_error", s.rel_error);
    row("terminated", s.terminated);
    if (!f) throw std::runtime_error("export_summary: write failed for " + path.string());
}

struct ExperimentResult {
    std::vector<TrialMetrics> metrics;
    MetricsSummary summary;
    std::filesystem::path metrics_path;
    std::filesystem::path summary_path;
};

namespace detail {

inline std::string trial_tag(int trial) {
    std::ostringstream os;
    os << "trial_" << std::setw(3) << std::setfill('0') << trial;
    return os.str();
}

}  // namespace detail

/// Runs the configured experiment: phantom, geometry, system matrix, one
/// noise realization per trial (seed + trial index), the selected method
/// through the engine, and per-trial outputs (series CSV, final image PGM)
/// plus metrics.csv and summary.csv under output_dir. Non-termination
/// within max_iter is recorded in the metrics, not an error.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();

    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);

    const ImageGrid grid{config.J, 1.0};
    const ImageVector phantom = shepp_logan(config.J);
    const double phantom_norm = phantom.norm();
    const FanBeamGeometry geometry = FanBeamGeometry::standard(config.views, grid);
    const SystemMatrix A = build_system_matrix(geometry, grid);
    const std::vector<double> y_clean = forward_project(A, phantom);

    const Schedule schedule{config.eta0, config.kernel, {config.nk}};
    const ArtConfig art{config.lambda};

    NonascentOracle oracle;
    switch (config.method) {
        case Method::Cw: oracle = make_cw_tv_oracle(); break;
        case Method::Ng: oracle = make_ng_tv_oracle(); break;
        case Method::None:
            oracle = make_zero_oracle([](const ImageVector& y) { return total_variation(y); });
            break;
    }

    ExperimentResult result;
    for (int trial = 0; trial < config.trials; ++trial) {
        const std::vector<double> y =
            config.noise_level > 0.0
                ? add_noise(y_clean, config.noise_level,
                            static_cast<std::uint64_t>(config.seed + trial))
                : y_clean;

        FeasibilityProblem problem;
        problem.feasibility_operator = [&A, &y, &art](const ImageVector& u) {
            return art_sweep(A, y, art, u);
        };
        problem.proximity = [&A, &y](const ImageVector& u) { return proximity(A, y, u); };
        problem.epsilon = config.epsilon;

        EngineOptions options;
        options.max_iter = config.max_iter;

        const RunTrace trace = superiorize(problem, oracle, schedule, ImageVector(grid), options);

        TrialMetrics m;
        m.trial = trial;
        m.iterations = trace.outer_count;
        m.time_s = trace.total_time_s;
        m.tv_out = trace.final_phi;
        m.prox_out = trace.final_proximity;
        m.rel_error = (trace.output - phantom).norm() / phantom_norm;
        m.terminated = trace.stop_reason == StopReason::EpsilonOutput;
        result.metrics.push_back(m);

        const std::string tag = detail::trial_tag(trial);
        export_series(trace, out_dir / (tag + "_series.csv"));
        write_pgm(out_dir / (tag + ".pgm"), config.J, config.J,
                  window_to_display(trace.output, 0.0, 1.0));
    }

    result.summary = summarize(result.metrics);
    result.metrics_path = out_dir / "metrics.csv";
    result.summary_path = out_dir / "summary.csv";
    export_metrics(result.metrics, config.method, result.metrics_path);
    export_summary(result.summary, config.method, result.summary_path);
    return result;
}

}  // namespace supr
