// suprec — superiorized ART reconstruction experiments on simulated
// fan-beam CT data. Configuration comes from an optional JSON file plus
// command-line overrides; outputs are CSV metric/series files and PGM
// images under --out.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "supr/supr.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Superiorized ART reconstruction experiments (fan-beam CT, total variation)"};

    std::string config_path;
    std::optional<std::string> method, out;
    std::optional<int> size, views, nk, trials;
    std::optional<double> noise, epsilon, eta0, kernel, lambda;
    std::optional<long long> seed, max_iter;

    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_option("--method", method, "perturbation method: cw, ng or none");
    app.add_option("--size", size, "image side length J (grid is JxJ)");
    app.add_option("--views", views, "number of fan-beam view angles");
    app.add_option("--noise", noise, "relative Gaussian noise level (e.g. 0.02)");
    app.add_option("--seed", seed, "base RNG seed; trial t uses seed+t");
    app.add_option("--trials", trials, "number of independent trials");
    app.add_option("--epsilon", epsilon, "proximity stopping level");
    app.add_option("--eta0", eta0, "initial perturbation size");
    app.add_option("--kernel", kernel, "geometric decay factor of the perturbation sizes");
    app.add_option("--nk", nk, "perturbation steps per outer iteration");
    app.add_option("--lambda", lambda, "ART relaxation parameter");
    app.add_option("--max-iter", max_iter, "outer iteration cap");
    app.add_option("--out", out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        supr::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = supr::load_config(config_path);

        if (method) cfg.method = supr::parse_method(*method);
        if (size) cfg.J = *size;
        if (views) cfg.views = *views;
        if (noise) cfg.noise_level = *noise;
        if (seed) cfg.seed = *seed;
        if (trials) cfg.trials = *trials;
        if (epsilon) cfg.epsilon = *epsilon;
        if (eta0) cfg.eta0 = *eta0;
        if (kernel) cfg.kernel = *kernel;
        if (nk) cfg.nk = *nk;
        if (lambda) cfg.lambda = *lambda;
        if (max_iter) cfg.max_iter = *max_iter;
        if (out) cfg.output_dir = *out;

        cfg.validate();

        std::printf("method=%s J=%d views=%d noise=%g epsilon=%g lambda=%g eta0=%g kernel=%g nk=%d trials=%d seed=%lld\n",
                    supr::to_string(cfg.method).c_str(), cfg.J, cfg.views, cfg.noise_level,
                    cfg.epsilon, cfg.lambda, cfg.eta0, cfg.kernel, cfg.nk, cfg.trials,
                    static_cast<long long>(cfg.seed));

        const supr::ExperimentResult result = supr::run_experiment(cfg);

        for (const supr::TrialMetrics& m : result.metrics) {
            std::printf("trial %3d: iters=%-5lld tv=%-10.2f prox=%-10.4f rel_err=%.4f time=%.2fs%s\n",
                        m.trial, m.iterations, m.tv_out, m.prox_out, m.rel_error, m.time_s,
                        m.terminated ? "" : "  [did not reach epsilon]");
        }
        const supr::MetricsSummary& s = result.summary;
        std::printf("summary over %d trial(s): tv=%.2f±%.2f  iters=%.1f±%.1f  time=%.2f±%.2fs\n",
                    s.count, s.tv_out.mean, s.tv_out.std, s.iterations.mean, s.iterations.std,
                    s.time_s.mean, s.time_s.std);
        std::printf("wrote %s and %s\n", result.metrics_path.string().c_str(),
                    result.summary_path.string().c_str());
        return 0;
    } catch (const supr::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
