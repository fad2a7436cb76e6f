#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "mhdlayer/cli_harness.hpp"
#include "mhdlayer/errors.hpp"

namespace {

int jobs_from_env(int fallback) {
    const char* v = std::getenv("MHDLAYER_JOBS");
    if (!v || !*v) return fallback;
    try {
        size_t used = 0;
        const int n = std::stoi(v, &used);
        if (used != std::string(v).size() || n < 1) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw mhdlayer::ConfigError(std::string("MHDLAYER_JOBS must be a positive integer, got '") + v + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boundary-layer MHD channel laboratory"};
    app.set_version_flag("--version", std::string(mhdlayer::kToolVersion));
    std::string experiment, config, out_dir;
    long long seed = -1;
    int jobs = 0;
    app.add_option("experiment", experiment,
                   "correctors | lemma31 | simulate | inviscid-limit | diffusion-limit | budget | betas")
        ->required();
    app.add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
    app.add_option("--seed", seed, "Random seed (overrides seed)")->check(CLI::NonNegativeNumber);
    app.add_option("--jobs", jobs, "Concurrent per-eps jobs; MHDLAYER_JOBS takes precedence")
        ->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        mhdlayer::ExperimentConfig cfg = mhdlayer::load_config(config);
        if (mhdlayer::experiment_from_string(experiment) != cfg.experiment)
            throw mhdlayer::ConfigError("experiment '" + experiment + "' does not match config experiment '" +
                                        mhdlayer::to_string(cfg.experiment) + "'");
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (jobs > 0) cfg.jobs = jobs;
        cfg.jobs = jobs_from_env(cfg.jobs);
        mhdlayer::validate_config(cfg);

        const mhdlayer::RunManifest m = mhdlayer::run_experiment(cfg);
        std::cout << mhdlayer::to_string(cfg.experiment) << ": " << m.files.size() << " artifacts in "
                  << cfg.output_dir << " (" << m.wall_clock_s << " s)\n";
        if (!m.verdict_pass) {
            for (const auto& f : m.failed_verdicts) std::cout << "FAIL " << f << "\n";
            return 2;
        }
        std::cout << "all verdicts pass\n";
        return 0;
    } catch (const mhdlayer::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
    } catch (const mhdlayer::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
}
