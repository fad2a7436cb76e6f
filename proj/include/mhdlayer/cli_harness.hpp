#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhdlayer/asymptotics.hpp"
#include "mhdlayer/core_fields.hpp"
#include "mhdlayer/ideal_states.hpp"
#include "mhdlayer/layer_correctors.hpp"
#include "mhdlayer/mhd_solver.hpp"

namespace mhdlayer {

constexpr const char* kToolVersion = "0.1.0";

enum class Experiment { correctors, lemma31, simulate, inviscid_limit, diffusion_limit, budget, betas };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

struct GridConfig {
    int nx = 96;
    int nz = 257;
    double h = 1.0;
    double stretch = 3.0;
};

struct StateConfig {
    IdealKind kind = IdealKind::shear_flow;
    int sign = 1;
    Profile U{"one_plus_half_cos", 1.0};
    Profile B{"one_plus_half_cos", 1.0};
    double amplitude = 0.0;
};

struct SolverParams {
    double eps1 = 1e-3;
    double eps2 = 1e-3;
    double dt = 2.5e-3;
    double cfl_limit = 0.5;
    double T = 0.25;
};

// nu*_star <= 0 means "use the matching solver coefficient".
struct CorrectorConfig {
    bool enabled = true;
    double nu1_star = 0.0;
    double nu2_star = 0.0;
    double s_shift = 1.0;
    CorrectorMode mode = CorrectorMode::exact_exponential;
    double t = 0.0;
};

// kappa <= 0 falls back to family.kappa; eps <= 0 to the run's eps.
struct PerturbationConfig {
    bool enabled = true;
    double kappa = 0.0;
    double eps = 0.0;
};

struct DiffusionConfig {
    double eps1 = 1e-2;
    std::vector<double> eps2{4e-3, 2e-3, 1e-3, 5e-4};
    double theta = 0.1;
    double tau = 0.0;
};

struct Lemma31Config {
    std::vector<double> nu{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    int per_layer = 8;
};

struct BudgetConfig {
    BudgetFamily family = BudgetFamily::J;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::betas;
    GridConfig grid;
    StateConfig state;
    EpsilonFamily family;
    std::vector<double> eps{4e-3, 2e-3, 1e-3, 5e-4};
    SolverParams solver;
    CorrectorConfig corrector;
    PerturbationConfig perturbation;
    DiffusionConfig diffusion;
    Lemma31Config lemma31;
    BudgetConfig budget;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    int snapshot_cadence = 20;
    int jobs = 1;

    GridPtr make_grid() const;
    IdealState make_state() const;
};

// Parses and validates. Schema violations raise ConfigError naming the JSON path; physics
// violations raise DomainError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json serialize_config(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

struct ArtifactEntry {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    nlohmann::ordered_json config;
    std::string tool_version = kToolVersion;
    double wall_clock_s = 0.0;
    std::vector<ArtifactEntry> files;
    bool verdict_pass = true;
    std::vector<std::string> failed_verdicts;
};

RunManifest run_experiment(const ExperimentConfig& cfg);

std::string sha256_hex(const std::filesystem::path& file);
// Fixed 17-significant-digit formatting.
std::string fmt17(double v);

// Flat little-endian float64 arrays u1, u3, b1, b3, p, q (z-major) plus a JSON sidecar.
void write_checkpoint(const MhdState& s, const std::filesystem::path& bin, const std::filesystem::path& sidecar,
                      const nlohmann::ordered_json& extra = {});
MhdState read_checkpoint(const std::filesystem::path& bin, const std::filesystem::path& sidecar);

}  // namespace mhdlayer
