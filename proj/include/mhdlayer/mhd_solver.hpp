#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "mhdlayer/core_fields.hpp"
#include "mhdlayer/ideal_states.hpp"
#include "mhdlayer/layer_correctors.hpp"
#include "mhdlayer/numerics.hpp"

namespace mhdlayer {

struct SolverConfig {
    double eps1 = 0.0;
    double eps2 = 0.0;
    double dt = 1e-3;
    double cfl_limit = 0.5;
    GridPtr grid;
};

struct MhdState {
    VectorField u;
    VectorField b;
    ScalarField p;
    ScalarField q;  // magnetic pseudo-pressure from divergence cleaning
    double t = 0.0;
    long step = 0;

    // Adams-Bashforth history and pressure priming
    VectorField nu_prev, nb_prev;
    double dt_prev = 0.0;
    bool has_prev = false;
    bool primed = false;
    bool free_magnetic_walls = false;  // b1 carried on wall nodes (no magnetic diffusion)
};

struct EnergyDiag {
    double t = 0.0;
    double energy = 0.0;
    double dissipation = 0.0;
    double div_u_max = 0.0;
    double div_b_max = 0.0;
};

struct PerturbationSpec {
    double kappa = 4.0;
    double eps = 1e-2;
    std::uint64_t seed = 0;
};

// Body forces f_u, f_b at time t (used for manufactured solutions).
using Forcing = std::function<void(double t, VectorField& fu, VectorField& fb)>;

// Skew-symmetric advection 1/2 (v.grad w + div(v w)), componentwise.
ScalarField skew_advect(const VectorField& v, const ScalarField& w);
VectorField skew_advect(const VectorField& v, const VectorField& w);

// Divergence-free, zero-trace random perturbation with ||(du, db)||^2 = eps^kappa / 2.
std::pair<VectorField, VectorField> random_perturbation(const GridPtr& grid, const PerturbationSpec& spec);

// Build a state from raw fields: projects u (walls pinned) and b.
MhdState make_state(VectorField u, VectorField b, bool free_magnetic_walls, double t = 0.0);

MhdState init_state(const IdealState& state, const CorrectorSet* cs,
                    const std::optional<PerturbationSpec>& perturbation, const GridPtr& grid,
                    bool free_magnetic_walls = false);

struct RunResult {
    MhdState final;
    std::vector<EnergyDiag> diagnostics;
};

using Observer = std::function<void(const MhdState&)>;

class MhdSolver {
public:
    explicit MhdSolver(SolverConfig cfg, Forcing forcing = {});

    const SolverConfig& config() const { return cfg_; }

    // Compute the initial pressure consistent with the state.
    void prime(MhdState& s) const;
    // One step of length dt (defaults to cfg.dt).
    void advance(MhdState& s, double dt = 0.0) const;
    EnergyDiag diagnostics(const MhdState& s) const;

    // Fixed dt, last step shortened to land on T; `cadence` snapshots spread over the run.
    RunResult run(MhdState s0, double T, int cadence = 20, const Observer& observer = {}) const;

    const Projector& u_projector() const { return *pu_; }
    const Projector& b_projector(bool free_walls) const { return free_walls ? *pb_free_ : *pu_; }

    double max_speed_cfl(const MhdState& s, double dt) const;

private:
    SolverConfig cfg_;
    Forcing forcing_;
    std::shared_ptr<Projector> pu_, pb_free_;
    void nonlinear(const MhdState& s, double t, VectorField& nu, VectorField& nb) const;
};

MhdState step(const MhdState& s, const SolverConfig& cfg);
RunResult run(const MhdState& s0, const SolverConfig& cfg, double T, int cadence = 20,
              const Observer& observer = {});

struct ElsasserViews {
    VectorField w_plus;
    VectorField w_minus;
};
ElsasserViews elsasser_views(const MhdState& s);

// Zero-magnetic-diffusion reference run; throws if b gradients exceed `gradient_guard`.
RunResult run_reference_viscous(const MhdState& s0, const SolverConfig& cfg, double T, int cadence = 20,
                                const Observer& observer = {}, double gradient_guard = 1e6);

// Steps needed to reach T with fixed dt (last one shortened).
long steps_for(double T, double dt);
std::vector<long> snapshot_steps(long nsteps, int cadence);

}  // namespace mhdlayer
