#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mhdlayer/core_fields.hpp"
#include "mhdlayer/ideal_states.hpp"

namespace mhdlayer {

// Quintic smoothstep S(t) = 6t^5 - 15t^4 + 10t^3 and derivatives, clamped to [0, 1].
std::array<double, 4> smoothstep5(double t);

struct CutoffPair {
    double h = 1.0;
    // value and first three derivatives
    std::array<double, 4> rho1(double z) const;
    std::array<double, 4> rho2(double z) const;
};

CutoffPair make_cutoffs(double h);

enum class CorrectorMode { exact_exponential, prandtl_heat };

std::string to_string(CorrectorMode m);
CorrectorMode corrector_mode_from_string(const std::string& s);

struct CorrectorParams {
    double nu1_star = 1e-3;
    double nu2_star = 1e-3;
    double s_shift = 1.0;
    CorrectorMode mode = CorrectorMode::exact_exponential;
};

enum class LayerPiece { u_plus, u_minus, b_plus, b_minus };

class CorrectorSet {
public:
    CorrectorSet() = default;
    CorrectorSet(WallTraces traces, CorrectorParams params, CutoffPair cutoffs, double h, bool has_u,
                 bool has_b);

    FieldJet piece(LayerPiece p, double x, double z, double t) const;
    FieldJet u(double x, double z, double t) const;
    FieldJet b(double x, double z, double t) const;

    VectorField sample_u(const GridPtr& grid, double t) const;
    VectorField sample_b(const GridPtr& grid, double t) const;
    VectorField sample_piece(LayerPiece p, const GridPtr& grid, double t) const;

    const CorrectorParams& params() const { return params_; }
    bool has_u() const { return has_u_; }
    bool has_b() const { return has_b_; }
    double h() const { return h_; }

private:
    WallTraces traces_;
    CorrectorParams params_;
    CutoffPair cut_;
    double h_ = 1.0;
    bool has_u_ = false, has_b_ = false;
};

// Correctors for an ideal state. Well-prepared data get identically zero layers.
CorrectorSet build_correctors(const IdealState& state, const CorrectorParams& params,
                              const CutoffPair& cutoffs);

// Magnetic-only layer from explicit wall traces (zero-magnetic-diffusion limit).
CorrectorSet build_magnetic_corrector(const TraceFn& lower, const TraceFn& upper,
                                      const CorrectorParams& params, const CutoffPair& cutoffs, double h);

// max-node |d_t u1B - eps d_z^2 u1B| with analytic d_t and discrete d_z^2.
double prandtl_residual(const CorrectorSet& cs, double eps, const GridPtr& grid, double t);

struct Lemma31Report {
    std::map<std::string, double> values;
    bool resolved = true;
    std::string warning;
};

// Left-hand sides of the corrector norm estimates, from analytic derivatives and trapezoid quadrature.
Lemma31Report lemma31_norms(const CorrectorSet& cs, const GridPtr& grid, double t);

// Expected log-log slope of each Lemma31Report entry against nu.
const std::vector<std::pair<std::string, double>>& lemma31_expected_slopes();
// Entries that must stay bounded in nu.
const std::vector<std::string>& lemma31_bounded_norms();

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// Least-squares slope of log(value) against log(nu).
SlopeFit scaling_fit(const std::vector<std::pair<double, double>>& samples);

double nu2_star_diffusion_limit(double eps2, double theta, double tau);

// Stretched grid with at least `per_layer` nodes inside the first sqrt(nu) of each wall.
GridPtr layer_resolving_grid(int nx, int nz, double h, double nu, int per_layer);

}  // namespace mhdlayer
