#pragma once

#include <array>
#include <functional>
#include <string>

#include "mhdlayer/core_fields.hpp"

namespace mhdlayer {

enum class IdealKind { elsasser_steady, shear_flow, well_prepared };

std::string to_string(IdealKind k);
IdealKind ideal_kind_from_string(const std::string& s);

// Named wall-normal profile f(z) scaled by `scale`.
// zero | constant | linear (1 + z) | one_plus_half_cos (1 + cos(pi z/h)/2) | sin (sin(pi z/h))
struct Profile {
    std::string name = "zero";
    double scale = 1.0;

    // value and the first three z-derivatives
    std::array<double, 4> eval(double z, double h) const;
};

// Value and derivatives of one vector field at a point.
struct FieldJet {
    double v1 = 0, v3 = 0;
    double d1x = 0, d1z = 0, d3x = 0, d3z = 0;
    double d1xx = 0, d1zz = 0, d3xx = 0, d3zz = 0;
    double d1t = 0, d3t = 0;
};

struct IdealState {
    IdealKind kind = IdealKind::shear_flow;
    int sign = 1;            // b0 = sign * u0 for elsasser_steady / well_prepared
    Profile U;               // shear part of u1
    Profile B;               // shear part of b1 (shear_flow only)
    double amplitude = 0.0;  // x-dependent part (elsasser_steady / well_prepared)
    double h = 1.0;
    double s_norm_bound = 0.0;  // max of |grad u0|, |grad b0| over a sample grid
};

// Validates the family constraints and fills s_norm_bound.
IdealState make_ideal_state(IdealKind kind, int sign, Profile U, Profile B, double amplitude, double h);

struct IdealValue {
    std::array<double, 2> u0{};
    std::array<double, 2> b0{};
    double p0 = 0.0;
};

IdealValue eval_ideal(const IdealState& s, double x, double z, double t);
FieldJet ideal_u_jet(const IdealState& s, double x, double z);
FieldJet ideal_b_jet(const IdealState& s, double x, double z);

VectorField sample_ideal_u(const IdealState& s, const GridPtr& grid);
VectorField sample_ideal_b(const IdealState& s, const GridPtr& grid);

// Max-node magnitude of the discrete ideal-MHD residuals (momentum, induction, divergence).
double ideal_residual(const IdealState& s, const GridPtr& grid);

// Tangential trace g(x, t) and what the corrector formulas need from it.
struct TraceVals {
    double g = 0, gx = 0, gxx = 0, gxxx = 0, gt = 0, gxt = 0;
};
using TraceFn = std::function<TraceVals(double x, double t)>;

struct WallTraces {
    TraceFn u_lower, u_upper, b_lower, b_upper;
};

WallTraces wall_traces(const IdealState& s);

// Trace read from a wall row of a sampled field (trigonometric interpolation in x).
// `previous`, if given, is the same row one time step `dt` earlier and supplies g_t.
TraceFn trace_from_row(const std::vector<double>& row, const std::vector<double>* previous = nullptr,
                       double dt = 0.0);

}  // namespace mhdlayer
