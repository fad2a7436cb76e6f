#include "mhdlayer/layer_correctors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mhdlayer/errors.hpp"

namespace mhdlayer {

namespace {
constexpr double two_over_sqrt_pi = 2.0 / 1.7724538509055160273;
}

std::array<double, 4> smoothstep5(double t) {
    if (t <= 0.0) return {0.0, 0.0, 0.0, 0.0};
    if (t >= 1.0) return {1.0, 0.0, 0.0, 0.0};
    const double t2 = t * t, t3 = t2 * t;
    return {t3 * (10.0 + t * (-15.0 + 6.0 * t)), 30.0 * t2 * (1.0 - t) * (1.0 - t),
            60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 60.0 - 360.0 * t + 360.0 * t2};
}

std::array<double, 4> CutoffPair::rho1(double z) const {
    const double a = 4.0 / h;
    if (z >= 0.25 * h) return {0.0, 0.0, 0.0, 0.0};
    const auto s = smoothstep5(a * z);
    return {1.0 - s[0], -a * s[1], -a * a * s[2], -a * a * a * s[3]};
}

std::array<double, 4> CutoffPair::rho2(double z) const {
    const auto r = rho1(h - z);
    return {r[0], -r[1], r[2], -r[3]};
}

CutoffPair make_cutoffs(double h) {
    if (!(h > 0.0)) throw ConfigError("cutoffs: h must be > 0");
    CutoffPair c;
    c.h = h;
    return c;
}

std::string to_string(CorrectorMode m) {
    return m == CorrectorMode::exact_exponential ? "exact_exponential" : "prandtl_heat";
}

CorrectorMode corrector_mode_from_string(const std::string& s) {
    if (s == "exact_exponential") return CorrectorMode::exact_exponential;
    if (s == "prandtl_heat") return CorrectorMode::prandtl_heat;
    throw ConfigError("unknown corrector mode '" + s + "'");
}

CorrectorSet::CorrectorSet(WallTraces traces, CorrectorParams params, CutoffPair cutoffs, double h,
                           bool has_u, bool has_b)
    : traces_(std::move(traces)), params_(params), cut_(cutoffs), h_(h), has_u_(has_u), has_b_(has_b) {
    if (!(params_.nu1_star > 0.0) || !(params_.nu2_star > 0.0) || !(params_.s_shift > 0.0))
        throw ConfigError("corrector parameters nu1_star, nu2_star, s_shift must be > 0");
    if (params_.mode == CorrectorMode::prandtl_heat) {
        const int n = 64;
        for (int j = 0; j < n; ++j) {
            const double x = 2.0 * std::numbers::pi * j / n;
            for (const TraceFn* f : {&traces_.u_lower, &traces_.u_upper, &traces_.b_lower, &traces_.b_upper}) {
                if (!*f) continue;
                if (std::abs((*f)(x, 0.0).gx) > 1e-12)
                    throw PreconditionError("prandtl_heat correctors require a constant wall trace");
            }
        }
    }
}

namespace {

// Layer piece as a function of the distance zeta to its wall.
// sd = dz/dzeta sign, sn = sign of the normal component relative to the lower-wall formula.
FieldJet exponential_piece(const TraceVals& tr, const std::array<double, 4>& r, double zeta, double nu,
                           double sd, double sn) {
    const double d = std::sqrt(nu);
    const double E = std::exp(-zeta / d);
    const double E1 = -E / d, E2 = E / (d * d);
    const double a = r[0] - d * r[1], a1 = r[1] - d * r[2], a2 = r[2] - d * r[3];
    const double P = E * a + d * r[1];
    const double P1 = E1 * a + E * a1 + d * r[2];
    const double P2 = E2 * a + 2.0 * E1 * a1 + E * a2 + d * r[3];
    const double Q = r[0] * (E - 1.0);
    const double Q1 = r[1] * (E - 1.0) + r[0] * E1;
    const double Q2 = r[2] * (E - 1.0) + 2.0 * r[1] * E1 + r[0] * E2;
    FieldJet j;
    j.v1 = -tr.g * P;
    j.d1z = -tr.g * P1 * sd;
    j.d1zz = -tr.g * P2;
    j.d1x = -tr.gx * P;
    j.d1xx = -tr.gxx * P;
    j.d1t = -tr.gt * P;
    const double n = -sn * d;
    j.v3 = n * tr.gx * Q;
    j.d3z = n * tr.gx * Q1 * sd;
    j.d3zz = n * tr.gx * Q2;
    j.d3x = n * tr.gxx * Q;
    j.d3xx = n * tr.gxxx * Q;
    j.d3t = n * tr.gxt * Q;
    return j;
}

FieldJet erfc_piece(const TraceVals& tr, double zeta, double nu, double t, double s, double sd) {
    const double th = 2.0 * std::sqrt(nu * (t + s));
    const double eta = zeta / th;
    const double e = std::exp(-eta * eta);
    const double f = std::erfc(eta);
    FieldJet j;
    j.v1 = -tr.g * f;
    j.d1z = sd * tr.g * two_over_sqrt_pi * e / th;
    j.d1zz = -tr.g * two_over_sqrt_pi * 2.0 * eta * e / (th * th);
    j.d1t = -tr.g * two_over_sqrt_pi * e * 2.0 * nu * eta / (th * th) - tr.gt * f;
    return j;
}

void accumulate(FieldJet& a, const FieldJet& b) {
    a.v1 += b.v1; a.v3 += b.v3;
    a.d1x += b.d1x; a.d1z += b.d1z; a.d3x += b.d3x; a.d3z += b.d3z;
    a.d1xx += b.d1xx; a.d1zz += b.d1zz; a.d3xx += b.d3xx; a.d3zz += b.d3zz;
    a.d1t += b.d1t; a.d3t += b.d3t;
}

}  // namespace

FieldJet CorrectorSet::piece(LayerPiece p, double x, double z, double t) const {
    const bool magnetic = p == LayerPiece::b_plus || p == LayerPiece::b_minus;
    const bool lower = p == LayerPiece::u_plus || p == LayerPiece::b_plus;
    if ((magnetic && !has_b_) || (!magnetic && !has_u_)) return {};
    const TraceFn& fn = magnetic ? (lower ? traces_.b_lower : traces_.b_upper)
                                 : (lower ? traces_.u_lower : traces_.u_upper);
    if (!fn) return {};
    const TraceVals tr = fn(x, t);
    const double nu = magnetic ? params_.nu2_star : params_.nu1_star;
    const double zeta = lower ? z : h_ - z;
    const double sd = lower ? 1.0 : -1.0;
    if (params_.mode == CorrectorMode::prandtl_heat) return erfc_piece(tr, zeta, nu, t, params_.s_shift, sd);
    const auto r = cut_.rho1(zeta);
    return exponential_piece(tr, r, zeta, nu, sd, lower ? 1.0 : -1.0);
}

FieldJet CorrectorSet::u(double x, double z, double t) const {
    FieldJet a = piece(LayerPiece::u_plus, x, z, t);
    accumulate(a, piece(LayerPiece::u_minus, x, z, t));
    return a;
}

FieldJet CorrectorSet::b(double x, double z, double t) const {
    FieldJet a = piece(LayerPiece::b_plus, x, z, t);
    accumulate(a, piece(LayerPiece::b_minus, x, z, t));
    return a;
}

namespace {
template <class F>
VectorField sample_jet(const GridPtr& grid, F&& f) {
    VectorField v(grid);
    for (int k = 0; k < grid->nz; ++k)
        for (int j = 0; j < grid->nx; ++j) {
            const FieldJet q = f(grid->x(j), grid->z[k]);
            v.f1(j, k) = q.v1;
            v.f3(j, k) = q.v3;
        }
    return v;
}
}  // namespace

VectorField CorrectorSet::sample_u(const GridPtr& grid, double t) const {
    return sample_jet(grid, [&](double x, double z) { return u(x, z, t); });
}

VectorField CorrectorSet::sample_b(const GridPtr& grid, double t) const {
    return sample_jet(grid, [&](double x, double z) { return b(x, z, t); });
}

VectorField CorrectorSet::sample_piece(LayerPiece p, const GridPtr& grid, double t) const {
    return sample_jet(grid, [&](double x, double z) { return piece(p, x, z, t); });
}

CorrectorSet build_correctors(const IdealState& state, const CorrectorParams& params, const CutoffPair& cutoffs) {
    const bool layers = state.kind != IdealKind::well_prepared;
    return CorrectorSet(wall_traces(state), params, cutoffs, state.h, layers, layers);
}

CorrectorSet build_magnetic_corrector(const TraceFn& lower, const TraceFn& upper, const CorrectorParams& params,
                                      const CutoffPair& cutoffs, double h) {
    WallTraces w;
    w.b_lower = lower;
    w.b_upper = upper;
    return CorrectorSet(std::move(w), params, cutoffs, h, false, true);
}

double prandtl_residual(const CorrectorSet& cs, double eps, const GridPtr& grid, double t) {
    if (cs.params().mode != CorrectorMode::prandtl_heat)
        throw PreconditionError("prandtl_residual requires prandtl_heat correctors");
    ScalarField v(grid), dt(grid);
    const bool use_u = cs.has_u();
    for (int k = 0; k < grid->nz; ++k)
        for (int j = 0; j < grid->nx; ++j) {
            const FieldJet q = use_u ? cs.u(grid->x(j), grid->z[k], t) : cs.b(grid->x(j), grid->z[k], t);
            v(j, k) = q.v1;
            dt(j, k) = q.d1t;
        }
    const ScalarField zz = d2dz2(v, WallRule::zero);
    double r = 0.0;
    for (int k = 1; k < grid->nz - 1; ++k)
        for (int j = 0; j < grid->nx; ++j) r = std::max(r, std::abs(dt(j, k) - eps * zz(j, k)));
    return r;
}

Lemma31Report lemma31_norms(const CorrectorSet& cs, const GridPtr& grid, double t) {
    const auto& g = *grid;
    Lemma31Report rep;
    struct Acc {
        double l2 = 0, n3 = 0, dz = 0, dz3 = 0, wz = 0, w2 = 0, linf = 0, dz3inf = 0;
    };
    auto run = [&](LayerPiece plus, LayerPiece minus, double nu, const std::string& big,
                   const std::string& small) {
        Acc a;
        for (int k = 0; k < g.nz; ++k) {
            const double z = g.z[k];
            Acc row;
            for (int j = 0; j < g.nx; ++j) {
                const double x = g.x(j);
                const FieldJet p = cs.piece(plus, x, z, t);
                const FieldJet m = cs.piece(minus, x, z, t);
                const double v1 = p.v1 + m.v1, v3 = p.v3 + m.v3;
                const double d1x = p.d1x + m.d1x, d1z = p.d1z + m.d1z, d3z = p.d3z + m.d3z;
                row.l2 += v1 * v1 + d1x * d1x;
                row.n3 += v3 * v3;
                row.dz += d1z * d1z;
                row.dz3 += d3z * d3z;
                row.wz += z * z * p.d1z * p.d1z + (g.h - z) * (g.h - z) * m.d1z * m.d1z;
                a.w2 = std::max({a.w2, z * z * std::abs(p.d1z), (g.h - z) * (g.h - z) * std::abs(m.d1z)});
                a.linf = std::max(a.linf, std::hypot(v1, v3));
                a.dz3inf = std::max(a.dz3inf, std::abs(d3z));
            }
            a.l2 += g.wz[k] * row.l2;
            a.n3 += g.wz[k] * row.n3;
            a.dz += g.wz[k] * row.dz;
            a.dz3 += g.wz[k] * row.dz3;
            a.wz += g.wz[k] * row.wz;
        }
        const double q = g.dx;
        rep.values[big + "_l2"] = std::sqrt(q * a.l2);
        rep.values[small + "3_l2"] = std::sqrt(q * a.n3);
        rep.values["dz" + big + "_l2"] = std::sqrt(q * a.dz);
        rep.values["dz" + small + "3_l2"] = std::sqrt(q * a.dz3);
        rep.values["z_dz" + big + "_l2"] = std::sqrt(q * a.wz);
        rep.values["z2_dz" + big + "_linf"] = a.w2;
        rep.values[small + "_linf"] = a.linf;
        rep.values["dz" + small + "3_linf"] = a.dz3inf;

        const double width = std::sqrt(nu);
        int inside = 0;
        for (int k = 1; k < g.nz; ++k)
            if (g.z[k] <= width) ++inside;
        if (inside < 4) {
            rep.resolved = false;
            rep.warning += "fewer than 4 nodes inside sqrt(nu) = " + std::to_string(width) + " for " + big + "; ";
        }
    };
    run(LayerPiece::u_plus, LayerPiece::u_minus, cs.params().nu1_star, "UB", "uB");
    run(LayerPiece::b_plus, LayerPiece::b_minus, cs.params().nu2_star, "BB", "bB");
    return rep;
}

const std::vector<std::pair<std::string, double>>& lemma31_expected_slopes() {
    static const std::vector<std::pair<std::string, double>> v = {
        {"UB_l2", 0.25},  {"uB3_l2", 0.5},   {"dzUB_l2", -0.25}, {"dzuB3_l2", 0.25},
        {"z_dzUB_l2", 0.25}, {"z2_dzUB_linf", 0.5}, {"BB_l2", 0.25}, {"bB3_l2", 0.5},
        {"dzBB_l2", -0.25}, {"dzbB3_l2", 0.25}, {"z_dzBB_l2", 0.25}, {"z2_dzBB_linf", 0.5}};
    return v;
}

const std::vector<std::string>& lemma31_bounded_norms() {
    static const std::vector<std::string> v = {"uB_linf", "dzuB3_linf", "bB_linf", "dzbB3_linf"};
    return v;
}

SlopeFit scaling_fit(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 2) throw PreconditionError("scaling_fit needs at least 2 samples");
    double lo = samples.front().first, hi = lo;
    for (auto& s : samples) {
        if (!(s.first > 0.0) || !(s.second > 0.0)) throw DomainError("scaling_fit: non-positive sample");
        lo = std::min(lo, s.first);
        hi = std::max(hi, s.first);
    }
    if (hi / lo < 100.0 * (1.0 - 1e-9)) throw PreconditionError("scaling_fit: nu values must span 2 decades");
    const double n = static_cast<double>(samples.size());
    double sx = 0, sy = 0;
    for (auto& s : samples) {
        sx += std::log(s.first);
        sy += std::log(s.second);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (auto& s : samples) {
        const double dx = std::log(s.first) - mx, dy = std::log(s.second) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

double nu2_star_diffusion_limit(double eps2, double theta, double tau) {
    if (!(eps2 > 0.0)) throw DomainError("nu2_star: eps2 must be > 0");
    if (!(theta > 0.0)) throw DomainError("nu2_star: theta must be > 0");
    if (!(tau >= 0.0 && tau < 1.0)) throw DomainError("nu2_star: tau must satisfy 0 <= tau < 1 (for any given 0 <= tau < 1)");
    return std::pow(theta * eps2, 1.0 + tau);
}

GridPtr layer_resolving_grid(int nx, int nz, double h, double nu, int per_layer) {
    const double width = std::sqrt(nu);
    for (double s = 0.0; s <= 12.0; s += 0.125) {
        GridPtr g = build_grid(nx, nz, h, s);
        int inside = 0;
        for (int k = 1; k < nz; ++k)
            if (g->z[k] <= width) ++inside;
        if (inside >= per_layer) return g;
    }
    throw ConfigError("no stretch up to 12 resolves the layer; increase nz");
}

}  // namespace mhdlayer
