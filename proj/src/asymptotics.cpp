#include "mhdlayer/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "mhdlayer/errors.hpp"

namespace mhdlayer {

std::string to_string(EpsLaw l) {
    switch (l) {
        case EpsLaw::equal: return "equal";
        case EpsLaw::shifted: return "shifted";
        case EpsLaw::custom: return "custom";
    }
    return "?";
}

EpsLaw eps_law_from_string(const std::string& s) {
    if (s == "equal") return EpsLaw::equal;
    if (s == "shifted") return EpsLaw::shifted;
    if (s == "custom") return EpsLaw::custom;
    throw ConfigError("unknown family law '" + s + "'");
}

std::pair<double, double> EpsilonFamily::eval(double eps) const {
    if (!(eps > 0.0)) throw DomainError("eps must be > 0");
    switch (law) {
        case EpsLaw::equal: return {eps, eps};
        case EpsLaw::shifted: return {eps, eps + std::pow(eps, alpha + 1.0)};
        case EpsLaw::custom:
            for (const auto& r : table)
                if (std::abs(r[0] - eps) <= 1e-12 * eps) return {r[1], r[2]};
            throw DomainError("custom family has no row for eps = " + std::to_string(eps));
    }
    return {eps, eps};
}

std::string EpsilonFamily::name() const {
    if (law == EpsLaw::shifted) return "shifted(alpha=" + std::to_string(alpha) + ")";
    return to_string(law);
}

namespace {

// Least-squares line through (log x, log y).
void loglog_fit(const std::vector<std::pair<double, double>>& xy, double& slope, double& intercept, double& r2) {
    const double n = static_cast<double>(xy.size());
    double sx = 0, sy = 0;
    for (const auto& [x, y] : xy) {
        sx += std::log(x);
        sy += std::log(y);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [x, y] : xy) {
        const double dx = std::log(x) - mx, dy = std::log(y) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    slope = sxx > 0 ? sxy / sxx : 0.0;
    intercept = my - slope * mx;
    r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
}

double expr_slope(const std::vector<AssumptionRow>& rows, double AssumptionRow::*field, bool& all_zero) {
    std::vector<std::pair<double, double>> xy;
    all_zero = true;
    for (const auto& r : rows) {
        const double v = r.*field;
        if (v != 0.0) all_zero = false;
        if (v > 0.0) xy.emplace_back(r.eps, v);
    }
    if (xy.size() < 2) return 0.0;
    double s, c, r2;
    loglog_fit(xy, s, c, r2);
    return s;
}

}  // namespace

std::vector<double> assumption_grid(double eps_max, int decades, int per_decade) {
    std::vector<double> g;
    const int n = decades * per_decade;
    for (int i = 0; i <= n; ++i) g.push_back(eps_max * std::pow(10.0, -static_cast<double>(i) / per_decade));
    return g;
}

AssumptionReport check_assumption_2_1(const EpsilonFamily& family, const std::vector<double>& eps_grid) {
    if (eps_grid.size() < 2) throw PreconditionError("assumption check needs at least 2 eps values");
    for (size_t i = 1; i < eps_grid.size(); ++i)
        if (!(eps_grid[i] < eps_grid[i - 1])) throw PreconditionError("assumption check needs a decreasing eps grid");
    if (eps_grid.front() / eps_grid.back() < 100.0 * (1.0 - 1e-9))
        throw PreconditionError("assumption check needs an eps grid spanning 2 decades");
    AssumptionReport rep;
    for (double eps : eps_grid) {
        const auto [e1, e2] = family.eval(eps);
        if (!(e1 > 0.0) || !(e2 > 0.0)) throw ConfigError("family yields non-positive eps1 or eps2");
        AssumptionRow r;
        r.eps = eps;
        r.eps1 = e1;
        r.eps2 = e2;
        const double d2 = (e1 - e2) * (e1 - e2);
        r.expr1 = (e1 + e2) / std::sqrt(eps);
        r.expr2 = d2 / (std::sqrt(eps) * eps * (e1 + e2));
        r.expr3 = d2 / (eps * (e1 + e2)) / std::min(e1, e2);
        rep.rows.push_back(r);
    }
    bool z1, z2, z3;
    const double s1 = expr_slope(rep.rows, &AssumptionRow::expr1, z1);
    const double s2 = expr_slope(rep.rows, &AssumptionRow::expr2, z2);
    const double s3 = expr_slope(rep.rows, &AssumptionRow::expr3, z3);
    // "tends to 0": positive log-log slope in eps; "bounded": slope not below -0.05
    rep.expr1_ok = z1 || s1 >= 0.05;
    rep.expr2_ok = z2 || s2 >= 0.05;
    rep.expr3_ok = z3 || s3 >= -0.05;
    rep.message = "slopes vs eps: expr1 " + std::to_string(s1) + ", expr2 " + std::to_string(s2) + ", expr3 " +
                  std::to_string(s3);
    return rep;
}

BetaReport beta_values(double eps, double e1, double e2, double kappa) {
    if (!(e1 > 0.0) || !(e2 > 0.0) || !(eps > 0.0)) throw DomainError("beta formulas need eps, eps1, eps2 > 0");
    BetaReport b;
    b.eps = eps;
    b.eps1 = e1;
    b.eps2 = e2;
    b.kappa = kappa;
    const double se = std::sqrt(eps);
    const double sum = e1 + e2;
    const double d2 = (e1 - e2) * (e1 - e2);
    const double mn = std::min(e1, e2);
    const double inv = 1.0 / e1 + 1.0 / e2;

    b.beta0 = std::pow(eps, kappa - 1.0) + e1 * e1 + e2 * e2 + (e1 - eps) * (e1 - eps) / (e1 * se) +
              (e2 - eps) * (e2 - eps) / (e2 * se) + d2 / (eps * se * sum);
    b.betabar0 = d2 / (sum * mn) * b.beta0 + std::pow(eps, kappa) + d2 / (se * sum);
    // both terms of the last parenthesis are divided by eps1 sqrt(eps)
    b.beta1 = e1 * e1 + e2 * e2 + d2 / (eps * sum * sum * mn) * b.beta0 + std::pow(eps, kappa - 1.0) / sum +
              d2 / (eps * se * sum * sum) +
              ((e1 - eps) * (e1 - eps) / (e1 * se) + (e2 - eps) * (e2 - eps) / (e1 * se));
    b.betabar1 = d2 + d2 / (sum * mn) * b.beta1 + eps * eps / mn * b.beta1 + d2 / (se * sum);
    b.beta2 = d2 / (eps * sum * sum * mn) * b.beta0 + e1 * e1 + e2 * e2 + std::pow(eps, kappa - 1.0) / sum +
              d2 / (eps * se * sum * sum);
    b.betabar2 = std::pow(eps, kappa) + d2 / (sum * mn) * b.beta2 + eps * eps / mn * b.beta2 + d2 / (se * sum);
    b.beta3 = std::pow(eps, kappa) + (b.beta1 * b.betabar2 + b.beta2 * b.betabar1) / (eps * eps * sum);
    b.beta4 = std::pow(eps, kappa) + b.beta3 / eps + std::pow(eps, kappa - 1.0) + d2 / (eps * sum * mn) * b.beta2 +
              d2 / (eps * se * sum) + inv * b.beta1 * b.beta2 / mn + (b.beta1 + b.beta2) * inv + b.beta0 / mn;
    return b;
}

namespace {

std::vector<std::pair<std::string, double>> side_ratios(const BetaReport& b) {
    const double sum = b.eps1 + b.eps2;
    const double mn = std::min(b.eps1, b.eps2);
    const double inv = 1.0 / b.eps1 + 1.0 / b.eps2;
    return {
        {"beta0/(min(eps1,eps2)(eps1+eps2))", b.beta0 / (mn * sum)},
        {"betabar0/(eps1+eps2)", b.betabar0 / sum},
        {"betabar1/(eps1+eps2)^2", b.betabar1 / (sum * sum)},
        {"(beta0+beta1+beta2)/min(eps1,eps2)*(1/eps1+1/eps2)", (b.beta0 + b.beta1 + b.beta2) / mn * inv},
    };
}

}  // namespace

BetaReport beta_report(const EpsilonFamily& family, double eps, double eps_max) {
    const auto [e1, e2] = family.eval(eps);
    BetaReport b = beta_values(eps, e1, e2, family.kappa);
    const auto [m1, m2] = family.eval(eps_max);
    const BetaReport ref = beta_values(eps_max, m1, m2, family.kappa);
    const auto cur = side_ratios(b);
    const auto lim = side_ratios(ref);
    for (size_t i = 0; i < cur.size(); ++i) {
        SideCondition c;
        c.name = cur[i].first;
        c.value = cur[i].second;
        c.threshold = 10.0 * lim[i].second;
        c.satisfied = std::isfinite(c.value) && c.value <= c.threshold;
        b.side_conditions.push_back(c);
    }
    b.footnotes.push_back(
        "beta1: the (eps2 - eps)^2 term is divided by eps1*sqrt(eps); eps2*sqrt(eps) may be intended");
    b.footnotes.push_back("all unspecified constants C are set to 1");
    return b;
}

double predict_linf_bound(const BetaReport& br, double eps1, double eps2) {
    const double mn = std::min(eps1, eps2);
    return std::pow(br.beta1 / mn, 0.25) * std::pow(br.beta2, 0.25) +
           std::pow(br.beta0, 0.25) * std::pow(br.beta4 / mn, 0.25);
}

double inviscid_l2sq_bound(double eps, double e1, double e2, double kappa) {
    const double se = std::sqrt(eps);
    return std::pow(eps, kappa - 1.0) + e1 * e1 + e2 * e2 + (e1 + e2) / se +
           (e1 - e2) * (e1 - e2) / (eps * se * (e1 + e2));
}

double diffusion_l2sq_bound(double eps2, double tau) { return std::pow(std::sqrt(eps2), 1.0 - tau); }

namespace {

double node_speed(const VectorField& v, size_t i) { return std::hypot(v.f1.data()[i], v.f3.data()[i]); }

int state_sign(const IdealState& s) {
    if (s.kind == IdealKind::shear_flow) {
        if (s.U.name == s.B.name && s.U.scale == s.B.scale) return 1;
        if (s.U.name == s.B.name && s.U.scale == -s.B.scale) return -1;
        return 0;
    }
    return s.sign;
}

VectorField corrector_u(const CorrectorSet* cs, const GridPtr& g, double t) {
    return cs ? cs->sample_u(g, t) : VectorField(g);
}
VectorField corrector_b(const CorrectorSet* cs, const GridPtr& g, double t) {
    return cs ? cs->sample_b(g, t) : VectorField(g);
}

double grad_sq(const VectorField& v) {
    double s = 0.0;
    for (const ScalarField* c : {&v.f1, &v.f3}) {
        const ScalarField a = ddx(*c), b = ddz(*c);
        s += inner(a, a) + inner(b, b);
    }
    return s;
}

}  // namespace

ErrorNorms error_norms(const MhdState& s, const IdealState& ideal, const CorrectorSet* cs) {
    const GridPtr& g = s.u.grid_ptr();
    const VectorField u0 = sample_ideal_u(ideal, g);
    const VectorField b0 = sample_ideal_b(ideal, g);
    const VectorField du = s.u - u0;
    const VectorField db = s.b - b0;
    ErrorNorms e;
    e.raw_l2 = std::sqrt(inner(du, du) + inner(db, db));
    const VectorField ur = du - corrector_u(cs, g, s.t);
    const VectorField br = db - corrector_b(cs, g, s.t);
    e.corrected_l2 = std::sqrt(inner(ur, ur) + inner(br, br));
    for (size_t i = 0; i < ur.f1.size(); ++i)
        e.corrected_linf = std::max({e.corrected_linf, node_speed(ur, i), node_speed(br, i)});
    const int sg = state_sign(ideal);
    const VectorField w = sg < 0 ? ur + br : ur - br;
    e.elsasser_l2 = std::sqrt(inner(w, w));
    return e;
}

std::pair<VectorField, VectorField> remainder_fields(const MhdState& s, const IdealState& ideal,
                                                     const CorrectorSet* cs) {
    const GridPtr& g = s.u.grid_ptr();
    VectorField ru = sample_ideal_u(ideal, g) + corrector_u(cs, g, s.t);
    VectorField rb = sample_ideal_b(ideal, g) + corrector_b(cs, g, s.t);
    Projector(g, false).apply(ru);
    Projector(g, s.free_magnetic_walls).apply(rb);
    return {s.u - ru, s.b - rb};
}

DerivativeNorms derivative_error_norms(const std::vector<MhdState>& traj, const IdealState& ideal,
                                       const CorrectorSet* cs) {
    if (traj.size() < 3) throw PreconditionError("derivative_error_norms needs at least 3 consecutive states");
    std::vector<std::pair<VectorField, VectorField>> R;
    for (const auto& s : traj) {
        const GridPtr& g = s.u.grid_ptr();
        R.emplace_back(s.u - sample_ideal_u(ideal, g) - corrector_u(cs, g, s.t),
                       s.b - sample_ideal_b(ideal, g) - corrector_b(cs, g, s.t));
    }
    auto dxv = [](const VectorField& v) { return VectorField(ddx(v.f1), ddx(v.f3)); };
    auto nrm = [](const VectorField& a, const VectorField& b) { return std::sqrt(inner(a, a) + inner(b, b)); };
    DerivativeNorms d;
    for (size_t i = 1; i + 1 < traj.size(); ++i) {
        const double h0 = traj[i].t - traj[i - 1].t, h1 = traj[i + 1].t - traj[i].t;
        if (!(h0 > 0.0) || !(h1 > 0.0)) throw PreconditionError("trajectory times must increase");
        // second-order nonuniform central difference
        const double cm = -h1 / (h0 * (h0 + h1)), c0 = (h1 - h0) / (h0 * h1), cp = h0 / (h1 * (h0 + h1));
        const VectorField tu = cm * R[i - 1].first + c0 * R[i].first + cp * R[i + 1].first;
        const VectorField tb = cm * R[i - 1].second + c0 * R[i].second + cp * R[i + 1].second;
        d.dt_l2 = std::max(d.dt_l2, nrm(tu, tb));
        d.dx_l2 = std::max(d.dx_l2, nrm(dxv(R[i].first), dxv(R[i].second)));
        d.dtdx_l2 = std::max(d.dtdx_l2, nrm(dxv(tu), dxv(tb)));
    }
    return d;
}

std::string to_string(BudgetFamily f) {
    switch (f) {
        case BudgetFamily::J: return "J";
        case BudgetFamily::K: return "K";
        case BudgetFamily::I: return "I";
    }
    return "?";
}

BudgetFamily budget_family_from_string(const std::string& s) {
    if (s == "J") return BudgetFamily::J;
    if (s == "K") return BudgetFamily::K;
    if (s == "I") return BudgetFamily::I;
    throw ConfigError("unknown budget family '" + s + "'");
}

int budget_arity(BudgetFamily f) {
    switch (f) {
        case BudgetFamily::J: return 13;
        case BudgetFamily::K: return 7;
        case BudgetFamily::I: return 11;
    }
    return 0;
}

std::string BudgetReport::term_name(int i) const { return to_string(family) + std::to_string(i + 1); }

namespace {

// Nodal values and derivatives of a vector field.
struct JetField {
    ScalarField v1, v3, d1x, d1z, d3x, d3z, d1xx, d1zz, d3xx, d3zz, d1t, d3t;
    explicit JetField(const GridPtr& g)
        : v1(g), v3(g), d1x(g), d1z(g), d3x(g), d3z(g), d1xx(g), d1zz(g), d3xx(g), d3zz(g), d1t(g), d3t(g) {}
    VectorField value() const { return VectorField(v1, v3); }
};

template <class F>
JetField sample_jets(const GridPtr& g, F&& f) {
    JetField J(g);
    for (int k = 0; k < g->nz; ++k)
        for (int j = 0; j < g->nx; ++j) {
            const FieldJet q = f(g->x(j), g->z[k]);
            J.v1(j, k) = q.v1; J.v3(j, k) = q.v3;
            J.d1x(j, k) = q.d1x; J.d1z(j, k) = q.d1z; J.d3x(j, k) = q.d3x; J.d3z(j, k) = q.d3z;
            J.d1xx(j, k) = q.d1xx; J.d1zz(j, k) = q.d1zz; J.d3xx(j, k) = q.d3xx; J.d3zz(j, k) = q.d3zz;
            J.d1t(j, k) = q.d1t; J.d3t(j, k) = q.d3t;
        }
    return J;
}

JetField discrete_jets(const VectorField& v) {
    const GridPtr& g = v.grid_ptr();
    JetField J(g);
    J.v1 = v.f1; J.v3 = v.f3;
    J.d1x = ddx(v.f1); J.d1z = ddz(v.f1); J.d3x = ddx(v.f3); J.d3z = ddz(v.f3);
    J.d1xx = d2dx2(v.f1); J.d1zz = d2dz2(v.f1); J.d3xx = d2dx2(v.f3); J.d3zz = d2dz2(v.f3);
    return J;
}

// <v . grad W, r> with nodal v and the gradient carried by W.
double adv(const VectorField& v, const JetField& W, const VectorField& r) {
    const auto& g = v.grid();
    double total = 0.0;
    for (int k = 0; k < g.nz; ++k) {
        double row = 0.0;
        for (int j = 0; j < g.nx; ++j) {
            const double a = v.f1(j, k), c = v.f3(j, k);
            row += (a * W.d1x(j, k) + c * W.d1z(j, k)) * r.f1(j, k) +
                   (a * W.d3x(j, k) + c * W.d3z(j, k)) * r.f3(j, k);
        }
        total += g.wz[k] * row;
    }
    return total * g.dx;
}

double pair_inner(const ScalarField& a1, const ScalarField& a3, const VectorField& r) {
    return inner(a1, r.f1) + inner(a3, r.f3);
}

double skew(const VectorField& v, const VectorField& w, const VectorField& r) {
    return inner(skew_advect(v, w), r);
}

}  // namespace

BudgetReport energy_budget(const MhdState& s, const IdealState* ideal, const CorrectorSet* cs,
                           BudgetFamily family, const BudgetParams& prm, const MhdState* reference) {
    const GridPtr& g = s.u.grid_ptr();
    BudgetReport rep;
    rep.family = family;
    rep.t = s.t;
    rep.terms.assign(budget_arity(family), 0.0);
    const double e1 = prm.eps1, e2 = prm.eps2;
    const Projector P(g, false);

    if (family == BudgetFamily::I) {
        if (!reference) throw PreconditionError("I-family budget requires the eps2 = 0 reference state");
        if (!cs || !cs->has_b()) throw PreconditionError("I-family budget requires the magnetic corrector");
        const JetField bB = sample_jets(g, [&](double x, double z) { return cs->b(x, z, s.t); });
        const JetField ur = discrete_jets(reference->u);
        const JetField br = discrete_jets(reference->b);
        const VectorField uR = s.u - reference->u;
        VectorField bref = reference->b + bB.value();
        P.apply(bref);
        const VectorField bR = s.b - bref;
        const VectorField vB = bB.value();
        auto& T = rep.terms;
        T[0] = -inner(P.grad_adj(s.p - reference->p), uR);
        T[1] = pair_inner(bB.d1t, bB.d3t, bR);
        T[2] = -skew(s.u, uR, uR) - skew(s.u, bR, bR);
        T[3] = adv(reference->b, bB, uR) - adv(reference->u, bB, bR);
        T[4] = adv(vB, bB, uR);
        T[5] = adv(bR, bB, uR) - adv(uR, bB, bR);
        T[6] = adv(vB, br, uR) + adv(vB, ur, bR);
        T[7] = (adv(bR, br, uR) - adv(uR, ur, uR)) + (adv(bR, ur, bR) - adv(uR, br, bR));
        T[8] = skew(s.b, bR, uR) + skew(s.b, uR, bR);
        T[9] = e2 * pair_inner(br.d1xx + br.d1zz, br.d3xx + br.d3zz, bR);
        T[10] = e2 * pair_inner(bB.d1xx + bB.d1zz, bB.d3xx + bB.d3zz, bR);
        return rep;
    }

    if (!ideal) throw PreconditionError("J/K budgets require the ideal state");
    if (cs) {
        const bool pr = cs->params().mode == CorrectorMode::prandtl_heat;
        if (family == BudgetFamily::K && !pr) throw PreconditionError("K-family budget requires prandtl_heat correctors");
        if (family == BudgetFamily::J && pr) throw PreconditionError("J-family budget requires exact_exponential correctors");
    }
    const JetField u0 = sample_jets(g, [&](double x, double z) { return ideal_u_jet(*ideal, x, z); });
    const JetField b0 = sample_jets(g, [&](double x, double z) { return ideal_b_jet(*ideal, x, z); });
    const JetField uB = cs ? sample_jets(g, [&](double x, double z) { return cs->u(x, z, s.t); }) : JetField(g);
    const JetField bB = cs ? sample_jets(g, [&](double x, double z) { return cs->b(x, z, s.t); }) : JetField(g);
    const auto [uR, bR] = remainder_fields(s, *ideal, cs);

    const double j1 = -inner(P.grad_adj(s.p), uR);
    const double j3 = -skew(s.u, uR, uR) - skew(s.u, bR, bR);
    const VectorField u0v = u0.value(), b0v = b0.value(), uBv = uB.value(), bBv = bB.value();
    auto four = [&](const VectorField& a, const VectorField& b, const JetField& X, const JetField& Y) {
        return (adv(b, Y, uR) - adv(a, X, uR)) + (adv(b, X, bR) - adv(a, Y, bR));
    };
    const double j6 = four(uR, bR, uB, bB);
    const double j8 = four(uR, bR, u0, b0);
    const double j9 = skew(s.b, bR, uR) + skew(s.b, uR, bR);
    const double j11 = e1 * pair_inner(u0.d1zz, u0.d3zz, uR) + e2 * pair_inner(b0.d1zz, b0.d3zz, bR);

    if (family == BudgetFamily::K) {
        auto& T = rep.terms;
        T[0] = j1;
        T[1] = j3;
        T[2] = j6;
        T[3] = j8;
        T[4] = j9;
        T[5] = j11;
        T[6] = (e1 - prm.eps) * pair_inner(uB.d1zz, uB.d3zz, uR) + (e2 - prm.eps) * pair_inner(bB.d1zz, bB.d3zz, bR);
        return rep;
    }

    auto& T = rep.terms;
    T[0] = j1;
    T[1] = -pair_inner(uB.d1t, uB.d3t, uR) - pair_inner(bB.d1t, bB.d3t, bR);
    T[2] = j3;
    T[3] = four(u0v, b0v, uB, bB);
    T[4] = four(uBv, bBv, uB, bB);
    T[5] = j6;
    T[6] = four(uBv, bBv, u0, b0);
    T[7] = j8;
    T[8] = j9;
    T[9] = e1 * pair_inner(uB.d1zz, uB.d3zz, uR) + e2 * pair_inner(bB.d1zz, bB.d3zz, bR);
    T[10] = j11;
    T[11] = e1 * pair_inner(uB.d1xx, uB.d3xx, uR) + e2 * pair_inner(bB.d1xx, bB.d3xx, bR);
    T[12] = e1 * pair_inner(u0.d1xx, u0.d3xx, uR) + e2 * pair_inner(b0.d1xx, b0.d3xx, bR);
    return rep;
}

double remainder_dissipation(const MhdState& s, const IdealState& ideal, const CorrectorSet* cs,
                             const BudgetParams& prm) {
    const auto [uR, bR] = remainder_fields(s, ideal, cs);
    auto diss = [](const VectorField& v) {
        return -inner(v.f1, laplacian(v.f1, WallRule::zero)) - inner(v.f3, laplacian(v.f3, WallRule::zero));
    };
    return prm.eps1 * diss(uR) + prm.eps2 * diss(bR);
}

AnisoCheck anisotropic_linf_check(const ScalarField& f) {
    const auto& g = f.grid();
    for (int j = 0; j < g.nx; ++j)
        if (std::abs(f(j, 0)) > 1e-12 || std::abs(f(j, g.nz - 1)) > 1e-12)
            throw PreconditionError("anisotropic_linf_check requires a zero wall trace");
    const ScalarField fx = ddx(f);
    const ScalarField fxz = ddz(fx);
    const double n0 = std::sqrt(inner(f, f));
    AnisoCheck c;
    c.lhs = max_abs(f);
    c.rhs = std::sqrt(n0) * std::pow(inner(fx, fx), 0.25) + std::sqrt(n0) * std::pow(inner(fxz, fxz), 0.25);
    return c;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs, double predicted_slope) {
    if (pairs.size() < 2) throw PreconditionError("fit_rate needs at least 2 pairs");
    for (const auto& [e, v] : pairs)
        if (!(e > 0.0) || !(v > 0.0)) throw DomainError("fit_rate needs positive eps and error values");
    RateFit f;
    f.pairs = pairs;
    loglog_fit(pairs, f.slope, f.intercept, f.r2);
    f.predicted_slope = predicted_slope;
    f.margin = f.slope - (predicted_slope - 0.05);
    f.pass = std::isfinite(f.slope) && f.margin >= 0.0;
    return f;
}

EnvelopeTracker::EnvelopeTracker(const IdealState& ideal, const CorrectorSet* cs, double eps, double eps1,
                                 double eps2, double kappa)
    : ideal_(&ideal), cs_(cs), eps_(eps), eps1_(eps1), eps2_(eps2), kappa_(kappa) {}

void EnvelopeTracker::observe(const MhdState& s) {
    const auto [uR, bR] = remainder_fields(s, *ideal_, cs_);
    const VectorField w = state_sign(*ideal_) < 0 ? uR + bR : uR - bR;
    const double gw = grad_sq(w);
    const double ga = grad_sq(uR) + grad_sq(bR);
    if (!first_) {
        const double h = s.t - t_prev_;
        int_w_ += 0.5 * h * (gw + gw_prev_);
        int_all_ += 0.5 * h * (ga + ga_prev_);
    }
    first_ = false;
    t_prev_ = s.t;
    gw_prev_ = gw;
    ga_prev_ = ga;
    const double d = kEnvelopeDelta;
    const double sum = eps1_ + eps2_;
    const double k = (eps1_ - eps2_) * (eps1_ - eps2_) / (4.0 * d * sum);
    EnvelopeSample e;
    e.t = s.t;
    e.lhs = inner(w, w) + (1.0 - d) * sum * int_w_;
    e.base = std::pow(eps_, kappa_) + k * (1.0 + s.t) / std::sqrt(eps_);
    e.grad_term = k * int_all_;
    samples_.push_back(e);
}

double EnvelopeTracker::calibrate() const {
    double C = 0.0;
    for (const auto& e : samples_)
        if (e.base > 0.0) C = std::max(C, (e.lhs - e.grad_term) / e.base);
    return C;
}

bool EnvelopeTracker::holds(double C) const {
    for (const auto& e : samples_)
        if (e.lhs > C * e.base + e.grad_term) return false;
    return true;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

namespace {

double predicted_from_bound(const std::vector<std::pair<double, double>>& xy) {
    if (xy.size() < 2) return 0.0;
    double s, c, r2;
    loglog_fit(xy, s, c, r2);
    return s;
}

}  // namespace

InviscidStudyResult run_inviscid_limit_study(const InviscidStudyConfig& cfg) {
    if (cfg.eps_list.empty()) throw ConfigError("eps list is empty");
    if (!cfg.grid) throw ConfigError("grid missing");
    InviscidStudyResult res;
    const double eps_max = *std::max_element(cfg.eps_list.begin(), cfg.eps_list.end());
    res.assumption = check_assumption_2_1(cfg.family, assumption_grid(eps_max));
    if (!res.assumption.pass())
        throw ConfigError("epsilon family " + cfg.family.name() +
                          " violates the convergence assumption on eps1, eps2 (" + res.assumption.message + ")");
    if (cfg.state.kind != IdealKind::well_prepared && state_sign(cfg.state) == 0)
        throw PreconditionError("inviscid-limit study needs data with u0 = +/- b0");

    std::vector<double> eps = cfg.eps_list;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    res.rows.resize(eps.size());
    std::vector<std::vector<EnvelopeSample>> env(eps.size());

    parallel_for(static_cast<int>(eps.size()), cfg.jobs, [&](int i) {
        const double e = eps[i];
        const auto [e1, e2] = cfg.family.eval(e);
        CorrectorParams cp;
        cp.nu1_star = e;
        cp.nu2_star = e;
        cp.s_shift = cfg.s_shift;
        cp.mode = cfg.mode;
        const CorrectorSet cs = build_correctors(cfg.state, cp, make_cutoffs(cfg.state.h));
        std::optional<PerturbationSpec> pert;
        if (cfg.perturb) pert = PerturbationSpec{cfg.family.kappa, e, cfg.seed};
        const MhdState s0 = init_state(cfg.state, &cs, pert, cfg.grid);
        SolverConfig sc;
        sc.eps1 = e1;
        sc.eps2 = e2;
        sc.dt = cfg.dt;
        sc.cfl_limit = cfg.cfl_limit;
        sc.grid = cfg.grid;
        EnvelopeTracker tracker(cfg.state, &cs, e, e1, e2, cfg.family.kappa);
        StudyRow row;
        row.eps = e;
        row.eps1 = e1;
        row.eps2 = e2;
        row.nu_star = e;
        auto obs = [&](const MhdState& s) {
            const ErrorNorms n = error_norms(s, cfg.state, &cs);
            row.raw_l2_sup = std::max(row.raw_l2_sup, n.raw_l2);
            row.corrected_l2_sup = std::max(row.corrected_l2_sup, n.corrected_l2);
            row.corrected_linf_sup = std::max(row.corrected_linf_sup, n.corrected_linf);
            row.elsasser_l2_sup = std::max(row.elsasser_l2_sup, n.elsasser_l2);
            tracker.observe(s);
        };
        RunResult r = MhdSolver(sc).run(s0, cfg.T, cfg.cadence, obs);
        row.err_l2_sup = row.raw_l2_sup;
        row.predicted_bound = std::sqrt(inviscid_l2sq_bound(e, e1, e2, cfg.family.kappa));
        row.envelope = tracker.samples();
        row.diagnostics = std::move(r.diagnostics);
        res.rows[i] = std::move(row);
    });

    std::vector<std::pair<double, double>> pairs, bound;
    for (const auto& r : res.rows) {
        pairs.emplace_back(r.eps, r.raw_l2_sup);
        bound.emplace_back(r.eps, r.predicted_bound);
    }
    res.fit = fit_rate(pairs, predicted_from_bound(bound));

    // envelope constant from the largest eps, checked with a fixed margin on every run
    {
        double C = 0.0;
        for (const auto& e : res.rows.front().envelope)
            if (e.base > 0.0) C = std::max(C, (e.lhs - e.grad_term) / e.base);
        res.envelope_C = C;
        res.envelope_ok = true;
        for (const auto& r : res.rows)
            for (const auto& e : r.envelope)
                if (e.lhs > kEnvelopeMargin * C * e.base + e.grad_term) res.envelope_ok = false;
    }
    res.linf_monotone = true;
    for (size_t i = 1; i < res.rows.size(); ++i)
        if (!(res.rows[i].corrected_linf_sup < res.rows[i - 1].corrected_linf_sup)) res.linf_monotone = false;
    return res;
}

DiffusionStudyResult run_diffusion_limit_study(const DiffusionStudyConfig& cfg) {
    if (!(cfg.eps1 > 0.0)) throw ConfigError("eps1 must be > 0 for the diffusion-limit study");
    if (cfg.eps2_list.empty()) throw ConfigError("eps2 list is empty");
    if (!cfg.grid) throw ConfigError("grid missing");
    for (double e2 : cfg.eps2_list) (void)nu2_star_diffusion_limit(e2, cfg.theta, cfg.tau);

    std::optional<PerturbationSpec> pert;
    if (cfg.perturb) pert = PerturbationSpec{cfg.kappa, cfg.perturb_eps, cfg.seed};

    SolverConfig rc;
    rc.eps1 = cfg.eps1;
    rc.eps2 = 0.0;
    rc.dt = cfg.dt;
    rc.cfl_limit = cfg.cfl_limit;
    rc.grid = cfg.grid;
    const MhdState r0 = init_state(cfg.state, nullptr, pert, cfg.grid, true);
    std::vector<MhdState> snaps;
    run_reference_viscous(r0, rc, cfg.T, cfg.cadence, [&](const MhdState& s) { snaps.push_back(s); });

    std::vector<double> eps2 = cfg.eps2_list;
    std::sort(eps2.begin(), eps2.end(), std::greater<>());
    DiffusionStudyResult res;
    res.rows.resize(eps2.size());
    const WallTraces tr = wall_traces(cfg.state);

    parallel_for(static_cast<int>(eps2.size()), cfg.jobs, [&](int i) {
        const double e2 = eps2[i];
        CorrectorParams cp;
        cp.nu2_star = nu2_star_diffusion_limit(e2, cfg.theta, cfg.tau);
        cp.nu1_star = cp.nu2_star;
        const CorrectorSet cs = build_magnetic_corrector(tr.b_lower, tr.b_upper, cp, make_cutoffs(cfg.state.h),
                                                         cfg.state.h);
        const MhdState s0 = init_state(cfg.state, &cs, pert, cfg.grid, false);
        SolverConfig sc = rc;
        sc.eps2 = e2;
        StudyRow row;
        row.eps = e2;
        row.eps1 = cfg.eps1;
        row.eps2 = e2;
        row.nu_star = cp.nu2_star;
        size_t idx = 0;
        auto obs = [&](const MhdState& s) {
            const MhdState& ref = snaps.at(idx++);
            const VectorField du = s.u - ref.u, db = s.b - ref.b;
            row.err_l2_sup = std::max(row.err_l2_sup, std::sqrt(inner(du, du) + inner(db, db)));
        };
        RunResult r = MhdSolver(sc).run(s0, cfg.T, cfg.cadence, obs);
        row.raw_l2_sup = row.err_l2_sup;
        row.predicted_bound = std::sqrt(diffusion_l2sq_bound(e2, cfg.tau));
        row.diagnostics = std::move(r.diagnostics);
        res.rows[i] = std::move(row);
    });

    res.predicted_slope = (1.0 - cfg.tau) / 4.0;
    std::vector<std::pair<double, double>> pairs;
    for (const auto& r : res.rows) pairs.emplace_back(r.eps2, r.err_l2_sup);
    res.fit = fit_rate(pairs, res.predicted_slope);
    return res;
}

}  // namespace mhdlayer
