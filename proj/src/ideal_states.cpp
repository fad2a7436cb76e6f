#include "mhdlayer/ideal_states.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "mhdlayer/errors.hpp"

namespace mhdlayer {

namespace {
constexpr double pi = std::numbers::pi;
}

std::string to_string(IdealKind k) {
    switch (k) {
        case IdealKind::elsasser_steady: return "elsasser_steady";
        case IdealKind::shear_flow: return "shear_flow";
        case IdealKind::well_prepared: return "well_prepared";
    }
    return "?";
}

IdealKind ideal_kind_from_string(const std::string& s) {
    if (s == "elsasser_steady") return IdealKind::elsasser_steady;
    if (s == "shear_flow") return IdealKind::shear_flow;
    if (s == "well_prepared") return IdealKind::well_prepared;
    throw ConfigError("unknown state kind '" + s + "'");
}

std::array<double, 4> Profile::eval(double z, double h) const {
    const double k = pi / h;
    std::array<double, 4> r{0, 0, 0, 0};
    if (name == "zero") {
    } else if (name == "constant") {
        r = {1.0, 0, 0, 0};
    } else if (name == "linear") {
        r = {1.0 + z, 1.0, 0, 0};
    } else if (name == "one_plus_half_cos") {
        const double c = std::cos(k * z), s = std::sin(k * z);
        r = {1.0 + 0.5 * c, -0.5 * k * s, -0.5 * k * k * c, 0.5 * k * k * k * s};
    } else if (name == "sin") {
        const double c = std::cos(k * z), s = std::sin(k * z);
        r = {s, k * c, -k * k * s, -k * k * k * c};
    } else {
        throw ConfigError("unknown profile '" + name + "'");
    }
    for (double& v : r) v *= scale;
    return r;
}

namespace {

// Phi and its first three derivatives; u0 = (U + a sin x Phi', -a cos x Phi).
std::array<double, 4> stream_profile(IdealKind kind, double z, double h) {
    const double k = pi / h;
    if (kind == IdealKind::elsasser_steady) {
        const double s = std::sin(k * z), c = std::cos(k * z);
        return {s / k, c, -k * s, -k * k * c};
    }
    if (kind == IdealKind::well_prepared) {
        const double s = std::sin(k * z);
        const double s2 = std::sin(2 * k * z), c2 = std::cos(2 * k * z);
        return {s * s / k, s2, 2 * k * c2, -4 * k * k * s2};
    }
    return {0, 0, 0, 0};
}

FieldJet jet_from(const Profile& P, double a, IdealKind kind, double x, double z, double h) {
    const auto p = P.eval(z, h);
    const auto f = stream_profile(kind, z, h);
    const double sx = std::sin(x), cx = std::cos(x);
    FieldJet j;
    j.v1 = p[0] + a * sx * f[1];
    j.d1x = a * cx * f[1];
    j.d1z = p[1] + a * sx * f[2];
    j.d1xx = -a * sx * f[1];
    j.d1zz = p[2] + a * sx * f[3];
    j.v3 = -a * cx * f[0];
    j.d3x = a * sx * f[0];
    j.d3z = -a * cx * f[1];
    j.d3xx = a * cx * f[0];
    j.d3zz = -a * cx * f[2];
    return j;
}

FieldJet scaled(FieldJet j, double c) {
    j.v1 *= c; j.v3 *= c;
    j.d1x *= c; j.d1z *= c; j.d3x *= c; j.d3z *= c;
    j.d1xx *= c; j.d1zz *= c; j.d3xx *= c; j.d3zz *= c;
    j.d1t *= c; j.d3t *= c;
    return j;
}

}  // namespace

FieldJet ideal_u_jet(const IdealState& s, double x, double z) {
    if (s.kind == IdealKind::shear_flow) return jet_from(s.U, 0.0, s.kind, x, z, s.h);
    return jet_from(s.U, s.amplitude, s.kind, x, z, s.h);
}

FieldJet ideal_b_jet(const IdealState& s, double x, double z) {
    if (s.kind == IdealKind::shear_flow) return jet_from(s.B, 0.0, s.kind, x, z, s.h);
    return scaled(ideal_u_jet(s, x, z), static_cast<double>(s.sign));
}

IdealValue eval_ideal(const IdealState& s, double x, double z, double /*t*/) {
    if (z < 0.0 || z > s.h) throw DomainError("eval_ideal: z outside [0, h]");
    const FieldJet u = ideal_u_jet(s, x, z);
    const FieldJet b = ideal_b_jet(s, x, z);
    return {{u.v1, u.v3}, {b.v1, b.v3}, 0.0};
}

IdealState make_ideal_state(IdealKind kind, int sign, Profile U, Profile B, double amplitude, double h) {
    if (sign != 1 && sign != -1) throw ConfigError("state.sign must be +1 or -1");
    if (!(h > 0.0)) throw ConfigError("state.h must be > 0");
    IdealState s;
    s.kind = kind;
    s.sign = sign;
    s.U = std::move(U);
    s.B = std::move(B);
    s.amplitude = amplitude;
    s.h = h;
    (void)s.U.eval(0.0, h);
    (void)s.B.eval(0.0, h);
    if (kind == IdealKind::well_prepared) {
        if (std::abs(s.U.eval(0.0, h)[0]) > 1e-14 || std::abs(s.U.eval(h, h)[0]) > 1e-14)
            throw ConfigError("state.U must vanish on both walls for well_prepared data");
    }
    double m = 0.0;
    const int n = 64;
    for (int k = 0; k <= n; ++k)
        for (int j = 0; j < n; ++j) {
            const double x = 2 * pi * j / n, z = h * k / n;
            for (const FieldJet& f : {ideal_u_jet(s, x, z), ideal_b_jet(s, x, z)}) {
                const double g = std::sqrt(f.d1x * f.d1x + f.d1z * f.d1z + f.d3x * f.d3x + f.d3z * f.d3z);
                m = std::max(m, g);
            }
        }
    s.s_norm_bound = m;
    return s;
}

VectorField sample_ideal_u(const IdealState& s, const GridPtr& grid) {
    return VectorField(sample(grid, [&](double x, double z) { return ideal_u_jet(s, x, z).v1; }),
                       sample(grid, [&](double x, double z) { return ideal_u_jet(s, x, z).v3; }));
}

VectorField sample_ideal_b(const IdealState& s, const GridPtr& grid) {
    return VectorField(sample(grid, [&](double x, double z) { return ideal_b_jet(s, x, z).v1; }),
                       sample(grid, [&](double x, double z) { return ideal_b_jet(s, x, z).v3; }));
}

double ideal_residual(const IdealState& s, const GridPtr& grid) {
    const VectorField u = sample_ideal_u(s, grid);
    const VectorField b = sample_ideal_b(s, grid);
    auto adv = [](const VectorField& v, const ScalarField& w) {
        ScalarField a = ddx(w);
        ScalarField c = ddz(w);
        for (size_t i = 0; i < a.size(); ++i)
            a.data()[i] = v.f1.data()[i] * a.data()[i] + v.f3.data()[i] * c.data()[i];
        return a;
    };
    double r = 0.0;
    for (int c = 0; c < 2; ++c) {
        const ScalarField& uc = c == 0 ? u.f1 : u.f3;
        const ScalarField& bc = c == 0 ? b.f1 : b.f3;
        r = std::max(r, max_abs(adv(u, uc) - adv(b, bc)));
        r = std::max(r, max_abs(adv(u, bc) - adv(b, uc)));
    }
    r = std::max(r, max_abs(divergence(u)));
    r = std::max(r, max_abs(divergence(b)));
    return r;
}

namespace {

TraceFn trace_of(const IdealState& s, bool magnetic, double z) {
    return [s, magnetic, z](double x, double) {
        const FieldJet j = magnetic ? ideal_b_jet(s, x, z) : ideal_u_jet(s, x, z);
        // u1 on a wall is U(wall) + c sin x; its x-derivatives follow from d1x and d1xx
        TraceVals t;
        t.g = j.v1;
        t.gx = j.d1x;
        t.gxx = j.d1xx;
        t.gxxx = -j.d1x;
        return t;
    };
}

}  // namespace

WallTraces wall_traces(const IdealState& s) {
    WallTraces w;
    w.u_lower = trace_of(s, false, 0.0);
    w.u_upper = trace_of(s, false, s.h);
    w.b_lower = trace_of(s, true, 0.0);
    w.b_upper = trace_of(s, true, s.h);
    return w;
}

TraceFn trace_from_row(const std::vector<double>& row, const std::vector<double>* previous, double dt) {
    const int n = static_cast<int>(row.size());
    auto coeffs = [n](const std::vector<double>& r) {
        std::vector<std::complex<double>> c(n / 2 + 1);
        for (int m = 0; m <= n / 2; ++m) {
            std::complex<double> acc(0.0);
            for (int j = 0; j < n; ++j) acc += r[j] * std::polar(1.0, -2 * pi * m * j / n);
            c[m] = acc / static_cast<double>(n);
        }
        return c;
    };
    auto c = coeffs(row);
    std::vector<std::complex<double>> ct(c.size(), 0.0);
    if (previous && dt > 0.0) {
        auto p = coeffs(*previous);
        for (size_t m = 0; m < c.size(); ++m) ct[m] = (c[m] - p[m]) / dt;
    }
    return [c, ct, n](double x, double) {
        TraceVals t;
        for (int m = 0; m <= n / 2; ++m) {
            // real part of sum with conjugate symmetry; Nyquist and mean counted once
            const double w = (m == 0 || 2 * m == n) ? 1.0 : 2.0;
            const std::complex<double> e = std::polar(1.0, m * x);
            const std::complex<double> im(0.0, m);
            auto part = [&](const std::complex<double>& a, int order) {
                std::complex<double> f = a * e;
                for (int o = 0; o < order; ++o) f *= im;
                return w * f.real();
            };
            t.g += part(c[m], 0);
            t.gx += part(c[m], 1);
            t.gxx += part(c[m], 2);
            t.gxxx += part(c[m], 3);
            t.gt += part(ct[m], 0);
            t.gxt += part(ct[m], 1);
        }
        return t;
    };
}

}  // namespace mhdlayer
