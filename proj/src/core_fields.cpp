#include "mhdlayer/core_fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mhdlayer/errors.hpp"

namespace mhdlayer {

std::vector<double> fd_weights(double x0, const std::vector<double>& xs, int m) {
    const int n = static_cast<int>(xs.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = xs[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

GridPtr build_grid(int nx, int nz, double h, double stretch) {
    if (nx < 4 || nx % 2 != 0) throw ConfigError("grid.nx must be an even integer >= 4");
    if (nz < 5) throw ConfigError("grid.nz must be >= 5");
    if (!(h > 0.0)) throw ConfigError("grid.h must be > 0");
    if (!(stretch >= 0.0)) throw ConfigError("grid.stretch must be >= 0");

    auto g = std::make_shared<GridSpec>();
    g->nx = nx;
    g->nz = nz;
    g->h = h;
    g->stretch = stretch;
    g->dx = 2.0 * std::numbers::pi / nx;
    g->z.resize(nz);
    for (int k = 0; k < nz; ++k) {
        const double xi = static_cast<double>(k) / (nz - 1);
        if (stretch > 0.0)
            g->z[k] = 0.5 * h * (1.0 + std::tanh(stretch * (2.0 * xi - 1.0)) / std::tanh(stretch));
        else
            g->z[k] = h * xi;
    }
    g->z.front() = 0.0;
    g->z.back() = h;
    // symmetric map: enforce exact mirror symmetry of the nodes
    for (int k = 0; k < nz / 2; ++k) g->z[nz - 1 - k] = h - g->z[k];
    if (nz % 2 == 1) g->z[nz / 2] = 0.5 * h;

    const auto& z = g->z;
    g->wz.assign(nz, 0.0);
    g->wz[0] = 0.5 * (z[1] - z[0]);
    g->wz[nz - 1] = 0.5 * (z[nz - 1] - z[nz - 2]);
    for (int k = 1; k < nz - 1; ++k) g->wz[k] = 0.5 * (z[k + 1] - z[k - 1]);

    g->dz_start.assign(nz, 0);
    g->dz_coef.assign(nz, {0.0, 0.0, 0.0});
    {
        auto w = fd_weights(z[0], {z[0], z[1], z[2]}, 1);
        g->dz_start[0] = 0;
        g->dz_coef[0] = {w[0], w[1], w[2]};
        auto v = fd_weights(z[nz - 1], {z[nz - 3], z[nz - 2], z[nz - 1]}, 1);
        g->dz_start[nz - 1] = nz - 3;
        g->dz_coef[nz - 1] = {v[0], v[1], v[2]};
    }
    for (int k = 1; k < nz - 1; ++k) {
        const double c = 1.0 / (z[k + 1] - z[k - 1]);
        g->dz_start[k] = k - 1;
        g->dz_coef[k] = {-c, 0.0, c};
    }

    g->lap_coef.assign(nz, {0.0, 0.0, 0.0});
    for (int k = 1; k < nz - 1; ++k) {
        const double hm = z[k] - z[k - 1];
        const double hp = z[k + 1] - z[k];
        const double s = 2.0 / (hm + hp);
        g->lap_coef[k] = {s / hm, -s / hm - s / hp, s / hp};
    }
    return g;
}

double GridSpec::dz_min() const {
    double m = z[1] - z[0];
    for (int k = 1; k + 1 < nz; ++k) m = std::min(m, z[k + 1] - z[k]);
    return m;
}

double GridSpec::dz_max() const {
    double m = 0.0;
    for (int k = 0; k + 1 < nz; ++k) m = std::max(m, z[k + 1] - z[k]);
    return m;
}

double GridSpec::dz_local(int k) const {
    if (k == 0) return z[1] - z[0];
    if (k == nz - 1) return z[nz - 1] - z[nz - 2];
    return std::min(z[k] - z[k - 1], z[k + 1] - z[k]);
}

ScalarField::ScalarField(GridPtr grid, double fill)
    : grid_(std::move(grid)), nx_(grid_->nx), v_(static_cast<size_t>(grid_->nx) * grid_->nz, fill) {}

static void check_same(const ScalarField& a, const ScalarField& b) {
    if (a.grid_ptr() != b.grid_ptr() && (a.grid().nx != b.grid().nx || a.grid().nz != b.grid().nz))
        throw std::invalid_argument("field shape mismatch");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    check_same(*this, o);
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
    check_same(*this, o);
    for (size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
}
ScalarField& ScalarField::operator*=(double c) {
    for (double& x : v_) x *= c;
    return *this;
}
ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double c, ScalarField a) { return a *= c; }

VectorField::VectorField(ScalarField a, ScalarField b) : f1(std::move(a)), f3(std::move(b)) {
    check_same(f1, f3);
}
VectorField& VectorField::operator+=(const VectorField& o) {
    f1 += o.f1;
    f3 += o.f3;
    return *this;
}
VectorField& VectorField::operator-=(const VectorField& o) {
    f1 -= o.f1;
    f3 -= o.f3;
    return *this;
}
VectorField& VectorField::operator*=(double c) {
    f1 *= c;
    f3 *= c;
    return *this;
}
VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double c, VectorField a) { return a *= c; }

ScalarField sample(const GridPtr& grid, const std::function<double(double, double)>& f) {
    ScalarField s(grid);
    for (int k = 0; k < grid->nz; ++k)
        for (int j = 0; j < grid->nx; ++j) s(j, k) = f(grid->x(j), grid->z[k]);
    return s;
}

ScalarField ddx(const ScalarField& s) {
    const auto& g = s.grid();
    ScalarField out(s.grid_ptr());
    const double c = 1.0 / (2.0 * g.dx);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.nx; ++j) {
            const int jp = (j + 1) % g.nx;
            const int jm = (j + g.nx - 1) % g.nx;
            out(j, k) = c * (s(jp, k) - s(jm, k));
        }
    return out;
}

ScalarField ddz(const ScalarField& s) {
    const auto& g = s.grid();
    ScalarField out(s.grid_ptr());
    for (int k = 0; k < g.nz; ++k) {
        const int k0 = g.dz_start[k];
        const auto& c = g.dz_coef[k];
        for (int j = 0; j < g.nx; ++j)
            out(j, k) = c[0] * s(j, k0) + c[1] * s(j, k0 + 1) + c[2] * s(j, k0 + 2);
    }
    return out;
}

ScalarField d2dx2(const ScalarField& s) {
    const auto& g = s.grid();
    ScalarField out(s.grid_ptr());
    const double c = 1.0 / (g.dx * g.dx);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.nx; ++j) {
            const int jp = (j + 1) % g.nx;
            const int jm = (j + g.nx - 1) % g.nx;
            out(j, k) = c * (s(jp, k) - 2.0 * s(j, k) + s(jm, k));
        }
    return out;
}

ScalarField d2dz2(const ScalarField& s, WallRule rule) {
    const auto& g = s.grid();
    ScalarField out(s.grid_ptr());
    for (int k = 1; k < g.nz - 1; ++k) {
        const auto& c = g.lap_coef[k];
        for (int j = 0; j < g.nx; ++j)
            out(j, k) = c[0] * s(j, k - 1) + c[1] * s(j, k) + c[2] * s(j, k + 1);
    }
    if (rule == WallRule::one_sided) {
        const auto& z = g.z;
        const int n = g.nz;
        auto lo = fd_weights(z[0], {z[0], z[1], z[2], z[3]}, 2);
        auto hi = fd_weights(z[n - 1], {z[n - 4], z[n - 3], z[n - 2], z[n - 1]}, 2);
        for (int j = 0; j < g.nx; ++j) {
            double a = 0.0, b = 0.0;
            for (int i = 0; i < 4; ++i) {
                a += lo[i] * s(j, i);
                b += hi[i] * s(j, n - 4 + i);
            }
            out(j, 0) = a;
            out(j, n - 1) = b;
        }
    }
    return out;
}

ScalarField divergence(const VectorField& v) {
    ScalarField d = ddx(v.f1);
    d += ddz(v.f3);
    return d;
}

VectorField gradient(const ScalarField& s) { return VectorField(ddx(s), ddz(s)); }

ScalarField laplacian(const ScalarField& s, WallRule rule) {
    ScalarField l = d2dx2(s);
    l += d2dz2(s, rule);
    if (rule == WallRule::zero) {
        const auto& g = s.grid();
        for (int j = 0; j < g.nx; ++j) {
            l(j, 0) = 0.0;
            l(j, g.nz - 1) = 0.0;
        }
    }
    return l;
}

double integrate(const ScalarField& s) {
    const auto& g = s.grid();
    double total = 0.0;
    for (int k = 0; k < g.nz; ++k) {
        double row = 0.0;
        for (int j = 0; j < g.nx; ++j) row += s(j, k);
        total += g.wz[k] * row;
    }
    return total * g.dx;
}

double inner(const ScalarField& a, const ScalarField& b) {
    check_same(a, b);
    const auto& g = a.grid();
    double total = 0.0;
    for (int k = 0; k < g.nz; ++k) {
        double row = 0.0;
        for (int j = 0; j < g.nx; ++j) row += a(j, k) * b(j, k);
        total += g.wz[k] * row;
    }
    return total * g.dx;
}

double inner(const VectorField& a, const VectorField& b) { return inner(a.f1, b.f1) + inner(a.f3, b.f3); }

double max_abs(const ScalarField& s) {
    double m = 0.0;
    for (double x : s.data()) m = std::max(m, std::abs(x));
    return m;
}

namespace {

double wall_distance(const GridSpec& g, int k) {
    const double z = g.z[k];
    return z <= 0.5 * g.h ? z : g.h - z;
}

struct Partial {
    double l2sq = 0.0, linf = 0.0, dzsq = 0.0, wsq = 0.0, w2inf = 0.0;
};

Partial partial_norms(const ScalarField& s) {
    const auto& g = s.grid();
    const ScalarField dz = ddz(s);
    Partial p;
    for (int k = 0; k < g.nz; ++k) {
        const double d = wall_distance(g, k);
        double a = 0.0, b = 0.0, c = 0.0;
        for (int j = 0; j < g.nx; ++j) {
            const double v = s(j, k);
            const double dv = dz(j, k);
            a += v * v;
            b += dv * dv;
            c += d * d * dv * dv;
            p.linf = std::max(p.linf, std::abs(v));
            p.w2inf = std::max(p.w2inf, d * d * std::abs(dv));
        }
        p.l2sq += g.wz[k] * a;
        p.dzsq += g.wz[k] * b;
        p.wsq += g.wz[k] * c;
    }
    p.l2sq *= g.dx;
    p.dzsq *= g.dx;
    p.wsq *= g.dx;
    return p;
}

}  // namespace

NormSet norms(const ScalarField& s) {
    const Partial p = partial_norms(s);
    return {std::sqrt(p.l2sq), p.linf, std::sqrt(p.dzsq), std::sqrt(p.wsq), p.w2inf};
}

NormSet norms(const VectorField& v) {
    const Partial a = partial_norms(v.f1);
    const Partial b = partial_norms(v.f3);
    const auto& g = v.grid();
    double linf = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.nx; ++j) linf = std::max(linf, std::hypot(v.f1(j, k), v.f3(j, k)));
    // weighted L-infinity of the vector derivative uses the Euclidean magnitude as well
    const ScalarField d1 = ddz(v.f1);
    const ScalarField d3 = ddz(v.f3);
    double w2inf = 0.0;
    for (int k = 0; k < g.nz; ++k) {
        const double d = wall_distance(g, k);
        for (int j = 0; j < g.nx; ++j) w2inf = std::max(w2inf, d * d * std::hypot(d1(j, k), d3(j, k)));
    }
    return {std::sqrt(a.l2sq + b.l2sq), linf, std::sqrt(a.dzsq + b.dzsq), std::sqrt(a.wsq + b.wsq), w2inf};
}

double hardy_ratio(const ScalarField& f, Wall wall) {
    const auto& g = f.grid();
    const int kw = wall == Wall::lower ? 0 : g.nz - 1;
    for (int j = 0; j < g.nx; ++j)
        if (std::abs(f(j, kw)) > 1e-12)
            throw PreconditionError("hardy_ratio: field does not vanish on the named wall");
    const ScalarField dz = ddz(f);
    double num = 0.0;
    for (int k = 0; k < g.nz; ++k) {
        const double d = wall == Wall::lower ? g.z[k] : g.h - g.z[k];
        double row = 0.0;
        for (int j = 0; j < g.nx; ++j) {
            // f/d tends to |d_z f| on the wall
            const double q = k == kw ? dz(j, k) : f(j, k) / d;
            row += q * q;
        }
        num += g.wz[k] * row;
    }
    num *= g.dx;
    const double den = inner(dz, dz);
    if (num == 0.0) return 0.0;
    return std::sqrt(num / den);
}

VectorField curl_of_stream(const ScalarField& psi) {
    VectorField v(ddz(psi), ddx(psi));
    v.f3 *= -1.0;
    return v;
}

}  // namespace mhdlayer
