#include "mhdlayer/mhd_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "mhdlayer/errors.hpp"

namespace mhdlayer {

ScalarField skew_advect(const VectorField& v, const ScalarField& w) {
    ScalarField a = ddx(w);
    ScalarField c = ddz(w);
    ScalarField q1(w.grid_ptr()), q3(w.grid_ptr());
    const size_t n = w.size();
    for (size_t i = 0; i < n; ++i) {
        q1.data()[i] = v.f1.data()[i] * w.data()[i];
        q3.data()[i] = v.f3.data()[i] * w.data()[i];
    }
    const ScalarField dq1 = ddx(q1);
    const ScalarField dq3 = ddz(q3);
    ScalarField out(w.grid_ptr());
    for (size_t i = 0; i < n; ++i)
        out.data()[i] = 0.5 * (v.f1.data()[i] * a.data()[i] + v.f3.data()[i] * c.data()[i] + dq1.data()[i] +
                               dq3.data()[i]);
    return out;
}

VectorField skew_advect(const VectorField& v, const VectorField& w) {
    return VectorField(skew_advect(v, w.f1), skew_advect(v, w.f3));
}

std::pair<VectorField, VectorField> random_perturbation(const GridPtr& grid, const PerturbationSpec& spec) {
    std::mt19937_64 gen(spec.seed);
    auto uniform = [&gen]() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    const double pi = std::numbers::pi;
    const double k = pi / grid->h;
    constexpr int M = 4, N = 3;

    auto field = [&]() {
        double amp[M][N], phase[M][N];
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n) {
                amp[m][n] = (2.0 * uniform() - 1.0) / ((m + 1.0) * (m + 1.0) * (n + 1.0) * (n + 1.0));
                phase[m][n] = 2.0 * pi * uniform();
            }
        VectorField v(grid);
        for (int kz = 0; kz < grid->nz; ++kz) {
            const double z = grid->z[kz];
            const double s = std::sin(k * z), c = std::cos(k * z);
            for (int j = 0; j < grid->nx; ++j) {
                const double x = grid->x(j);
                double dpsidz = 0.0, dpsidx = 0.0;
                for (int m = 0; m < M; ++m)
                    for (int n = 0; n < N; ++n) {
                        const double cn = std::cos(n * k * z), sn = std::sin(n * k * z);
                        const double W = s * s * cn;
                        const double Wz = 2.0 * s * k * c * cn - s * s * n * k * sn;
                        const double arg = (m + 1) * x + phase[m][n];
                        dpsidz += amp[m][n] * std::sin(arg) * Wz;
                        dpsidx += amp[m][n] * (m + 1) * std::cos(arg) * W;
                    }
                v.f1(j, kz) = dpsidz;
                v.f3(j, kz) = -dpsidx;
            }
        }
        for (int j = 0; j < grid->nx; ++j) {
            v.f1(j, 0) = v.f3(j, 0) = 0.0;
            v.f1(j, grid->nz - 1) = v.f3(j, grid->nz - 1) = 0.0;
        }
        return v;
    };
    VectorField du = field();
    VectorField db = field();
    const double nrm = inner(du, du) + inner(db, db);
    const double target = 0.5 * std::pow(spec.eps, spec.kappa);
    const double c = nrm > 0.0 ? std::sqrt(target / nrm) : 0.0;
    du *= c;
    db *= c;
    return {du, db};
}

MhdState make_state(VectorField u, VectorField b, bool free_magnetic_walls, double t) {
    const GridPtr g = u.grid_ptr();
    Projector pu(g, false);
    pu.apply(u);
    if (free_magnetic_walls) {
        Projector pb(g, true);
        pb.apply(b);
    } else {
        pu.apply(b);
    }
    MhdState s;
    s.u = std::move(u);
    s.b = std::move(b);
    s.p = ScalarField(g);
    s.q = ScalarField(g);
    s.t = t;
    s.free_magnetic_walls = free_magnetic_walls;
    return s;
}

MhdState init_state(const IdealState& state, const CorrectorSet* cs,
                    const std::optional<PerturbationSpec>& perturbation, const GridPtr& grid,
                    bool free_magnetic_walls) {
    VectorField u = sample_ideal_u(state, grid);
    VectorField b = sample_ideal_b(state, grid);
    if (cs) {
        u += cs->sample_u(grid, 0.0);
        b += cs->sample_b(grid, 0.0);
        double m = 0.0;
        for (int j = 0; j < grid->nx; ++j)
            for (int k : {0, grid->nz - 1}) {
                m = std::max({m, std::abs(u.f1(j, k)), std::abs(u.f3(j, k))});
                if (cs->has_b()) m = std::max({m, std::abs(b.f1(j, k)), std::abs(b.f3(j, k))});
            }
        if (m > 1e-12) throw PreconditionError("init_state: corrector does not cancel the wall trace");
    }
    if (perturbation) {
        auto [du, db] = random_perturbation(grid, *perturbation);
        u += du;
        b += db;
    }
    return make_state(std::move(u), std::move(b), free_magnetic_walls);
}

MhdSolver::MhdSolver(SolverConfig cfg, Forcing forcing) : cfg_(std::move(cfg)), forcing_(std::move(forcing)) {
    if (!cfg_.grid) throw ConfigError("solver.grid missing");
    if (!(cfg_.dt > 0.0)) throw ConfigError("solver.dt must be > 0");
    if (cfg_.eps1 < 0.0 || cfg_.eps2 < 0.0) throw ConfigError("solver.eps1 and solver.eps2 must be >= 0");
    pu_ = std::make_shared<Projector>(cfg_.grid, false);
    pb_free_ = std::make_shared<Projector>(cfg_.grid, true);
}

void MhdSolver::nonlinear(const MhdState& s, double t, VectorField& nu, VectorField& nb) const {
    nu = skew_advect(s.b, s.b);
    nu -= skew_advect(s.u, s.u);
    nb = skew_advect(s.b, s.u);
    nb -= skew_advect(s.u, s.b);
    if (forcing_) {
        VectorField fu(cfg_.grid), fb(cfg_.grid);
        forcing_(t, fu, fb);
        nu += fu;
        nb += fb;
    }
}

double MhdSolver::max_speed_cfl(const MhdState& s, double dt) const {
    const auto& g = *cfg_.grid;
    double c = 0.0;
    for (int k = 0; k < g.nz; ++k) {
        const double dzl = g.dz_local(k);
        for (int j = 0; j < g.nx; ++j) {
            const double a = std::abs(s.u.f1(j, k)) + std::abs(s.b.f1(j, k));
            const double b = std::abs(s.u.f3(j, k)) + std::abs(s.b.f3(j, k));
            c = std::max(c, a / g.dx + b / dzl);
        }
    }
    return c * dt;
}

namespace {

ScalarField lap0(const ScalarField& f) { return laplacian(f, WallRule::zero); }

bool all_finite(const VectorField& v) {
    for (double x : v.f1.data())
        if (!std::isfinite(x)) return false;
    for (double x : v.f3.data())
        if (!std::isfinite(x)) return false;
    return true;
}

double max_speed(const MhdState& s) {
    double m = 0.0;
    const size_t n = s.u.f1.size();
    for (size_t i = 0; i < n; ++i)
        m = std::max(m, std::hypot(s.u.f1.data()[i], s.u.f3.data()[i]) +
                            std::hypot(s.b.f1.data()[i], s.b.f3.data()[i]));
    return m;
}

}  // namespace

void MhdSolver::prime(MhdState& s) const {
    VectorField nu, nb;
    nonlinear(s, s.t, nu, nb);
    if (cfg_.eps1 > 0.0) {
        nu.f1 += cfg_.eps1 * lap0(s.u.f1);
        nu.f3 += cfg_.eps1 * lap0(s.u.f3);
    }
    ScalarField phi;
    pu_->apply(nu, &phi);
    s.p = -1.0 * phi;
    if (cfg_.eps2 > 0.0) {
        nb.f1 += cfg_.eps2 * lap0(s.b.f1);
        nb.f3 += cfg_.eps2 * lap0(s.b.f3);
    }
    b_projector(s.free_magnetic_walls).apply(nb, &phi);
    s.q = -1.0 * phi;
    s.primed = true;
}

void MhdSolver::advance(MhdState& s, double dt) const {
    if (dt <= 0.0) dt = cfg_.dt;
    if (!s.primed) prime(s);
    const double cfl = max_speed_cfl(s, dt);
    if (cfl > cfg_.cfl_limit) throw CflError(max_speed(s), dt, cfg_.cfl_limit);

    VectorField nu, nb;
    nonlinear(s, s.t, nu, nb);
    VectorField au = nu, ab = nb;
    if (s.has_prev) {
        const double r = dt / s.dt_prev;
        au *= 1.0 + 0.5 * r;
        ab *= 1.0 + 0.5 * r;
        au -= (0.5 * r) * s.nu_prev;
        ab -= (0.5 * r) * s.nb_prev;
    }

    const VectorField gp = pu_->grad_adj(s.p);
    VectorField ru = s.u;
    ru += dt * (au - gp);
    if (cfg_.eps1 > 0.0) {
        const double a = 0.5 * dt * cfg_.eps1;
        ru.f1 += a * lap0(s.u.f1);
        ru.f3 += a * lap0(s.u.f3);
        HelmholtzSolver hs(cfg_.grid, a);
        hs.solve(ru.f1);
        hs.solve(ru.f3);
    }
    ScalarField phi;
    pu_->apply(ru, &phi);
    s.p -= (1.0 / dt) * phi;
    s.u = std::move(ru);

    const Projector& pb = b_projector(s.free_magnetic_walls);
    if (!s.q.valid()) s.q = ScalarField(cfg_.grid);
    VectorField rb = s.b;
    rb += dt * (ab - pb.grad_adj(s.q));
    if (cfg_.eps2 > 0.0) {
        const double a = 0.5 * dt * cfg_.eps2;
        rb.f1 += a * lap0(s.b.f1);
        rb.f3 += a * lap0(s.b.f3);
        HelmholtzSolver hs(cfg_.grid, a);
        hs.solve(rb.f1);
        hs.solve(rb.f3);
    }
    pb.apply(rb, &phi);
    s.q -= (1.0 / dt) * phi;
    s.b = std::move(rb);

    s.nu_prev = std::move(nu);
    s.nb_prev = std::move(nb);
    s.dt_prev = dt;
    s.has_prev = true;
    s.t += dt;
    ++s.step;
    if (!all_finite(s.u) || !all_finite(s.b)) throw InstabilityError(s.step, "non-finite field values");
}

EnergyDiag MhdSolver::diagnostics(const MhdState& s) const {
    EnergyDiag d;
    d.t = s.t;
    d.energy = 0.5 * (inner(s.u, s.u) + inner(s.b, s.b));
    double du = -inner(s.u.f1, lap0(s.u.f1)) - inner(s.u.f3, lap0(s.u.f3));
    double db = 0.0;
    if (cfg_.eps2 > 0.0) db = -inner(s.b.f1, lap0(s.b.f1)) - inner(s.b.f3, lap0(s.b.f3));
    d.dissipation = cfg_.eps1 * du + cfg_.eps2 * db;
    d.div_u_max = max_abs(divergence(s.u));
    d.div_b_max = max_abs(divergence(s.b));
    return d;
}

long steps_for(double T, double dt) {
    if (T <= 0.0) return 0;
    return static_cast<long>(std::ceil(T / dt - 1e-9));
}

std::vector<long> snapshot_steps(long nsteps, int cadence) {
    std::set<long> s{0, nsteps};
    if (cadence > 0)
        for (int i = 0; i <= cadence; ++i)
            s.insert(static_cast<long>(std::llround(static_cast<double>(i) * nsteps / cadence)));
    return {s.begin(), s.end()};
}

namespace {

RunResult run_loop(const MhdSolver& solver, MhdState s, double T, int cadence, const Observer& observer,
                   const std::function<void(const MhdState&)>& per_step) {
    RunResult r;
    if (T <= 0.0) {
        r.diagnostics.push_back(solver.diagnostics(s));
        if (observer) observer(s);
        r.final = std::move(s);
        return r;
    }
    const double dt = solver.config().dt;
    const long n = steps_for(T, dt);
    const auto snaps = snapshot_steps(n, cadence);
    const double t_end = s.t + T;
    size_t next = 0;
    auto maybe_record = [&](long i) {
        if (next < snaps.size() && snaps[next] == i) {
            r.diagnostics.push_back(solver.diagnostics(s));
            if (observer) observer(s);
            ++next;
        }
    };
    maybe_record(0);
    for (long i = 1; i <= n; ++i) {
        const double h = (i == n) ? t_end - s.t : dt;
        solver.advance(s, h);
        if (i == n) s.t = t_end;
        if (per_step) per_step(s);
        maybe_record(i);
    }
    r.final = std::move(s);
    return r;
}

}  // namespace

RunResult MhdSolver::run(MhdState s0, double T, int cadence, const Observer& observer) const {
    return run_loop(*this, std::move(s0), T, cadence, observer, {});
}

MhdState step(const MhdState& s, const SolverConfig& cfg) {
    MhdSolver solver(cfg);
    MhdState out = s;
    solver.advance(out);
    return out;
}

RunResult run(const MhdState& s0, const SolverConfig& cfg, double T, int cadence, const Observer& observer) {
    return MhdSolver(cfg).run(s0, T, cadence, observer);
}

ElsasserViews elsasser_views(const MhdState& s) { return {s.u + s.b, s.u - s.b}; }

RunResult run_reference_viscous(const MhdState& s0, const SolverConfig& cfg, double T, int cadence,
                                const Observer& observer, double gradient_guard) {
    if (cfg.eps2 != 0.0) throw PreconditionError("run_reference_viscous requires eps2 = 0");
    MhdSolver solver(cfg);
    MhdState s = s0;
    s.free_magnetic_walls = true;
    auto guard = [gradient_guard](const MhdState& st) {
        const double g = std::max({max_abs(ddx(st.b.f1)), max_abs(ddz(st.b.f1)), max_abs(ddx(st.b.f3)),
                                   max_abs(ddz(st.b.f3))});
        if (g > gradient_guard) throw InstabilityError(st.step, "magnetic gradient exceeds guard");
    };
    return run_loop(solver, std::move(s), T, cadence, observer, guard);
}

}  // namespace mhdlayer
