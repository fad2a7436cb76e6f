#include <doctest.h>

#include <cmath>
#include <optional>

#include "mhdlayer/errors.hpp"
#include "mhdlayer/mhd_solver.hpp"
#include "mms.hpp"
#include "support.hpp"

using namespace mhdlayer;
using testsupport::Mms;
using testsupport::pi;

namespace {

double l2_diff(const VectorField& a, const VectorField& b) {
    const VectorField d = a - b;
    return std::sqrt(inner(d, d));
}

MhdState quiet_state(const GridPtr& g, std::uint64_t seed, double eps) {
    const auto wp = make_ideal_state(IdealKind::well_prepared, 1, {"sin", 1}, {}, 0.0, g->h);
    return init_state(wp, nullptr, PerturbationSpec{2.0, eps, seed}, g);
}

}  // namespace

TEST_CASE("zero state stays zero") {
    auto g = build_grid(16, 17, 1.0, 1.0);
    MhdSolver solver({1e-2, 1e-2, 1e-2, 0.5, g});
    MhdState s = make_state(VectorField(g), VectorField(g), false);
    for (int i = 0; i < 20; ++i) solver.advance(s);
    CHECK(max_abs(s.u.f1) == 0.0);
    CHECK(max_abs(s.u.f3) == 0.0);
    CHECK(max_abs(s.b.f1) == 0.0);
    CHECK(max_abs(s.b.f3) == 0.0);
    CHECK(s.t == doctest::Approx(0.2));
}

TEST_CASE("shear heat decay") {
    auto g = build_grid(64, 129, 1.0, 0.0);
    const double a = 0.7;
    VectorField u(g);
    u.f1 = sample(g, [&](double, double z) { return a * std::sin(pi * z); });
    const RunResult r = run(make_state(u, VectorField(g), false), {0.1, 0.1, 1e-3, 0.5, g}, 1.0, 4);
    const double factor = r.final.u.f1(5, 64) / a;
    CHECK(r.final.t == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(factor == doctest::Approx(std::exp(-0.1 * pi * pi)).epsilon(0.01));
    CHECK(factor == doctest::Approx(0.3727).epsilon(0.01));
}

TEST_CASE("manufactured solution: second order in space") {
    const Mms m;
    const double T = 0.1;
    std::vector<double> h, e;
    for (int n : {16, 32, 64}) {
        auto g = build_grid(n, n + 1, 1.0, 0.0);
        const MhdState s = m.solve(g, 2.5e-4, T);
        auto [u, b] = m.exact(g, s.t);
        h.push_back(1.0 / n);
        e.push_back(std::hypot(l2_diff(s.u, u), l2_diff(s.b, b)));
    }
    MESSAGE("space errors " << e[0] << " " << e[1] << " " << e[2]);
    CHECK(testsupport::loglog_slope(h, e) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("manufactured solution: second order in time") {
    const Mms m;
    const double T = 0.4;
    auto g = build_grid(24, 25, 1.0, 0.0);
    const MhdState ref = m.solve(g, 0.025 / 16, T);
    std::vector<double> dts, e;
    for (double dt : {0.025, 0.0125, 0.00625}) {
        const MhdState s = m.solve(g, dt, T);
        dts.push_back(dt);
        e.push_back(std::hypot(l2_diff(s.u, ref.u), l2_diff(s.b, ref.b)));
    }
    MESSAGE("time errors " << e[0] << " " << e[1] << " " << e[2]);
    CHECK(testsupport::loglog_slope(dts, e) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("b -> -b symmetry is bitwise") {
    auto g = build_grid(16, 33, 1.0, 2.0);
    const MhdState s0 = quiet_state(g, 3, 0.5);
    MhdState m0 = s0;
    m0.b *= -1.0;
    const SolverConfig cfg{1e-2, 5e-3, 2e-3, 0.5, g};
    const MhdState a = run(s0, cfg, 0.1, 0).final, b = run(m0, cfg, 0.1, 0).final;
    CHECK(a.u.f1.data() == b.u.f1.data());
    CHECK(a.u.f3.data() == b.u.f3.data());
    CHECK((-1.0 * a.b.f1).data() == b.b.f1.data());
    CHECK((-1.0 * a.b.f3).data() == b.b.f3.data());
}

TEST_CASE("energy is non-increasing step by step and fields stay solenoidal") {
    auto g = build_grid(32, 33, 1.0, 1.0);
    MhdSolver solver({1e-2, 5e-3, 1e-3, 0.5, g});
    MhdState s = quiet_state(g, 17, 0.8);
    double e = solver.diagnostics(s).energy, worst_div = 0.0;
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        solver.advance(s);
        const EnergyDiag d = solver.diagnostics(s);
        if (d.energy > e) ++violations;
        e = d.energy;
        if (i % 500 == 0) worst_div = std::max({worst_div, d.div_u_max, d.div_b_max});
        CHECK(d.dissipation >= 0.0);
    }
    CHECK(violations == 0);
    CHECK(worst_div <= 1e-10);
}

TEST_CASE("global energy balance defect shrinks at second order in dt") {
    auto g = build_grid(16, 33, 1.0, 0.0);
    const MhdState s0 = quiet_state(g, 5, 0.8);
    std::vector<double> dts, defect;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        MhdSolver solver({2e-2, 2e-2, dt, 0.5, g});
        MhdState s = s0;
        EnergyDiag prev = solver.diagnostics(s);
        const double e0 = prev.energy;
        double dissipated = 0.0;
        for (long i = 0; i < steps_for(0.2, dt); ++i) {
            solver.advance(s);
            const EnergyDiag d = solver.diagnostics(s);
            dissipated += 0.5 * dt * (prev.dissipation + d.dissipation);
            prev = d;
        }
        dts.push_back(dt);
        defect.push_back(std::abs(prev.energy - e0 + dissipated) / e0);
    }
    MESSAGE("balance defects " << defect[0] << " " << defect[1] << " " << defect[2]);
    CHECK(testsupport::loglog_slope(dts, defect) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("ideal energy drift is small") {
    auto g = build_grid(32, 65, 1.0, 2.0);
    const auto es = make_ideal_state(IdealKind::elsasser_steady, 1, {"one_plus_half_cos", 1}, {}, 0.5, 1.0);
    MhdSolver solver({0.0, 0.0, 1e-3, 0.5, g});
    const MhdState s0 = init_state(es, nullptr, PerturbationSpec{2.0, 0.1, 1}, g);
    const RunResult r = solver.run(s0, 0.05, 5);
    const double e0 = r.diagnostics.front().energy, e1 = r.diagnostics.back().energy;
    CHECK(std::abs(e1 - e0) / e0 <= 1e-6);
}

TEST_CASE("elsasser views") {
    auto g = build_grid(16, 17, 1.0, 1.0);
    testsupport::Rng rng(1);
    MhdState s;
    s.u = VectorField(g);
    s.b = VectorField(g);
    for (auto* f : {&s.u.f1, &s.u.f3, &s.b.f1, &s.b.f3})
        for (double& v : f->data()) v = rng.uniform(-1, 1);
    const ElsasserViews w = elsasser_views(s);
    const VectorField back = 0.5 * (w.w_plus + w.w_minus);
    CHECK(l2_diff(back, s.u) <= 1e-15);
    MhdState t = s;
    t.b = s.u;
    CHECK(max_abs(elsasser_views(t).w_minus.f1) == 0.0);
    t.b = -1.0 * s.u;
    CHECK(max_abs(elsasser_views(t).w_plus.f3) == 0.0);
}

TEST_CASE("run with T = 0 returns the input") {
    auto g = build_grid(16, 17, 1.0, 1.0);
    const MhdState s0 = quiet_state(g, 2, 0.5);
    const RunResult r = run(s0, {1e-2, 1e-2, 1e-3, 0.5, g}, 0.0);
    CHECK(r.final.u.f1.data() == s0.u.f1.data());
    CHECK(r.final.b.f3.data() == s0.b.f3.data());
    CHECK(r.final.t == 0.0);
    CHECK(r.diagnostics.size() == 1);
    CHECK(steps_for(0.0, 1e-3) == 0);
    CHECK(steps_for(1.0, 0.3) == 4);
    CHECK(snapshot_steps(10, 2) == std::vector<long>{0, 5, 10});
}

TEST_CASE("CFL violations name the max speed") {
    auto g = build_grid(32, 33, 1.0, 2.0);
    const auto es = make_ideal_state(IdealKind::elsasser_steady, 1, {"constant", 2}, {}, 0.5, 1.0);
    MhdSolver solver({1e-2, 1e-2, 0.5, 0.5, g});
    MhdState s = init_state(es, nullptr, std::nullopt, g);
    try {
        solver.advance(s);
        FAIL("expected CflError");
    } catch (const CflError& e) {
        CHECK(e.max_speed > 0.0);
        CHECK(std::string(e.what()).find("max speed") != std::string::npos);
    }
}

TEST_CASE("perturbation size and determinism") {
    auto g = build_grid(32, 65, 1.0, 2.0);
    const auto es = make_ideal_state(IdealKind::elsasser_steady, 1, {"sin", 1}, {}, 0.5, 1.0);
    const MhdState base = init_state(es, nullptr, std::nullopt, g);
    const MhdState a = init_state(es, nullptr, PerturbationSpec{4.0, 1e-2, 7}, g);
    const MhdState b = init_state(es, nullptr, PerturbationSpec{4.0, 1e-2, 7}, g);
    const VectorField du = a.u - base.u, db = a.b - base.b;
    const double sq = inner(du, du) + inner(db, db);
    CHECK(sq <= 1e-8);
    CHECK(sq > 1e-10);
    CHECK(a.u.f1.data() == b.u.f1.data());
    const MhdState c = init_state(es, nullptr, PerturbationSpec{4.0, 1e-2, 8}, g);
    CHECK(a.u.f1.data() != c.u.f1.data());
    for (int j = 0; j < g->nx; ++j) {
        CHECK(std::abs(du.f1(j, 0)) < 1e-14);
        CHECK(std::abs(db.f3(j, g->nz - 1)) < 1e-14);
    }
}

TEST_CASE("reference viscous run") {
    auto g = build_grid(16, 33, 1.0, 1.0);
    const auto wp = make_ideal_state(IdealKind::well_prepared, 1, {"sin", 1}, {}, 0.5, 1.0);
    MhdState s0 = init_state(wp, nullptr, std::nullopt, g);
    s0.b = VectorField(g);
    const SolverConfig cfg{1e-2, 0.0, 2e-3, 0.5, g};
    const MhdState a = run_reference_viscous(s0, cfg, 0.1, 0).final;
    const MhdState b = run(s0, cfg, 0.1, 0).final;
    CHECK(a.u.f1.data() == b.u.f1.data());
    CHECK(a.u.f3.data() == b.u.f3.data());
    CHECK(max_abs(a.b.f1) == 0.0);

    // u0 = b0 with zero traces: the viscous u-equation separates u from b
    MhdState e0 = init_state(wp, nullptr, std::nullopt, g, true);
    e0.b = e0.u;
    const MhdState e = run_reference_viscous(e0, cfg, 0.1, 0).final;
    CHECK(l2_diff(e.u, e.b) > 1e-4);
    double wall = 0.0;
    for (int j = 0; j < g->nx; ++j) wall = std::max({wall, std::abs(e.b.f3(j, 0)), std::abs(e.b.f3(j, g->nz - 1))});
    CHECK(wall == 0.0);
    CHECK(max_abs(divergence(e.b)) <= 1e-10);

    CHECK_THROWS_AS(run_reference_viscous(s0, {1e-2, 1e-3, 2e-3, 0.5, g}, 0.1), PreconditionError);
}
