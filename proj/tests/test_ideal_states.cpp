#include <doctest.h>

#include <cmath>

#include "mhdlayer/errors.hpp"
#include "mhdlayer/ideal_states.hpp"
#include "support.hpp"

using namespace mhdlayer;
using testsupport::pi;

TEST_CASE("shear flow evaluation") {
    const auto s = make_ideal_state(IdealKind::shear_flow, 1, {"linear", 1}, {"linear", 1}, 0, 1.0);
    for (double z : {0.0, 0.3, 1.0}) {
        const IdealValue v = eval_ideal(s, 1.7, z, 5.0);
        CHECK(v.u0[0] == doctest::Approx(1 + z));
        CHECK(v.u0[1] == 0.0);
        CHECK(v.b0[0] == doctest::Approx(1 + z));
        CHECK(v.b0[1] == 0.0);
        CHECK(v.p0 == 0.0);
    }
    CHECK_THROWS_AS(eval_ideal(s, 0.0, 1.5, 0.0), DomainError);
    CHECK_THROWS_AS(eval_ideal(s, 0.0, -0.1, 0.0), DomainError);
}

TEST_CASE("elsasser sign rule and time independence") {
    for (int sign : {1, -1}) {
        const auto s = make_ideal_state(IdealKind::elsasser_steady, sign, {"one_plus_half_cos", 1}, {}, 0.7, 1.0);
        testsupport::Rng rng(11);
        for (int i = 0; i < 50; ++i) {
            const double x = rng.uniform(0, 2 * pi), z = rng.uniform(0, 1), t = rng.uniform(0, 3);
            const IdealValue a = eval_ideal(s, x, z, t), b = eval_ideal(s, x, z, 0.0);
            CHECK(a.b0[0] == sign * a.u0[0]);
            CHECK(a.b0[1] == sign * a.u0[1]);
            CHECK(a.u0[0] == b.u0[0]);
            CHECK(a.p0 == 0.0);
        }
    }
}

TEST_CASE("well-prepared data vanish on the walls") {
    const auto s = make_ideal_state(IdealKind::well_prepared, 1, {"sin", 1}, {}, 0.5, 1.0);
    for (double x : {0.0, 1.0, 4.0})
        for (double z : {0.0, 1.0}) {
            const IdealValue v = eval_ideal(s, x, z, 0);
            CHECK(std::abs(v.u0[0]) < 1e-14);
            CHECK(std::abs(v.u0[1]) < 1e-14);
        }
    CHECK_THROWS_AS(make_ideal_state(IdealKind::well_prepared, 1, {"constant", 1}, {}, 0, 1.0), ConfigError);
    const WallTraces w = wall_traces(s);
    for (double x : {0.0, 2.0}) {
        CHECK(std::abs(w.u_lower(x, 0).g) < 1e-14);
        CHECK(std::abs(w.u_upper(x, 0).g) < 1e-14);
        CHECK(std::abs(w.b_lower(x, 0).g) < 1e-14);
        CHECK(std::abs(w.b_upper(x, 0).g) < 1e-14);
    }
}

TEST_CASE("normal components vanish on the walls for every kind") {
    for (IdealKind k : {IdealKind::elsasser_steady, IdealKind::shear_flow, IdealKind::well_prepared}) {
        const auto s = make_ideal_state(k, -1, {"sin", 1}, {"linear", 2}, 0.9, 1.3);
        auto g = build_grid(32, 17, 1.3, 1.0);
        const VectorField u = sample_ideal_u(s, g), b = sample_ideal_b(s, g);
        for (int j = 0; j < g->nx; ++j)
            for (int k2 : {0, g->nz - 1}) {
                CHECK(std::abs(u.f3(j, k2)) < 1e-15);
                CHECK(std::abs(b.f3(j, k2)) < 1e-15);
            }
    }
}

TEST_CASE("wall traces") {
    const auto s = make_ideal_state(IdealKind::shear_flow, 1, {"linear", 1}, {"constant", 3}, 0, 1.0);
    const WallTraces w = wall_traces(s);
    CHECK(w.u_lower(0.4, 0).g == doctest::Approx(1.0));
    CHECK(w.u_upper(0.4, 0).g == doctest::Approx(2.0));
    CHECK(w.b_lower(0.4, 0).g == doctest::Approx(3.0));
    CHECK(w.u_lower(0.4, 0).gx == 0.0);

    const auto e = make_ideal_state(IdealKind::elsasser_steady, 1, {"constant", 1}, {}, 0.5, 1.0);
    const WallTraces we = wall_traces(e);
    for (double x : {0.0, 0.9, 3.1}) {
        CHECK(we.b_lower(x, 0).g == we.u_lower(x, 0).g);
        CHECK(we.b_upper(x, 0).gx == we.u_upper(x, 0).gx);
        // u1 = 1 + a sin x cos(pi z) on the walls
        CHECK(we.u_lower(x, 0).g == doctest::Approx(1 + 0.5 * std::sin(x)));
        CHECK(we.u_upper(x, 0).g == doctest::Approx(1 - 0.5 * std::sin(x)));
        CHECK(we.u_lower(x, 0).gxxx == doctest::Approx(-0.5 * std::cos(x)));
    }
}

TEST_CASE("trace_from_row reproduces trigonometric rows") {
    const int n = 32;
    std::vector<double> row(n), prev(n);
    for (int j = 0; j < n; ++j) {
        const double x = 2 * pi * j / n;
        row[j] = 1 + 0.3 * std::sin(x) + 0.1 * std::cos(3 * x);
        prev[j] = row[j] - 0.01 * std::cos(x);
    }
    const TraceFn f = trace_from_row(row, &prev, 0.01);
    for (double x : {0.1, 1.3, 5.0}) {
        const TraceVals t = f(x, 0);
        CHECK(t.g == doctest::Approx(1 + 0.3 * std::sin(x) + 0.1 * std::cos(3 * x)).epsilon(1e-12));
        CHECK(t.gx == doctest::Approx(0.3 * std::cos(x) - 0.3 * std::sin(3 * x)).epsilon(1e-12));
        CHECK(t.gt == doctest::Approx(std::cos(x)).epsilon(1e-10));
    }
}

TEST_CASE("ideal residual") {
    std::vector<double> h, r;
    for (int n : {16, 32, 64, 128}) {
        const auto s = make_ideal_state(IdealKind::elsasser_steady, 1, {"one_plus_half_cos", 1}, {}, 0.5, 1.0);
        h.push_back(1.0 / n);
        r.push_back(ideal_residual(s, build_grid(n, n + 1, 1.0, 1.0)));
    }
    CHECK(testsupport::loglog_slope(h, r) == doctest::Approx(2.0).epsilon(0.1));

    // shear flows are exact steady solutions for any U, B: all advective terms vanish
    const auto sh = make_ideal_state(IdealKind::shear_flow, 1, {"linear", 1}, {"constant", 2}, 0, 1.0);
    CHECK(ideal_residual(sh, build_grid(16, 17, 1.0, 0.0)) == 0.0);

    // b -> -b symmetry
    for (int n : {16, 32}) {
        const auto p = make_ideal_state(IdealKind::elsasser_steady, 1, {"sin", 1}, {}, 0.8, 1.0);
        const auto m = make_ideal_state(IdealKind::elsasser_steady, -1, {"sin", 1}, {}, 0.8, 1.0);
        auto g = build_grid(n, n + 1, 1.0, 2.0);
        CHECK(ideal_residual(p, g) == ideal_residual(m, g));
    }
}

TEST_CASE("state validation") {
    CHECK_THROWS_AS(make_ideal_state(IdealKind::shear_flow, 2, {}, {}, 0, 1.0), ConfigError);
    CHECK_THROWS_AS(make_ideal_state(IdealKind::shear_flow, 1, {}, {}, 0, 0.0), ConfigError);
    CHECK_THROWS_AS(make_ideal_state(IdealKind::shear_flow, 1, {"nope", 1}, {}, 0, 1.0), ConfigError);
    CHECK_THROWS_AS(ideal_kind_from_string("vortex"), ConfigError);
    CHECK(ideal_kind_from_string(to_string(IdealKind::well_prepared)) == IdealKind::well_prepared);
}
