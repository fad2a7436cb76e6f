#include <doctest.h>

#include <cmath>
#include <functional>

#include "mhdlayer/errors.hpp"
#include "mhdlayer/layer_correctors.hpp"
#include "support.hpp"

using namespace mhdlayer;
using testsupport::pi;

namespace {

// Independent cutoff: 1 - S(4z/h) on [0, h/4), S the quintic smoothstep.
double cut(double z, double h) {
    const double t = 4 * z / h;
    if (t >= 1) return 0;
    if (t <= 0) return 1;
    return 1 - (10 * std::pow(t, 3) - 15 * std::pow(t, 4) + 6 * std::pow(t, 5));
}

double cut_d(double z, double h) {
    const double t = 4 * z / h;
    if (t >= 1 || t <= 0) return 0;
    return -(4 / h) * 30 * t * t * (1 - t) * (1 - t);
}

double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    const double dz = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(a + i * dz);
    return s * dz / 3;
}

CorrectorSet shear_set(double nu, double c, CorrectorMode mode = CorrectorMode::exact_exponential) {
    const auto s = make_ideal_state(IdealKind::shear_flow, 1, {"constant", c}, {"constant", c}, 0, 1.0);
    return build_correctors(s, {nu, nu, 1.0, mode}, make_cutoffs(1.0));
}

}  // namespace

TEST_CASE("cutoff values") {
    const CutoffPair c = make_cutoffs(1.0);
    CHECK(c.rho1(0.0)[0] == 1.0);
    CHECK(c.rho1(1.0 / 8)[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c.rho1(1.0 / 3)[0] == 0.0);
    CHECK(c.rho1(0.0)[1] == 0.0);
    CHECK(c.rho2(1.0)[0] == 1.0);
    CHECK(c.rho2(0.5)[0] == 0.0);
    const CutoffPair c2 = make_cutoffs(2.0);
    CHECK(c2.rho1(0.25)[0] == doctest::Approx(0.5));
    CHECK(c2.rho2(1.75)[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(make_cutoffs(0.0), ConfigError);
    for (double z = 0.01; z < 0.25; z += 0.01) {
        const double e = 1e-6;
        CHECK(c.rho1(z)[1] == doctest::Approx((c.rho1(z + e)[0] - c.rho1(z - e)[0]) / (2 * e)).epsilon(1e-6));
        CHECK(c.rho1(z)[2] == doctest::Approx((c.rho1(z + e)[1] - c.rho1(z - e)[1]) / (2 * e)).epsilon(1e-6));
    }
}

TEST_CASE("exponential correctors cancel the wall trace and stay inside the cutoff") {
    for (int sign : {1, -1}) {
        const auto s = make_ideal_state(IdealKind::elsasser_steady, sign, {"one_plus_half_cos", 1}, {}, 0.6, 1.0);
        const CorrectorSet cs = build_correctors(s, {1e-3, 2e-3, 1.0, CorrectorMode::exact_exponential},
                                                 make_cutoffs(1.0));
        for (double x : {0.0, 0.7, 2.9, 5.5}) {
            const IdealValue lo = eval_ideal(s, x, 0.0, 0), hi = eval_ideal(s, x, 1.0, 0);
            CHECK(std::abs(cs.u(x, 0.0, 0).v1 + lo.u0[0]) <= 1e-12);
            CHECK(std::abs(cs.u(x, 1.0, 0).v1 + hi.u0[0]) <= 1e-12);
            CHECK(std::abs(cs.b(x, 0.0, 0).v1 + lo.b0[0]) <= 1e-12);
            CHECK(std::abs(cs.b(x, 1.0, 0).v1 + hi.b0[0]) <= 1e-12);
            CHECK(cs.u(x, 0.0, 0).v3 == 0.0);
            CHECK(cs.b(x, 1.0, 0).v3 == 0.0);
            for (double z : {0.25, 0.4, 0.6, 0.75}) {
                CHECK(cs.piece(LayerPiece::u_plus, x, z, 0).v1 == 0.0);
                CHECK(cs.piece(LayerPiece::u_minus, x, 1 - z, 0).v1 == 0.0);
                CHECK(cs.piece(LayerPiece::b_plus, x, z, 0).v3 == 0.0);
            }
        }
    }
}

TEST_CASE("corrector divergence refines at second order") {
    const auto s = make_ideal_state(IdealKind::elsasser_steady, 1, {"sin", 1}, {}, 0.8, 1.0);
    const CorrectorSet cs = build_correctors(s, {1e-2, 1e-2, 1.0, CorrectorMode::exact_exponential},
                                             make_cutoffs(1.0));
    for (LayerPiece p : {LayerPiece::u_plus, LayerPiece::u_minus, LayerPiece::b_plus, LayerPiece::b_minus}) {
        std::vector<double> h, e;
        for (int n : {128, 256, 512}) {
            auto g = build_grid(n, n + 1, 1.0, 1.0);
            h.push_back(1.0 / n);
            e.push_back(max_abs(divergence(cs.sample_piece(p, g, 0))));
        }
        CHECK(testsupport::loglog_slope(h, e) == doctest::Approx(2.0).epsilon(0.1));
    }
    // analytic jets: d1x + d3z vanishes pointwise
    testsupport::Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const FieldJet j = cs.u(rng.uniform(0, 2 * pi), rng.uniform(0, 1), 0);
        CHECK(std::abs(j.d1x + j.d3z) < 1e-12);
    }
}

TEST_CASE("erfc corrector profile") {
    const double oracle = 2 / std::sqrt(pi) * simpson([](double t) { return std::exp(-t * t); }, 1.0, 8.0);
    CHECK(oracle == doctest::Approx(0.15730).epsilon(1e-4 / 0.1573));
    const double nu = 1e-3, t = 0.5, shift = 1.0;
    const CorrectorSet cs = shear_set(nu, 1.0, CorrectorMode::prandtl_heat);
    const double z = 2 * std::sqrt(nu * (t + shift));
    CHECK(-cs.piece(LayerPiece::u_plus, 0.3, z, t).v1 == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(cs.u(0.3, 0.0, t).v1 == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK_THROWS_AS(
        build_correctors(make_ideal_state(IdealKind::elsasser_steady, 1, {"constant", 1}, {}, 0.5, 1.0),
                         {nu, nu, 1.0, CorrectorMode::prandtl_heat}, make_cutoffs(1.0)),
        PreconditionError);
}

TEST_CASE("prandtl residual refines at second order") {
    const CorrectorSet cs = shear_set(1e-2, 1.5, CorrectorMode::prandtl_heat);
    std::vector<double> h, r;
    for (int n : {33, 65, 129, 257}) {
        h.push_back(1.0 / (n - 1));
        r.push_back(prandtl_residual(cs, 1e-2, build_grid(8, n, 1.0, 0.0), 0.2));
    }
    CHECK(testsupport::loglog_slope(h, r) == doctest::Approx(2.0).epsilon(0.1));
    CHECK_THROWS_AS(prandtl_residual(shear_set(1e-2, 1.0), 1e-2, build_grid(8, 33, 1.0, 0.0), 0.0),
                    PreconditionError);
}

TEST_CASE("elsasser states get identical velocity and magnetic layers") {
    for (int sign : {1, -1}) {
        const auto s = make_ideal_state(IdealKind::elsasser_steady, sign, {"linear", 0.5}, {}, 0.4, 1.0);
        const CorrectorSet cs = build_correctors(s, {3e-3, 3e-3, 1.0, CorrectorMode::exact_exponential},
                                                 make_cutoffs(1.0));
        testsupport::Rng rng(9);
        for (int i = 0; i < 100; ++i) {
            const double x = rng.uniform(0, 2 * pi), z = rng.uniform(0, 1);
            const FieldJet u = cs.u(x, z, 0), b = cs.b(x, z, 0);
            CHECK(std::abs(b.v1 - sign * u.v1) <= 1e-14);
            CHECK(std::abs(b.v3 - sign * u.v3) <= 1e-14);
        }
    }
}

TEST_CASE("lemma31 norms match an independent quadrature") {
    const double a = 0.5;
    const auto s = make_ideal_state(IdealKind::elsasser_steady, 1, {"constant", 1}, {}, a, 1.0);
    for (double nu : {1e-2, 1e-3, 1e-4}) {
        const CorrectorSet cs = build_correctors(s, {nu, nu, 1.0, CorrectorMode::exact_exponential},
                                                 make_cutoffs(1.0));
        const Lemma31Report r = lemma31_norms(cs, layer_resolving_grid(32, 4097, 1.0, nu, 40), 0);
        CHECK(r.resolved);
        const double d = std::sqrt(nu);
        // lower-wall profile; the upper one is its mirror and the supports are disjoint
        auto P = [&](double z) { return std::exp(-z / d) * (cut(z, 1) - d * cut_d(z, 1)) + d * cut_d(z, 1); };
        auto Q = [&](double z) { return cut(z, 1) * (std::exp(-z / d) - 1); };
        auto dP = [&](double z) {
            const double e = 1e-7;
            return (P(z + e) - P(std::max(0.0, z - e))) / (z > e ? 2 * e : z + e);
        };
        // traces g = 1 +- a sin x, g_x = +-a cos x
        const double gg = 2 * pi + pi * a * a, gx2 = pi * a * a;
        auto two = [&](const std::function<double(double)>& f) { return 2 * simpson(f, 0, 0.25); };
        const double UB = std::sqrt((gg + gx2) * two([&](double z) { return P(z) * P(z); }));
        const double uB3 = std::sqrt(nu * gx2 * two([&](double z) { return Q(z) * Q(z); }));
        const double dzUB = std::sqrt(gg * two([&](double z) { return dP(z) * dP(z); }));
        const double zdzUB = std::sqrt(gg * two([&](double z) { return z * z * dP(z) * dP(z); }));
        CAPTURE(nu);
        CHECK(r.values.at("UB_l2") == doctest::Approx(UB).epsilon(2e-3));
        CHECK(r.values.at("uB3_l2") == doctest::Approx(uB3).epsilon(2e-3));
        CHECK(r.values.at("dzUB_l2") == doctest::Approx(dzUB).epsilon(2e-3));
        CHECK(r.values.at("z_dzUB_l2") == doctest::Approx(zdzUB).epsilon(2e-3));
        CHECK(r.values.at("BB_l2") == r.values.at("UB_l2"));
        CHECK(r.values.at("uB_linf") == doctest::Approx(1 + a).epsilon(1e-6));
    }
}

TEST_CASE("lemma31 flags under-resolved layers and zeros for well-prepared data") {
    const CorrectorSet cs = shear_set(1e-6, 1.0);
    CHECK_FALSE(lemma31_norms(cs, build_grid(8, 33, 1.0, 0.0), 0).resolved);
    const auto wp = make_ideal_state(IdealKind::well_prepared, 1, {"sin", 1}, {}, 0.5, 1.0);
    const CorrectorSet z = build_correctors(wp, {1e-3, 1e-3, 1.0, CorrectorMode::exact_exponential},
                                            make_cutoffs(1.0));
    for (const auto& [k, v] : lemma31_norms(z, build_grid(16, 129, 1.0, 2.0), 0).values) {
        CAPTURE(k);
        CHECK(v == 0.0);
    }
}

TEST_CASE("layer_resolving_grid") {
    for (double nu : {1e-2, 1e-4, 1e-6}) {
        auto g = layer_resolving_grid(8, 513, 1.0, nu, 8);
        int inside = 0;
        for (int k = 1; k < g->nz; ++k)
            if (g->z[k] <= std::sqrt(nu)) ++inside;
        CHECK(inside >= 8);
    }
    CHECK_THROWS_AS(layer_resolving_grid(8, 9, 1.0, 1e-12, 8), ConfigError);
}

TEST_CASE("nu2_star") {
    CHECK(nu2_star_diffusion_limit(1e-2, 0.1, 0.0) == doctest::Approx(1e-3).epsilon(1e-14));
    CHECK(nu2_star_diffusion_limit(1e-2, 0.1, 0.5) == doctest::Approx(std::pow(1e-3, 1.5)).epsilon(1e-14));
    CHECK_THROWS_AS(nu2_star_diffusion_limit(1e-2, 0.1, 1.0), DomainError);
    CHECK_THROWS_AS(nu2_star_diffusion_limit(1e-2, 0.1, -0.1), DomainError);
    CHECK_THROWS_AS(nu2_star_diffusion_limit(0.0, 0.1, 0.0), DomainError);
    CHECK_THROWS_AS(nu2_star_diffusion_limit(1e-2, 0.0, 0.0), DomainError);
}

TEST_CASE("scaling_fit") {
    std::vector<std::pair<double, double>> s;
    for (double nu : {1e-2, 1e-3, 1e-4, 1e-5}) s.push_back({nu, 3.0 * std::pow(nu, 0.25)});
    const SlopeFit f = scaling_fit(s);
    CHECK(f.slope == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(1.0));
    CHECK(scaling_fit({{1e-2, 1.0}, {1e-4, 10.0}}).slope == doctest::Approx(-0.5));
    CHECK_THROWS_AS(scaling_fit({{1e-2, 1.0}}), PreconditionError);
    CHECK_THROWS_AS(scaling_fit({{1e-2, 1.0}, {1e-3, 2.0}}), PreconditionError);
    CHECK_THROWS_AS(scaling_fit({{1e-2, 1.0}, {1e-4, 0.0}}), DomainError);
}
