#include <doctest.h>

#include <cmath>

#include "mhdlayer/core_fields.hpp"
#include "mhdlayer/errors.hpp"
#include "support.hpp"

using namespace mhdlayer;
using testsupport::pi;

TEST_CASE("build_grid uniform partitions") {
    auto g = build_grid(8, 5, 1.0, 0.0);
    const double want[] = {0, 0.25, 0.5, 0.75, 1.0};
    for (int k = 0; k < 5; ++k) CHECK(g->z[k] == doctest::Approx(want[k]).epsilon(1e-15));
    auto g2 = build_grid(8, 5, 2.0, 0.0);
    for (int k = 0; k < 5; ++k) CHECK(g2->z[k] == doctest::Approx(2 * want[k]).epsilon(1e-15));
    CHECK(g->dx == doctest::Approx(2 * pi / 8));
}

TEST_CASE("build_grid stretched invariants") {
    auto g = build_grid(64, 129, 1.0, 2.0);
    CHECK(g->z.front() == 0.0);
    CHECK(g->z.back() == 1.0);
    for (int k = 1; k < g->nz; ++k) CHECK(g->z[k] > g->z[k - 1]);
    CHECK(g->z[1] - g->z[0] < 1.0 / 128);
    CHECK(g->z[128] - g->z[127] < 1.0 / 128);
    double s = 0;
    for (double w : g->wz) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("build_grid rejects bad dimensions naming the field") {
    auto msg = [](auto f) {
        try {
            f();
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(msg([] { build_grid(3, 9, 1, 0); }).find("nx") != std::string::npos);
    CHECK(msg([] { build_grid(7, 9, 1, 0); }).find("nx") != std::string::npos);
    CHECK(msg([] { build_grid(8, 4, 1, 0); }).find("nz") != std::string::npos);
    CHECK(msg([] { build_grid(8, 9, 0, 0); }).find("h") != std::string::npos);
    CHECK(msg([] { build_grid(8, 9, 1, -1); }).find("stretch") != std::string::npos);
}

namespace {

double div_error(int n, double stretch) {
    auto g = build_grid(n, n + 1, 1.0, stretch);
    VectorField v(g);
    v.f1 = sample(g, [](double x, double z) { return std::cos(x) * z; });
    v.f3 = sample(g, [](double x, double z) { return std::sin(x) * z * z; });
    const ScalarField d = divergence(v);
    double e = 0;
    for (int k = 0; k < g->nz; ++k)
        for (int j = 0; j < g->nx; ++j) {
            const double x = g->x(j), z = g->z[k];
            e = std::max(e, std::abs(d(j, k) - (-std::sin(x) * z + 2 * std::sin(x) * z)));
        }
    return e;
}

double lap_error(int n, double stretch) {
    auto g = build_grid(n, n + 1, 1.0, stretch);
    const ScalarField f = sample(g, [](double x, double z) { return std::sin(x) * std::sin(pi * z); });
    const ScalarField L = laplacian(f);
    double e = 0;
    for (int k = 1; k < g->nz - 1; ++k)
        for (int j = 0; j < g->nx; ++j) e = std::max(e, std::abs(L(j, k) + (1 + pi * pi) * f(j, k)));
    return e;
}

double grad_error(int n, double stretch) {
    auto g = build_grid(n, n + 1, 1.0, stretch);
    const ScalarField f = sample(g, [](double x, double z) { return std::cos(2 * x) * std::exp(z); });
    const VectorField G = gradient(f);
    double e = 0;
    for (int k = 0; k < g->nz; ++k)
        for (int j = 0; j < g->nx; ++j) {
            const double x = g->x(j), z = g->z[k];
            e = std::max(e, std::abs(G.f1(j, k) + 2 * std::sin(2 * x) * std::exp(z)));
            e = std::max(e, std::abs(G.f3(j, k) - std::cos(2 * x) * std::exp(z)));
        }
    return e;
}

}  // namespace

TEST_CASE("operators refine at second order") {
    for (double st : {0.0, 1.5}) {
        std::vector<double> h, ed, el, eg;
        for (int n : {16, 32, 64, 128}) {
            h.push_back(1.0 / n);
            ed.push_back(div_error(n, st));
            el.push_back(lap_error(n, st));
            eg.push_back(grad_error(n, st));
        }
        CAPTURE(st);
        CHECK(testsupport::loglog_slope(h, ed) == doctest::Approx(2.0).epsilon(0.1));
        CHECK(testsupport::loglog_slope(h, el) == doctest::Approx(2.0).epsilon(0.1));
        CHECK(testsupport::loglog_slope(h, eg) == doctest::Approx(2.0).epsilon(0.1));
    }
}

TEST_CASE("exactness on simple fields") {
    auto g = build_grid(16, 33, 1.0, 2.0);
    const ScalarField z2 = sample(g, [](double, double z) { return z * z; });
    const ScalarField L = laplacian(z2);
    for (int k = 1; k < g->nz - 1; ++k) CHECK(L(3, k) == doctest::Approx(2.0).epsilon(1e-9));
    const VectorField G = gradient(ScalarField(g, 3.0));
    CHECK(max_abs(G.f1) == 0.0);
    CHECK(max_abs(G.f3) < 1e-12);
    CHECK(max_abs(divergence(VectorField(g))) == 0.0);
}

TEST_CASE("stream-function fields are discretely divergence free") {
    testsupport::Rng rng(7);
    for (int c = 0; c < 10; ++c) {
        auto g = build_grid(2 * rng.integer(4, 24), rng.integer(9, 80), rng.uniform(0.5, 2.0), rng.uniform(0, 3));
        ScalarField psi(g);
        for (int k = 1; k < g->nz - 1; ++k)
            for (int j = 0; j < g->nx; ++j) psi(j, k) = rng.uniform(-1, 1);
        const VectorField v = curl_of_stream(psi);
        CHECK(max_abs(divergence(v)) <= 1e-11 * std::max(1.0, max_abs(v.f1) + max_abs(v.f3)) * g->nz);
    }
}

TEST_CASE("norms of closed-form fields") {
    auto g = build_grid(64, 129, 1.0, 0.0);
    CHECK(norms(ScalarField(g, 1.0)).l2 == doctest::Approx(std::sqrt(2 * pi)).epsilon(1e-13));
    const ScalarField s = sample(g, [](double x, double) { return std::sin(x); });
    CHECK(norms(s).l2 == doctest::Approx(std::sqrt(pi)).epsilon(1e-13));
    const NormSet z = norms(ScalarField(g));
    CHECK(z.l2 == 0.0);
    CHECK(z.linf == 0.0);
    CHECK(z.l2_dz == 0.0);
    CHECK(z.l2_z_weighted == 0.0);
    CHECK(z.linf_z2_weighted == 0.0);
}

TEST_CASE("norms are positively homogeneous") {
    testsupport::Rng rng(3);
    auto g = build_grid(16, 33, 1.0, 2.0);
    for (int c = 0; c < 20; ++c) {
        const double a = rng.uniform(-2, 2), b = rng.uniform(0.5, 3), cc = rng.uniform(0, 5);
        VectorField v(g);
        v.f1 = sample(g, [&](double x, double z) { return std::sin(a * z + x) + b * z * z; });
        v.f3 = sample(g, [&](double x, double z) { return std::cos(x) * std::sin(pi * z) * b; });
        const NormSet n0 = norms(v);
        const NormSet n1 = norms(cc * v);
        CHECK(n1.l2 == doctest::Approx(cc * n0.l2).epsilon(1e-13));
        CHECK(n1.linf == doctest::Approx(cc * n0.linf).epsilon(1e-13));
        CHECK(n1.l2_dz == doctest::Approx(cc * n0.l2_dz).epsilon(1e-13));
        CHECK(n1.l2_z_weighted == doctest::Approx(cc * n0.l2_z_weighted).epsilon(1e-13));
        CHECK(n1.linf_z2_weighted == doctest::Approx(cc * n0.linf_z2_weighted).epsilon(1e-13));
    }
}

TEST_CASE("hardy_ratio closed forms") {
    auto g = build_grid(8, 2049, 1.0, 0.0);
    CHECK(hardy_ratio(sample(g, [](double, double z) { return z; }), Wall::lower) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hardy_ratio(sample(g, [](double, double z) { return z * z; }), Wall::lower) ==
          doctest::Approx(0.5).epsilon(1e-5));
    CHECK(hardy_ratio(sample(g, [](double, double z) { return 1.0 - z; }), Wall::upper) ==
          doctest::Approx(1.0).epsilon(1e-9));

    // f = sin(pi z / 2): ||f/z||^2 = int_0^1 sin^2(pi z/2)/z^2, ||f'||^2 = pi^2/8
    auto fz = [](double z) {
        const double s = z == 0.0 ? pi / 2 : std::sin(pi * z / 2) / z;
        return s * s;
    };
    const int n = 200000;
    double q = 0.5 * (fz(0) + fz(1));
    for (int i = 1; i < n; ++i) q += fz(static_cast<double>(i) / n);
    q /= n;
    const double oracle = std::sqrt(q / (pi * pi / 8));
    const double r = hardy_ratio(sample(g, [](double, double z) { return std::sin(pi * z / 2); }), Wall::lower);
    CHECK(r == doctest::Approx(oracle).epsilon(1e-4));
    CHECK(r < 2.0);

    CHECK_THROWS_AS(hardy_ratio(ScalarField(g, 1.0), Wall::lower), PreconditionError);
}

TEST_CASE("hardy_ratio <= 2 on a 50-case zero-trace polynomial suite") {
    testsupport::Rng rng(2024);
    double worst = 0;
    for (int c = 0; c < 50; ++c) {
        const double h = rng.uniform(0.5, 2.0);
        auto g = build_grid(8, 1025, h, rng.uniform(0.0, 3.0));
        const int deg = rng.integer(1, 6);
        std::vector<double> a(deg + 1);
        for (auto& x : a) x = rng.uniform(-1, 1);
        a[0] = 0.0;
        const Wall w = rng.integer(0, 1) ? Wall::lower : Wall::upper;
        const ScalarField f = sample(g, [&](double x, double z) {
            const double d = w == Wall::lower ? z : h - z;
            double p = 0, dn = 1;
            for (int i = 0; i <= deg; ++i, dn *= d / h) p += a[i] * dn;
            return p * (1.0 + 0.3 * std::cos(x));
        });
        if (norms(f).l2 == 0.0) continue;
        const double r = hardy_ratio(f, w);
        worst = std::max(worst, r);
        CHECK(r <= 2.0);
    }
    MESSAGE("worst hardy ratio " << worst);
}
