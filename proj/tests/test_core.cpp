#include <cmath>
#include <random>

#include "doctest.h"
#include "dma/error.hpp"
#include "dma/expr.hpp"
#include "dma/grid.hpp"

using namespace dma;

TEST_SUITE("grid") {
    TEST_CASE("fourth order stencils are exact on quartics including boundary nodes") {
        Grid g = Grid::box(11, 9, -1, 2, 0, 1.5);
        auto p = [](double x, double y) { return 1 + x - 2 * x * x * y + 0.5 * std::pow(x, 4) + std::pow(y, 4) - x * y * y * y; };
        GridField f = GridField::sample(g, p);
        GridField fx = dx(f), fyy = dyy(f), fxy = dxy(f);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double x = g.x(i), y = g.y(j);
                CHECK(fx(i, j) == doctest::Approx(1 - 4 * x * y + 2 * x * x * x - y * y * y).epsilon(1e-10));
                CHECK(fyy(i, j) == doctest::Approx(12 * y * y - 6 * x * y).epsilon(1e-9));
                CHECK(fxy(i, j) == doctest::Approx(-4 * x - 3 * y * y).epsilon(1e-9));
            }
    }

    TEST_CASE("second derivative converges at fourth order") {
        double err[2];
        for (int r = 0; r < 2; ++r) {
            int n = 41 * (r + 1) - r;
            Grid g = Grid::box(n, 7, 0, 2, 0, 1);
            GridField f = GridField::sample(g, [](double x, double) { return std::sin(3 * x); });
            GridField d = dxx(f);
            double e = 0;
            for (int i = 0; i < n; ++i) e = std::max(e, std::abs(d(i, 3) + 9 * std::sin(3 * g.x(i))));
            err[r] = e;
        }
        CHECK(err[0] / err[1] > 12);
    }

    TEST_CASE("periodic derivative of a trigonometric polynomial") {
        Grid g{64, 5, 0, 2 * M_PI, 0, 1, true};
        GridField f = GridField::sample(g, [](double x, double) { return std::cos(2 * x); });
        GridField d = dx(f);
        for (int i = 0; i < g.nx; ++i) CHECK(d(i, 2) == doctest::Approx(-2 * std::sin(2 * g.x(i))).epsilon(1e-4));
    }

    TEST_CASE("interpolation reproduces quintics and wraps periodically") {
        Grid g = Grid::box(12, 10, -1, 1, -2, 2);
        auto p = [](double x, double y) { return std::pow(x, 5) - x * x * y * y * y + 3 * y - 1; };
        GridField f = GridField::sample(g, p);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> ux(-1, 1), uy(-2, 2);
        for (int k = 0; k < 20; ++k) {
            double x = ux(rng), y = uy(rng);
            CHECK(interp2(f, x, y) == doctest::Approx(p(x, y)).epsilon(1e-11));
        }
        Grid gp{32, 6, 0, 1, 0, 1, true};
        GridField s = GridField::sample(gp, [](double x, double) { return std::sin(2 * M_PI * x); });
        CHECK(interp2(s, 0.99, 0.3) == doctest::Approx(std::sin(2 * M_PI * 0.99)).epsilon(1e-6));
    }

    TEST_CASE("restrict and insert round trip") {
        Grid g = Grid::box(9, 8, 0, 1, 0, 1);
        GridField f = GridField::sample(g, [](double x, double y) { return x + 10 * y; });
        GridField b = restrict_block(f, 2, 3, 4, 3);
        CHECK(b.grid.x0 == doctest::Approx(g.x(2)));
        CHECK(b(1, 1) == f(3, 4));
        GridField z(g);
        insert_block(z, b, 2, 3);
        CHECK(z(5, 5) == f(5, 5));
        CHECK(z(0, 0) == 0);
    }
}

TEST_SUITE("expr") {
    TEST_CASE("parse and evaluate with precedence and constants") {
        Expr e = Expr::parse("2*u^2 - v/4 + k0*sin(u)^2 - -3", {"u", "v"}, {{"k0", 0.5}});
        double u = 0.7, v = -1.3;
        CHECK(e.eval({u, v}) == doctest::Approx(2 * u * u - v / 4 + 0.5 * std::sin(u) * std::sin(u) + 3));
        CHECK(Expr::parse("-2^2", {}).eval(nullptr) == doctest::Approx(-4));
        CHECK(Expr::parse("2^3^2", {}).eval(nullptr) == doctest::Approx(512));
    }

    TEST_CASE("symbolic derivative matches central differences") {
        Expr e = Expr::parse("exp(u*v)*cos(u) + log(1+v^2) + sqrt(2+u) - tanh(v)/(1+u^2) + u^v", {"u", "v"});
        double u = 0.4, v = 0.9, h = 1e-5;
        for (int k = 0; k < 2; ++k) {
            double a[2] = {u, v}, b[2] = {u, v};
            a[k] += h;
            b[k] -= h;
            double fd = (e.eval(a) - e.eval(b)) / (2 * h);
            CHECK(e.diff(k).eval({u, v}) == doctest::Approx(fd).epsilon(1e-8));
        }
        CHECK(Expr::parse("3*u + 2", {"u", "v"}).diff("v").is_zero());
        CHECK(Expr::parse("u^3", {"u"}).diff(0).diff(0).diff(0).eval({5.0}) == doctest::Approx(6));
    }

    TEST_CASE("malformed input reports a parse error") {
        CHECK_THROWS_AS(Expr::parse("u +* v", {"u", "v"}), Error);
        CHECK_THROWS_AS(Expr::parse("w", {"u", "v"}), Error);
        CHECK_THROWS_AS(Expr::parse("sin(u", {"u"}), Error);
    }
}
