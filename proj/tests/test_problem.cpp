#include <cmath>
#include <random>

#include "doctest.h"
#include "dma/error.hpp"
#include "dma/problem.hpp"

using namespace dma;

namespace {

// Problem assembled without the scale() checks, for degenerate test data.
ScaledProblem raw(const MAProblemSpec& s, double eps) {
    ScaledProblem sp;
    sp.spec = s;
    sp.eps = eps;
    return sp;
}

GridField random_smooth(const Grid& g, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> c(-1, 1);
    double a[6];
    for (double& x : a) x = c(rng);
    return GridField::sample(g, [&](double x, double y) {
        return amp * (a[0] * std::sin(1.3 * x + a[1]) * std::cos(0.7 * y) + a[2] * x * y + a[3] * std::exp(-x * x - a[4] * a[4] * y * y) +
                      a[5] * y * y);
    });
}

}  // namespace

TEST_SUITE("problem") {
    TEST_CASE("model problem factorizes as H = y, P = k0") {
        ScaledProblem sp = scale(MAProblemSpec::model_T1(2.5), 0.1, 0.5, 0.5);
        for (double x : {-0.4, 0.0, 0.3})
            for (double y : {-0.5, -0.1, 0.0, 0.2}) {
                CHECK(sp.H(x, y).H == doctest::Approx(y).epsilon(1e-14));
                CHECK(sp.P(x, y, 0, 0, 0) == doctest::Approx(2.5).epsilon(1e-10));
                for (int e = 0; e < 3; ++e) CHECK(sp.Pij(e, x, y, 0, 0, 0) == 0.0);
            }
        CHECK(sp.M2 == doctest::Approx(2.5));
        CHECK(sp.M1 == doctest::Approx(1.0));
    }

    TEST_CASE("factor of K = v^3 (1 + u^2) is 1 + eps^4 x^2 including on sigma") {
        auto spec = MAProblemSpec::parse("0", "0", "0", "1", "v^3*(1+u^2)", "v", 2);
        double eps = 0.3;
        ScaledProblem sp = scale(spec, eps, 0.5, 0.5);
        for (double x : {-0.5, -0.1, 0.45})
            for (double y : {-0.3, 0.0, 1e-12, 0.2})
                CHECK(std::abs(sp.P(x, y, 0, 0, 0) - (1 + std::pow(eps, 4) * x * x)) <= 1e-10);
    }

    TEST_CASE("factor of a11 = v^2 u is u and reconstructs a11") {
        auto spec = MAProblemSpec::parse("v^2*u", "0", "0", "1", "v^3", "v", 2);
        double eps = 0.4;
        ScaledProblem sp = scale(spec, eps, 0.5, 0.5);
        for (double x : {-0.3, 0.2})
            for (double y : {-0.2, 0.0, 0.4}) {
                double p11 = sp.Pij(0, x, y, 0, 0, 0);
                CHECK(p11 == doctest::Approx(eps * eps * x).epsilon(1e-9));
                double H = sp.H(x, y).H;
                NodeData d = sp.node(x, y, 0, 0, 0);
                CHECK(std::pow(eps, 4) * H * H * p11 == doctest::Approx(d.A11).epsilon(1e-9));
            }
    }

    TEST_CASE("K of the wrong order is rejected") {
        auto spec = MAProblemSpec::parse("0", "0", "0", "1", "v^2", "v", 2);
        CHECK_THROWS_AS(scale(spec, 0.1, 0.5, 0.5), Error);
        auto bad_a = MAProblemSpec::parse("v*u", "0", "0", "1", "v^3", "v", 2);
        CHECK_THROWS_AS(scale(bad_a, 0.1, 0.5, 0.5), Error);
        CHECK_THROWS_AS(scale(MAProblemSpec::model_T1(), 1.5, 0.5, 0.5), Error);
    }

    TEST_CASE("Phi at zero for the model problem") {
        double eps = 0.2, k0 = 1.7;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(k0), eps, 0.5, 0.5);
        Grid g = Grid::box(21, 17, -0.5, 0.5, -0.5, 0.5);
        GridField P = phi(sp, GridField(g));
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double y = g.y(j);
                CHECK(P(i, j) == doctest::Approx(-std::pow(eps, 6) * y * y * y * k0).epsilon(1e-13));
                // The unscaled residual det(D^2 z) - K f at z = u^2/2.
                double v = eps * eps * y;
                CHECK(P(i, j) == doctest::Approx(1.0 * 0.0 - k0 * v * v * v).epsilon(1e-13));
            }
    }

    TEST_CASE("constant Hessian without data terms") {
        auto spec = MAProblemSpec::parse("0", "0", "0", "1", "0", "v", 2);
        double eps = 0.3, c = 0.7, d = -1.1;
        ScaledProblem sp = raw(spec, eps);
        Grid g = Grid::box(11, 11, -0.5, 0.5, -0.5, 0.5);
        GridField w = GridField::sample(g, [&](double x, double y) { return c * x * x / 2 + d * y * y / 2 + 0.3 * x - y; });
        GridField P = phi(sp, w);
        for (double p : P.v) CHECK(p == doctest::Approx((1 + eps * c) * eps * d).epsilon(1e-12));
        LinearOperatorField L = linearize(sp, GridField(g));
        for (std::size_t k = 0; k < g.size(); ++k) {
            CHECK(L.a11.v[k] == 0.0);
            CHECK(L.a12.v[k] == 0.0);
            CHECK(L.a22.v[k] == eps);
            CHECK(L.a1.v[k] == 0.0);
            CHECK(L.a2.v[k] == 0.0);
            CHECK(L.a0.v[k] == 0.0);
        }
    }

    TEST_CASE("Phi of a polynomial matches symbolic evaluation") {
        double eps = 0.25, k0 = 1.3;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(k0), eps, 0.5, 0.5);
        std::vector<std::string> xy{"x", "y"};
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> c(-1, 1);
        for (int t = 0; t < 3; ++t) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%.6f*x^4 + %.6f*x^2*y^2 + %.6f*y^3*x + %.6f*y^4 + %.6f*x*y", c(rng), c(rng),
                          c(rng), c(rng), c(rng));
            Expr w = Expr::parse(buf, xy);
            Expr wxx = w.diff(0).diff(0), wyy = w.diff(1).diff(1), wxy = w.diff(0).diff(1);
            Grid g = Grid::box(15, 13, -0.5, 0.5, -0.5, 0.5);
            GridField wf = GridField::sample(g, [&](double x, double y) { return w.eval({x, y}); });
            GridField P = phi(sp, wf);
            double scale = P.max_abs();
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    double x = g.x(i), y = g.y(j);
                    double o = (1 + eps * wxx.eval({x, y})) * eps * wyy.eval({x, y}) -
                               std::pow(eps * wxy.eval({x, y}), 2) - std::pow(eps, 6) * y * y * y * k0;
                    CHECK(std::abs(P(i, j) - o) <= 1e-9 * scale);
                }
        }
    }

    TEST_CASE("Phi at zero satisfies the factor identity") {
        auto spec = MAProblemSpec::parse("v^2*(u+1)", "0.5*v^2*q1", "v^3*(2+q2)", "1+q1^2", "v^3*(1+u)", "v", 2);
        double eps = 0.3;
        ScaledProblem sp = scale(spec, eps, 0.5, 0.5);
        Grid g = Grid::box(11, 11, -0.5, 0.5, -0.5, 0.5);
        GridField P = phi(sp, GridField(g));
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double x = g.x(i), y = g.y(j);
                double H = sp.H(x, y).H, e2n = std::pow(eps, 4), Hn = H * H;
                double p11 = sp.Pij(0, x, y, 0, 0, 0), p12 = sp.Pij(1, x, y, 0, 0, 0), p22 = sp.Pij(2, x, y, 0, 0, 0);
                double o = -std::pow(eps, 6) * Hn * H * sp.P(x, y, 0, 0, 0) - std::pow(e2n * Hn * p12, 2) +
                           e2n * Hn * p22 * (1 + e2n * Hn * p11);
                CHECK(P(i, j) == doctest::Approx(o).epsilon(1e-12).scale(1e-18));
            }
    }

    TEST_CASE("linearization is exact to second order") {
        auto spec = MAProblemSpec::parse("v^2*(u+q1)", "0.5*v^2*q2", "v^2*p", "(1+q1^2+q2^2)^2", "v^3*(1+u^2)", "v", 2);
        double eps = 0.6;
        ScaledProblem sp = scale(spec, eps, 0.5, 0.5);
        Grid g = Grid::box(33, 33, -0.5, 0.5, -0.5, 0.5);
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 5; ++trial) {
            GridField w = random_smooth(g, rng, 1.0), v = random_smooth(g, rng, 1.0);
            GridField P0 = phi(sp, w), Lv = linearize(sp, w).apply(v);
            double r[2];
            double ts[2] = {1e-2, 1e-3};
            for (int k = 0; k < 2; ++k) {
                GridField rem = phi(sp, w + ts[k] * v) - P0 - ts[k] * Lv;
                r[k] = rem.max_abs();
            }
            double order = std::log(r[0] / r[1]) / std::log(10.0);
            CHECK(order >= 1.9);
        }
    }

    TEST_CASE("surrogate norm counts derivatives up to the given order") {
        Grid g = Grid::box(41, 41, -1, 1, -1, 1);
        GridField w = GridField::sample(g, [](double x, double y) { return std::sin(2 * x) * std::cos(y); });
        CHECK(c_surrogate_norm(w, 0) == doctest::Approx(w.max_abs()));
        CHECK(c_surrogate_norm(w, 4) == doctest::Approx(16.0).epsilon(1e-2));
    }
}
