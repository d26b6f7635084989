#include <cmath>
#include <random>

#include "doctest.h"
#include "dma/embedding.hpp"
#include "dma/error.hpp"

using namespace dma;

namespace {

const char* kSphereE = "1 + u^2/(1 - u^2 - v^2)";
const char* kSphereF = "u*v/(1 - u^2 - v^2)";
const char* kSphereG = "1 + v^2/(1 - u^2 - v^2)";

MetricPatch sphere_patch(int n) {
    return MetricPatch::from_expressions(Grid::box(n, n, -0.5, 0.5, -0.5, 0.5), kSphereE, kSphereF, kSphereG);
}

GridField test_z(const Grid& g) {
    return GridField::sample(g, [](double u, double v) { return u * u / 2 + 0.1 * std::sin(u + 2 * v); });
}

}  // namespace

TEST_SUITE("embedding") {
    TEST_CASE("metric expressions: curvature and Christoffel symbols") {
        MetricSpec s = MetricSpec::parse(kSphereE, kSphereF, kSphereG);
        Expr K = s.curvature();
        for (double u : {-0.3, 0.0, 0.2})
            for (double v : {-0.1, 0.4}) CHECK(K.eval({u, v, 0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
        MetricSpec t = model_T1_metric(1.0);
        Expr Kt = t.curvature();
        for (double v : {-0.5, 0.3, 0.7}) {
            double h = 1 - std::pow(v, 5) / 20;
            CHECK(Kt.eval({0.1, v, 0, 0, 0}) == doctest::Approx(v * v * v / h).epsilon(1e-12));
        }
        // Symbolic Christoffel symbols against the grid version at interior nodes.
        MetricPatch m = sphere_patch(201);
        auto fd = christoffel_fields(m).gamma;
        auto ex = s.christoffel();
        const Grid& g = m.grid();
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (auto [a, b] : {std::pair{50, 60}, std::pair{100, 100}, std::pair{140, 30}})
                        CHECK(fd[i][j][k](a, b) ==
                              doctest::Approx(ex[i][j][k].eval({g.x(a), g.y(b), 0, 0, 0})).epsilon(1e-8).scale(1));
        CHECK_THROWS_AS(MetricSpec::parse("1 + q1", "0", "1"), Error);
    }

    TEST_CASE("embedding equation at w = 0 matches the closed form") {
        const double eps = 0.005;
        ScaledProblem sp = scale(embedding_problem(model_T1_metric(1.0), "v", 2), eps, 0.5, 0.5);
        Grid xg = Grid::box(21, 21, -0.5, 0.5, -0.5, 0.5);
        GridField P = phi(sp, GridField(xg));
        for (int j = 0; j < xg.ny; j += 4)
            for (int i = 0; i < xg.nx; i += 5) {
                double u = eps * eps * xg.x(i), v = eps * eps * xg.y(j);
                double h = 1 - std::pow(v, 5) / 20, hv = -std::pow(v, 4) / 4;
                double a12 = -hv / h * u;
                double expect = -a12 * a12 - (v * v * v / h) * (h * h - u * u);
                CHECK(P(i, j) == doctest::Approx(expect).epsilon(1e-10));
            }
    }

    TEST_CASE("reconstruct z and the chain rule") {
        const double eps = 0.1;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(1.0), eps, 0.5, 0.5);
        Grid xg = Grid::box(41, 41, -0.5, 0.5, -0.5, 0.5);
        GridField zero(xg);
        GridField z0 = reconstruct_z(zero, sp);
        for (int j = 0; j < xg.ny; j += 7)
            for (int i = 0; i < xg.nx; ++i) CHECK(z0(i, j) == 0.5 * z0.grid.x(i) * z0.grid.x(i));
        GridField w = GridField::sample(xg, [](double x, double y) { return x * x * y + 0.3 * y * y * y - x; });
        GridField z = reconstruct_z(w, sp);
        GridField zu = dx(z), wx = dx(w);
        double e3 = eps * eps * eps;
        for (int j = 0; j < xg.ny; ++j)
            for (int i = 0; i < xg.nx; ++i) {
                double expect = z.grid.x(i) + e3 * wx(i, j);
                CHECK(std::abs(zu(i, j) - expect) <= 1e-8 * std::abs(expect) + 1e-14);
            }
        // Resampling onto the patch nodes reproduces the node values.
        GridField zr = reconstruct_z(w, sp, patch_grid(xg, eps));
        CHECK((zr - z).max_abs() <= 1e-18);
        GridField huge = GridField::sample(xg, [](double x, double) { return 1e8 * x; });
        CHECK_THROWS_WITH_AS(reconstruct_z(huge, sp), doctest::Contains("gradient-too-large"), Error);
    }

    TEST_CASE("flatness residual against closed forms") {
        Grid g = Grid::box(101, 101, -0.5, 0.5, -0.5, 0.5);
        MetricPatch flat = MetricPatch::general(GridField(g, 1.0), GridField(g, 0.0), GridField(g, 1.0));
        CHECK(flatness_residual(flat, GridField(g)).max_abs() == 0.0);
        // Cylinder: ds^2 - dz^2 = (1 - u^2) du^2 + dv^2 is flat up to second-difference roundoff ~1e-16 / h^2.
        GridField cyl = GridField::sample(g, [](double u, double) { return u * u / 2; });
        CHECK(flatness_residual(flat, cyl).max_abs() <= 1e-9);
        // Paraboloid z = c (u^2 + v^2) / 2: K = -c^2 / (1 - c^2 r^2)^2.
        const double c = 0.5;
        GridField par = GridField::sample(g, [&](double u, double v) { return c * (u * u + v * v) / 2; });
        GridField K = flatness_residual(flat, par);
        for (int j = 5; j < g.ny - 5; j += 9)
            for (int i = 5; i < g.nx - 5; i += 9) {
                double r2 = g.x(i) * g.x(i) + g.y(j) * g.y(j);
                CHECK(K(i, j) == doctest::Approx(-c * c / std::pow(1 - c * c * r2, 2)).epsilon(1e-6));
            }
        GridField steep = GridField::sample(g, [](double u, double) { return 2 * u * u; });
        CHECK_THROWS_WITH_AS(flatness_residual(flat, steep), doctest::Contains("signature"), Error);
    }

    TEST_CASE("flat coordinates") {
        Grid g = Grid::box(81, 61, -0.5, 0.5, -0.3, 0.3);
        MetricPatch id = MetricPatch::general(GridField(g, 1.0), GridField(g, 0.0), GridField(g, 1.0));
        FlatCoordinates fc = flat_coordinates(id);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                CHECK(std::abs(fc.x(i, j) - g.x(i)) <= 1e-13);
                CHECK(std::abs(fc.y(i, j) - g.y(j)) <= 1e-13);
            }
        // Polar metric du^2 + u^2 dv^2 away from the pole, integrated from (1, 0).
        Grid p = Grid::box(101, 101, 1.0, 2.0, -0.5, 0.5);
        MetricPatch polar = MetricPatch::general(GridField(p, 1.0), GridField(p, 0.0),
                                                 GridField::sample(p, [](double u, double) { return u * u; }));
        FlatCoordinates pc = flat_coordinates(polar);
        double err = 0;
        for (int j = 0; j < p.ny; ++j)
            for (int i = 0; i < p.nx; ++i) {
                double u = p.x(i), v = p.y(j);
                err = std::max({err, std::abs(pc.x(i, j) - (u * std::cos(v) - 1)), std::abs(pc.y(i, j) - u * std::sin(v))});
            }
        CHECK(err <= 1e-6);
        CHECK(pc.holonomy <= 1e-8);
        CHECK(pc.closure <= 1e-8);
        // Curved metrics carry holonomy.
        CHECK_THROWS_WITH_AS(flat_coordinates(sphere_patch(65)), doctest::Contains("not-flat-enough"), Error);
    }

    TEST_CASE("isometry residual of known embeddings") {
        Grid g = Grid::box(201, 201, -0.5, 0.5, -0.5, 0.5);
        MetricPatch flat = MetricPatch::general(GridField(g, 1.0), GridField(g, 0.0), GridField(g, 1.0));
        GridField u = GridField::sample(g, [](double a, double) { return a; });
        GridField v = GridField::sample(g, [](double, double b) { return b; });
        IsometryReport plane = isometry_residual(flat, u, v, GridField(g));
        CHECK(plane.relative <= 1e-12);
        GridField cx = map(u, [](double a) { return std::cos(a); }), cy = map(u, [](double a) { return std::sin(a); });
        IsometryReport cyl = isometry_residual(flat, cx, cy, v);
        CHECK(cyl.relative <= 1e-8);
        CHECK(cyl.to_json()["max_abs"]["E"].get<double>() <= 1e-8);
        Block inner = half_block(g);
        CHECK(inner.i0 == 50);
        CHECK(inner.nx == 101);
    }

    TEST_CASE("embedding of the T1 metric at w = 0") {
        const double eps = 0.005;
        MetricSpec ms = model_T1_metric(1.0);
        ScaledProblem sp = scale(embedding_problem(ms, "v", 2), eps, 0.5, 0.5);
        Grid xg = Grid::box(65, 65, -0.5, 0.5, -0.5, 0.5);
        EmbeddingResult r = embed(sp, ms, GridField(xg));
        CHECK(r.isometry.relative <= 1e-10);
        CHECK(r.holonomy <= 1e-12);
        CHECK(r.gradient_max == doctest::Approx(eps * eps * 0.5).epsilon(1e-9));
        CHECK(r.conditioning_factor == doctest::Approx(1.0).epsilon(0.05));
        CHECK(r.flatness_bound == doctest::Approx(r.conditioning_factor * r.ma_residual));
        CHECK(r.csv().find("u,v,x,y,z\n") == 0);
        std::string mesh = r.mesh();
        CHECK(std::count(mesh.begin(), mesh.end(), 'f') == 2 * 64 * 64);
        CHECK(r.to_json().contains("conditioning_factor"));
    }

    TEST_CASE("prescribed curvature: flat case and regime") {
        Schedule s = Schedule::practical(0.005, 2);
        PrescribedCurvatureResult r = prescribed_curvature("0", "v", 2, s);
        CHECK(r.curvature.max_abs() <= 1e-8);
        CHECK(r.run.converged);
        CHECK_THROWS_WITH_AS(prescribed_curvature("v^4", "v", 3, s), doctest::Contains("regime"), Error);
        CHECK_THROWS_WITH_AS(scale(MAProblemSpec::parse("0", "0", "0", "1", "v^4", "v", 3), 0.01, 0.5, 0.5),
                             doctest::Contains("regime"), Error);
    }

    TEST_CASE("prescribed curvature K = v^3 end to end") {
        Schedule s = Schedule::practical(0.005, 2);
        PrescribedCurvatureResult r = prescribed_curvature("v^3", "v", 2, s);
        CHECK(r.run.accepted());
        CHECK(r.relative_error <= 1e-2);
        CHECK(r.sign_agreement >= 0.99);
    }

    TEST_CASE("covariant identities") {
        Grid g = Grid::box(33, 33, -0.5, 0.5, -0.5, 0.5);
        MetricPatch flat = MetricPatch::general(GridField(g, 1.0), GridField(g, 0.0), GridField(g, 1.0));
        CovariantLinearization c = covariant_identity_check(flat, test_z(g));
        for (int i = 0; i < 2; ++i) CHECK(c.omega[i].max_abs() == 0.0);
        CHECK(c.symmetry_error == 0.0);

        CovariantOptions o;
        o.eps = 0.1;
        CovariantLinearization s1 = covariant_identity_check(sphere_patch(128), test_z(sphere_patch(128).grid()), o);
        CovariantLinearization s2 = covariant_identity_check(sphere_patch(256), test_z(sphere_patch(256).grid()), o);
        CHECK(s2.omega_error <= 1e-4);
        CHECK(s1.omega_error / s2.omega_error >= 8);
        CHECK(s2.divergence_error <= 1e-4);
        CHECK(s1.divergence_error / s2.divergence_error >= 8);

        // Random analytic metric: grid fields against symbolic evaluation at random nodes.
        const char *E = "1 + u^2*v + sin(v)/3", *F = "u*v/5 + cos(u)/7", *G = "2 + v^2 + u^3/4";
        MetricSpec ms = MetricSpec::parse(E, F, G);
        Grid rg = Grid::box(201, 201, -0.5, 0.5, -0.5, 0.5);
        MetricPatch rm = MetricPatch::from_expressions(rg, E, F, G);
        CovariantOptions one;
        CovariantLinearization rc = covariant_identity_check(rm, test_z(rg), one);
        auto gam = ms.christoffel();
        Expr K = ms.curvature();
        std::mt19937 rng(7);
        std::uniform_int_distribution<int> pick(10, 190);
        for (int t = 0; t < 10; ++t) {
            int i = pick(rng), j = pick(rng);
            double at[5] = {rg.x(i), rg.y(j), 0, 0, 0};
            for (int a = 0; a < 2; ++a) {
                Expr om = gam[a][0][1].diff(1) - gam[a][1][1].diff(0);
                for (int b = 0; b < 2; ++b) om = om + gam[b][0][1] * gam[a][b][1] - gam[b][1][1] * gam[a][b][0];
                CHECK(rc.omega[a](i, j) == doctest::Approx(om.eval(at)).epsilon(1e-6).scale(1));
            }
            double Gv = ms.G.eval(at), Fv = ms.F.eval(at), Kv = K.eval(at);
            CHECK(rc.curvature_term[0](i, j) == doctest::Approx(-Gv * Kv).epsilon(1e-6).scale(1));
            CHECK(rc.curvature_term[1](i, j) == doctest::Approx(Fv * Kv).epsilon(1e-6).scale(1));
        }
        CHECK(rc.omega_error <= 1e-6);
        CHECK(rc.divergence_error <= 1e-6);

        CovariantOptions strict;
        strict.bound = 1e-14;
        CHECK_THROWS_WITH_AS(covariant_identity_check(sphere_patch(32), test_z(sphere_patch(32).grid()), strict),
                             doctest::Contains("identity-violation"), Error);
    }
}
