#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dma/canonical.hpp"
#include "dma/error.hpp"

using namespace dma;

namespace {

const double kPi = std::acos(-1.0);

Grid periodic_grid(int nx, int ny, double half_x, double half_y) {
    Grid g;
    g.nx = nx;
    g.ny = ny;
    g.x0 = -half_x;
    g.x1 = half_x;
    g.y0 = -half_y;
    g.y1 = half_y;
    g.periodic_x = true;
    return g;
}

// Foot point at t = 0 of the characteristic of dx/dt = c(x, t) through (x, t).
template <class Speed>
double ode_foot(Speed c, double x, double t) {
    using namespace boost::numeric::odeint;
    std::vector<double> s{x};
    auto sys = [&](const std::vector<double>& q, std::vector<double>& dq, double tt) { dq[0] = c(q[0], tt); };
    integrate_adaptive(make_controlled<runge_kutta_dopri5<std::vector<double>>>(1e-13, 1e-13), sys, s, t, 0.0,
                       t > 0 ? -1e-3 : 1e-3);
    return s[0];
}

// Smooth periodic perturbation with compact support in y.
GridField bump_w(const Grid& g, double amp) {
    return GridField::sample(g, [&](double x, double y) {
        return amp * std::exp(-4 * y * y) * (std::sin(2 * kPi * x / (g.x1 - g.x0)) + 0.5 * std::cos(4 * kPi * x / (g.x1 - g.x0)));
    });
}

WJet exact_jet(const Expr& w, const Grid& g) {
    Expr wx = w.diff(0), wy = w.diff(1);
    auto s = [&](const Expr& e) { return GridField::sample(g, [&](double x, double y) { return e.eval({x, y}); }); };
    return WJet{s(w), s(wx), s(wy), s(wx.diff(0)), s(wx.diff(1)), s(wy.diff(1))};
}

}  // namespace

TEST_SUITE("canonical") {
    TEST_CASE("smoothstep is a C5 switch with exact integrals") {
        CHECK(smoothstep(0.0) == 0.0);
        CHECK(smoothstep(1.0) == 1.0);
        CHECK(smoothstep(0.5) == doctest::Approx(0.5).epsilon(1e-14));
        // Derivatives up to order 5 vanish like t^(6 - d) at both ends.
        for (int d = 1; d <= 5; ++d) {
            double t = 1e-3, bound = 5e5 * std::pow(t, 6 - d);
            CHECK(std::abs(smoothstep(t, d)) <= bound);
            CHECK(std::abs(smoothstep(1 - t, d)) <= bound);
        }
        CHECK(smoothstep_integral(1.0) == doctest::Approx(0.5).epsilon(1e-14));
        // Trapezoid oracle for the integrals.
        const int m = 20000;
        double i1 = 0, im = 0;
        for (int k = 0; k <= m; ++k) {
            double t = 0.7 * k / m, wt = (k == 0 || k == m) ? 0.5 : 1.0;
            i1 += wt * smoothstep(t);
            im += wt * t * smoothstep(t);
        }
        CHECK(smoothstep_integral(0.7) == doctest::Approx(i1 * 0.7 / m).epsilon(1e-8));
        CHECK(smoothstep_moment(0.7) == doctest::Approx(im * 0.7 / m).epsilon(1e-8));
        for (double t : {0.1, 0.35, 0.8}) {
            double h = 1e-5;
            CHECK(smoothstep(t, 1) == doctest::Approx((smoothstep(t + h) - smoothstep(t - h)) / (2 * h)).epsilon(1e-7));
        }
    }

    TEST_CASE("default cutoff kit passes its audit") {
        CutoffKit kit;
        CutoffAudit a = kit.audit();
        for (const auto& item : a.items) {
            INFO(item.name << " margin " << item.margin);
            CHECK(item.pass());
        }
        CHECK(kit.y(1) == doctest::Approx(1.15 * 0.5));
        CHECK(kit.y(6) == doctest::Approx(1.3 * 0.5));
        CHECK(kit.M3() < kit.M2());
        CHECK(kit.M3() >= 1.0);
        CHECK(kit.M1() * kit.M3() >= 1 - kit.min_a_second() / 2 - 1e-9);
        CHECK(a.to_json()["pass"] == true);
    }

    TEST_CASE("cutoff derivatives match finite differences") {
        CutoffKit kit;
        const double h = 1e-6;
        using Fn = Jet (CutoffKit::*)(double) const;
        Fn fns[] = {&CutoffKit::phi, &CutoffKit::psi1, &CutoffKit::psi2, &CutoffKit::psi3, &CutoffKit::a,
                    &CutoffKit::b};
        for (Fn f : fns)
            for (double y : {-1.2, -0.645, -0.6, -0.59, -0.3, -0.01, 0.2, 0.58, 0.6, 0.62, 0.64, 0.9}) {
                Jet j = (kit.*f)(y), jp = (kit.*f)(y + h), jm = (kit.*f)(y - h);
                double scale = 1 + std::abs(j.d1) + std::abs(j.d2);
                INFO("y = " << y << " d1 " << j.d1 << " d2 " << j.d2);
                CHECK(std::abs(j.d1 - (jp.v - jm.v) / (2 * h)) <= 1e-6 * scale);
                CHECK(std::abs(j.d2 - (jp.d1 - jm.d1) / (2 * h)) <= 1e-5 * scale);
            }
    }

    TEST_CASE("stationary characteristics give the identity map") {
        Grid g = periodic_grid(64, 65, 1.0, 1.0);
        CharMap m = solve_characteristics(GridField(g));
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                CHECK(std::abs(m.xi(i, j) - g.x(i)) <= 1e-14);
                CHECK(m.xi_x(i, j) == doctest::Approx(1.0).epsilon(1e-14));
                CHECK(m.xi_y(i, j) == 0.0);
            }
    }

    TEST_CASE("constant speed gives xi = x - c y") {
        Grid g = periodic_grid(64, 65, 1.0, 1.0);
        const double c = 0.07;
        CharMap m = solve_characteristics(GridField(g, c));
        double err = 0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                err = std::max(err, std::abs(m.xi(i, j) - (g.x(i) - c * g.y(j))));
                CHECK(m.xi_y(i, j) == doctest::Approx(-c).epsilon(1e-10));
            }
        CHECK(err <= 1e-10);
    }

    TEST_CASE("oscillating speed matches an adaptive ODE oracle") {
        Grid g = periodic_grid(128, 129, kPi, 1.0);
        auto c = [](double x, double t) { return 0.1 * std::sin(x + t); };
        GridField speed = GridField::sample(g, c);
        CharMap m = solve_characteristics(speed);
        double err = 0;
        for (int j = 0; j < g.ny; j += 4)
            for (int i = 0; i < g.nx; i += 4) err = std::max(err, std::abs(m.xi(i, j) - ode_foot(c, g.x(i), g.y(j))));
        CHECK(err <= 1e-8);
        CHECK(m.composition_error <= 1e-8);
        // Transport: xi_y + c xi_x = 0 and xi_x from the variational equation agrees with differencing.
        GridField shift_x = dx(m.xi_shift);
        for (int j = 10; j < g.ny - 10; j += 7)
            for (int i = 0; i < g.nx; i += 5) CHECK(std::abs(m.xi_x(i, j) - 1 - shift_x(i, j)) <= 1e-6);
        CHECK(m.xi_x.min() >= 0.5);
        CHECK(m.xi_x.max() <= 2.0);
    }

    TEST_CASE("characteristic errors") {
        Grid g = periodic_grid(64, 65, 1.0, 1.0);
        CHECK_THROWS_WITH_AS(solve_characteristics(GridField(g, 5.0)), doctest::Contains("eps-too-large"), Error);
        GridField compress = GridField::sample(g, [](double x, double) { return -0.3 * std::sin(kPi * x); });
        CharOptions opt;
        opt.min_jacobian = 0.9;
        CHECK_THROWS_WITH_AS(solve_characteristics(compress, opt), doctest::Contains("fold"), Error);
    }

    TEST_CASE("L3 of the model problem at w = 0") {
        double eps = 0.1, k0 = 1.5;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(k0), eps, 0.5, 0.5);
        Grid g = computational_grid(0.5, 0.5, 64, 65);
        GridField w(g);
        PhiEval pe = evaluate_phi(sp, WJet::of(w));
        LinearOperatorField L3 = reduce_to_L3(linearize(sp, w), pe, eps);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double y = g.y(j);
                CHECK(L3.a11(i, j) == doctest::Approx(std::pow(eps, 6) * y * y * y * k0).epsilon(1e-12).scale(1e-20));
                CHECK(L3.a12(i, j) == 0.0);
                CHECK(L3.a22(i, j) == 1.0);
            }
    }

    TEST_CASE("L3 reconstructs L1 and matches a closed-form oracle") {
        auto spec = MAProblemSpec::parse("v^2*(u+q1)", "0.5*v^2*q2", "v^2*p", "(1+q1^2+q2^2)^2", "v^3*(1+u^2)", "v", 2);
        const double eps = 0.3;
        ScaledProblem sp = scale(spec, eps, 0.5, 0.5);
        Grid g = Grid::box(17, 15, -0.5, 0.5, -0.5, 0.5);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> c(-1, 1);
        for (int trial = 0; trial < 3; ++trial) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%.5f*sin(1.3*x+%.5f)*cos(0.7*y) + %.5f*x^2*y + %.5f*y^3", c(rng), c(rng),
                          c(rng), c(rng));
            Expr w = Expr::parse(buf, {"x", "y"});
            WJet jet = exact_jet(w, g);
            PhiEval pe = evaluate_phi(sp, jet);
            LinearOperatorField L1 = linearize(sp, jet);
            LinearOperatorField L3 = reduce_to_L3(L1, pe, eps);
            const double e2 = eps * eps, e3 = e2 * eps;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    double x = g.x(i), y = g.y(j);
                    double u = e2 * x, v = e2 * y;
                    double wv = jet.w(i, j), wx = jet.wx(i, j), wy = jet.wy(i, j);
                    double p = e2 * e2 * x * x / 2 + e2 * e3 * wv, q1 = e2 * x + e3 * wx, q2 = e3 * wy;
                    double S = 1 + q1 * q1 + q2 * q2, K = v * v * v * (1 + u * u);
                    double m11 = 1 + eps * jet.wxx(i, j) + v * v * (u + q1);
                    double m12 = eps * jet.wxy(i, j) + 0.5 * v * v * q2;
                    double m22 = eps * jet.wyy(i, j) + v * v * p;
                    double KF = K * S * S;
                    double cp = m11 * v * v, cq1 = m22 * v * v - 4 * K * q1 * S, cq2 = -m12 * v * v - 4 * K * q2 * S;
                    double o[6] = {(m12 * m12 + KF) / (m11 * m11), -m12 / m11, 1.0, e2 * cq1 / m11, e2 * cq2 / m11,
                                   e2 * e2 * cp / m11};
                    const GridField* got[6] = {&L3.a11, &L3.a12, &L3.a22, &L3.a1, &L3.a2, &L3.a0};
                    for (int k = 0; k < 6; ++k)
                        CHECK(std::abs((*got[k])(i, j) - o[k]) <= 1e-9 * (1 + std::abs(o[k])));
                    // eps M11 L3 + eps Phi / M11 d_xx = L1.
                    double n = eps * pe.M11(i, j);
                    CHECK(std::abs(n * L3.a11(i, j) + eps * pe.Phi(i, j) / pe.M11(i, j) - L1.a11(i, j)) <=
                          1e-12 * (1 + std::abs(L1.a11(i, j))));
                    CHECK(std::abs(n * L3.a12(i, j) - L1.a12(i, j)) <= 1e-12 * (1 + std::abs(L1.a12(i, j))));
                    CHECK(std::abs(n * L3.a22(i, j) - L1.a22(i, j)) <= 1e-12);
                    CHECK(std::abs(n * L3.a1(i, j) - L1.a1(i, j)) <= 1e-12 * (1 + std::abs(L1.a1(i, j))));
                }
        }
    }

    TEST_CASE("reduction breaks down when 1 + eps Q is small") {
        ScaledProblem sp = scale(MAProblemSpec::model_T1(), 0.5, 0.5, 0.5);
        Grid g = Grid::box(21, 21, -0.5, 0.5, -0.5, 0.5);
        GridField w = GridField::sample(g, [](double x, double) { return -1.5 * x * x; });
        PhiEval pe = evaluate_phi(sp, WJet::of(w));
        CHECK_THROWS_WITH_AS(reduce_to_L3(linearize(sp, w), pe, 0.5), doctest::Contains("reduction-breakdown"), Error);
    }

    TEST_CASE("first transform: identity map and model factor") {
        double eps = 0.1, k0 = 2.0;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(k0), eps, 0.5, 0.5);
        Grid g = computational_grid(0.5, 0.5, 64, 65);
        GridField w(g);
        WJet jet = WJet::of(w);
        PhiEval pe = evaluate_phi(sp, jet);
        LinearOperatorField L3 = reduce_to_L3(linearize(sp, jet), pe, eps);
        CharMap m = solve_characteristics(L3.a12);
        GridField P11;
        LinearOperatorField L4 = transform_first(L3, m, sp, jet, pe, &P11);
        for (std::size_t k = 0; k < g.size(); ++k) {
            CHECK(P11.v[k] == doctest::Approx(k0).epsilon(1e-12));
            CHECK(L4.a11.v[k] == doctest::Approx(L3.a11.v[k]).epsilon(1e-12).scale(1e-20));
            CHECK(L4.a12.v[k] == 0.0);
            CHECK(L4.a22.v[k] == 1.0);
            CHECK(L4.a1.v[k] == L3.a1.v[k]);
            CHECK(L4.a2.v[k] == L3.a2.v[k]);
        }
        GridField removed = phi_bracket(pe, m);
        CHECK(removed.max_abs() <= 1e-15 * pe.Phi.max_abs());
    }

    TEST_CASE("removed bracket matches a closed-form oracle") {
        // w with x-independent w_xx and w_xy: M11 is constant, Phi is linear in x,
        // the first map is a pure shear and the stencils are exact.
        double eps = 0.2, k0 = 1.0;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(k0), eps, 0.5, 0.5);
        Grid g = Grid::box(41, 41, -1, 1, -1, 1);
        const double a = 0.3, b = -0.4, cc = 0.2, d = 0.1;
        GridField w = GridField::sample(g, [&](double x, double y) { return a * x * x + b * x * y * y + cc * y * y * y * y + d * x * y; });
        WJet jet = WJet::of(w);
        PhiEval pe = evaluate_phi(sp, jet);
        LinearOperatorField L3 = reduce_to_L3(linearize(sp, jet), pe, eps);
        CharOptions opt;
        opt.max_drift = 0.5;
        CharMap m = solve_characteristics(L3.a12, opt);
        GridField removed = phi_bracket(pe, m);
        double m11 = 1 + 2 * eps * a;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double phix = m11 * eps * 2 * b;
                double oracle = 2 * phix / (2 * m11 * m11);
                CHECK(removed(i, j) == doctest::Approx(oracle).epsilon(1e-9));
                CHECK(m.xi_x(i, j) == doctest::Approx(1.0).epsilon(1e-12));
            }
        LinearOperatorField L4 = transform_first(L3, m, sp, jet, pe);
        LinearOperatorField L5 = drop_phi_terms(L4, removed);
        for (std::size_t k = 0; k < g.size(); ++k) CHECK(L5.a1.v[k] + removed.v[k] == doctest::Approx(L4.a1.v[k]).epsilon(1e-14));
    }

    TEST_CASE("perturbed model problem: stage algebra and canonical structure") {
        double eps = 0.1;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(1.0), eps, 0.5, 0.5);
        Grid g = computational_grid(0.5, 0.5);
        GridField w = bump_w(g, 0.3);
        CanonicalForm cf = reduce(sp, w, CutoffKit());
        const CharMap& m = cf.first;
        double b12_3 = cf.L3.a12.max_abs();
        REQUIRE(b12_3 > 1e-4);
        CHECK(cf.L4.a12.max_abs() <= 1e-8 * b12_3);
        CHECK(cf.L7.a12.max_abs() <= 1e-8 * b12_3);
        for (double v : cf.L7.a22.v) CHECK(v == 1.0);
        CHECK(cf.second.P11.min() > 0);
        CHECK(m.xi_x.min() >= 0.5);
        CHECK(m.xi_x.max() <= 2.0);
        CHECK(m.composition_error <= 1e-8);
        CHECK(cf.first_report.factor_mismatch <= 1e-9);
        // L3 from L4 by inverting the chain rule.
        for (int j = 0; j < g.ny; j += 3)
            for (int i = 0; i < g.nx; i += 3) {
                double ex = m.xi_x(i, j), ey = m.xi_y(i, j), c = cf.L3.a12(i, j), a11 = cf.L3.a11(i, j);
                double b11 = (cf.L4.a11(i, j) - 2 * c * ex * ey - ey * ey) / (ex * ex);
                CHECK(std::abs(b11 - a11) <= 1e-9 * (std::abs(a11) + c * c + 1e-30));
                double b1 = (cf.L4.a1(i, j) - a11 * m.xi_xx(i, j) - 2 * c * m.xi_xy(i, j) - m.xi_yy(i, j) -
                             cf.L3.a2(i, j) * ey) /
                            ex;
                CHECK(std::abs(b1 - cf.L3.a1(i, j)) <= 1e-9 * (1 + std::abs(cf.L3.a1(i, j))));
            }
        for (std::size_t k = 0; k < g.size(); ++k) {
            CHECK(std::abs(cf.L5.a1.v[k] + cf.removed.v[k] - cf.L4.a1.v[k]) <= 1e-12 * (1 + std::abs(cf.L4.a1.v[k])));
            double d = cf.second.P22.v[k];
            CHECK(std::abs(cf.L7.a11.v[k] * d - cf.L6.a11.v[k]) <= 1e-12 * std::abs(cf.L6.a11.v[k]) + 1e-300);
            CHECK(std::abs(cf.L7.a1.v[k] * d - cf.L6.a1.v[k]) <= 1e-12 * (1 + std::abs(cf.L6.a1.v[k])));
        }
        // H = y: the second map is the identity.
        CHECK(cf.second.map.xi_shift.max_abs() <= 1e-10);
        for (std::size_t k = 0; k < g.size(); ++k) {
            CHECK(std::abs(cf.second.beta.v[k] - std::round(cf.second.beta.v[k] / g.hy()) * g.hy()) <= 1e-12);
            CHECK(cf.second.P22.v[k] == doctest::Approx(1.0).epsilon(1e-10));
        }
    }

    TEST_CASE("second transform: H = y keeps coordinates, tilted H is transported") {
        double eps = 0.1;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(1.0), eps, 0.5, 0.5);
        Grid g = computational_grid(0.5, 0.5, 64, 65);
        CanonicalForm cf = reduce(sp, GridField(g), CutoffKit());
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                CHECK(std::abs(cf.second.alpha(i, j) - g.x(i)) <= 1e-10);
                CHECK(std::abs(cf.second.beta(i, j) - g.y(j)) <= 1e-10);
                CHECK(cf.second.P22(i, j) == 1.0);
                CHECK(cf.L6.a11(i, j) == doctest::Approx(cf.L5.a11(i, j)).epsilon(1e-12).scale(1e-20));
                CHECK(std::abs(cf.second.resample.x_of(i, j) - g.x(i)) <= 1e-10);
                CHECK(std::abs(cf.second.resample.y_of(i, j) - g.y(j)) <= 1e-10);
                // L7 = eps^6 y^3 d_xx + d_yy.
                double y = g.y(j);
                CHECK(cf.L7.a11(i, j) == doctest::Approx(std::pow(eps, 6) * y * y * y).epsilon(1e-12).scale(1e-20));
                CHECK(std::abs(cf.L7.a1(i, j)) <= 1e-15);
                CHECK(cf.L7.a2(i, j) == 0.0);
                CHECK(cf.L7.a0(i, j) == 0.0);
            }

        auto tilted = MAProblemSpec::parse("0", "0", "0", "1", "(v+0.05*u)^3", "v+0.05*u", 2);
        ScaledProblem st = scale(tilted, eps, 0.5, 0.5);
        Grid g2 = computational_grid(0.5, 0.5);
        CanonicalForm ct = reduce(st, bump_w(g2, 0.2), CutoffKit());
        CHECK(ct.L6.a12.max_abs() <= 1e-8);
        CHECK(ct.second.report.b12_ratio <= 1e-8);
        CHECK(ct.second.P22.min() > 0.5);
        CHECK(ct.second.P11.min() > 0);
        CHECK(ct.second.resample.inverse_error <= 1e-8);
        CHECK(ct.second.map.composition_error <= 1e-8);
        for (std::size_t k = 0; k < g2.size(); ++k) {
            double x = g2.x(int(k % g2.nx)), y = g2.y(int(k / g2.nx));
            CHECK(ct.second.beta.v[k] == doctest::Approx(y + 0.05 * x).epsilon(1e-12).scale(1e-12));
        }
    }

    TEST_CASE("extension glues L7 to the constant far field") {
        double eps = 0.1;
        ScaledProblem sp = scale(MAProblemSpec::model_T1(1.0), eps, 0.5, 0.5);
        Grid g = computational_grid(0.5, 0.5, 128, 129);
        CutoffKit kit;
        CanonicalForm cf = reduce(sp, bump_w(g, 0.3), kit);
        const ExtendedOperator& e = cf.extended;
        GridField A = e.A(), D = e.D(), E = e.E(), F = e.F();
        double y2 = kit.y(2), y5 = kit.y(5), y6 = kit.y(6), dl = kit.delta();
        int inner = 0, upper = 0, lower = 0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double a = g.x(i), b = g.y(j);
                if (std::abs(b) <= y2 && std::abs(a) <= y5) {
                    ++inner;
                    CHECK(A(i, j) == e.Abar(i, j));
                    CHECK(D(i, j) == e.Dbar(i, j));
                    CHECK(E(i, j) == e.Ebar(i, j));
                    CHECK(F(i, j) == e.Fbar(i, j));
                }
                if (b >= y6) {
                    ++upper;
                    CHECK(A(i, j) == 1.0);
                    CHECK(D(i, j) == 0.0);
                    CHECK(E(i, j) == 0.0);
                    CHECK(F(i, j) == -kit.M1());
                }
                if (b <= -y6) {
                    ++lower;
                    CHECK(E(i, j) == doctest::Approx(-dl * b - dl * (y5 + y6) / 2).epsilon(1e-13));
                }
            }
        CHECK(inner > 0);
        CHECK(upper > 0);
        CHECK(lower > 0);
        // Closed-form derivatives agree with differencing where the fields are resolved.
        ExtendedOperator::Derivatives d = e.derivatives();
        GridField Ab = dy(A);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; i += 7)
                if (std::abs(g.y(j)) < kit.y(1) - 0.05) CHECK(std::abs(d.A_b(i, j) - Ab(i, j)) <= 1e-8);
    }

    TEST_CASE("computational grid places X on nodes") {
        Grid g = computational_grid(0.5, 0.5);
        Block b = inner_block(g, 0.5, 0.5);
        CHECK(g.x(b.i0) == doctest::Approx(-0.5).epsilon(1e-14));
        CHECK(g.x(b.i0 + b.nx - 1) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(g.y(b.j0) == doctest::Approx(-0.5).epsilon(1e-14));
        CHECK(g.y(b.j0 + b.ny - 1) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(g.x1 - g.x0 >= 4 * 1.3 * 0.5 * 0.98);
        CHECK(g.y1 >= 3 * 1.3 * 0.5);
    }
}
