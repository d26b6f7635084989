#include "dma/checks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dma/error.hpp"

namespace dma {

namespace {

const double kPi = std::acos(-1.0);

GridField random_smooth(const Grid& g, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> c(-1, 1);
    double a[6];
    for (double& x : a) x = c(rng);
    return GridField::sample(g, [&](double x, double y) {
        return amp * (a[0] * std::sin(1.3 * x + a[1]) * std::cos(0.7 * y) + a[2] * x * y +
                      a[3] * std::exp(-x * x - a[4] * a[4] * y * y) + a[5] * y * y);
    });
}

// Periodic in x with Gaussian decay in y, so the characteristics stay inside the computational grid.
GridField random_periodic(const Grid& g, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> c(0.5, 1.0), phase(0, 2 * kPi);
    double a1 = c(rng), a2 = 0.5 * c(rng), p1 = phase(rng), p2 = phase(rng);
    double L = g.x1 - g.x0;
    return GridField::sample(g, [&](double x, double y) {
        return amp * std::exp(-4 * y * y) * (a1 * std::sin(2 * kPi * x / L + p1) + a2 * std::cos(4 * kPi * x / L + p2));
    });
}

double max_diff(const GridField& a, const GridField& b) { return (a - b).max_abs(); }

nlohmann::json margin_json(const MarginAt& m) {
    return {{"value", m.value}, {"i", m.i}, {"j", m.j}, {"x", m.x}, {"y", m.y}};
}

Grid square(int nx, int ny, double half) {
    Grid g;
    g.nx = nx;
    g.ny = ny;
    g.x0 = -half;
    g.x1 = half;
    g.y0 = -half;
    g.y1 = half;
    g.periodic_x = true;
    return g;
}

}  // namespace

CheckResult linearization_check(const ScaledProblem& sp, int pairs, std::uint64_t seed, double min_order) {
    CheckResult r{"linearization", true, nlohmann::json::object(), "pair,remainder_1e-2,remainder_1e-3,order\n"};
    Grid g = Grid::box(33, 33, -0.5, 0.5, -0.5, 0.5);
    std::mt19937_64 rng(seed);
    double worst = 1e300;
    std::ostringstream csv;
    csv.precision(17);
    for (int p = 0; p < pairs; ++p) {
        GridField w = random_smooth(g, rng, 1.0), v = random_smooth(g, rng, 1.0);
        GridField P0 = phi(sp, w), Lv = linearize(sp, w).apply(v);
        double rem[2];
        const double ts[2] = {1e-2, 1e-3};
        for (int k = 0; k < 2; ++k) rem[k] = (phi(sp, w + ts[k] * v) - P0 - ts[k] * Lv).max_abs();
        double order = std::log10(rem[0] / rem[1]);
        worst = std::min(worst, order);
        csv << p << ',' << rem[0] << ',' << rem[1] << ',' << order << '\n';
    }
    r.csv += csv.str();
    r.pass = worst >= min_order;
    r.detail = {{"pairs", pairs}, {"seed", seed}, {"min_order", worst}, {"required_order", min_order}};
    return r;
}

CheckResult canonical_contract_check(double eps, std::uint64_t seed) {
    CheckResult r{"canonical", true, nlohmann::json::object(), ""};
    ScaledProblem sp = scale(MAProblemSpec::model_T1(1.0), eps, 0.5, 0.5);
    Grid g = computational_grid(0.5, 0.5);
    std::mt19937_64 rng(seed);
    CanonicalForm cf = reduce(sp, random_periodic(g, rng, 0.3), CutoffKit());
    double b12_3 = cf.L3.a12.max_abs(), b12_7 = cf.L7.a12.max_abs();
    bool b22_exact = std::all_of(cf.L7.a22.v.begin(), cf.L7.a22.v.end(), [](double v) { return v == 1.0; });
    double p11_min = cf.second.P11.min();
    // H = y: beta = y and alpha = xi at every node.
    double beta_err = 0, alpha_err = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            beta_err = std::max(beta_err, std::abs(cf.second.beta(i, j) - g.y(j)));
            alpha_err = std::max(alpha_err, std::abs(cf.second.alpha(i, j) - cf.first.xi(i, j)));
        }
    // x-independent w gives b12 of L3 zero up to roundoff and xi = x.
    GridField wy = GridField::sample(g, [](double, double y) { return 0.3 * std::exp(-4 * y * y); });
    CanonicalForm cy = reduce(sp, wy, CutoffKit());
    double xi_err = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) xi_err = std::max(xi_err, std::abs(cy.first.xi(i, j) - g.x(i)));
    double b12_3_flat = cy.L3.a12.max_abs();
    r.pass = b12_3 > 0 && b12_7 <= 1e-8 * b12_3 && b22_exact && p11_min > 0 && beta_err <= 1e-10 &&
             alpha_err <= 1e-10 && b12_3_flat <= 1e-12 * b12_3 && xi_err <= 1e-10;
    r.detail = {{"eps", eps},
                {"seed", seed},
                {"b12_L3_max", b12_3},
                {"b12_L7_max", b12_7},
                {"b12_ratio", b12_3 > 0 ? b12_7 / b12_3 : 0.0},
                {"b22_L7_exactly_one", b22_exact},
                {"P11_L7_min", p11_min},
                {"beta_minus_y", beta_err},
                {"alpha_minus_xi", alpha_err},
                {"x_independent_b12_L3_max", b12_3_flat},
                {"x_independent_xi_minus_x", xi_err}};
    return r;
}

CheckResult certificate_check(const ScaledProblem& sp, const Grid& audit, const CutoffKit& kit, int samples,
                              unsigned seed) {
    CanonicalForm cf = reduce(sp, GridField(audit), kit);
    return extended_certificate_check(cf.extended, samples, seed);
}

CheckResult extended_certificate_check(const ExtendedOperator& L, int samples, unsigned seed) {
    CheckResult r{"certificate", true, nlohmann::json::object(), "sample,form,bound\n"};
    const Grid& audit = L.grid;
    CertificateOptions opt;
    opt.throw_on_failure = false;
    EnergyCertificate cert = energy_certificate(L, opt);
    bool coercive = true;
    std::ostringstream csv;
    csv.precision(17);
    if (cert.pass()) {
        std::vector<CoercivitySample> s = coercivity_check(L, cert, samples, seed);
        for (std::size_t k = 0; k < s.size(); ++k) {
            coercive = coercive && s[k].form >= s[k].bound && s[k].bound > 0;
            csv << k << ',' << s[k].form << ',' << s[k].bound << '\n';
        }
    } else {
        coercive = false;
    }
    r.csv += csv.str();
    r.pass = cert.pass() && coercive;
    r.detail = {{"certificate", cert.to_json()},
                {"I1_min", margin_json(cert.I1_min)},
                {"I3_gap", margin_json(cert.I3_gap)},
                {"I4_min", margin_json(cert.I4_min)},
                {"discriminant_min", margin_json(cert.discriminant_min)},
                {"coercivity_samples", cert.pass() ? samples : 0},
                {"coercivity_holds", coercive},
                {"audit_grid", {audit.nx, audit.ny}}};
    return r;
}

CheckResult manufactured_linear_check(int n, double tolerance, double min_gain) {
    CheckResult r{"linear", true, nlohmann::json::object(), "n,N,relative_l2_error\n"};
    auto solve = [](int nn, int N, bool zero) {
        Grid g = square(nn, nn + 1, 6.0);
        LinearOperatorField L(g, Stage::L7, Frame::AlphaBeta);
        L.a11 = GridField(g, 1.0);
        L.a22 = GridField(g, 1.0);
        L.a0 = GridField(g, -1.0);
        auto gauss = [](double x, double y) { return std::exp(-x * x - y * y); };
        GridField f = zero ? GridField(g) : GridField::sample(g, [&](double x, double y) {
            return (4 * x * x + 4 * y * y - 5) * gauss(x, y);
        });
        GridField exact = GridField::sample(g, gauss);
        GalerkinResult res = galerkin_solve(L, f, GalerkinBasis::trig(g, N));
        return std::make_pair(zero ? res.u.max_abs() : l2_norm(res.u - exact) / l2_norm(exact), res.report);
    };
    auto [e1, rep1] = solve(n, n / 4, false);
    auto [e2, rep2] = solve(2 * n, n / 2, false);
    auto [z, repz] = solve(n, n / 4, true);
    std::ostringstream csv;
    csv.precision(17);
    csv << n << ',' << n / 4 << ',' << e1 << '\n' << 2 * n << ',' << n / 2 << ',' << e2 << '\n';
    r.csv += csv.str();
    double gain = e1 / e2;
    r.pass = e1 <= tolerance && gain >= min_gain && z <= 1e-12;
    r.detail = {{"grid", n},
                {"modes", n / 4},
                {"relative_l2_error", e1},
                {"refined_relative_l2_error", e2},
                {"gain", gain},
                {"zero_data_max", z},
                {"tolerance", tolerance},
                {"solver", rep1.to_json()}};
    return r;
}

CheckResult smoothing_check(const Grid& g, const std::vector<double>& mus, const std::vector<int>& orders,
                            double tolerance) {
    CheckResult r{"smoothing", true, nlohmann::json::object(), ""};
    Mollifier m = Mollifier::for_box(0.5, 0.5);
    SmoothingReport rep = verify_smoothing_bounds(m, default_smoothing_suite(g, m, mus.back()), mus, orders, tolerance);
    // Band-limited field on the transform grid: S_mu b = b.
    double Lx = g.nx * g.hx(), Ly = g.ny * g.hy();
    GridField b = GridField::sample(g, [&](double x, double y) {
        return 0.7 + std::cos(2 * kPi * 2 * (x - g.x0) / Lx) * std::sin(2 * kPi * 3 * (y - g.y0) / Ly);
    });
    double fixed = max_diff(smooth(b, 2.0, m), b);
    r.csv = rep.csv();
    r.pass = rep.pass() && fixed <= 1e-12;
    r.detail = {{"bounds", rep.to_json()}, {"band_limited_fixed_point", fixed}};
    return r;
}

MetricSpec sphere_metric() {
    return MetricSpec::parse("1 + u^2/(1 - u^2 - v^2)", "u*v/(1 - u^2 - v^2)", "1 + v^2/(1 - u^2 - v^2)");
}

CheckResult covariant_sphere_check(int n, double bound, double min_gain) {
    CheckResult r{"covariant", true, nlohmann::json::object(), "n,omega_error,divergence_error\n"};
    MetricSpec ms = sphere_metric();
    CovariantOptions opt;
    opt.eps = 0.1;
    opt.throw_on_failure = false;
    std::vector<CovariantLinearization> runs;
    std::ostringstream csv;
    csv.precision(17);
    for (int nn : {n, 2 * n}) {
        Grid g = Grid::box(nn, nn, -0.5, 0.5, -0.5, 0.5);
        MetricPatch patch = MetricPatch::from_expressions(g, ms.E_text, ms.F_text, ms.G_text);
        GridField z = GridField::sample(g, [](double u, double v) { return u * u / 2 + 0.1 * std::sin(u + 2 * v); });
        runs.push_back(covariant_identity_check(patch, z, opt));
        csv << nn << ',' << runs.back().omega_error << ',' << runs.back().divergence_error << '\n';
    }
    r.csv += csv.str();
    double gain = runs[0].omega_error / runs[1].omega_error;
    r.pass = runs[0].omega_error <= bound && gain >= min_gain;
    r.detail = {{"grid", n},
                {"omega_error", runs[0].omega_error},
                {"refined_omega_error", runs[1].omega_error},
                {"gain", gain},
                {"divergence_error", runs[0].divergence_error},
                {"refined_divergence_error", runs[1].divergence_error},
                {"bound", bound}};
    return r;
}

CheckResult embedding_pair_check(const MetricPatch& metric, const GridField& z, double tolerance,
                                 const std::optional<std::array<GridField, 2>>& xy) {
    CheckResult r{"embedding", true, nlohmann::json::object(), ""};
    GridField flat_k = flatness_residual(metric, z);
    Block inner = half_block(metric.grid());
    double flatness = 0;
    for (int j = inner.j0; j < inner.j0 + inner.ny; ++j)
        for (int i = inner.i0; i < inner.i0 + inner.nx; ++i) flatness = std::max(flatness, std::abs(flat_k(i, j)));
    FlatCoordinates fc;
    if (xy) {
        fc.x = (*xy)[0];
        fc.y = (*xy)[1];
    } else {
        fc = flat_coordinates(reduced_metric(metric, z));
    }
    IsometryReport iso = isometry_residual(metric, fc.x, fc.y, z, inner);
    std::ostringstream csv;
    csv.precision(17);
    csv << "u,v,x,y,z\n";
    const Grid& g = metric.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            csv << g.x(i) << ',' << g.y(j) << ',' << fc.x(i, j) << ',' << fc.y(i, j) << ',' << z(i, j) << '\n';
    r.csv = csv.str();
    r.pass = iso.relative <= tolerance && flatness <= tolerance;
    r.detail = {{"isometry", iso.to_json()},
                {"flatness_max", flatness},
                {"coordinates", xy ? "supplied" : "integrated"},
                {"holonomy", fc.holonomy},
                {"closure", fc.closure},
                {"tolerance", tolerance}};
    return r;
}

}  // namespace dma
