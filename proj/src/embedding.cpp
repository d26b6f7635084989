#include "dma/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dma/error.hpp"

namespace dma {

namespace {

const std::vector<std::string> kVars{"u", "v", "p", "q1", "q2"};

Expr cst(double c) { return Expr::constant(c, kVars); }

double field_at(const Expr& e, double u, double v) {
    double a[5] = {u, v, 0.0, 0.0, 0.0};
    return e.eval(a);
}

GridField sample_expr(const Grid& g, const Expr& e) {
    return GridField::sample(g, [&](double u, double v) { return field_at(e, u, v); });
}

double sup_on(const GridField& f, const Block& b) {
    double m = 0;
    for (int j = b.j0; j < b.j0 + b.ny; ++j)
        for (int i = b.i0; i < b.i0 + b.nx; ++i) m = std::max(m, std::abs(f(i, j)));
    return m;
}

double rms_on(const GridField& f, const Block& b) {
    double s = 0;
    for (int j = b.j0; j < b.j0 + b.ny; ++j)
        for (int i = b.i0; i < b.i0 + b.nx; ++i) s += f(i, j) * f(i, j);
    return std::sqrt(s / (double(b.nx) * b.ny));
}

nlohmann::json block_json(const Block& b) { return {{"i0", b.i0}, {"j0", b.j0}, {"nx", b.nx}, {"ny", b.ny}}; }

// out[k] = integral of f from node start to node k along one grid line, fourth order.
void integrate_line(const std::vector<double>& f, double h, int start, std::vector<double>& out) {
    const int n = int(f.size());
    require(n >= 4, "bad-grid", "line integration needs at least 4 nodes");
    auto piece = [&](int i) {  // integral over [i, i + 1]
        if (i == 0) return h * (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]) / 24;
        if (i == n - 2) return h * (f[n - 4] - 5 * f[n - 3] + 19 * f[n - 2] + 9 * f[n - 1]) / 24;
        return h * (-f[i - 1] + 13 * f[i] + 13 * f[i + 1] - f[i + 2]) / 24;
    };
    out.assign(n, 0.0);
    for (int k = start + 1; k < n; ++k) out[k] = out[k - 1] + piece(k - 1);
    for (int k = start - 1; k >= 0; --k) out[k] = out[k + 1] - piece(k);
}

std::vector<double> row(const GridField& f, int j) {
    return std::vector<double>(f.v.begin() + std::size_t(j) * f.grid.nx, f.v.begin() + std::size_t(j + 1) * f.grid.nx);
}

std::vector<double> column(const GridField& f, int i) {
    std::vector<double> c(f.grid.ny);
    for (int j = 0; j < f.grid.ny; ++j) c[j] = f(i, j);
    return c;
}

// Potential of the 1-form P du + Q dv from (ic, jc), along u then v (first) and v then u (second).
std::pair<GridField, GridField> two_path(const GridField& P, const GridField& Q, int ic, int jc) {
    const Grid& g = P.grid;
    GridField A(g), B(g);
    std::vector<double> line, base;
    integrate_line(row(P, jc), g.hx(), ic, base);
    for (int i = 0; i < g.nx; ++i) {
        integrate_line(column(Q, i), g.hy(), jc, line);
        for (int j = 0; j < g.ny; ++j) A(i, j) = base[i] + line[j];
    }
    integrate_line(column(Q, ic), g.hy(), jc, base);
    for (int j = 0; j < g.ny; ++j) {
        integrate_line(row(P, j), g.hx(), ic, line);
        for (int i = 0; i < g.nx; ++i) B(i, j) = base[j] + line[i];
    }
    return {A, B};
}

int nearest(double x0, double h, int n, double x) {
    return std::clamp(int(std::lround((x - x0) / h)), 0, n - 1);
}

bool contains(const Grid& g, double x, double y) { return x >= g.x0 && x <= g.x1 && y >= g.y0 && y <= g.y1; }

}  // namespace

MetricSpec MetricSpec::parse(const std::string& E, const std::string& F, const std::string& G,
                             const std::map<std::string, double>& constants) {
    MetricSpec m;
    m.E_text = E;
    m.F_text = F;
    m.G_text = G;
    m.E = Expr::parse(E, kVars, constants);
    m.F = Expr::parse(F, kVars, constants);
    m.G = Expr::parse(G, kVars, constants);
    for (const Expr* e : {&m.E, &m.F, &m.G})
        for (const char* q : {"p", "q1", "q2"})
            require(e->diff(q).is_zero(), "bad-metric", "metric components may depend on u and v only");
    return m;
}

MetricPatch MetricSpec::sample(const Grid& g) const {
    return MetricPatch::general(sample_expr(g, E), sample_expr(g, F), sample_expr(g, G));
}

std::array<std::array<std::array<Expr, 2>, 2>, 2> MetricSpec::christoffel() const {
    Expr gm[2][2] = {{E, F}, {F, G}};
    Expr det = E * G - F * F;
    Expr ginv[2][2] = {{G / det, -F / det}, {-F / det, E / det}};
    std::array<std::array<std::array<Expr, 2>, 2>, 2> c;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                Expr s = cst(0);
                for (int l = 0; l < 2; ++l)
                    s = s + ginv[i][l] * (gm[l][k].diff(j) + gm[l][j].diff(k) - gm[j][k].diff(l));
                c[i][j][k] = cst(0.5) * s;
            }
    return c;
}

Expr MetricSpec::curvature() const {
    Expr Eu = E.diff(0), Ev = E.diff(1), Fu = F.diff(0), Fv = F.diff(1), Gu = G.diff(0), Gv = G.diff(1);
    Expr h = cst(0.5);
    Expr a11 = -h * Ev.diff(1) + Fu.diff(1) - h * Gu.diff(0), a12 = h * Eu, a13 = Fu - h * Ev;
    Expr a21 = Fv - h * Gu, a31 = h * Gv;
    Expr w = E * G - F * F;
    Expr det1 = a11 * w - a12 * (a21 * G - F * a31) + a13 * (a21 * F - E * a31);
    Expr b12 = h * Ev, b13 = h * Gu;
    Expr det2 = -b12 * (b12 * G - F * b13) + b13 * (b12 * F - E * b13);
    return (det1 - det2) / (w * w);
}

MetricSpec model_T1_metric(double k0) {
    return MetricSpec::parse("(1 - k0*v^5/20)^2", "0", "1", {{"k0", k0}});
}

MAProblemSpec embedding_problem(const MetricSpec& metric, const std::string& Htilde, int n, double M1) {
    auto gam = metric.christoffel();
    Expr q[2] = {Expr::parse("q1", kVars), Expr::parse("q2", kVars)};
    auto a = [&](int i, int j) { return -(gam[0][i][j] * q[0] + gam[1][i][j] * q[1]); };
    MAProblemSpec s;
    s.a11 = a(0, 0);
    s.a12 = a(0, 1);
    s.a22 = a(1, 1);
    s.K = metric.curvature();
    s.f = metric.E * metric.G - metric.F * metric.F -
          (metric.G * q[0] * q[0] - cst(2) * metric.F * q[0] * q[1] + metric.E * q[1] * q[1]);
    s.sigma = CurveSpec::parse(Htilde, M1);
    require(n > 0, "bad-problem", "n must be positive");
    s.n = n;
    s.prepare();
    return s;
}

Grid patch_grid(const Grid& xg, double eps) {
    double s = eps * eps;
    return Grid::box(xg.nx, xg.ny, s * xg.x0, s * xg.x1, s * xg.y0, s * xg.y1);
}

Block half_block(const Grid& g) {
    double uc = 0.5 * (g.x0 + g.x1), vc = 0.5 * (g.y0 + g.y1);
    double hu = 0.25 * (g.x1 - g.x0), hv = 0.25 * (g.y1 - g.y0);
    int i0 = int(std::ceil((uc - hu - g.x0) / g.hx() - 1e-9)), i1 = int(std::floor((uc + hu - g.x0) / g.hx() + 1e-9));
    int j0 = int(std::ceil((vc - hv - g.y0) / g.hy() - 1e-9)), j1 = int(std::floor((vc + hv - g.y0) / g.hy() + 1e-9));
    return {i0, j0, i1 - i0 + 1, j1 - j0 + 1};
}

GridField reconstruct_z(const GridField& w, const ScaledProblem& sp, const std::optional<Grid>& target) {
    const double e = sp.eps, e2 = e * e, e5 = e2 * e2 * e;
    const Grid& xg = w.grid;
    GridField wx = dx(w), wy = dy(w);
    double grad = 0;
    for (int j = 0; j < xg.ny; ++j)
        for (int i = 0; i < xg.nx; ++i) {
            double zu = e2 * xg.x(i) + e2 * e * wx(i, j), zv = e2 * e * wy(i, j);
            grad = std::max(grad, std::hypot(zu, zv));
        }
    require(grad < 1, "gradient-too-large", "|grad z| reaches " + std::to_string(grad));
    if (!target) {
        Grid pg = patch_grid(xg, e);
        GridField z(pg);
        for (int j = 0; j < pg.ny; ++j)
            for (int i = 0; i < pg.nx; ++i) z(i, j) = 0.5 * pg.x(i) * pg.x(i) + e5 * w(i, j);
        return z;
    }
    return GridField::sample(*target, [&](double u, double v) {
        return 0.5 * u * u + e5 * interp2(w, u / e2, v / e2, 4);
    });
}

MetricPatch reduced_metric(const MetricPatch& metric, const GridField& z) {
    require(metric.grid() == z.grid, "bad-grid", "metric and z must share a grid");
    GridField zu = dx(z), zv = dy(z);
    GridField E = metric.e() - zu * zu, F = metric.f() - zu * zv, G = metric.g() - zv * zv;
    for (std::size_t k = 0; k < E.v.size(); ++k)
        require(E.v[k] > 0 && G.v[k] > 0 && E.v[k] * G.v[k] - F.v[k] * F.v[k] > 0, "signature",
                "ds^2 - dz^2 is not positive definite at node " + std::to_string(k));
    return MetricPatch::general(E, F, G);
}

GridField flatness_residual(const MetricPatch& metric, const GridField& z) {
    return gauss_curvature(reduced_metric(metric, z));
}

FlatCoordinates flat_coordinates(const MetricPatch& flat, const FlatOptions& opt) {
    flat.validate();
    const Grid& g = flat.grid();
    GridField E = flat.e(), F = flat.f(), G = flat.g();
    GridField a = map(E, [](double t) { return std::sqrt(t); });
    GridField b = F / a;
    GridField c = map(E * G - F * F, [](double t) { return std::sqrt(t); }) / a;
    // Coframe theta1 = a du + b dv, theta2 = c dv; connection form p du + q dv.
    GridField p = (dx(b) - dy(a)) / c;
    GridField q = (dx(c) + p * b) / a;
    int ic = nearest(g.x0, g.hx(), g.nx, 0.0), jc = nearest(g.y0, g.hy(), g.ny, 0.0);
    bool origin = contains(g, 0.0, 0.0);

    FlatCoordinates out;
    auto [phA, phB] = two_path(p, q, ic, jc);
    out.holonomy = (phA - phB).max_abs();
    require(out.holonomy <= opt.holonomy_tol, "not-flat-enough",
            "connection form holonomy " + std::to_string(out.holonomy) + " exceeds " +
                std::to_string(opt.holonomy_tol));
    out.angle = phA;
    if (origin) {
        double shift = interp2(out.angle, 0.0, 0.0);
        for (double& t : out.angle.v) t -= shift;
    }
    GridField cs = map(out.angle, [](double t) { return std::cos(t); });
    GridField sn = map(out.angle, [](double t) { return std::sin(t); });
    auto [xA, xB] = two_path(a * cs, b * cs - c * sn, ic, jc);
    auto [yA, yB] = two_path(a * sn, b * sn + c * cs, ic, jc);
    double range = std::max({xA.max() - xA.min(), yA.max() - yA.min(), 1e-300});
    out.closure = std::max((xA - xB).max_abs(), (yA - yB).max_abs()) / range;
    out.x = xA;
    out.y = yA;
    if (origin) {
        double sx = interp2(out.x, 0.0, 0.0), sy = interp2(out.y, 0.0, 0.0);
        for (double& t : out.x.v) t -= sx;
        for (double& t : out.y.v) t -= sy;
    }
    return out;
}

std::array<GridField, 3> isometry_mismatch(const MetricPatch& metric, const GridField& x, const GridField& y,
                                           const GridField& z) {
    require(x.grid == metric.grid() && y.grid == x.grid && z.grid == x.grid, "bad-grid",
            "embedding components and metric must share a grid");
    GridField xu = dx(x), xv = dy(x), yu = dx(y), yv = dy(y), zu = dx(z), zv = dy(z);
    return {xu * xu + yu * yu + zu * zu - metric.e(), xu * xv + yu * yv + zu * zv - metric.f(),
            xv * xv + yv * yv + zv * zv - metric.g()};
}

IsometryReport isometry_residual(const MetricPatch& metric, const GridField& x, const GridField& y,
                                 const GridField& z, const std::optional<Block>& region) {
    const Grid& g = metric.grid();
    IsometryReport r;
    r.region = region ? *region : Block{0, 0, g.nx, g.ny};
    auto mm = isometry_mismatch(metric, x, y, z);
    for (int k = 0; k < 3; ++k) {
        r.max_abs[k] = sup_on(mm[k], r.region);
        r.rms[k] = rms_on(mm[k], r.region);
    }
    r.scale = std::max(sup_on(metric.e(), r.region), sup_on(metric.g(), r.region));
    r.relative = *std::max_element(r.max_abs.begin(), r.max_abs.end()) / r.scale;
    return r;
}

nlohmann::json IsometryReport::to_json() const {
    return {{"region", block_json(region)},
            {"max_abs", {{"E", max_abs[0]}, {"F", max_abs[1]}, {"G", max_abs[2]}}},
            {"rms", {{"E", rms[0]}, {"F", rms[1]}, {"G", rms[2]}}},
            {"scale", scale},
            {"relative", relative}};
}

EmbeddingResult embed(const ScaledProblem& sp, const MetricSpec& metric, const GridField& w,
                      const EmbeddingOptions& opt) {
    const Grid& xg = w.grid;
    EmbeddingResult r;
    r.patch = patch_grid(xg, sp.eps);
    r.region = half_block(r.patch);
    r.z = reconstruct_z(w, sp);
    {
        const double e = sp.eps, e2 = e * e;
        GridField wx = dx(w), wy = dy(w);
        for (int j = 0; j < xg.ny; ++j)
            for (int i = 0; i < xg.nx; ++i)
                r.gradient_max = std::max(r.gradient_max, std::hypot(e2 * xg.x(i) + e2 * e * wx(i, j), e2 * e * wy(i, j)));
    }
    MetricPatch g = metric.sample(r.patch);
    MetricPatch red = reduced_metric(g, r.z);
    r.flatness = gauss_curvature(red);
    r.flatness_max = sup_on(r.flatness, r.region);
    FlatCoordinates fc = flat_coordinates(red, opt.flat);
    r.x = fc.x;
    r.y = fc.y;
    r.holonomy = fc.holonomy;
    r.mismatch = isometry_mismatch(g, r.x, r.y, r.z);
    r.isometry = isometry_residual(g, r.x, r.y, r.z, r.region);

    GridField Phi = phi(sp, w);
    r.ma_residual = sup_on(Phi, r.region);
    // Response of the flatness residual to a smooth change of Phi well above roundoff.
    double rad = 0.25 * std::min(xg.x1 - xg.x0, xg.y1 - xg.y0);
    double xc = 0.5 * (xg.x0 + xg.x1), yc = 0.5 * (xg.y0 + xg.y1);
    GridField bump = GridField::sample(xg, [&](double x, double y) {
        return std::exp(-((x - xc) * (x - xc) + (y - yc) * (y - yc)) / (rad * rad));
    });
    double amp = opt.calibration_size / (sp.eps * dyy(bump).max_abs());
    GridField w2 = w + amp * bump;
    double dPhi = sup_on(phi(sp, w2) - Phi, r.region);
    double dK = sup_on(flatness_residual(g, reconstruct_z(w2, sp)) - r.flatness, r.region);
    r.conditioning_factor = dPhi > 0 ? dK / dPhi : 0.0;
    r.flatness_bound = r.conditioning_factor * r.ma_residual;
    double h = std::min(r.patch.hx(), r.patch.hy());
    r.curvature_roundoff =
        std::numeric_limits<double>::epsilon() * std::max(red.E.max_abs(), red.G.max_abs()) / (h * h);
    return r;
}

nlohmann::json EmbeddingResult::to_json() const {
    return {{"patch", {{"u0", patch.x0}, {"u1", patch.x1}, {"v0", patch.y0}, {"v1", patch.y1},
                       {"nu", patch.nx}, {"nv", patch.ny}}},
            {"region", block_json(region)},
            {"isometry", isometry.to_json()},
            {"gradient_max", gradient_max},
            {"holonomy", holonomy},
            {"flatness_max", flatness_max},
            {"ma_residual", ma_residual},
            {"conditioning_factor", conditioning_factor},
            {"flatness_bound", flatness_bound},
            {"flatness_within_bound", flatness_within_bound()},
            {"curvature_roundoff", curvature_roundoff}};
}

std::string EmbeddingResult::csv() const {
    std::ostringstream os;
    os << "u,v,x,y,z\n";
    char buf[160];
    for (int j = 0; j < patch.ny; ++j)
        for (int i = 0; i < patch.nx; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", patch.x(i), patch.y(j), x(i, j), y(i, j),
                          z(i, j));
            os << buf;
        }
    return os.str();
}

std::string EmbeddingResult::mesh() const {
    std::ostringstream os;
    char buf[128];
    for (int j = 0; j < patch.ny; ++j)
        for (int i = 0; i < patch.nx; ++i) {
            std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", x(i, j), y(i, j), z(i, j));
            os << buf;
        }
    auto id = [&](int i, int j) { return j * patch.nx + i + 1; };
    for (int j = 0; j + 1 < patch.ny; ++j)
        for (int i = 0; i + 1 < patch.nx; ++i) {
            os << "f " << id(i, j) << ' ' << id(i + 1, j) << ' ' << id(i + 1, j + 1) << '\n';
            os << "f " << id(i, j) << ' ' << id(i + 1, j + 1) << ' ' << id(i, j + 1) << '\n';
        }
    return os.str();
}

MAProblemSpec curvature_problem(const std::string& K, const std::string& Htilde, int n,
                                const std::map<std::string, double>& constants) {
    return MAProblemSpec::parse("0", "0", "0", "(1 + q1^2 + q2^2)^2", K, Htilde, n, constants);
}

GridField graph_curvature(const ScaledProblem& sp, const GridField& w) {
    const double e = sp.eps, e2 = e * e;
    const Grid& xg = w.grid;
    WJet j = WJet::of(w);
    GridField out(patch_grid(xg, e));
    for (int jj = 0; jj < xg.ny; ++jj)
        for (int i = 0; i < xg.nx; ++i) {
            double zu = e2 * xg.x(i) + e2 * e * j.wx(i, jj), zv = e2 * e * j.wy(i, jj);
            double det = (1 + e * j.wxx(i, jj)) * e * j.wyy(i, jj) - e * e * j.wxy(i, jj) * j.wxy(i, jj);
            double s = 1 + zu * zu + zv * zv;
            out(i, jj) = det / (s * s);
        }
    return out;
}

PrescribedCurvatureResult prescribed_curvature(const std::string& K, const std::string& Htilde, int n,
                                               const Schedule& schedule, const IterationConfig& config, double x0,
                                               double y0) {
    require(n > 0 && n % 2 == 0, "regime", "n = " + std::to_string(n) + " is outside the even-order regime");
    MAProblemSpec problem = curvature_problem(K, Htilde, n);
    PrescribedCurvatureResult r;
    GridField w;
    ScaledProblem sp;
    if (problem.K.is_zero()) {
        // The cylinder u^2 / 2 solves the flat case; no iteration is needed.
        sp.spec = problem;
        sp.eps = schedule.eps;
        sp.x0 = x0;
        sp.y0 = y0;
        Grid xg = ExtensionOperator(computational_grid(x0, y0, config.nx, config.ny), x0, y0, config.extension_order)
                      .x_grid();
        w = GridField(xg, 0.0);
        r.run.schedule = schedule;
        r.run.config = config;
        r.run.status = "converged";
        r.run.converged = true;
        r.run.w = w;
    } else {
        sp = scale(problem, schedule.eps, x0, y0);
        NashMoser nm(sp, schedule, config);
        r.run = nm.run();
        w = r.run.w;
    }
    r.z = reconstruct_z(w, sp);
    r.curvature = graph_curvature(sp, w);
    r.target = sample_expr(r.curvature.grid, problem.K);
    r.region = half_block(r.curvature.grid);
    double kmax = sup_on(r.target, r.region);
    double err = sup_on(r.curvature - r.target, r.region);
    r.relative_error = kmax > 0 ? err / kmax : err;
    // Sign comparison away from a band of one grid width around sigma.
    const Grid& pg = r.curvature.grid;
    double h = std::max(pg.hx(), pg.hy());
    int total = 0, agree = 0;
    for (int j = r.region.j0; j < r.region.j0 + r.region.ny; ++j)
        for (int i = r.region.i0; i < r.region.i0 + r.region.nx; ++i) {
            double u = pg.x(i), v = pg.y(j);
            auto grad = problem.sigma.gradient(u, v);
            if (std::abs(problem.sigma.value(u, v)) <= 1.5 * h * std::hypot(grad[0], grad[1])) continue;
            double t = r.target(i, j);
            if (t == 0) continue;
            ++total;
            if ((r.curvature(i, j) > 0) == (t > 0)) ++agree;
        }
    r.sign_agreement = total ? double(agree) / total : 1.0;
    return r;
}

nlohmann::json PrescribedCurvatureResult::to_json() const {
    return {{"run", run.to_json()},
            {"region", block_json(region)},
            {"relative_error", relative_error},
            {"sign_agreement", sign_agreement}};
}

CovariantLinearization covariant_identity_check(const MetricPatch& metric, const GridField& z,
                                                const CovariantOptions& opt) {
    metric.validate();
    const Grid& g = metric.grid();
    require(z.grid == g, "bad-grid", "metric and z must share a grid");
    require(g.nx > 2 * opt.margin && g.ny > 2 * opt.margin, "bad-grid", "grid too small for the margin");
    const double e = opt.eps, e2 = e * e, e3 = e2 * e, e4 = e2 * e2, e6 = e4 * e2;
    CovariantLinearization out;
    out.eps = e;
    out.region = {opt.margin, opt.margin, g.nx - 2 * opt.margin, g.ny - 2 * opt.margin};

    auto gam = christoffel_fields(metric).gamma;
    auto d = [](const GridField& f, int dir) { return dir == 0 ? dx(f) : dy(f); };
    GridField E = metric.e(), F = metric.f(), G = metric.g();
    GridField K = gauss_curvature(metric);
    GridField zd[2] = {dx(z), dy(z)};
    GridField zdd[2][2] = {{dxx(z), dxy(z)}, {dxy(z), dyy(z)}};

    // Omega in u coordinates; in x = u / eps^2 coordinates both sides carry eps^4.
    for (int i = 0; i < 2; ++i) {
        GridField om = dy(gam[i][0][1]) - dx(gam[i][1][1]);
        for (int j = 0; j < 2; ++j) om = om + gam[j][0][1] * gam[i][j][1] - gam[j][1][1] * gam[i][j][0];
        out.omega[i] = e4 * om;
    }
    out.curvature_term[0] = (-e4) * (G * K);
    out.curvature_term[1] = e4 * (F * K);

    // Covariant Hessian and cofactor matrix.
    GridField H[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) H[i][j] = zdd[i][j] - gam[0][i][j] * zd[0] - gam[1][i][j] * zd[1];
    GridField Bu[2][2] = {{H[1][1], -1.0 * H[0][1]}, {-1.0 * H[1][0], H[0][0]}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.b[i][j] = e * Bu[i][j];
    out.symmetry_error = (out.b[0][1] - out.b[1][0]).max_abs();
    out.b_first[0] = (2 * e3) * (K * (G * zd[0] - F * zd[1]));
    out.b_first[1] = (2 * e3) * (K * (E * zd[1] - F * zd[0]));

    // d_j B^(ij) + B^(lk) Gamma^i_lk - Gamma^j_(j1) B^(i1) - Gamma^j_(j2) B^(i2) - C^i_m z_m = 0 with
    // C^i_m = -g^(mi) |g| K.
    GridField tr[2] = {gam[0][0][0] + gam[1][1][0], gam[0][0][1] + gam[1][1][1]};
    GridField Cm[2][2] = {{-1.0 * (G * K), F * K}, {F * K, -1.0 * (E * K)}};  // [i][m]
    double num = 0, den = 0;
    for (int i = 0; i < 2; ++i) {
        GridField terms[6] = {d(Bu[i][0], 0), d(Bu[i][1], 1), GridField(g), (-1.0) * (tr[0] * Bu[i][0]),
                              (-1.0) * (tr[1] * Bu[i][1]), (-1.0) * (Cm[i][0] * zd[0] + Cm[i][1] * zd[1])};
        for (int l = 0; l < 2; ++l)
            for (int k = 0; k < 2; ++k) terms[2] = terms[2] + Bu[l][k] * gam[i][l][k];
        GridField res(g);
        for (const auto& t : terms) {
            res = res + t;
            den = std::max(den, sup_on(t, out.region));
        }
        out.divergence_residual[i] = e6 * res;
        num = std::max(num, sup_on(res, out.region));
    }
    out.divergence_error = den > 0 ? num / den : num;

    double onum = 0, oden = 0;
    for (int i = 0; i < 2; ++i) {
        onum = std::max(onum, sup_on(out.omega[i] - out.curvature_term[i], out.region));
        oden = std::max(oden, sup_on(out.curvature_term[i], out.region));
    }
    out.omega_error = oden > 0 ? onum / oden : onum;
    if (opt.throw_on_failure) {
        require(out.omega_error <= opt.bound, "identity-violation",
                "Omega^i differs from -eps^4 g^(i1) |g| K by " + std::to_string(out.omega_error) + " relative");
        require(out.divergence_error <= opt.bound, "identity-violation",
                "cofactor divergence identity fails by " + std::to_string(out.divergence_error) + " relative");
    }
    return out;
}

nlohmann::json CovariantLinearization::to_json() const {
    return {{"eps", eps},
            {"region", block_json(region)},
            {"omega_error", omega_error},
            {"divergence_error", divergence_error},
            {"symmetry_error", symmetry_error}};
}

}  // namespace dma
