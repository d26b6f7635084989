#include "dma/geometry.hpp"

#include <cmath>
#include <vector>

#include "dma/error.hpp"

namespace dma {

MetricPatch MetricPatch::general(GridField E, GridField F, GridField G) {
    MetricPatch m;
    m.form = Form::General;
    m.E = std::move(E);
    m.F = std::move(F);
    m.G = std::move(G);
    return m;
}

MetricPatch MetricPatch::geodesic_parallel(GridField h) {
    MetricPatch m;
    m.form = Form::GeodesicParallel;
    m.h = std::move(h);
    return m;
}

MetricPatch MetricPatch::from_expressions(const Grid& g, const std::string& E, const std::string& F,
                                          const std::string& G) {
    std::vector<std::string> uv{"u", "v"};
    Expr e = Expr::parse(E, uv), f = Expr::parse(F, uv), gg = Expr::parse(G, uv);
    auto s = [&](const Expr& x) { return GridField::sample(g, [&](double u, double v) { return x.eval({u, v}); }); };
    return general(s(e), s(f), s(gg));
}

GridField MetricPatch::e() const { return form == Form::General ? E : GridField(h.grid, 1.0); }
GridField MetricPatch::f() const { return form == Form::General ? F : GridField(h.grid, 0.0); }
GridField MetricPatch::g() const { return form == Form::General ? G : h * h; }

void MetricPatch::validate(double tol) const {
    if (form == Form::General) {
        for (std::size_t k = 0; k < E.v.size(); ++k)
            require(E.v[k] > 0 && G.v[k] > 0 && E.v[k] * G.v[k] - F.v[k] * F.v[k] > 0, "degenerate-metric",
                    "metric is not positive definite at node " + std::to_string(k));
        return;
    }
    require(h.min() > 0, "degenerate-metric", "h must be positive");
    const Grid& gr = h.grid;
    double t = (0.0 - gr.x0) / gr.hx();
    int i0 = int(std::lround(t));
    require(std::abs(t - i0) < 1e-9 && i0 >= 0 && i0 < gr.nx, "degenerate-metric",
            "geodesic parallel grid must contain the line u = 0");
    GridField hu = dx(h);
    for (int j = 0; j < gr.ny; ++j)
        require(std::abs(h(i0, j) - 1) <= tol && std::abs(hu(i0, j)) <= std::max(tol, 1e-6), "degenerate-metric",
                "h(0,v) = 1 and h_u(0,v) = 0 violated");
}

CurveSpec CurveSpec::parse(const std::string& text, double M1) {
    CurveSpec c;
    c.H = Expr::parse(text, {"u", "v"});
    c.Hu = c.H.diff(0);
    c.Hv = c.H.diff(1);
    c.Huu = c.Hu.diff(0);
    c.Huv = c.Hu.diff(1);
    c.Hvv = c.Hv.diff(1);
    c.M1 = M1;
    return c;
}

std::array<double, 2> CurveSpec::gradient(double u, double v) const { return {Hu.eval({u, v}), Hv.eval({u, v})}; }

void CurveSpec::check_transversal(const Grid& g) const {
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double a = value(g.x(i), g.y(j)), b = value(g.x(i), g.y(j + 1));
            if (a * b > 0) continue;
            for (double v : {g.y(j), g.y(j + 1)})
                require(Hv.eval({g.x(i), v}) >= M1, "not-transversal",
                        "d_v H~ below M1 next to the zero set");
        }
}

namespace {

struct MetricDerivs {
    GridField E, F, G, Eu, Ev, Fu, Fv, Gu, Gv;
};

MetricDerivs metric_derivs(const MetricPatch& m) {
    MetricDerivs d{m.e(), m.f(), m.g(), {}, {}, {}, {}, {}, {}};
    d.Eu = dx(d.E); d.Ev = dy(d.E);
    d.Fu = dx(d.F); d.Fv = dy(d.F);
    d.Gu = dx(d.G); d.Gv = dy(d.G);
    return d;
}

Christoffel gamma_from(double E, double F, double G, double Eu, double Ev, double Fu, double Fv, double Gu,
                       double Gv) {
    // d[l][j][k] = d_l g_jk
    double dg[2][2][2] = {{{Eu, Fu}, {Fu, Gu}}, {{Ev, Fv}, {Fv, Gv}}};
    double det = E * G - F * F;
    double ginv[2][2] = {{G / det, -F / det}, {-F / det, E / det}};
    Christoffel c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = j; k < 2; ++k) {
                double s = 0;
                for (int l = 0; l < 2; ++l) s += ginv[i][l] * (dg[j][l][k] + dg[k][l][j] - dg[l][j][k]);
                c[i][j][k] = 0.5 * s;
                c[i][k][j] = c[i][j][k];
            }
    return c;
}

}  // namespace

Christoffel christoffel(const MetricPatch& metric, int i, int j) {
    const Grid& g = metric.grid();
    require(i >= 2 && j >= 2 && i < g.nx - 2 && j < g.ny - 2, "stencil",
            "node too close to the boundary for centered stencils");
    MetricDerivs d = metric_derivs(metric);
    return gamma_from(d.E(i, j), d.F(i, j), d.G(i, j), d.Eu(i, j), d.Ev(i, j), d.Fu(i, j), d.Fv(i, j), d.Gu(i, j),
                      d.Gv(i, j));
}

ChristoffelFields christoffel_fields(const MetricPatch& metric) {
    const Grid& g = metric.grid();
    MetricDerivs d = metric_derivs(metric);
    ChristoffelFields out;
    for (auto& a : out.gamma)
        for (auto& b : a)
            for (auto& c : b) c = GridField(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            Christoffel c = gamma_from(d.E(i, j), d.F(i, j), d.G(i, j), d.Eu(i, j), d.Ev(i, j), d.Fu(i, j),
                                       d.Fv(i, j), d.Gu(i, j), d.Gv(i, j));
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    for (int e = 0; e < 2; ++e) out.gamma[a][b][e](i, j) = c[a][b][e];
        }
    return out;
}

GridField gauss_curvature(const MetricPatch& metric) {
    if (metric.form == MetricPatch::Form::GeodesicParallel) {
        require(metric.h.min() > 0, "degenerate-metric", "h must be positive");
        return (-1.0 * dxx(metric.h)) / metric.h;
    }
    metric.validate();
    MetricDerivs d = metric_derivs(metric);
    GridField Evv = dyy(d.E), Guu = dxx(d.G), Fuv = dxy(d.F);
    GridField K(metric.grid());
    for (std::size_t k = 0; k < K.v.size(); ++k) {
        double E = d.E.v[k], F = d.F.v[k], G = d.G.v[k];
        double Eu = d.Eu.v[k], Ev = d.Ev.v[k], Fu = d.Fu.v[k], Fv = d.Fv.v[k], Gu = d.Gu.v[k], Gv = d.Gv.v[k];
        double a11 = -0.5 * Evv.v[k] + Fuv.v[k] - 0.5 * Guu.v[k], a12 = 0.5 * Eu, a13 = Fu - 0.5 * Ev;
        double a21 = Fv - 0.5 * Gu, a31 = 0.5 * Gv;
        double det1 = a11 * (E * G - F * F) - a12 * (a21 * G - F * a31) + a13 * (a21 * F - E * a31);
        double b12 = 0.5 * Ev, b13 = 0.5 * Gu;
        double det2 = -b12 * (b12 * G - F * b13) + b13 * (b12 * F - E * b13);
        double w = E * G - F * F;
        K.v[k] = (det1 - det2) / (w * w);
    }
    return K;
}

namespace {

struct FlowFields {
    GridField E, F, G;
    ChristoffelFields gam;
    std::array<std::array<std::array<std::array<GridField, 2>, 2>, 2>, 2> dgam;  // [c][i][a][b]
};

struct Metric2 {
    double E, F, G;
};

class GeodesicFlow {
public:
    explicit GeodesicFlow(const MetricPatch& m) {
        ff_.E = m.e();
        ff_.F = m.f();
        ff_.G = m.g();
        ff_.gam = christoffel_fields(m);
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    ff_.dgam[0][i][a][b] = dx(ff_.gam.gamma[i][a][b]);
                    ff_.dgam[1][i][a][b] = dy(ff_.gam.gamma[i][a][b]);
                }
        g_ = m.grid();
    }

    Metric2 metric(double u, double v) const {
        return {interp2(ff_.E, u, v), interp2(ff_.F, u, v), interp2(ff_.G, u, v)};
    }

    bool inside(double u, double v, double tol) const {
        return u >= g_.x0 - tol && u <= g_.x1 + tol && v >= g_.y0 - tol && v <= g_.y1 + tol;
    }

    // State: P(2), P'(2), J(2), J'(2).
    using State = std::array<double, 8>;
    State rhs(const State& s) const {
        double u = s[0], v = s[1];
        double G[2][2][2], dG[2][2][2][2];
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int b = a; b < 2; ++b) {
                    G[i][a][b] = G[i][b][a] = interp2(ff_.gam.gamma[i][a][b], u, v);
                    for (int c = 0; c < 2; ++c) dG[c][i][a][b] = dG[c][i][b][a] = interp2(ff_.dgam[c][i][a][b], u, v);
                }
        State r{};
        const double* p = &s[2];
        const double* J = &s[4];
        const double* Jp = &s[6];
        for (int i = 0; i < 2; ++i) {
            r[i] = p[i];
            r[4 + i] = Jp[i];
            double acc = 0, accJ = 0;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    acc -= G[i][a][b] * p[a] * p[b];
                    accJ -= 2 * G[i][a][b] * p[a] * Jp[b];
                    for (int c = 0; c < 2; ++c) accJ -= dG[c][i][a][b] * J[c] * p[a] * p[b];
                }
            r[2 + i] = acc;
            r[6 + i] = accJ;
        }
        return r;
    }

    State rk4(const State& s, double dt) const {
        auto axpy = [](const State& a, const State& b, double t) {
            State r;
            for (int k = 0; k < 8; ++k) r[k] = a[k] + t * b[k];
            return r;
        };
        State k1 = rhs(s), k2 = rhs(axpy(s, k1, dt / 2)), k3 = rhs(axpy(s, k2, dt / 2)), k4 = rhs(axpy(s, k3, dt));
        State r;
        for (int k = 0; k < 8; ++k) r[k] = s[k] + dt / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
        return r;
    }

    const Grid& grid() const { return g_; }

private:
    FlowFields ff_;
    Grid g_;
};

// Unit normal to sigma (metric sense) pointing along grad H~.
std::array<double, 2> unit_normal(const GeodesicFlow& fl, const CurveSpec& c, double u, double v) {
    auto [hu, hv] = c.gradient(u, v);
    Metric2 m = fl.metric(u, v);
    double det = m.E * m.G - m.F * m.F;
    double nu = (m.G * hu - m.F * hv) / det, nv = (-m.F * hu + m.E * hv) / det;
    double len = std::sqrt(nu * hu + nv * hv);
    return {nu / len, nv / len};
}

// Unit tangent with (n, t) positively oriented.
std::array<double, 2> unit_tangent(const GeodesicFlow& fl, const CurveSpec& c, double u, double v) {
    auto [hu, hv] = c.gradient(u, v);
    Metric2 m = fl.metric(u, v);
    double tu = -hv, tv = hu;
    double len = std::sqrt(m.E * tu * tu + 2 * m.F * tu * tv + m.G * tv * tv);
    return {tu / len, tv / len};
}

}  // namespace

GeodesicParallelResult to_geodesic_parallel(const MetricPatch& metric, const CurveSpec& sigma,
                                            const GeodesicParallelOptions& opt) {
    metric.validate();
    const Grid& gin = metric.grid();
    GeodesicFlow flow(metric);
    double tol = 1e-9 * std::max(gin.x1 - gin.x0, gin.y1 - gin.y0);

    int nu = opt.nu > 0 ? opt.nu : gin.nx;
    int nv = opt.nv > 0 ? opt.nv : gin.ny;
    double uh = opt.u_half > 0 ? opt.u_half : 0.5 * (gin.x1 - gin.x0);
    double vh = opt.v_half > 0 ? opt.v_half : 0.5 * (gin.y1 - gin.y0);
    Grid gout = Grid::box(nu, nv, -uh, uh, -vh, vh);

    // Foot point on sigma closest to the center of the patch.
    double pu = 0.5 * (gin.x0 + gin.x1), pv = 0.5 * (gin.y0 + gin.y1);
    for (int it = 0; it < 50; ++it) {
        auto [hu, hv] = sigma.gradient(pu, pv);
        double H = sigma.value(pu, pv), n2 = hu * hu + hv * hv;
        require(n2 > 0, "not-a-geodesic", "defining function has vanishing gradient");
        pu -= H * hu / n2;
        pv -= H * hv / n2;
        if (std::abs(H) < 1e-15) break;
    }

    // Trace sigma by metric arclength at the output v nodes.
    std::vector<std::array<double, 2>> foot(nv);
    auto tangent_step = [&](std::array<double, 2> p, double dt) {
        auto f = [&](std::array<double, 2> q) { return unit_tangent(flow, sigma, q[0], q[1]); };
        auto k1 = f(p);
        auto k2 = f({p[0] + dt / 2 * k1[0], p[1] + dt / 2 * k1[1]});
        auto k3 = f({p[0] + dt / 2 * k2[0], p[1] + dt / 2 * k2[1]});
        auto k4 = f({p[0] + dt * k3[0], p[1] + dt * k3[1]});
        return std::array<double, 2>{p[0] + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                                     p[1] + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
    };
    double hv = gout.hy();
    int jc = (nv - 1) / 2;
    require(std::abs(gout.y(jc)) < 1e-12 * vh || nv % 2 == 1, "bad-grid", "output grid needs a v = 0 node");
    foot[jc] = {pu, pv};
    for (int dir : {1, -1}) {
        std::array<double, 2> p{pu, pv};
        for (int j = jc + dir; j >= 0 && j < nv; j += dir) {
            p = tangent_step(p, dir * hv / 2);
            p = tangent_step(p, dir * hv / 2);
            require(flow.inside(p[0], p[1], tol), "domain-too-small", "sigma leaves the metric patch");
            foot[j] = p;
        }
    }

    // Geodesic curvature of the traced curve.
    double resid = 0;
    for (int j = 2; j + 2 < nv; ++j) {
        double acc[2], vel[2];
        for (int c = 0; c < 2; ++c) {
            vel[c] = (foot[j - 2][c] - 8 * foot[j - 1][c] + 8 * foot[j + 1][c] - foot[j + 2][c]) / (12 * hv);
            acc[c] = (-foot[j - 2][c] + 16 * foot[j - 1][c] - 30 * foot[j][c] + 16 * foot[j + 1][c] - foot[j + 2][c]) /
                     (12 * hv * hv);
        }
        GeodesicFlow::State s{foot[j][0], foot[j][1], vel[0], vel[1], 0, 0, 0, 0};
        auto r = flow.rhs(s);
        double cov[2] = {acc[0] - r[2], acc[1] - r[3]};
        auto n = unit_normal(flow, sigma, foot[j][0], foot[j][1]);
        Metric2 m = flow.metric(foot[j][0], foot[j][1]);
        double kg = m.E * cov[0] * n[0] + m.F * (cov[0] * n[1] + cov[1] * n[0]) + m.G * cov[1] * n[1];
        resid = std::max(resid, std::abs(kg));
    }
    require(resid <= opt.geodesic_tol, "not-a-geodesic",
            "geodesic curvature of sigma is " + std::to_string(resid));

    GeodesicParallelResult out;
    out.geodesic_residual = resid;
    GridField h(gout), uo(gout), vo(gout);
    double hu = gout.hx();
    int ic = (nu - 1) / 2;
    require(nu % 2 == 1, "bad-grid", "output grid needs a u = 0 node");
    const double dtau = 1e-4;
    for (int j = 0; j < nv; ++j) {
        auto p = foot[j];
        auto n = unit_normal(flow, sigma, p[0], p[1]);
        auto t = unit_tangent(flow, sigma, p[0], p[1]);
        auto np = unit_normal(flow, sigma, p[0] + dtau * t[0], p[1] + dtau * t[1]);
        auto nm = unit_normal(flow, sigma, p[0] - dtau * t[0], p[1] - dtau * t[1]);
        GeodesicFlow::State s0{p[0], p[1], n[0], n[1], t[0], t[1], (np[0] - nm[0]) / (2 * dtau),
                               (np[1] - nm[1]) / (2 * dtau)};
        for (int dir : {1, -1}) {
            GeodesicFlow::State s = s0;
            for (int i = ic; i >= 0 && i < nu; i += dir) {
                if (i != ic) {
                    s = flow.rk4(s, dir * hu / 2);
                    s = flow.rk4(s, dir * hu / 2);
                }
                require(flow.inside(s[0], s[1], tol), "domain-too-small", "geodesic flow leaves the metric patch");
                Metric2 m = flow.metric(s[0], s[1]);
                h(i, j) = std::sqrt(m.E * s[4] * s[4] + 2 * m.F * s[4] * s[5] + m.G * s[5] * s[5]);
                double ortho = m.E * s[2] * s[4] + m.F * (s[2] * s[5] + s[3] * s[4]) + m.G * s[3] * s[5];
                out.orthogonality_residual = std::max(out.orthogonality_residual, std::abs(ortho));
                uo(i, j) = s[0];
                vo(i, j) = s[1];
            }
        }
    }
    out.patch = MetricPatch::geodesic_parallel(std::move(h));
    out.u_of = std::move(uo);
    out.v_of = std::move(vo);
    return out;
}

VanishingOrder vanishing_order(const GridField& K, const CurveSpec& sigma, int max_order, double band_lo,
                               double band_hi) {
    const Grid& g = K.grid;
    double width = std::min(g.x1 - g.x0, g.y1 - g.y0);
    double floor = 1e-13 * std::max(K.max_abs(), 1e-300);
    const int nsamp = 9, nd = 12;
    double sxx = 0, sxy = 0;
    int used = 0;
    for (int s = 0; s < nsamp; ++s) {
        // Foot points spread along the middle half of the u-range.
        double u = g.x0 + (g.x1 - g.x0) * (0.25 + 0.5 * s / (nsamp - 1));
        double v = 0.5 * (g.y0 + g.y1);
        for (int it = 0; it < 50; ++it) {
            double H = sigma.value(u, v);
            v -= H / sigma.gradient(u, v)[1];
            if (std::abs(H) < 1e-15) break;
        }
        auto [hu, hv] = sigma.gradient(u, v);
        double len = std::hypot(hu, hv);
        double nu = hu / len, nv = hv / len;
        // Each side of each foot point is its own group with its own intercept.
        for (int side : {1, -1}) {
            std::vector<double> lx, ly;
            for (int k = 0; k < nd; ++k) {
                double d = width * band_lo * std::pow(band_hi / band_lo, double(k) / (nd - 1));
                double val = interp2(K, u + side * d * nu, v + side * d * nv);
                if (std::abs(val) <= floor) continue;
                lx.push_back(std::log(d));
                ly.push_back(std::log(std::abs(val)));
            }
            if (lx.size() < 3) continue;
            double mx = 0, my = 0;
            for (std::size_t k = 0; k < lx.size(); ++k) {
                mx += lx[k];
                my += ly[k];
            }
            mx /= lx.size();
            my /= ly.size();
            for (std::size_t k = 0; k < lx.size(); ++k) {
                sxx += (lx[k] - mx) * (lx[k] - mx);
                sxy += (lx[k] - mx) * (ly[k] - my);
            }
            ++used;
        }
    }
    require(used > 0, "infinite-order", "K vanishes identically near sigma");
    VanishingOrder r;
    r.fitted_slope = sxy / sxx;
    r.order = int(std::lround(r.fitted_slope));
    require(r.order <= max_order, "infinite-order", "no nonzero transverse derivative up to the configured order");
    r.n = r.order - 1;
    r.in_regime = r.n > 0 && r.n % 2 == 0;
    return r;
}

}  // namespace dma
