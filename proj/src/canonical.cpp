#include "dma/canonical.hpp"

#include <algorithm>
#include <cmath>

#include "dma/error.hpp"

namespace dma {

namespace {

constexpr int kOrder = 6;

// Lagrange weights of one 2D point, reusable across fields on the same grid.
struct Stencil {
    int ix[kOrder], iy[kOrder];
    double wx[kOrder], wy[kOrder];

    Stencil(const Grid& g, double x, double y) {
        weights(x, g.x0, g.hx(), g.nx, g.periodic_x, ix, wx);
        weights(y, g.y0, g.hy(), g.ny, false, iy, wy);
    }

    static void weights(double x, double x0, double h, int n, bool periodic, int* idx, double* w) {
        double t = (x - x0) / h;
        int base = int(std::floor(t)) - (kOrder / 2 - 1);
        if (!periodic) base = std::clamp(base, 0, n - kOrder);
        for (int a = 0; a < kOrder; ++a) {
            double p = 1;
            for (int b = 0; b < kOrder; ++b)
                if (b != a) p *= (t - (base + b)) / double(a - b);
            w[a] = p;
            int k = base + a;
            idx[a] = periodic ? ((k % n) + n) % n : k;
        }
    }

    double operator()(const GridField& f) const {
        double acc = 0;
        for (int b = 0; b < kOrder; ++b) {
            if (wy[b] == 0) continue;
            const double* row = &f.v[std::size_t(iy[b]) * f.grid.nx];
            double r = 0;
            for (int a = 0; a < kOrder; ++a) r += wx[a] * row[ix[a]];
            acc += wy[b] * r;
        }
        return acc;
    }
};

double row_interp(const GridField& f, int j, double x) {
    const Grid& g = f.grid;
    return interp1(&f.v[std::size_t(j) * g.nx], g.nx, g.x0, g.hx(), x, kOrder, g.periodic_x);
}

double max_abs_of(const GridField& f) { return f.v.empty() ? 0.0 : f.max_abs(); }

// State of one characteristic: position and its first two derivatives in the seed.
struct CharState {
    double X, Xs, Xss;
};

}  // namespace

double CharMap::xi_at(double x, int j) const { return x + row_interp(xi_shift, j, x); }

double CharMap::foot_at(double s, int j) const { return s + row_interp(foot_shift, j, s); }

double CharMap::foot_at(double s, double t) const { return s + interp2(foot_shift, s, t, kOrder); }

CharMap solve_characteristics(const GridField& speed, const CharOptions& opt) {
    const Grid& g = speed.grid;
    require(opt.oversample >= 1 && opt.substeps >= 1, "bad-option", "characteristic resolution must be positive");
    GridField cx = dx(speed), cy = dy(speed), cxx = dxx(speed);
    const double h = g.hx(), hs = h / opt.oversample;
    const double T = std::max(std::abs(g.y0), std::abs(g.y1));
    const double cmax = max_abs_of(speed);
    const double extent = g.x1 - g.x0;
    require(cmax * T <= opt.max_drift * extent, "eps-too-large",
            "characteristics drift " + std::to_string(cmax * T) + " beyond the working strip");

    const int pad = int(std::ceil((cmax * T + 4 * h) / hs)) + kOrder;
    const int cover = g.periodic_x ? g.nx : g.nx - 1;
    const int ns = cover * opt.oversample + 1 + 2 * pad;
    const double s0 = g.x0 - pad * hs;

    CharMap m;
    m.grid = g;
    for (GridField* f : {&m.xi, &m.xi_x, &m.xi_y, &m.xi_xx, &m.xi_xy, &m.xi_yy, &m.foot, &m.foot_s, &m.xi_shift,
                         &m.foot_shift})
        *f = GridField(g);
    m.min_jacobian = INFINITY;
    m.max_jacobian = -INFINITY;

    std::vector<double> X(ns), Xs(ns), Xss(ns);
    auto rhs = [&](const CharState& s, double t) {
        Stencil st(g, s.X, t);
        double c = st(speed), c1 = st(cx), c2 = st(cxx);
        return CharState{c, c1 * s.Xs, c2 * s.Xs * s.Xs + c1 * s.Xss};
    };
    auto advance = [&](double t0, double t1) {
        int steps = opt.substeps * std::max(1, int(std::lround(std::abs(t1 - t0) / g.hy())));
        double dt = (t1 - t0) / steps;
        for (int k = 0; k < ns; ++k) {
            CharState s{X[k], Xs[k], Xss[k]};
            double t = t0;
            for (int q = 0; q < steps; ++q) {
                CharState k1 = rhs(s, t);
                CharState k2 = rhs({s.X + dt / 2 * k1.X, s.Xs + dt / 2 * k1.Xs, s.Xss + dt / 2 * k1.Xss}, t + dt / 2);
                CharState k3 = rhs({s.X + dt / 2 * k2.X, s.Xs + dt / 2 * k2.Xs, s.Xss + dt / 2 * k2.Xss}, t + dt / 2);
                CharState k4 = rhs({s.X + dt * k3.X, s.Xs + dt * k3.Xs, s.Xss + dt * k3.Xss}, t + dt);
                s.X += dt / 6 * (k1.X + 2 * k2.X + 2 * k3.X + k4.X);
                s.Xs += dt / 6 * (k1.Xs + 2 * k2.Xs + 2 * k3.Xs + k4.Xs);
                s.Xss += dt / 6 * (k1.Xss + 2 * k2.Xss + 2 * k3.Xss + k4.Xss);
                t = (q + 1 == steps) ? t1 : t + dt;
            }
            X[k] = s.X;
            Xs[k] = s.Xs;
            Xss[k] = s.Xss;
        }
    };
    auto record = [&](int j) {
        double y = g.y(j);
        for (int k = 0; k < ns; ++k) {
            m.min_jacobian = std::min(m.min_jacobian, Xs[k]);
            m.max_jacobian = std::max(m.max_jacobian, Xs[k]);
            if (!(Xs[k] > opt.min_jacobian))
                throw Error("fold", "characteristic map folds at row y = " + std::to_string(y));
        }
        int k = 0;
        for (int i = 0; i < g.nx; ++i) {
            double x = g.x(i);
            require(x >= X[0] && x <= X[ns - 1], "eps-too-large", "characteristic fan does not cover the grid");
            while (k + 2 < ns && X[k + 1] < x) ++k;
            double s = s0 + (k + (x - X[k]) / (X[k + 1] - X[k])) * hs;
            for (int it = 0; it < 40; ++it) {
                double f = interp1(X.data(), ns, s0, hs, s, kOrder) - x;
                double d = interp1(Xs.data(), ns, s0, hs, s, kOrder);
                double step = f / d;
                s -= step;
                if (std::abs(step) <= 1e-15 * (1 + std::abs(s))) break;
            }
            double js = interp1(Xs.data(), ns, s0, hs, s, kOrder);
            double jss = interp1(Xss.data(), ns, s0, hs, s, kOrder);
            double c = speed(i, j), c1 = cx(i, j), c2 = cy(i, j);
            double ex = 1 / js, exx = -jss / (js * js * js);
            double ey = -c * ex, exy = -c1 * ex - c * exx, eyy = -c2 * ex - c * exy;
            m.xi(i, j) = s;
            m.xi_shift(i, j) = s - x;
            m.xi_x(i, j) = ex;
            m.xi_xx(i, j) = exx;
            m.xi_y(i, j) = ey;
            m.xi_xy(i, j) = exy;
            m.xi_yy(i, j) = eyy;
            int seed = pad + i * opt.oversample;
            m.foot(i, j) = X[seed];
            m.foot_shift(i, j) = X[seed] - x;
            m.foot_s(i, j) = Xs[seed];
        }
    };
    auto reset = [&] {
        for (int k = 0; k < ns; ++k) {
            X[k] = s0 + k * hs;
            Xs[k] = 1;
            Xss[k] = 0;
        }
    };

    // Upward from t = 0, then downward.
    reset();
    double t = 0;
    for (int j = 0; j < g.ny; ++j) {
        if (g.y(j) < 0) continue;
        advance(t, g.y(j));
        t = g.y(j);
        record(j);
    }
    reset();
    t = 0;
    for (int j = g.ny - 1; j >= 0; --j) {
        if (g.y(j) >= 0) continue;
        advance(t, g.y(j));
        t = g.y(j);
        record(j);
    }

    double err = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) err = std::max(err, std::abs(m.xi_at(m.foot(i, j), j) - g.x(i)));
    m.composition_error = err;
    return m;
}

LinearOperatorField reduce_to_L3(const LinearOperatorField& L1, const PhiEval& pe, double eps, double floor) {
    const Grid& g = L1.grid();
    require(pe.M11.min() >= floor, "reduction-breakdown",
            "1 + eps Q drops to " + std::to_string(pe.M11.min()) + "; epsilon too large");
    LinearOperatorField L3(g, Stage::L3, Frame::XY);
    for (std::size_t k = 0; k < g.size(); ++k) {
        double m11 = pe.M11.v[k], m12 = pe.M12.v[k], norm = eps * m11;
        // (L1.a11 - eps Phi / M11) / norm after cancelling M22 by hand.
        L3.a11.v[k] = (m12 * m12 + pe.KF.v[k]) / (m11 * m11);
        L3.a12.v[k] = L1.a12.v[k] / norm;
        L3.a22.v[k] = 1.0;
        L3.a1.v[k] = L1.a1.v[k] / norm;
        L3.a2.v[k] = L1.a2.v[k] / norm;
        L3.a0.v[k] = L1.a0.v[k] / norm;
    }
    return L3;
}

LinearOperatorField transform_first(const LinearOperatorField& L3, const CharMap& map, const ScaledProblem& sp,
                                    const WJet& jet, const PhiEval& pe, GridField* P11_out, StageReport* report) {
    const Grid& g = L3.grid();
    LinearOperatorField L4(g, Stage::L4, Frame::XiEta);
    L4.node_anchored = true;
    GridField P11(g);
    const int n = sp.n();
    const double scale = std::pow(sp.eps, 2 * (n + 1));
    double chain_max = 0, mismatch = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double x = g.x(i), y = g.y(j);
            double c = L3.a12(i, j), a11 = L3.a11(i, j);
            double ex = map.xi_x(i, j), ey = map.xi_y(i, j);
            double chain = a11 * ex * ex + 2 * c * ex * ey + ey * ey;
            double m11 = pe.M11(i, j);
            double p = sp.P(x, y, jet.w(i, j), jet.wx(i, j), jet.wy(i, j)) * ex * ex / (m11 * m11);
            double b11 = scale * std::pow(sp.H(x, y).H, n + 1) * p;
            chain_max = std::max(chain_max, std::abs(chain));
            mismatch = std::max(mismatch, std::abs(chain - b11));
            P11(i, j) = p;
            L4.a11(i, j) = b11;
            L4.a12(i, j) = c * ex + ey;
            L4.a22(i, j) = 1.0;
            L4.a1(i, j) = a11 * map.xi_xx(i, j) + 2 * c * map.xi_xy(i, j) + map.xi_yy(i, j) + L3.a1(i, j) * ex +
                          L3.a2(i, j) * ey;
            L4.a2(i, j) = L3.a2(i, j);
            L4.a0(i, j) = L3.a0(i, j);
        }
    double b12_in = max_abs_of(L3.a12), b12_out = max_abs_of(L4.a12);
    double ratio = b12_in > 0 ? b12_out / b12_in : b12_out;
    require(ratio <= 1e-8, "transport-inconsistency",
            "mixed coefficient survives the first change of variables: ratio " + std::to_string(ratio));
    require(P11.min() > 0, "not-positive", "factor of the xi-xi coefficient is not positive");
    if (P11_out) *P11_out = P11;
    if (report) {
        report->b12_ratio = ratio;
        report->factor_min = P11.min();
        report->factor_mismatch = chain_max > 0 ? mismatch / chain_max : mismatch;
        report->jacobian_min = map.xi_x.min();
        report->jacobian_max = map.xi_x.max();
    }
    return L4;
}

GridField phi_bracket(const PhiEval& pe, const CharMap& map) {
    GridField m2 = 2.0 * (pe.M11 * pe.M11);
    GridField bracket = dx(pe.Phi / m2) + dx(pe.Phi) / m2;
    return bracket * map.xi_x;
}

LinearOperatorField drop_phi_terms(const LinearOperatorField& L4, const GridField& removed) {
    LinearOperatorField L5 = L4;
    L5.stage = Stage::L5;
    L5.a1 = L4.a1 - removed;
    return L5;
}

GridField FrameResampler::operator()(const GridField& anchored) const {
    GridField out(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) out.v[k] = interp2(anchored, x_of.v[k], y_of.v[k], kOrder);
    return out;
}

namespace {

// Solves B(eta) = target on a column sampled at the grid rows; returns eta and
// whether the target was bracketed by the samples.
std::pair<double, bool> invert_column(const std::vector<double>& B, const Grid& g, double target) {
    const int ny = g.ny;
    const double hy = g.hy();
    if (target == B[0]) return {g.y(0), true};
    if (target == B[ny - 1]) return {g.y(ny - 1), true};
    if (target < B[0] || target > B[ny - 1]) {
        int k = target < B[0] ? 0 : ny - 2;
        return {g.y(k) + (target - B[k]) / (B[k + 1] - B[k]) * hy, false};
    }
    int k = int(std::upper_bound(B.begin(), B.end(), target) - B.begin()) - 1;
    k = std::clamp(k, 0, ny - 2);
    if (B[k] == target) return {g.y(k), true};
    double lo = g.y(k), hi = g.y(k + 1);
    double eta = lo + (target - B[k]) / (B[k + 1] - B[k]) * hy;
    for (int it = 0; it < 60; ++it) {
        double f = interp1(B.data(), ny, g.y0, hy, eta, kOrder) - target;
        double d = 1e-6 * hy;
        double fp = (interp1(B.data(), ny, g.y0, hy, eta + d, kOrder) -
                     interp1(B.data(), ny, g.y0, hy, eta - d, kOrder)) /
                    (2 * d);
        double next = eta - f / fp;
        if (!(next > lo && next < hi)) {
            // Bisection step when Newton leaves the bracket.
            double flo = interp1(B.data(), ny, g.y0, hy, lo, kOrder) - target;
            next = 0.5 * (lo + hi);
            double fm = interp1(B.data(), ny, g.y0, hy, next, kOrder) - target;
            if ((fm < 0) == (flo < 0))
                lo = next;
            else
                hi = next;
        }
        if (std::abs(next - eta) <= 1e-15 * (1 + std::abs(eta))) {
            eta = next;
            break;
        }
        eta = next;
    }
    return {eta, true};
}

}  // namespace

SecondTransform transform_second(const LinearOperatorField& L5, const CharMap& first, const GridField& P11_first,
                                 const ScaledProblem& sp, const CharOptions& opt) {
    const Grid& g = L5.grid();
    const int n = sp.n();
    const double scale = std::pow(sp.eps, 2 * (n + 1));
    SecondTransform r;
    for (GridField* f : {&r.alpha, &r.beta, &r.alpha_xi, &r.alpha_eta, &r.beta_xi, &r.beta_eta, &r.alpha_x,
                         &r.alpha_y, &r.beta_x, &r.beta_y, &r.P22, &r.P11})
        *f = GridField(g);
    GridField beta_xixi(g), beta_etaeta(g), speed(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            HJet h = sp.H(g.x(i), g.y(j));
            double ex = first.xi_x(i, j), ey = first.xi_y(i, j);
            double c = -ey / ex;
            double cx = -(first.xi_xy(i, j) + c * first.xi_xx(i, j)) / ex;
            double cy = -(first.xi_yy(i, j) + c * first.xi_xy(i, j)) / ex;
            double x_xi = 1 / ex, x_xixi = -first.xi_xx(i, j) / (ex * ex * ex), x_etaeta = cx * c + cy;
            double bxi = h.Hx * x_xi, beta = h.Hx * c + h.Hy;
            r.beta(i, j) = h.H;
            r.beta_xi(i, j) = bxi;
            r.beta_eta(i, j) = beta;
            r.beta_x(i, j) = h.Hx;
            r.beta_y(i, j) = h.Hy;
            beta_xixi(i, j) = h.Hxx * x_xi * x_xi + h.Hx * x_xixi;
            beta_etaeta(i, j) = h.Hxx * c * c + 2 * h.Hxy * c + h.Hyy + h.Hx * x_etaeta;
            speed(i, j) = L5.a11(i, j) * bxi / beta;
        }
    r.report.transversality_min = r.beta_eta.min();
    require(r.report.transversality_min > 0.1, "not-transversal",
            "H_eta drops to " + std::to_string(r.report.transversality_min));

    // Characteristic speed on the (xi, eta) tensor grid.
    GridField speed_t(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) speed_t(i, j) = row_interp(speed, j, first.foot(i, j));
    r.map = solve_characteristics(speed_t, opt);
    const CharMap& am = r.map;

    LinearOperatorField& L6 = r.L6;
    L6 = LinearOperatorField(g, Stage::L6, Frame::AlphaBeta);
    L6.node_anchored = true;
    GridField a_xixi(g), a_etaeta(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double xi = first.xi(i, j);
            r.alpha(i, j) = am.xi_at(xi, j);
            r.alpha_xi(i, j) = row_interp(am.xi_x, j, xi);
            r.alpha_eta(i, j) = row_interp(am.xi_y, j, xi);
            a_xixi(i, j) = row_interp(am.xi_xx, j, xi);
            a_etaeta(i, j) = row_interp(am.xi_yy, j, xi);
        }
    double b12_max = 0, b22_max = 0, chain_max = 0, mismatch = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double b11 = L5.a11(i, j), b1 = L5.a1(i, j), b2 = L5.a2(i, j);
            double axi = r.alpha_xi(i, j), aeta = r.alpha_eta(i, j);
            double bxi = r.beta_xi(i, j), beta_ = r.beta_eta(i, j);
            double p22 = b11 * bxi * bxi + beta_ * beta_;
            double p11 = P11_first(i, j) * axi * axi / (beta_ * beta_);
            double b11_6 = scale * std::pow(r.beta(i, j), n + 1) * p11 * p22;
            double chain = b11 * axi * axi + aeta * aeta;
            chain_max = std::max(chain_max, std::abs(chain));
            mismatch = std::max(mismatch, std::abs(chain - b11_6));
            r.P22(i, j) = p22;
            r.P11(i, j) = p11;
            L6.a11(i, j) = b11_6;
            L6.a12(i, j) = b11 * axi * bxi + aeta * beta_;
            L6.a22(i, j) = p22;
            L6.a1(i, j) = b11 * a_xixi(i, j) + a_etaeta(i, j) + b1 * axi + b2 * aeta;
            L6.a2(i, j) = b11 * beta_xixi(i, j) + beta_etaeta(i, j) + b1 * bxi + b2 * beta_;
            L6.a0(i, j) = L5.a0(i, j);
            r.alpha_x(i, j) = axi * first.xi_x(i, j);
            r.alpha_y(i, j) = axi * first.xi_y(i, j) + aeta;
            b12_max = std::max(b12_max, std::abs(L6.a12(i, j)));
            b22_max = std::max(b22_max, p22);
        }
    r.report.b12_ratio = b12_max / b22_max;
    r.report.factor_min = r.P11.min();
    r.report.factor_mismatch = chain_max > 0 ? mismatch / chain_max : mismatch;
    r.report.jacobian_min = am.xi_x.min();
    r.report.jacobian_max = am.xi_x.max();
    require(r.report.b12_ratio <= 1e-8, "transport-inconsistency",
            "mixed coefficient survives the second change of variables: " + std::to_string(r.report.b12_ratio));
    require(r.P22.min() > 0, "not-positive", "beta-beta coefficient is not positive");
    require(r.report.factor_min > 0, "not-positive", "factor of the alpha-alpha coefficient is not positive");

    // Inverse map from the (alpha, beta) tensor grid to physical points.
    FrameResampler& rs = r.resample;
    rs.grid = g;
    rs.x_of = GridField(g);
    rs.y_of = GridField(g);
    std::vector<double> B(g.ny), Xi(g.ny);
    std::vector<char> inside(g.size(), 0);
    for (int i = 0; i < g.nx; ++i) {
        for (int jj = 0; jj < g.ny; ++jj) {
            Xi[jj] = am.foot(i, jj);
            B[jj] = sp.H(first.foot_at(Xi[jj], jj), g.y(jj)).H;
        }
        for (int jj = 0; jj + 1 < g.ny; ++jj)
            require(B[jj + 1] > B[jj], "not-transversal", "beta is not monotone along a characteristic column");
        for (int j = 0; j < g.ny; ++j) {
            auto [eta, ok] = invert_column(B, g, g.y(j));
            double xi = interp1(Xi.data(), g.ny, g.y0, g.hy(), eta, kOrder);
            rs.x_of(i, j) = first.foot_at(xi, eta);
            rs.y_of(i, j) = eta;
            inside[std::size_t(j) * g.nx + i] = ok;
        }
    }
    double err = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            std::size_t k = std::size_t(j) * g.nx + i;
            if (!inside[k]) continue;
            double x = rs.x_of.v[k], y = rs.y_of.v[k];
            double xi = x + interp2(first.xi_shift, x, y, kOrder);
            double alpha = xi + interp2(am.xi_shift, xi, y, kOrder);
            double beta = sp.H(x, y).H;
            err = std::max({err, std::abs(alpha - g.x(i)), std::abs(beta - g.y(j))});
        }
    rs.inverse_error = err;
    return r;
}

LinearOperatorField normalize_L7(const LinearOperatorField& L6) {
    const Grid& g = L6.grid();
    require(L6.a22.min() > 0, "not-positive", "cannot normalize by a non-positive beta-beta coefficient");
    LinearOperatorField L7 = L6;
    L7.stage = Stage::L7;
    for (std::size_t k = 0; k < g.size(); ++k) {
        double d = L6.a22.v[k];
        L7.a11.v[k] = L6.a11.v[k] / d;
        L7.a12.v[k] = L6.a12.v[k] / d;
        L7.a22.v[k] = 1.0;
        L7.a1.v[k] = L6.a1.v[k] / d;
        L7.a2.v[k] = L6.a2.v[k] / d;
        L7.a0.v[k] = L6.a0.v[k] / d;
    }
    return L7;
}

double ExtendedOperator::phi2(int i, int j) const {
    return kit.phi(alpha_scale * grid.x(i)).v * kit.phi(grid.y(j)).v;
}

GridField ExtendedOperator::A() const {
    GridField r(grid);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) r(i, j) = kit.psi1(grid.y(j)).v + phi2(i, j) * Abar(i, j);
    return r;
}

GridField ExtendedOperator::D() const {
    GridField r(grid);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) r(i, j) = phi2(i, j) * Dbar(i, j);
    return r;
}

GridField ExtendedOperator::E() const {
    GridField r(grid);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) r(i, j) = kit.psi2(grid.y(j)).v + phi2(i, j) * Ebar(i, j);
    return r;
}

GridField ExtendedOperator::F() const {
    GridField r(grid);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) r(i, j) = kit.psi3(grid.y(j)).v + phi2(i, j) * Fbar(i, j);
    return r;
}

ExtendedOperator::Derivatives ExtendedOperator::derivatives() const {
    Derivatives d;
    for (GridField* f : {&d.A, &d.A_a, &d.A_b, &d.A_aa, &d.D, &d.D_a, &d.E, &d.E_b, &d.F, &d.F_b})
        *f = GridField(grid);
    GridField Aa = dx(Abar), Ab = dy(Abar), Aaa = dxx(Abar), Da = dx(Dbar), Eb = dy(Ebar), Fb = dy(Fbar);
    std::vector<Jet> pa(grid.nx);
    for (int i = 0; i < grid.nx; ++i) {
        Jet p = kit.phi(alpha_scale * grid.x(i));
        pa[i] = {p.v, alpha_scale * p.d1, alpha_scale * alpha_scale * p.d2};
    }
    for (int j = 0; j < grid.ny; ++j) {
        double y = grid.y(j);
        Jet pb = kit.phi(y), p1 = kit.psi1(y), p2 = kit.psi2(y), p3 = kit.psi3(y);
        for (int i = 0; i < grid.nx; ++i) {
            double P = pa[i].v * pb.v, Pa = pa[i].d1 * pb.v, Pb = pa[i].v * pb.d1, Paa = pa[i].d2 * pb.v;
            double A = Abar(i, j), D = Dbar(i, j), E = Ebar(i, j), F = Fbar(i, j);
            d.A(i, j) = p1.v + P * A;
            d.A_a(i, j) = Pa * A + P * Aa(i, j);
            d.A_b(i, j) = p1.d1 + Pb * A + P * Ab(i, j);
            d.A_aa(i, j) = Paa * A + 2 * Pa * Aa(i, j) + P * Aaa(i, j);
            d.D(i, j) = P * D;
            d.D_a(i, j) = Pa * D + P * Da(i, j);
            d.E(i, j) = p2.v + P * E;
            d.E_b(i, j) = p2.d1 + Pb * E + P * Eb(i, j);
            d.F(i, j) = p3.v + P * F;
            d.F_b(i, j) = p3.d1 + Pb * F + P * Fb(i, j);
        }
    }
    return d;
}

LinearOperatorField ExtendedOperator::as_field() const {
    LinearOperatorField L(grid, Stage::L7, Frame::AlphaBeta);
    L.a11 = A();
    L.a22 = GridField(grid, 1.0);
    L.a1 = D();
    L.a2 = E();
    L.a0 = F();
    return L;
}

GridField ExtendedOperator::apply(const GridField& u) const { return as_field().apply(u); }

ExtendedOperator extend_coefficients(const LinearOperatorField& L7, const FrameResampler& resample,
                                     const CutoffKit& kit, double alpha_scale) {
    require(kit.audit().pass(), "invalid-cutoff", "cutoff kit fails its audit");
    require(L7.grid() == resample.grid, "grid-mismatch", "resampler and operator grids differ");
    ExtendedOperator e{resample.grid, kit, alpha_scale, resample(L7.a11), resample(L7.a1), resample(L7.a2),
                       resample(L7.a0)};
    return e;
}

nlohmann::json CanonicalForm::summary() const {
    auto rep = [](const StageReport& r) {
        return nlohmann::json{{"b12_ratio", r.b12_ratio},           {"factor_min", r.factor_min},
                              {"factor_mismatch", r.factor_mismatch}, {"jacobian_min", r.jacobian_min},
                              {"jacobian_max", r.jacobian_max},       {"transversality_min", r.transversality_min}};
    };
    double b12_3 = L3.a12.max_abs(), b12_7 = L7.a12.max_abs();
    return {{"first_map", rep(first_report)},
            {"second_map", rep(second.report)},
            {"first_composition_error", first.composition_error},
            {"second_composition_error", second.map.composition_error},
            {"inverse_error", second.resample.inverse_error},
            {"max_b12_L3", b12_3},
            {"max_b12_L7", b12_7},
            {"min_P11_L7", second.P11.min()},
            {"removed_max", removed.max_abs()}};
}

CanonicalForm reduce(const ScaledProblem& sp, const GridField& w, const CutoffKit& kit,
                     const CanonicalOptions& opt) {
    CanonicalForm c;
    WJet jet = WJet::of(w);
    c.pe = evaluate_phi(sp, jet);
    c.L1 = linearize(sp, jet);
    c.L3 = reduce_to_L3(c.L1, c.pe, sp.eps, opt.reduction_floor);
    c.first = solve_characteristics(c.L3.a12, opt.chars);
    c.L4 = transform_first(c.L3, c.first, sp, jet, c.pe, &c.P11_first, &c.first_report);
    c.removed = phi_bracket(c.pe, c.first);
    c.removed_x = c.removed / c.first.xi_x;
    c.L5 = drop_phi_terms(c.L4, c.removed);
    c.second = transform_second(c.L5, c.first, c.P11_first, sp, opt.chars);
    c.L6 = c.second.L6;
    c.L7 = normalize_L7(c.second.L6);
    c.extended = extend_coefficients(c.L7, c.second.resample, kit, sp.y0 / sp.x0);
    return c;
}

Grid computational_grid(double x0, double y0, int nx, int ny, double mu2) {
    require(nx >= 16 && nx % 2 == 0 && ny >= 17 && (ny - 1) % 8 == 0, "bad-grid",
            "grid needs an even nx >= 16 and ny - 1 divisible by 8");
    int inner = std::max(1, int(std::lround(nx / (4 * mu2))));
    double hx = x0 / inner;
    Grid g;
    g.nx = nx;
    g.ny = ny;
    g.periodic_x = true;
    g.x0 = -(nx / 2) * hx;
    g.x1 = g.x0 + nx * hx;
    g.y0 = -4 * y0;
    g.y1 = 4 * y0;
    return g;
}

Block inner_block(const Grid& g, double x0, double y0) {
    int i0 = int(std::lround((-x0 - g.x0) / g.hx()));
    int i1 = int(std::lround((x0 - g.x0) / g.hx()));
    int j0 = int(std::lround((-y0 - g.y0) / g.hy()));
    int j1 = int(std::lround((y0 - g.y0) / g.hy()));
    require(i0 >= 0 && i1 < g.nx && j0 >= 0 && j1 < g.ny, "bad-grid", "X does not fit in the grid");
    return {i0, j0, i1 - i0 + 1, j1 - j0 + 1};
}

}  // namespace dma
