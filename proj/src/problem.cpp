#include "dma/problem.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dma/error.hpp"

namespace dma {

static const std::vector<std::string> kVars{"u", "v", "p", "q1", "q2"};

MAProblemSpec MAProblemSpec::parse(const std::string& a11, const std::string& a12, const std::string& a22,
                                   const std::string& f, const std::string& K, const std::string& Htilde, int n,
                                   const std::map<std::string, double>& constants, double M1) {
    MAProblemSpec s;
    s.a11 = Expr::parse(a11, kVars, constants);
    s.a12 = Expr::parse(a12, kVars, constants);
    s.a22 = Expr::parse(a22, kVars, constants);
    s.f = Expr::parse(f, kVars, constants);
    s.K = Expr::parse(K, kVars, constants);
    require(s.K.diff("p").is_zero() && s.K.diff("q1").is_zero() && s.K.diff("q2").is_zero(), "bad-problem",
            "K may depend on u and v only");
    s.sigma = CurveSpec::parse(Htilde, M1);
    require(n > 0, "bad-problem", "n must be positive");
    s.n = n;
    s.prepare();
    return s;
}

void MAProblemSpec::prepare() {
    const Expr* e[3] = {&a11, &a12, &a22};
    for (int k = 0; k < 3; ++k) {
        for (int c = 0; c < 3; ++c) da[k][c] = e[k]->diff(2 + c);
        df[k] = f.diff(2 + k);
    }
}

MAProblemSpec MAProblemSpec::model_T1(double k0) {
    return parse("0", "0", "0", "1", "k0*v^3", "v", 2, {{"k0", k0}});
}

namespace {

struct Args {
    double a[5];
};

Args args(const ScaledProblem& sp, double x, double y, double w, double wx, double wy) {
    double e = sp.eps, e2 = e * e;
    double u = e2 * x, v = e2 * y;
    double z = e2 * e2 * x * x / 2 + e2 * e2 * e * w;
    double zu = e2 * x + e2 * e * wx, zv = e2 * e * wy;
    return {{u, v, z, zu, zv}};
}

// Lagrange interpolation to t = 0 from samples at the given nodes.
double extrapolate_to_zero(const double* t, const double* val, int m) {
    double acc = 0;
    for (int a = 0; a < m; ++a) {
        double w = 1;
        for (int b = 0; b < m; ++b)
            if (b != a) w *= (0 - t[b]) / (t[a] - t[b]);
        acc += w * val[a];
    }
    return acc;
}

}  // namespace

NodeData ScaledProblem::node(double x, double y, double w, double wx, double wy) const {
    Args a = args(*this, x, y, w, wx, wy);
    NodeData d{};
    d.A11 = spec.a11.eval(a.a);
    d.A12 = spec.a12.eval(a.a);
    d.A22 = spec.a22.eval(a.a);
    double K = spec.K.eval(a.a);
    d.KF = K * spec.f.eval(a.a);
    for (int e = 0; e < 3; ++e)
        for (int c = 0; c < 3; ++c) d.dA[e][c] = spec.da[e][c].eval(a.a);
    for (int c = 0; c < 3; ++c) d.dKF[c] = K * spec.df[c].eval(a.a);
    return d;
}

HJet ScaledProblem::H(double x, double y) const {
    double e2 = eps * eps;
    double uv[2] = {e2 * x, e2 * y};
    const Expr& Ht = spec.sigma.H;
    HJet j;
    j.H = Ht.eval(uv) / e2;
    j.Hx = spec.sigma.Hu.eval(uv);
    j.Hy = spec.sigma.Hv.eval(uv);
    j.Hxx = e2 * spec.sigma.Huu.eval(uv);
    j.Hxy = e2 * spec.sigma.Huv.eval(uv);
    j.Hyy = e2 * spec.sigma.Hvv.eval(uv);
    return j;
}

GridField ScaledProblem::H_field(const Grid& g) const {
    return GridField::sample(g, [&](double x, double y) { return H(x, y).H; });
}

double ScaledProblem::ratio(const Expr& num, int power, double x, double y, double w, double wx, double wy) const {
    Args a = args(*this, x, y, w, wx, wy);
    const Expr& Ht = spec.sigma.H;
    double u = a.a[0], v = a.a[1];
    double Hv = std::abs(spec.sigma.Hv.eval({u, v}));
    double tau = 1e-7 * eps * eps * std::max(x0, y0) * std::max(Hv, 1e-12);
    double Hval = Ht.eval({u, v});
    if (std::abs(Hval) >= tau) return num.eval(a.a) / std::pow(Hval, power);
    // Deflation: sample the smooth quotient off sigma and extrapolate back.
    const double t[6] = {-5, -4, -3, 3, 4, 5};
    double delta = 2 * tau / std::max(Hv, 1e-300), val[6];
    for (int k = 0; k < 6; ++k) {
        double b[5] = {u, v + t[k] * delta, a.a[2], a.a[3], a.a[4]};
        val[k] = num.eval(b) / std::pow(Ht.eval({b[0], b[1]}), power);
    }
    return extrapolate_to_zero(t, val, 6);
}

double ScaledProblem::P(double x, double y, double w, double wx, double wy) const {
    Args a = args(*this, x, y, w, wx, wy);
    return ratio(spec.K, spec.n + 1, x, y, w, wx, wy) * spec.f.eval(a.a);
}

double ScaledProblem::Pij(int entry, double x, double y, double w, double wx, double wy) const {
    const Expr* e[3] = {&spec.a11, &spec.a12, &spec.a22};
    if (e[entry]->is_zero()) return 0.0;
    return ratio(*e[entry], spec.n, x, y, w, wx, wy);
}

ScaledProblem scale(const MAProblemSpec& problem, double eps, double x0, double y0, const ScaleOptions& opt) {
    require(eps > 0 && eps < 1, "bad-epsilon", "epsilon must lie in (0, 1)");
    require(problem.n % 2 == 0, "regime",
            "n = " + std::to_string(problem.n) + " is odd; the construction requires even n");
    require(eps * eps * x0 <= problem.u_half && eps * eps * y0 <= problem.v_half, "domain-too-small",
            "scaled rectangle does not map inside the data domain");
    ScaledProblem sp;
    sp.spec = problem;
    sp.eps = eps;
    sp.x0 = x0;
    sp.y0 = y0;

    // Vanishing orders on the original domain.
    Grid g = Grid::box(opt.check_nodes, opt.check_nodes, -problem.u_half, problem.u_half, -problem.v_half,
                       problem.v_half);
    problem.sigma.check_transversal(g);
    auto sample = [&](const Expr& e, double q1, double q2) {
        return GridField::sample(g, [&](double u, double v) {
            double a[5] = {u, v, 0.0, q1, q2};
            return e.eval(a);
        });
    };
    GridField K = sample(problem.K, 0, 0);
    VanishingOrder vk = vanishing_order(K, problem.sigma);
    require(vk.order == problem.n + 1, "inconsistent-order",
            "K vanishes to order " + std::to_string(vk.order) + " on sigma, expected " +
                std::to_string(problem.n + 1));
    for (const Expr* e : {&problem.a11, &problem.a12, &problem.a22}) {
        if (e->is_zero()) continue;
        for (auto [q1, q2] : {std::pair{0.0, 0.0}, std::pair{0.3, -0.2}}) {
            GridField a = sample(*e, q1, q2);
            if (a.max_abs() == 0) continue;
            VanishingOrder va;
            try {
                va = vanishing_order(a, problem.sigma);
            } catch (const Error&) {
                continue;
            }
            require(va.order >= problem.n, "inconsistent-order", "a_ij vanishes to order below n on sigma");
        }
    }

    // Reconstruction identity and factor bounds on X.
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ux(-x0, x0), uy(-y0, y0), uw(-1, 1);
    for (int k = 0; k < 100; ++k) {
        double x = ux(rng), y = uy(rng), w = uw(rng), wx = uw(rng), wy = uw(rng);
        NodeData d = sp.node(x, y, w, wx, wy);
        double Ht = eps * eps * sp.H(x, y).H;
        double rec = std::pow(Ht, problem.n + 1) * sp.P(x, y, w, wx, wy);
        require(std::abs(rec - d.KF) <= opt.reconstruction_tol * std::max(std::abs(d.KF), 1e-300),
                "inconsistent-order", "factorization residual above tolerance");
    }
    double M2 = INFINITY, M1 = INFINITY;
    const int m = 41;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            double x = -x0 + 2 * x0 * i / (m - 1), y = -y0 + 2 * y0 * j / (m - 1);
            M2 = std::min(M2, sp.P(x, y, 0, 0, 0));
            HJet h = sp.H(x, y);
            if (std::abs(h.H) <= 2 * y0 / (m - 1) * std::abs(h.Hy) + 1e-300) M1 = std::min(M1, h.Hy);
        }
    require(M2 > 0, "not-positive", "factor P is not positive on X");
    require(M1 > 0, "not-transversal", "H_y is not positive near H = 0");
    sp.M1 = M1;
    sp.M2 = M2;
    return sp;
}

WJet WJet::of(const GridField& w) {
    return WJet{w, dx(w), dy(w), dxx(w), dxy(w), dyy(w)};
}

PhiEval evaluate_phi(const ScaledProblem& sp, const WJet& j) {
    const Grid& g = j.w.grid;
    PhiEval r{GridField(g), GridField(g), GridField(g), GridField(g), GridField(g)};
    double e = sp.eps;
    for (int jj = 0; jj < g.ny; ++jj)
        for (int i = 0; i < g.nx; ++i) {
            NodeData d = sp.node(g.x(i), g.y(jj), j.w(i, jj), j.wx(i, jj), j.wy(i, jj));
            double m11 = 1 + e * j.wxx(i, jj) + d.A11;
            double m12 = e * j.wxy(i, jj) + d.A12;
            double m22 = e * j.wyy(i, jj) + d.A22;
            r.M11(i, jj) = m11;
            r.M12(i, jj) = m12;
            r.M22(i, jj) = m22;
            r.KF(i, jj) = d.KF;
            r.Phi(i, jj) = m11 * m22 - m12 * m12 - d.KF;
        }
    return r;
}

GridField phi(const ScaledProblem& sp, const GridField& w) { return evaluate_phi(sp, WJet::of(w)).Phi; }

LinearOperatorField linearize(const ScaledProblem& sp, const WJet& j) {
    const Grid& g = j.w.grid;
    LinearOperatorField L(g, Stage::L1, Frame::XY);
    double e = sp.eps, e3 = e * e * e, e5 = e3 * e * e;
    for (int jj = 0; jj < g.ny; ++jj)
        for (int i = 0; i < g.nx; ++i) {
            NodeData d = sp.node(g.x(i), g.y(jj), j.w(i, jj), j.wx(i, jj), j.wy(i, jj));
            double m11 = 1 + e * j.wxx(i, jj) + d.A11;
            double m12 = e * j.wxy(i, jj) + d.A12;
            double m22 = e * j.wyy(i, jj) + d.A22;
            L.a11(i, jj) = e * m22;
            L.a12(i, jj) = -e * m12;
            L.a22(i, jj) = e * m11;
            // Chain rule through p = z, q1 = z_u, q2 = z_v.
            double c[3];
            for (int k = 0; k < 3; ++k)
                c[k] = m22 * d.dA[0][k] + m11 * d.dA[2][k] - 2 * m12 * d.dA[1][k] - d.dKF[k];
            L.a0(i, jj) = e5 * c[0];
            L.a1(i, jj) = e3 * c[1];
            L.a2(i, jj) = e3 * c[2];
        }
    return L;
}

LinearOperatorField linearize(const ScaledProblem& sp, const GridField& w) { return linearize(sp, WJet::of(w)); }

double c_surrogate_norm(const GridField& w, int order) {
    double m = 0;
    for (int a = 0; a <= order; ++a)
        for (int b = 0; a + b <= order; ++b) m = std::max(m, deriv(w, a, b).max_abs());
    return m;
}

}  // namespace dma
