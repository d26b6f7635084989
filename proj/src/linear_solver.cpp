#include "dma/linear_solver.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dma/error.hpp"
#include "dma/fourier.hpp"

namespace dma {

namespace {

const double kPi = std::acos(-1.0);

GridField x_derivative(const GridField& u, int s) {
    if (s == 0) return u;
    return u.grid.periodic_x ? spectral_dx(u, s) : deriv(u, s, 0);
}

double sum_sq(const GridField& f) {
    double n = l2_norm(f);
    return n * n;
}

Eigen::VectorXd row_of(const GridField& f, int j) {
    return Eigen::Map<const Eigen::VectorXd>(&f.v[std::size_t(j) * f.grid.nx], f.grid.nx);
}

bool row_constant(const GridField& f, int j, double& value) {
    const double* r = &f.v[std::size_t(j) * f.grid.nx];
    auto [lo, hi] = std::minmax_element(r, r + f.grid.nx);
    value = r[0];
    return *hi - *lo <= 1e-15 * std::max(1.0, std::abs(*hi) + std::abs(*lo));
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
    void join(int a, int b) { parent[find(a)] = find(b); }
};

// Mode coupling of one y row: K2 d'' + K1 d' + K0 d.
struct RowBlock {
    bool dense = false;
    Eigen::MatrixXd K2, K1, K0;
    double c22 = 0, c12 = 0, c2 = 0, c11 = 0, c1 = 0, c0 = 0;
};

}  // namespace

double weighted_norm(const GridField& u, const WeightedNormSpec& spec) {
    require(spec.m >= 0 && spec.l >= 0 && spec.m <= kMaxNormOrder && spec.l <= kMaxNormOrder, "order",
            "weighted norm order beyond the supported differentiation order");
    require(spec.theta > 0 && spec.theta <= 1, "order", "theta must lie in (0, 1]");
    double acc = 0, w = 1;
    for (int s = 0; s <= spec.m; ++s, w *= spec.theta) {
        GridField ux = x_derivative(u, s);
        for (int t = 0; t <= spec.l; ++t) acc += w * sum_sq(t == 0 ? ux : deriv(ux, 0, t));
    }
    return std::sqrt(acc);
}

double sobolev_norm(const GridField& u, int m) {
    require(m >= 0 && m <= kMaxNormOrder, "order", "Sobolev order beyond the supported differentiation order");
    double acc = 0;
    for (int s = 0; s <= m; ++s) {
        GridField ux = x_derivative(u, s);
        for (int t = 0; s + t <= m; ++t) acc += sum_sq(t == 0 ? ux : deriv(ux, 0, t));
    }
    return std::sqrt(acc);
}

double GalerkinBasis::inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
    std::vector<double> a(f.data(), f.data() + f.size()), b(g.data(), g.data() + g.size());
    double h = grid.hx(), acc = 0, w = 1;
    for (int s = 0; s <= norm.m; ++s, w *= norm.theta) {
        std::vector<double> da = spectral_derivative(a, h, s), db = spectral_derivative(b, h, s);
        acc += w * h * std::inner_product(da.begin(), da.end(), db.begin(), 0.0);
    }
    return acc;
}

GalerkinBasis GalerkinBasis::trig(const Grid& g, int N, const WeightedNormSpec& norm) {
    require(g.periodic_x, "not-periodic", "trigonometric basis needs a periodic x direction");
    require(N >= 1 && N <= g.nx - 2, "basis-size", "N must stay below the Nyquist limit of the grid");
    require(norm.m >= 0 && norm.m <= kMaxNormOrder && norm.theta > 0 && norm.theta <= 1, "order",
            "invalid basis norm");
    GalerkinBasis b;
    b.grid = g;
    b.norm = norm;
    const int nx = g.nx, m = norm.m;
    const double h = g.hx(), L = nx * h;
    // Derivative stacks of each mode so Gram-Schmidt acts on all orders at once.
    std::vector<Eigen::MatrixXd> stack(N, Eigen::MatrixXd(nx, m + 1));
    for (int q = 0; q < N; ++q) {
        int k = (q + 1) / 2;
        b.wavenumber.push_back(k);
        double kk = 2 * kPi * k / L;
        for (int s = 0; s <= m; ++s)
            for (int i = 0; i < nx; ++i) {
                double arg = kk * (g.x(i) - g.x0) + (q % 2 == 1 ? 0.0 : -kPi / 2) + s * kPi / 2;
                stack[q](i, s) = q == 0 ? (s == 0 ? 1.0 : 0.0) : std::pow(kk, s) * std::cos(arg);
            }
    }
    Eigen::VectorXd weight(m + 1);
    for (int s = 0; s <= m; ++s) weight(s) = std::pow(norm.theta, s) * h;
    auto ip = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& c) {
        return (a.cwiseProduct(c).colwise().sum().transpose().array() * weight.array()).sum();
    };
    for (int q = 0; q < N; ++q)
        for (int pass = 0; pass < 2; ++pass) {
            for (int p = 0; p < q; ++p) stack[q] -= ip(stack[p], stack[q]) * stack[p];
            stack[q] /= std::sqrt(ip(stack[q], stack[q]));
        }
    b.phi.resize(nx, N);
    b.phi_x.resize(nx, N);
    b.phi_xx.resize(nx, N);
    b.dual.resize(nx, N);
    for (int q = 0; q < N; ++q) {
        std::vector<double> col(stack[q].col(0).data(), stack[q].col(0).data() + nx);
        std::vector<double> d1 = spectral_derivative(col, h, 1), d2 = spectral_derivative(col, h, 2);
        Eigen::VectorXd dual = Eigen::VectorXd::Zero(nx);
        double w = h;
        for (int s = 0; s <= m; ++s, w *= norm.theta) {
            std::vector<double> d = spectral_derivative(col, h, 2 * s);
            for (int i = 0; i < nx; ++i) dual(i) += (s % 2 ? -w : w) * d[i];
        }
        for (int i = 0; i < nx; ++i) {
            b.phi(i, q) = col[i];
            b.phi_x(i, q) = d1[i];
            b.phi_xx(i, q) = d2[i];
        }
        b.dual.col(q) = dual;
    }
    double err = 0;
    for (int p = 0; p < N; ++p)
        for (int q = p; q < N; ++q)
            err = std::max(err, std::abs(b.inner(b.phi.col(p), b.phi.col(q)) - (p == q ? 1.0 : 0.0)));
    b.orthonormality_error = err;
    return b;
}

nlohmann::json GalerkinReport::to_json() const {
    return {{"N", N},           {"nx", nx},         {"ny", ny},
            {"components", components}, {"residual", residual}, {"rcond", rcond},
            {"min_pivot", min_pivot}, {"accuracy_warning", accuracy_warning}};
}

GalerkinResult galerkin_solve(const LinearOperatorField& L, const GridField& f, const GalerkinBasis& basis,
                              const GalerkinOptions& opt) {
    const Grid& g = L.grid();
    require(f.grid == g, "grid-mismatch", "operator and right-hand side grids differ");
    require(g.periodic_x && basis.grid.nx == g.nx && std::abs(basis.grid.hx() - g.hx()) <= 1e-14 * g.hx(),
            "grid-mismatch", "basis does not live on the operator's x-line");
    require(g.ny >= 3, "bad-grid", "need at least one interior row");
    const int N = basis.size(), J = g.ny - 2;
    const double h = g.hy();
    const Eigen::MatrixXd& D = basis.dual;
    Eigen::MatrixXd G0 = D.transpose() * basis.phi, Gx = D.transpose() * basis.phi_x,
                    Gxx = D.transpose() * basis.phi_xx;

    std::vector<RowBlock> rows(J);
    Eigen::MatrixXd rhs(N, J);
    for (int r = 0; r < J; ++r) {
        int j = r + 1;
        RowBlock& b = rows[r];
        bool c = row_constant(L.a22, j, b.c22) & row_constant(L.a12, j, b.c12) & row_constant(L.a2, j, b.c2) &
                 row_constant(L.a11, j, b.c11) & row_constant(L.a1, j, b.c1) & row_constant(L.a0, j, b.c0);
        if (!c) {
            b.dense = true;
            auto weighted = [&](const GridField& coef) {
                Eigen::VectorXd a = row_of(coef, j);
                return Eigen::MatrixXd((D.array().colwise() * a.array()).transpose());
            };
            Eigen::MatrixXd W22 = weighted(L.a22), W12 = weighted(L.a12), W2 = weighted(L.a2),
                            W11 = weighted(L.a11), W1 = weighted(L.a1), W0 = weighted(L.a0);
            b.K2 = W22 * basis.phi;
            b.K1 = W2 * basis.phi + 2 * (W12 * basis.phi_x);
            b.K0 = W11 * basis.phi_xx + W1 * basis.phi_x + W0 * basis.phi;
        }
        rhs.col(r) = D.transpose() * row_of(f, j);
    }
    auto K2 = [&](int r, int k, int l) { return rows[r].dense ? rows[r].K2(k, l) : rows[r].c22 * G0(k, l); };
    auto K1 = [&](int r, int k, int l) {
        const RowBlock& b = rows[r];
        return b.dense ? b.K1(k, l) : b.c2 * G0(k, l) + 2 * b.c12 * Gx(k, l);
    };
    auto K0 = [&](int r, int k, int l) {
        const RowBlock& b = rows[r];
        return b.dense ? b.K0(k, l) : b.c11 * Gxx(k, l) + b.c1 * Gx(k, l) + b.c0 * G0(k, l);
    };
    require(opt.y_order == 2 || opt.y_order == 4, "order", "y_order must be 2 or 4");
    // Entry of row r coupling to row r + off, off in [-2, 2].
    auto wide = [&](int r) { return opt.y_order == 4 && r >= 1 && r + 1 < J; };
    auto entry = [&](int r, int off, int k, int l) {
        if (wide(r)) {
            static const double s2[5] = {-1, 16, -30, 16, -1}, s1[5] = {1, -8, 0, 8, -1};
            double v = s2[off + 2] * K2(r, k, l) / (12 * h * h) + s1[off + 2] * K1(r, k, l) / (12 * h);
            return off == 0 ? v + K0(r, k, l) : v;
        }
        switch (off) {
            case 0: return -2 * K2(r, k, l) / (h * h) + K0(r, k, l);
            case 1: return K2(r, k, l) / (h * h) + K1(r, k, l) / (2 * h);
            case -1: return K2(r, k, l) / (h * h) - K1(r, k, l) / (2 * h);
            default: return 0.0;
        }
    };
    const int reach = opt.y_order == 4 ? 2 : 1;

    double scale = 0;
    for (int r = 0; r < J; ++r)
        for (int k = 0; k < N; ++k)
            for (int l = 0; l < N; ++l)
                for (int off = -reach; off <= reach; ++off) scale = std::max(scale, std::abs(entry(r, off, k, l)));
    UnionFind uf(N);
    const double drop = opt.coupling_drop * scale;
    for (int r = 0; r < J; ++r) {
        for (int k = 0; k < N; ++k)
            for (int l = 0; l < N; ++l) {
                if (k == l || uf.find(k) == uf.find(l)) continue;
                for (int off = -reach; off <= reach; ++off)
                    if (std::abs(entry(r, off, k, l)) > drop) {
                        uf.join(k, l);
                        break;
                    }
            }
    }
    std::vector<std::vector<int>> groups;
    {
        std::vector<int> id(N, -1);
        for (int k = 0; k < N; ++k) {
            int root = uf.find(k);
            if (id[root] < 0) {
                id[root] = int(groups.size());
                groups.emplace_back();
            }
            groups[id[root]].push_back(k);
        }
    }

    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(N, g.ny);
    GalerkinReport rep;
    rep.N = N;
    rep.nx = g.nx;
    rep.ny = g.ny;
    rep.components = int(groups.size());
    rep.rcond = std::numeric_limits<double>::infinity();
    rep.min_pivot = std::numeric_limits<double>::infinity();
    for (const auto& grp : groups) {
        const int c = int(grp.size());
        const lapack_int n = lapack_int(c) * J, kl = (reach + 1) * c - 1, ku = kl, ldab = 2 * kl + ku + 1;
        std::vector<double> ab(std::size_t(ldab) * n, 0.0), b(n);
        std::vector<double> colsum(n, 0.0);
        auto put = [&](lapack_int row, lapack_int col, double v) {
            ab[std::size_t(kl + ku + row - col) + std::size_t(col) * ldab] += v;
            colsum[col] += std::abs(v);
        };
        for (int r = 0; r < J; ++r)
            for (int a = 0; a < c; ++a) {
                lapack_int row = lapack_int(r) * c + a;
                b[row] = rhs(grp[a], r);
                for (int q = 0; q < c; ++q) {
                    int k = grp[a], l = grp[q];
                    for (int off = -reach; off <= reach; ++off)
                        if (r + off >= 0 && r + off < J) put(row, lapack_int(r + off) * c + q, entry(r, off, k, l));
                }
            }
        double anorm = *std::max_element(colsum.begin(), colsum.end());
        std::vector<lapack_int> ipiv(n);
        lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku, ab.data(), ldab, ipiv.data());
        double pivot = std::numeric_limits<double>::infinity();
        for (lapack_int k = 0; k < n; ++k) pivot = std::min(pivot, std::abs(ab[std::size_t(kl + ku) + std::size_t(k) * ldab]));
        rep.min_pivot = std::min(rep.min_pivot, pivot);
        require(info == 0, "solver-failure",
                "Galerkin system singular (zero pivot at " + std::to_string(info) + ", smallest pivot " +
                    std::to_string(pivot) + ")");
        if (opt.condition_estimate) {
            double rc = 0;
            LAPACKE_dgbcon(LAPACK_COL_MAJOR, '1', n, kl, ku, ab.data(), ldab, ipiv.data(), anorm, &rc);
            rep.rcond = std::min(rep.rcond, rc);
        }
        LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kl, ku, 1, ab.data(), ldab, ipiv.data(), b.data(), n);
        for (int r = 0; r < J; ++r)
            for (int a = 0; a < c; ++a) coef(grp[a], r + 1) = b[std::size_t(r) * c + a];
    }
    if (!opt.condition_estimate) rep.rcond = 0;

    GalerkinResult res{GridField(g), rep};
    Eigen::MatrixXd u = basis.phi * coef;  // nx x ny
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) res.u(i, j) = u(i, j);

    Block reg = opt.residual_region.value_or(Block{0, 1, g.nx, g.ny - 2});
    GridField Lu = L.apply(res.u);
    double num = 0, den = 0;
    for (int j = reg.j0; j < reg.j0 + reg.ny; ++j)
        for (int i = reg.i0; i < reg.i0 + reg.nx; ++i) {
            double d = Lu(i, j) - f(i, j);
            num += d * d;
            den += f(i, j) * f(i, j);
        }
    res.report.residual = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    res.report.accuracy_warning = res.report.residual > opt.residual_warn;
    return res;
}

bool EnergyCertificate::pass() const {
    return I1_min.value >= -tolerance && I3_gap.value >= -tolerance && I4_min.value >= i4_floor &&
           discriminant_min.value >= -tolerance;
}

double EnergyCertificate::coercivity_constant() const { return 0.5 * std::min(1.0, I4_min.value); }

nlohmann::json EnergyCertificate::to_json() const {
    auto m = [](const MarginAt& a) {
        return nlohmann::json{{"value", a.value}, {"i", a.i}, {"j", a.j}, {"alpha", a.x}, {"beta", a.y}};
    };
    return {{"pass", pass()},
            {"grid", {{"nx", grid.nx}, {"ny", grid.ny}}},
            {"I1_min", m(I1_min)},
            {"I3_minus_gamma2_min", m(I3_gap)},
            {"I4_min", m(I4_min)},
            {"discriminant_min", m(discriminant_min)},
            {"I4_floor", i4_floor},
            {"tolerance", tolerance},
            {"coercivity_constant", coercivity_constant()}};
}

EnergyCertificate energy_certificate(const ExtendedOperator& L, const CertificateOptions& opt) {
    const Grid& g = L.grid;
    const CutoffKit& kit = L.kit;
    ExtendedOperator::Derivatives d = L.derivatives();
    EnergyCertificate c;
    c.grid = g;
    c.i4_floor = opt.i4_floor;
    c.tolerance = opt.tolerance;
    c.I1 = c.I2 = c.I3 = c.I4 = GridField(g);
    const double inf = std::numeric_limits<double>::infinity();
    for (MarginAt* m : {&c.I1_min, &c.I3_gap, &c.I4_min, &c.discriminant_min}) m->value = inf;
    auto track = [&](MarginAt& m, double v, int i, int j) {
        if (v < m.value) m = {v, i, j, g.x(i), g.y(j)};
    };
    for (int j = 0; j < g.ny; ++j) {
        double y = g.y(j);
        Jet a = kit.a(y), b = kit.b(y);
        double gam2 = kit.gamma2(y);
        c.a.push_back(a.v);
        c.b.push_back(b.v);
        c.gamma2.push_back(gam2);
        for (int i = 0; i < g.nx; ++i) {
            double A = d.A(i, j), D = d.D(i, j), E = d.E(i, j), F = d.F(i, j);
            double i1 = (b.d1 / 2 - a.v) * A + b.v * d.A_b(i, j) / 2;
            double i2 = -b.v * d.A_a(i, j) / 2 + b.v * D / 2;
            double i3 = -a.v - b.d1 / 2 + b.v * E;
            double i4 = a.v * d.A_aa(i, j) / 2 + a.d2 / 2 - a.v * d.D_a(i, j) / 2 -
                        (a.d1 * E + a.v * d.E_b(i, j)) / 2 - (b.d1 / 2 - a.v) * F - b.v * d.F_b(i, j) / 2;
            c.I1(i, j) = i1;
            c.I2(i, j) = i2;
            c.I3(i, j) = i3;
            c.I4(i, j) = i4;
            track(c.I1_min, i1, i, j);
            track(c.I3_gap, i3 - gam2, i, j);
            track(c.I4_min, i4, i, j);
            track(c.discriminant_min, i1 * i3 - 2 * i2 * i2, i, j);
        }
    }
    if (opt.throw_on_failure && !c.pass()) {
        std::string worst;
        auto note = [&](const char* name, const MarginAt& m, double floor) {
            if (m.value < floor)
                worst += std::string(name) + " = " + std::to_string(m.value) + " at (alpha, beta) = (" +
                         std::to_string(m.x) + ", " + std::to_string(m.y) + "); ";
        };
        note("I1", c.I1_min, -c.tolerance);
        note("I3 - gamma^2", c.I3_gap, -c.tolerance);
        note("I4", c.I4_min, c.i4_floor);
        note("I1 I3 - 2 I2^2", c.discriminant_min, -c.tolerance);
        throw Error("certificate-failure", worst);
    }
    return c;
}

std::vector<CoercivitySample> coercivity_check(const ExtendedOperator& L, const EnergyCertificate& cert,
                                               int samples, unsigned seed) {
    const Grid& g = L.grid;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const double ax = 0.8 * std::min(-g.x0, g.x1), by = 0.8 * std::min(-g.y0, g.y1);
    auto window = [](double r, double edge) { return 1 - smoothstep((r - 0.75 * edge) / (0.25 * edge)); };
    LinearOperatorField op = L.as_field();
    const double C = cert.coercivity_constant();
    std::vector<CoercivitySample> out;
    for (int s = 0; s < samples; ++s) {
        double cx[3], cy[3], wd[3], amp[3];
        for (int q = 0; q < 3; ++q) {
            cx[q] = uni(-0.8 * ax, 0.8 * ax);
            cy[q] = uni(-0.8 * by, 0.8 * by);
            wd[q] = uni(0.1, 0.4);
            amp[q] = uni(-1.0, 1.0);
        }
        GridField u = GridField::sample(g, [&](double x, double y) {
            double v = 0;
            for (int q = 0; q < 3; ++q)
                v += amp[q] * std::exp(-((x - cx[q]) * (x - cx[q]) + (y - cy[q]) * (y - cy[q])) / (wd[q] * wd[q]));
            return v * window(std::abs(x), ax) * window(std::abs(y), by);
        });
        GridField uy = dy(u), Lu = op.apply(u);
        GridField mult(g), lower(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                mult(i, j) = cert.a[j] * u(i, j) + cert.b[j] * uy(i, j);
                lower(i, j) = cert.gamma2[j] * uy(i, j) * uy(i, j) + u(i, j) * u(i, j);
            }
        out.push_back({l2_inner(mult, Lu), C * l2_inner(lower, GridField(g, 1.0))});
    }
    return out;
}

nlohmann::json MoserReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < orders.size(); ++k)
        rows.push_back({{"m", orders[k]},
                        {"ratio", applicable[k] ? nlohmann::json(ratio[k]) : nlohmann::json(nullptr)},
                        {"applicable", bool(applicable[k])}});
    return {{"offset", offset}, {"rows", rows}};
}

MoserReport moser_monitor(const GridField& u, const GridField& f, const GridField& w, int offset, int m_min,
                          int m_max) {
    MoserReport r;
    r.offset = offset;
    double f2 = sobolev_norm(f, 2);
    for (int m = m_min; m <= m_max; ++m) {
        double den = sobolev_norm(f, m) + sobolev_norm(w, m + offset) * f2;
        r.orders.push_back(m);
        bool ok = den > 0;
        r.applicable.push_back(ok);
        r.ratio.push_back(ok ? sobolev_norm(u, m) / den : std::numeric_limits<double>::quiet_NaN());
    }
    return r;
}

}  // namespace dma
