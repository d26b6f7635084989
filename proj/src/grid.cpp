#include "dma/grid.hpp"

#include <algorithm>
#include <cmath>

#include "dma/error.hpp"

namespace dma {

bool Grid::operator==(const Grid& o) const {
    return nx == o.nx && ny == o.ny && x0 == o.x0 && x1 == o.x1 && y0 == o.y0 && y1 == o.y1 &&
           periodic_x == o.periodic_x;
}

GridField GridField::sample(const Grid& g, const std::function<double(double, double)>& f) {
    GridField r(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) r(i, j) = f(g.x(i), g.y(j));
    return r;
}

double GridField::max_abs() const {
    double m = 0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
}
double GridField::min() const { return *std::min_element(v.begin(), v.end()); }
double GridField::max() const { return *std::max_element(v.begin(), v.end()); }

static void check_same(const GridField& a, const GridField& b) {
    require(a.grid == b.grid, "grid-mismatch", "fields live on different grids");
}

GridField& GridField::operator+=(const GridField& o) {
    check_same(*this, o);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += o.v[k];
    return *this;
}
GridField& GridField::operator-=(const GridField& o) {
    check_same(*this, o);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= o.v[k];
    return *this;
}
GridField& GridField::operator*=(double s) {
    for (double& a : v) a *= s;
    return *this;
}
GridField operator+(GridField a, const GridField& b) { return a += b; }
GridField operator-(GridField a, const GridField& b) { return a -= b; }
GridField operator*(GridField a, double s) { return a *= s; }
GridField operator*(double s, GridField a) { return a *= s; }
GridField operator*(const GridField& a, const GridField& b) {
    check_same(a, b);
    GridField r(a.grid);
    for (std::size_t k = 0; k < r.v.size(); ++k) r.v[k] = a.v[k] * b.v[k];
    return r;
}
GridField operator/(const GridField& a, const GridField& b) {
    check_same(a, b);
    GridField r(a.grid);
    for (std::size_t k = 0; k < r.v.size(); ++k) r.v[k] = a.v[k] / b.v[k];
    return r;
}
GridField map(const GridField& a, const std::function<double(double)>& f) {
    GridField r(a.grid);
    for (std::size_t k = 0; k < r.v.size(); ++k) r.v[k] = f(a.v[k]);
    return r;
}

namespace {

// Applies a 1D derivative along lines of n samples with the given stride.
void line_d1(const double* in, double* out, int n, std::ptrdiff_t s, double h, bool periodic) {
    const double c = 1.0 / (12.0 * h);
    auto at = [&](int k) { return in[k * s]; };
    if (periodic) {
        for (int k = 0; k < n; ++k) {
            auto w = [&](int d) { return at(((k + d) % n + n) % n); };
            out[k * s] = c * (w(-2) - 8 * w(-1) + 8 * w(1) - w(2));
        }
        return;
    }
    require(n >= 5, "grid-too-small", "need at least 5 nodes per direction");
    for (int k = 2; k < n - 2; ++k)
        out[k * s] = c * (at(k - 2) - 8 * at(k - 1) + 8 * at(k + 1) - at(k + 2));
    out[0] = c * (-25 * at(0) + 48 * at(1) - 36 * at(2) + 16 * at(3) - 3 * at(4));
    out[s] = c * (-3 * at(0) - 10 * at(1) + 18 * at(2) - 6 * at(3) + at(4));
    int m = n - 1;
    out[m * s] = -c * (-25 * at(m) + 48 * at(m - 1) - 36 * at(m - 2) + 16 * at(m - 3) - 3 * at(m - 4));
    out[(m - 1) * s] = -c * (-3 * at(m) - 10 * at(m - 1) + 18 * at(m - 2) - 6 * at(m - 3) + at(m - 4));
}

void line_d2(const double* in, double* out, int n, std::ptrdiff_t s, double h, bool periodic) {
    const double c = 1.0 / (12.0 * h * h);
    auto at = [&](int k) { return in[k * s]; };
    if (periodic) {
        for (int k = 0; k < n; ++k) {
            auto w = [&](int d) { return at(((k + d) % n + n) % n); };
            out[k * s] = c * (-w(-2) + 16 * w(-1) - 30 * w(0) + 16 * w(1) - w(2));
        }
        return;
    }
    require(n >= 6, "grid-too-small", "need at least 6 nodes per direction");
    for (int k = 2; k < n - 2; ++k)
        out[k * s] = c * (-at(k - 2) + 16 * at(k - 1) - 30 * at(k) + 16 * at(k + 1) - at(k + 2));
    out[0] = c * (45 * at(0) - 154 * at(1) + 214 * at(2) - 156 * at(3) + 61 * at(4) - 10 * at(5));
    out[s] = c * (10 * at(0) - 15 * at(1) - 4 * at(2) + 14 * at(3) - 6 * at(4) + at(5));
    int m = n - 1;
    out[m * s] =
        c * (45 * at(m) - 154 * at(m - 1) + 214 * at(m - 2) - 156 * at(m - 3) + 61 * at(m - 4) - 10 * at(m - 5));
    out[(m - 1) * s] =
        c * (10 * at(m) - 15 * at(m - 1) - 4 * at(m - 2) + 14 * at(m - 3) - 6 * at(m - 4) + at(m - 5));
}

GridField along_x(const GridField& f, bool second) {
    GridField r(f.grid);
    const Grid& g = f.grid;
    for (int j = 0; j < g.ny; ++j) {
        const double* in = &f.v[std::size_t(j) * g.nx];
        double* out = &r.v[std::size_t(j) * g.nx];
        if (second)
            line_d2(in, out, g.nx, 1, g.hx(), g.periodic_x);
        else
            line_d1(in, out, g.nx, 1, g.hx(), g.periodic_x);
    }
    return r;
}

GridField along_y(const GridField& f, bool second) {
    GridField r(f.grid);
    const Grid& g = f.grid;
    for (int i = 0; i < g.nx; ++i) {
        if (second)
            line_d2(&f.v[i], &r.v[i], g.ny, g.nx, g.hy(), false);
        else
            line_d1(&f.v[i], &r.v[i], g.ny, g.nx, g.hy(), false);
    }
    return r;
}

}  // namespace

GridField dx(const GridField& f) { return along_x(f, false); }
GridField dy(const GridField& f) { return along_y(f, false); }
GridField dxx(const GridField& f) { return along_x(f, true); }
GridField dyy(const GridField& f) { return along_y(f, true); }
GridField dxy(const GridField& f) { return dy(dx(f)); }

GridField deriv(const GridField& f, int ox, int oy) {
    GridField r = f;
    for (; ox >= 2; ox -= 2) r = dxx(r);
    if (ox == 1) r = dx(r);
    for (; oy >= 2; oy -= 2) r = dyy(r);
    if (oy == 1) r = dy(r);
    return r;
}

GridField restrict_block(const GridField& f, int i0, int j0, int nx, int ny) {
    const Grid& g = f.grid;
    require(i0 >= 0 && j0 >= 0 && i0 + nx <= g.nx && j0 + ny <= g.ny, "bad-block",
            "block exceeds grid");
    Grid b{nx, ny, g.x(i0), g.x(i0 + nx - 1), g.y(j0), g.y(j0 + ny - 1), false};
    GridField r(b);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) r(i, j) = f(i0 + i, j0 + j);
    return r;
}

void insert_block(GridField& f, const GridField& block, int i0, int j0) {
    for (int j = 0; j < block.grid.ny; ++j)
        for (int i = 0; i < block.grid.nx; ++i) f(i0 + i, j0 + j) = block(i, j);
}

double interp1(const double* vals, int n, double x0, double h, double x, int order, bool periodic) {
    double t = (x - x0) / h;
    int base = int(std::floor(t)) - (order / 2 - 1);
    if (!periodic) base = std::clamp(base, 0, n - order);
    double acc = 0;
    for (int a = 0; a < order; ++a) {
        double w = 1;
        for (int b = 0; b < order; ++b)
            if (b != a) w *= (t - (base + b)) / double(a - b);
        int k = base + a;
        if (periodic) k = ((k % n) + n) % n;
        acc += w * vals[k];
    }
    return acc;
}

double interp2(const GridField& f, double x, double y, int order) {
    const Grid& g = f.grid;
    double t = (y - g.y0) / g.hy();
    int base = std::clamp(int(std::floor(t)) - (order / 2 - 1), 0, g.ny - order);
    double acc = 0;
    for (int a = 0; a < order; ++a) {
        double w = 1;
        for (int b = 0; b < order; ++b)
            if (b != a) w *= (t - (base + b)) / double(a - b);
        if (w == 0) continue;
        const double* row = &f.v[std::size_t(base + a) * g.nx];
        acc += w * interp1(row, g.nx, g.x0, g.hx(), x, order, g.periodic_x);
    }
    return acc;
}

static double trap_weight(int k, int n, bool periodic) {
    return (!periodic && (k == 0 || k == n - 1)) ? 0.5 : 1.0;
}

double l2_inner(const GridField& a, const GridField& b) {
    check_same(a, b);
    const Grid& g = a.grid;
    double acc = 0;
    for (int j = 0; j < g.ny; ++j) {
        double wy = trap_weight(j, g.ny, false);
        for (int i = 0; i < g.nx; ++i) acc += wy * trap_weight(i, g.nx, g.periodic_x) * a(i, j) * b(i, j);
    }
    return acc * g.hx() * g.hy();
}

double l2_norm(const GridField& f) { return std::sqrt(l2_inner(f, f)); }

}  // namespace dma
