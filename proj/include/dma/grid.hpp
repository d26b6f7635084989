#pragma once

#include <functional>
#include <vector>

namespace dma {

// Uniform tensor grid. With periodic_x the node x1 is identified with x0 and
// is not stored.
struct Grid {
    int nx = 0, ny = 0;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool periodic_x = false;

    double hx() const { return periodic_x ? (x1 - x0) / nx : (x1 - x0) / (nx - 1); }
    double hy() const { return (y1 - y0) / (ny - 1); }
    double x(int i) const { return x0 + i * hx(); }
    double y(int j) const { return y0 + j * hy(); }
    std::size_t size() const { return std::size_t(nx) * std::size_t(ny); }
    bool operator==(const Grid& o) const;

    static Grid box(int nx, int ny, double x0, double x1, double y0, double y1) {
        return Grid{nx, ny, x0, x1, y0, y1, false};
    }
};

// Scalar samples on a grid, stored row by row (x fastest).
struct GridField {
    Grid grid;
    std::vector<double> v;

    GridField() = default;
    explicit GridField(const Grid& g, double fill = 0.0) : grid(g), v(g.size(), fill) {}

    double& operator()(int i, int j) { return v[std::size_t(j) * grid.nx + i]; }
    double operator()(int i, int j) const { return v[std::size_t(j) * grid.nx + i]; }

    static GridField sample(const Grid& g, const std::function<double(double, double)>& f);

    double max_abs() const;
    double min() const;
    double max() const;

    GridField& operator+=(const GridField& o);
    GridField& operator-=(const GridField& o);
    GridField& operator*=(double s);
};

GridField operator+(GridField a, const GridField& b);
GridField operator-(GridField a, const GridField& b);
GridField operator*(GridField a, double s);
GridField operator*(double s, GridField a);
GridField operator*(const GridField& a, const GridField& b);
GridField operator/(const GridField& a, const GridField& b);
GridField map(const GridField& a, const std::function<double(double)>& f);

// Fourth order finite differences. Interior nodes use centered stencils,
// boundary nodes one-sided ones; periodic directions wrap.
GridField dx(const GridField& f);
GridField dy(const GridField& f);
GridField dxx(const GridField& f);
GridField dyy(const GridField& f);
GridField dxy(const GridField& f);
// Mixed derivative of arbitrary order built from the first and second
// derivative stencils.
GridField deriv(const GridField& f, int ox, int oy);

// Sub-block of nodes [i0, i0+nx) x [j0, j0+ny) as a non-periodic field.
GridField restrict_block(const GridField& f, int i0, int j0, int nx, int ny);
// Writes a block back into f at offset (i0, j0).
void insert_block(GridField& f, const GridField& block, int i0, int j0);

// Lagrange interpolation of the given order (number of points) on uniform
// nodes; positions outside the node range use the nearest stencil.
double interp1(const double* vals, int n, double x0, double h, double x, int order = 6,
               bool periodic = false);
double interp2(const GridField& f, double x, double y, int order = 6);

// Discrete L2 and sup norms with trapezoid weights.
double l2_norm(const GridField& f);
double l2_inner(const GridField& a, const GridField& b);

}  // namespace dma
