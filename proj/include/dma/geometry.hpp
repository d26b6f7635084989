#pragma once

#include <array>
#include <optional>
#include <string>

#include "dma/expr.hpp"
#include "dma/grid.hpp"

namespace dma {

// First fundamental form on a coordinate rectangle (u along x, v along y).
struct MetricPatch {
    enum class Form { General, GeodesicParallel };
    Form form = Form::General;
    GridField E, F, G;  // General form
    GridField h;        // GeodesicParallel form: du^2 + h^2 dv^2

    static MetricPatch general(GridField E, GridField F, GridField G);
    static MetricPatch geodesic_parallel(GridField h);
    static MetricPatch from_expressions(const Grid& g, const std::string& E, const std::string& F,
                                        const std::string& G);

    const Grid& grid() const { return form == Form::General ? E.grid : h.grid; }
    // Components as fields regardless of form.
    GridField e() const;
    GridField f() const;
    GridField g() const;
    // Throws degenerate-metric when the form's invariants fail.
    void validate(double tol = 1e-8) const;
};

// Curve sigma = {H~ = 0} given by a defining function of (u, v).
struct CurveSpec {
    Expr H, Hu, Hv, Huu, Huv, Hvv;  // variables u, v
    double M1 = 0.0;

    static CurveSpec parse(const std::string& text, double M1 = 0.0);
    double value(double u, double v) const { return H.eval({u, v}); }
    std::array<double, 2> gradient(double u, double v) const;
    // Verifies |d_v H~| >= M1 at nodes adjacent to the zero set.
    void check_transversal(const Grid& g) const;
};

using Christoffel = std::array<std::array<std::array<double, 2>, 2>, 2>;  // [i][j][k] = Gamma^i_jk

Christoffel christoffel(const MetricPatch& metric, int i, int j);

// Gamma^i_jk as fields, one-sided stencils at the boundary.
struct ChristoffelFields {
    std::array<std::array<std::array<GridField, 2>, 2>, 2> gamma;
};
ChristoffelFields christoffel_fields(const MetricPatch& metric);

GridField gauss_curvature(const MetricPatch& metric);

struct GeodesicParallelOptions {
    int nu = 0, nv = 0;           // output node counts, default: input counts
    double u_half = 0, v_half = 0;  // output half-extents, default: input half-extents
    double geodesic_tol = 1e-5;
};

struct GeodesicParallelResult {
    MetricPatch patch;
    GridField u_of, v_of;  // original coordinates of each output node
    double geodesic_residual = 0;
    double orthogonality_residual = 0;
};

GeodesicParallelResult to_geodesic_parallel(const MetricPatch& metric, const CurveSpec& sigma,
                                            const GeodesicParallelOptions& opt = {});

struct VanishingOrder {
    int order = 0;  // q = n + 1
    int n = 0;
    bool in_regime = false;
    double fitted_slope = 0;
};

VanishingOrder vanishing_order(const GridField& K, const CurveSpec& sigma, int max_order = 12,
                               double band_lo = 0.01, double band_hi = 0.1);

}  // namespace dma
