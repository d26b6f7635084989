#pragma once

#include "dma/cutoff.hpp"
#include "dma/grid.hpp"
#include "dma/operator.hpp"
#include "dma/problem.hpp"

namespace dma {

// New coordinate xi(x, y) constant along dx/dt = speed(x, t) with xi(x, 0) = x,
// second coordinate y. All fields live on the nodes of the source grid.
struct CharMap {
    Grid grid;
    GridField xi, xi_x, xi_y, xi_xx, xi_xy, xi_yy;
    // foot(i, j): x position on row j of the characteristic through (x_i, 0);
    // foot_s its derivative with respect to the starting point.
    GridField foot, foot_s;
    double min_jacobian = 0, max_jacobian = 0;
    double composition_error = 0;  // max |xi(foot(i, j), y_j) - x_i|
    // xi - x and foot - x, periodic when the grid is.
    GridField xi_shift, foot_shift;

    // xi and the foot point at an arbitrary x on row j.
    double xi_at(double x, int j) const;
    double foot_at(double s, int j) const;
    double foot_at(double s, double t) const;
};

struct CharOptions {
    int oversample = 2;       // seeds per grid spacing
    int substeps = 2;         // RK4 steps per row interval
    double max_drift = 0.25;  // allowed sup|speed| * T as a fraction of the x extent
    double min_jacobian = 0;  // fold threshold on x_s
};

CharMap solve_characteristics(const GridField& speed, const CharOptions& opt = {});

// L3 = (L1 - eps Phi / M11 d_xx) / (eps M11), M11 = 1 + eps Q. The xx
// coefficient is evaluated as (M12^2 + K f) / M11^2, which avoids cancellation.
LinearOperatorField reduce_to_L3(const LinearOperatorField& L1, const PhiEval& pe, double eps, double floor = 0.5);

struct StageReport {
    double b12_ratio = 0;           // max |b12| / max |b12 of L3|
    double factor_min = 0;          // min of the extracted b11 factor
    double factor_mismatch = 0;     // chain-rule b11 against the factored form, relative
    double jacobian_min = 0, jacobian_max = 0;
    double transversality_min = 0;  // min H_eta
};

// Coefficients of L3 written in (xi, eta = y), sampled at the physical nodes.
// b11 is assembled as eps^(2(n+1)) H^(n+1) P11 with P11 = P xi_x^2 / M11^2.
LinearOperatorField transform_first(const LinearOperatorField& L3, const CharMap& map, const ScaledProblem& sp,
                                    const WJet& jet, const PhiEval& pe, GridField* P11 = nullptr,
                                    StageReport* report = nullptr);

// [d_x(Phi / (2 M11^2)) + d_x Phi / (2 M11^2)] xi_x, removed from b1 of L4.
GridField phi_bracket(const PhiEval& pe, const CharMap& map);
LinearOperatorField drop_phi_terms(const LinearOperatorField& L4, const GridField& removed);

// Maps node-anchored fields of the (x, y) grid onto the tensor grid of the
// (alpha, beta) frame, which reuses the coordinates of the source grid.
struct FrameResampler {
    Grid grid;
    GridField x_of, y_of;  // physical point of each (alpha_i, beta_j) node
    double inverse_error = 0;  // max distance of (alpha, beta)(x_of, y_of) from the node
    GridField operator()(const GridField& anchored) const;
};

struct SecondTransform {
    LinearOperatorField L6;
    CharMap map;  // alpha on the (xi, eta) tensor grid
    GridField alpha, beta;  // at the physical nodes
    GridField alpha_xi, alpha_eta, beta_xi, beta_eta;
    GridField alpha_x, alpha_y, beta_x, beta_y;
    GridField P22;  // b22 of L6
    GridField P11;  // b11 of L7 divided by eps^(2(n+1)) beta^(n+1)
    FrameResampler resample;
    StageReport report;
};

SecondTransform transform_second(const LinearOperatorField& L5, const CharMap& first, const GridField& P11_first,
                                 const ScaledProblem& sp, const CharOptions& opt = {});

LinearOperatorField normalize_L7(const LinearOperatorField& L6);

// Whole-plane operator A d_aa + d_bb + D d_a + E d_b + F on the (alpha, beta)
// grid, with A = psi1 + phi phi Abar and so on. Cutoff factors are kept in
// closed form so derivatives across the steep seams are exact.
struct ExtendedOperator {
    Grid grid;
    CutoffKit kit;
    double alpha_scale = 1.0;  // y0 / x0, so phi(alpha) switches off at the same relative width
    GridField Abar, Dbar, Ebar, Fbar;

    double phi2(int i, int j) const;  // phi(alpha) phi(beta)
    GridField A() const;
    GridField D() const;
    GridField E() const;
    GridField F() const;
    struct Derivatives {
        GridField A, A_a, A_b, A_aa, D, D_a, E, E_b, F, F_b;
    };
    Derivatives derivatives() const;
    LinearOperatorField as_field() const;
    GridField apply(const GridField& u) const;
};

// Resamples the node-anchored L7 to the (alpha, beta) grid and glues in the cutoffs.
ExtendedOperator extend_coefficients(const LinearOperatorField& L7, const FrameResampler& resample,
                                     const CutoffKit& kit, double alpha_scale = 1.0);

struct CanonicalOptions {
    CharOptions chars;
    double reduction_floor = 0.5;
};

struct CanonicalForm {
    PhiEval pe;
    LinearOperatorField L1, L3, L4, L5, L6, L7;
    CharMap first;
    GridField P11_first;   // P11 of L4
    GridField removed;     // bracket subtracted from b1 in L5, (xi, eta) frame
    GridField removed_x;   // same bracket as an x-frame coefficient
    SecondTransform second;
    ExtendedOperator extended;
    StageReport first_report;

    nlohmann::json summary() const;
};

// The full reduction L1 -> L7 followed by the extension, at w given on the
// computational grid.
CanonicalForm reduce(const ScaledProblem& sp, const GridField& w, const CutoffKit& kit,
                     const CanonicalOptions& opt = {});

// Standard computational rectangle: periodic in x with half width 2 mu2 x0 and
// nodes on the edges of X, y in [-4 y0, 4 y0].
Grid computational_grid(double x0, double y0, int nx = 256, int ny = 257, double mu2 = 1.3);
// Node offsets of the rectangle X inside the computational grid.
struct Block {
    int i0, j0, nx, ny;
};
Block inner_block(const Grid& g, double x0, double y0);

}  // namespace dma
