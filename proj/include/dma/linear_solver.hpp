#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dma/canonical.hpp"
#include "dma/grid.hpp"
#include "dma/operator.hpp"
#include "json.hpp"

namespace dma {

// ||u||_(m,l)^2 = sum over s <= m, t <= l of theta^s ||d_x^s d_y^t u||^2.
struct WeightedNormSpec {
    double theta = 0.1;
    int m = 0;
    int l = 0;
};

constexpr int kMaxNormOrder = 8;

// x-derivatives are spectral on periodic grids and finite differences
// otherwise; y-derivatives are finite differences.
double weighted_norm(const GridField& u, const WeightedNormSpec& spec);
// Plain Sobolev norm over all derivatives d_x^s d_y^t with s + t <= m.
double sobolev_norm(const GridField& u, int m);

// Trigonometric modes on the periodic x-line of a grid, orthonormal in the
// discrete H_theta^m product in x.
struct GalerkinBasis {
    Grid grid;
    WeightedNormSpec norm;
    std::vector<int> wavenumber;       // integer frequency of each raw mode
    Eigen::MatrixXd phi, phi_x, phi_xx;  // nx x N samples
    // <phi_k, g>_m = dual.col(k) . g for band-limited g.
    Eigen::MatrixXd dual;
    double orthonormality_error = 0;

    int size() const { return int(phi.cols()); }
    static GalerkinBasis trig(const Grid& g, int N, const WeightedNormSpec& norm = {});
    // Discrete <f, g>_m on the x-line.
    double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
};

struct GalerkinOptions {
    std::optional<Block> residual_region;  // defaults to all interior nodes
    double residual_warn = 1e-2;           // relative residual flagged as inaccurate
    double coupling_drop = 1e-13;          // relative size below which modes count as uncoupled
    bool condition_estimate = true;
    int y_order = 4;  // 2 or 4; rows next to the Dirichlet edges always use 2
};

struct GalerkinReport {
    int N = 0, nx = 0, ny = 0;
    int components = 0;       // independent mode groups solved separately
    double residual = 0;      // ||L u - f|| / ||f|| on the residual region
    double rcond = 0;         // worst reciprocal condition estimate over groups
    double min_pivot = 0;
    bool accuracy_warning = false;
    nlohmann::json to_json() const;
};

struct GalerkinResult {
    GridField u;
    GalerkinReport report;
};

// u = sum_l d_l(y) phi_l(x) with the mode equations tested against the basis
// in <., .>_m, fourth order differences in y and d_l = 0 on the first and last
// rows.
GalerkinResult galerkin_solve(const LinearOperatorField& L, const GridField& f, const GalerkinBasis& basis,
                              const GalerkinOptions& opt = {});

struct MarginAt {
    double value = 0;
    int i = -1, j = -1;
    double x = 0, y = 0;
};

struct CertificateOptions {
    double i4_floor = 0.5;   // required lower bound for I4
    double tolerance = 1e-12;  // roundoff allowance on I1 and the discriminant
    bool throw_on_failure = true;
};

// Integrands of (a u + b u_y, L u) after integration by parts for the
// extended operator, with the multipliers of the cutoff kit.
struct EnergyCertificate {
    Grid grid;
    std::vector<double> a, b, gamma2;  // multipliers per y row
    GridField I1, I2, I3, I4;
    MarginAt I1_min, I3_gap, I4_min, discriminant_min;  // I3_gap: I3 - gamma^2; discriminant: I1 I3 - 2 I2^2
    double i4_floor = 0.5, tolerance = 1e-12;

    bool pass() const;
    // Lower bound factor C in (a u + b u_y, L u) >= C (||gamma u_y||^2 + ||u||^2).
    double coercivity_constant() const;
    nlohmann::json to_json() const;
};

EnergyCertificate energy_certificate(const ExtendedOperator& L, const CertificateOptions& opt = {});

struct CoercivitySample {
    double form = 0;   // (a u + b u_y, L u)
    double bound = 0;  // C (||gamma u_y||^2 + ||u||^2)
};

// Evaluates the quadratic form on smooth random fields supported away from
// the grid edges.
std::vector<CoercivitySample> coercivity_check(const ExtendedOperator& L, const EnergyCertificate& cert,
                                               int samples = 20, unsigned seed = 1);

struct MoserReport {
    int offset = 3;
    std::vector<int> orders;
    std::vector<double> ratio;      // NaN when f = 0
    std::vector<bool> applicable;
    nlohmann::json to_json() const;
};

// R_m = ||u||_m / (||f||_m + ||w||_(m + offset) ||f||_2).
MoserReport moser_monitor(const GridField& u, const GridField& f, const GridField& w, int offset = 3,
                          int m_min = 0, int m_max = 2);

}  // namespace dma
