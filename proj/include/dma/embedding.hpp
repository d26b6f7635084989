#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "dma/canonical.hpp"
#include "dma/geometry.hpp"
#include "dma/iteration.hpp"
#include "dma/problem.hpp"
#include "json.hpp"

namespace dma {

// Metric E du^2 + 2F du dv + G dv^2 given by closed-form expressions in u, v.
struct MetricSpec {
    std::string E_text, F_text, G_text;
    Expr E, F, G;  // over the variables of MAProblemSpec (u, v, p, q1, q2)

    static MetricSpec parse(const std::string& E, const std::string& F, const std::string& G,
                            const std::map<std::string, double>& constants = {});
    MetricPatch sample(const Grid& g) const;
    // Gaussian curvature as an expression.
    Expr curvature() const;
    // Christoffel symbols Gamma^i_jk as expressions.
    std::array<std::array<std::array<Expr, 2>, 2>, 2> christoffel() const;
};

// ds^2 = (1 - k0 v^5 / 20)^2 du^2 + dv^2, whose curvature k0 v^3 / h matches the T1 data to leading order.
MetricSpec model_T1_metric(double k0 = 1.0);

// Embedding equation det(z_ij - Gamma^k_ij z_k) = K (|g| - (G z_u^2 - 2F z_u z_v + E z_v^2)) as a
// Monge-Ampere problem: a_ij = -Gamma^k_ij q_k, f = |g| - |dz|^2_g |g|.
MAProblemSpec embedding_problem(const MetricSpec& metric, const std::string& Htilde, int n, double M1 = 0.0);

// The (u, v) patch covered by a scaled grid: u = eps^2 x, v = eps^2 y.
Grid patch_grid(const Grid& x_grid, double eps);

// Nodes with |u - u_c| <= half of the half-width, likewise in v.
Block half_block(const Grid& g);

// z = u^2 / 2 + eps^5 w(u / eps^2, v / eps^2). Without a target the nodes of the patch grid are used,
// otherwise w is resampled by cubic interpolation. Throws gradient-too-large when |grad z| >= 1.
GridField reconstruct_z(const GridField& w, const ScaledProblem& sp, const std::optional<Grid>& target = std::nullopt);

// ds^2 - dz^2; throws signature when it is not positive definite.
MetricPatch reduced_metric(const MetricPatch& metric, const GridField& z);
// Gaussian curvature of ds^2 - dz^2.
GridField flatness_residual(const MetricPatch& metric, const GridField& z);

struct FlatCoordinates {
    GridField x, y;
    GridField angle;        // rotation of the orthonormal coframe
    double holonomy = 0;    // max difference of the angle between two integration paths
    double closure = 0;     // same for the coordinates, relative to their range
};

struct FlatOptions {
    double holonomy_tol = 1e-4;
};

// Integrates the connection form of a flat metric from the node nearest the origin, then the
// rotated coframe; x(0) = y(0) = 0 and dx(d_u) > 0 at the origin. Throws not-flat-enough.
FlatCoordinates flat_coordinates(const MetricPatch& flat, const FlatOptions& opt = {});

struct IsometryReport {
    Block region{0, 0, 0, 0};
    std::array<double, 3> max_abs{}, rms{};  // E, F, G components
    double scale = 0;                        // max |E|, |G| over the region
    double relative = 0;                     // max component mismatch / scale
    nlohmann::json to_json() const;
};

// Mismatch fields of (x_u^2 + y_u^2 + z_u^2, ...) against (E, F, G).
std::array<GridField, 3> isometry_mismatch(const MetricPatch& metric, const GridField& x, const GridField& y,
                                           const GridField& z);
IsometryReport isometry_residual(const MetricPatch& metric, const GridField& x, const GridField& y,
                                 const GridField& z, const std::optional<Block>& region = std::nullopt);

struct EmbeddingOptions {
    FlatOptions flat;
    double calibration_size = 0.1;  // size of the Phi change used to measure the conditioning factor
};

struct EmbeddingResult {
    Grid patch;
    GridField x, y, z, flatness;
    std::array<GridField, 3> mismatch;
    IsometryReport isometry;
    Block region{0, 0, 0, 0};
    double gradient_max = 0;
    double holonomy = 0;
    double flatness_max = 0;        // sup over the region
    double ma_residual = 0;         // ||Phi(w)|| over the region
    double conditioning_factor = 0; // measured sup |d flatness| / sup |d Phi|
    double flatness_bound = 0;      // conditioning_factor * ma_residual
    double curvature_roundoff = 0;  // unit roundoff of ds^2 - dz^2 divided by h^2
    bool flatness_within_bound() const { return flatness_max <= flatness_bound; }
    nlohmann::json to_json() const;
    std::string csv() const;   // u,v,x,y,z
    std::string mesh() const;  // OBJ vertex and face lists
};

EmbeddingResult embed(const ScaledProblem& sp, const MetricSpec& metric, const GridField& w,
                      const EmbeddingOptions& opt = {});

struct PrescribedCurvatureResult {
    RunReport run;
    GridField z, curvature, target;  // graph curvature and K on the patch
    Block region{0, 0, 0, 0};
    double relative_error = 0;       // sup |curvature - K| / sup |K| over the region
    double sign_agreement = 1;       // fraction of nodes off the sigma band with matching sign
    nlohmann::json to_json() const;
};

// z_uu z_vv - z_uv^2 = K (1 + |grad z|^2)^2 solved as a Monge-Ampere problem.
MAProblemSpec curvature_problem(const std::string& K, const std::string& Htilde, int n,
                                const std::map<std::string, double>& constants = {});
// Graph curvature of z = u^2 / 2 + eps^5 w on the patch, from the jet of w.
GridField graph_curvature(const ScaledProblem& sp, const GridField& w);
PrescribedCurvatureResult prescribed_curvature(const std::string& K, const std::string& Htilde, int n,
                                               const Schedule& schedule, const IterationConfig& config = {},
                                               double x0 = 0.5, double y0 = 0.5);

struct CovariantLinearization {
    double eps = 1;
    Block region{0, 0, 0, 0};
    std::array<std::array<GridField, 2>, 2> b;  // eps times the cofactor of the covariant Hessian
    std::array<GridField, 2> b_first;           // -eps^3 d/dz_i of K |g| (1 - |grad z|^2)
    std::array<GridField, 2> omega, curvature_term;
    std::array<GridField, 2> divergence_residual;
    double omega_error = 0;       // sup |omega - curvature_term| / sup |curvature_term|
    double divergence_error = 0;  // sup residual / sup of the divergence terms
    double symmetry_error = 0;    // sup |b12 - b21|
    nlohmann::json to_json() const;
};

struct CovariantOptions {
    double eps = 1;
    int margin = 4;            // nodes excluded at each edge
    double bound = 1e-3;       // identity-violation threshold on the relative errors
    bool throw_on_failure = true;
};

// Christoffel symbols and derivatives in x = u / eps^2 coordinates; the curvature identity
// Omega^i = -eps^4 g^(i1) |g| K and the divergence identities of the cofactor matrix.
CovariantLinearization covariant_identity_check(const MetricPatch& metric, const GridField& z,
                                                const CovariantOptions& opt = {});

}  // namespace dma
