#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dma/canonical.hpp"
#include "dma/embedding.hpp"
#include "dma/linear_solver.hpp"
#include "dma/smoothing.hpp"
#include "json.hpp"

namespace dma {

// Outcome of one verification run: a verdict, the measured quantities and an optional CSV table.
struct CheckResult {
    std::string name;
    bool pass = false;
    nlohmann::json detail;
    std::string csv;
};

// Taylor remainder order of Phi(w + t v) - Phi(w) - t L v over t in {1e-2, 1e-3} for random smooth pairs.
CheckResult linearization_check(const ScaledProblem& sp, int pairs = 5, std::uint64_t seed = 9, double min_order = 1.9);

// Full reduction of the model problem with a random perturbation of w, plus the identity cases
// (x-independent w keeps xi = x; H = y keeps beta = y and alpha = xi).
CheckResult canonical_contract_check(double eps = 0.1, std::uint64_t seed = 3);

// Energy certificate of the reduced problem at w = 0 on an audit grid and the coercivity inequality on
// random fields. Never throws on certificate failure; the verdict and the worst margins are reported.
CheckResult certificate_check(const ScaledProblem& sp, const Grid& audit, const CutoffKit& kit = CutoffKit(),
                              int samples = 20, unsigned seed = 7);
CheckResult extended_certificate_check(const ExtendedOperator& L, int samples = 20, unsigned seed = 7);

// Constant-coefficient elliptic operator d_xx + d_yy - 1 on [-6, 6]^2 with u* = exp(-x^2 - y^2), at
// grid n and N = n / 4 modes and again at 2n, 2N; zero data must give u = 0.
CheckResult manufactured_linear_check(int n = 256, double tolerance = 1e-3, double min_gain = 2.0);

// Exponent fits of the three smoothing bounds and the band-limited fixed point.
CheckResult smoothing_check(const Grid& g, const std::vector<double>& mus = {2, 4, 8, 16},
                            const std::vector<int>& orders = {0, 2, 4}, double tolerance = 0.3);

// Curvature identity on the unit-sphere graph metric at n and 2n nodes per side.
CheckResult covariant_sphere_check(int n = 256, double bound = 1e-4, double min_gain = 8.0);

// Isometry and flatness of a supplied (metric, z) pair on the inner half block. Without (x, y) the flat
// coordinates of ds^2 - dz^2 are integrated.
CheckResult embedding_pair_check(const MetricPatch& metric, const GridField& z, double tolerance = 1e-8,
                                 const std::optional<std::array<GridField, 2>>& xy = std::nullopt);

// Unit-sphere graph metric sampled on [-1/2, 1/2]^2.
MetricSpec sphere_metric();

}  // namespace dma
