#pragma once

#include <string>
#include <vector>

#include "dma/canonical.hpp"
#include "dma/grid.hpp"
#include "json.hpp"

namespace dma {

// Frequency cutoff chi^(k) = rho(kx / (mu base_x)) rho(ky / (mu base_y)) with
// rho = 1 on [-1, 1], 0 outside [-2, 2] and a C5 smoothstep in between.
// base_x = pi / x0 maps the box X to the unit frequency box.
struct Mollifier {
    double base_x = 2 * 3.141592653589793, base_y = 2 * 3.141592653589793;

    static Mollifier for_box(double x0, double y0);
    double profile(double t) const;  // rho
    double symbol(double kx, double ky, double mu) const;
    // Moments int t^a chi_1(t) dt, a = 0..3, of the one-dimensional kernel in
    // units where mu base = 1.
    std::vector<double> moments() const;
};

// S'_mu g: multiply the periodic DFT of g by chi^(k / mu).
GridField smooth(const GridField& g, double mu, const Mollifier& m);

// H^m norm with Fourier weights (1 + |k|^2)^m on the periodic DFT.
double fourier_sobolev_norm(const GridField& g, int m);

// Reflection extension from X to the computational grid followed by a cutoff
// that is 1 on X and 0 outside 2X. Reflected values match derivatives up to
// the given order across each edge; corners are handled by extending rows
// first, then columns.
class ExtensionOperator {
public:
    ExtensionOperator(const Grid& target, double x0, double y0, int order = 5);

    const Grid& target() const { return target_; }
    const Block& block() const { return block_; }
    Grid x_grid() const;  // non-periodic grid of the X nodes
    const std::vector<double>& lambda() const { return lambda_; }
    const std::vector<double>& coefficients() const { return coef_; }
    int order() const { return order_; }

    GridField operator()(const GridField& g) const;
    GridField restrict(const GridField& full) const;
    double cutoff(double t, double half) const;

private:
    Grid target_;
    Block block_;
    double x0_, y0_;
    int order_;
    std::vector<double> lambda_, coef_;
};

// S_mu on X: extend, smooth, restrict.
GridField smooth_on_box(const GridField& g, double mu, const Mollifier& m, const ExtensionOperator& T);

struct BoundFit {
    std::string kind;  // "i", "ii" or "iii"
    int m = 0, l = 0;
    double constant = 0;   // fitted C
    double exponent = 0;   // fitted slope of log ratio against log mu
    double predicted = 0;
    std::vector<double> worst;  // worst ratio over the suite at each mu
    bool pass = false;
};

struct SmoothingReport {
    std::vector<double> mus;
    std::vector<BoundFit> fits;
    double tolerance = 0.3;
    bool pass() const;
    nlohmann::json to_json() const;
    std::string csv() const;
};

// Gaussians, a C1 bump and x-oscillating packets on a ladder of frequencies.
std::vector<GridField> default_smoothing_suite(const Grid& g, const Mollifier& m, double max_mu = 16);

// Fits C and the mu exponent of the three smoothing bounds, taking for each
// mu the worst ratio over the suite.
SmoothingReport verify_smoothing_bounds(const Mollifier& m, const std::vector<GridField>& suite,
                                        const std::vector<double>& mus = {2, 4, 8, 16},
                                        const std::vector<int>& orders = {0, 2, 4}, double tolerance = 0.3,
                                        bool throw_on_defect = false);

}  // namespace dma
