#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dma/canonical.hpp"
#include "dma/linear_solver.hpp"
#include "dma/problem.hpp"
#include "dma/smoothing.hpp"
#include "json.hpp"

namespace dma {

// Smoothing schedule of the Nash-Moser loop. The practical mode uses mu = 2
// and b = 8; paper mode uses b = m* - 31 and mu = eps^((1 - n) / (b + 1)).
struct Schedule {
    double eps = 0.05;
    int n = 2;
    double delta = 0.05;
    double b = 8;
    double mu = 2;
    int m_star = 39;
    int max_iterations = 20;
    double stop_tolerance = 1e-6;  // relative to ||Phi(w_0)||_C0
    bool paper_mode = false;
    double mu_max = 0;  // cap on mu_k; 0 leaves the geometric schedule uncapped

    static Schedule practical(double eps, int n = 2, double mu = 2, double b = 8);
    static Schedule paper(double eps, int n = 2, int m_star = 58);
    double mu_k(int k) const;
    void validate() const;
    nlohmann::json to_json() const;
};

struct IterationConfig {
    int nx = 256, ny = 257;
    int basis_size = 0;  // 0 selects nx / 2 - 2
    int extension_order = 3;
    std::vector<int> monitor_orders = {0, 1, 2};
    int low_order = 2;  // stands in for the H^18 bound of statement III
    double factor_floor = 1e-3;
    double telescoping_tolerance = 1e-6;  // relative to ||Phi(w_0)||_C0
    double noise_floor = 1e-12;           // residuals below this fraction of ||Phi(w_0)|| are not counted as growth
    int divergence_steps = 3;
    // Caps mu_k of the practical schedule at the largest wavenumber of the
    // Galerkin basis divided by the mollifier base.
    bool auto_mu_cap = true;
    // A step whose solve misses this relative residual and raises Phi ends the
    // run at the resolution floor; the step is discarded.
    double floor_solver_residual = 1e-2;
    double accept_ratio = 1e-2;  // final/initial residual accepted at the resolution floor
    CertificateOptions certificate;
    CanonicalOptions canonical;
    CutoffConfig cutoff;
    nlohmann::json to_json() const;
};

// Ratio of a measured norm to its envelope for one induction statement.
struct StatementRow {
    std::string statement;  // "I" ... "VIII", "ledger"
    int k = 0, m = 0;
    double norm = 0, envelope = 0, ratio = 0;
};

struct StepRecord {
    int k = 0;                 // step index; the record describes w_(k+1)
    double mu_k = 1;
    double residual = 0;       // ||Phi(w_(k+1))||_C0(X)
    double residual_ratio = 0; // against ||Phi(w_0)||
    double telescoping = 0;    // identity residual relative to ||Phi(w_0)||
    double u_norm = 0;         // ||u_k||_L2(X)
    double e_operator = 0, e_correction = 0, e_quadratic = 0;  // sup norms of e', e'', e'''
    double ledger_norm = 0;    // ||E_(k+1)||_L2(X)
    double rhs_norm = 0;
    double certificate_i4_min = 0, certificate_discriminant_min = 0;
    GalerkinReport solver;
    std::vector<StatementRow> statements;
    nlohmann::json to_json() const;
};

struct IterationState {
    int k = 0;
    GridField w, v, u_prev, f, E, E_prev, Phi, Phi0, e_prev;
    std::vector<StepRecord> history;

    nlohmann::json checkpoint() const;
    static IterationState restore(const nlohmann::json& j);
};

// L8(v_k) on the (alpha, beta) grid together with the pieces that define it.
struct L8Build {
    CanonicalForm canonical;
    ExtendedOperator L8;
    GridField Pbar, P;        // 1 + eps v_xx + ..., and Pbar P22, at physical nodes
    GridField D;              // removed first-order coefficient, physical nodes
    GridField correction;     // T[(I - S_k) D / P22] at physical nodes
    EnergyCertificate certificate;
};

struct RunReport {
    Schedule schedule;
    IterationConfig config;
    std::vector<StepRecord> history;
    double initial_residual = 0, final_residual = 0;
    bool converged = false;     // residual <= stop_tolerance ||Phi(w_0)||
    std::string status;         // "converged", "resolution-floor" or "max-iterations"
    int decreasing_run = 0;     // longest run of strictly decreasing residuals
    double cauchy_ratio = 0;    // max_i ||w_K - w_i|| / sum_(j >= i) ||u_j||
    double ledger_growth = 0;   // max_k ||E_k|| / mu_k
    double viii_spearman = 0;   // rank correlation of the VIII ratio at m = 2 with k
    GridField w;                // final iterate on X
    double final_ratio() const { return initial_residual > 0 ? final_residual / initial_residual : 0.0; }
    // Converged, or stopped at the resolution floor below accept_ratio.
    bool accepted() const;
    nlohmann::json to_json() const;
    std::string csv() const;
};

class NashMoser {
public:
    NashMoser(const ScaledProblem& sp, const Schedule& schedule, const IterationConfig& config = {});

    const ScaledProblem& problem() const { return sp_; }
    const Schedule& schedule() const { return schedule_; }
    const IterationConfig& config() const { return config_; }
    const Grid& grid() const { return grid_; }
    const ExtensionOperator& extension() const { return T_; }
    Grid x_grid() const { return T_.x_grid(); }

    IterationState initial(const std::optional<GridField>& w0 = std::nullopt) const;
    // v = S'_k T w on the computational grid.
    GridField smoothed_extension(const GridField& w, int k) const;
    // S_k on X.
    GridField smooth_x(const GridField& g, int k) const;
    L8Build build_L8(const GridField& v, int k) const;
    GridField build_rhs(const IterationState& s, const GridField& P_x) const;
    IterationState step(const IterationState& s) const;
    std::vector<StatementRow> monitor_statements(const IterationState& s) const;
    RunReport run(const std::optional<IterationState>& resume = std::nullopt) const;

    // u on X from the (alpha, beta) solution.
    GridField to_x(const GridField& u_ab, const SecondTransform& frame) const;
    // Phi(w + t u) - Phi(w) - t L(w) u.
    GridField quadratic_error(const GridField& w, const GridField& u, double t = 1.0) const;

private:
    ScaledProblem sp_;
    Schedule schedule_;
    IterationConfig config_;
    Grid grid_;
    CutoffKit kit_;
    Mollifier mollifier_;
    ExtensionOperator T_;
    GalerkinBasis basis_;
};

struct SweepEntry {
    double eps = 0;
    bool converged = false;
    std::string error;  // error code when the run threw
    double final_ratio = 0;
    int iterations = 0;
};

struct SweepReport {
    std::vector<SweepEntry> entries;
    std::optional<double> largest_converging;
    nlohmann::json to_json() const;
};

SweepReport eps_sweep(const MAProblemSpec& problem, const std::vector<double>& eps_values, const Schedule& base,
                      const IterationConfig& config = {}, double x0 = 0.5, double y0 = 0.5);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dma
