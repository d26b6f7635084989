#pragma once

#include <map>
#include <string>

#include "dma/expr.hpp"
#include "dma/geometry.hpp"
#include "dma/grid.hpp"
#include "dma/operator.hpp"

namespace dma {

// det(z_ij + a_ij) = K f with a_ij, f in (u, v, p, q1, q2) and K in (u, v).
struct MAProblemSpec {
    Expr a11, a12, a22, f, K;
    CurveSpec sigma;
    int n = 2;
    double u_half = 1.0, v_half = 1.0;  // domain of the original data
    // Cached partials in (p, q1, q2): da[e][c] for a11, a12, a22 and df[c].
    Expr da[3][3], df[3];

    void prepare();

    static MAProblemSpec parse(const std::string& a11, const std::string& a12, const std::string& a22,
                               const std::string& f, const std::string& K, const std::string& Htilde, int n,
                               const std::map<std::string, double>& constants = {}, double M1 = 0.0);
    // a_ij = 0, K = k0 v^3, f = 1, H~ = v, n = 2.
    static MAProblemSpec model_T1(double k0 = 1.0);
};

// Coefficient data of the scaled equation at one node.
struct NodeData {
    double A11, A12, A22;  // a_ij at (u, v, z, z_u, z_v)
    double KF;             // K f
    double dA[3][3];       // dA[e][c]: entry e in (11, 12, 22), c in (p, q1, q2)
    double dKF[3];         // K * df/dc
};

struct HJet {
    double H, Hx, Hy, Hxx, Hxy, Hyy;
};

class ScaledProblem {
public:
    MAProblemSpec spec;
    double eps = 0.1, x0 = 0.5, y0 = 0.5;
    double M1 = 0, M2 = 0;  // measured transversality and factor bounds

    int n() const { return spec.n; }
    NodeData node(double x, double y, double w, double wx, double wy) const;
    HJet H(double x, double y) const;
    // Factor P with eps^(2(n+1)) H^(n+1) P = K f; deflated across sigma.
    double P(double x, double y, double w, double wx, double wy) const;
    // Factors P_ij with eps^(2n) H^n P_ij = a_ij.
    double Pij(int entry, double x, double y, double w, double wx, double wy) const;
    GridField H_field(const Grid& g) const;

private:
    double ratio(const Expr& num, int power, double x, double y, double w, double wx, double wy) const;
};

struct ScaleOptions {
    int check_nodes = 81;         // grid for the vanishing-order checks
    double reconstruction_tol = 1e-8;
    unsigned seed = 1;
};

ScaledProblem scale(const MAProblemSpec& problem, double eps, double x0, double y0, const ScaleOptions& opt = {});

// Phi(w) and the pieces of the Hessian expression it is built from.
struct PhiEval {
    GridField M11, M12, M22, KF, Phi;
};

struct WJet {
    GridField w, wx, wy, wxx, wxy, wyy;
    static WJet of(const GridField& w);
};

PhiEval evaluate_phi(const ScaledProblem& sp, const WJet& jet);
GridField phi(const ScaledProblem& sp, const GridField& w);
LinearOperatorField linearize(const ScaledProblem& sp, const WJet& jet);
LinearOperatorField linearize(const ScaledProblem& sp, const GridField& w);

// Max over grid derivatives of w up to the given order.
double c_surrogate_norm(const GridField& w, int order = 6);

}  // namespace dma
