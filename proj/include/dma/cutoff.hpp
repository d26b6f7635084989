#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace dma {

// Degree 11 polynomial smoothstep: 0 for t <= 0, 1 for t >= 1, C5 at both ends.
double smoothstep(double t, int derivative = 0);
// Integrals over [0, t] of s(tau) and tau s(tau), for t in [0, 1].
double smoothstep_integral(double t);
double smoothstep_moment(double t);

struct Jet {
    double v = 0, d1 = 0, d2 = 0;
};

struct CutoffConfig {
    double mu1 = 1.5, mu2 = 1.3, mu3 = 1.15;
    double y0 = 0.5;
    double M1 = 1.0, M2 = 2.0, M3 = 1.0, M4 = 8.0, delta = 0.1;
    // Raise M1 so the zeroth-order multiplier term dominates a'' on the
    // steep part of a.
    bool auto_M1 = true;
};

struct AuditItem {
    std::string name;
    double margin;   // >= 0 when the property holds
    bool required;   // informational items do not fail the audit
    bool pass() const { return !required || margin >= 0; }
};

struct CutoffAudit {
    std::vector<AuditItem> items;
    bool pass() const;
    nlohmann::json to_json() const;
};

// Cutoffs phi, psi1..psi3 and multipliers a, b, gamma used to extend the
// canonical operator to the plane and to certify its energy estimate.
class CutoffKit {
public:
    CutoffKit() : CutoffKit(CutoffConfig{}) {}
    explicit CutoffKit(const CutoffConfig& cfg);

    const CutoffConfig& config() const { return cfg_; }
    double y(int i) const { return y_[i - 1]; }  // breakpoints y1..y6
    double M1() const { return M1_; }
    double M2() const { return cfg_.M2; }
    double M3() const { return M3_; }  // -a beyond y6
    double M4() const { return cfg_.M4; }
    double delta() const { return cfg_.delta; }
    double min_a_second() const { return min_app_; }

    Jet phi(double y) const;
    Jet psi1(double y) const;
    Jet psi2(double y) const;
    Jet psi3(double y) const;
    Jet a(double y) const;
    Jet b(double y) const;
    double gamma2(double y) const;

    CutoffAudit audit(int samples = 20001) const;
    nlohmann::json to_json() const;

private:
    CutoffConfig cfg_;
    double y_[6];
    double M1_, M3_, min_app_;
};

}  // namespace dma
