#include "dma/cutoff.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dma/error.hpp"

namespace dma {

namespace {

constexpr int kOrder = 5;
constexpr int kDegree = 2 * kOrder + 1;

double binom(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

const std::array<double, kDegree + 1>& coefficients() {
    static const std::array<double, kDegree + 1> c = [] {
        std::array<double, kDegree + 1> a{};
        for (int k = 0; k <= kOrder; ++k)
            a[kOrder + 1 + k] = binom(kOrder + k, k) * binom(kDegree, kOrder - k) * (k % 2 ? -1.0 : 1.0);
        return a;
    }();
    return c;
}

int sgn(double y) { return y < 0 ? -1 : 1; }

}  // namespace

double smoothstep(double t, int derivative) {
    if (t <= 0) return 0.0;
    if (t >= 1) return derivative == 0 ? 1.0 : 0.0;
    // s(t) = 1 - s(1 - t); evaluating near 0 keeps the flat end free of cancellation.
    if (t > 0.5) {
        double r = smoothstep(1 - t, derivative);
        return derivative == 0 ? 1 - r : (derivative % 2 ? r : -r);
    }
    const auto& c = coefficients();
    double acc = 0;
    for (int p = kDegree; p >= 0; --p) {
        if (p < derivative) break;
        double f = c[p];
        for (int q = 0; q < derivative; ++q) f *= p - q;
        acc += f * std::pow(t, p - derivative);
    }
    return acc;
}

double smoothstep_integral(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto& c = coefficients();
    double acc = 0;
    for (int p = 0; p <= kDegree; ++p) acc += c[p] * std::pow(t, p + 1) / (p + 1);
    return acc;
}

double smoothstep_moment(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto& c = coefficients();
    double acc = 0;
    for (int p = 0; p <= kDegree; ++p) acc += c[p] * std::pow(t, p + 2) / (p + 2);
    return acc;
}

bool CutoffAudit::pass() const {
    return std::all_of(items.begin(), items.end(), [](const AuditItem& i) { return i.pass(); });
}

nlohmann::json CutoffAudit::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& i : items)
        j.push_back({{"property", i.name}, {"margin", i.margin}, {"required", i.required}, {"pass", i.pass()}});
    return {{"pass", pass()}, {"properties", j}};
}

CutoffKit::CutoffKit(const CutoffConfig& cfg) : cfg_(cfg) {
    require(cfg.mu1 > cfg.mu2 && cfg.mu2 > cfg.mu3 && cfg.mu3 > 1, "invalid-cutoff",
            "enlargement factors must satisfy mu1 > mu2 > mu3 > 1");
    require(cfg.y0 > 0 && cfg.delta > 0 && cfg.M2 > 0 && cfg.M4 > 0, "invalid-cutoff", "kit constants must be positive");
    for (int i = 0; i < 6; ++i) y_[i] = cfg.mu3 * cfg.y0 * (1 + i * (cfg.mu2 / cfg.mu3 - 1) / 5);
    M1_ = cfg.M1;
    M3_ = -a(y_[5]).v;
    double y5 = y_[4], y6 = y_[5];
    min_app_ = 0;
    for (int k = 0; k <= 2000; ++k) min_app_ = std::min(min_app_, a(y5 + (y6 - y5) * k / 2000.0).d2);
    if (cfg.auto_M1) M1_ = std::max(M1_, (1 + std::max(0.0, -min_app_ / 2)) / M3_);
}

Jet CutoffKit::phi(double y) const {
    double d = y_[5] - y_[4], t = (std::abs(y) - y_[4]) / d;
    return {1 - smoothstep(t), -sgn(y) * smoothstep(t, 1) / d, -smoothstep(t, 2) / (d * d)};
}

Jet CutoffKit::psi1(double y) const {
    double d = y_[2] - y_[1], t = (std::abs(y) - y_[1]) / d;
    return {sgn(y) * smoothstep(t), smoothstep(t, 1) / d, sgn(y) * smoothstep(t, 2) / (d * d)};
}

Jet CutoffKit::psi2(double y) const {
    double y5 = y_[4], y6 = y_[5], d = y6 - y5, r = -y;
    if (r <= y5) return {};
    double t = (r - y5) / d, dl = cfg_.delta;
    double v = r >= y6 ? dl * (d / 2 + r - y6) : dl * d * smoothstep_integral(t);
    return {v, -dl * smoothstep(t), dl * smoothstep(t, 1) / d};
}

Jet CutoffKit::psi3(double y) const {
    double d = y_[3] - y_[2], t = (std::abs(y) - y_[2]) / d;
    return {-sgn(y) * M1_ * smoothstep(t), -M1_ * smoothstep(t, 1) / d, -sgn(y) * M1_ * smoothstep(t, 2) / (d * d)};
}

Jet CutoffKit::a(double y) const {
    double r = std::abs(y), y5 = y_[4], d = y_[5] - y5;
    if (r <= y5) return {r * r - cfg_.M2, 2 * y, 2};
    double t = std::min((r - y5) / d, 1.0);
    double v = y5 * y5 - cfg_.M2 +
               2 * d * (y5 * t + d * t * t / 2 - y5 * smoothstep_integral(t) - d * smoothstep_moment(t));
    double s = smoothstep(t);
    return {v, 2 * y * (1 - s), 2 * (1 - s) - 2 * r * smoothstep(t, 1) / d};
}

Jet CutoffKit::b(double y) const {
    if (y >= 0) return {1, 0, 0};
    double r = -y, y2 = y_[1], t = r / y2, m = cfg_.M4;
    double s = smoothstep(t), s1 = smoothstep(t, 1), s2 = smoothstep(t, 2);
    return {1 + m * r * s, -m * (s + r * s1 / y2), m * (2 * s1 / y2 + r * s2 / (y2 * y2))};
}

double CutoffKit::gamma2(double y) const {
    double ramp = y < 0 ? smoothstep((-y - y_[4]) / (y_[5] - y_[4])) : 0.0;
    return M3_ / 2 + cfg_.delta * cfg_.M4 / 2 * y * y * ramp;
}

CutoffAudit CutoffKit::audit(int samples) const {
    CutoffAudit rep;
    auto add = [&](const std::string& name, double margin, bool required = true) {
        rep.items.push_back({name, margin, required});
    };
    double y1 = y_[0], y2 = y_[1], y3 = y_[2], y4 = y_[3], y5 = y_[4], y6 = y_[5];
    double order = INFINITY;
    for (int i = 0; i < 5; ++i) order = std::min(order, y_[i + 1] - y_[i]);
    add("breakpoints increasing", order > 0 ? order : -1);
    add("y1 = mu3 y0", -std::abs(y1 - cfg_.mu3 * cfg_.y0) + 1e-14);
    add("y6 = mu2 y0", -std::abs(y6 - cfg_.mu2 * cfg_.y0) + 1e-12);
    add("M3 < M2", cfg_.M2 - M3_);
    add("M4/2 - M2 >= 1", cfg_.M4 / 2 - cfg_.M2 - 1);
    add("a <= -M3 (configured)", M3_ - cfg_.M3);

    const double tol = 1e-12, Y = 3 * y6;
    double m[32];
    std::fill(std::begin(m), std::end(m), 0.0);
    auto worst = [&](int k, double v) { m[k] = std::min(m[k], v); };
    double app_min = INFINITY;
    for (int k = 0; k < samples; ++k) {
        double y = -Y + 2 * Y * k / (samples - 1), r = std::abs(y);
        Jet ph = phi(y), p1 = psi1(y), p2 = psi2(y), p3 = psi3(y), av = a(y), bv = b(y);
        if (r <= y5) worst(0, tol - std::abs(ph.v - 1));
        if (r >= y6) worst(1, tol - std::abs(ph.v));
        worst(2, ph.v + tol);
        worst(3, 1 + tol - ph.v);
        if (r <= y2) worst(4, tol - std::abs(p1.v));
        if (y >= y3) worst(5, tol - std::abs(p1.v - 1));
        if (y <= -y3) worst(6, tol - std::abs(p1.v + 1));
        worst(7, p1.d1 + tol);
        if (y >= -y5) worst(8, tol - std::abs(p2.v));
        if (y <= -y6) worst(9, tol * (1 + r) - std::abs(p2.v + cfg_.delta * y + cfg_.delta * (y5 + y6) / 2));
        worst(10, p2.v + tol);
        worst(11, tol - p2.d1);
        worst(12, p2.d1 + cfg_.delta + tol);
        if (r <= y3) worst(13, tol - std::abs(p3.v));
        if (y <= -y4) worst(14, tol * M1_ - std::abs(p3.v - M1_));
        if (y >= y4) worst(15, tol * M1_ - std::abs(p3.v + M1_));
        worst(16, tol - p3.d1);
        worst(17, y <= 0 ? p3.v + tol : tol - p3.v);
        if (r <= y5) worst(18, tol - std::abs(av.v - (y * y - cfg_.M2)));
        if (r >= y6) worst(19, tol - std::abs(av.v + M3_));
        worst(20, -M3_ - av.v + tol);
        worst(21, y <= 0 ? tol - av.d1 : av.d1 + tol);
        app_min = std::min(app_min, av.d2);
        if (y >= 0) worst(22, tol - std::abs(bv.v - 1));
        if (y <= -y2) worst(23, tol * (1 + r) - std::abs(bv.v - (1 - cfg_.M4 * y)));
        worst(24, bv.v - 1 + tol);
        worst(25, tol - bv.d1);
    }
    const char* names[] = {"phi = 1 on |y| <= y5",     "phi = 0 on |y| >= y6",       "phi >= 0",
                           "phi <= 1",                 "psi1 = 0 on |y| <= y2",      "psi1 = 1 on y >= y3",
                           "psi1 = -1 on y <= -y3",    "psi1' >= 0",                 "psi2 = 0 on y >= -y5",
                           "psi2 linear on y <= -y6",  "psi2 >= 0",                  "psi2' <= 0",
                           "psi2' >= -delta",          "psi3 = 0 on |y| <= y3",      "psi3 = M1 on y <= -y4",
                           "psi3 = -M1 on y >= y4",    "psi3' <= 0",                 "psi3 sign",
                           "a = y^2 - M2 on |y| <= y5", "a constant on |y| >= y6",   "a <= -M3",
                           "a' sign",                  "b = 1 on y >= 0",            "b = 1 - M4 y on y <= -y2",
                           "b >= 1",                   "b' <= 0"};
    for (int k = 0; k < 26; ++k) add(names[k], m[k]);
    // With breakpoints this close a cannot bend from slope 2 y5 to 0 with
    // a'' >= -delta; the shortfall is covered by the enlarged M1.
    add("a'' >= -delta", app_min + cfg_.delta, false);
    add("M1 covers a''", M1_ * M3_ - (1 + std::max(0.0, -app_min / 2)) + 1e-12, cfg_.auto_M1);
    return rep;
}

nlohmann::json CutoffKit::to_json() const {
    nlohmann::json j;
    j["breakpoints"] = std::vector<double>(y_, y_ + 6);
    j["M1"] = M1_;
    j["M2"] = cfg_.M2;
    j["M3"] = M3_;
    j["M3_configured"] = cfg_.M3;
    j["M4"] = cfg_.M4;
    j["delta"] = cfg_.delta;
    j["min_a_second_derivative"] = min_app_;
    j["audit"] = audit().to_json();
    return j;
}

}  // namespace dma
