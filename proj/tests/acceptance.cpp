#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "dma/checks.hpp"
#include "dma/embedding.hpp"
#include "dma/error.hpp"
#include "dma/iteration.hpp"

using namespace dma;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict linearization() {
    auto t0 = std::chrono::steady_clock::now();
    CheckResult r = linearization_check(scale(MAProblemSpec::model_T1(1.0), 0.1, 0.5, 0.5), 5, 9);
    double t = seconds_since(t0);
    return {r.pass && t < 10, "min order " + fmt("%.4f", r.detail["min_order"]) + " over 5 pairs, " + fmt("%.2f s", t)};
}

Verdict canonical() {
    CheckResult r = canonical_contract_check(0.1, 3);
    const auto& d = r.detail;
    return {r.pass, "|b12^7|/max|b12^3| " + fmt("%.2e", d["b12_ratio"]) + ", b22^7 = 1 exactly " +
                        (d["b22_L7_exactly_one"].get<bool>() ? "yes" : "no") + ", min P11^7 " +
                        fmt("%.4f", d["P11_L7_min"]) + ", |xi - x| " + fmt("%.1e", d["x_independent_xi_minus_x"]) +
                        ", |beta - y| " + fmt("%.1e", d["beta_minus_y"]) + ", |alpha - xi| " +
                        fmt("%.1e", d["alpha_minus_xi"])};
}

Verdict certificate() {
    CheckResult r = certificate_check(scale(MAProblemSpec::model_T1(1.0), 0.01, 0.5, 0.5),
                                      computational_grid(0.5, 0.5, 512, 513), CutoffKit(), 20, 7);
    const auto& d = r.detail;
    return {r.pass, "min I1 " + fmt("%.3e", d["I1_min"]["value"]) + ", min I3 - gamma^2 " +
                        fmt("%.4f", d["I3_gap"]["value"]) + ", min I4 " + fmt("%.4f", d["I4_min"]["value"]) +
                        ", min discriminant " + fmt("%.3e", d["discriminant_min"]["value"]) + ", coercivity on 20 fields " +
                        (d["coercivity_holds"].get<bool>() ? "holds" : "fails")};
}

Verdict galerkin() {
    CheckResult r = manufactured_linear_check(256, 1e-3, 2.0);
    const auto& d = r.detail;
    return {r.pass, "relative L2 error " + fmt("%.3e", d["relative_l2_error"]) + " at N = 64 on 256^2, gain " +
                        fmt("%.2f", d["gain"]) + " on doubling, zero data max " + fmt("%.1e", d["zero_data_max"])};
}

Verdict smoothing() {
    auto t0 = std::chrono::steady_clock::now();
    CheckResult r = smoothing_check(computational_grid(0.5, 0.5));
    double t = seconds_since(t0);
    double worst = 0;
    for (const auto& f : r.detail["bounds"]["fits"])
        worst = std::max(worst, std::abs(f["exponent"].get<double>() - f["predicted"].get<double>()));
    return {r.pass && t < 30, std::to_string(r.detail["bounds"]["fits"].size()) + " exponent fits, worst deviation " +
                                  fmt("%.3f", worst) + ", fixed point " +
                                  fmt("%.1e", r.detail["band_limited_fixed_point"]) + ", " + fmt("%.2f s", t)};
}

// Largest eps of the sweep whose run is accepted, shared by criteria 6 and 7.
double g_eps = 0;

Verdict nash_moser() {
    auto t0 = std::chrono::steady_clock::now();
    std::string skipped;
    for (double eps : {0.05, 0.02, 0.01, 0.007, 0.005}) {
        try {
            NashMoser nm(scale(MAProblemSpec::model_T1(1.0), eps, 0.5, 0.5), Schedule::practical(eps, 2));
            RunReport r = nm.run();
            double worst_tele = 0;
            for (const auto& s : r.history) worst_tele = std::max(worst_tele, s.telescoping);
            double t = seconds_since(t0);
            if (!r.accepted()) {
                skipped += fmt("%g", eps) + " (" + r.status + ") ";
                continue;
            }
            g_eps = eps;
            bool pass = r.decreasing_run >= 5 && r.final_ratio() <= 1e-2 && r.history.size() <= 20 &&
                        worst_tele <= 1e-6 && t <= 600;
            return {pass, "eps " + fmt("%g", eps) + " (larger eps rejected: " + skipped + "), " +
                              std::to_string(r.decreasing_run) + " strict decreases, final/initial " +
                              fmt("%.2e", r.final_ratio()) + " in " + std::to_string(r.history.size()) +
                              " iterations (" + r.status + "), max telescoping " + fmt("%.1e", worst_tele) + ", " +
                              fmt("%.1f s", t)};
        } catch (const Error& e) {
            skipped += fmt("%g", eps) + " (" + e.code() + ") ";
        }
    }
    return {false, "no eps of the sweep converged: " + skipped};
}

Verdict embedding() {
    if (g_eps == 0) return {false, "no converged run available"};
    MetricSpec ms = model_T1_metric(1.0);
    ScaledProblem sp = scale(embedding_problem(ms, "v", 2), g_eps, 0.5, 0.5);
    NashMoser nm(sp, Schedule::practical(g_eps, 2));
    RunReport run = nm.run();
    if (!run.accepted()) return {false, "T1 metric run not accepted (" + run.status + ")"};
    EmbeddingResult e = embed(sp, ms, run.w);
    bool iso = e.isometry.relative <= 1e-3;
    bool flat = e.flatness_within_bound();
    return {iso && flat, std::string("isometry mismatch ") + fmt("%.2e", e.isometry.relative) + (iso ? " ok" : " too large") +
                             "; flatness " + fmt("%.2e", e.flatness_max) + " vs factor " +
                             fmt("%.4f", e.conditioning_factor) + " x MA residual " + fmt("%.2e", e.ma_residual) +
                             " = " + fmt("%.2e", e.flatness_bound) + (flat ? " ok" : " exceeded") +
                             " (curvature roundoff estimate " + fmt("%.2e", e.curvature_roundoff) + ")"};
}

Verdict covariant() {
    CheckResult r = covariant_sphere_check(256, 1e-4, 8.0);
    const auto& d = r.detail;
    return {r.pass, "relative error " + fmt("%.2e", d["omega_error"]) + " at 256^2, " +
                        fmt("%.2e", d["refined_omega_error"]) + " at 512^2, gain " + fmt("%.1f", d["gain"])};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Verdict determinism() {
    fs::path root = fs::temp_directory_path() / "dma_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "solve.json")
        << R"({"problem": {"model": "T1"}, "eps": 0.005, "schedule": {"max_iterations": 2}, "seed": 5})";
    std::ofstream(root / "certify.json") << R"({"problem": {"model": "T1"}, "eps": 0.01, "seed": 5})";
    std::vector<std::string> compared;
    bool same = true;
    for (auto [cmd, cfg] : {std::pair{"solve", "solve.json"}, {"certify-energy", "certify.json"}}) {
        for (const char* run : {"a", "b"}) {
            std::ostringstream quiet;
            std::streambuf* saved = std::cout.rdbuf(quiet.rdbuf());
            cli::run({cmd, "--config", (root / cfg).string(), "--out", (root / cmd / run).string(), "--seed", "5"});
            std::cout.rdbuf(saved);
        }
        for (const auto& entry : fs::directory_iterator(root / cmd / "a")) {
            fs::path other = root / cmd / "b" / entry.path().filename();
            bool eq = fs::exists(other) && slurp(entry.path()) == slurp(other);
            same = same && eq;
            compared.push_back(std::string(cmd) + "/" + entry.path().filename().string() + (eq ? "" : " differs"));
        }
    }
    std::sort(compared.begin(), compared.end());
    std::string list;
    for (const auto& c : compared) list += (list.empty() ? "" : ", ") + c;
    fs::remove_all(root);
    return {same && !compared.empty(), "byte-identical: " + list};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Verdict()> run;
    };
    std::vector<Criterion> criteria = {
        {1, "linearization correctness", linearization},
        {2, "canonical-form contract", canonical},
        {3, "energy certificate", certificate},
        {4, "Galerkin solver", galerkin},
        {5, "smoothing operators", smoothing},
        {6, "Nash-Moser end to end", nash_moser},
        {7, "embedding verification", embedding},
        {8, "curvature identity", covariant},
        {9, "determinism", determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw ") + e.what()};
        }
        failed += !v.pass;
        std::printf("[%s] criterion %d %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria pass\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
