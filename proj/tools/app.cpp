#include "app.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dma/checks.hpp"
#include "dma/embedding.hpp"
#include "dma/error.hpp"
#include "dma/iteration.hpp"
#include "dma/version.hpp"
#include "json.hpp"

namespace dma::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kOutEnv = "DMA_OUT_DIR";

struct RunConfig {
    json problem = {{"model", "T1"}, {"k0", 1.0}};
    std::vector<double> eps = {0.005};
    double x0 = 0.5, y0 = 0.5;
    int nx = 256, ny = 257;
    json schedule = json::object();
    json tolerances = json::object();
    json certificate = json::object();
    json linear = json::object();
    json smoothing = json::object();
    json verify = json::object();
    std::uint64_t seed = 1;
    bool paper_mode = false;
    std::string out = "dma-out";

    // Everything that determines the numbers; the output directory is left out.
    json effective() const {
        return {{"problem", problem},       {"eps", eps},
                {"x0", x0},                 {"y0", y0},
                {"grid", {{"nx", nx}, {"ny", ny}}},
                {"schedule", schedule},     {"tolerances", tolerances},
                {"certificate", certificate}, {"linear", linear},
                {"smoothing", smoothing},   {"verify", verify},
                {"seed", seed},             {"paper_mode", paper_mode}};
    }
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(bool(in), "config", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("config", path.string() + ": " + e.what());
    }
}

template <class T>
T field(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error("config", std::string("field ") + key + ": " + e.what());
    }
}

std::map<std::string, double> constants_of(const json& j) {
    return field<std::map<std::string, double>>(j, "constants", {});
}

RunConfig load_config(const std::optional<std::string>& path) {
    RunConfig c;
    if (!path) return c;
    json j = read_json(*path);
    require(j.is_object(), "config", "top level must be an object");
    static const std::vector<std::string> known = {"problem", "eps",    "x0",        "y0",     "grid",
                                                   "schedule", "tolerances", "certificate", "linear", "smoothing",
                                                   "verify",  "seed",   "paper_mode", "out"};
    for (const auto& [k, v] : j.items())
        require(std::find(known.begin(), known.end(), k) != known.end(), "config", "unknown field " + k);
    fs::path base = fs::path(*path).parent_path();
    if (j.contains("problem")) {
        c.problem = j["problem"];
        if (c.problem.contains("file")) {
            fs::path ref = base / c.problem["file"].get<std::string>();
            require(fs::exists(ref), "config", "problem file " + ref.string() + " does not exist");
            c.problem = read_json(ref);
        }
    }
    if (j.contains("eps")) {
        if (j["eps"].is_array())
            c.eps = field<std::vector<double>>(j, "eps", {});
        else
            c.eps = {field<double>(j, "eps", 0.005)};
        require(!c.eps.empty(), "config", "eps list is empty");
    }
    c.x0 = field(j, "x0", c.x0);
    c.y0 = field(j, "y0", c.y0);
    if (j.contains("grid")) {
        c.nx = field(j["grid"], "nx", c.nx);
        c.ny = field(j["grid"], "ny", c.ny);
    }
    for (auto [key, slot] : {std::pair{"schedule", &c.schedule}, {"tolerances", &c.tolerances},
                             {"certificate", &c.certificate}, {"linear", &c.linear}, {"smoothing", &c.smoothing},
                             {"verify", &c.verify}})
        if (j.contains(key)) *slot = j[key];
    c.seed = field<std::uint64_t>(j, "seed", c.seed);
    c.paper_mode = field(j, "paper_mode", c.paper_mode);
    c.out = field<std::string>(j, "out", c.out);
    return c;
}

struct Problem {
    std::string kind;
    MAProblemSpec spec;
    std::optional<MetricSpec> metric;
};

Problem build_problem(const json& p) {
    std::string sigma = field<std::string>(p, "sigma", "v");
    int n = field(p, "n", 2);
    double M1 = field(p, "M1", 0.0);
    if (p.contains("model")) {
        std::string model = field<std::string>(p, "model", "");
        double k0 = field(p, "k0", 1.0);
        if (model == "T1") return {model, MAProblemSpec::model_T1(k0), std::nullopt};
        if (model == "T1-metric") {
            MetricSpec ms = model_T1_metric(k0);
            return {model, embedding_problem(ms, "v", 2), ms};
        }
        throw Error("config", "unknown model " + model);
    }
    if (p.contains("metric")) {
        const json& m = p["metric"];
        MetricSpec ms = MetricSpec::parse(field<std::string>(m, "E", "1"), field<std::string>(m, "F", "0"),
                                          field<std::string>(m, "G", "1"), constants_of(p));
        return {"metric", embedding_problem(ms, sigma, n, M1), ms};
    }
    if (p.contains("curvature"))
        return {"curvature", curvature_problem(field<std::string>(p, "curvature", "0"), sigma, n, constants_of(p)),
                std::nullopt};
    require(p.contains("K"), "config", "problem needs model, metric, curvature or explicit coefficients with K");
    return {"explicit",
            MAProblemSpec::parse(field<std::string>(p, "a11", "0"), field<std::string>(p, "a12", "0"),
                                 field<std::string>(p, "a22", "0"), field<std::string>(p, "f", "1"),
                                 field<std::string>(p, "K", "0"), sigma, n, constants_of(p), M1),
            std::nullopt};
}

Schedule build_schedule(const RunConfig& c, double eps, int n) {
    const json& s = c.schedule;
    bool paper = c.paper_mode || field(s, "paper_mode", false);
    Schedule sch = paper ? Schedule::paper(eps, n, field(s, "m_star", 58))
                         : Schedule::practical(eps, n, field(s, "mu", 2.0), field(s, "b", 8.0));
    sch.max_iterations = field(s, "max_iterations", sch.max_iterations);
    sch.stop_tolerance = field(s, "stop_tolerance", sch.stop_tolerance);
    sch.mu_max = field(s, "mu_max", sch.mu_max);
    return sch;
}

IterationConfig build_iteration_config(const RunConfig& c) {
    IterationConfig cfg;
    cfg.nx = c.nx;
    cfg.ny = c.ny;
    const json& t = c.tolerances;
    cfg.accept_ratio = field(t, "accept_ratio", cfg.accept_ratio);
    cfg.telescoping_tolerance = field(t, "telescoping", cfg.telescoping_tolerance);
    cfg.floor_solver_residual = field(t, "floor_solver_residual", cfg.floor_solver_residual);
    cfg.basis_size = field(c.schedule, "basis_size", cfg.basis_size);
    cfg.auto_mu_cap = field(c.schedule, "auto_mu_cap", cfg.auto_mu_cap);
    return cfg;
}

int exit_code_for(const std::string& code) {
    if (code == "config") return kConfigError;
    if (code == "regime") return kRegimeError;
    return kModuleError;
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(bool(out), "io", "cannot write " + path.string());
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

class Session {
public:
    Session(std::string command, RunConfig config) : command_(std::move(command)), config_(std::move(config)) {
        hash_ = sha256_hex(config_.effective().dump());
    }

    const RunConfig& config() const { return config_; }
    fs::path out() const { return config_.out; }

    json envelope() const {
        return {{"command", command_},
                {"config", config_.effective()},
                {"config_hash", hash_},
                {"versions", module_versions()}};
    }

    json error_json(const std::string& code, const std::string& message) const {
        json j = envelope();
        j["error"] = {{"code", code}, {"message", message}};
        return j;
    }

private:
    std::string command_;
    RunConfig config_;
    std::string hash_;
};

std::string graph_mesh(const Grid& g, const GridField& z) {
    std::ostringstream os;
    os.precision(17);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) os << "v " << g.x(i) << ' ' << g.y(j) << ' ' << z(i, j) << '\n';
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            int a = j * g.nx + i + 1, b = a + 1, c = a + g.nx, d = c + 1;
            os << "f " << a << ' ' << b << ' ' << d << "\nf " << a << ' ' << d << ' ' << c << '\n';
        }
    return os.str();
}

std::string graph_csv(const Grid& g, const GridField& z) {
    std::ostringstream os;
    os.precision(17);
    os << "u,v,x,y,z\n";
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            os << g.x(i) << ',' << g.y(j) << ',' << g.x(i) << ',' << g.y(j) << ',' << z(i, j) << '\n';
    return os.str();
}

json geometry_section(const Problem& pb) {
    json j = {{"kind", pb.kind}, {"n", pb.spec.n}};
    if (pb.spec.K.is_zero()) {
        j["vanishing_order"] = nullptr;
        return j;
    }
    Grid g = Grid::box(81, 81, -pb.spec.u_half, pb.spec.u_half, -pb.spec.v_half, pb.spec.v_half);
    pb.spec.sigma.check_transversal(g);
    GridField K = GridField::sample(g, [&](double u, double v) { return pb.spec.K.eval({u, v, 0, 0, 0}); });
    VanishingOrder vo = vanishing_order(K, pb.spec.sigma);
    j["vanishing_order"] = {{"order", vo.order}, {"n", vo.n}, {"in_regime", vo.in_regime}, {"fitted_slope", vo.fitted_slope}};
    require(vo.n == pb.spec.n, "regime",
            "K vanishes to order " + std::to_string(vo.order) + " on sigma but n = " + std::to_string(pb.spec.n));
    return j;
}

struct SolveOutcome {
    int code = kOk;
    json summary;
};

// One epsilon into one directory.
SolveOutcome solve_one(const Session& s, const Problem& pb, double eps, const fs::path& dir) {
    const RunConfig& c = s.config();
    json report = s.envelope();
    report["eps"] = eps;
    try {
        report["geometry"] = geometry_section(pb);
        ScaledProblem sp = scale(pb.spec, eps, c.x0, c.y0);
        CheckResult lin = linearization_check(sp, 5, c.seed);
        report["problem"] = {{"linearization", lin.detail}, {"linearization_pass", lin.pass}};
        NashMoser nm(sp, build_schedule(c, eps, pb.spec.n), build_iteration_config(c));
        RunReport run = nm.run();
        report["run"] = run.to_json();
        write_file(dir / "residuals.csv", run.csv());
        if (pb.metric) {
            EmbeddingResult emb = embed(sp, *pb.metric, run.w);
            report["embedding"] = emb.to_json();
            report["embedding"]["kind"] = "isometric";
            write_file(dir / "embedding.csv", emb.csv());
            write_file(dir / "embedding.obj", emb.mesh());
        } else {
            Grid patch = patch_grid(run.w.grid, eps);
            GridField z = reconstruct_z(run.w, sp);
            report["embedding"] = {{"kind", "graph"},
                                   {"note", "no metric given; the export is the graph of z over the (u, v) patch"}};
            write_file(dir / "embedding.csv", graph_csv(patch, z));
            write_file(dir / "embedding.obj", graph_mesh(patch, z));
        }
        report["accepted"] = run.accepted();
        write_file(dir / "report.json", dump(report));
        return {run.accepted() ? kOk : kCheckFailed,
                {{"eps", eps}, {"status", run.status}, {"accepted", run.accepted()}, {"final_ratio", run.final_ratio()},
                 {"iterations", int(run.history.size())}}};
    } catch (const Error& e) {
        json err = s.error_json(e.code(), e.what());
        err["eps"] = eps;
        write_file(dir / "error.json", dump(err));
        return {exit_code_for(e.code()), {{"eps", eps}, {"error", e.code()}, {"message", e.what()}}};
    }
}

std::string eps_dir(double eps) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "eps_%g", eps);
    return buf;
}

int cmd_solve(const Session& s, bool sweep) {
    const RunConfig& c = s.config();
    Problem pb = build_problem(c.problem);
    if (c.eps.size() == 1 && !sweep) {
        SolveOutcome o = solve_one(s, pb, c.eps[0], s.out());
        std::cout << o.summary.dump() << "\n";
        return o.code;
    }
    std::vector<SolveOutcome> outcomes;
    if (sweep) {
        std::vector<std::future<SolveOutcome>> jobs;
        for (double eps : c.eps)
            jobs.push_back(std::async(std::launch::async, solve_one, std::cref(s), std::cref(pb), eps,
                                      s.out() / eps_dir(eps)));
        for (auto& f : jobs) outcomes.push_back(f.get());
    } else {
        for (double eps : c.eps) outcomes.push_back(solve_one(s, pb, eps, s.out() / eps_dir(eps)));
    }
    json j = s.envelope();
    j["entries"] = json::array();
    std::optional<double> largest;
    for (const auto& o : outcomes) {
        j["entries"].push_back(o.summary);
        if (o.code == kOk && (!largest || o.summary["eps"].get<double>() > *largest)) largest = o.summary["eps"].get<double>();
    }
    j["largest_accepted_eps"] = largest ? json(*largest) : json(nullptr);
    write_file(s.out() / "sweep.json", dump(j));
    std::cout << json{{"largest_accepted_eps", j["largest_accepted_eps"]}}.dump() << "\n";
    if (largest) return kOk;
    for (const auto& o : outcomes)
        if (o.code == kRegimeError || o.code == kConfigError) return o.code;
    return kCheckFailed;
}

// Writes <name>.json and <name>.csv and maps the verdict to an exit code.
int emit(const Session& s, const std::string& name, json report, const std::string& csv, bool pass) {
    report["pass"] = pass;
    write_file(s.out() / (name + ".json"), dump(report));
    write_file(s.out() / (name + ".csv"), csv);
    std::cout << json{{"pass", pass}}.dump() << "\n";
    return pass ? kOk : kCheckFailed;
}

int cmd_certify_energy(const Session& s) {
    const RunConfig& c = s.config();
    Problem pb = build_problem(c.problem);
    int samples = field(c.certificate, "samples", 20);
    int nx = c.nx, ny = c.ny;
    if (c.certificate.contains("audit_grid")) {
        auto a = field<std::vector<int>>(c.certificate, "audit_grid", {});
        require(a.size() == 2, "config", "audit_grid needs two entries");
        nx = a[0];
        ny = a[1];
    }
    json report = s.envelope();
    report["entries"] = json::array();
    std::string csv = "eps,sample,form,bound\n";
    bool pass = true;
    for (double eps : c.eps) {
        CheckResult r;
        if (pb.spec.K.is_zero()) {
            // K = 0: the reduced operator is d_yy plus the cutoff far field.
            Grid g = computational_grid(c.x0, c.y0, nx, ny);
            ExtendedOperator e{g, CutoffKit(), c.y0 / c.x0, GridField(g), GridField(g), GridField(g), GridField(g)};
            r = extended_certificate_check(e, samples, unsigned(c.seed));
            r.detail["degenerate"] = "K vanishes identically";
        } else {
            ScaledProblem sp = scale(pb.spec, eps, c.x0, c.y0);
            r = certificate_check(sp, computational_grid(c.x0, c.y0, nx, ny), CutoffKit(), samples, unsigned(c.seed));
        }
        json entry = r.detail;
        entry["eps"] = eps;
        entry["pass"] = r.pass;
        json negative = json::array();
        for (const char* key : {"I1_min", "I3_gap", "I4_min", "discriminant_min"})
            if (!r.pass && entry[key]["value"].get<double>() < 0) negative.push_back({{"field", key}, {"at", entry[key]}});
        entry["negative_margins"] = negative;
        report["entries"].push_back(entry);
        std::istringstream rows(r.csv);
        std::string line;
        std::getline(rows, line);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g,", eps);
        while (std::getline(rows, line)) csv += buf + line + "\n";
        pass = pass && r.pass;
    }
    return emit(s, "certify-energy", report, csv, pass);
}

int cmd_check_linear(const Session& s) {
    const json& l = s.config().linear;
    CheckResult r = manufactured_linear_check(field(l, "grid", 256), field(l, "tolerance", 1e-3), field(l, "min_gain", 2.0));
    json report = s.envelope();
    report["linear"] = r.detail;
    return emit(s, "check-linear", report, r.csv, r.pass);
}

int cmd_smoothing_bench(const Session& s) {
    const RunConfig& c = s.config();
    const json& m = c.smoothing;
    CheckResult r = smoothing_check(computational_grid(c.x0, c.y0, c.nx, c.ny),
                                    field<std::vector<double>>(m, "mus", {2, 4, 8, 16}),
                                    field<std::vector<int>>(m, "orders", {0, 2, 4}), field(m, "tolerance", 0.3));
    json report = s.envelope();
    report["smoothing"] = r.detail;
    return emit(s, "smoothing-bench", report, r.csv, r.pass);
}

int cmd_verify_embedding(const Session& s) {
    const json& v = s.config().verify;
    require(v.contains("metric") && v.contains("z"), "config", "verify needs metric and z");
    const json& m = v["metric"];
    auto consts = constants_of(v);
    MetricSpec ms = MetricSpec::parse(field<std::string>(m, "E", "1"), field<std::string>(m, "F", "0"),
                                      field<std::string>(m, "G", "1"), consts);
    json gj = field(v, "grid", json::object());
    auto n = field<std::vector<int>>(gj, "n", {101, 101});
    auto ur = field<std::vector<double>>(gj, "u", {-0.5, 0.5}), vr = field<std::vector<double>>(gj, "v", {-0.5, 0.5});
    require(n.size() == 2 && ur.size() == 2 && vr.size() == 2, "config", "verify grid needs n, u and v pairs");
    Grid g = Grid::box(n[0], n[1], ur[0], ur[1], vr[0], vr[1]);
    MetricPatch patch = ms.sample(g);
    auto sample = [&](const char* key) {
        Expr e = Expr::parse(field<std::string>(v, key, "0"), {"u", "v"}, consts);
        return GridField::sample(g, [&](double a, double b) { return e.eval({a, b}); });
    };
    GridField z = sample("z");
    std::optional<std::array<GridField, 2>> xy;
    if (v.contains("x") && v.contains("y")) xy = std::array<GridField, 2>{sample("x"), sample("y")};
    CheckResult r = embedding_pair_check(patch, z, field(v, "tolerance", 1e-8), xy);
    json report = s.envelope();
    report["embedding"] = r.detail;
    CovariantOptions co;
    co.throw_on_failure = false;
    CovariantLinearization cl = covariant_identity_check(patch, z, co);
    report["covariant"] = {{"omega_error", cl.omega_error},
                           {"divergence_error", cl.divergence_error},
                           {"symmetry_error", cl.symmetry_error}};
    return emit(s, "verify-embedding", report, r.csv, r.pass);
}

}  // namespace

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"Degenerate Monge-Ampere solver and verification driver"};
    app.require_subcommand(1);
    std::optional<std::string> config_path, out_dir;
    std::optional<std::uint64_t> seed;
    bool paper = false, sweep = false;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_dir, "output directory (overrides " + std::string(kOutEnv) + " and the config)");
    app.add_option("--seed", seed, "seed for randomized checks");
    app.add_flag("--paper-schedule", paper, "use the asymptotic schedule instead of the practical one");
    app.add_flag("--sweep", sweep, "run every eps of the config concurrently in separate directories");
    std::vector<std::string> names = {"solve", "certify-energy", "check-linear", "smoothing-bench", "verify-embedding"};
    for (const auto& n : names) app.add_subcommand(n)->fallthrough();

    std::vector<const char*> argv{"dma"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }
    std::string command = app.get_subcommands().front()->get_name();

    RunConfig config;
    try {
        config = load_config(config_path);
    } catch (const Error& e) {
        json err = {{"command", command}, {"versions", module_versions()}, {"error", {{"code", e.code()}, {"message", e.what()}}}};
        std::cout << err.dump() << "\n";
        return exit_code_for(e.code());
    }
    if (const char* env = std::getenv(kOutEnv)) config.out = env;
    if (out_dir) config.out = *out_dir;
    if (seed) config.seed = *seed;
    config.paper_mode = config.paper_mode || paper;
    Session s(command, config);
    try {
        if (command == "solve") return cmd_solve(s, sweep);
        if (command == "certify-energy") return cmd_certify_energy(s);
        if (command == "check-linear") return cmd_check_linear(s);
        if (command == "smoothing-bench") return cmd_smoothing_bench(s);
        return cmd_verify_embedding(s);
    } catch (const Error& e) {
        json err = s.error_json(e.code(), e.what());
        std::cout << err.dump() << "\n";
        try {
            write_file(s.out() / "error.json", dump(err));
        } catch (const Error&) {
        }
        return exit_code_for(e.code());
    }
}

}  // namespace dma::cli
