#include "dma/iteration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dma/error.hpp"

namespace dma {

namespace {

nlohmann::json grid_json(const Grid& g) {
    return {{"nx", g.nx}, {"ny", g.ny}, {"x0", g.x0}, {"x1", g.x1}, {"y0", g.y0}, {"y1", g.y1},
            {"periodic_x", g.periodic_x}};
}

Grid grid_from(const nlohmann::json& j) {
    Grid g;
    g.nx = j.at("nx");
    g.ny = j.at("ny");
    g.x0 = j.at("x0");
    g.x1 = j.at("x1");
    g.y0 = j.at("y0");
    g.y1 = j.at("y1");
    g.periodic_x = j.at("periodic_x");
    return g;
}

nlohmann::json field_json(const GridField& f) { return {{"grid", grid_json(f.grid)}, {"v", f.v}}; }

GridField field_from(const nlohmann::json& j) {
    GridField f(grid_from(j.at("grid")));
    f.v = j.at("v").get<std::vector<double>>();
    require(f.v.size() == f.grid.size(), "checkpoint", "field size does not match its grid");
    return f;
}

double envelope_power(const Schedule& s, int k, int m) { return std::pow(s.mu_k(k), m - s.b); }

// Envelope of statements II and V: flat below b, growing above it.
double split_envelope(const Schedule& s, int k, int m) {
    return (m - s.b <= -0.5) ? s.delta : s.delta * envelope_power(s, k, m);
}

}  // namespace

Schedule Schedule::practical(double eps, int n, double mu, double b) {
    Schedule s;
    s.eps = eps;
    s.n = n;
    s.delta = std::pow(eps, n - 1);
    s.mu = mu;
    s.b = b;
    s.m_star = int(std::lround(b)) + 31;
    return s;
}

Schedule Schedule::paper(double eps, int n, int m_star) {
    Schedule s;
    s.eps = eps;
    s.n = n;
    s.delta = std::pow(eps, n - 1);
    s.m_star = m_star;
    s.b = m_star - 31;
    s.mu = std::pow(eps, (1.0 - n) / (s.b + 1));
    s.paper_mode = true;
    return s;
}

double Schedule::mu_k(int k) const {
    double m = std::pow(mu, k);
    return mu_max > 0 ? std::min(m, mu_max) : m;
}

void Schedule::validate() const {
    require(mu > 1, "schedule", "mu must exceed 1");
    require(delta > 0 && delta < 1, "schedule", "delta = eps^(n - 1) must lie in (0, 1)");
    require(max_iterations >= 1, "schedule", "max_iterations must be positive");
    if (paper_mode) {
        require(b >= 27, "schedule", "paper mode needs b >= 27 (m* >= 58)");
        require(std::abs(b - (m_star - 31)) < 1e-12, "schedule", "paper mode needs b = m* - 31");
    }
}

nlohmann::json Schedule::to_json() const {
    return {{"mode", paper_mode ? "paper" : "practical"},
            {"eps", eps},
            {"n", n},
            {"delta", delta},
            {"b", b},
            {"mu", mu},
            {"m_star", m_star},
            {"max_iterations", max_iterations},
            {"stop_tolerance", stop_tolerance},
            {"mu_max", mu_max}};
}

nlohmann::json IterationConfig::to_json() const {
    return {{"nx", nx},
            {"ny", ny},
            {"basis_size", basis_size},
            {"extension_order", extension_order},
            {"monitor_orders", monitor_orders},
            {"low_order", low_order},
            {"factor_floor", factor_floor},
            {"telescoping_tolerance", telescoping_tolerance},
            {"noise_floor", noise_floor},
            {"divergence_steps", divergence_steps},
            {"auto_mu_cap", auto_mu_cap},
            {"floor_solver_residual", floor_solver_residual},
            {"accept_ratio", accept_ratio}};
}

nlohmann::json StepRecord::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : statements)
        rows.push_back({{"statement", r.statement},
                        {"k", r.k},
                        {"m", r.m},
                        {"norm", r.norm},
                        {"envelope", r.envelope},
                        {"ratio", r.ratio}});
    return {{"k", k},
            {"mu_k", mu_k},
            {"residual", residual},
            {"residual_ratio", residual_ratio},
            {"telescoping", telescoping},
            {"u_norm", u_norm},
            {"e_operator", e_operator},
            {"e_correction", e_correction},
            {"e_quadratic", e_quadratic},
            {"ledger_norm", ledger_norm},
            {"rhs_norm", rhs_norm},
            {"certificate_i4_min", certificate_i4_min},
            {"certificate_discriminant_min", certificate_discriminant_min},
            {"solver", solver.to_json()},
            {"statements", rows}};
}

namespace {

StepRecord record_from(const nlohmann::json& j) {
    StepRecord r;
    r.k = j.at("k");
    r.mu_k = j.at("mu_k");
    r.residual = j.at("residual");
    r.residual_ratio = j.at("residual_ratio");
    r.telescoping = j.at("telescoping");
    r.u_norm = j.at("u_norm");
    r.e_operator = j.at("e_operator");
    r.e_correction = j.at("e_correction");
    r.e_quadratic = j.at("e_quadratic");
    r.ledger_norm = j.at("ledger_norm");
    r.rhs_norm = j.at("rhs_norm");
    r.certificate_i4_min = j.at("certificate_i4_min");
    r.certificate_discriminant_min = j.at("certificate_discriminant_min");
    const auto& s = j.at("solver");
    r.solver.N = s.at("N");
    r.solver.nx = s.at("nx");
    r.solver.ny = s.at("ny");
    r.solver.components = s.at("components");
    r.solver.residual = s.at("residual");
    r.solver.rcond = s.at("rcond");
    r.solver.min_pivot = s.at("min_pivot");
    r.solver.accuracy_warning = s.at("accuracy_warning");
    for (const auto& row : j.at("statements"))
        r.statements.push_back({row.at("statement"), row.at("k"), row.at("m"), row.at("norm"), row.at("envelope"),
                                row.at("ratio")});
    return r;
}

}  // namespace

nlohmann::json IterationState::checkpoint() const {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& r : history) hist.push_back(r.to_json());
    return {{"format", "dma-iteration-state"},
            {"version", 1},
            {"k", k},
            {"w", field_json(w)},
            {"v", field_json(v)},
            {"u_prev", field_json(u_prev)},
            {"f", field_json(f)},
            {"E", field_json(E)},
            {"E_prev", field_json(E_prev)},
            {"Phi", field_json(Phi)},
            {"Phi0", field_json(Phi0)},
            {"e_prev", field_json(e_prev)},
            {"history", hist}};
}

IterationState IterationState::restore(const nlohmann::json& j) {
    require(j.value("format", "") == "dma-iteration-state" && j.value("version", 0) == 1, "checkpoint",
            "unrecognized checkpoint format or version");
    IterationState s;
    s.k = j.at("k");
    s.w = field_from(j.at("w"));
    s.v = field_from(j.at("v"));
    s.u_prev = field_from(j.at("u_prev"));
    s.f = field_from(j.at("f"));
    s.E = field_from(j.at("E"));
    s.E_prev = field_from(j.at("E_prev"));
    s.Phi = field_from(j.at("Phi"));
    s.Phi0 = field_from(j.at("Phi0"));
    s.e_prev = field_from(j.at("e_prev"));
    for (const auto& r : j.at("history")) s.history.push_back(record_from(r));
    return s;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& r : history) hist.push_back(r.to_json());
    return {{"schedule", schedule.to_json()},
            {"config", config.to_json()},
            {"initial_residual", initial_residual},
            {"final_residual", final_residual},
            {"final_ratio", final_ratio()},
            {"converged", converged},
            {"status", status},
            {"accepted", accepted()},
            {"iterations", int(history.size())},
            {"decreasing_run", decreasing_run},
            {"cauchy_ratio", cauchy_ratio},
            {"ledger_growth", ledger_growth},
            {"viii_spearman", viii_spearman},
            {"history", hist}};
}

std::string RunReport::csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "k,mu_k,residual,residual_ratio,telescoping,u_norm,e_operator,e_correction,e_quadratic,ledger_norm,"
          "solver_residual,certificate_i4_min\n";
    os << -1 << ',' << 1 << ',' << initial_residual << ',' << 1 << ",0,0,0,0,0,0,0,0\n";
    for (const auto& r : history)
        os << r.k << ',' << r.mu_k << ',' << r.residual << ',' << r.residual_ratio << ',' << r.telescoping << ','
           << r.u_norm << ',' << r.e_operator << ',' << r.e_correction << ',' << r.e_quadratic << ','
           << r.ledger_norm << ',' << r.solver.residual << ',' << r.certificate_i4_min << '\n';
    return os.str();
}

NashMoser::NashMoser(const ScaledProblem& sp, const Schedule& schedule, const IterationConfig& config)
    : sp_(sp),
      schedule_(schedule),
      config_(config),
      grid_(computational_grid(sp.x0, sp.y0, config.nx, config.ny)),
      kit_([&] {
          CutoffConfig c = config.cutoff;
          c.y0 = sp.y0;
          return CutoffKit(c);
      }()),
      mollifier_(Mollifier::for_box(sp.x0, sp.y0)),
      T_(grid_, sp.x0, sp.y0, config.extension_order),
      basis_(GalerkinBasis::trig(grid_, config.basis_size > 0 ? config.basis_size : config.nx / 2 - 2)) {
    schedule_.validate();
    if (config_.auto_mu_cap && !schedule_.paper_mode && schedule_.mu_max == 0) {
        int top = *std::max_element(basis_.wavenumber.begin(), basis_.wavenumber.end());
        double kmax = 2 * std::acos(-1.0) * top / (grid_.nx * grid_.hx());
        schedule_.mu_max = std::max(1.0, kmax / mollifier_.base_x);
    }
    require(std::abs(schedule_.eps - sp.eps) <= 1e-15 * sp.eps && schedule_.n == sp.n(), "schedule",
            "schedule eps and n must match the scaled problem");
}

IterationState NashMoser::initial(const std::optional<GridField>& w0) const {
    Grid xg = x_grid();
    IterationState s;
    s.w = w0.value_or(GridField(xg));
    require(s.w.grid == xg, "grid-mismatch", "initial w must be sampled on X");
    s.v = smoothed_extension(s.w, 0);
    s.u_prev = GridField(xg);
    s.f = GridField(grid_);
    s.E = GridField(xg);
    s.E_prev = GridField(xg);
    s.Phi0 = phi(sp_, s.w);
    s.Phi = s.Phi0;
    s.e_prev = GridField(xg);
    return s;
}

GridField NashMoser::smoothed_extension(const GridField& w, int k) const {
    return smooth(T_(w), schedule_.mu_k(k), mollifier_);
}

GridField NashMoser::smooth_x(const GridField& g, int k) const {
    return smooth_on_box(g, schedule_.mu_k(k), mollifier_, T_);
}

L8Build NashMoser::build_L8(const GridField& v, int k) const {
    require(v.grid == grid_, "grid-mismatch", "v must live on the computational grid");
    L8Build b{reduce(sp_, v, kit_, config_.canonical), {}, {}, {}, {}, {}, {}};
    const CanonicalForm& cf = b.canonical;
    const SecondTransform& st = cf.second;
    b.Pbar = cf.pe.M11;
    b.P = b.Pbar * st.P22;
    GridField inv2 = map(b.Pbar, [](double p) { return 1.0 / (p * p); });
    b.D = 0.5 * dx(cf.pe.Phi * inv2) + 0.5 * (dx(cf.pe.Phi) * inv2);
    GridField Dx = T_.restrict(b.D);
    GridField rough = (Dx - smooth_x(Dx, k)) / T_.restrict(st.P22);
    b.correction = T_(rough);

    b.L8 = cf.extended;
    const Grid& ab = b.L8.grid;
    double lift = std::pow(sp_.eps, sp_.n()) * std::pow(schedule_.mu_k(k), -4.0);
    for (int j = 0; j < ab.ny; ++j)
        for (int i = 0; i < ab.nx; ++i) b.L8.Abar(i, j) += lift * ab.y(j);
    // d_x = alpha_x d_alpha + beta_x d_beta.
    b.L8.Dbar += st.resample(b.correction * st.alpha_x);
    b.L8.Ebar += st.resample(b.correction * st.beta_x);
    try {
        b.certificate = energy_certificate(b.L8, config_.certificate);
    } catch (const Error& e) {
        if (e.code() != "certificate-failure") throw;
        throw Error("eps-too-large", std::string("L8 energy certificate failed at eps = ") +
                                         std::to_string(sp_.eps) + ": " + e.what());
    }
    return b;
}

GridField NashMoser::build_rhs(const IterationState& s, const GridField& P_x) const {
    require(P_x.min() >= config_.factor_floor, "factor-degeneracy",
            "factor P_k dropped to " + std::to_string(P_x.min()) + " on X");
    const int k = s.k;
    GridField num(P_x.grid);
    if (k == 0) {
        num = -1.0 * smooth_x(s.Phi0, 0);
    } else {
        num = smooth_x(s.E_prev, k - 1) - smooth_x(s.E, k) + (smooth_x(s.Phi0, k - 1) - smooth_x(s.Phi0, k));
    }
    return T_(num / (sp_.eps * P_x));
}

GridField NashMoser::to_x(const GridField& u_ab, const SecondTransform& frame) const {
    Grid xg = x_grid();
    const Block& blk = T_.block();
    GridField u(xg);
    for (int j = 0; j < xg.ny; ++j)
        for (int i = 0; i < xg.nx; ++i) {
            int gi = blk.i0 + i, gj = blk.j0 + j;
            u(i, j) = interp2(u_ab, frame.alpha(gi, gj), frame.beta(gi, gj));
        }
    return u;
}

GridField NashMoser::quadratic_error(const GridField& w, const GridField& u, double t) const {
    return phi(sp_, w + t * u) - phi(sp_, w) - t * linearize(sp_, w).apply(u);
}

IterationState NashMoser::step(const IterationState& s) const {
    const int k = s.k;
    const double r0 = s.Phi0.max_abs();
    GridField v = smoothed_extension(s.w, k);
    L8Build b = build_L8(v, k);
    GridField vX = T_.restrict(v), PX = T_.restrict(b.P);
    GridField f = build_rhs(s, PX);
    GridField fX = T_.restrict(f);

    GalerkinOptions opt;
    opt.residual_region = T_.block();
    GalerkinResult sol = galerkin_solve(b.L8.as_field(), b.canonical.second.resample(f), basis_, opt);
    GridField u = to_x(sol.u, b.canonical.second);

    IterationState n;
    n.k = k + 1;
    n.w = s.w + u;
    n.Phi = phi(sp_, n.w);
    n.Phi0 = s.Phi0;
    GridField Lw = linearize(sp_, s.w).apply(u), Lv = linearize(sp_, vX).apply(u);
    GridField e3 = n.Phi - s.Phi - Lw;
    GridField e1 = Lw - Lv;
    GridField e2 = Lv - sp_.eps * (PX * fX);
    GridField e = e1 + e2 + e3;
    n.E_prev = s.E;
    n.E = s.E + e;
    n.e_prev = e;
    n.u_prev = u;
    n.f = f;
    n.v = smoothed_extension(n.w, k + 1);

    GridField predicted = (s.Phi0 - smooth_x(s.Phi0, k)) + (s.E - smooth_x(s.E, k)) + e;
    double tele = r0 > 0 ? (n.Phi - predicted).max_abs() / r0 : (n.Phi - predicted).max_abs();
    require(tele <= config_.telescoping_tolerance, "ledger-inconsistency",
            "telescoping identity residual " + std::to_string(tele) + " at k = " + std::to_string(k));

    StepRecord rec;
    rec.k = k;
    rec.mu_k = schedule_.mu_k(k);
    rec.residual = n.Phi.max_abs();
    rec.residual_ratio = r0 > 0 ? rec.residual / r0 : 0.0;
    rec.telescoping = tele;
    rec.u_norm = l2_norm(u);
    rec.e_operator = e1.max_abs();
    rec.e_correction = e2.max_abs();
    rec.e_quadratic = e3.max_abs();
    rec.ledger_norm = l2_norm(n.E);
    rec.rhs_norm = l2_norm(fX);
    rec.certificate_i4_min = b.certificate.I4_min.value;
    rec.certificate_discriminant_min = b.certificate.discriminant_min.value;
    rec.solver = sol.report;
    n.history = s.history;
    rec.statements = monitor_statements(n);
    n.history.push_back(std::move(rec));
    return n;
}

std::vector<StatementRow> NashMoser::monitor_statements(const IterationState& s) const {
    const Schedule& sc = schedule_;
    const int k = s.k;
    const double d = sc.delta;
    std::vector<StatementRow> rows;
    auto add = [&](const char* name, int m, double norm, double env) {
        rows.push_back({name, k, m, norm, env, env > 0 ? norm / env : 0.0});
    };
    GridField vX = T_.restrict(s.v);
    for (int m : config_.monitor_orders) {
        if (k >= 1) add("I", m, sobolev_norm(s.u_prev, m), d * envelope_power(sc, k - 1, m));
        add("II", m, sobolev_norm(s.w, m), split_envelope(sc, k, m));
        add("IV", m, sobolev_norm(s.w - vX, m), d * envelope_power(sc, k, m));
        add("V", m, fourier_sobolev_norm(s.v, m), split_envelope(sc, k, m));
        if (k >= 1) {
            add("VI", m, sobolev_norm(s.e_prev, m), sc.eps * d * d * envelope_power(sc, k - 1, m));
            add("VII", m, fourier_sobolev_norm(s.f, m),
                d * d * (1 + std::pow(sc.mu, sc.b - m)) * envelope_power(sc, k - 1, m));
        }
        add("VIII", m, sobolev_norm(s.Phi, m), d * envelope_power(sc, k, m));
    }
    add("III", config_.low_order, sobolev_norm(s.w, config_.low_order), d);
    add("III-v", config_.low_order, fourier_sobolev_norm(s.v, config_.low_order), d);
    add("ledger", 0, l2_norm(s.E), sc.mu_k(k));
    return rows;
}

RunReport NashMoser::run(const std::optional<IterationState>& resume) const {
    IterationState s = resume ? *resume : initial();
    RunReport rep;
    rep.schedule = schedule_;
    rep.config = config_;
    const double r0 = s.Phi0.max_abs();
    rep.initial_residual = r0;
    std::vector<GridField> ws = {s.w};
    std::vector<double> residuals = {r0};
    for (const auto& r : s.history) residuals.push_back(r.residual);
    auto reached = [&](double r) { return r <= schedule_.stop_tolerance * r0; };
    rep.status = "max-iterations";
    if (r0 == 0 || (!s.history.empty() && reached(s.history.back().residual))) rep.status = "converged";
    int growth = 0;
    while (rep.status == "max-iterations" && s.k < schedule_.max_iterations) {
        IterationState next = step(s);
        const StepRecord& last = next.history.back();
        double r = last.residual;
        if (r > residuals.back() && last.solver.residual > config_.floor_solver_residual) {
            rep.status = "resolution-floor";
            break;
        }
        s = std::move(next);
        ws.push_back(s.w);
        growth = (r > residuals.back() && r > config_.noise_floor * r0) ? growth + 1 : 0;
        residuals.push_back(r);
        require(growth < config_.divergence_steps, "schedule-failure",
                "residual grew for " + std::to_string(growth) + " consecutive steps at k = " +
                    std::to_string(s.k) + "; try a smaller eps or a different mu");
        if (reached(r)) rep.status = "converged";
    }
    rep.history = s.history;
    rep.w = s.w;
    rep.final_residual = residuals.back();
    rep.converged = rep.status == "converged";

    int run = 0;
    for (std::size_t i = 1; i < residuals.size(); ++i) {
        run = residuals[i] < residuals[i - 1] ? run + 1 : 0;
        rep.decreasing_run = std::max(rep.decreasing_run, run);
    }
    // Cauchy check over the steps taken in this call.
    const std::size_t K = ws.size() - 1;
    std::vector<double> tail(ws.size(), 0.0);
    for (std::size_t i = K; i-- > 0;) tail[i] = tail[i + 1] + l2_norm(ws[i + 1] - ws[i]);
    for (std::size_t i = 0; i < K; ++i)
        if (tail[i] > 0) rep.cauchy_ratio = std::max(rep.cauchy_ratio, l2_norm(ws[K] - ws[i]) / tail[i]);
    std::vector<double> ks, viii;
    for (const auto& r : rep.history) {
        rep.ledger_growth = std::max(rep.ledger_growth, r.ledger_norm / schedule_.mu_k(r.k + 1));
        for (const auto& row : r.statements)
            if (row.statement == "VIII" && row.m == 2) {
                ks.push_back(row.k);
                viii.push_back(row.ratio);
            }
    }
    if (ks.size() >= 2) rep.viii_spearman = spearman(ks, viii);
    return rep;
}

bool RunReport::accepted() const {
    return converged || (status == "resolution-floor" && final_ratio() <= config.accept_ratio);
}

nlohmann::json SweepReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : entries)
        rows.push_back({{"eps", e.eps},
                        {"converged", e.converged},
                        {"error", e.error},
                        {"final_ratio", e.final_ratio},
                        {"iterations", e.iterations}});
    return {{"entries", rows},
            {"largest_converging", largest_converging ? nlohmann::json(*largest_converging) : nlohmann::json()}};
}

SweepReport eps_sweep(const MAProblemSpec& problem, const std::vector<double>& eps_values, const Schedule& base,
                      const IterationConfig& config, double x0, double y0) {
    require(!eps_values.empty(), "config", "eps sweep list is empty");
    SweepReport rep;
    for (double eps : eps_values) {
        SweepEntry e;
        e.eps = eps;
        try {
            Schedule s = base.paper_mode ? Schedule::paper(eps, problem.n, base.m_star)
                                         : Schedule::practical(eps, problem.n, base.mu, base.b);
            s.max_iterations = base.max_iterations;
            s.stop_tolerance = base.stop_tolerance;
            NashMoser nm(scale(problem, eps, x0, y0), s, config);
            RunReport r = nm.run();
            e.converged = r.accepted();
            e.final_ratio = r.final_ratio();
            e.iterations = int(r.history.size());
        } catch (const Error& err) {
            e.error = err.code();
        }
        if (e.converged && (!rep.largest_converging || eps > *rep.largest_converging)) rep.largest_converging = eps;
        rep.entries.push_back(e);
    }
    return rep;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size() && a.size() >= 2, "config", "spearman needs two equal samples of size >= 2");
    auto ranks = [](const std::vector<double>& x) {
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return x[p] < x[q]; });
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
            for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * double(i + j);
            i = j + 1;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
    double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

}  // namespace dma
