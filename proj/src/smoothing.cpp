#include "dma/smoothing.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "dma/cutoff.hpp"
#include "dma/error.hpp"
#include "dma/fourier.hpp"

namespace dma {

namespace {

const double kPi = std::acos(-1.0);

// Weight of r2c column i in a full-spectrum sum.
double half_weight(int i, int nx) { return (i == 0 || (nx % 2 == 0 && i == nx / 2)) ? 1.0 : 2.0; }

double spectral_norm(const Spectrum2D& s, int m, const std::vector<double>& mult) {
    double acc = 0;
    for (int j = 0; j < s.ny; ++j) {
        double ky = s.ky(j);
        for (int i = 0; i <= s.nx / 2; ++i) {
            double kx = s.kx(i), w = std::pow(1 + kx * kx + ky * ky, m);
            std::size_t k = std::size_t(j) * (s.nx / 2 + 1) + i;
            double a = std::abs(s.c[k]) * (mult.empty() ? 1.0 : mult[k]);
            acc += half_weight(i, s.nx) * w * a * a;
        }
    }
    return std::sqrt(acc * s.hx * s.hy / (double(s.nx) * s.ny));
}

double signed_x(const Grid& g, int i) { return g.x(i); }

}  // namespace

Mollifier Mollifier::for_box(double x0, double y0) {
    require(x0 > 0 && y0 > 0, "scale", "box half-widths must be positive");
    return Mollifier{kPi / x0, kPi / y0};
}

double Mollifier::profile(double t) const {
    double a = std::abs(t);
    if (a <= 1) return 1.0;
    if (a >= 2) return 0.0;
    return 1 - smoothstep(a - 1);
}

double Mollifier::symbol(double kx, double ky, double mu) const {
    return profile(kx / (mu * base_x)) * profile(ky / (mu * base_y));
}

std::vector<double> Mollifier::moments() const {
    // Kernel of the one-dimensional profile periodized on a long line, summed
    // as a cosine series in extended precision. The lattice sum equals the
    // integral because the profile is supported inside the Nyquist band.
    const int n = 1 << 12;
    const long double h = 0.5L, len = n * h, two_pi = 2 * 3.141592653589793238462643383279L;
    std::vector<long double> rho;
    for (int m = 0;; ++m) {
        double k = double(two_pi * m / len);
        if (k >= 2) break;
        rho.push_back(profile(k));
    }
    auto kernel = [&](long double x) {
        long double acc = rho[0];
        for (std::size_t m = 1; m < rho.size(); ++m) acc += 2 * rho[m] * std::cos(two_pi * m * x / len);
        return acc / len;
    };
    std::vector<long double> mom(4, 0.0L);
    for (int i = -n / 2 + 1; i < n / 2; ++i) {
        long double x = i * h, v = kernel(x) * h, p = v;
        for (int a = 0; a < 4; ++a, p *= x) mom[a] += p;
    }
    return {double(mom[0]), double(mom[1]), double(mom[2]), double(mom[3])};
}

GridField smooth(const GridField& g, double mu, const Mollifier& m) {
    require(mu >= 1, "scale", "smoothing scale mu must be at least 1");
    Spectrum2D s = forward2d(g);
    for (int j = 0; j < s.ny; ++j)
        for (int i = 0; i <= s.nx / 2; ++i) s.at(i, j) *= m.symbol(s.kx(i), s.ky(j), mu);
    return inverse2d(s, g.grid);
}

double fourier_sobolev_norm(const GridField& g, int m) { return spectral_norm(forward2d(g), m, {}); }

ExtensionOperator::ExtensionOperator(const Grid& target, double x0, double y0, int order)
    : target_(target), block_(inner_block(target, x0, y0)), x0_(x0), y0_(y0), order_(order) {
    require(order >= 0 && order <= 10, "order", "extension order must lie in [0, 10]");
    require(target.x0 <= -2 * x0 + 1e-12 && target.x1 >= 2 * x0 - 1e-12 && target.y0 <= -2 * y0 + 1e-12 &&
                target.y1 >= 2 * y0 - 1e-12,
            "bad-grid", "computational grid must contain 2X");
    int n = order + 1;
    Eigen::MatrixXd V(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);
    // Chebyshev reflection ratios in (0, 1) keep sum |c_j| near 4e3 for order 5.
    for (int j = 0; j < n; ++j) lambda_.push_back(0.5 * (1 + std::cos((2 * j + 1) * kPi / (2 * n))));
    for (int q = 0; q < n; ++q)
        for (int j = 0; j < n; ++j) V(q, j) = std::pow(-lambda_[j], q);
    Eigen::VectorXd c = V.fullPivLu().solve(rhs);
    coef_.assign(c.data(), c.data() + n);
}

Grid ExtensionOperator::x_grid() const {
    return Grid::box(block_.nx, block_.ny, target_.x(block_.i0), target_.x(block_.i0 + block_.nx - 1),
                     target_.y(block_.j0), target_.y(block_.j0 + block_.ny - 1));
}

double ExtensionOperator::cutoff(double t, double half) const {
    double a = std::abs(t);
    if (a <= half) return 1.0;
    if (a >= 2 * half) return 0.0;
    return 1 - smoothstep((a - half) / half);
}

GridField ExtensionOperator::operator()(const GridField& g) const {
    require(g.grid.nx == block_.nx && g.grid.ny == block_.ny, "grid-mismatch", "field is not sampled on X");
    const Grid& t = target_;
    const double hx = t.hx(), hy = t.hy();
    const double xa = t.x(block_.i0), xb = t.x(block_.i0 + block_.nx - 1);
    const double ya = t.y(block_.j0), yb = t.y(block_.j0 + block_.ny - 1);
    auto reflect = [&](const double* vals, int n, double start, double h, double lo, double hi, double pos,
                       double half) {
        double c = cutoff(pos, half);
        if (c == 0.0) return 0.0;
        double edge = pos < lo ? lo : hi, d = std::abs(pos - edge), sgn = pos < lo ? 1.0 : -1.0, acc = 0;
        for (std::size_t j = 0; j < coef_.size(); ++j)
            acc += coef_[j] * interp1(vals, n, start, h, edge + sgn * lambda_[j] * d, 6, false);
        return c * acc;
    };
    // Rows of X extended in x.
    GridField rows(Grid::box(t.nx, block_.ny, t.x0, t.x0 + (t.nx - 1) * hx, ya, yb));
    for (int j = 0; j < block_.ny; ++j) {
        const double* src = &g.v[std::size_t(j) * block_.nx];
        for (int i = 0; i < t.nx; ++i) {
            int k = i - block_.i0;
            rows(i, j) = (k >= 0 && k < block_.nx) ? src[k]
                                                   : reflect(src, block_.nx, xa, hx, xa, xb, signed_x(t, i), x0_);
        }
    }
    GridField out(t);
    std::vector<double> col(block_.ny);
    for (int i = 0; i < t.nx; ++i) {
        for (int j = 0; j < block_.ny; ++j) col[j] = rows(i, j);
        for (int j = 0; j < t.ny; ++j) {
            int k = j - block_.j0;
            out(i, j) = (k >= 0 && k < block_.ny) ? col[k]
                                                  : reflect(col.data(), block_.ny, ya, hy, ya, yb, t.y(j), y0_);
        }
    }
    return out;
}

GridField ExtensionOperator::restrict(const GridField& full) const {
    GridField r = restrict_block(full, block_.i0, block_.j0, block_.nx, block_.ny);
    r.grid = x_grid();
    return r;
}

GridField smooth_on_box(const GridField& g, double mu, const Mollifier& m, const ExtensionOperator& T) {
    return T.restrict(smooth(T(g), mu, m));
}

bool SmoothingReport::pass() const {
    for (const auto& f : fits)
        if (!f.pass) return false;
    return true;
}

nlohmann::json SmoothingReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& f : fits)
        rows.push_back({{"kind", f.kind},
                        {"m", f.m},
                        {"l", f.l},
                        {"constant", f.constant},
                        {"exponent", f.exponent},
                        {"predicted", f.predicted},
                        {"worst_ratio", f.worst},
                        {"pass", f.pass}});
    return {{"mu", mus}, {"tolerance", tolerance}, {"pass", pass()}, {"fits", rows}};
}

std::string SmoothingReport::csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "kind,m,l,mu,worst_ratio,constant,exponent,predicted\n";
    for (const auto& f : fits)
        for (std::size_t k = 0; k < mus.size(); ++k)
            os << f.kind << ',' << f.m << ',' << f.l << ',' << mus[k] << ',' << f.worst[k] << ',' << f.constant << ','
               << f.exponent << ',' << f.predicted << '\n';
    return os.str();
}

std::vector<GridField> default_smoothing_suite(const Grid& g, const Mollifier& m, double max_mu) {
    std::vector<GridField> suite;
    for (double w : {0.05, 0.15})
        suite.push_back(GridField::sample(g, [w](double x, double y) { return std::exp(-(x * x + y * y) / (w * w)); }));
    suite.push_back(GridField::sample(g, [](double x, double y) {
        double r2 = (x * x + y * y) / 0.25;
        return r2 < 1 ? (1 - r2) * (1 - r2) : 0.0;
    }));
    const double nyquist = kPi / g.hx();
    for (int j = 0;; ++j) {
        double w = m.base_x * std::pow(2.0, j / 4.0);
        if (w > std::min(2.2 * max_mu * m.base_x, 0.9 * nyquist)) break;
        suite.push_back(GridField::sample(
            g, [w](double x, double y) { return std::exp(-(x * x + y * y) / 0.09) * std::cos(w * x); }));
    }
    return suite;
}

SmoothingReport verify_smoothing_bounds(const Mollifier& m, const std::vector<GridField>& suite,
                                        const std::vector<double>& mus, const std::vector<int>& orders,
                                        double tolerance, bool throw_on_defect) {
    require(!suite.empty() && mus.size() >= 2, "config", "need a nonempty suite and at least two scales");
    SmoothingReport rep;
    rep.mus = mus;
    rep.tolerance = tolerance;
    const std::size_t nm = mus.size();
    // worst[kind][m][l][mu]
    std::map<std::tuple<int, int, int>, std::vector<double>> worst;
    for (const GridField& g : suite) {
        Spectrum2D s = forward2d(g);
        std::vector<double> gl;
        for (int l : orders) gl.push_back(spectral_norm(s, l, {}));
        for (std::size_t q = 0; q < nm; ++q) {
            std::vector<double> keep(s.c.size()), drop(s.c.size());
            for (int j = 0; j < s.ny; ++j)
                for (int i = 0; i <= s.nx / 2; ++i) {
                    std::size_t k = std::size_t(j) * (s.nx / 2 + 1) + i;
                    keep[k] = m.symbol(s.kx(i), s.ky(j), mus[q]);
                    drop[k] = 1 - keep[k];
                }
            for (std::size_t a = 0; a < orders.size(); ++a) {
                int mo = orders[a];
                double sm = spectral_norm(s, mo, keep), rm = spectral_norm(s, mo, drop);
                for (std::size_t b = 0; b < orders.size(); ++b) {
                    int lo = orders[b];
                    if (gl[b] <= 0) continue;
                    auto bump = [&](int kind, double v) {
                        auto& w = worst[{kind, mo, lo}];
                        if (w.empty()) w.assign(nm, 0.0);
                        w[q] = std::max(w[q], v / gl[b]);
                    };
                    if (mo <= lo) bump(1, sm);
                    if (lo <= mo) bump(2, sm);
                    if (mo <= lo) bump(3, rm);
                }
            }
        }
    }
    const char* names[] = {"", "i", "ii", "iii"};
    for (const auto& [key, w] : worst) {
        auto [kind, mo, lo] = key;
        BoundFit f;
        f.kind = names[kind];
        f.m = mo;
        f.l = lo;
        f.predicted = kind == 1 ? 0.0 : double(mo - lo);
        f.worst = w;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t q = 0; q < nm; ++q) {
            double x = std::log(mus[q]), y = std::log(std::max(w[q], 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        f.exponent = (nm * sxy - sx * sy) / (nm * sxx - sx * sx);
        f.constant = std::exp((sy - f.exponent * sx) / nm);
        f.pass = std::abs(f.exponent - f.predicted) <= tolerance;
        rep.fits.push_back(f);
    }
    if (throw_on_defect)
        for (const auto& f : rep.fits)
            require(f.pass, "mollifier-defect",
                    "bound (" + f.kind + ") m = " + std::to_string(f.m) + ", l = " + std::to_string(f.l) +
                        ": exponent " + std::to_string(f.exponent) + " vs " + std::to_string(f.predicted));
    return rep;
}

}  // namespace dma
