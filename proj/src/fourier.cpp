#include "dma/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "dma/error.hpp"

namespace dma {

namespace {

const double kPi = std::acos(-1.0);

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct Plan {
    fftw_plan p = nullptr;
    ~Plan() {
        if (p) {
            std::lock_guard<std::mutex> lock(planner_mutex());
            fftw_destroy_plan(p);
        }
    }
};

std::complex<double> ipow(int order) {
    static const std::complex<double> table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return table[order % 4];
}

void differentiate_line(const double* in, double* out, int n, double h, int order, std::vector<double>& buf,
                        std::vector<std::complex<double>>& spec) {
    buf.assign(in, in + n);
    spec.resize(n / 2 + 1);
    Plan fwd, bwd;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd.p = fftw_plan_dft_r2c_1d(n, buf.data(), reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
        bwd.p = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spec.data()), buf.data(), FFTW_ESTIMATE);
    }
    fftw_execute(fwd.p);
    std::complex<double> unit = ipow(order);
    for (int k = 0; k <= n / 2; ++k) {
        if (order % 2 == 1 && n % 2 == 0 && k == n / 2) {
            spec[k] = 0;
            continue;
        }
        spec[k] *= unit * std::pow(wavenumber(k, n, h), order) / double(n);
    }
    fftw_execute(bwd.p);
    std::copy(buf.begin(), buf.end(), out);
}

}  // namespace

double wavenumber(int k, int n, double h) {
    int m = k <= n / 2 ? k : k - n;
    return 2 * kPi * m / (n * h);
}

std::vector<double> spectral_derivative(const std::vector<double>& line, double h, int order) {
    std::vector<double> out(line.size()), buf;
    std::vector<std::complex<double>> spec;
    if (order == 0) return line;
    differentiate_line(line.data(), out.data(), int(line.size()), h, order, buf, spec);
    return out;
}

GridField spectral_dx(const GridField& f, int order) {
    require(f.grid.periodic_x, "not-periodic", "spectral x-derivative needs a periodic x direction");
    if (order == 0) return f;
    const Grid& g = f.grid;
    GridField r(g);
    std::vector<double> buf;
    std::vector<std::complex<double>> spec;
    for (int j = 0; j < g.ny; ++j)
        differentiate_line(&f.v[std::size_t(j) * g.nx], &r.v[std::size_t(j) * g.nx], g.nx, g.hx(), order, buf, spec);
    return r;
}

Spectrum2D forward2d(const GridField& f) {
    const Grid& g = f.grid;
    Spectrum2D s;
    s.nx = g.nx;
    s.ny = g.ny;
    s.hx = g.hx();
    s.hy = g.hy();
    s.c.resize(std::size_t(g.ny) * (g.nx / 2 + 1));
    std::vector<double> in(f.v);
    Plan p;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        p.p = fftw_plan_dft_r2c_2d(g.ny, g.nx, in.data(), reinterpret_cast<fftw_complex*>(s.c.data()), FFTW_ESTIMATE);
    }
    fftw_execute(p.p);
    return s;
}

GridField inverse2d(const Spectrum2D& s, const Grid& g) {
    require(s.nx == g.nx && s.ny == g.ny, "grid-mismatch", "spectrum and grid sizes differ");
    std::vector<std::complex<double>> c(s.c);
    GridField r(g);
    Plan p;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        p.p = fftw_plan_dft_c2r_2d(g.ny, g.nx, reinterpret_cast<fftw_complex*>(c.data()), r.v.data(), FFTW_ESTIMATE);
    }
    fftw_execute(p.p);
    r *= 1.0 / double(g.size());
    return r;
}

}  // namespace dma
