#pragma once

#include <complex>
#include <vector>

#include "dma/grid.hpp"

namespace dma {

// Angular wavenumber of DFT bin k on n samples spaced h apart.
double wavenumber(int k, int n, double h);

// Spectral x-derivative of the given order, row by row; requires periodic x.
// The Nyquist bin is dropped for odd orders.
GridField spectral_dx(const GridField& f, int order);
// Same for a single periodic line of samples.
std::vector<double> spectral_derivative(const std::vector<double>& line, double h, int order);

// Two-dimensional DFT of the samples treated as periodic in both directions
// (the y-edge node is included as an ordinary sample). Layout ny x (nx/2 + 1).
struct Spectrum2D {
    int nx = 0, ny = 0;
    double hx = 0, hy = 0;
    std::vector<std::complex<double>> c;
    double kx(int i) const { return wavenumber(i, nx, hx); }
    double ky(int j) const { return wavenumber(j, ny, hy); }
    std::complex<double>& at(int i, int j) { return c[std::size_t(j) * (nx / 2 + 1) + i]; }
};

Spectrum2D forward2d(const GridField& f);
// Inverse transform written into a field on the given grid (normalized).
GridField inverse2d(const Spectrum2D& s, const Grid& g);

}  // namespace dma
