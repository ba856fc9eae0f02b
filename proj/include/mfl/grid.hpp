#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace mfl {

/// A point or vector in d <= 2 dimensions. Unused trailing components are zero.
using Point = std::array<double, 2>;

/// Uniform periodic grid on the torus [0, L)^d with m nodes per axis.
struct GridSpec {
    int dim = 1;
    double length = 1.0;
    int points = 8;

    /// Validating constructor: d in {1,2}, L > 0, m >= 8 and a power of two.
    static GridSpec make(int dim, double length, int points);

    double spacing() const { return length / points; }
    std::size_t size() const
    {
        return dim == 1 ? static_cast<std::size_t>(points)
                        : static_cast<std::size_t>(points) * points;
    }
    double cell_volume() const;
    double volume() const;
    /// Signed angular wavenumber 2*pi*j/L of FFT index `index`.
    double wavenumber(int index) const;
    /// Signed integer frequency of FFT index `index`, in (-m/2, m/2].
    int frequency(int index) const;
    /// Node coordinate along one axis.
    double node(int index) const { return index * spacing(); }
    /// Coordinates of the node with flat index `flat`.
    Point node_point(std::size_t flat) const;
    /// Map a coordinate into [0, L).
    double wrap(double x) const;
    Point wrap(Point const& x) const;
    /// Minimum-image displacement component in [-L/2, L/2).
    double min_image(double dx) const;

    bool operator==(GridSpec const&) const = default;
};

/// One scalar field sampled on a periodic grid, row-major (axis 0 slowest).
struct GridField {
    GridSpec spec;
    std::vector<double> values;

    GridField() = default;
    explicit GridField(GridSpec s, double fill = 0.0)
        : spec(s), values(s.size(), fill)
    {
    }
    GridField(GridSpec s, std::vector<double> v);

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double at(int i0, int i1 = 0) const;

    double mass() const;
    double min() const;
    double max_abs() const;
    /// sqrt(h^d * sum f^2)
    double l2_norm() const;
    bool is_finite() const;

    bool operator==(GridField const&) const = default;
};

/// Unnormalized DFT coefficients of a real field (full complex layout).
struct SpectralField {
    GridSpec spec;
    std::vector<std::complex<double>> modes;
};

SpectralField forward(GridField const& f);
GridField inverse(SpectralField const& F);

/// Periodic convolution scaled by the cell volume: h^d * sum_y f(x - y) g(y).
GridField convolve(GridField const& f, GridField const& g);

std::vector<GridField> gradient(GridField const& f);
GridField laplacian(GridField const& f);
GridField divergence(std::span<GridField const> components);

/// Discrete H^s norm, sqrt(L^d * sum_k (1 + |k|^2)^s |c_k|^2) with c_k the
/// Fourier-series coefficients.
double sobolev_norm(GridField const& f, double s);
double sobolev_norm(SpectralField const& F, double s);

/// Multilinear periodic interpolation.
double interpolate(GridField const& f, Point const& x);
Point interpolate_grad(std::span<GridField const> fields, Point const& x);

// Spectral-space helpers shared by the PDE stepper.
namespace spectral {

/// Multiply by i*k along `axis`; the Nyquist mode of that axis is zeroed.
void differentiate(SpectralField& F, int axis);
/// Zero every mode whose |frequency| exceeds m/3 on any axis.
void dealias(SpectralField& F);
/// |k|^2 of the mode with flat index `flat`.
double wavenumber_squared(GridSpec const& spec, std::size_t flat);

}  // namespace spectral

}  // namespace mfl
