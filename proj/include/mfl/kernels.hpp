#pragma once

#include <array>
#include <functional>
#include <string_view>
#include <vector>

#include "mfl/grid.hpp"

namespace mfl {

enum class KernelFamily { bump3 };

KernelFamily parse_kernel_family(std::string_view name);
std::string_view to_string(KernelFamily family);

/// Radial interaction profile V(r), supported in the closed unit ball and C^2.
///
/// The `bump3` family is c * (1 - r^2)^3 for r <= 1. Moments and derivative
/// sup-norms are computed once at construction by quadrature and dense
/// sampling, so every family added later gets them for free.
class KernelProfile {
  public:
    KernelProfile(KernelFamily family, double coeff);

    KernelFamily family() const { return family_; }
    double coeff() const { return coeff_; }
    /// Polynomial degree in r of the profile inside the unit ball.
    int degree() const;

    double value(double r) const;
    /// dV/dr
    double d1(double r) const;
    /// d^2V/dr^2
    double d2(double r) const;

    /// a = integral of V(|x|) over R^d.
    double first_moment(int dim) const;
    /// A = integral of |V(|x|)| over R^d.
    double l1_norm(int dim) const;
    /// sup |grad V| over R^d.
    double grad_sup() const { return grad_sup_; }
    /// sup of the spectral norm of the Hessian of V(|x|) over R^d.
    double hessian_sup(int dim) const;

    bool operator==(KernelProfile const& other) const
    {
        return family_ == other.family_ && coeff_ == other.coeff_;
    }

  private:
    KernelFamily family_;
    double coeff_;
    std::array<double, 2> moment_{};  // indexed by dim - 1
    std::array<double, 2> l1_{};
    std::array<double, 2> hess_sup_{};
    double grad_sup_ = 0.0;
};

KernelProfile make_profile(KernelFamily family, double coeff);
KernelProfile make_profile(std::string_view family, double coeff);

/// Integral over the ball of radius `radius` in R^dim of f(|x|), by composite
/// Gauss-Legendre quadrature on the radial variable.
double radial_integral(std::function<double(double)> const& f, int dim,
                       double radius, int panels = 64);

struct KernelBounds {
    double grad_sup;
    double lipschitz;
    double l1_norm;
};

/// V^eta(x) = eta^{-d} V(|x| / eta).
class ScaledKernel {
  public:
    ScaledKernel(KernelProfile base, double eta, int dim);

    KernelProfile const& base() const { return base_; }
    double eta() const { return eta_; }
    int dim() const { return dim_; }

    double eval(Point const& x) const;
    Point grad_eval(Point const& x) const;

    /// Computed by quadrature over the scaled support, so it doubles as a
    /// check that the scaling preserves the integral.
    double first_moment() const;
    double l1_norm() const;
    KernelBounds bounds() const;

    /// Periodic samples centred at the origin node (minimum-image distance).
    GridField sample_on_grid(GridSpec const& grid) const;

  private:
    double norm(Point const& x) const;

    KernelProfile base_;
    double eta_;
    int dim_;
    double scale_;  // eta^{-d}
};

ScaledKernel scale(KernelProfile const& profile, double eta, int dim);

/// n x n scaled kernels sharing one eta and dimension. Row i, column j holds V_ij.
class KernelMatrix {
  public:
    KernelMatrix(int species, std::vector<KernelProfile> const& profiles,
                 double eta, int dim);

    int species() const { return species_; }
    double eta() const { return eta_; }
    int dim() const { return dim_; }
    ScaledKernel const& operator()(int i, int j) const
    {
        return entries_[static_cast<std::size_t>(i * species_ + j)];
    }
    /// True when every coefficient is zero.
    bool is_zero() const;

  private:
    int species_;
    double eta_;
    int dim_;
    std::vector<ScaledKernel> entries_;
};

}  // namespace mfl
