#include "mfl/kernels.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mfl {

namespace {

constexpr int kBoundSamples = 10000;

double sphere_area(int dim)
{
    return dim == 1 ? 2.0 : 2.0 * std::numbers::pi;
}

void check_dim(int dim)
{
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("kernel: dimension must be 1 or 2");
}

}  // namespace

KernelFamily parse_kernel_family(std::string_view name)
{
    if (name == "bump3")
        return KernelFamily::bump3;
    throw std::invalid_argument("unknown kernel family '" + std::string(name) + "'");
}

std::string_view to_string(KernelFamily family)
{
    switch (family) {
    case KernelFamily::bump3:
        return "bump3";
    }
    return "?";
}

double radial_integral(std::function<double(double)> const& f, int dim,
                       double radius, int panels)
{
    check_dim(dim);
    using Rule = boost::math::quadrature::gauss<double, 10>;
    double width = radius / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        double lo = p * width;
        double hi = lo + width;
        sum += Rule::integrate(
            [&](double r) { return f(r) * (dim == 1 ? 1.0 : r); }, lo, hi);
    }
    return sphere_area(dim) * sum;
}

KernelProfile::KernelProfile(KernelFamily family, double coeff)
    : family_(family), coeff_(coeff)
{
    if (!std::isfinite(coeff))
        throw std::invalid_argument("kernel profile: coefficient must be finite");
    for (int dim = 1; dim <= 2; ++dim) {
        moment_[dim - 1] = radial_integral([this](double r) { return value(r); }, dim, 1.0);
        l1_[dim - 1] = radial_integral([this](double r) { return std::abs(value(r)); },
                                       dim, 1.0);
    }
    double hess1 = 0.0;
    double hess2 = 0.0;
    for (int s = 0; s <= kBoundSamples; ++s) {
        double r = static_cast<double>(s) / kBoundSamples;
        double g = std::abs(d1(r));
        double h = std::abs(d2(r));
        grad_sup_ = std::max(grad_sup_, g);
        hess1 = std::max(hess1, h);
        // tangential curvature V'(r)/r tends to V''(0) at the origin
        double tangential = r > 0.0 ? g / r : h;
        hess2 = std::max({hess2, h, tangential});
    }
    hess_sup_ = {hess1, hess2};
}

int KernelProfile::degree() const
{
    switch (family_) {
    case KernelFamily::bump3:
        return 6;
    }
    return 0;
}

double KernelProfile::value(double r) const
{
    r = std::abs(r);
    if (r >= 1.0)
        return 0.0;
    double q = 1.0 - r * r;
    return coeff_ * q * q * q;
}

double KernelProfile::d1(double r) const
{
    if (std::abs(r) >= 1.0)
        return 0.0;
    double q = 1.0 - r * r;
    return -6.0 * coeff_ * r * q * q;
}

double KernelProfile::d2(double r) const
{
    if (std::abs(r) >= 1.0)
        return 0.0;
    double q = 1.0 - r * r;
    return -6.0 * coeff_ * q * (1.0 - 5.0 * r * r);
}

double KernelProfile::first_moment(int dim) const
{
    check_dim(dim);
    return moment_[dim - 1];
}

double KernelProfile::l1_norm(int dim) const
{
    check_dim(dim);
    return l1_[dim - 1];
}

double KernelProfile::hessian_sup(int dim) const
{
    check_dim(dim);
    return hess_sup_[dim - 1];
}

KernelProfile make_profile(KernelFamily family, double coeff)
{
    return KernelProfile(family, coeff);
}

KernelProfile make_profile(std::string_view family, double coeff)
{
    return KernelProfile(parse_kernel_family(family), coeff);
}

ScaledKernel::ScaledKernel(KernelProfile base, double eta, int dim)
    : base_(std::move(base)), eta_(eta), dim_(dim)
{
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("scaled kernel: eta must be positive");
    check_dim(dim);
    scale_ = std::pow(eta, -dim);
}

double ScaledKernel::norm(Point const& x) const
{
    return dim_ == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
}

double ScaledKernel::eval(Point const& x) const
{
    double r = norm(x);
    if (r >= eta_)
        return 0.0;
    return scale_ * base_.value(r / eta_);
}

Point ScaledKernel::grad_eval(Point const& x) const
{
    double r = norm(x);
    if (r >= eta_ || r == 0.0)
        return {0.0, 0.0};
    double radial = scale_ / eta_ * base_.d1(r / eta_) / r;
    return {radial * x[0], dim_ == 2 ? radial * x[1] : 0.0};
}

double ScaledKernel::first_moment() const
{
    return radial_integral(
        [this](double r) { return scale_ * base_.value(r / eta_); }, dim_, eta_);
}

double ScaledKernel::l1_norm() const
{
    return radial_integral(
        [this](double r) { return std::abs(scale_ * base_.value(r / eta_)); },
        dim_, eta_);
}

KernelBounds ScaledKernel::bounds() const
{
    return KernelBounds{
        std::pow(eta_, -dim_ - 1) * base_.grad_sup(),
        std::pow(eta_, -dim_ - 2) * base_.hessian_sup(dim_),
        l1_norm(),
    };
}

GridField ScaledKernel::sample_on_grid(GridSpec const& grid) const
{
    if (grid.dim != dim_)
        throw std::invalid_argument("sample_on_grid: dimension mismatch");
    if (grid.spacing() >= eta_)
        throw std::invalid_argument(
            "sample_on_grid: kernel under-resolved (grid spacing >= eta)");
    if (eta_ >= grid.length / 2.0)
        throw std::invalid_argument(
            "sample_on_grid: kernel wider than half the domain");
    GridField out(grid);
    for (std::size_t flat = 0; flat < out.values.size(); ++flat) {
        Point p = grid.node_point(flat);
        Point d{grid.min_image(p[0]), dim_ == 2 ? grid.min_image(p[1]) : 0.0};
        out.values[flat] = eval(d);
    }
    return out;
}

ScaledKernel scale(KernelProfile const& profile, double eta, int dim)
{
    return ScaledKernel(profile, eta, dim);
}

KernelMatrix::KernelMatrix(int species, std::vector<KernelProfile> const& profiles,
                           double eta, int dim)
    : species_(species), eta_(eta), dim_(dim)
{
    if (species < 1)
        throw std::invalid_argument("kernel matrix: species count must be >= 1");
    if (profiles.size() != static_cast<std::size_t>(species * species))
        throw std::invalid_argument("kernel matrix: need n*n profiles");
    entries_.reserve(profiles.size());
    for (auto const& p : profiles)
        entries_.emplace_back(p, eta, dim);
}

bool KernelMatrix::is_zero() const
{
    return std::all_of(entries_.begin(), entries_.end(),
                       [](ScaledKernel const& k) { return k.base().coeff() == 0.0; });
}

}  // namespace mfl
