#include "mfl/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mfl {

namespace {

bool is_power_of_two(int m) { return m > 0 && (m & (m - 1)) == 0; }

// FFTW planning is not thread-safe; execution through the new-array interface
// is. Plans are created once per (d, m, direction) and never destroyed.
class PlanCache {
  public:
    static PlanCache& instance()
    {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int dim, int m, int sign)
    {
        std::lock_guard lock(mutex_);
        auto key = std::make_tuple(dim, m, sign);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        std::size_t n = dim == 1 ? m : static_cast<std::size_t>(m) * m;
        auto* in = fftw_alloc_complex(n);
        auto* out = fftw_alloc_complex(n);
        unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan plan = dim == 1
                             ? fftw_plan_dft_1d(m, in, out, sign, flags)
                             : fftw_plan_dft_2d(m, m, in, out, sign, flags);
        fftw_free(in);
        fftw_free(out);
        if (!plan)
            throw std::runtime_error("fftw planning failed");
        plans_.emplace(key, plan);
        return plan;
    }

  private:
    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

void execute(GridSpec const& spec, int sign,
             std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out)
{
    fftw_plan plan = PlanCache::instance().get(spec.dim, spec.points, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

void require_same(GridSpec const& a, GridSpec const& b, char const* what)
{
    if (!(a == b))
        throw std::invalid_argument(std::string(what) + ": grid spec mismatch");
}

}  // namespace

GridSpec GridSpec::make(int dim, double length, int points)
{
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("grid: dimension must be 1 or 2");
    if (!(length > 0.0) || !std::isfinite(length))
        throw std::invalid_argument("grid: length must be positive");
    if (points < 8 || !is_power_of_two(points))
        throw std::invalid_argument(
            "grid: points per axis must be a power of two >= 8");
    return GridSpec{dim, length, points};
}

double GridSpec::cell_volume() const
{
    double h = spacing();
    return dim == 1 ? h : h * h;
}

double GridSpec::volume() const { return dim == 1 ? length : length * length; }

int GridSpec::frequency(int index) const
{
    return index <= points / 2 ? index : index - points;
}

double GridSpec::wavenumber(int index) const
{
    return 2.0 * std::numbers::pi * frequency(index) / length;
}

Point GridSpec::node_point(std::size_t flat) const
{
    if (dim == 1)
        return {node(static_cast<int>(flat)), 0.0};
    auto i0 = static_cast<int>(flat / points);
    auto i1 = static_cast<int>(flat % points);
    return {node(i0), node(i1)};
}

double GridSpec::wrap(double x) const
{
    double y = x - length * std::floor(x / length);
    // floor can round y up to exactly L for tiny negative x
    return y >= length ? 0.0 : y;
}

Point GridSpec::wrap(Point const& x) const
{
    return {wrap(x[0]), dim == 2 ? wrap(x[1]) : 0.0};
}

double GridSpec::min_image(double dx) const
{
    return dx - length * std::floor(dx / length + 0.5);
}

GridField::GridField(GridSpec s, std::vector<double> v)
    : spec(s), values(std::move(v))
{
    if (values.size() != spec.size())
        throw std::invalid_argument("grid field: value count does not match spec");
}

double GridField::at(int i0, int i1) const
{
    int m = spec.points;
    i0 = ((i0 % m) + m) % m;
    if (spec.dim == 1)
        return values[static_cast<std::size_t>(i0)];
    i1 = ((i1 % m) + m) % m;
    return values[static_cast<std::size_t>(i0) * m + i1];
}

double GridField::mass() const
{
    double s = 0.0;
    for (double v : values)
        s += v;
    return s * spec.cell_volume();
}

double GridField::min() const
{
    return *std::min_element(values.begin(), values.end());
}

double GridField::max_abs() const
{
    double r = 0.0;
    for (double v : values)
        r = std::max(r, std::abs(v));
    return r;
}

double GridField::l2_norm() const
{
    double s = 0.0;
    for (double v : values)
        s += v * v;
    return std::sqrt(s * spec.cell_volume());
}

bool GridField::is_finite() const
{
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
}

SpectralField forward(GridField const& f)
{
    std::vector<std::complex<double>> in(f.values.begin(), f.values.end());
    SpectralField F{f.spec, std::vector<std::complex<double>>(in.size())};
    execute(f.spec, FFTW_FORWARD, in, F.modes);
    return F;
}

GridField inverse(SpectralField const& F)
{
    std::vector<std::complex<double>> in = F.modes;
    std::vector<std::complex<double>> out(in.size());
    execute(F.spec, FFTW_BACKWARD, in, out);
    GridField f(F.spec);
    double inv = 1.0 / static_cast<double>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        f.values[i] = out[i].real() * inv;
    return f;
}

GridField convolve(GridField const& f, GridField const& g)
{
    require_same(f.spec, g.spec, "convolve");
    auto F = forward(f);
    auto G = forward(g);
    double hd = f.spec.cell_volume();
    for (std::size_t i = 0; i < F.modes.size(); ++i)
        F.modes[i] *= G.modes[i] * hd;
    return inverse(F);
}

namespace spectral {

double wavenumber_squared(GridSpec const& spec, std::size_t flat)
{
    if (spec.dim == 1) {
        double k = spec.wavenumber(static_cast<int>(flat));
        return k * k;
    }
    double k0 = spec.wavenumber(static_cast<int>(flat / spec.points));
    double k1 = spec.wavenumber(static_cast<int>(flat % spec.points));
    return k0 * k0 + k1 * k1;
}

void differentiate(SpectralField& F, int axis)
{
    GridSpec const& spec = F.spec;
    int m = spec.points;
    for (std::size_t flat = 0; flat < F.modes.size(); ++flat) {
        int index;
        if (spec.dim == 1)
            index = static_cast<int>(flat);
        else
            index = axis == 0 ? static_cast<int>(flat / m)
                              : static_cast<int>(flat % m);
        if (index == m / 2) {
            F.modes[flat] = 0.0;
            continue;
        }
        F.modes[flat] *= std::complex<double>(0.0, spec.wavenumber(index));
    }
}

void dealias(SpectralField& F)
{
    GridSpec const& spec = F.spec;
    int m = spec.points;
    int cutoff = m / 3;
    for (std::size_t flat = 0; flat < F.modes.size(); ++flat) {
        bool keep;
        if (spec.dim == 1) {
            keep = std::abs(spec.frequency(static_cast<int>(flat))) <= cutoff;
        } else {
            keep = std::abs(spec.frequency(static_cast<int>(flat / m))) <= cutoff
                   && std::abs(spec.frequency(static_cast<int>(flat % m)))
                          <= cutoff;
        }
        if (!keep)
            F.modes[flat] = 0.0;
    }
}

}  // namespace spectral

std::vector<GridField> gradient(GridField const& f)
{
    auto F = forward(f);
    std::vector<GridField> out;
    for (int axis = 0; axis < f.spec.dim; ++axis) {
        auto D = F;
        spectral::differentiate(D, axis);
        out.push_back(inverse(D));
    }
    return out;
}

GridField laplacian(GridField const& f)
{
    auto F = forward(f);
    for (std::size_t i = 0; i < F.modes.size(); ++i)
        F.modes[i] *= -spectral::wavenumber_squared(f.spec, i);
    return inverse(F);
}

GridField divergence(std::span<GridField const> components)
{
    if (components.empty())
        throw std::invalid_argument("divergence: no components");
    GridSpec spec = components[0].spec;
    if (static_cast<int>(components.size()) != spec.dim)
        throw std::invalid_argument("divergence: component count must equal d");
    SpectralField acc{spec, std::vector<std::complex<double>>(spec.size())};
    for (int axis = 0; axis < spec.dim; ++axis) {
        require_same(spec, components[axis].spec, "divergence");
        auto D = forward(components[axis]);
        spectral::differentiate(D, axis);
        for (std::size_t i = 0; i < D.modes.size(); ++i)
            acc.modes[i] += D.modes[i];
    }
    return inverse(acc);
}

double sobolev_norm(SpectralField const& F, double s)
{
    if (s < 0.0)
        throw std::invalid_argument("sobolev_norm: s must be >= 0");
    double count = static_cast<double>(F.modes.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < F.modes.size(); ++i) {
        double weight = std::pow(1.0 + spectral::wavenumber_squared(F.spec, i), s);
        sum += weight * std::norm(F.modes[i]);
    }
    return std::sqrt(F.spec.volume() * sum) / count;
}

double sobolev_norm(GridField const& f, double s)
{
    return sobolev_norm(forward(f), s);
}

namespace {

struct Stencil {
    int i0, i1;
    double w0, w1;  // weight of the upper node along each axis
};

Stencil locate(GridSpec const& spec, Point const& x)
{
    double h = spec.spacing();
    Stencil st{0, 0, 0.0, 0.0};
    double y0 = spec.wrap(x[0]) / h;
    st.i0 = static_cast<int>(std::floor(y0));
    st.w0 = y0 - st.i0;
    if (spec.dim == 2) {
        double y1 = spec.wrap(x[1]) / h;
        st.i1 = static_cast<int>(std::floor(y1));
        st.w1 = y1 - st.i1;
    }
    return st;
}

}  // namespace

double interpolate(GridField const& f, Point const& x)
{
    auto st = locate(f.spec, x);
    if (f.spec.dim == 1)
        return (1.0 - st.w0) * f.at(st.i0) + st.w0 * f.at(st.i0 + 1);
    double lo = (1.0 - st.w1) * f.at(st.i0, st.i1) + st.w1 * f.at(st.i0, st.i1 + 1);
    double hi = (1.0 - st.w1) * f.at(st.i0 + 1, st.i1)
                + st.w1 * f.at(st.i0 + 1, st.i1 + 1);
    return (1.0 - st.w0) * lo + st.w0 * hi;
}

Point interpolate_grad(std::span<GridField const> fields, Point const& x)
{
    Point out{0.0, 0.0};
    for (std::size_t a = 0; a < fields.size() && a < 2; ++a)
        out[a] = interpolate(fields[a], x);
    return out;
}

}  // namespace mfl
