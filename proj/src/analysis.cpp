#include "mfl/analysis.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfl/grid_io.hpp"

namespace mfl {

FieldError field_error(State const& a, State const& b)
{
    if (a.u.size() != b.u.size())
        throw std::invalid_argument("field_error: species count mismatch");
    FieldError e{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < a.u.size(); ++i) {
        if (!(a.u[i].spec == b.u[i].spec))
            throw std::invalid_argument("field_error: grid mismatch");
        GridField diff = a.u[i];
        for (std::size_t k = 0; k < diff.values.size(); ++k) {
            diff.values[k] -= b.u[i].values[k];
            e.linf = std::max(e.linf, std::abs(diff.values[k]));
        }
        double l2 = diff.l2_norm();
        e.l2 += l2 * l2;
        for (auto const& g : gradient(diff)) {
            double n = g.l2_norm();
            e.grad_l2 += n * n;
        }
    }
    e.l2 = std::sqrt(e.l2);
    e.grad_l2 = std::sqrt(e.grad_l2);
    return e;
}

SlopeFit fit_loglog(std::span<double const> x, std::span<double const> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("fit_loglog: size mismatch");
    if (x.size() < 2)
        throw std::invalid_argument("fit_loglog: need at least two points");
    std::size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("fit_loglog: data must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("fit_loglog: x values must be distinct");
    SlopeFit fit{sxy / sxx, 0.0, std::numeric_limits<double>::quiet_NaN(),
                 static_cast<int>(n)};
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
            ssr += r * r;
        }
        double se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
        boost::math::students_t dist(static_cast<double>(n - 2));
        fit.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * se;
    }
    return fit;
}

GronwallResult gronwall_check(std::span<double const> t, std::span<double const> f,
                              std::span<double const> g, double a, double b, double tol)
{
    if (t.size() != f.size() || t.size() != g.size() || t.empty())
        throw std::invalid_argument("gronwall_check: series must be nonempty and aligned");
    if (!(a > 0.0) || b < 0.0)
        throw std::invalid_argument("gronwall_check: need a > 0 and b >= 0");
    GronwallResult r{true, {}, false, 0.0, 0.0};
    r.max_f = *std::max_element(f.begin(), f.end());
    r.bound = b == 0.0 ? f[0] : (a / b) * (a / b);

    if (b != 0.0 && !(f[0] > 0.0 && f[0] <= r.bound)) {
        r.precondition_ok = false;
        r.violation = "f(0) = " + format_double(f[0]) + " outside (0, (a/b)^2 = "
                      + format_double(r.bound) + "]";
        return r;
    }
    auto rhs = [&](std::size_t k) {
        return -g[k] * (a - b * std::sqrt(std::max(f[k], 0.0)));
    };
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        double dt = t[k + 1] - t[k];
        if (!(dt > 0.0))
            throw std::invalid_argument("gronwall_check: times must increase");
        if (g[k] < 0.0 || f[k] < 0.0) {
            r.precondition_ok = false;
            r.violation = "negative f or g at t = " + format_double(t[k]);
            return r;
        }
        double fd = (f[k + 1] - f[k]) / dt;
        double limit = std::max(rhs(k), rhs(k + 1));
        double scale = std::max({1.0, std::abs(fd), std::abs(limit)});
        if (fd > limit + tol * scale) {
            r.precondition_ok = false;
            r.violation = "f' <= -g (a - b sqrt f) fails on [" + format_double(t[k]) + ", "
                          + format_double(t[k + 1]) + "]: " + format_double(fd) + " > "
                          + format_double(limit);
            return r;
        }
    }
    r.bound_holds = r.max_f <= r.bound * (1.0 + 1e-8);
    return r;
}

HsEnergyReport hs_energy_monitor(DiagnosticsTrace const& trace, SystemParams const& params,
                                 double c_star, double tol)
{
    if (c_star < 0.0)
        throw std::invalid_argument("hs_energy_monitor: c_star must be >= 0");
    auto const& rec = trace.records;
    std::size_t n = rec.size();
    std::vector<double> t(n), f(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = rec[k].t;
        f[k] = rec[k].hs_a * rec[k].hs_a;
        g[k] = 2.0 * rec[k].grad_hs_a * rec[k].grad_hs_a;
    }
    double a = params.sigma_min();
    double b = c_star * params.l1.sum_abs();

    HsEnergyReport out{};
    out.steps = n > 0 ? static_cast<int>(n - 1) : 0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double dfdt = (f[k + 1] - f[k]) / (t[k + 1] - t[k]);
        double dissipation = g[k + 1] * (a - b * rec[k + 1].hs_a);
        double lhs = dfdt + dissipation;
        double scale = std::max({1.0, std::abs(dfdt), std::abs(dissipation)});
        if (lhs <= tol * scale)
            ++out.steps_ok;
        double inc = (rec[k + 1].hs_a - rec[k].hs_a) / rec[k].hs_a;
        out.max_relative_increase = k == 0 ? inc : std::max(out.max_relative_increase, inc);
    }
    out.fraction_ok = out.steps > 0 ? static_cast<double>(out.steps_ok) / out.steps : 1.0;
    out.gronwall = gronwall_check(t, f, g, a, b, tol);
    return out;
}

GridField empirical_density(std::span<Point const> positions, double bandwidth,
                            GridSpec const& grid)
{
    double h = grid.spacing();
    if (!(bandwidth >= 2.0 * h))
        throw std::invalid_argument("empirical_density: bandwidth below 2 grid spacings");
    if (positions.empty())
        throw std::invalid_argument("empirical_density: no positions");
    GridField out(grid);
    int m = grid.points;
    double reach = 8.0 * bandwidth;
    double inv2 = 1.0 / (2.0 * bandwidth * bandwidth);
    auto wrap_index = [m](long j) {
        return static_cast<std::size_t>(((j % m) + m) % m);
    };
    for (auto const& p0 : positions) {
        Point p = grid.wrap(p0);
        long lo0 = static_cast<long>(std::ceil((p[0] - reach) / h));
        long hi0 = static_cast<long>(std::floor((p[0] + reach) / h));
        if (grid.dim == 1) {
            for (long j = lo0; j <= hi0; ++j) {
                double d = j * h - p[0];
                out.values[wrap_index(j)] += std::exp(-d * d * inv2);
            }
            continue;
        }
        long lo1 = static_cast<long>(std::ceil((p[1] - reach) / h));
        long hi1 = static_cast<long>(std::floor((p[1] + reach) / h));
        for (long j0 = lo0; j0 <= hi0; ++j0) {
            double d0 = j0 * h - p[0];
            double e0 = std::exp(-d0 * d0 * inv2);
            std::size_t row = wrap_index(j0) * static_cast<std::size_t>(m);
            for (long j1 = lo1; j1 <= hi1; ++j1) {
                double d1 = j1 * h - p[1];
                out.values[row + wrap_index(j1)] += e0 * std::exp(-d1 * d1 * inv2);
            }
        }
    }
    double mass = out.mass();
    for (auto& v : out.values)
        v /= mass;
    return out;
}

MeanSe mean_and_se(std::span<double const> values)
{
    if (values.empty())
        return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= n;
    if (values.size() < 2)
        return {mean, 0.0};
    double s2 = 0.0;
    for (double v : values)
        s2 += (v - mean) * (v - mean);
    return {mean, std::sqrt(s2 / (n - 1.0) / n)};
}

}  // namespace mfl
