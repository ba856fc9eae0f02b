#include "mfl/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mfl {

namespace {

constexpr double kBlowUpFactor = 1e6;

int rounded_ratio(double num, double den, char const* what)
{
    double r = num / den;
    double n = std::round(r);
    if (std::abs(r - n) > 1e-6 * std::max(1.0, n))
        throw std::invalid_argument(std::string(what) + " must be an integer multiple of dt");
    return static_cast<int>(n);
}

double entropy_density(double u)
{
    double v = std::max(u, kEntropyFloor);
    return v * (std::log(v) - 1.0);
}

}  // namespace

double SquareMatrix::sum_abs() const
{
    double s = 0.0;
    for (double x : v)
        s += std::abs(x);
    return s;
}

SystemParams SystemParams::with_kernels(std::vector<double> sigma, KernelMatrix kernels,
                                        GridSpec grid, double dt, double t_end)
{
    SystemParams p;
    p.species = kernels.species();
    p.sigma = std::move(sigma);
    p.moments = SquareMatrix(p.species);
    p.l1 = SquareMatrix(p.species);
    for (int i = 0; i < p.species; ++i) {
        for (int j = 0; j < p.species; ++j) {
            auto const& base = kernels(i, j).base();
            p.moments(i, j) = base.first_moment(grid.dim);
            p.l1(i, j) = base.l1_norm(grid.dim);
        }
    }
    p.kernels = std::move(kernels);
    p.grid = grid;
    p.dt = dt;
    p.t_end = t_end;
    p.snapshot_interval = 10 * dt;
    p.hs_orders = {grid.dim / 2.0 + 2.0, grid.dim / 2.0 + 2.5};
    return p;
}

SystemParams SystemParams::with_moments(std::vector<double> sigma, SquareMatrix moments,
                                        GridSpec grid, double dt, double t_end)
{
    SystemParams p;
    p.species = moments.n;
    p.sigma = std::move(sigma);
    p.l1 = SquareMatrix(moments.n);
    for (std::size_t k = 0; k < moments.v.size(); ++k)
        p.l1.v[k] = std::abs(moments.v[k]);
    p.moments = std::move(moments);
    p.grid = grid;
    p.dt = dt;
    p.t_end = t_end;
    p.snapshot_interval = 10 * dt;
    p.hs_orders = {grid.dim / 2.0 + 2.0, grid.dim / 2.0 + 2.5};
    return p;
}

double SystemParams::sigma_min() const
{
    return *std::min_element(sigma.begin(), sigma.end());
}

int SystemParams::steps() const { return rounded_ratio(t_end, dt, "t_end"); }

int SystemParams::steps_per_snapshot() const
{
    return rounded_ratio(snapshot_interval, dt, "snapshot interval");
}

void SystemParams::validate() const
{
    if (species < 1)
        throw std::invalid_argument("species count must be >= 1");
    if (static_cast<int>(sigma.size()) != species)
        throw std::invalid_argument("sigma must have one entry per species");
    for (double s : sigma)
        if (!(s > 0.0))
            throw std::invalid_argument("sigma must be > 0");
    if (!(dt > 0.0))
        throw std::invalid_argument("dt must be > 0");
    if (!(t_end >= 0.0))
        throw std::invalid_argument("t_end must be >= 0");
    if (moments.n != species || l1.n != species)
        throw std::invalid_argument("moment matrices must be n x n");
    if (kernels && (kernels->species() != species || kernels->dim() != grid.dim))
        throw std::invalid_argument("kernel matrix does not match species/grid");
    steps();
    if (steps_per_snapshot() < 1)
        throw std::invalid_argument("snapshot interval must be >= dt");
}

State State::initial(std::vector<GridField> u0)
{
    State s;
    s.time = 0.0;
    s.u = std::move(u0);
    for (auto const& f : s.u)
        s.initial_mass.push_back(f.mass());
    return s;
}

SmallnessResult smallness_check(State const& u0, SystemParams const& params, double s,
                                double c_star)
{
    if (c_star < 0.0)
        throw std::invalid_argument("smallness_check: c_star must be >= 0");
    double sq = 0.0;
    for (auto const& f : u0.u) {
        double v = sobolev_norm(f, s);
        sq += v * v;
    }
    double lhs = std::sqrt(sq);
    double sum_a = params.l1.sum_abs();
    double sigma = params.sigma_min();
    if (sum_a == 0.0 || c_star == 0.0)
        return {true, lhs, std::numeric_limits<double>::infinity(), sigma};
    double rhs = sigma / (c_star * sum_a);
    return {lhs <= rhs, lhs, rhs, sigma - c_star * sum_a * lhs};
}

Stepper::Stepper(SystemParams params, PdeMode mode)
    : params_(std::move(params)), mode_(mode)
{
    params_.validate();
    GridSpec const& g = params_.grid;
    int n = params_.species;
    if (mode_ == PdeMode::nonlocal) {
        if (!params_.kernels)
            throw std::invalid_argument("nonlocal solve requires a kernel matrix");
        double hd = g.cell_volume();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                auto K = forward((*params_.kernels)(i, j).sample_on_grid(g));
                for (auto& c : K.modes)
                    c *= hd;
                kernel_spectra_.push_back(std::move(K));
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        std::vector<double> e(g.size());
        for (std::size_t k = 0; k < e.size(); ++k)
            e[k] = std::exp(-params_.sigma[i] * spectral::wavenumber_squared(g, k)
                            * params_.dt);
        decay_.push_back(std::move(e));
    }
}

std::vector<SpectralField> Stepper::velocity_potential(
    std::vector<SpectralField> const& U) const
{
    GridSpec const& g = params_.grid;
    int n = params_.species;
    std::vector<SpectralField> P;
    for (int i = 0; i < n; ++i) {
        SpectralField acc{g, std::vector<std::complex<double>>(g.size())};
        for (int j = 0; j < n; ++j) {
            if (mode_ == PdeMode::nonlocal) {
                auto const& K = kernel_spectra_[static_cast<std::size_t>(i * n + j)];
                for (std::size_t k = 0; k < acc.modes.size(); ++k)
                    acc.modes[k] += K.modes[k] * U[j].modes[k];
            } else {
                double a = params_.moments(i, j);
                for (std::size_t k = 0; k < acc.modes.size(); ++k)
                    acc.modes[k] += a * U[j].modes[k];
            }
        }
        P.push_back(std::move(acc));
    }
    return P;
}

std::vector<std::vector<GridField>> Stepper::velocity(State const& s) const
{
    std::vector<SpectralField> U;
    for (auto const& f : s.u)
        U.push_back(forward(f));
    auto P = velocity_potential(U);
    std::vector<std::vector<GridField>> w;
    for (auto& Pi : P) {
        std::vector<GridField> comps;
        for (int a = 0; a < params_.grid.dim; ++a) {
            auto D = Pi;
            spectral::differentiate(D, a);
            comps.push_back(inverse(D));
        }
        w.push_back(std::move(comps));
    }
    return w;
}

std::vector<GridField> Stepper::pair_field(State const& s, int i, int j) const
{
    if (mode_ != PdeMode::nonlocal)
        throw std::logic_error("pair_field requires a nonlocal stepper");
    int n = params_.species;
    auto Pij = forward(s.u[static_cast<std::size_t>(j)]);
    auto const& K = kernel_spectra_[static_cast<std::size_t>(i * n + j)];
    for (std::size_t k = 0; k < Pij.modes.size(); ++k)
        Pij.modes[k] *= K.modes[k];
    std::vector<GridField> out;
    for (int a = 0; a < params_.grid.dim; ++a) {
        auto D = Pij;
        spectral::differentiate(D, a);
        out.push_back(inverse(D));
    }
    return out;
}

State Stepper::step(State const& s) const
{
    GridSpec const& g = params_.grid;
    int n = params_.species;
    if (static_cast<int>(s.u.size()) != n)
        throw std::invalid_argument("step: state has wrong species count");
    double dt = params_.dt;
    double h = g.spacing();

    std::vector<SpectralField> U;
    for (auto const& f : s.u) {
        if (!(f.spec == g))
            throw std::invalid_argument("step: state grid does not match params");
        U.push_back(forward(f));
    }
    auto P = velocity_potential(U);

    State next;
    next.time = s.time + dt;
    next.initial_mass = s.initial_mass;
    for (int i = 0; i < n; ++i) {
        SpectralField div{g, std::vector<std::complex<double>>(g.size())};
        for (int a = 0; a < g.dim; ++a) {
            auto D = P[i];
            spectral::differentiate(D, a);
            GridField w = inverse(D);
            double vmax = w.max_abs();
            if (dt * vmax > params_.cfl * h)
                throw SolveAborted("advective CFL violated: dt*max|w| = "
                                   + std::to_string(dt * vmax) + " > "
                                   + std::to_string(params_.cfl * h));
            for (std::size_t k = 0; k < w.values.size(); ++k)
                w.values[k] *= s.u[i].values[k];
            auto F = forward(w);
            if (params_.dealias)
                spectral::dealias(F);
            spectral::differentiate(F, a);
            for (std::size_t k = 0; k < F.modes.size(); ++k)
                div.modes[k] += F.modes[k];
        }
        auto& Ui = U[i];
        auto const& e = decay_[i];
        for (std::size_t k = 0; k < Ui.modes.size(); ++k)
            Ui.modes[k] = e[k] * (Ui.modes[k] + dt * div.modes[k]);
        GridField ui = inverse(Ui);
        if (!ui.is_finite())
            throw SolveAborted("non-finite values in species " + std::to_string(i + 1));
        next.u.push_back(std::move(ui));
    }
    return next;
}

State step_nonlocal(State const& s, SystemParams const& params)
{
    return Stepper(params, PdeMode::nonlocal).step(s);
}

State step_local(State const& s, SystemParams const& params)
{
    return Stepper(params, PdeMode::local).step(s);
}

DiagnosticsRecord diagnose(State const& s, SystemParams const& params)
{
    DiagnosticsRecord r{};
    r.t = s.time;
    GridSpec const& g = params.grid;
    double l2 = 0.0, hs_a = 0.0, hs_b = 0.0, grad_a = 0.0;
    r.seam_max = 0.0;
    for (auto const& f : s.u) {
        r.mass.push_back(f.mass());
        r.min.push_back(f.min());
        double n2 = f.l2_norm();
        l2 += n2 * n2;
        auto F = forward(f);
        double a = sobolev_norm(F, params.hs_orders[0]);
        double b = sobolev_norm(F, params.hs_orders[1]);
        hs_a += a * a;
        hs_b += b * b;
        for (int ax = 0; ax < g.dim; ++ax) {
            auto D = F;
            spectral::differentiate(D, ax);
            double v = sobolev_norm(D, params.hs_orders[0]);
            grad_a += v * v;
        }
        for (int i = 0; i < g.points; ++i) {
            r.seam_max = std::max(r.seam_max, std::abs(f.at(0, i)));
            if (g.dim == 2)
                r.seam_max = std::max(r.seam_max, std::abs(f.at(i, 0)));
        }
    }
    r.l2 = std::sqrt(l2);
    r.hs_a = std::sqrt(hs_a);
    r.hs_b = std::sqrt(hs_b);
    r.grad_hs_a = std::sqrt(grad_a);
    auto ent = entropies(s, params.moments);
    r.entropy = ent.H;
    r.entropy_weighted = ent.H1.value_or(std::numeric_limits<double>::quiet_NaN());
    return r;
}

SolveResult solve(State const& initial, SystemParams const& params, PdeMode mode)
{
    Stepper stepper(params, mode);
    SolveResult out;
    out.trace.species = params.species;
    out.trace.hs_orders = params.hs_orders;
    State cur = initial;
    if (cur.initial_mass.empty())
        for (auto const& f : cur.u)
            cur.initial_mass.push_back(f.mass());
    auto first = diagnose(cur, params);
    double l2_0 = first.l2;
    out.trace.records.push_back(std::move(first));
    out.snapshots.push_back(cur);

    int steps = params.steps();
    int every = params.steps_per_snapshot();
    for (int n = 1; n <= steps; ++n) {
        State next;
        try {
            next = stepper.step(cur);
        } catch (SolveAborted const& e) {
            out.abort_reason = e.what();
            break;
        }
        next.time = n * params.dt;
        auto rec = diagnose(next, params);
        if (!(rec.l2 <= kBlowUpFactor * std::max(l2_0, 1e-300))) {
            out.abort_reason = "blow-up: L2 norm grew beyond 1e6 x initial at t = "
                               + std::to_string(next.time);
            break;
        }
        out.trace.records.push_back(std::move(rec));
        cur = std::move(next);
        if (n % every == 0)
            out.snapshots.push_back(cur);
    }
    out.final = std::move(cur);
    return out;
}

double mollifier_error(GridField const& u, ScaledKernel const& kernel, double a)
{
    auto samples = kernel.sample_on_grid(u.spec);
    double sq = 0.0;
    for (auto const& g : gradient(u)) {
        auto c = convolve(samples, g);
        for (std::size_t k = 0; k < c.values.size(); ++k)
            c.values[k] -= a * g.values[k];
        double n = c.l2_norm();
        sq += n * n;
    }
    return std::sqrt(sq);
}

Entropies entropies(State const& s, SquareMatrix const& moments)
{
    Entropies out{0.0, std::nullopt};
    std::vector<double> per;
    for (auto const& f : s.u) {
        double acc = 0.0;
        for (double v : f.values)
            acc += entropy_density(v);
        per.push_back(acc * f.spec.cell_volume());
    }
    for (double v : per)
        out.H += v;
    if (per.size() == 2 && moments.n == 2)
        out.H1 = moments(1, 0) * per[0] + moments(0, 1) * per[1];
    return out;
}

}  // namespace mfl
