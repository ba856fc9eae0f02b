#include "mfl/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfl/parallel.hpp"

namespace mfl {

std::string_view to_string(DriftMode mode)
{
    switch (mode) {
    case DriftMode::interacting:
        return "interacting";
    case DriftMode::intermediate:
        return "intermediate";
    case DriftMode::limit:
        return "limit";
    }
    return "?";
}

std::string_view to_string(Pairing p)
{
    switch (p) {
    case Pairing::interacting_vs_intermediate:
        return "interacting_vs_intermediate";
    case Pairing::intermediate_vs_limit:
        return "intermediate_vs_limit";
    case Pairing::interacting_vs_limit:
        return "interacting_vs_limit";
    }
    return "?";
}

namespace {

constexpr int kMaxRejections = 1 << 24;

void check_density(GridField const& u)
{
    for (double v : u.values)
        if (!(v >= 0.0))
            throw std::invalid_argument("sample_initials: density must be nonnegative");
    if (!(u.mass() > 0.0))
        throw std::invalid_argument("sample_initials: zero-mass density");
}

Point displacement(GridSpec const& g, Point const& a, Point const& b)
{
    return {g.min_image(a[0] - b[0]), g.dim == 2 ? g.min_image(a[1] - b[1]) : 0.0};
}

}  // namespace

std::vector<Point> sample_initials(std::vector<GridField> const& u0, int particles,
                                   NoisePlan const& noise)
{
    if (particles < 1)
        throw std::invalid_argument("sample_initials: need at least one particle");
    std::vector<Point> out;
    out.reserve(u0.size() * static_cast<std::size_t>(particles));
    for (std::size_t i = 0; i < u0.size(); ++i) {
        GridField const& u = u0[i];
        check_density(u);
        GridSpec const& g = u.spec;
        double h = g.spacing();
        int m = g.points;
        if (g.dim == 1) {
            // cell [x_j, x_{j+1}) carries the trapezoid mass of its end nodes
            std::vector<double> cum(static_cast<std::size_t>(m) + 1, 0.0);
            for (int j = 0; j < m; ++j)
                cum[j + 1] = cum[j] + 0.5 * (u.at(j) + u.at(j + 1));
            double total = cum.back();
            for (int k = 0; k < particles; ++k) {
                double target = noise.initial_uniforms(static_cast<int>(i), k, 0)[0] * total;
                auto it = std::upper_bound(cum.begin() + 1, cum.end(), target);
                int j = std::min(static_cast<int>(it - cum.begin()) - 1, m - 1);
                while (j > 0 && cum[j + 1] == cum[j])
                    --j;
                double w = cum[j + 1] - cum[j];
                double frac = w > 0.0 ? std::clamp((target - cum[j]) / w, 0.0, 1.0) : 0.0;
                out.push_back({g.wrap((j + frac) * h), 0.0});
            }
        } else {
            double top = 0.0;
            for (double v : u.values)
                top = std::max(top, v);
            for (int k = 0; k < particles; ++k) {
                bool accepted = false;
                for (std::uint32_t a = 0; a < kMaxRejections; ++a) {
                    auto pos = noise.initial_uniforms(static_cast<int>(i), k, 2 * a);
                    auto acc = noise.initial_uniforms(static_cast<int>(i), k, 2 * a + 1);
                    Point x{pos[0] * g.length, pos[1] * g.length};
                    if (acc[0] * top < interpolate(u, x)) {
                        out.push_back(x);
                        accepted = true;
                        break;
                    }
                }
                if (!accepted)
                    throw std::runtime_error("sample_initials: rejection sampling failed");
            }
        }
    }
    return out;
}

CellIndex::CellIndex(ParticleEnsemble const& ens, double cutoff)
    : domain_(ens.domain), species_(ens.species)
{
    if (!(cutoff > 0.0))
        throw std::invalid_argument("cell index: cutoff must be positive");
    cells_ = static_cast<int>(std::floor(domain_.length / cutoff));
    // with fewer than three cells per axis the +-1 stencil would revisit cells
    if (cells_ < 3)
        cells_ = 1;
    std::size_t total = domain_.dim == 1 ? cells_ : static_cast<std::size_t>(cells_) * cells_;
    lists_.assign(static_cast<std::size_t>(species_), std::vector<std::vector<int>>(total));
    for (int i = 0; i < species_; ++i) {
        for (int k = 0; k < ens.particles; ++k) {
            Point x = ens.wrapped(i, k);
            std::size_t c = static_cast<std::size_t>(cell_of(x[0]));
            if (domain_.dim == 2)
                c = c * cells_ + cell_of(x[1]);
            lists_[i][c].push_back(k);
        }
    }
}

int CellIndex::cell_of(double coord) const
{
    int c = static_cast<int>(coord / domain_.length * cells_);
    return std::clamp(c, 0, cells_ - 1);
}

void CellIndex::candidates(Point const& x, int species, std::vector<int>& out) const
{
    out.clear();
    auto const& lists = lists_[static_cast<std::size_t>(species)];
    if (cells_ == 1) {
        out = lists[0];
        return;
    }
    Point w = domain_.wrap(x);
    int c0 = cell_of(w[0]);
    if (domain_.dim == 1) {
        for (int d0 = -1; d0 <= 1; ++d0) {
            auto const& l = lists[static_cast<std::size_t>((c0 + d0 + cells_) % cells_)];
            auto mid = static_cast<std::ptrdiff_t>(out.size());
            out.insert(out.end(), l.begin(), l.end());
            std::inplace_merge(out.begin(), out.begin() + mid, out.end());
        }
    } else {
        int c1 = cell_of(w[1]);
        for (int d0 = -1; d0 <= 1; ++d0) {
            for (int d1 = -1; d1 <= 1; ++d1) {
                std::size_t c = static_cast<std::size_t>((c0 + d0 + cells_) % cells_) * cells_
                                + static_cast<std::size_t>((c1 + d1 + cells_) % cells_);
                auto mid = static_cast<std::ptrdiff_t>(out.size());
                out.insert(out.end(), lists[c].begin(), lists[c].end());
                // cell lists are ascending, so merging keeps the whole run sorted
                std::inplace_merge(out.begin(), out.begin() + mid, out.end());
            }
        }
    }
}

std::vector<Point> drift_interacting(ParticleEnsemble const& ens, KernelMatrix const& kernels,
                                     CellIndex const& index, int jobs)
{
    if (index.cell_size() < kernels.eta())
        throw std::invalid_argument("drift_interacting: cell size smaller than eta");
    int n = ens.species;
    int N = ens.particles;
    GridSpec const& g = ens.domain;
    std::vector<Point> wrapped(ens.positions.size());
    for (std::size_t q = 0; q < wrapped.size(); ++q)
        wrapped[q] = g.wrap(ens.positions[q]);

    std::vector<Point> drift(ens.positions.size());
    parallel_for(drift.size(), jobs, [&](std::size_t flat) {
        int i = static_cast<int>(flat / N);
        Point const& x = wrapped[flat];
        std::vector<int> cand;
        Point total{0.0, 0.0};
        for (int j = 0; j < n; ++j) {
            auto const& V = kernels(i, j);
            index.candidates(x, j, cand);
            Point s{0.0, 0.0};
            for (int l : cand) {
                Point gv = V.grad_eval(displacement(g, x, wrapped[ens.index(j, l)]));
                s[0] += gv[0];
                s[1] += gv[1];
            }
            total[0] += s[0] / N;
            total[1] += s[1] / N;
        }
        drift[flat] = {-total[0], -total[1]};
    });
    return drift;
}

DriftSeries::DriftSeries(std::vector<double> times,
                         std::vector<std::vector<std::vector<GridField>>> fields)
    : times_(std::move(times)), fields_(std::move(fields))
{
    if (times_.empty() || times_.size() != fields_.size())
        throw std::invalid_argument("drift series: need one field set per time");
    if (!std::is_sorted(times_.begin(), times_.end()))
        throw std::invalid_argument("drift series: times must be ascending");
}

DriftSeries DriftSeries::from_solve(SolveResult const& result, Stepper const& stepper)
{
    std::vector<double> times;
    std::vector<std::vector<std::vector<GridField>>> fields;
    for (auto const& snap : result.snapshots) {
        times.push_back(snap.time);
        auto w = stepper.velocity(snap);
        for (auto& comps : w)
            for (auto& f : comps)
                for (auto& v : f.values)
                    v = -v;
        fields.push_back(std::move(w));
    }
    return DriftSeries(std::move(times), std::move(fields));
}

std::vector<GridField> DriftSeries::at(int species, double t) const
{
    double slack = 1e-9 * std::max(1.0, std::abs(times_.back()));
    if (t < times_.front() - slack || t > times_.back() + slack)
        throw std::out_of_range("drift series: time " + std::to_string(t)
                                + " outside snapshot range");
    auto s = static_cast<std::size_t>(species);
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin())
        return fields_.front()[s];
    std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    std::size_t lo = hi - 1;
    if (hi == times_.size() || times_[lo] == t)
        return fields_[lo][s];
    double theta = (t - times_[lo]) / (times_[hi] - times_[lo]);
    auto out = fields_[lo][s];
    for (std::size_t a = 0; a < out.size(); ++a) {
        auto const& up = fields_[hi][s][a].values;
        for (std::size_t q = 0; q < up.size(); ++q)
            out[a].values[q] = (1.0 - theta) * out[a].values[q] + theta * up[q];
    }
    return out;
}

std::vector<Point> drift_field(ParticleEnsemble const& ens, DriftSeries const& series)
{
    std::vector<Point> drift(ens.positions.size());
    for (int i = 0; i < ens.species; ++i) {
        auto fields = series.at(i, ens.time);
        for (int k = 0; k < ens.particles; ++k)
            drift[ens.index(i, k)] = interpolate_grad(fields, ens.wrapped(i, k));
    }
    return drift;
}

ParticleEnsemble em_step(ParticleEnsemble const& ens, std::span<Point const> drift,
                         double dt, NoisePlan const& noise, std::int64_t step_index)
{
    if (std::abs(dt - noise.dt()) > 1e-12 * noise.dt())
        throw std::invalid_argument("em_step: dt does not match the noise plan");
    if (step_index < 0 || step_index >= noise.steps())
        throw std::out_of_range("em_step: step index beyond plan length");
    if (drift.size() != ens.positions.size())
        throw std::invalid_argument("em_step: drift size mismatch");
    ParticleEnsemble next = ens;
    for (int i = 0; i < ens.species; ++i) {
        double amp = std::sqrt(2.0 * ens.sigma[static_cast<std::size_t>(i)]);
        for (int k = 0; k < ens.particles; ++k) {
            std::size_t q = ens.index(i, k);
            Point dw = noise.increment(i, k, step_index);
            Point& x = next.positions[q];
            x[0] = x[0] + drift[q][0] * dt + amp * dw[0];
            if (ens.domain.dim == 2)
                x[1] = x[1] + drift[q][1] * dt + amp * dw[1];
        }
    }
    next.step = step_index + 1;
    next.time = static_cast<double>(next.step) * dt;
    return next;
}

namespace {

SnapshotSummary summarize(std::array<ParticleEnsemble, 3> const& ens,
                          std::array<CouplingDistance, 3> const& sup)
{
    SnapshotSummary s;
    s.t = ens[1].time;
    s.sup = sup;
    for (std::size_t m = 0; m < 3; ++m) {
        auto const& e = ens[m];
        for (int i = 0; i < e.species; ++i) {
            Point mean{0.0, 0.0}, var{0.0, 0.0};
            for (int k = 0; k < e.particles; ++k)
                for (int a = 0; a < 2; ++a)
                    mean[a] += e.at(i, k)[a];
            for (int a = 0; a < 2; ++a)
                mean[a] /= e.particles;
            for (int k = 0; k < e.particles; ++k)
                for (int a = 0; a < 2; ++a) {
                    double d = e.at(i, k)[a] - mean[a];
                    var[a] += d * d;
                }
            for (int a = 0; a < 2; ++a)
                var[a] = e.particles > 1 ? var[a] / (e.particles - 1) : 0.0;
            s.mean[m].push_back(mean);
            s.var[m].push_back(var);
        }
    }
    return s;
}

constexpr std::array<std::pair<int, int>, 3> kPairModes{{{0, 1}, {1, 2}, {0, 2}}};

}  // namespace

CoupledRun run_coupled(SystemParams const& params, KernelMatrix const& kernels,
                       DriftSeries const& nonlocal, DriftSeries const& local,
                       std::vector<GridField> const& u0, int particles,
                       NoisePlan const& noise, CoupledOptions const& options)
{
    params.validate();
    if (static_cast<int>(u0.size()) != params.species || kernels.species() != params.species
        || noise.species() != params.species)
        throw std::invalid_argument("run_coupled: species count mismatch");
    if (std::abs(noise.dt() - params.dt) > 1e-12 * params.dt)
        throw std::invalid_argument("run_coupled: noise plan dt differs from params dt");
    int steps = params.steps();
    if (noise.steps() < steps)
        throw std::invalid_argument("run_coupled: noise plan shorter than the horizon");
    if (particles > noise.particles())
        throw std::invalid_argument("run_coupled: noise plan has too few particles");
    if (params.steps_per_snapshot() > 10)
        throw std::invalid_argument("run_coupled: drift snapshots more than 10 steps apart");

    auto samples = sample_initials(u0, particles, noise);
    std::array<ParticleEnsemble, 3> ens;
    constexpr std::array<DriftMode, 3> modes{DriftMode::interacting, DriftMode::intermediate,
                                             DriftMode::limit};
    for (std::size_t m = 0; m < 3; ++m) {
        ens[m].mode = modes[m];
        ens[m].domain = params.grid;
        ens[m].species = params.species;
        ens[m].particles = particles;
        ens[m].sigma = params.sigma;
        ens[m].positions = samples;
    }

    double nan = std::numeric_limits<double>::quiet_NaN();
    // running sup per pairing and species
    std::array<std::vector<CouplingDistance>, 3> sup;
    for (auto& s : sup)
        s.assign(static_cast<std::size_t>(params.species), CouplingDistance{});

    CoupledRun out;
    auto totals = [&] {
        std::array<CouplingDistance, 3> t{};
        for (std::size_t p = 0; p < 3; ++p) {
            bool uses_interacting = kPairModes[p].first == 0;
            if (uses_interacting && !options.interacting) {
                t[p] = {nan, nan};
                continue;
            }
            for (auto const& c : sup[p]) {
                t[p].unwrapped += c.unwrapped;
                t[p].torus += c.torus;
            }
        }
        return t;
    };
    auto record = [&] {
        out.summaries.push_back(summarize(ens, totals()));
        if (options.record_positions)
            out.positions.push_back({ens[0].positions, ens[1].positions, ens[2].positions});
    };
    record();

    int every = params.steps_per_snapshot();
    GridSpec const& g = params.grid;
    for (int s = 0; s < steps; ++s) {
        if (options.interacting) {
            CellIndex index(ens[0], kernels.eta());
            auto d0 = drift_interacting(ens[0], kernels, index, options.jobs);
            ens[0] = em_step(ens[0], d0, params.dt, noise, s);
        }
        auto d1 = drift_field(ens[1], nonlocal);
        auto d2 = drift_field(ens[2], local);
        ens[1] = em_step(ens[1], d1, params.dt, noise, s);
        ens[2] = em_step(ens[2], d2, params.dt, noise, s);

        for (std::size_t p = 0; p < 3; ++p) {
            auto [a, b] = kPairModes[p];
            if (a == 0 && !options.interacting)
                continue;
            for (int i = 0; i < params.species; ++i) {
                auto& c = sup[p][static_cast<std::size_t>(i)];
                for (int k = 0; k < particles; ++k) {
                    Point const& xa = ens[a].at(i, k);
                    Point const& xb = ens[b].at(i, k);
                    double du0 = xa[0] - xb[0];
                    double du1 = xa[1] - xb[1];
                    double unwrapped = std::hypot(du0, du1);
                    double torus = std::hypot(g.min_image(du0),
                                              g.dim == 2 ? g.min_image(du1) : 0.0);
                    c.unwrapped = std::max(c.unwrapped, unwrapped);
                    c.torus = std::max(c.torus, torus);
                    out.wrap_discrepancy
                        = std::max(out.wrap_discrepancy, std::abs(unwrapped - torus));
                }
            }
        }
        if ((s + 1) % every == 0)
            record();
    }
    out.path_error = totals();
    out.final = std::move(ens);
    return out;
}

std::vector<ZeroMeanStat> zero_mean_diagnostic(
    ParticleEnsemble const& ens, KernelMatrix const& kernels,
    std::vector<std::vector<GridField>> const& pair_fields)
{
    int n = ens.species;
    int N = ens.particles;
    if (kernels.species() != n
        || pair_fields.size() != static_cast<std::size_t>(n * n))
        throw std::invalid_argument("zero_mean_diagnostic: species count mismatch");
    GridSpec const& g = ens.domain;
    CellIndex index(ens, kernels.eta());
    std::vector<ZeroMeanStat> out;
    std::vector<int> cand;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            ZeroMeanStat st{i, j, {0.0, 0.0}, {0.0, 0.0}, 0.0};
            bool same = i == j;
            int M = same ? N - 1 : N;
            if (M < 1 || N < 2) {
                out.push_back(st);
                continue;
            }
            auto const& V = kernels(i, j);
            auto const& fields = pair_fields[static_cast<std::size_t>(i * n + j)];
            std::vector<Point> f(static_cast<std::size_t>(N));
            std::vector<Point> Y(static_cast<std::size_t>(N));
            std::vector<Point> qsum(static_cast<std::size_t>(N), Point{0.0, 0.0});
            Point fsum{0.0, 0.0};
            for (int k = 0; k < N; ++k) {
                f[k] = interpolate_grad(fields, ens.wrapped(i, k));
                fsum[0] += f[k][0];
                fsum[1] += f[k][1];
            }
            for (int k = 0; k < N; ++k) {
                Point x = ens.wrapped(i, k);
                index.candidates(x, j, cand);
                Point s{0.0, 0.0};
                for (int l : cand) {
                    if (same && l == k)
                        continue;
                    Point gv = V.grad_eval(displacement(g, x, ens.wrapped(j, l)));
                    s[0] += gv[0];
                    s[1] += gv[1];
                    qsum[l][0] += gv[0];
                    qsum[l][1] += gv[1];
                }
                Y[k] = {s[0] / M - f[k][0], s[1] / M - f[k][1]};
            }
            for (int a = 0; a < g.dim; ++a) {
                std::vector<double> y(static_cast<std::size_t>(N)), q(static_cast<std::size_t>(N));
                double mean = 0.0, scale = 0.0;
                for (int k = 0; k < N; ++k) {
                    y[k] = Y[k][a];
                    scale += std::abs(y[k]) + std::abs(f[k][a]);
                    double fk = fsum[a] - (same ? f[k][a] : 0.0);
                    q[k] = (qsum[k][a] - fk) / M;
                    mean += y[k];
                }
                mean /= N;
                auto variance = [N](std::vector<double> const& v) {
                    double mu = 0.0;
                    for (double x : v)
                        mu += x;
                    mu /= N;
                    double s2 = 0.0;
                    for (double x : v)
                        s2 += (x - mu) * (x - mu);
                    return s2 / (N - 1);
                };
                double var;
                if (same) {
                    std::vector<double> psi(static_cast<std::size_t>(N));
                    for (int k = 0; k < N; ++k)
                        psi[k] = y[k] + q[k];
                    var = variance(psi) / N;
                } else {
                    var = (variance(y) + variance(q)) / N;
                }
                st.mean[a] = mean;
                // For i == j the symmetrised kernel is -(F(x) + F(y)) / 2, so a flat
                // F leaves only rounding in the mean; floor the error at that level.
                st.se[a] = std::max(std::sqrt(var), 1e-12 * scale / N);
                if (st.se[a] > 0.0)
                    st.z = std::max(st.z, std::abs(mean) / st.se[a]);
                else if (mean != 0.0)
                    st.z = std::numeric_limits<double>::infinity();
            }
            out.push_back(st);
        }
    }
    return out;
}

}  // namespace mfl
