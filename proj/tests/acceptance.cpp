// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "mfl/analysis.hpp"
#include "mfl/config.hpp"
#include "mfl/grid_io.hpp"
#include "mfl/initial.hpp"
#include "mfl/particles.hpp"
#include "mfl/pde.hpp"
#include "mfl/runner.hpp"
#include "mfl/studies.hpp"

using namespace mfl;
namespace fs = std::filesystem;

namespace {

struct Line {
    int id;
    bool passed;
    std::string detail;
};

std::vector<Line> lines;

void report(int id, bool passed, std::string const& detail)
{
    lines.push_back({id, passed, detail});
    std::cout << "criterion " << id << ": " << (passed ? "PASS" : "FAIL") << "  " << detail
              << std::endl;
}

std::string slurp(fs::path const& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig load(std::string const& name)
{
    return parse_config(slurp(fs::path(MFL_SOURCE_DIR) / "configs" / name));
}

Criterion const* find(std::vector<Criterion> const& cs, std::string const& name)
{
    for (auto const& c : cs)
        if (c.name == name)
            return &c;
    return nullptr;
}

bool criterion_ok(std::vector<Criterion> const& cs, std::string const& name, std::string& detail)
{
    auto c = find(cs, name);
    detail += name + (c ? (c->passed ? " ok" : " FAILED") : " missing");
    if (c && !c->detail.empty())
        detail += " [" + c->detail + "]";
    detail += "; ";
    return c && c->passed;
}

int jobs() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- criteria 1 and 3: the eta study ----

ConvergenceReport eta_report;

void eta_criteria()
{
    auto c = load("eta_study.cfg");
    auto setup = c.study_setup();
    auto t0 = std::chrono::steady_clock::now();
    eta_report = eta_convergence_study(setup, c.eta_schedule, c.thresholds, jobs());
    double secs = seconds_since(t0);

    std::ostringstream d1;
    bool small = true;
    for (auto const& r : eta_report.runs)
        small = small && r.smallness.passes;
    bool ok1 = eta_report.complete && eta_report.fit && !eta_report.degenerate && small;
    if (eta_report.fit) {
        auto const& f = *eta_report.fit;
        ok1 = ok1 && f.slope >= c.thresholds.slope_min && f.slope <= c.thresholds.slope_max;
        d1 << "slope " << format_double(f.slope) << " +- " << format_double(f.half_width)
           << " (need [" << c.thresholds.slope_min << ", " << c.thresholds.slope_max << "])";
    }
    if (eta_report.resolved_fit)
        d1 << ", eta >= 4h slope " << format_double(eta_report.resolved_fit->slope);
    d1 << ", errors";
    for (auto const& s : eta_report.samples)
        d1 << ' ' << format_double(s.eta) << ':' << format_double(s.field_error_sup_t);
    d1 << ", smallness " << (small ? "passes" : "fails") << ", " << format_double(secs) << " s";
    ok1 = ok1 && secs < 120.0;
    report(1, ok1, d1.str());

    std::string d3;
    bool ok3 = small && eta_report.complete;
    ok3 = criterion_ok(eta_report.criteria, "hs_monotone", d3) && ok3;
    ok3 = criterion_ok(eta_report.criteria, "gronwall_bound", d3) && ok3;
    double worst = -1.0;
    for (auto const& r : eta_report.runs)
        worst = std::max(worst, r.hs.max_relative_increase);
    d3 += "largest one-step relative H^s change " + format_double(worst);
    report(3, ok3 && worst <= c.thresholds.hs_tolerance, d3);
}

// ---- criterion 2: mollifier rate ----

void mollifier_criterion()
{
    auto c = load("eta_study.cfg");
    auto g = c.grid();
    auto u = c.initial_fields()[0];
    auto prof = make_profile(KernelFamily::bump3, 1.0);
    double a = prof.first_moment(1);
    std::vector<double> etas{0.8, 0.4, 0.2, 0.1};
    bool ok = etas.back() >= 4.0 * g.spacing();
    std::ostringstream d;
    double prev = 0.0;
    for (double eta : etas) {
        double e = mollifier_error(u, scale(prof, eta, 1), a);
        if (prev > 0.0) {
            double ratio = e / prev;
            ok = ok && ratio >= c.mollifier_ratio_min && ratio <= c.mollifier_ratio_max;
            d << "eta " << format_double(2 * eta) << "->" << format_double(eta) << " ratio "
              << format_double(ratio) << "; ";
        }
        prev = e;
    }
    d << "need [" << c.mollifier_ratio_min << ", " << c.mollifier_ratio_max << "]";
    report(2, ok, d.str());
}

// ---- criterion 4: conservation and oracles ----

double direct_checks()
{
    double worst = 0.0;
    std::mt19937_64 gen(17);
    std::normal_distribution<double> n;
    for (int d : {1, 2}) {
        auto g = GridSpec::make(d, 2.5, 16);
        GridField f(g), k(g);
        for (auto& v : f.values)
            v = n(gen);
        for (auto& v : k.values)
            v = n(gen);
        int m = 16;
        auto conv = convolve(f, k);
        auto F = forward(f);
        auto lap = laplacian(f);
        for (std::size_t x = 0; x < g.size(); ++x) {
            int x0 = d == 1 ? static_cast<int>(x) : static_cast<int>(x) / m;
            int x1 = d == 1 ? 0 : static_cast<int>(x) % m;
            double acc = 0.0;
            for (std::size_t y = 0; y < g.size(); ++y) {
                int y0 = d == 1 ? static_cast<int>(y) : static_cast<int>(y) / m;
                int y1 = d == 1 ? 0 : static_cast<int>(y) % m;
                acc += f.at((x0 - y0 + m) % m, d == 1 ? 0 : (x1 - y1 + m) % m) * k.values[y];
            }
            worst = std::max(worst, std::abs(acc * g.cell_volume() - conv.values[x]));
            // DFT coefficient and Laplacian by direct sums
            std::complex<double> dft = 0.0, lapx = 0.0;
            for (std::size_t y = 0; y < g.size(); ++y) {
                int y0 = d == 1 ? static_cast<int>(y) : static_cast<int>(y) / m;
                int y1 = d == 1 ? 0 : static_cast<int>(y) % m;
                dft += f.values[y] * std::polar(1.0, -2 * M_PI * (x0 * y0 + x1 * y1) / m);
            }
            worst = std::max(worst, std::abs(dft - F.modes[x]));
            for (std::size_t q = 0; q < g.size(); ++q) {
                int q0 = d == 1 ? static_cast<int>(q) : static_cast<int>(q) / m;
                int q1 = d == 1 ? 0 : static_cast<int>(q) % m;
                double k2 = spectral::wavenumber_squared(g, q);
                double phase = g.wavenumber(q0) * x0 * g.spacing()
                               + (d == 2 ? g.wavenumber(q1) * x1 * g.spacing() : 0.0);
                lapx += -k2 * F.modes[q] * std::polar(1.0, phase);
            }
            // the spectral Laplacian keeps every mode, Nyquist included, as -|k|^2
            worst = std::max(worst, std::abs(lapx.real() / static_cast<double>(g.size())
                                             - lap.values[x]));
        }
    }
    return worst;
}

void conservation_criterion(ConvergenceReport const& path)
{
    auto c = load("eta_study.cfg");
    double drift = 0.0;
    for (auto const* r : std::initializer_list<ConvergenceReport const*>{&eta_report, &path})
        for (auto const& run : r->runs)
            drift = std::max(drift, run.mass_drift);

    auto g = GridSpec::make(1, 2 * M_PI, 256);
    double sigma = 0.8, t = 0.1, w = 0.3;
    auto p = SystemParams::with_moments({sigma}, SquareMatrix(1), g, 1e-3, t);
    auto u0 = make_density({Blob{BlobKind::gaussian, 1.0, w, {M_PI, 0.0}}}, g);
    auto r = solve(State::initial({u0}), p, PdeMode::local);
    auto exact = make_density(
        {Blob{BlobKind::gaussian, 1.0, std::sqrt(w * w + 2 * sigma * t), {M_PI, 0.0}}}, g);
    double heat = 0.0;
    for (std::size_t q = 0; q < exact.values.size(); ++q)
        heat = std::max(heat, std::abs(exact.values[q] - r.final.u[0].values[q]));

    double direct = direct_checks();
    bool ok = drift <= c.thresholds.mass_drift && heat <= 1e-8 && direct <= 1e-10
              && !r.abort_reason;
    report(4, ok,
           "max mass drift " + format_double(drift) + ", heat L-inf error "
               + format_double(heat) + ", direct-sum gap " + format_double(direct));
}

// ---- criterion 5: path errors ----

ConvergenceReport path_report;

void path_criterion()
{
    auto c = load("path_study.cfg");
    PathStudyOptions o{c.eta_schedule, c.particle_schedule, c.seeds, c.master_seed, jobs()};
    auto t0 = std::chrono::steady_clock::now();
    path_report = path_error_study(c.study_setup(), o, c.thresholds);
    double secs = seconds_since(t0);

    std::string d;
    bool ok = path_report.complete;
    ok = criterion_ok(path_report.criteria, "eta_trend_intermediate_vs_limit", d) && ok;
    ok = criterion_ok(path_report.criteria, "n_trend_interacting_vs_intermediate", d) && ok;
    ok = criterion_ok(path_report.criteria, "torus_vs_unwrapped", d) && ok;

    auto off = c;
    off.kernel_coeff.assign(off.kernel_coeff.size(), 0.0);
    PathStudyOptions small{{0.4, 0.2}, {64, 256}, 4, c.master_seed, jobs()};
    auto free = path_error_study(off.study_setup(), small, c.thresholds);
    ok = criterion_ok(free.criteria, "pure_diffusion_coincidence", d) && ok;

    d += format_double(secs) + " s";
    report(5, ok && secs < 600.0, d);
}

// ---- criterion 6: zero-mean fluctuation ----

void zero_mean_criterion()
{
    auto c = load("eta_study.cfg");
    int N = 10000;
    auto u0 = c.initial_fields();
    auto setup = c.study_setup();
    auto p = setup.nonlocal_params(0.4);
    NoisePlan noise(c.master_seed, c.species, N, c.dim, p.dt, 1);
    ParticleEnsemble e;
    e.domain = p.grid;
    e.species = c.species;
    e.particles = N;
    e.sigma = c.sigma;
    e.positions = sample_initials(u0, N, noise);
    Stepper st(p, PdeMode::nonlocal);
    auto s0 = State::initial(u0);
    std::vector<std::vector<GridField>> fields;
    for (int i = 0; i < c.species; ++i)
        for (int j = 0; j < c.species; ++j)
            fields.push_back(st.pair_field(s0, i, j));
    auto stats = zero_mean_diagnostic(e, *p.kernels, fields);
    bool ok = !stats.empty();
    std::ostringstream d;
    for (auto const& s : stats) {
        ok = ok && s.z <= c.zero_mean_z;
        d << "(" << s.i + 1 << "," << s.j + 1 << ") |mean|/se " << format_double(s.z) << "; ";
    }
    d << "N = " << N;
    report(6, ok, d.str());
}

// ---- criterion 7: Gronwall checker ----

void gronwall_criterion()
{
    bool ok = true;
    std::ostringstream d;
    double dt = 1e-3;
    int steps = 5000;
    std::vector<double> t;
    for (int k = 0; k <= steps; ++k)
        t.push_back(k * dt);
    for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{1.0, 2.0}, std::pair{1.0, 1.0}}) {
        double bound = (a / b) * (a / b);
        for (double f0 : {0.1, bound}) {
            // f' = -g (a - b sqrt f) by RK4, g constant and small enough that f stays
            // positive over the horizon
            double gc = f0 / (2 * a * steps * dt);
            auto gf = [gc](double) { return gc; };
            auto rhs = [&](double s, double f) {
                return -gf(s) * (a - b * std::sqrt(std::max(f, 0.0)));
            };
            std::vector<double> f{f0}, g{gf(0.0)};
            for (int k = 0; k < steps; ++k) {
                double s = t[static_cast<std::size_t>(k)], y = f.back();
                double k1 = rhs(s, y), k2 = rhs(s + dt / 2, y + dt / 2 * k1),
                       k3 = rhs(s + dt / 2, y + dt / 2 * k2), k4 = rhs(s + dt, y + dt * k3);
                f.push_back(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
                g.push_back(gf(s + dt));
            }
            auto r = gronwall_check(t, f, g, a, b);
            bool here = r.precondition_ok && r.bound_holds && r.max_f <= bound * (1 + 1e-8);
            ok = ok && here;
            d << "(" << a << "," << b << ") f0 " << format_double(f0) << " max "
              << format_double(r.max_f) << (here ? "" : " FAILED") << "; ";
        }
    }
    report(7, ok, d.str());
}

// ---- criterion 8: determinism across worker counts ----

bool same_csvs(fs::path const& a, fs::path const& b, std::string& detail)
{
    bool ok = true;
    int count = 0;
    for (auto const& ent : fs::recursive_directory_iterator(a)) {
        if (ent.path().extension() != ".csv" && ent.path().extension() != ".dat")
            continue;
        auto rel = fs::relative(ent.path(), a);
        bool eq = fs::exists(b / rel) && slurp(ent.path()) == slurp(b / rel);
        ok = ok && eq;
        ++count;
        if (!eq)
            detail += rel.string() + " differs; ";
    }
    detail += std::to_string(count) + " files compared; ";
    return ok && count > 0;
}

void determinism_criterion()
{
    auto root = fs::temp_directory_path() / "mfl_acceptance";
    fs::remove_all(root);
    auto eta = load("eta_study.cfg");
    auto path = load("path_study.cfg");
    path.particle_schedule = {64, 256};
    path.seeds = 4;
    auto diag = eta;
    diag.mode = RunMode::diagnostics;
    diag.eta = 0.4;
    diag.particles = 2000;
    bool ok = true;
    std::string d;
    for (auto* cfg : {&eta, &path, &diag}) {
        std::vector<fs::path> dirs;
        for (int j : {1, 3, 2}) {
            auto c = *cfg;
            c.output_dir = (root / (std::string(to_string(c.mode)) + "_j" + std::to_string(j)))
                               .string();
            RunOptions opt;
            opt.jobs = j;
            auto r = run(c, opt);
            ok = ok && r.exit_code != kExitAbort && r.exit_code != kExitConfig;
            dirs.push_back(c.output_dir);
        }
        d += std::string(to_string(cfg->mode)) + ": ";
        ok = same_csvs(dirs[0], dirs[1], d) && ok;
        ok = same_csvs(dirs[0], dirs[2], d) && ok;
    }
    d += "jobs 1, 3, 2";
    fs::remove_all(root);
    report(8, ok, d);
}

}  // namespace

int main()
{
    try {
        eta_criteria();
        mollifier_criterion();
        path_criterion();
        conservation_criterion(path_report);
        zero_mean_criterion();
        gronwall_criterion();
        determinism_criterion();
    } catch (std::exception const& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        return 2;
    }
    std::sort(lines.begin(), lines.end(), [](Line const& a, Line const& b) { return a.id < b.id; });
    int failed = 0;
    std::cout << "\nsummary\n";
    for (auto const& l : lines) {
        std::cout << "  " << l.id << " " << (l.passed ? "PASS" : "FAIL") << "\n";
        failed += l.passed ? 0 : 1;
    }
    std::cout << failed << " of " << lines.size() << " criteria failed" << std::endl;
    return failed == 0 ? 0 : 1;
}
