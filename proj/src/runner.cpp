#include "mfl/runner.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mfl/analysis.hpp"
#include "mfl/grid_io.hpp"
#include "mfl/particles.hpp"
#include "mfl/pde.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace mfl {

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void write_file_atomic(fs::path const& path, std::string_view contents)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out)
            throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

std::string hex64(std::uint64_t v)
{
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

json number(double v)
{
    if (std::isfinite(v))
        return v;
    return format_double(v);
}

json criteria_json(std::vector<Criterion> const& cs)
{
    json out = json::array();
    for (auto const& c : cs)
        out.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return out;
}

json smallness_json(SmallnessResult const& s)
{
    return {{"passes", s.passes},
            {"lhs", number(s.lhs)},
            {"rhs", number(s.rhs)},
            {"gamma_margin", number(s.gamma_margin)}};
}

/// Per-run state shared by every mode.
class Session {
  public:
    Session(ExperimentConfig const& config, RunOptions const& options)
        : config_(config), options_(options), dir_(config.output_dir),
          started_(std::chrono::steady_clock::now())
    {
        fs::create_directories(dir_);
        resolved_ = format_config(config);
        write_text("config.resolved", resolved_);
    }

    fs::path const& dir() const { return dir_; }
    std::uint64_t params_hash() const { return fnv1a(resolved_); }

    std::ostream* log() const { return options_.log; }

    void note(std::string const& line) const
    {
        if (options_.log)
            *options_.log << line << '\n';
    }

    void write_text(std::string const& name, std::string_view text)
    {
        write_file_atomic(dir_ / name, text);
        track(name);
    }

    void track(std::string const& name)
    {
        if (std::find(files_.begin(), files_.end(), name) == files_.end())
            files_.push_back(name);
    }

    void add(Criterion c) { outcome.criteria.push_back(std::move(c)); }
    void add_all(std::vector<Criterion> const& cs)
    {
        for (auto const& c : cs)
            add(c);
    }

    void abort(std::string reason)
    {
        if (!outcome.abort_reason)
            outcome.abort_reason = std::move(reason);
    }

    RunOutcome finish(json summary)
    {
        for (auto const& c : outcome.criteria)
            note(std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail);
        if (outcome.abort_reason) {
            note("ABORT " + *outcome.abort_reason);
            outcome.exit_code = kExitAbort;
        } else {
            bool ok = std::all_of(outcome.criteria.begin(), outcome.criteria.end(),
                                  [](Criterion const& c) { return c.passed; });
            outcome.exit_code = ok ? kExitPass : kExitCriterion;
        }
        summary["mode"] = std::string(to_string(config_.mode));
        summary["criteria"] = criteria_json(outcome.criteria);
        summary["abort_reason"] = outcome.abort_reason ? json(*outcome.abort_reason) : json();
        summary["exit_code"] = outcome.exit_code;
        write_text("summary.json", summary.dump(2) + "\n");

        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_)
                          .count();
        json manifest;
        manifest["software"] = {{"name", "mfl"}, {"version", std::string(kVersion)}};
        manifest["mode"] = std::string(to_string(config_.mode));
        manifest["resolved_config"] = resolved_;
        manifest["params_hash"] = hex64(params_hash());
        manifest["jobs"] = options_.jobs;
        manifest["wall_clock_seconds"] = wall;
        manifest["exit_code"] = outcome.exit_code;
        manifest["abort_reason"] = summary["abort_reason"];
        manifest["criteria"] = criteria_json(outcome.criteria);
        json files = json::array();
        for (auto const& f : files_) {
            std::error_code ec;
            auto size = fs::file_size(dir_ / f, ec);
            files.push_back({{"path", f}, {"bytes", ec ? -1 : static_cast<long long>(size)}});
        }
        manifest["files"] = files;
        outcome.manifest = dir_ / "manifest.json";
        write_file_atomic(outcome.manifest, manifest.dump(2) + "\n");
        return outcome;
    }

    RunOutcome outcome;

  private:
    ExperimentConfig const& config_;
    RunOptions options_;
    fs::path dir_;
    std::string resolved_;
    std::vector<std::string> files_;
    std::chrono::steady_clock::time_point started_;
};

std::vector<Criterion> trace_criteria(DiagnosticsTrace const& trace, Thresholds const& th)
{
    double drift = 0.0;
    double lowest = std::numeric_limits<double>::infinity();
    auto const& first = trace.records.front();
    for (auto const& r : trace.records) {
        for (std::size_t i = 0; i < r.mass.size(); ++i) {
            double m0 = first.mass[i];
            drift = std::max(drift, std::abs(r.mass[i] - m0) / (m0 != 0.0 ? std::abs(m0) : 1.0));
            lowest = std::min(lowest, r.min[i]);
        }
    }
    return {{"mass_conservation", drift <= th.mass_drift,
             "max relative drift " + format_double(drift)},
            {"nonnegativity", lowest >= th.min_value, "min value " + format_double(lowest)}};
}

std::string csv_trace(DiagnosticsTrace const& trace)
{
    std::ostringstream s;
    write_trace_csv(s, trace);
    return s.str();
}

SystemParams pde_params(ExperimentConfig const& c, StudySetup const& setup, PdeMode mode)
{
    return mode == PdeMode::nonlocal ? setup.nonlocal_params(*c.eta) : setup.local_params();
}

void write_snapshots(Session& s, SolveResult const& r, std::string const& prefix)
{
    fs::create_directories(s.dir() / "snapshots");
    json m;
    m["params_hash"] = hex64(s.params_hash());
    json snaps = json::array();
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        json files = json::array();
        for (std::size_t i = 0; i < r.snapshots[k].u.size(); ++i) {
            std::ostringstream name;
            name << "snapshots/" << prefix << "_" << std::setw(4) << std::setfill('0') << k
                 << "_s" << (i + 1) << ".bin";
            save_grid(s.dir() / name.str(), r.snapshots[k].u[i]);
            s.track(name.str());
            files.push_back(name.str());
        }
        snaps.push_back({{"index", k}, {"t", r.snapshots[k].time}, {"files", files}});
    }
    m["snapshots"] = snaps;
    s.write_text("snapshots/" + prefix + "_manifest.json", m.dump(2) + "\n");
}

RunOutcome run_solve(ExperimentConfig const& c, Session& s)
{
    auto setup = c.study_setup();
    auto params = pde_params(c, setup, c.pde_mode);
    State u0 = State::initial(setup.initial);
    auto small = smallness_check(u0, params, setup.hs_orders[0], c.c_star);
    if (!small.passes)
        s.note("warning: smallness condition fails (lhs " + format_double(small.lhs) + " > rhs "
               + format_double(small.rhs) + "); proceeding");
    auto r = solve(u0, params, c.pde_mode);
    s.write_text("trace.csv", csv_trace(r.trace));
    write_snapshots(s, r, c.pde_mode == PdeMode::nonlocal ? "nonlocal" : "local");
    if (r.abort_reason)
        s.abort(*r.abort_reason);
    s.add_all(trace_criteria(r.trace, c.thresholds));
    auto hs = hs_energy_monitor(r.trace, params, c.c_star);
    json summary;
    summary["smallness"] = smallness_json(small);
    summary["hs_monitor"] = {{"steps", hs.steps},
                             {"fraction_ok", hs.fraction_ok},
                             {"max_relative_increase", number(hs.max_relative_increase)},
                             {"gronwall_precondition", hs.gronwall.precondition_ok},
                             {"gronwall_bound_holds", hs.gronwall.bound_holds}};
    summary["final_time"] = r.final.time;
    return s.finish(summary);
}

std::vector<DriftSeries> drift_pair(ExperimentConfig const& c, StudySetup const& setup,
                                    Session& sess)
{
    std::vector<DriftSeries> out;
    State u0 = State::initial(setup.initial);
    for (auto mode : {PdeMode::nonlocal, PdeMode::local}) {
        auto params = pde_params(c, setup, mode);
        Stepper stepper(params, mode);
        auto r = solve(u0, params, mode);
        if (r.abort_reason)
            throw SolveAborted(std::string(mode == PdeMode::nonlocal ? "nonlocal" : "local")
                               + " solve: " + *r.abort_reason);
        sess.write_text(std::string("trace_") + (mode == PdeMode::nonlocal ? "nonlocal" : "local")
                            + ".csv",
                        csv_trace(r.trace));
        out.push_back(DriftSeries::from_solve(r, stepper));
    }
    return out;
}

RunOutcome run_particles(ExperimentConfig const& c, Session& s, int jobs)
{
    auto setup = c.study_setup();
    auto params = setup.nonlocal_params(*c.eta);
    auto drifts = drift_pair(c, setup, s);
    NoisePlan noise(c.master_seed, c.species, c.particles, c.dim, c.dt, params.steps());
    CoupledOptions opts;
    opts.record_positions = c.trajectories;
    opts.jobs = jobs;
    auto run = run_coupled(params, *params.kernels, drifts[0], drifts[1], setup.initial,
                           c.particles, noise, opts);

    constexpr std::array<std::string_view, 3> mode_names{"interacting", "intermediate", "limit"};
    std::ostringstream sum;
    sum << "t,mode,species,axis,mean,var\n";
    for (auto const& snap : run.summaries)
        for (std::size_t m = 0; m < 3; ++m)
            for (int i = 0; i < c.species; ++i)
                for (int a = 0; a < c.dim; ++a)
                    sum << format_double(snap.t) << ',' << mode_names[m] << ',' << (i + 1) << ','
                        << a << ',' << format_double(snap.mean[m][i][a]) << ','
                        << format_double(snap.var[m][i][a]) << '\n';
    s.write_text("particle_summary.csv", sum.str());

    std::ostringstream pe;
    pe << "t,pairing,path_error,path_error_torus\n";
    for (auto const& snap : run.summaries)
        for (std::size_t p = 0; p < 3; ++p)
            pe << format_double(snap.t) << ',' << to_string(kPairings[p]) << ','
               << format_double(snap.sup[p].unwrapped) << ','
               << format_double(snap.sup[p].torus) << '\n';
    s.write_text("path_errors.csv", pe.str());

    if (c.trajectories) {
        std::ostringstream tr;
        tr << "t,mode,species,particle,x" << (c.dim == 2 ? ",y" : "") << '\n';
        for (std::size_t k = 0; k < run.positions.size(); ++k)
            for (std::size_t m = 0; m < 3; ++m)
                for (int i = 0; i < c.species; ++i)
                    for (int p = 0; p < c.particles; ++p) {
                        auto const& x = run.positions[k][m][static_cast<std::size_t>(i) * c.particles + p];
                        tr << format_double(run.summaries[k].t) << ',' << mode_names[m] << ','
                           << (i + 1) << ',' << p << ',' << format_double(x[0]);
                        if (c.dim == 2)
                            tr << ',' << format_double(x[1]);
                        tr << '\n';
                    }
        s.write_text("trajectories.csv", tr.str());
    }

    s.add({"torus_vs_unwrapped", run.wrap_discrepancy <= c.thresholds.wrap_tolerance,
           "max gap " + format_double(run.wrap_discrepancy)});
    json summary;
    json errs = json::object();
    for (std::size_t p = 0; p < 3; ++p)
        errs[std::string(to_string(kPairings[p]))] = number(run.path_error[p].unwrapped);
    summary["path_error"] = errs;
    summary["particles"] = c.particles;
    summary["master_seed"] = std::to_string(c.master_seed);
    return s.finish(summary);
}

json runs_json(ConvergenceReport const& rep)
{
    json runs = json::array();
    for (auto const& r : rep.runs)
        runs.push_back({{"label", r.label},
                        {"eta", number(r.eta)},
                        {"mass_drift", number(r.mass_drift)},
                        {"min_value", number(r.min_value)},
                        {"seam_max", number(r.seam_max)},
                        {"smallness", smallness_json(r.smallness)},
                        {"hs_max_relative_increase", number(r.hs.max_relative_increase)},
                        {"hs_fraction_ok", r.hs.fraction_ok},
                        {"gronwall_bound_holds", r.hs.gronwall.bound_holds},
                        {"abort_reason", r.abort_reason ? json(*r.abort_reason) : json()}});
    return runs;
}

json fit_json(std::optional<SlopeFit> const& f)
{
    if (!f)
        return json();
    return {{"slope", f->slope},
            {"intercept", f->intercept},
            {"half_width", number(f->half_width)},
            {"points", f->points}};
}

void write_report_common(Session& s, ConvergenceReport const& rep)
{
    std::ostringstream samples;
    write_samples_csv(samples, rep.samples);
    s.write_text("samples.csv", samples.str());
    for (auto const& r : rep.runs)
        s.write_text("trace_" + r.label + ".csv", csv_trace(r.trace));
    if (!rep.complete)
        s.abort(rep.incomplete_reason);
    s.add_all(rep.criteria);
}

RunOutcome run_eta_study(ExperimentConfig const& c, Session& s, int jobs)
{
    auto rep = eta_convergence_study(c.study_setup(), c.eta_schedule, c.thresholds, jobs);
    write_report_common(s, rep);
    std::ostringstream dat;
    dat << "# log_eta log_error\n";
    for (auto const& e : rep.samples)
        if (e.field_error_sup_t > 0.0)
            dat << format_double(std::log(e.eta)) << ' '
                << format_double(std::log(e.field_error_sup_t)) << '\n';
    s.write_text("eta_error.dat", dat.str());
    json summary;
    summary["fit"] = fit_json(rep.fit);
    summary["resolved_fit"] = fit_json(rep.resolved_fit);
    summary["degenerate"] = rep.degenerate;
    summary["complete"] = rep.complete;
    summary["runs"] = runs_json(rep);
    return s.finish(summary);
}

RunOutcome run_path_study(ExperimentConfig const& c, Session& s, int jobs)
{
    PathStudyOptions opts;
    opts.etas = c.eta_schedule;
    opts.particles = c.particle_schedule;
    opts.seeds = c.seeds;
    opts.master_seed = c.master_seed;
    opts.jobs = jobs;
    auto rep = path_error_study(c.study_setup(), opts, c.thresholds);
    write_report_common(s, rep);

    std::ostringstream ps;
    ps << "eta,N,pairing,mean,se\n";
    for (auto const& p : rep.path_summaries)
        ps << format_double(p.eta) << ',' << p.particles << ',' << to_string(p.pairing) << ','
           << format_double(p.error.mean) << ',' << format_double(p.error.se) << '\n';
    s.write_text("path_summary.csv", ps.str());

    std::ostringstream dat;
    dat << "# log_eta log_mean_error (intermediate_vs_limit, per N)\n";
    for (auto const& p : rep.path_summaries)
        if (p.pairing == Pairing::intermediate_vs_limit && p.error.mean > 0.0)
            dat << format_double(std::log(p.eta)) << ' ' << format_double(std::log(p.error.mean))
                << " # N=" << p.particles << '\n';
    s.write_text("path_error.dat", dat.str());

    json summary;
    summary["degenerate"] = rep.degenerate;
    summary["complete"] = rep.complete;
    json means = json::array();
    for (auto const& p : rep.path_summaries)
        means.push_back({{"eta", p.eta},
                         {"N", p.particles},
                         {"pairing", std::string(to_string(p.pairing))},
                         {"mean", number(p.error.mean)},
                         {"se", number(p.error.se)}});
    summary["path_means"] = means;
    summary["runs"] = runs_json(rep);
    return s.finish(summary);
}

RunOutcome run_smallness(ExperimentConfig const& c, Session& s)
{
    auto setup = c.study_setup();
    auto params = setup.local_params();
    State u0 = State::initial(setup.initial);
    auto r = smallness_check(u0, params, setup.hs_orders[0], c.c_star);
    if (s.log())
        *s.log() << "lhs " << format_double(r.lhs) << "\nrhs " << format_double(r.rhs)
                 << "\ngamma_margin " << format_double(r.gamma_margin) << '\n';
    s.add({"smallness", r.passes,
           "||u0||_H^" + format_double(setup.hs_orders[0]) + " = " + format_double(r.lhs)
               + " vs sigma/(C* sum A) = " + format_double(r.rhs)});
    json summary;
    summary["smallness"] = smallness_json(r);
    summary["s"] = setup.hs_orders[0];
    summary["c_star"] = c.c_star;
    return s.finish(summary);
}

RunOutcome run_diagnostics(ExperimentConfig const& c, Session& s)
{
    auto setup = c.study_setup();
    auto params = setup.nonlocal_params(*c.eta);
    State u0 = State::initial(setup.initial);
    int n = c.species;
    json summary;

    auto rec = diagnose(u0, params);
    summary["initial"] = {{"l2", rec.l2},
                          {"hs_a", rec.hs_a},
                          {"hs_b", rec.hs_b},
                          {"H", rec.entropy},
                          {"H1", number(rec.entropy_weighted)}};

    // zero-mean fluctuation at t = 0
    NoisePlan noise(c.master_seed, n, c.particles, c.dim, c.dt, params.steps());
    ParticleEnsemble ens;
    ens.domain = params.grid;
    ens.species = n;
    ens.particles = c.particles;
    ens.sigma = c.sigma;
    ens.positions = sample_initials(setup.initial, c.particles, noise);
    Stepper stepper(params, PdeMode::nonlocal);
    std::vector<std::vector<GridField>> pair_fields;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            pair_fields.push_back(stepper.pair_field(u0, i, j));
    auto stats = zero_mean_diagnostic(ens, *params.kernels, pair_fields);
    std::ostringstream zm;
    zm << "i,j,axis,mean,se\n";
    double worst = 0.0;
    for (auto const& z : stats) {
        for (int a = 0; a < c.dim; ++a)
            zm << (z.i + 1) << ',' << (z.j + 1) << ',' << a << ',' << format_double(z.mean[a])
               << ',' << format_double(z.se[a]) << '\n';
        worst = std::max(worst, z.z);
    }
    s.write_text("zero_mean.csv", zm.str());
    s.add({"zero_mean_fluctuation", worst <= c.zero_mean_z,
           "max |mean|/se " + format_double(worst) + " at N = " + std::to_string(c.particles)});

    // mollifier error over the eta schedule, restricted to eta >= 4h
    double h = params.grid.spacing();
    std::vector<double> etas;
    for (double e : c.eta_schedule)
        if (e >= 4.0 * h)
            etas.push_back(e);
    std::sort(etas.begin(), etas.end(), std::greater<>());
    if (etas.size() >= 2) {
        auto profiles = c.profiles();
        std::ostringstream me;
        me << "eta,i,j,error,ratio\n";
        bool ok = true;
        std::ostringstream detail;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                auto const& prof = profiles[static_cast<std::size_t>(i * n + j)];
                if (prof.coeff() == 0.0)
                    continue;
                double prev = std::numeric_limits<double>::quiet_NaN();
                for (std::size_t e = 0; e < etas.size(); ++e) {
                    ScaledKernel k(prof, etas[e], c.dim);
                    double err = mollifier_error(u0.u[static_cast<std::size_t>(j)], k,
                                                 prof.first_moment(c.dim));
                    double ratio = e > 0 ? err / prev : std::numeric_limits<double>::quiet_NaN();
                    me << format_double(etas[e]) << ',' << (i + 1) << ',' << (j + 1) << ','
                       << format_double(err) << ',' << format_double(ratio) << '\n';
                    if (e > 0) {
                        bool halved = std::abs(etas[e] * 2.0 - etas[e - 1]) <= 1e-12 * etas[e - 1];
                        bool in = ratio >= c.mollifier_ratio_min && ratio <= c.mollifier_ratio_max;
                        if (halved) {
                            ok = ok && in;
                            detail << "(" << (i + 1) << "," << (j + 1) << ") "
                                   << format_double(etas[e - 1]) << "->" << format_double(etas[e])
                                   << ": " << format_double(ratio) << "; ";
                        }
                    }
                    prev = err;
                }
            }
        }
        s.write_text("mollifier.csv", me.str());
        s.add({"mollifier_ratio", ok, detail.str()});
    }
    return s.finish(summary);
}

}  // namespace

RunOutcome run(ExperimentConfig const& config, RunOptions const& options)
{
    Session s(config, options);
    int jobs = std::max(1, options.jobs);
    try {
        switch (config.mode) {
        case RunMode::solve_pde:
            return run_solve(config, s);
        case RunMode::simulate_particles:
            return run_particles(config, s, jobs);
        case RunMode::eta_study:
            return run_eta_study(config, s, jobs);
        case RunMode::path_study:
            return run_path_study(config, s, jobs);
        case RunMode::check_smallness:
            return run_smallness(config, s);
        case RunMode::diagnostics:
            return run_diagnostics(config, s);
        }
    } catch (std::exception const& e) {
        s.abort(e.what());
    }
    return s.finish(json::object());
}

}  // namespace mfl
