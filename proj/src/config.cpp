#include "mfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "mfl/grid_io.hpp"

namespace mfl {

namespace {

constexpr std::array<std::string_view, 6> kModeNames{
    "solve_pde", "simulate_particles", "eta_study", "path_study", "check_smallness", "diagnostics"};

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string const& s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto comma = s.find(',', start);
        out.push_back(trim(std::string_view(s).substr(start, comma - start)));
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    return out;
}

// Known keys; initial.species<k> is handled separately.
std::set<std::string> const& known_keys()
{
    static std::set<std::string> const keys{
        "mode",
        "system.species",
        "system.sigma",
        "kernels.family",
        "kernels.coeff",
        "kernels.eta",
        "moments.override",
        "grid.dim",
        "grid.length",
        "grid.points",
        "time.dt",
        "time.t_end",
        "time.snapshot_interval",
        "schedule.eta",
        "schedule.particles",
        "schedule.seeds",
        "schedule.master_seed",
        "particles.count",
        "pde.mode",
        "pde.dealias",
        "pde.cfl",
        "diagnostics.hs_orders",
        "smallness.c_star",
        "criteria.slope_min",
        "criteria.slope_max",
        "criteria.mass_drift",
        "criteria.min_value",
        "criteria.hs_tolerance",
        "criteria.trend_fraction",
        "criteria.wrap_tolerance",
        "criteria.zero_mean_z",
        "criteria.mollifier_ratio_min",
        "criteria.mollifier_ratio_max",
        "output.dir",
        "output.trajectories",
    };
    return keys;
}

class Reader {
  public:
    Reader(std::map<std::string, std::string> entries, std::vector<std::string>& errors)
        : entries_(std::move(entries)), errors_(errors)
    {
    }

    bool has(std::string const& key) const { return entries_.count(key) > 0; }

    std::optional<std::string> raw(std::string const& key, bool required)
    {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (required)
                errors_.push_back(key + ": missing required field");
            return std::nullopt;
        }
        return it->second;
    }

    std::optional<double> real(std::string const& key, bool required)
    {
        auto v = raw(key, required);
        if (!v)
            return std::nullopt;
        return to_real(key, *v);
    }

    std::optional<long long> integer(std::string const& key, bool required)
    {
        auto v = raw(key, required);
        if (!v)
            return std::nullopt;
        return to_integer(key, *v);
    }

    std::optional<std::vector<double>> reals(std::string const& key, bool required)
    {
        auto v = raw(key, required);
        if (!v)
            return std::nullopt;
        std::vector<double> out;
        for (auto const& item : split_list(*v)) {
            auto x = to_real(key, item);
            if (!x)
                return std::nullopt;
            out.push_back(*x);
        }
        return out;
    }

    std::optional<std::vector<long long>> integers(std::string const& key, bool required)
    {
        auto v = raw(key, required);
        if (!v)
            return std::nullopt;
        std::vector<long long> out;
        for (auto const& item : split_list(*v)) {
            auto x = to_integer(key, item);
            if (!x)
                return std::nullopt;
            out.push_back(*x);
        }
        return out;
    }

    std::optional<bool> boolean(std::string const& key)
    {
        auto v = raw(key, false);
        if (!v)
            return std::nullopt;
        if (*v == "true" || *v == "on")
            return true;
        if (*v == "false" || *v == "off")
            return false;
        errors_.push_back(key + ": expected true/false, got '" + *v + "'");
        return std::nullopt;
    }

    void error(std::string msg) { errors_.push_back(std::move(msg)); }

  private:
    std::optional<double> to_real(std::string const& key, std::string const& text)
    {
        try {
            double v = parse_double(text);
            if (std::isfinite(v))
                return v;
        } catch (std::exception const&) {
        }
        errors_.push_back(key + ": expected a finite number, got '" + text + "'");
        return std::nullopt;
    }

    std::optional<long long> to_integer(std::string const& key, std::string const& text)
    {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec == std::errc() && ptr == text.data() + text.size() && !text.empty())
            return v;
        errors_.push_back(key + ": expected an integer, got '" + text + "'");
        return std::nullopt;
    }

    std::map<std::string, std::string> entries_;
    std::vector<std::string>& errors_;
};

std::string join(std::vector<std::string> const& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0)
            out += ", ";
        out += items[i];
    }
    return out;
}

std::string join_reals(std::vector<double> const& v)
{
    std::vector<std::string> items;
    for (double x : v)
        items.push_back(format_double(x));
    return join(items);
}

}  // namespace

std::string_view to_string(RunMode mode) { return kModeNames[static_cast<std::size_t>(mode)]; }

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error([&] {
          std::string msg = "invalid configuration:";
          for (auto const& e : errors)
              msg += "\n  " + e;
          return msg;
      }()),
      errors_(std::move(errors))
{
}

GridSpec ExperimentConfig::grid() const { return GridSpec::make(dim, length, points); }

std::array<double, 2> ExperimentConfig::resolved_hs_orders() const
{
    if (hs_orders)
        return *hs_orders;
    return {dim / 2.0 + 2.0, dim / 2.0 + 2.5};
}

std::vector<KernelProfile> ExperimentConfig::profiles() const
{
    std::vector<KernelProfile> out;
    for (std::size_t q = 0; q < kernel_coeff.size(); ++q)
        out.push_back(make_profile(kernel_family[q], kernel_coeff[q]));
    return out;
}

std::vector<GridField> ExperimentConfig::initial_fields() const
{
    std::vector<GridField> out;
    auto g = grid();
    for (auto const& blobs : initial)
        out.push_back(make_density(blobs, g));
    return out;
}

StudySetup ExperimentConfig::study_setup() const
{
    StudySetup s;
    s.species = species;
    s.sigma = sigma;
    s.profiles = profiles();
    if (moment_override) {
        SquareMatrix a(species);
        a.v = *moment_override;
        s.moment_override = a;
    }
    s.grid = grid();
    s.dt = dt;
    s.t_end = t_end;
    s.snapshot_interval = snapshot_interval;
    s.dealias = dealias;
    s.cfl = cfl;
    s.hs_orders = resolved_hs_orders();
    s.initial = initial_fields();
    s.c_star = c_star;
    return s;
}

ExperimentConfig parse_config(std::string_view text)
{
    std::vector<std::string> errors;
    std::map<std::string, std::string> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
            continue;
        }
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        bool is_initial = key.rfind("initial.species", 0) == 0;
        if (!is_initial && known_keys().count(key) == 0) {
            errors.push_back(key + ": unknown key");
            continue;
        }
        if (!entries.emplace(key, value).second)
            errors.push_back(key + ": duplicate key");
    }

    std::set<std::string> initial_keys;
    for (auto const& [k, v] : entries)
        if (k.rfind("initial.species", 0) == 0)
            initial_keys.insert(k);

    Reader r(entries, errors);
    ExperimentConfig c;

    if (auto m = r.raw("mode", true)) {
        auto it = std::find(kModeNames.begin(), kModeNames.end(), *m);
        if (it == kModeNames.end())
            r.error("mode: unknown mode '" + *m + "'");
        else
            c.mode = static_cast<RunMode>(it - kModeNames.begin());
    }

    bool species_ok = false;
    if (auto n = r.integer("system.species", true)) {
        if (*n < 1 || *n > 16)
            r.error("system.species: must be in [1, 16]");
        else {
            c.species = static_cast<int>(*n);
            species_ok = true;
        }
    }
    std::size_t nn = static_cast<std::size_t>(c.species * c.species);

    if (auto s = r.reals("system.sigma", true)) {
        if (s->size() == 1 && species_ok)
            s->assign(static_cast<std::size_t>(c.species), s->front());
        if (species_ok && s->size() != static_cast<std::size_t>(c.species))
            r.error("system.sigma: expected " + std::to_string(c.species) + " entries");
        else if (std::any_of(s->begin(), s->end(), [](double v) { return !(v > 0.0); }))
            r.error("system.sigma: every diffusion coefficient must be > 0");
        else
            c.sigma = *s;
    }

    if (auto fam = r.raw("kernels.family", false)) {
        std::vector<KernelFamily> fams;
        for (auto const& name : split_list(*fam)) {
            try {
                fams.push_back(parse_kernel_family(name));
            } catch (std::exception const&) {
                r.error("kernels.family: unknown family '" + name + "'");
            }
        }
        if (fams.size() == 1 && species_ok)
            fams.assign(nn, fams.front());
        if (species_ok && fams.size() != nn)
            r.error("kernels.family: expected 1 or " + std::to_string(nn) + " entries");
        c.kernel_family = fams;
    } else {
        c.kernel_family.assign(nn, KernelFamily::bump3);
    }
    if (auto coeff = r.reals("kernels.coeff", true)) {
        if (species_ok && coeff->size() != nn)
            r.error("kernels.coeff: expected " + std::to_string(nn) + " entries (row-major)");
        else
            c.kernel_coeff = *coeff;
    }
    if (auto o = r.reals("moments.override", false)) {
        if (species_ok && o->size() != nn)
            r.error("moments.override: expected " + std::to_string(nn) + " entries (row-major)");
        else
            c.moment_override = *o;
    }

    bool grid_ok = true;
    if (auto d = r.integer("grid.dim", true))
        c.dim = static_cast<int>(*d);
    else
        grid_ok = false;
    if (auto L = r.real("grid.length", true))
        c.length = *L;
    else
        grid_ok = false;
    if (auto m = r.integer("grid.points", true))
        c.points = static_cast<int>(*m);
    else
        grid_ok = false;
    if (grid_ok) {
        try {
            (void)c.grid();
        } catch (std::exception const& e) {
            r.error(std::string("grid: ") + e.what());
            grid_ok = false;
        }
    }

    if (auto dt = r.real("time.dt", true)) {
        if (!(*dt > 0.0))
            r.error("time.dt: must be > 0");
        c.dt = *dt;
    }
    if (auto t = r.real("time.t_end", true)) {
        if (!(*t > 0.0))
            r.error("time.t_end: must be > 0");
        c.t_end = *t;
    }
    c.snapshot_interval = r.real("time.snapshot_interval", false).value_or(c.t_end);
    if (c.dt > 0.0 && c.t_end > 0.0) {
        auto multiple = [&](double x) {
            double k = std::round(x / c.dt);
            return k >= 1.0 && std::abs(k * c.dt - x) <= 1e-9 * x;
        };
        if (!multiple(c.t_end))
            r.error("time.t_end: must be a positive multiple of time.dt");
        if (!multiple(c.snapshot_interval))
            r.error("time.snapshot_interval: must be a positive multiple of time.dt");
        else if (multiple(c.t_end)) {
            double k = std::round(c.t_end / c.snapshot_interval);
            if (!(k >= 1.0 && std::abs(k * c.snapshot_interval - c.t_end) <= 1e-9 * c.t_end))
                r.error("time.t_end: must be a multiple of time.snapshot_interval");
        }
    }

    for (int i = 1; species_ok && i <= c.species; ++i) {
        std::string key = "initial.species" + std::to_string(i);
        initial_keys.erase(key);
        auto v = r.raw(key, true);
        if (!v || !grid_ok)
            continue;
        try {
            c.initial.push_back(parse_blobs(*v, c.dim));
        } catch (std::exception const& e) {
            r.error(key + ": " + e.what());
        }
    }
    for (auto const& k : initial_keys)
        r.error(k + ": unknown key");

    auto check_eta = [&](std::string const& key, double eta) {
        if (!grid_ok)
            return;
        if (!(eta > 0.0))
            r.error(key + ": eta must be > 0");
        else if (eta > c.length / 8.0)
            r.error(key + ": eta = " + format_double(eta) + " exceeds L/8 = "
                    + format_double(c.length / 8.0)
                    + "; the kernel support must stay well inside the torus");
        else if (eta <= c.grid().spacing())
            r.error(key + ": eta = " + format_double(eta)
                    + " does not exceed the grid spacing; the kernel would be unresolved");
    };
    if (auto e = r.real("kernels.eta", false)) {
        c.eta = *e;
        check_eta("kernels.eta", *e);
    }
    if (auto e = r.reals("schedule.eta", false)) {
        c.eta_schedule = *e;
        for (double v : *e)
            check_eta("schedule.eta", v);
    }
    if (auto p = r.integers("schedule.particles", false)) {
        for (long long v : *p) {
            if (v < 1 || v > 100000000)
                r.error("schedule.particles: entries must be in [1, 1e8]");
            c.particle_schedule.push_back(static_cast<int>(v));
        }
    }
    if (auto s = r.integer("schedule.seeds", false)) {
        if (*s < 1)
            r.error("schedule.seeds: must be >= 1");
        c.seeds = static_cast<int>(*s);
    }
    if (auto s = r.raw("schedule.master_seed", false)) {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc() || ptr != s->data() + s->size() || s->empty())
            r.error("schedule.master_seed: expected an unsigned 64-bit integer");
        c.master_seed = v;
    }
    if (auto p = r.integer("particles.count", false)) {
        if (*p < 1 || *p > 100000000)
            r.error("particles.count: must be in [1, 1e8]");
        c.particles = static_cast<int>(*p);
    }

    if (auto m = r.raw("pde.mode", false)) {
        if (*m == "nonlocal")
            c.pde_mode = PdeMode::nonlocal;
        else if (*m == "local")
            c.pde_mode = PdeMode::local;
        else
            r.error("pde.mode: expected nonlocal or local");
    }
    if (auto b = r.boolean("pde.dealias"))
        c.dealias = *b;
    if (auto v = r.real("pde.cfl", false)) {
        if (!(*v > 0.0))
            r.error("pde.cfl: must be > 0");
        c.cfl = *v;
    }
    if (auto v = r.reals("diagnostics.hs_orders", false)) {
        if (v->size() != 2 || (*v)[0] < 0.0 || (*v)[1] < 0.0)
            r.error("diagnostics.hs_orders: expected two nonnegative orders");
        else
            c.hs_orders = std::array<double, 2>{(*v)[0], (*v)[1]};
    }
    if (auto v = r.real("smallness.c_star", false)) {
        if (*v < 0.0)
            r.error("smallness.c_star: must be >= 0");
        c.c_star = *v;
    }

    auto& th = c.thresholds;
    th.slope_min = r.real("criteria.slope_min", false).value_or(th.slope_min);
    th.slope_max = r.real("criteria.slope_max", false).value_or(th.slope_max);
    th.mass_drift = r.real("criteria.mass_drift", false).value_or(th.mass_drift);
    th.min_value = r.real("criteria.min_value", false).value_or(th.min_value);
    th.hs_tolerance = r.real("criteria.hs_tolerance", false).value_or(th.hs_tolerance);
    th.trend_fraction = r.real("criteria.trend_fraction", false).value_or(th.trend_fraction);
    th.wrap_tolerance = r.real("criteria.wrap_tolerance", false).value_or(th.wrap_tolerance);
    c.zero_mean_z = r.real("criteria.zero_mean_z", false).value_or(c.zero_mean_z);
    c.mollifier_ratio_min =
        r.real("criteria.mollifier_ratio_min", false).value_or(c.mollifier_ratio_min);
    c.mollifier_ratio_max =
        r.real("criteria.mollifier_ratio_max", false).value_or(c.mollifier_ratio_max);
    if (th.slope_min > th.slope_max)
        r.error("criteria.slope_min: exceeds criteria.slope_max");
    if (th.trend_fraction < 0.0 || th.trend_fraction > 1.0)
        r.error("criteria.trend_fraction: must be in [0, 1]");

    if (auto d = r.raw("output.dir", false)) {
        if (d->empty())
            r.error("output.dir: must not be empty");
        c.output_dir = *d;
    }
    if (auto b = r.boolean("output.trajectories"))
        c.trajectories = *b;

    // mode-specific requirements
    bool needs_eta = c.mode == RunMode::simulate_particles || c.mode == RunMode::diagnostics
                     || (c.mode == RunMode::solve_pde && c.pde_mode == PdeMode::nonlocal);
    if (needs_eta && !c.eta)
        r.error("kernels.eta: missing required field for mode " + std::string(to_string(c.mode)));
    if (c.mode == RunMode::eta_study) {
        std::set<double> distinct(c.eta_schedule.begin(), c.eta_schedule.end());
        if (distinct.size() < 3)
            r.error("schedule.eta: eta_study needs at least 3 distinct values");
    }
    if (c.mode == RunMode::path_study) {
        if (c.eta_schedule.empty())
            r.error("schedule.eta: missing required field for mode path_study");
        if (c.particle_schedule.empty())
            r.error("schedule.particles: missing required field for mode path_study");
        if (grid_ok && c.dim != 1)
            r.error("grid.dim: path_study supports d = 1 only");
    }

    if (!errors.empty())
        throw ConfigError(std::move(errors));
    return c;
}

std::string format_config(ExperimentConfig const& c)
{
    std::ostringstream out;
    auto kv = [&](std::string_view k, std::string const& v) { out << k << " = " << v << '\n'; };
    kv("mode", std::string(to_string(c.mode)));
    kv("system.species", std::to_string(c.species));
    kv("system.sigma", join_reals(c.sigma));
    std::vector<std::string> fams;
    for (auto f : c.kernel_family)
        fams.emplace_back(to_string(f));
    kv("kernels.family", join(fams));
    kv("kernels.coeff", join_reals(c.kernel_coeff));
    if (c.eta)
        kv("kernels.eta", format_double(*c.eta));
    if (c.moment_override)
        kv("moments.override", join_reals(*c.moment_override));
    kv("grid.dim", std::to_string(c.dim));
    kv("grid.length", format_double(c.length));
    kv("grid.points", std::to_string(c.points));
    kv("time.dt", format_double(c.dt));
    kv("time.t_end", format_double(c.t_end));
    kv("time.snapshot_interval", format_double(c.snapshot_interval));
    for (std::size_t i = 0; i < c.initial.size(); ++i)
        kv("initial.species" + std::to_string(i + 1), format_blobs(c.initial[i], c.dim));
    if (!c.eta_schedule.empty())
        kv("schedule.eta", join_reals(c.eta_schedule));
    if (!c.particle_schedule.empty()) {
        std::vector<std::string> items;
        for (int n : c.particle_schedule)
            items.push_back(std::to_string(n));
        kv("schedule.particles", join(items));
    }
    kv("schedule.seeds", std::to_string(c.seeds));
    kv("schedule.master_seed", std::to_string(c.master_seed));
    kv("particles.count", std::to_string(c.particles));
    kv("pde.mode", c.pde_mode == PdeMode::nonlocal ? "nonlocal" : "local");
    kv("pde.dealias", c.dealias ? "true" : "false");
    kv("pde.cfl", format_double(c.cfl));
    if (c.hs_orders)
        kv("diagnostics.hs_orders", join_reals({(*c.hs_orders)[0], (*c.hs_orders)[1]}));
    kv("smallness.c_star", format_double(c.c_star));
    auto const& th = c.thresholds;
    kv("criteria.slope_min", format_double(th.slope_min));
    kv("criteria.slope_max", format_double(th.slope_max));
    kv("criteria.mass_drift", format_double(th.mass_drift));
    kv("criteria.min_value", format_double(th.min_value));
    kv("criteria.hs_tolerance", format_double(th.hs_tolerance));
    kv("criteria.trend_fraction", format_double(th.trend_fraction));
    kv("criteria.wrap_tolerance", format_double(th.wrap_tolerance));
    kv("criteria.zero_mean_z", format_double(c.zero_mean_z));
    kv("criteria.mollifier_ratio_min", format_double(c.mollifier_ratio_min));
    kv("criteria.mollifier_ratio_max", format_double(c.mollifier_ratio_max));
    kv("output.dir", c.output_dir);
    kv("output.trajectories", c.trajectories ? "true" : "false");
    return out.str();
}

}  // namespace mfl
