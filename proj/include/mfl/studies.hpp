#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfl/analysis.hpp"
#include "mfl/kernels.hpp"
#include "mfl/particles.hpp"
#include "mfl/pde.hpp"

namespace mfl {

/// Everything a study needs except its schedules.
struct StudySetup {
    int species = 1;
    std::vector<double> sigma;
    /// n*n row-major, eta-free profiles.
    std::vector<KernelProfile> profiles;
    /// Replaces the kernel moments a_ij of the local system when present.
    std::optional<SquareMatrix> moment_override;
    GridSpec grid;
    double dt = 1e-3;
    double t_end = 0.1;
    double snapshot_interval = 1e-2;
    bool dealias = true;
    double cfl = 0.25;
    std::array<double, 2> hs_orders{2.5, 3.0};
    std::vector<GridField> initial;
    double c_star = 1.0;

    SystemParams nonlocal_params(double eta) const;
    SystemParams local_params() const;
    bool interactions_off() const;
};

struct ErrorSample {
    double eta = 0.0;
    int particles = 0;
    std::uint64_t seed = 0;
    double t = 0.0;
    std::optional<Pairing> pairing;
    /// ||u_eta - u||_{L2} at t
    double field_error_l2 = std::numeric_limits<double>::quiet_NaN();
    /// sup over snapshot times of the L2 error
    double field_error_sup_t = std::numeric_limits<double>::quiet_NaN();
    /// ||grad(u_eta - u)||_{L2(0,t;L2)}
    double grad_error_l2t = std::numeric_limits<double>::quiet_NaN();
    double path_error = std::numeric_limits<double>::quiet_NaN();
    double path_error_torus = std::numeric_limits<double>::quiet_NaN();
};

struct Criterion {
    std::string name;
    bool passed;
    std::string detail;
};

/// Per-PDE-run checks.
struct RunCheck {
    std::string label;
    double eta;  // NaN for the local run
    double mass_drift;
    double min_value;
    double seam_max;
    SmallnessResult smallness;
    HsEnergyReport hs;
    std::optional<std::string> abort_reason;
    DiagnosticsTrace trace;
};

struct PathSummary {
    double eta;
    int particles;
    Pairing pairing;
    MeanSe error;
};

struct ConvergenceReport {
    std::vector<ErrorSample> samples;
    std::optional<SlopeFit> fit;
    /// Fit restricted to eta >= 4h, reported for context.
    std::optional<SlopeFit> resolved_fit;
    bool degenerate = false;
    bool complete = true;
    std::string incomplete_reason;
    std::vector<RunCheck> runs;
    std::vector<PathSummary> path_summaries;
    std::vector<Criterion> criteria;

    bool passed() const;
};

struct Thresholds {
    double slope_min = 0.8;
    double slope_max = 1.3;
    double mass_drift = 1e-10;
    double min_value = -1e-8;
    double hs_tolerance = 1e-8;
    double trend_fraction = 0.8;
    double wrap_tolerance = 1e-6;

    bool operator==(Thresholds const&) const = default;
};

/// Nonlocal solves for every eta plus one local solve; fits the slope of the
/// sup-in-time L2 error against eta.
ConvergenceReport eta_convergence_study(StudySetup const& setup, std::vector<double> const& etas,
                                        Thresholds const& thresholds, int jobs = 1);

struct PathStudyOptions {
    std::vector<double> etas;
    std::vector<int> particles;
    int seeds = 16;
    std::uint64_t master_seed = 1;
    int jobs = 1;
};

/// Coupled particle runs over etas x particles x seeds (d = 1). Seeds are
/// shared across every (eta, N) cell.
ConvergenceReport path_error_study(StudySetup const& setup, PathStudyOptions const& options,
                                   Thresholds const& thresholds);

/// Seed of replicate r, derived from the master seed by SplitMix64.
std::uint64_t replicate_seed(std::uint64_t master, int replicate);

/// Rows: eta,N,seed,t,pairing,field_error_l2,field_error_sup_t,grad_error_l2t,
/// path_error,path_error_torus
void write_samples_csv(std::ostream& out, std::vector<ErrorSample> const& samples);
void write_trace_csv(std::ostream& out, DiagnosticsTrace const& trace);

}  // namespace mfl
