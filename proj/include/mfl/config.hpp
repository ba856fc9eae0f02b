#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mfl/initial.hpp"
#include "mfl/kernels.hpp"
#include "mfl/pde.hpp"
#include "mfl/studies.hpp"

namespace mfl {

inline constexpr std::string_view kVersion = "0.1.0";

enum class RunMode { solve_pde, simulate_particles, eta_study, path_study, check_smallness, diagnostics };

std::string_view to_string(RunMode mode);

/// A fully resolved experiment description.
///
/// Grammar, one entry per line:
///
///     # comment
///     section.key = value
///
/// Lists are comma separated. Initial densities use the blob grammar of
/// parse_blobs, one key per species (initial.species1, initial.species2, ...).
/// Keys not listed in the README table are rejected.
struct ExperimentConfig {
    RunMode mode = RunMode::solve_pde;

    int species = 1;
    std::vector<double> sigma;
    /// One family per matrix entry, row-major.
    std::vector<KernelFamily> kernel_family;
    std::vector<double> kernel_coeff;
    std::optional<double> eta;
    std::optional<std::vector<double>> moment_override;

    int dim = 1;
    double length = 0.0;
    int points = 0;

    double dt = 0.0;
    double t_end = 0.0;
    double snapshot_interval = 0.0;

    std::vector<std::vector<Blob>> initial;

    std::vector<double> eta_schedule;
    std::vector<int> particle_schedule;
    int seeds = 16;
    std::uint64_t master_seed = 1;
    int particles = 1000;

    PdeMode pde_mode = PdeMode::nonlocal;
    bool dealias = true;
    double cfl = 0.25;
    std::optional<std::array<double, 2>> hs_orders;
    double c_star = 1.0;

    Thresholds thresholds;
    double zero_mean_z = 4.0;
    double mollifier_ratio_min = 0.4;
    double mollifier_ratio_max = 0.6;

    std::string output_dir = "out";
    bool trajectories = false;

    bool operator==(ExperimentConfig const&) const = default;

    GridSpec grid() const;
    std::array<double, 2> resolved_hs_orders() const;
    std::vector<KernelProfile> profiles() const;
    std::vector<GridField> initial_fields() const;
    StudySetup study_setup() const;
};

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> errors);
    std::vector<std::string> const& errors() const { return errors_; }

  private:
    std::vector<std::string> errors_;
};

/// Parse and validate. Throws ConfigError holding every problem found.
ExperimentConfig parse_config(std::string_view text);

/// Every key with its resolved value; parse_config(format_config(c)) == c.
std::string format_config(ExperimentConfig const& config);

}  // namespace mfl
