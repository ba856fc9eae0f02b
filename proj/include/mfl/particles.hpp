#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mfl/grid.hpp"
#include "mfl/kernels.hpp"
#include "mfl/pde.hpp"
#include "mfl/rng.hpp"

namespace mfl {

enum class DriftMode { interacting, intermediate, limit };
std::string_view to_string(DriftMode mode);

/// Positions of n species x N particles, stored unwrapped (whole-space
/// reading); `wrapped` gives the torus coordinate used for field and kernel
/// evaluation. Flat index is i * N + k.
struct ParticleEnsemble {
    DriftMode mode = DriftMode::interacting;
    GridSpec domain;
    int species = 1;
    int particles = 1;
    std::vector<double> sigma;
    double time = 0.0;
    std::int64_t step = 0;
    std::vector<Point> positions;

    std::size_t index(int i, int k) const
    {
        return static_cast<std::size_t>(i) * particles + k;
    }
    Point const& at(int i, int k) const { return positions[index(i, k)]; }
    Point wrapped(int i, int k) const { return domain.wrap(at(i, k)); }
};

/// Draw N i.i.d. samples per species from the grid densities: inverse CDF of
/// the cell-wise trapezoid masses in d = 1, rejection in d = 2. Returns
/// n * N points in [0, L)^d, flat index i * N + k.
std::vector<Point> sample_initials(std::vector<GridField> const& u0, int particles,
                                   NoisePlan const& noise);

/// Per-species cell lists over the torus with cell size >= cutoff.
class CellIndex {
  public:
    CellIndex(ParticleEnsemble const& ens, double cutoff);

    int cells_per_axis() const { return cells_; }
    double cell_size() const { return domain_.length / cells_; }
    /// Ascending indices of species-j particles that may lie within the
    /// cutoff of x. A superset of the true neighbours.
    void candidates(Point const& x, int species, std::vector<int>& out) const;

  private:
    int cell_of(double coord) const;

    GridSpec domain_;
    int cells_;
    int species_;
    // [species][cell] -> ascending particle indices
    std::vector<std::vector<std::vector<int>>> lists_;
};

/// -sum_j (1/N) sum_l grad V_ij^eta(X_i^k - X_j^l), minimum image. The
/// neighbour sums run over ascending l, so the result matches the direct
/// double sum bit for bit.
std::vector<Point> drift_interacting(ParticleEnsemble const& ens, KernelMatrix const& kernels,
                                     CellIndex const& index, int jobs = 1);

/// Piecewise-linear-in-time drift fields -w_i from PDE snapshots.
class DriftSeries {
  public:
    /// fields[snapshot][species][axis]
    DriftSeries(std::vector<double> times,
                std::vector<std::vector<std::vector<GridField>>> fields);
    static DriftSeries from_solve(SolveResult const& result, Stepper const& stepper);

    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    int species() const { return static_cast<int>(fields_.front().size()); }
    /// Drift components of one species at time t.
    std::vector<GridField> at(int species, double t) const;

  private:
    std::vector<double> times_;
    std::vector<std::vector<std::vector<GridField>>> fields_;
};

/// Drift from precomputed fields, evaluated at the ensemble's current time.
std::vector<Point> drift_field(ParticleEnsemble const& ens, DriftSeries const& series);

/// X <- X + drift dt + sqrt(2 sigma_i) dW.
ParticleEnsemble em_step(ParticleEnsemble const& ens, std::span<Point const> drift,
                         double dt, NoisePlan const& noise, std::int64_t step_index);

enum class Pairing { interacting_vs_intermediate, intermediate_vs_limit, interacting_vs_limit };
inline constexpr std::array<Pairing, 3> kPairings{
    Pairing::interacting_vs_intermediate, Pairing::intermediate_vs_limit,
    Pairing::interacting_vs_limit};
std::string_view to_string(Pairing p);

/// Sum over species of sup over time and particles of |X^A - X^B|.
struct CouplingDistance {
    double unwrapped = 0.0;
    double torus = 0.0;
};

struct SnapshotSummary {
    double t;
    /// [mode][species] per-axis mean and variance of unwrapped positions.
    std::array<std::vector<Point>, 3> mean;
    std::array<std::vector<Point>, 3> var;
    /// Running sup distances per pairing.
    std::array<CouplingDistance, 3> sup;
};

struct CoupledOptions {
    bool interacting = true;
    bool record_positions = false;
    int jobs = 1;
};

struct CoupledRun {
    std::array<ParticleEnsemble, 3> final;
    std::array<CouplingDistance, 3> path_error;
    std::vector<SnapshotSummary> summaries;
    /// [snapshot][mode] positions, only with record_positions.
    std::vector<std::array<std::vector<Point>, 3>> positions;
    /// Largest |unwrapped - torus| gap over pairings.
    double wrap_discrepancy = 0.0;
};

/// Three synchronised Euler-Maruyama runs sharing initial samples and noise.
/// Summaries are taken every `params.steps_per_snapshot()` steps, which must
/// be at most 10 so the interpolated drift fields stay close to the PDE.
CoupledRun run_coupled(SystemParams const& params, KernelMatrix const& kernels,
                       DriftSeries const& nonlocal, DriftSeries const& local,
                       std::vector<GridField> const& u0, int particles,
                       NoisePlan const& noise, CoupledOptions const& options = {});

struct ZeroMeanStat {
    int i;
    int j;
    Point mean;
    Point se;
    /// max over axes of |mean| / se (0 when both vanish).
    double z;
};

/// Empirical mean of Z^{k,l} = grad V_ij(X_i^k - X_j^l) - (grad V_ij * u_j)(X_i^k)
/// over k and l != k, with a linearized (Hoeffding) standard error.
/// pair_fields[i * n + j] holds the d components of grad V_ij * u_j.
std::vector<ZeroMeanStat> zero_mean_diagnostic(
    ParticleEnsemble const& ens, KernelMatrix const& kernels,
    std::vector<std::vector<GridField>> const& pair_fields);

}  // namespace mfl
