#pragma once

#include <array>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfl/grid.hpp"
#include "mfl/kernels.hpp"

namespace mfl {

/// Dense row-major n x n matrix of reals.
struct SquareMatrix {
    int n = 0;
    std::vector<double> v;

    SquareMatrix() = default;
    explicit SquareMatrix(int size, double fill = 0.0)
        : n(size), v(static_cast<std::size_t>(size * size), fill)
    {
    }
    double& operator()(int i, int j) { return v[static_cast<std::size_t>(i * n + j)]; }
    double operator()(int i, int j) const { return v[static_cast<std::size_t>(i * n + j)]; }
    double sum_abs() const;
    bool operator==(SquareMatrix const&) const = default;
};

enum class PdeMode { nonlocal, local };

struct SystemParams {
    int species = 1;
    std::vector<double> sigma;
    /// Present for nonlocal runs.
    std::optional<KernelMatrix> kernels;
    /// a_ij of the local system.
    SquareMatrix moments;
    /// A_ij used in the smallness bound.
    SquareMatrix l1;
    GridSpec grid;
    double dt = 1e-3;
    double t_end = 0.0;
    double snapshot_interval = 1e-2;
    bool dealias = true;
    /// Advective CFL factor: dt <= cfl * h / max|drift velocity|.
    double cfl = 0.25;
    /// H^s orders reported in the trace; the first is the monitored one.
    std::array<double, 2> hs_orders{2.5, 3.0};

    /// Nonlocal/local parameters from kernels: a_ij and A_ij are the kernel moments.
    static SystemParams with_kernels(std::vector<double> sigma, KernelMatrix kernels,
                                     GridSpec grid, double dt, double t_end);
    /// Local-only parameters: A_ij defaults to |a_ij|.
    static SystemParams with_moments(std::vector<double> sigma, SquareMatrix moments,
                                     GridSpec grid, double dt, double t_end);

    double sigma_min() const;
    int steps() const;
    int steps_per_snapshot() const;
    void validate() const;
};

struct State {
    double time = 0.0;
    std::vector<GridField> u;
    std::vector<double> initial_mass;

    static State initial(std::vector<GridField> u0);
};

struct DiagnosticsRecord {
    double t;
    std::vector<double> mass;
    std::vector<double> min;
    double l2;
    double hs_a;
    double hs_b;
    double entropy;
    /// NaN unless n == 2.
    double entropy_weighted;
    double seam_max;
    /// ||grad u||_{H^s} at the first H^s order.
    double grad_hs_a;
};

struct DiagnosticsTrace {
    int species = 0;
    std::array<double, 2> hs_orders{};
    std::vector<DiagnosticsRecord> records;
};

struct SmallnessResult {
    bool passes;
    double lhs;
    double rhs;
    double gamma_margin;
};

/// Compare ||u0||_{H^s} with sigma / (c_star * sum A_ij).
SmallnessResult smallness_check(State const& u0, SystemParams const& params, double s,
                                double c_star);

class SolveAborted : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// First-order IMEX stepper: exact integrating factor for sigma_i * Laplacian,
/// explicit drift flux u_i * w_i with w_i = sum_j grad V_ij * u_j (nonlocal)
/// or sum_j a_ij grad u_j (local). The flux divergence is taken spectrally so
/// the zero mode, and with it the mass, is untouched.
class Stepper {
  public:
    Stepper(SystemParams params, PdeMode mode);

    PdeMode mode() const { return mode_; }
    SystemParams const& params() const { return params_; }

    State step(State const& s) const;

    /// w_i on the grid, one entry per species, d components each. Particle
    /// drift is -w_i.
    std::vector<std::vector<GridField>> velocity(State const& s) const;
    /// grad V_ij * u_j for a single pair (nonlocal only).
    std::vector<GridField> pair_field(State const& s, int i, int j) const;

  private:
    std::vector<SpectralField> velocity_potential(std::vector<SpectralField> const& U) const;

    SystemParams params_;
    PdeMode mode_;
    /// h^d * FFT(sampled V_ij), row-major in (i, j); nonlocal only.
    std::vector<SpectralField> kernel_spectra_;
    /// exp(-sigma_i |k|^2 dt) per species.
    std::vector<std::vector<double>> decay_;
};

State step_nonlocal(State const& s, SystemParams const& params);
State step_local(State const& s, SystemParams const& params);

struct SolveResult {
    State final;
    DiagnosticsTrace trace;
    std::vector<State> snapshots;
    /// Set when the run stopped early; the trace holds every accepted step.
    std::optional<std::string> abort_reason;
};

SolveResult solve(State const& initial, SystemParams const& params, PdeMode mode);

DiagnosticsRecord diagnose(State const& s, SystemParams const& params);

/// Discrete L2 norm of V^eta * grad u - a * grad u, summed over components.
double mollifier_error(GridField const& u, ScaledKernel const& kernel, double a);

struct Entropies {
    double H;
    std::optional<double> H1;
};

inline constexpr double kEntropyFloor = 1e-30;

Entropies entropies(State const& s, SquareMatrix const& moments);

}  // namespace mfl
