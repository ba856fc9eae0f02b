#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfl/grid.hpp"
#include "mfl/pde.hpp"

namespace mfl {

struct FieldError {
    /// sqrt(sum_i ||a_i - b_i||_{L2}^2)
    double l2;
    /// max_i max_x |a_i - b_i|
    double linf;
    /// sqrt(sum_i ||grad(a_i - b_i)||_{L2}^2), spectral
    double grad_l2;
};

FieldError field_error(State const& a, State const& b);

/// Ordinary least squares fit of log(y) against log(x).
struct SlopeFit {
    double slope;
    double intercept;
    /// 95% Student-t half-width of the slope (0 for exact data, NaN with 2 points).
    double half_width;
    int points;
};

SlopeFit fit_loglog(std::span<double const> x, std::span<double const> y);

struct GronwallResult {
    bool precondition_ok;
    /// Why the check was skipped, when it was.
    std::string violation;
    bool bound_holds;
    double max_f;
    /// (a/b)^2, or f(0) in the degenerate b = 0 case.
    double bound;
};

/// Check f(t) <= (a/b)^2 for a sampled f obeying f' <= -g (a - b sqrt f).
///
/// The differential inequality is tested on each interval with the forward
/// difference against the larger of the right-hand sides at the two ends,
/// with an absolute-plus-relative slack `tol`. With b == 0 the bound becomes
/// the pure decay statement f(t) <= f(0).
GronwallResult gronwall_check(std::span<double const> t, std::span<double const> f,
                              std::span<double const> g, double a, double b,
                              double tol = 1e-8);

struct HsEnergyReport {
    int steps;
    /// Steps where d/dt f + 2 (sigma - b sqrt f) |grad u|_{H^s}^2 <= tolerance.
    int steps_ok;
    double fraction_ok;
    /// Largest one-step relative increase of ||u||_{H^s}.
    double max_relative_increase;
    GronwallResult gronwall;
};

/// Discrete form of d/dt ||u||^2_{H^s} + 2 (sigma - C* sum A ||u||_{H^s}) ||grad u||^2_{H^s} <= 0
/// along a trace, and the Gronwall bound with f = ||u||^2_{H^s},
/// g = 2 ||grad u||^2_{H^s}, a = sigma, b = C* sum A_ij.
HsEnergyReport hs_energy_monitor(DiagnosticsTrace const& trace, SystemParams const& params,
                                 double c_star, double tol = 1e-8);

/// Periodic Gaussian kernel density estimate on the grid, unit mass.
GridField empirical_density(std::span<Point const> positions, double bandwidth,
                            GridSpec const& grid);

struct MeanSe {
    double mean;
    double se;
};

MeanSe mean_and_se(std::span<double const> values);

}  // namespace mfl
