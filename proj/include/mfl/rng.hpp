#pragma once

#include <array>
#include <cstdint>

#include "mfl/grid.hpp"

namespace mfl {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11): a keyed
/// bijection on 128-bit counters. Every draw is addressed by a counter, so
/// substreams are independent of evaluation order and thread count.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

/// Uniform in [0, 1) from 53 bits.
double uniform53(std::uint32_t hi, std::uint32_t lo);

/// Brownian increments and initial-sample draws for n species x N particles.
///
/// The increment of particle (i, k) at step s is a pure function of
/// (master seed, i, k, s). Particle k of species i sees the same stream no
/// matter how many particles the plan holds, which gives common random
/// numbers across ensemble sizes.
class NoisePlan {
  public:
    NoisePlan(std::uint64_t master_seed, int species, int particles, int dim, double dt,
              std::int64_t steps);

    std::uint64_t master_seed() const { return seed_; }
    int species() const { return species_; }
    int particles() const { return particles_; }
    int dim() const { return dim_; }
    double dt() const { return dt_; }
    std::int64_t steps() const { return steps_; }

    /// Delta W for particle (i, k) over step `step` (0-based): N(0, dt I_d).
    Point increment(int species, int particle, std::int64_t step) const;
    /// Two standard normals for (i, k, step).
    std::array<double, 2> normals(int species, int particle, std::int64_t step) const;
    /// Two uniforms in [0, 1) from the initial-sample substream of (i, k).
    std::array<double, 2> initial_uniforms(int species, int particle,
                                           std::uint32_t attempt) const;

  private:
    PhiloxCounter counter(std::uint32_t tag, int species, int particle,
                          std::uint64_t index) const;

    std::uint64_t seed_;
    PhiloxKey key_;
    int species_;
    int particles_;
    int dim_;
    double dt_;
    double sqrt_dt_;
    std::int64_t steps_;
};

}  // namespace mfl
