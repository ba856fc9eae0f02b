#include "mfl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mfl {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr std::uint32_t kTagIncrement = 0x1u;
constexpr std::uint32_t kTagInitial = 0x2u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo)
{
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key)
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double uniform53(std::uint32_t hi, std::uint32_t lo)
{
    std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

NoisePlan::NoisePlan(std::uint64_t master_seed, int species, int particles, int dim,
                     double dt, std::int64_t steps)
    : seed_(master_seed),
      key_{static_cast<std::uint32_t>(master_seed),
           static_cast<std::uint32_t>(master_seed >> 32)},
      species_(species),
      particles_(particles),
      dim_(dim),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)),
      steps_(steps)
{
    if (species < 1 || particles < 1)
        throw std::invalid_argument("noise plan: need at least one species and particle");
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("noise plan: dimension must be 1 or 2");
    if (!(dt > 0.0) || steps < 0)
        throw std::invalid_argument("noise plan: dt must be > 0 and steps >= 0");
}

PhiloxCounter NoisePlan::counter(std::uint32_t tag, int species, int particle,
                                 std::uint64_t index) const
{
    if (species < 0 || species >= species_ || particle < 0 || particle >= particles_)
        throw std::out_of_range("noise plan: species or particle index beyond plan");
    return {static_cast<std::uint32_t>(index),
            tag | static_cast<std::uint32_t>(index >> 32) << 4,
            static_cast<std::uint32_t>(species), static_cast<std::uint32_t>(particle)};
}

std::array<double, 2> NoisePlan::normals(int species, int particle,
                                         std::int64_t step) const
{
    if (step < 0 || step >= steps_)
        throw std::out_of_range("noise plan: step index beyond plan length");
    auto r = philox4x32_10(
        counter(kTagIncrement, species, particle, static_cast<std::uint64_t>(step)), key_);
    // Box-Muller; 1 - u keeps the log argument in (0, 1]
    double u1 = 1.0 - uniform53(r[0], r[1]);
    double u2 = uniform53(r[2], r[3]);
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

Point NoisePlan::increment(int species, int particle, std::int64_t step) const
{
    auto z = normals(species, particle, step);
    return {sqrt_dt_ * z[0], dim_ == 2 ? sqrt_dt_ * z[1] : 0.0};
}

std::array<double, 2> NoisePlan::initial_uniforms(int species, int particle,
                                                  std::uint32_t attempt) const
{
    auto r = philox4x32_10(counter(kTagInitial, species, particle, attempt), key_);
    return {uniform53(r[0], r[1]), uniform53(r[2], r[3])};
}

}  // namespace mfl
