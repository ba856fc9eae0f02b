#include <doctest.h>

#include <cmath>

#include "mfl/analysis.hpp"
#include "mfl/initial.hpp"
#include "mfl/pde.hpp"

using namespace mfl;

namespace {

// recorded at first build from this implementation
constexpr double kFrozenSmallnessRatio = 68.071227860199414;

GridSpec torus(int m = 256) { return GridSpec::make(1, 2 * M_PI, m); }

std::vector<KernelProfile> profiles(std::vector<double> coeff)
{
    std::vector<KernelProfile> out;
    for (double c : coeff)
        out.push_back(make_profile(KernelFamily::bump3, c));
    return out;
}

SystemParams nonlocal(std::vector<double> coeff, double eta, GridSpec g, double dt, double t_end,
                      std::vector<double> sigma = {})
{
    int n = static_cast<int>(std::lround(std::sqrt(coeff.size())));
    if (sigma.empty())
        sigma.assign(static_cast<std::size_t>(n), 1.0);
    return SystemParams::with_kernels(sigma, KernelMatrix(n, profiles(coeff), eta, g.dim), g, dt,
                                      t_end);
}

GridField gaussian(GridSpec const& g, double width, double center)
{
    return make_density({Blob{BlobKind::gaussian, 1.0, width, {center, 0.0}}}, g);
}

double l2_diff(GridField const& a, GridField const& b)
{
    GridField d = a;
    for (std::size_t q = 0; q < d.values.size(); ++q)
        d.values[q] -= b.values[q];
    return d.l2_norm();
}

}  // namespace

TEST_CASE("smallness check")
{
    auto g = torus();
    auto p = nonlocal({1, 1, 1, 1}, 0.4, g, 1e-3, 0.01);
    State zero = State::initial({GridField(g), GridField(g)});
    auto z = smallness_check(zero, p, 2.5, 1.0);
    CHECK(z.passes);
    CHECK(z.lhs == 0.0);

    auto off = nonlocal({0, 0, 0, 0}, 0.4, g, 1e-3, 0.01);
    State u = State::initial({gaussian(g, 0.5, 3.0), gaussian(g, 0.5, 3.3)});
    auto o = smallness_check(u, off, 2.5, 1.0);
    CHECK(o.passes);
    CHECK(std::isinf(o.rhs));

    // frozen regression value: bump data, c = 1 bump3 kernels, sigma = 1
    State b = State::initial({make_density(parse_blobs("bump 1 1 2.9", 1), g),
                              make_density(parse_blobs("bump 1 1 3.4", 1), g)});
    auto r = smallness_check(b, p, 2.5, 1.0);
    CHECK(r.rhs == doctest::Approx(35.0 / 128.0).epsilon(1e-12));
    CHECK(r.lhs / r.rhs == doctest::Approx(kFrozenSmallnessRatio).epsilon(1e-10));
    CHECK_FALSE(r.passes);
    CHECK(r.gamma_margin == doctest::Approx(1.0 - r.lhs / r.rhs).epsilon(1e-12));
    CHECK_THROWS(smallness_check(b, p, 2.5, -1.0));
}

TEST_CASE("zero kernels give the exact heat step")
{
    auto g = torus(64);
    auto p = nonlocal({0}, 0.4, g, 1e-2, 1e-2, {0.7});
    GridField f(g);
    for (int i = 0; i < 64; ++i)
        f.values[static_cast<std::size_t>(i)] = 1.0 + 0.3 * std::cos(5 * g.node(i));
    auto next = step_nonlocal(State::initial({f}), p);
    double decay = std::exp(-0.7 * 25 * 1e-2);
    for (int i = 0; i < 64; ++i)
        CHECK(std::abs(next.u[0].values[static_cast<std::size_t>(i)]
                       - (1.0 + 0.3 * decay * std::cos(5 * g.node(i))))
              <= 1e-12);

    SquareMatrix a(1);
    auto pl = SystemParams::with_moments({0.7}, a, g, 1e-2, 1e-2);
    auto nl = step_local(State::initial({f}), pl);
    CHECK(l2_diff(nl.u[0], next.u[0]) <= 1e-12);
}

TEST_CASE("constant states are steady")
{
    auto g = torus(64);
    auto p = nonlocal({1.0, -0.5, 0.3, 2.0}, 0.4, g, 1e-2, 1e-2);
    State s = State::initial({GridField(g, 0.2), GridField(g, 0.7)});
    auto n = step_nonlocal(s, p);
    for (int i = 0; i < 2; ++i)
        for (std::size_t q = 0; q < 64; ++q)
            CHECK(n.u[static_cast<std::size_t>(i)].values[q]
                  == doctest::Approx(s.u[static_cast<std::size_t>(i)].values[q]).epsilon(1e-13));
}

TEST_CASE("one IMEX step agrees with a fully explicit step to second order in dt")
{
    auto g = torus(128);
    auto u = gaussian(g, 0.6, M_PI);
    double errs[2];
    for (int level = 0; level < 2; ++level) {
        double dt = level == 0 ? 1e-3 : 5e-4;
        auto p = nonlocal({0.5}, 0.4, g, dt, dt);
        p.dealias = false;
        auto imex = step_nonlocal(State::initial({u}), p);
        // explicit Euler: u + dt (sigma u'' + (u (V' * u))')
        Stepper st(p, PdeMode::nonlocal);
        auto w = st.velocity(State::initial({u}));
        GridField flux = u;
        for (std::size_t q = 0; q < flux.values.size(); ++q)
            flux.values[q] *= w[0][0].values[q];
        auto div = divergence(std::vector<GridField>{flux});
        auto lap = laplacian(u);
        GridField ex = u;
        for (std::size_t q = 0; q < ex.values.size(); ++q)
            ex.values[q] += dt * (lap.values[q] + div.values[q]);
        errs[level] = l2_diff(imex.u[0], ex);
    }
    CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("local step respects reflection symmetry")
{
    auto g = torus(256);
    SquareMatrix a(2);
    a.v = {1.0, 0.5, 0.5, 1.0};
    auto p = SystemParams::with_moments({1.0, 1.0}, a, g, 1e-3, 0.05);
    // u2(x) = u1(2 pi - x)
    State s = State::initial({gaussian(g, 0.4, M_PI - 0.3), gaussian(g, 0.4, M_PI + 0.3)});
    for (int k = 0; k < 50; ++k)
        s = step_local(s, p);
    double e = 0.0;
    int m = g.points;
    for (int i = 0; i < m; ++i)
        e = std::max(e, std::abs(s.u[0].at(i) - s.u[1].at((m - i) % m)));
    CHECK(e <= 1e-10);
}

TEST_CASE("local and nonlocal steps agree as eta shrinks")
{
    auto g = torus(512);
    double dt = 1e-3;
    State s = State::initial({gaussian(g, 0.5, M_PI - 0.2), gaussian(g, 0.5, M_PI + 0.2)});
    std::vector<double> coeff{1.0, 0.5, 0.5, 1.0};
    auto pl = nonlocal(coeff, 0.4, g, dt, dt);
    auto loc = step_local(s, pl);
    std::vector<double> etas{0.4, 0.2, 0.1}, errs;
    for (double eta : etas) {
        auto nl = step_nonlocal(s, nonlocal(coeff, eta, g, dt, dt));
        double e = std::hypot(l2_diff(nl.u[0], loc.u[0]), l2_diff(nl.u[1], loc.u[1]));
        errs.push_back(e);
        CHECK(e <= 10.0 * eta * dt);
    }
    auto fit = fit_loglog(etas, errs);
    CHECK(fit.slope >= 0.9);
}

TEST_CASE("heat-only solve matches the periodic heat kernel")
{
    auto g = torus(256);
    double sigma = 0.8, t = 0.1, w = 0.3;
    auto p = nonlocal({0}, 0.4, g, 1e-3, t, {sigma});
    auto r = solve(State::initial({gaussian(g, w, M_PI)}), p, PdeMode::nonlocal);
    REQUIRE_FALSE(r.abort_reason);
    // wrapped Gaussian with variance w^2 + 2 sigma t
    auto exact = gaussian(g, std::sqrt(w * w + 2 * sigma * t), M_PI);
    double e = 0.0;
    for (std::size_t q = 0; q < exact.values.size(); ++q)
        e = std::max(e, std::abs(exact.values[q] - r.final.u[0].values[q]));
    CHECK(e <= 1e-8);
    CHECK(r.final.time == doctest::Approx(t));

    // entropy decreases along heat flow
    for (std::size_t k = 1; k < r.trace.records.size(); ++k)
        CHECK(r.trace.records[k].entropy <= r.trace.records[k - 1].entropy + 1e-14);
    auto hs = hs_energy_monitor(r.trace, p, 1.0);
    CHECK(hs.steps_ok == hs.steps);
}

TEST_CASE("coupled solve conserves mass and keeps H^s non-increasing under smallness")
{
    auto g = torus(256);
    State u0 = State::initial({gaussian(g, 0.35, M_PI - 0.25), gaussian(g, 0.35, M_PI + 0.25)});
    auto p = nonlocal({0.0163, 0.00815, 0.00815, 0.0163}, 0.2, g, 1e-4, 0.02);
    p.snapshot_interval = 0.005;
    auto small = smallness_check(u0, p, p.hs_orders[0], 1.0);
    REQUIRE(small.passes);
    REQUIRE(small.gamma_margin > 0.0);
    auto r = solve(u0, p, PdeMode::nonlocal);
    REQUIRE_FALSE(r.abort_reason);
    CHECK(r.snapshots.size() == 5);
    for (auto const& rec : r.trace.records)
        for (int i = 0; i < 2; ++i)
            CHECK(std::abs(rec.mass[static_cast<std::size_t>(i)] - 1.0) <= 1e-10);
    for (std::size_t k = 1; k < r.trace.records.size(); ++k)
        CHECK(r.trace.records[k].hs_a <= r.trace.records[k - 1].hs_a * (1 + 1e-8));
    auto hs = hs_energy_monitor(r.trace, p, 1.0);
    CHECK(hs.gronwall.precondition_ok);
    CHECK(hs.gronwall.bound_holds);
    CHECK(r.trace.records.front().seam_max < 1e-12);
    CHECK(std::isfinite(r.trace.records.front().entropy_weighted));
}

TEST_CASE("refining h and dt together shrinks the error by at least 3")
{
    std::vector<double> coeff{0.05, 0.025, 0.025, 0.05};
    double t = 0.01;
    auto run = [&](int m, double dt) {
        auto g = torus(m);
        State u0 = State::initial({gaussian(g, 0.5, M_PI - 0.2), gaussian(g, 0.5, M_PI + 0.2)});
        auto p = nonlocal(coeff, 0.4, g, dt, t);
        p.snapshot_interval = t;
        return solve(u0, p, PdeMode::nonlocal).final;
    };
    auto ref = run(512, 2.5e-6);
    auto err = [&](State const& s) {
        int stride = 512 / s.u[0].spec.points;
        double e = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int q = 0; q < s.u[0].spec.points; ++q)
                e = std::max(e, std::abs(s.u[static_cast<std::size_t>(i)].at(q)
                                         - ref.u[static_cast<std::size_t>(i)].at(q * stride)));
        return e;
    };
    double coarse = err(run(64, 2e-5));
    double fine = err(run(128, 1e-5));
    CHECK(coarse / fine >= 3.0);
}

TEST_CASE("solve aborts with a partial trace when the drift violates the CFL bound")
{
    auto g = torus(128);
    auto p = nonlocal({-400.0}, 0.4, g, 5e-3, 1.0);
    auto r = solve(State::initial({gaussian(g, 0.3, M_PI)}), p, PdeMode::nonlocal);
    REQUIRE(r.abort_reason);
    CHECK(!r.trace.records.empty());
    CHECK(r.trace.records.size() < 201);
}

TEST_CASE("mollifier error")
{
    auto g = torus(256);
    auto k = scale(make_profile("bump3", 1.0), 0.4, 1);
    CHECK(mollifier_error(GridField(g, 0.3), k, 32.0 / 35.0) <= 1e-12);
    auto u = gaussian(g, 0.5, M_PI);
    double prev = 0.0;
    for (double eta : {0.8, 0.4, 0.2, 0.1}) {
        double e = mollifier_error(u, scale(make_profile("bump3", 1.0), eta, 1), 32.0 / 35.0);
        if (prev > 0.0)
            CHECK(e / prev <= 0.6);  // at least the first-order rate of the bound
        prev = e;
    }
}

TEST_CASE("entropies")
{
    auto g = GridSpec::make(1, 3.0, 64);
    SquareMatrix a(2);
    a.v = {1.0, 0.25, 0.5, 1.0};
    State ones = State::initial({GridField(g, 1.0), GridField(g, 1.0)});
    auto e = entropies(ones, a);
    CHECK(e.H == doctest::Approx(-2 * 3.0).epsilon(1e-14));
    REQUIRE(e.H1);
    CHECK(*e.H1 == doctest::Approx(0.5 * -3.0 + 0.25 * -3.0).epsilon(1e-14));

    auto u = gaussian(g, 0.4, 1.5);
    double c = 2.7;
    GridField cu = u;
    for (auto& v : cu.values)
        v *= c;
    SquareMatrix a1(1);
    double h = entropies(State::initial({u}), a1).H;
    double hc = entropies(State::initial({cu}), a1).H;
    // H(cu) = c H(u) + c log(c) mass(u)
    CHECK(hc == doctest::Approx(c * h + c * std::log(c) * u.mass()).epsilon(1e-12));
    CHECK_FALSE(entropies(State::initial({u}), a1).H1);

    // clamping keeps H finite on zeros and tiny negatives
    GridField z(g, 0.0);
    z.values[3] = -1e-20;
    CHECK(std::isfinite(entropies(State::initial({z}), a1).H));
}
