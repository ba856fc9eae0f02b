#include <doctest.h>

#include <cmath>
#include <random>

#include "mfl/kernels.hpp"

using namespace mfl;

TEST_CASE("bump3 endpoint values")
{
    auto p = make_profile("bump3", 1.0);
    CHECK(p.value(0.0) == 1.0);
    CHECK(p.value(1.0) == 0.0);
    CHECK(p.d1(1.0) == 0.0);
    CHECK(p.d2(1.0) == 0.0);
    CHECK(p.value(1.5) == 0.0);
    CHECK(p.degree() == 6);
}

TEST_CASE("unknown family is rejected")
{
    CHECK_THROWS_AS(make_profile("gauss", 1.0), std::invalid_argument);
    CHECK_THROWS(make_profile(KernelFamily::bump3, std::nan("")));
}

TEST_CASE("moments of bump3")
{
    auto p = make_profile(KernelFamily::bump3, 1.0);
    CHECK(p.first_moment(1) == doctest::Approx(32.0 / 35.0).epsilon(1e-13));
    CHECK(p.first_moment(2) == doctest::Approx(M_PI / 4.0).epsilon(1e-13));
    // independent check by the trapezoid rule on a fine grid
    int n = 200000;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        double r = -1.0 + 2.0 * k / n;
        double w = (k == 0 || k == n) ? 0.5 : 1.0;
        sum += w * p.value(std::abs(r));
    }
    CHECK(sum * 2.0 / n == doctest::Approx(32.0 / 35.0).epsilon(1e-9));
}

TEST_CASE("derivatives match finite differences of the profile")
{
    auto p = make_profile("bump3", 0.7);
    for (double r : {0.1, 0.3, 0.5, 0.77, 0.95}) {
        double e = 1e-5;
        CHECK(p.d1(r) == doctest::Approx((p.value(r + e) - p.value(r - e)) / (2 * e)).epsilon(1e-8));
        CHECK(p.d2(r) == doctest::Approx((p.d1(r + e) - p.d1(r - e)) / (2 * e)).epsilon(1e-8));
    }
}

TEST_CASE("negative coefficients scale homogeneously")
{
    auto p1 = make_profile("bump3", 1.0);
    auto pn = make_profile("bump3", -2.5);
    for (int d : {1, 2}) {
        auto k1 = scale(p1, 0.3, d);
        auto kn = scale(pn, 0.3, d);
        CHECK(kn.l1_norm() == doctest::Approx(2.5 * k1.l1_norm()).epsilon(1e-12));
        CHECK(kn.first_moment() == doctest::Approx(-2.5 * k1.first_moment()).epsilon(1e-12));
    }
}

TEST_CASE("scaling with eta = 1 is the identity")
{
    auto p = make_profile("bump3", 1.3);
    auto k = scale(p, 1.0, 2);
    for (double x : {0.0, 0.2, 0.6, 0.99})
        CHECK(k.eval({x, 0.0}) == doctest::Approx(p.value(x)));
    auto b = k.bounds();
    CHECK(b.grad_sup == doctest::Approx(p.grad_sup()));
    CHECK(b.lipschitz == doctest::Approx(p.hessian_sup(2)));
    CHECK(b.l1_norm == doctest::Approx(p.l1_norm(2)));
    CHECK_THROWS(scale(p, 0.0, 1));
    CHECK_THROWS(scale(p, -1.0, 1));
}

TEST_CASE("scaled values and support")
{
    auto p = make_profile("bump3", 1.0);
    for (int d : {1, 2}) {
        double eta = 0.25;
        auto k = scale(p, eta, d);
        Point x{0.1, d == 2 ? 0.05 : 0.0};
        double r = std::hypot(x[0], x[1]);
        CHECK(k.eval(x) == doctest::Approx(std::pow(eta, -d) * p.value(r / eta)));
        CHECK(k.eval({eta, 0.0}) == 0.0);
        CHECK(k.eval({0.3, 0.0}) == 0.0);
        auto g0 = k.grad_eval({0.0, 0.0});
        CHECK(g0[0] == 0.0);
        CHECK(g0[1] == 0.0);
        auto g2 = k.grad_eval({2 * eta, 0.0});
        CHECK(g2[0] == 0.0);
    }
}

TEST_CASE("moments are eta invariant")
{
    for (int d : {1, 2}) {
        auto p = make_profile("bump3", -0.8);
        double a = scale(p, 0.5, d).first_moment();
        for (double eta : {0.05, 0.1, 0.37, 0.5}) {
            auto k = scale(p, eta, d);
            CHECK(std::abs(k.first_moment() - a) <= 1e-8);
            CHECK(std::abs(k.l1_norm() - std::abs(a)) <= 1e-8);
        }
        CHECK(std::abs(a - p.first_moment(d)) <= 1e-10);
    }
}

TEST_CASE("gradient matches central differences at second order")
{
    std::mt19937_64 gen(7);
    for (int d : {1, 2}) {
        auto k = scale(make_profile("bump3", 1.0), 0.4, d);
        std::uniform_real_distribution<double> u(-0.28, 0.28);
        double worst_ratio = 1e300;
        for (int trial = 0; trial < 100; ++trial) {
            Point x{u(gen), d == 2 ? u(gen) : 0.0};
            if (std::hypot(x[0], x[1]) < 0.02)
                continue;
            auto g = k.grad_eval(x);
            double err[2] = {0.0, 0.0};
            for (int level = 0; level < 2; ++level) {
                double h = level == 0 ? 1e-3 : 5e-4;
                for (int a = 0; a < d; ++a) {
                    Point xp = x, xm = x;
                    xp[a] += h;
                    xm[a] -= h;
                    double fd = (k.eval(xp) - k.eval(xm)) / (2 * h);
                    err[level] = std::max(err[level], std::abs(fd - g[a]));
                }
            }
            CHECK(err[0] <= 1e-3);
            if (err[1] > 1e-11)
                worst_ratio = std::min(worst_ratio, std::log2(err[0] / err[1]));
        }
        CHECK(worst_ratio >= 1.9);
    }
}

TEST_CASE("lipschitz bound follows the eta^{-d-2} law")
{
    auto p = make_profile("bump3", 2.0);
    for (int d : {1, 2}) {
        double ref = scale(p, 0.4, d).bounds().lipschitz * std::pow(0.4, d + 2);
        for (double eta : {0.2, 0.1, 0.05, 0.013}) {
            double c = scale(p, eta, d).bounds().lipschitz * std::pow(eta, d + 2);
            CHECK(std::abs(c - ref) <= 1e-12 * ref);
        }
        double l1 = scale(p, 0.4, d).bounds().lipschitz;
        double l2 = scale(p, 0.2, d).bounds().lipschitz;
        CHECK(l2 / l1 == doctest::Approx(std::pow(2.0, d + 2)).epsilon(1e-12));
    }
}

TEST_CASE("hessian sup in the plane includes the tangential term")
{
    auto p = make_profile("bump3", 1.0);
    // |V''| peaks at r = 0 with value 6, V'/r -> -6 at r = 0
    CHECK(p.hessian_sup(1) == doctest::Approx(6.0).epsilon(1e-6));
    CHECK(p.hessian_sup(2) == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("grad_sup agrees with dense sampling of grad_eval")
{
    auto k = scale(make_profile("bump3", 1.0), 0.3, 1);
    double best = 0.0;
    for (int q = 0; q <= 100000; ++q) {
        double x = 0.3 * q / 100000.0;
        best = std::max(best, std::abs(k.grad_eval({x, 0.0})[0]));
    }
    CHECK(std::abs(k.bounds().grad_sup - best) <= 0.01 * best);
}

TEST_CASE("sample_on_grid")
{
    auto p = make_profile("bump3", 1.0);
    auto grid = GridSpec::make(1, 2 * M_PI, 256);
    auto k = scale(p, 0.4, 1);
    auto f = k.sample_on_grid(grid);
    double h = grid.spacing();
    for (int i = 0; i < 256; ++i) {
        double r = std::abs(grid.min_image(grid.node(i)));
        if (r >= 0.4)
            CHECK(f.values[static_cast<std::size_t>(i)] == 0.0);
    }
    // quadrature defect shrinks at second order in h
    double e1 = std::abs(f.mass() - k.first_moment());
    auto f2 = k.sample_on_grid(GridSpec::make(1, 2 * M_PI, 512));
    double e2 = std::abs(f2.mass() - k.first_moment());
    CHECK(e1 < 1e-4);
    CHECK(e1 / e2 >= 3.5);
    (void)h;

    CHECK_THROWS(scale(p, 2 * M_PI, 1).sample_on_grid(grid));
    CHECK_THROWS(scale(p, 0.02, 1).sample_on_grid(grid));
}

TEST_CASE("kernel matrix")
{
    std::vector<KernelProfile> ps{make_profile("bump3", 1.0), make_profile("bump3", 0.5),
                                  make_profile("bump3", -0.5), make_profile("bump3", 0.0)};
    KernelMatrix m(2, ps, 0.2, 1);
    CHECK(m(0, 1).base().coeff() == 0.5);
    CHECK(m(1, 0).base().coeff() == -0.5);
    CHECK_FALSE(m.is_zero());
    std::vector<KernelProfile> zeros(4, make_profile("bump3", 0.0));
    CHECK(KernelMatrix(2, zeros, 0.2, 1).is_zero());
    CHECK_THROWS(KernelMatrix(2, std::vector<KernelProfile>(3, ps[0]), 0.2, 1));
}
