#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sunimodal/core.hpp"

using namespace sunimodal;

TEST_CASE("cross ratio values")
{
    CHECK(cross_ratio(0, 1, -1, 2) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(cross_ratio(0, 2, -2, 4) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(cross_ratio(0, 1, -3, 4) == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK_THROWS_AS(cross_ratio(0, 1, 1, 2), DomainError);
}

TEST_CASE("cross ratio is affine invariant")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 1000; ++i) {
        double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        double s = u(rng), t = u(rng);
        if (std::abs(s) < 0.1) s = 0.5;
        double r0 = cross_ratio(a, b, c, d);
        double r1 = cross_ratio(s * a + t, s * b + t, s * c + t, s * d + t);
        CHECK(std::abs(r0 - r1) <= 1e-12 * std::max(1.0, r0));
    }
}

TEST_CASE("poincare length")
{
    CHECK(poincare_length({0, 1}, {-1, 2}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(poincare_length({0.25, 0.75}, {0, 1}) == doctest::Approx(std::log(9.0)).epsilon(1e-14));
    CHECK(poincare_length({0.49, 0.51}, {0, 1}) < 0.1);
    CHECK_THROWS_AS(poincare_length({0, 1}, {0, 2}), DomainError);
    // monotone in sub
    double prev = 0;
    for (int k = 1; k < 20; ++k) {
        double r = 0.02 * k;
        double p = poincare_length({0.5 - r, 0.5 + r}, {0, 1});
        CHECK(p > prev);
        prev = p;
    }
}

TEST_CASE("height and diamonds")
{
    CHECK(height({0.5, 0.25}, {0, 1}) == 0.5);
    CHECK(height({0.1, 0.05}, {0, 1}) == doctest::Approx(0.5));
    CHECK(height({0.3, 0}, {0, 1}) == 0);
    CHECK(height({3.2, 0.1}, {2, 4}) == doctest::Approx(height({0.6, 0.05}, {0, 1})));
    CHECK_THROWS_AS(height({1.0, 0.1}, {0, 1}), DomainError);
    CHECK(diamond_contains(Diamond({0, 1}, 1), {0.5, 0.4}));
    CHECK_FALSE(diamond_contains(Diamond({0, 1}, 0.5), {0.5, 0.4}));
    CHECK_FALSE(diamond_contains(Diamond({0, 1}, 1), {1.2, 0.1}));
}

TEST_CASE("homography displacement")
{
    auto id = [](double x) { return x; };
    CHECK(delta_of_homography(id, {0, 1}, 0.5) == 0);
    auto g = [](double x) { return 3 * x / (1 + 2 * x); };
    CHECK(delta_of_homography(g, {0, 1}, 0.5) == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-14));
    double d3 = delta_of_homography(g, {0, 1}, 0.3), d7 = delta_of_homography(g, {0, 1}, 0.7);
    CHECK(std::abs(d3 - d7) < 1e-10);
    // the stored form reproduces the map
    HomographyFix hf({-1, 3}, 0.8);
    for (double x : {-0.5, 0.0, 1.0, 2.5})
        CHECK(std::abs(delta_of_homography(hf, {-1, 3}, x) - 0.8) < 1e-9);
    CHECK_THROWS_AS(delta_of_homography([](double x) { return x + 2; }, {0, 1}, 0.5), DomainError);
}

TEST_CASE("find_preimage")
{
    auto sq = [](double x) { return x * x; };
    CHECK(std::abs(find_preimage(sq, {0, 1}, 0.25) - 0.5) < 1e-12);
    auto f = [](double x) { return 1 - 2 * x * x; };
    double x = find_preimage(f, {0, 1}, 0.5);
    CHECK(std::abs(x - 0.5) < 1e-12);
    CHECK(std::abs(f(x) - 0.5) < 1e-12);
    CHECK_THROWS_AS(find_preimage(sq, {0, 1}, 2.0), NoSolutionError);
    auto bump = [](double x) { return std::sin(6 * x); };
    CHECK_THROWS_AS(find_preimage(bump, {0, 1}, -0.2), ContractViolation);
}

TEST_CASE("degenerate intervals rejected")
{
    CHECK_THROWS_AS(Interval(1, 1), DomainError);
    CHECK_THROWS_AS(Interval(2, 1), DomainError);
    CHECK_THROWS_AS(Diamond({0, 1}, 0), DomainError);
}
