#include <cmath>

#include <gtest/gtest.h>

#include "towgame/oracles.hpp"

using namespace towgame;

TEST(Oracle1D, UndiscountedConstantData) {
    const auto u = solve_1d(-1.0, 1.0, 1.0, 1.0, 3.0, 0.0);
    for (double x : {-0.9, -0.3, 0.0, 0.5, 0.99}) EXPECT_DOUBLE_EQ(u(x), 1.0);
}

TEST(Oracle1D, FigureOneCurve) {
    // p = 3, gamma = 0.25: u'' = u, u(+-1) = 1.
    const auto u = solve_1d(-1.0, 1.0, 1.0, 1.0, 3.0, 0.25);
    EXPECT_DOUBLE_EQ(u.mu(), 1.0);
    const double e = std::exp(1.0);
    EXPECT_NEAR(u(0.0), 2.0 / (e + 1.0 / e), 1e-15);
    EXPECT_NEAR(u(0.0), 0.6480542736638855, 1e-15);
    for (double x : {-0.7, -0.2, 0.4, 0.8})
        EXPECT_NEAR(u(x), (std::exp(x) + std::exp(-x)) / (e + 1.0 / e), 1e-14);
    EXPECT_NEAR(u.derivative(1.0), std::tanh(1.0), 1e-14);
    EXPECT_NEAR(u.max_abs_derivative(-0.5, 0.5), std::sinh(0.5) / std::cosh(1.0), 1e-12);
}

TEST(Oracle1D, AntisymmetricData) {
    const auto u = solve_1d(-1.0, 1.0, -1.0, 1.0, 4.0, 0.6);
    EXPECT_NEAR(u(0.0), 0.0, 1e-15);
    for (double x : {0.1, 0.45, 0.8}) EXPECT_NEAR(u(x), -u(-x), 1e-14);
}

TEST(Oracle1D, ClosedFormAgreesWithGenericBvp) {
    for (double gamma : {0.0, 0.25, 1.3}) {
        const auto exact = solve_1d(-1.0, 2.0, 0.5, -1.5, 3.5, gamma);
        const auto fd = solve_1d_bvp(-1.0, 2.0, 0.5, -1.5, 3.5, gamma, 40000);
        double err = 0.0;
        for (std::size_t i = 0; i < fd.r.size(); ++i) err = std::max(err, std::abs(fd.u[i] - exact(fd.r[i])));
        EXPECT_LT(err, 1e-8) << "gamma = " << gamma;
    }
}

TEST(Oracle1D, RejectsBadInput) {
    EXPECT_THROW(solve_1d(1.0, -1.0, 0.0, 0.0, 3.0, 0.0), std::invalid_argument);
    EXPECT_THROW(solve_1d(-1.0, 1.0, 0.0, 0.0, 2.0, 0.0), std::invalid_argument);
    EXPECT_THROW(solve_1d(-1.0, 1.0, 0.0, 0.0, 3.0, -1.0), std::invalid_argument);
}

TEST(RadialOracle, UndiscountedBallIsConstant) {
    const auto u = solve_radial(3.0, 2, 0.0, RadialGeometry{0.0, 1.0}, 0.0, 2.5);
    for (double r : {0.0, 0.3, 0.7, 1.0}) EXPECT_NEAR(u(r), 2.5, 1e-12);
}

TEST(RadialOracle, UndiscountedAnnulusClosedForm) {
    // p = 3, n = 2: 2 u'' + u'/r = 0 gives u = a + b sqrt(r).
    const auto u = solve_radial(3.0, 2, 0.0, RadialGeometry{0.5, 1.0}, 0.0, 1.0);
    const double b = 1.0 / (1.0 - std::sqrt(0.5));
    const double a = -b * std::sqrt(0.5);
    for (double r : {0.5, 0.6, 0.75, 0.9, 1.0}) EXPECT_NEAR(u(r), a + b * std::sqrt(r), 1e-6);
}

TEST(RadialOracle, DiscountedBallProfile) {
    const auto u = solve_radial(4.0, 2, 0.5, RadialGeometry{0.0, 1.0}, 1.0, 1.0);
    EXPECT_GT(u(0.0), 0.0);
    EXPECT_LT(u(0.0), 1.0);
    const auto& prof = u.profile();
    for (std::size_t i = 1; i < prof.u.size(); ++i) EXPECT_GE(prof.u[i], prof.u[i - 1]);
    EXPECT_NEAR(u(1.0), 1.0, 1e-15);
    EXPECT_LT(u.ode_residual(), 1e-6);
    EXPECT_LT(u.refinement_change(), 1e-7);
}

TEST(RadialOracle, MaximumPrinciple) {
    const auto u = solve_radial(5.0, 3, 0.2, RadialGeometry{0.3, 1.2}, -0.5, 2.0);
    for (double v : u.profile().u) {
        EXPECT_GE(v, -0.5 - 1e-12);
        EXPECT_LE(v, 2.0 + 1e-12);
    }
    EXPECT_LT(u.refinement_change(), 1e-7);
    EXPECT_LT(u.ode_residual(), 1e-5);
}

TEST(RadialOracle, EvaluatesAroundShiftedCenter) {
    const auto u = solve_radial(4.0, 2, 0.5, RadialGeometry{0.0, 1.0}, 1.0, 1.0);
    EXPECT_NEAR(u.at(Vec<2>{1.3, -0.4}, Vec<2>{1.0, 0.0}), u(0.5), 1e-15);
}

TEST(RadialOracle, RejectsBadGeometry) {
    EXPECT_THROW(solve_radial(3.0, 2, 0.0, RadialGeometry{1.0, 0.5}, 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(solve_radial(3.0, 1, 0.0, RadialGeometry{0.0, 1.0}, 0.0, 1.0), std::invalid_argument);
}
