#include <cmath>

#include <gtest/gtest.h>

#include "towgame/expansion.hpp"

using namespace towgame;

TEST(Expansion, BallMeanQuadrature) {
    // Mean of |y|^2 over the unit ball in R^n is n/(n+2).
    EXPECT_NEAR(detail::unit_ball_mean<1>([](const Vec<1>& y) { return dot(y, y); }), 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(detail::unit_ball_mean<2>([](const Vec<2>& y) { return dot(y, y); }), 0.5, 1e-14);
    EXPECT_NEAR(detail::unit_ball_mean<3>([](const Vec<3>& y) { return dot(y, y); }), 0.6, 1e-14);
    EXPECT_NEAR(detail::unit_ball_mean<2>([](const Vec<2>& y) { return y[0] * y[0] * y[1] * y[1]; }), 1.0 / 24.0, 1e-14);
}

TEST(Expansion, AffineIsExactWithoutDiscount) {
    const auto phi = affine_function<2>({0.6, -0.8}, 0.0);
    for (double eps : {0.1, 0.05, 0.025}) {
        const auto s = expansion_check(phi, Vec<2>{0.2, 0.1}, GameParams{3.0, 2, 0.0, eps});
        EXPECT_NEAR(s.lhs, 0.0, 1e-9);
        EXPECT_EQ(s.rhs, 0.0);
    }
}

TEST(Expansion, AffineWithDiscountReducesToReaction) {
    // phi(x) = 1 at x: both sides equal -gamma phi(x) exactly.
    const auto phi = affine_function<1>({1.0}, 1.0);
    const auto s = expansion_check(phi, Vec<1>{0.0}, GameParams{3.0, 1, 1.0, 0.1});
    EXPECT_NEAR(s.rhs, -1.0, 1e-15);
    EXPECT_NEAR(s.lhs, -1.0, 1e-9);
}

TEST(Expansion, HalfNormSquaredOffCenter) {
    // Delta phi = 2, Delta_inf^N phi = 1: rhs = (2 + 2 * 1) / (2 * 6) = 1/3.
    const auto phi = quadratic_function<2>("half_norm_sq", {Vec<2>{1.0, 0.0}, Vec<2>{0.0, 1.0}}, Vec<2>{}, 0.0);
    for (double eps : {0.1, 0.05, 0.025}) {
        const auto s = expansion_check(phi, Vec<2>{1.0, 0.0}, GameParams{4.0, 2, 0.0, eps});
        EXPECT_NEAR(s.rhs, 1.0 / 3.0, 1e-15);
        EXPECT_NEAR(s.lhs, 1.0 / 3.0, 1e-9);
    }
}

TEST(Expansion, NormalizedPLaplacianOfRadialQuadratic) {
    const auto phi = quadratic_function<3>("half_norm_sq",
                                           {Vec<3>{1.0, 0.0, 0.0}, Vec<3>{0.0, 1.0, 0.0}, Vec<3>{0.0, 0.0, 1.0}},
                                           Vec<3>{}, 0.0);
    EXPECT_NEAR(normalized_p_laplacian(phi, Vec<3>{0.2, -0.4, 0.1}, 5.0), 3.0 + 3.0, 1e-13);
}

TEST(Expansion, GapShrinksForRegisteredQuadratics) {
    const std::vector<double> eps = {0.1, 0.05, 0.025, 0.0125};
    for (const auto& phi : test_function_registry<2>()) {
        if (!phi.quadratic) continue;
        const auto scan = expansion_scan(phi, registry_point<2>(), GameParams{3.0, 2, 0.5, 0.1}, eps);
        for (std::size_t k = 1; k < scan.size(); ++k) EXPECT_LE(scan[k].gap(), 0.75 * scan[k - 1].gap()) << phi.name;
    }
}

TEST(Expansion, GapShrinksForCoshProductIn3D) {
    const auto phi = cosh_product<3>({1.0, 1.5, 2.0});
    const auto scan = expansion_scan(phi, registry_point<3>(), GameParams{5.0, 3, 0.3, 0.1}, {0.1, 0.05, 0.025});
    for (std::size_t k = 1; k < scan.size(); ++k) EXPECT_LE(scan[k].gap(), 0.75 * scan[k - 1].gap());
}

TEST(Expansion, RefusesCriticalPoints) {
    const auto phi = quadratic_function<2>("half_norm_sq", {Vec<2>{1.0, 0.0}, Vec<2>{0.0, 1.0}}, Vec<2>{}, 0.0);
    EXPECT_THROW(expansion_check(phi, Vec<2>{0.0, 0.0}, GameParams{3.0, 2, 0.0, 0.1}), std::domain_error);
}

TEST(Expansion, RejectsDimensionMismatch) {
    const auto phi = affine_function<2>({1.0, 0.0}, 0.0);
    EXPECT_THROW(expansion_check(phi, Vec<2>{0.1, 0.1}, GameParams{3.0, 3, 0.0, 0.1}), std::invalid_argument);
}
