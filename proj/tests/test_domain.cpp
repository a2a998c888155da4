#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "towgame/domain.hpp"

using namespace towgame;

namespace {

std::size_t count_class(const DomainGrid<1>& g, bool interior) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < g.size(); ++i) c += g.is_interior(i) == interior;
    return c;
}

}  // namespace

TEST(Domain, IntervalGridCounts) {
    // Lattice x = 0.05 k on [-1.2, 1.2]: k = -24..24.
    const auto g = build_grid(DomainShape<1>::interval(-1.0, 1.0), 0.2, 0.05);
    EXPECT_EQ(g.size(), 49u);
    EXPECT_EQ(g.interior_count(), 39u);
    EXPECT_EQ(g.strip_count(), 10u);
    EXPECT_NEAR(g.point(0)[0], -1.2, 1e-12);
    EXPECT_NEAR(g.point(48)[0], 1.2, 1e-12);
}

TEST(Domain, UnitIntervalClassification) {
    // Anchor 0.5, spacing 0.1: -0.4..1.4 kept, open (0,1) interior.
    const auto g = build_grid(DomainShape<1>::interval(0.0, 1.0), 0.4, 0.1);
    ASSERT_EQ(g.size(), 19u);
    std::vector<double> interior, strip;
    for (std::size_t i = 0; i < g.size(); ++i) (g.is_interior(i) ? interior : strip).push_back(g.point(i)[0]);
    ASSERT_EQ(interior.size(), 9u);
    ASSERT_EQ(strip.size(), 10u);
    for (std::size_t k = 0; k < interior.size(); ++k) EXPECT_NEAR(interior[k], 0.1 * (k + 1), 1e-12);
    const double expect_strip[] = {-0.4, -0.3, -0.2, -0.1, 0.0, 1.0, 1.1, 1.2, 1.3, 1.4};
    for (std::size_t k = 0; k < strip.size(); ++k) EXPECT_NEAR(strip[k], expect_strip[k], 1e-12);
}

TEST(Domain, DiscClassificationMatchesIntegerEnumeration) {
    // Unit disc, eps = 0.2, h = 0.05: (i, j) interior iff i^2 + j^2 < 400,
    // strip iff 400 <= i^2 + j^2 <= 576.
    const auto g = build_grid(DomainShape<2>::ball({0.0, 0.0}, 1.0), 0.2, 0.05);
    std::size_t interior = 0, strip = 0;
    for (int i = -30; i <= 30; ++i)
        for (int j = -30; j <= 30; ++j) {
            const int r2 = i * i + j * j;
            if (r2 < 400) ++interior;
            else if (r2 <= 576) ++strip;
        }
    EXPECT_EQ(g.interior_count(), interior);
    EXPECT_EQ(g.strip_count(), strip);
}

TEST(Domain, BallNeighborCounts) {
    const auto g1 = build_grid(DomainShape<1>::interval(-1.0, 1.0), 0.2, 0.05);
    const auto c1 = g1.nearest(Vec<1>{0.0});
    EXPECT_EQ(g1.ball_neighbors(static_cast<std::size_t>(c1)).size(), 9u);

    // Lattice points with i^2 + j^2 <= 16.
    const auto g2 = build_grid(DomainShape<2>::ball({0.0, 0.0}, 1.0), 0.4, 0.1);
    const auto c2 = g2.nearest(Vec<2>{0.0, 0.0});
    const auto nb = g2.ball_neighbors(static_cast<std::size_t>(c2));
    EXPECT_EQ(nb.size(), 49u);
    EXPECT_EQ(g2.stencil_size(), 49u);
    for (auto j : nb) EXPECT_LE(norm(g2.point(j)), 0.4 + 1e-12);
}

TEST(Domain, InteriorNeighborhoodsStayOnGrid) {
    const auto g = build_grid(DomainShape<2>::box({-1.0, -0.5}, {1.0, 0.5}), 0.2, 0.05);
    const auto interior = g.interior_indices();
    for (std::size_t r = 0; r < interior.size(); ++r)
        EXPECT_EQ(g.interior_ball(r).size(), g.stencil_size());
}

TEST(Domain, NeighborRelationIsSymmetric) {
    const auto g = build_grid(DomainShape<2>::annulus({0.0, 0.0}, 0.3, 1.0), 0.2, 0.05);
    std::mt19937 rng(42);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    for (int t = 0; t < 300; ++t) {
        const auto i = pick(rng);
        for (auto j : g.ball_neighbors(i)) {
            const auto back = g.ball_neighbors(j);
            EXPECT_TRUE(std::binary_search(back.begin(), back.end(), static_cast<std::uint32_t>(i)));
        }
    }
}

TEST(Domain, InteriorAndStripPartitionTheGrid) {
    const auto g = build_grid(DomainShape<1>::interval(-1.0, 1.0), 0.3, 0.05);
    EXPECT_EQ(count_class(g, true) + count_class(g, false), g.size());
    EXPECT_EQ(count_class(g, true), g.interior_count());
    std::set<std::uint32_t> ids(g.interior_indices().begin(), g.interior_indices().end());
    EXPECT_EQ(ids.size(), g.interior_count());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double sd = g.shape().signed_distance(g.point(i));
        if (g.is_interior(i)) EXPECT_LT(sd, 0.0);
        else {
            EXPECT_GE(sd, -1e-12);
            EXPECT_LE(sd, 0.3 + 1e-9);
        }
    }
}

TEST(Domain, SymmetricShapesGiveSymmetricGrids) {
    const auto g = build_grid(DomainShape<2>::ball({0.5, -0.25}, 0.8), 0.2, 0.025);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.point(i);
        const Vec<2> mirrored{1.0 - x[0], -0.5 - x[1]};
        const auto j = g.nearest(mirrored);
        ASSERT_GE(j, 0);
        EXPECT_LT(dist(g.point(static_cast<std::size_t>(j)), mirrored), 1e-9);
        EXPECT_EQ(g.is_interior(i), g.is_interior(static_cast<std::size_t>(j)));
    }
}

TEST(Domain, RefinementKeepsCoarseNeighbors) {
    const auto shape = DomainShape<2>::ball({0.0, 0.0}, 1.0);
    const auto coarse = build_grid(shape, 0.2, 0.05);
    const auto fine = build_grid(shape, 0.2, 0.025);
    std::mt19937 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, coarse.size() - 1);
    for (int t = 0; t < 100; ++t) {
        const auto i = pick(rng);
        const auto fi = fine.nearest(coarse.point(i));
        ASSERT_GE(fi, 0);
        const auto fine_nb = fine.ball_neighbors(static_cast<std::size_t>(fi));
        for (auto j : coarse.ball_neighbors(i)) {
            const auto fj = fine.nearest(coarse.point(j));
            ASSERT_GE(fj, 0);
            EXPECT_LT(dist(fine.point(static_cast<std::size_t>(fj)), coarse.point(j)), 1e-9);
            EXPECT_TRUE(std::binary_search(fine_nb.begin(), fine_nb.end(), static_cast<std::uint32_t>(fj)));
        }
    }
}

TEST(Domain, RejectsCoarseSpacing) {
    EXPECT_THROW(build_grid(DomainShape<1>::interval(-1.0, 1.0), 0.2, 0.06), std::invalid_argument);
    EXPECT_NO_THROW(build_grid(DomainShape<1>::interval(-1.0, 1.0), 0.2, 0.05));
}

TEST(Domain, RejectsGridWithoutInterior) {
    // Lattice radii sqrt(i^2 + j^2) / 10 never fall in (0.5, 0.505).
    EXPECT_THROW(build_grid(DomainShape<2>::annulus({0.0, 0.0}, 0.5, 0.505), 0.4, 0.1), std::invalid_argument);
}

TEST(Domain, RejectsDegenerateShapes) {
    EXPECT_THROW(DomainShape<1>::interval(1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(DomainShape<2>::ball({0.0, 0.0}, 0.0), std::invalid_argument);
    EXPECT_THROW(DomainShape<2>::annulus({0.0, 0.0}, 1.0, 0.5), std::invalid_argument);
    EXPECT_THROW(DomainShape<2>::box({0.0, 0.0}, {1.0, 0.0}), std::invalid_argument);
}

TEST(Domain, ShapeJsonRoundTrip) {
    const auto a = DomainShape<2>::annulus({0.1, 0.2}, 0.25, 0.9);
    const auto b = DomainShape<2>::from_json(a.to_json());
    EXPECT_EQ(b.kind(), ShapeKind::Annulus);
    EXPECT_DOUBLE_EQ(b.inner_radius(), 0.25);
    EXPECT_DOUBLE_EQ(b.outer_radius(), 0.9);
    EXPECT_EQ(b.to_json(), a.to_json());
}

TEST(Domain, GridDescriptionListsCounts) {
    const auto g = build_grid(DomainShape<1>::interval(-1.0, 1.0), 0.2, 0.05);
    const auto j = g.to_json();
    EXPECT_EQ(j.at("points").get<std::size_t>(), 49u);
    EXPECT_EQ(j.at("interior").get<std::size_t>(), 39u);
    EXPECT_EQ(j.at("boundary_strip").get<std::size_t>(), 10u);
    EXPECT_DOUBLE_EQ(j.at("epsilon").get<double>(), 0.2);
}

TEST(Domain, BoundaryProjectionLandsOnBoundary) {
    const auto s = DomainShape<2>::annulus({0.0, 0.0}, 0.3, 1.0);
    for (const Vec<2>& x : {Vec<2>{0.5, 0.1}, Vec<2>{-0.2, 0.35}, Vec<2>{0.0, -0.9}}) {
        const auto y = s.boundary_projection(x);
        EXPECT_NEAR(s.signed_distance(y), 0.0, 1e-12);
        EXPECT_NEAR(dist(x, y), s.distance_to_boundary(x), 1e-12);
    }
}
