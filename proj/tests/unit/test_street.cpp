#include <greenexp/street/choice.hpp>
#include <greenexp/street/graph.hpp>

#include "../support/betweenness_oracle.hpp"
#include "../support/shapes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace greenexp;
using greenexp::testing::graph_from_edges;
using greenexp::testing::polyline_of;
using greenexp::testing::random_dual_graph;
using greenexp::testing::Rational;

namespace {

StreetSegment seg(const std::string& id, std::initializer_list<std::pair<double, double>> pts) {
    return StreetSegment::from_polyline(id, polyline_of(pts));
}

ChoiceOptions topo(double radius = kInfiniteRadius) { return {radius, ChoiceMode::topological, 1}; }

} // namespace

TEST(StreetSegment, DerivedFields) {
    const auto s = seg("a", {{0, 0}, {30, 0}, {30, 40}});
    EXPECT_DOUBLE_EQ(s.length, 70.0);
    EXPECT_NEAR(s.midpoint.x(), 30.0, 1e-12);
    EXPECT_NEAR(s.midpoint.y(), 5.0, 1e-12);
    EXPECT_NEAR(s.azimuth, std::atan2(30.0, 40.0) * 180.0 / std::numbers::pi, 1e-9);
    EXPECT_THROW(seg("z", {{1, 1}, {1, 1}}), DomainError);
}

TEST(BuildGraph, SharedEndpointGivesOneLink) {
    const auto g = build_graph({seg("a", {{0, 0}, {100, 0}}), seg("b", {{100, 0}, {200, 0}})}, 0.1);
    EXPECT_EQ(g.link_count(), 1u);
    ASSERT_EQ(g.links(0).size(), 1u);
    EXPECT_NEAR(g.links(0)[0].turn_angle, 0.0, 1e-12);
}

TEST(BuildGraph, ParallelSegmentsStayApart) {
    const auto g = build_graph({seg("a", {{0, 0}, {100, 0}}), seg("b", {{0, 50}, {100, 50}})}, 0.5);
    EXPECT_EQ(g.link_count(), 0u);
}

TEST(BuildGraph, TJunctionLinksAllThreePairs) {
    // Endpoint pairs meeting at (100, 0): (a.end, b.start), (a.end, c.start), (b.start, c.start).
    const auto g = build_graph({seg("a", {{0, 0}, {100, 0}}), seg("b", {{100, 0}, {200, 0}}),
                                seg("c", {{100, 0}, {100, 100}})},
                               0.1);
    EXPECT_EQ(g.link_count(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g.links(i).size(), 2u);
    // a -> c is a right-angle turn, b <-> c likewise, a -> b straight on.
    EXPECT_NEAR(g.links(0)[0].turn_angle, 0.0, 1e-9);
    EXPECT_NEAR(g.links(0)[1].turn_angle, 90.0, 1e-9);
    EXPECT_NEAR(g.links(1)[1].turn_angle, 90.0, 1e-9);
}

TEST(BuildGraph, SnapToleranceAndSymmetry) {
    const auto near = build_graph({seg("a", {{0, 0}, {100, 0}}), seg("b", {{100.05, 0}, {200, 0}})}, 0.1);
    EXPECT_EQ(near.link_count(), 1u);
    const auto far = build_graph({seg("a", {{0, 0}, {100, 0}}), seg("b", {{100.2, 0}, {200, 0}})}, 0.1);
    EXPECT_EQ(far.link_count(), 0u);
    const auto exact = build_graph({seg("a", {{0, 0}, {100, 0}}), seg("b", {{100, 0}, {200, 0}})}, 0.0);
    EXPECT_EQ(exact.link_count(), 1u);
    // A closed loop touches itself only; an isolated segment keeps degree 0.
    const auto loop = build_graph({seg("r", {{0, 0}, {10, 0}, {10, 10}, {0, 0}}), seg("x", {{500, 500}, {600, 500}})}, 0.1);
    EXPECT_EQ(loop.link_count(), 0u);
    EXPECT_THROW(build_graph({}, 0.1), DomainError);
}

TEST(BuildGraph, UTurnBetweenOpposingSegments) {
    // b doubles back along a: the heading reverses at the shared point.
    const auto g = build_graph({seg("a", {{0, 0}, {100, 0}}), seg("b", {{100, 0}, {50, 0.0001}})}, 0.1);
    ASSERT_EQ(g.link_count(), 1u);
    EXPECT_NEAR(g.links(0)[0].turn_angle, 180.0, 1e-3);
}

TEST(Choice, TriangleHasNoThroughMovement) {
    const auto g = graph_from_edges({50, 50, 50}, {{0, 1, 60}, {1, 2, 60}, {0, 2, 60}});
    for (auto mode : {ChoiceMode::topological, ChoiceMode::angular}) {
        const auto c = choice(g, {kInfiniteRadius, mode, 1});
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(c.raw[i], 0.0);
            EXPECT_EQ(c.weight[i], 0.0);
        }
    }
}

TEST(Choice, PathOfThree) {
    const auto g = build_graph({seg("s1", {{0, 0}, {100, 0}}), seg("s2", {{100, 0}, {200, 0}}),
                                seg("s3", {{200, 0}, {300, 0}})});
    const auto c = choice(g, topo());
    EXPECT_EQ(c.raw[0], 0.0);
    EXPECT_EQ(c.raw[1], 1.0);
    EXPECT_EQ(c.raw[2], 0.0);
    EXPECT_EQ(c.weight[1], 0.0); // c <= 1 is floored
    const auto a = choice(g, {kInfiniteRadius, ChoiceMode::angular, 1});
    EXPECT_EQ(a.raw[1], 1.0);
}

TEST(Choice, FiveByFiveLatticeMatchesOracle) {
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> edges;
    for (std::uint32_t r = 0; r < 5; ++r)
        for (std::uint32_t c = 0; c < 5; ++c) {
            if (c + 1 < 5) edges.emplace_back(r * 5 + c, r * 5 + c + 1, 90.0);
            if (r + 1 < 5) edges.emplace_back(r * 5 + c, (r + 1) * 5 + c, 90.0);
        }
    const auto g = graph_from_edges(std::vector<double>(25, 100.0), edges);
    const auto exact = choice<Rational>(g, topo());
    const auto oracle = greenexp::testing::choice_oracle(g, kInfiniteRadius, ChoiceMode::topological);
    for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(exact.raw[i], oracle.choice[i]) << "segment " << i;
    // Lattice symmetry: the centre carries the most through-movement, corners none beyond their pairs.
    const auto approx = choice(g, topo());
    for (std::size_t i = 0; i < 25; ++i) EXPECT_LE(approx.raw[i], approx.raw[12] + 1e-9);
}

TEST(Choice, RandomGraphsMatchOracleInBothModes) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const auto g = random_dual_graph(rng, 40);
        for (auto mode : {ChoiceMode::topological, ChoiceMode::angular}) {
            const double radius = trial % 3 == 0 ? kInfiniteRadius : 150.0 + 50.0 * trial;
            const auto exact = choice<Rational>(g, {radius, mode, 1});
            const auto oracle = greenexp::testing::choice_oracle(g, radius, mode);
            for (std::size_t i = 0; i < g.size(); ++i) ASSERT_EQ(exact.raw[i], oracle.choice[i]);
            // Summed pair fractions equal the mean interior length of each pair's shortest paths.
            ASSERT_EQ(std::accumulate(exact.raw.begin(), exact.raw.end(), Rational(0)), oracle.interior_total);
            const auto approx = choice(g, {radius, mode, 1});
            for (std::size_t i = 0; i < g.size(); ++i) {
                ASSERT_NEAR(approx.raw[i], static_cast<double>(exact.raw[i]), 1e-9 * (1.0 + approx.raw[i]));
            }
        }
    }
}

TEST(Choice, RadiusMonotonicity) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = random_dual_graph(rng, 30);
        for (auto mode : {ChoiceMode::topological, ChoiceMode::angular}) {
            std::vector<Rational> prev(g.size(), Rational(0));
            for (double r : {60.0, 150.0, 300.0, 600.0, 1200.0, kInfiniteRadius}) {
                const auto c = choice<Rational>(g, {r, mode, 1});
                for (std::size_t i = 0; i < g.size(); ++i) ASSERT_LE(prev[i], c.raw[i]);
                prev = c.raw;
            }
        }
    }
}

TEST(Choice, IsolatedSegmentsScoreZero) {
    const auto g = graph_from_edges({10, 10, 10, 10, 10}, {{0, 1, 0}, {1, 2, 0}, {2, 3, 0}});
    const auto c = choice(g, topo());
    EXPECT_EQ(c.raw[4], 0.0);
    EXPECT_EQ(c.weight[4], 0.0);
}

TEST(Choice, PermutingSegmentsChangesNothing) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_dual_graph(rng, 30);
        std::vector<std::uint32_t> perm(g.size());
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<StreetSegment> segs(g.size());
        std::vector<std::vector<Link>> adj(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            segs[perm[i]] = g.segment(i);
            for (const Link& l : g.links(i)) adj[perm[i]].push_back({perm[l.to], l.turn_angle});
        }
        const StreetGraph permuted(std::move(segs), std::move(adj));
        for (auto mode : {ChoiceMode::topological, ChoiceMode::angular}) {
            const auto a = choice<Rational>(g, {400.0, mode, 1});
            const auto b = choice<Rational>(permuted, {400.0, mode, 1});
            for (std::size_t i = 0; i < g.size(); ++i) ASSERT_EQ(a.raw[i], b.raw[perm[i]]);
        }
    }
}

TEST(Choice, ParallelRunIsBitIdentical) {
    std::mt19937_64 rng(5);
    const auto g = random_dual_graph(rng, 60);
    const auto one = choice(g, {500.0, ChoiceMode::angular, 1});
    const auto four = choice(g, {500.0, ChoiceMode::angular, 4});
    EXPECT_EQ(one.raw, four.raw);
    EXPECT_EQ(one.weight, four.weight);
}

TEST(Choice, RejectsNonPositiveRadius) {
    const auto g = graph_from_edges({10, 10}, {{0, 1, 0}});
    EXPECT_THROW(choice(g, {0.0, ChoiceMode::angular, 1}), DomainError);
}

TEST(ChoiceWeight, FloorThenLog) {
    EXPECT_EQ(choice_weight(0.0), 0.0);
    EXPECT_EQ(choice_weight(1.0), 0.0);
    EXPECT_EQ(choice_weight(0.5), 0.0);
    EXPECT_EQ(choice_weight(std::nextafter(1.0, 2.0)), std::log(std::nextafter(1.0, 2.0)));
    EXPECT_EQ(choice_weight(8.0), std::log(8.0));
}

TEST(NormalizeScores, AffineRescaling) {
    ChoiceScores<double> s;
    s.weight = {0.0, std::log(2.0), std::log(8.0)};
    const auto n = normalize_scores(s);
    EXPECT_NEAR(n.normalized[0], 0.0, 0.01);
    EXPECT_NEAR(n.normalized[1], 33.33, 0.01);
    EXPECT_NEAR(n.normalized[2], 100.0, 0.01);
    EXPECT_EQ(n.weight, s.weight);

    s.weight = {0.0, 0.0, 0.0};
    EXPECT_EQ(normalize_scores(s).normalized, std::vector<double>(3, 0.0));
    s.weight = {1.7};
    EXPECT_EQ(normalize_scores(s).normalized, std::vector<double>{0.0});
}
