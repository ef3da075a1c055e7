#include "helpers.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace mixdec;
using mixdec::testing::cycle_graph;
using mixdec::testing::random_digraph;
using mixdec::testing::whole;

namespace {

GraphOptions exact() {
    GraphOptions o;
    o.padding = 0.0;
    o.threads = 1;
    return o;
}

}  // namespace

TEST(BuildGraph, DoublingEightBoxes) {
    const auto cg = build_graph(make_system(models::doubling()), 3, {}, exact());
    ASSERT_EQ(cg.graph.node_count(), 8);
    for (NodeId i = 0; i < 8; ++i) {
        const std::vector<NodeId> expected{(2 * i) % 8, (2 * i + 1) % 8};
        EXPECT_EQ(cg.graph.successors(i), expected) << "box " << i;
    }
}

TEST(BuildGraph, IdentityHasSelfLoopsAndNeighbours) {
    const auto cg = build_graph(make_system(models::identity(1)), 3);
    for (NodeId i = 0; i < 8; ++i) {
        EXPECT_TRUE(cg.graph.has_edge(i, i));
        EXPECT_TRUE(cg.graph.has_edge(i, (i + 1) % 8));
        EXPECT_TRUE(cg.graph.has_edge(i, (i + 7) % 8));
        EXPECT_FALSE(cg.graph.has_edge(i, (i + 4) % 8));
    }
}

TEST(BuildGraph, QuarterRotationIsFourCycle) {
    const auto cg = build_graph(make_system(models::rotation(0.25)), 2, {}, exact());
    for (NodeId i = 0; i < 4; ++i) EXPECT_EQ(cg.graph.successors(i), std::vector<NodeId>{(i + 1) % 4});
}

TEST(BuildGraph, OuterApproximationContainsSampledImages) {
    const auto f = make_system(models::standard(1.2));
    const auto cg = build_graph(f, 4);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < 2000; ++s) {
        const Vec x = mixdec::testing::vec({u(rng), u(rng)});
        const auto a = cg.covering.locate(x), b = cg.covering.locate(evaluate(f, x));
        ASSERT_TRUE(a && b);
        EXPECT_TRUE(cg.graph.has_edge(*a, *b));
    }
}

TEST(BuildGraph, ThreadCountDoesNotChangeTheGraph) {
    const auto f = make_system(models::cat());
    GraphOptions one, four;
    one.threads = 1;
    four.threads = 4;
    EXPECT_EQ(build_graph(f, 4, {}, one).graph.adjacency(), build_graph(f, 4, {}, four).graph.adjacency());
}

TEST(RecurrentClasses, Examples) {
    EXPECT_EQ(recurrent_classes(cycle_graph(4)).size(), 1u);
    // Two 3-cycles joined by a one-way edge.
    const auto g = TransitionGraph::from_edges(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {2, 3}});
    const auto cls = recurrent_classes(g);
    ASSERT_EQ(cls.size(), 2u);
    std::set<std::vector<NodeId>> sets{cls[0].nodes, cls[1].nodes};
    EXPECT_TRUE(sets.count({0, 1, 2}));
    EXPECT_TRUE(sets.count({3, 4, 5}));
    // A path has no recurrence.
    EXPECT_TRUE(recurrent_classes(TransitionGraph::from_edges(3, {{0, 1}, {1, 2}})).empty());
}

TEST(ClassPeriod, Examples) {
    for (int n : {1, 2, 5, 7}) {
        const auto g = cycle_graph(n);
        EXPECT_EQ(class_period(g, whole(g)), n);
        EXPECT_EQ(period_oracle(g, whole(g)), n);
    }
    // Cycles of lengths 4 and 6 through node 0.
    const auto g = TransitionGraph::from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {4, 5}, {5, 1}});
    const auto cls = recurrent_classes(g);
    ASSERT_EQ(cls.size(), 1u);
    EXPECT_EQ(class_period(g, cls[0]), 2);
    EXPECT_EQ(period_oracle(g, cls[0]), 2);
}

TEST(ClassPeriod, TrivialClassIsRejected) {
    const auto g = TransitionGraph::from_edges(2, {{0, 1}});
    RecurrentClass c{{0}, true};
    EXPECT_THROW(class_period(g, c), Error);
}

TEST(PeriodOracle, RejectsLargeClasses) {
    const auto g = cycle_graph(13);
    EXPECT_THROW(period_oracle(g, whole(g)), Error);
}

TEST(PeriodOracle, AgreesOnRandomDigraphs) {
    std::mt19937_64 rng(11);
    for (int s = 0; s < 300; ++s) {
        const auto g = random_digraph(rng);
        for (const auto& c : recurrent_classes(g)) EXPECT_EQ(class_period(g, c), period_oracle(g, c));
    }
}

TEST(CyclicClasses, FourCycle) {
    const auto g = cycle_graph(4);
    const auto dec = cyclic_classes(g, whole(g));
    EXPECT_EQ(dec.period, 4);
    ASSERT_EQ(dec.classes.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(dec.classes[i], std::vector<NodeId>{static_cast<NodeId>(i)});
        ASSERT_TRUE(dec.mixing[i].exponent);
        EXPECT_EQ(*dec.mixing[i].exponent, 1);
    }
    EXPECT_TRUE(partition_violations(g, dec).empty());
}

TEST(CyclicClasses, CompleteBidirectedTriangle) {
    const auto g = TransitionGraph::from_edges(3, {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {0, 2}, {2, 0}});
    const auto dec = cyclic_classes(g, whole(g));
    EXPECT_EQ(dec.period, 1);
    ASSERT_EQ(dec.mixing.size(), 1u);
    ASSERT_TRUE(dec.mixing[0].exponent);
    EXPECT_LE(*dec.mixing[0].exponent, dec.mixing[0].bound);
}

TEST(CyclicClasses, CompleteBipartite) {
    // A = {0, 1}, B = {2, 3}, every A <-> B edge.
    const auto g = TransitionGraph::from_edges(4, {{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 0}, {2, 1}, {3, 0}, {3, 1}});
    const auto dec = cyclic_classes(g, whole(g));
    EXPECT_EQ(dec.period, 2);
    ASSERT_EQ(dec.classes.size(), 2u);
    EXPECT_EQ(dec.classes[0], (std::vector<NodeId>{0, 1}));
    EXPECT_EQ(dec.classes[1], (std::vector<NodeId>{2, 3}));
    for (const auto& m : dec.mixing) {
        ASSERT_TRUE(m.exponent);
        EXPECT_EQ(*m.exponent, 1);
    }
}

TEST(CyclicClasses, IndependentOfRoot) {
    std::mt19937_64 rng(3);
    for (int s = 0; s < 200; ++s) {
        const auto g = random_digraph(rng);
        for (const auto& c : recurrent_classes(g)) {
            const auto base = cyclic_classes(g, c);
            for (NodeId r : c.nodes) {
                const auto other = cyclic_classes(g, c, r);
                EXPECT_EQ(other.classes, base.classes);
            }
        }
    }
}

TEST(CyclicClasses, MixingExponentIsTight) {
    // Independent check by boolean matrix powers restricted to the class.
    std::mt19937_64 rng(17);
    for (int s = 0; s < 200; ++s) {
        const auto g = random_digraph(rng, 8);
        for (const auto& c : recurrent_classes(g)) {
            const auto dec = cyclic_classes(g, c);
            const int m = static_cast<int>(c.nodes.size());
            Eigen::MatrixXi A = Eigen::MatrixXi::Zero(m, m);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) A(a, b) = g.has_edge(c.nodes[a], c.nodes[b]) ? 1 : 0;
            auto boolean_power = [&](int p) {
                Eigen::MatrixXi R = Eigen::MatrixXi::Identity(m, m);
                for (int k = 0; k < p; ++k) R = ((R * A).array() > 0).cast<int>();
                return R;
            };
            auto pos = [&](NodeId u) {
                return static_cast<int>(std::lower_bound(c.nodes.begin(), c.nodes.end(), u) - c.nodes.begin());
            };
            for (std::size_t i = 0; i < dec.classes.size(); ++i) {
                const auto& piece = dec.classes[i];
                ASSERT_TRUE(dec.mixing[i].exponent);
                const int e = *dec.mixing[i].exponent;
                auto all_pairs = [&](int steps) {
                    const auto R = boolean_power(steps);
                    for (NodeId u : piece)
                        for (NodeId v : piece)
                            if (!R(pos(u), pos(v))) return false;
                    return true;
                };
                EXPECT_TRUE(all_pairs(e * dec.period));
                if (e > 1) {
                    EXPECT_FALSE(all_pairs((e - 1) * dec.period));
                }
            }
        }
    }
}

TEST(TrappingRegions, Examples) {
    EXPECT_TRUE(trapping_regions(cycle_graph(5)).empty());
    const auto ab = TransitionGraph::from_edges(2, {{0, 0}, {0, 1}, {1, 1}});
    const auto t = trapping_regions(ab);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0], std::vector<NodeId>{1});
    // Two cycles bridged 0-1-2 -> 3-4-5 -> 6 (sink loop).
    const auto g = TransitionGraph::from_edges(
        7, {{0, 1}, {1, 2}, {2, 0}, {2, 3}, {3, 4}, {4, 5}, {5, 3}, {5, 6}, {6, 6}});
    const auto r = trapping_regions(g);
    std::set<std::vector<NodeId>> got(r.begin(), r.end());
    EXPECT_TRUE(got.count({3, 4, 5, 6}));
    EXPECT_TRUE(got.count({6}));
    EXPECT_FALSE(got.count({0, 1, 2, 3, 4, 5, 6}));
}

TEST(Goldens, DoublingSwapRotation) {
    {
        const auto cg = build_graph(make_system(models::doubling()), 6, {}, exact());
        const auto cls = recurrent_classes(cg.graph);
        ASSERT_EQ(cls.size(), 1u);
        EXPECT_EQ(class_period(cg.graph, cls[0]), 1);
    }
    {
        const auto cg = build_graph(make_system(models::rotation(0.25)), 2, {}, exact());
        const auto cls = recurrent_classes(cg.graph);
        ASSERT_EQ(cls.size(), 1u);
        const auto dec = cyclic_classes(cg.graph, cls[0]);
        EXPECT_EQ(dec.period, 4);
        for (const auto& piece : dec.classes) EXPECT_EQ(piece.size(), 1u);
    }
    {
        const auto cg = build_graph(make_system(models::swap()), 6, {}, exact());
        const auto cls = recurrent_classes(cg.graph);
        ASSERT_EQ(cls.size(), 1u);
        const auto dec = cyclic_classes(cg.graph, cls[0]);
        EXPECT_EQ(dec.period, 2);
        EXPECT_EQ(dec.classes.size(), 2u);
        for (const auto& m : dec.mixing) EXPECT_TRUE(m.exponent.has_value());
    }
}

TEST(ToDot, ListsEveryEdge) {
    const auto g = cycle_graph(3);
    const auto dot = to_dot(g);
    EXPECT_NE(dot.find("n0 -> n1"), std::string::npos);
    EXPECT_NE(dot.find("n2 -> n0"), std::string::npos);
}
