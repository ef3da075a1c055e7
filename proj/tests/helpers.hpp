#pragma once

#include "mixdec.hpp"

#include <initializer_list>
#include <random>
#include <vector>

namespace mixdec::testing {

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

inline MapSystem load(const SystemConfig& sc) { return make_system(sc); }

inline TransitionGraph cycle_graph(int n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (int i = 0; i < n; ++i) e.push_back({i, (i + 1) % n});
    return TransitionGraph::from_edges(n, e);
}

/// Seeded random digraph, node count and density drawn from the ranges.
inline TransitionGraph random_digraph(std::mt19937_64& rng, int max_nodes = 12, double min_density = 0.1,
                                      double max_density = 0.5) {
    std::uniform_int_distribution<int> nodes(1, max_nodes);
    std::uniform_real_distribution<double> dens(min_density, max_density), coin(0.0, 1.0);
    const int n = nodes(rng);
    const double p = dens(rng);
    std::vector<std::pair<NodeId, NodeId>> e;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            if (coin(rng) < p) e.push_back({u, v});
    return TransitionGraph::from_edges(n, e);
}

inline RecurrentClass whole(const TransitionGraph& g) {
    RecurrentClass c;
    for (NodeId u = 0; u < g.node_count(); ++u) c.nodes.push_back(u);
    return c;
}

}  // namespace mixdec::testing
