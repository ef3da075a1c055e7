#pragma once

// Combinatorial recurrence analysis of finite directed graphs: recurrent
// classes (nontrivial SCCs), their periods, the cyclic partition into mixing
// pieces, and forward-closed trapping sets.

#include "mixdec/types.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mixdec {

class TransitionGraph {
public:
    TransitionGraph() = default;

    /// Adjacency lists are sorted and deduplicated on construction.
    explicit TransitionGraph(std::vector<std::vector<NodeId>> adjacency, std::string provenance = {})
        : adjacency_(std::move(adjacency)), provenance_(std::move(provenance)) {
        const auto n = static_cast<NodeId>(adjacency_.size());
        for (auto& succ : adjacency_) {
            std::sort(succ.begin(), succ.end());
            succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
            for (NodeId v : succ) {
                if (v < 0 || v >= n) throw usage_error("edge endpoint " + std::to_string(v) + " out of range");
            }
        }
    }

    static TransitionGraph from_edges(int node_count, const std::vector<std::pair<NodeId, NodeId>>& edges) {
        std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(node_count));
        for (auto [u, v] : edges) {
            if (u < 0 || u >= node_count) throw usage_error("edge source out of range");
            adj[static_cast<std::size_t>(u)].push_back(v);
        }
        return TransitionGraph(std::move(adj));
    }

    int node_count() const noexcept { return static_cast<int>(adjacency_.size()); }
    const std::vector<NodeId>& successors(NodeId u) const { return adjacency_[static_cast<std::size_t>(u)]; }
    const std::vector<std::vector<NodeId>>& adjacency() const noexcept { return adjacency_; }
    const std::string& provenance() const noexcept { return provenance_; }

    bool has_edge(NodeId u, NodeId v) const {
        const auto& s = successors(u);
        return std::binary_search(s.begin(), s.end(), v);
    }

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& s : adjacency_) n += s.size();
        return n;
    }

private:
    std::vector<std::vector<NodeId>> adjacency_;
    std::string provenance_;
};

struct RecurrentClass {
    std::vector<NodeId> nodes;  // sorted
    bool is_trivial = false;    // single node without a self-loop

    bool contains(NodeId v) const { return std::binary_search(nodes.begin(), nodes.end(), v); }
};

struct MixingCertificate {
    std::optional<int> exponent;  // smallest e: every pair joined by a path of length e * period
    int bound = 0;                // Wielandt bound (m - 1)^2 + 1
    std::optional<std::pair<NodeId, NodeId>> counterexample;  // pair not joined at e = bound
};

struct CyclicDecomposition {
    RecurrentClass cls;
    int period = 0;
    std::vector<std::vector<NodeId>> classes;  // classes[i] = Lambda_{i+1}; edges go i -> i+1 mod period
    std::vector<MixingCertificate> mixing;
};

/// Strongly connected components in reverse topological order (sinks first),
/// each sorted. Iterative Tarjan, visiting roots in increasing node order.
inline std::vector<std::vector<NodeId>> strongly_connected_components(const TransitionGraph& g) {
    const int n = g.node_count();
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<NodeId> stack;
    std::vector<std::vector<NodeId>> out;
    int counter = 0;

    struct Frame {
        NodeId node;
        std::size_t next;
    };
    std::vector<Frame> call;

    for (NodeId root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            const auto& succ = g.successors(f.node);
            if (f.next < succ.size()) {
                const NodeId w = succ[f.next++];
                if (index[w] == -1) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.node] = std::min(low[f.node], index[w]);
                }
                continue;
            }
            const NodeId v = f.node;
            call.pop_back();
            if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
            if (low[v] == index[v]) {
                std::vector<NodeId> comp;
                NodeId w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                out.push_back(std::move(comp));
            }
        }
    }
    return out;
}

/// Nontrivial strongly connected components in topological order (sources first).
inline std::vector<RecurrentClass> recurrent_classes(const TransitionGraph& g) {
    auto comps = strongly_connected_components(g);
    std::reverse(comps.begin(), comps.end());
    std::vector<RecurrentClass> out;
    for (auto& comp : comps) {
        const bool trivial = comp.size() == 1 && !g.has_edge(comp[0], comp[0]);
        if (!trivial) out.push_back({std::move(comp), false});
    }
    return out;
}

namespace detail {

inline void require_nontrivial(const RecurrentClass& c) {
    if (c.is_trivial || c.nodes.empty()) throw computation_error("class is trivial (wandering node)");
}

/// BFS levels from `root`, following only edges inside the class. -1 outside.
inline std::vector<int> class_levels(const TransitionGraph& g, const RecurrentClass& c, NodeId root) {
    std::vector<int> level(g.node_count(), -1);
    std::queue<NodeId> q;
    level[root] = 0;
    q.push(root);
    while (!q.empty()) {
        const NodeId u = q.front();
        q.pop();
        for (NodeId v : g.successors(u)) {
            if (level[v] != -1 || !c.contains(v)) continue;
            level[v] = level[u] + 1;
            q.push(v);
        }
    }
    return level;
}

inline int period_from_levels(const TransitionGraph& g, const RecurrentClass& c, const std::vector<int>& level) {
    std::int64_t period = 0;
    for (NodeId u : c.nodes) {
        if (level[u] < 0) throw computation_error("class is not strongly connected");
        for (NodeId v : g.successors(u)) {
            if (!c.contains(v)) continue;
            period = gcd_accumulate(period, static_cast<std::int64_t>(level[u]) + 1 - level[v]);
        }
    }
    return static_cast<int>(period);
}

}  // namespace detail

/// gcd of all cycle lengths in the class, from BFS levels: gcd over edges
/// u->v of level(u) + 1 - level(v).
inline int class_period(const TransitionGraph& g, const RecurrentClass& c) {
    detail::require_nontrivial(c);
    const auto level = detail::class_levels(g, c, c.nodes.front());
    return detail::period_from_levels(g, c, level);
}

/// Exhaustive simple-cycle enumeration (desk scale only).
inline int period_oracle(const TransitionGraph& g, const RecurrentClass& c) {
    detail::require_nontrivial(c);
    if (c.nodes.size() > 12) throw computation_error("period oracle limited to classes of at most 12 nodes");
    std::int64_t period = 0;
    std::vector<char> on_path(g.node_count(), 0);

    // Each simple cycle is counted from its smallest node `start`.
    for (NodeId start : c.nodes) {
        std::vector<std::pair<NodeId, std::size_t>> path{{start, 0}};
        on_path[start] = 1;
        while (!path.empty()) {
            auto& [u, next] = path.back();
            const auto& succ = g.successors(u);
            if (next == succ.size()) {
                on_path[u] = 0;
                path.pop_back();
                continue;
            }
            const NodeId v = succ[next++];
            if (!c.contains(v) || v < start) continue;
            if (v == start) {
                period = gcd_accumulate(period, static_cast<std::int64_t>(path.size()));
                continue;
            }
            if (on_path[v]) continue;
            on_path[v] = 1;
            path.push_back({v, 0});
        }
    }
    return static_cast<int>(period);
}

namespace detail {

/// Smallest e <= bound such that every node of `piece` reaches every node of
/// `piece` by a walk of length exactly e * period inside the class.
inline MixingCertificate mixing_certificate(const TransitionGraph& g, const RecurrentClass& c, int period,
                                            const std::vector<int>& cyclic_index,
                                            const std::vector<NodeId>& piece) {
    MixingCertificate cert;
    const std::int64_t m = static_cast<std::int64_t>(piece.size());
    cert.bound = static_cast<int>(std::min<std::int64_t>((m - 1) * (m - 1) + 1, 1 << 30));

    // Predecessors inside the class, for the complement update.
    const int n = g.node_count();
    std::vector<std::vector<NodeId>> pred(n);
    for (NodeId u : c.nodes)
        for (NodeId v : g.successors(u))
            if (c.contains(v)) pred[v].push_back(u);

    // Nodes by cyclic index, to enumerate "the level the walk is on".
    std::vector<std::vector<NodeId>> by_index(period);
    for (NodeId u : c.nodes) by_index[cyclic_index[u]].push_back(u);

    std::vector<char> reached(n, 0), next(n, 0);
    int worst = 0;
    for (NodeId source : piece) {
        std::fill(reached.begin(), reached.end(), 0);
        reached[source] = 1;
        std::int64_t count = 1;
        int level = cyclic_index[source];
        std::int64_t steps = 0;
        const std::int64_t max_steps = static_cast<std::int64_t>(cert.bound) * period;
        int found = -1;
        while (steps < max_steps) {
            const int next_level = (level + 1) % period;
            const auto& target = by_index[next_level];
            std::fill(next.begin(), next.end(), 0);
            std::int64_t next_count = 0;
            if (count * 2 <= static_cast<std::int64_t>(by_index[level].size())) {
                for (NodeId u : by_index[level]) {
                    if (!reached[u]) continue;
                    for (NodeId v : g.successors(u))
                        if (c.contains(v) && !next[v]) {
                            next[v] = 1;
                            ++next_count;
                        }
                }
            } else {
                // v is reached iff some predecessor is reached.
                for (NodeId v : target) {
                    for (NodeId u : pred[v])
                        if (reached[u]) {
                            next[v] = 1;
                            ++next_count;
                            break;
                        }
                }
            }
            std::swap(reached, next);
            count = next_count;
            level = next_level;
            ++steps;
            if (steps % period == 0 && count == m) {
                found = static_cast<int>(steps / period);
                break;
            }
        }
        if (found < 0) {
            for (NodeId v : piece)
                if (!reached[v]) {
                    cert.counterexample = std::make_pair(source, v);
                    break;
                }
            if (!cert.counterexample) cert.counterexample = std::make_pair(source, source);
            return cert;
        }
        worst = std::max(worst, found);
    }
    cert.exponent = worst;
    return cert;
}

}  // namespace detail

/// Cyclic decomposition of a recurrent class. Levels are taken from `root`
/// (default: the lowest node); pieces are then relabelled so that Lambda_1
/// holds the lowest-numbered node.
inline CyclicDecomposition cyclic_classes(const TransitionGraph& g, const RecurrentClass& c,
                                          std::optional<NodeId> root = std::nullopt) {
    detail::require_nontrivial(c);
    const NodeId r = root.value_or(c.nodes.front());
    if (!c.contains(r)) throw usage_error("root node is not in the class");
    const auto level = detail::class_levels(g, c, r);
    const int period = detail::period_from_levels(g, c, level);

    CyclicDecomposition out;
    out.cls = c;
    out.period = period;
    out.classes.assign(period, {});
    const int shift = level[c.nodes.front()] % period;
    std::vector<int> cyclic_index(g.node_count(), -1);
    for (NodeId u : c.nodes) {
        const int idx = ((level[u] - shift) % period + period) % period;
        cyclic_index[u] = idx;
        out.classes[idx].push_back(u);
    }
    for (const auto& piece : out.classes) {
        out.mixing.push_back(detail::mixing_certificate(g, c, period, cyclic_index, piece));
    }
    return out;
}

/// Checks that every induced edge goes Lambda_i -> Lambda_{i+1 mod period}.
/// Returns the offending edges (empty when the partition respects edges).
inline std::vector<std::pair<NodeId, NodeId>> partition_violations(const TransitionGraph& g,
                                                                   const CyclicDecomposition& dec) {
    std::map<NodeId, int> index;
    for (int i = 0; i < static_cast<int>(dec.classes.size()); ++i)
        for (NodeId u : dec.classes[i]) index[u] = i;
    std::vector<std::pair<NodeId, NodeId>> bad;
    for (NodeId u : dec.cls.nodes) {
        for (NodeId v : g.successors(u)) {
            auto it = index.find(v);
            if (it == index.end()) continue;
            if (it->second != (index.at(u) + 1) % dec.period) bad.emplace_back(u, v);
        }
    }
    return bad;
}

/// Forward closure of a node set.
inline std::vector<NodeId> forward_closure(const TransitionGraph& g, const std::vector<NodeId>& seeds) {
    std::vector<char> seen(g.node_count(), 0);
    std::vector<NodeId> stack;
    for (NodeId s : seeds)
        if (!seen[s]) {
            seen[s] = 1;
            stack.push_back(s);
        }
    while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        for (NodeId v : g.successors(u))
            if (!seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
    }
    std::vector<NodeId> out;
    for (NodeId u = 0; u < g.node_count(); ++u)
        if (seen[u]) out.push_back(u);
    return out;
}

/// Proper, nonempty, successor-closed node sets generated by the strongly
/// connected components: the forward closure of every component that does
/// not reach the whole graph. Empty iff the graph is strongly connected.
inline std::vector<std::vector<NodeId>> trapping_regions(const TransitionGraph& g) {
    std::set<std::vector<NodeId>> unique;
    for (const auto& comp : strongly_connected_components(g)) {
        auto closure = forward_closure(g, comp);
        if (static_cast<int>(closure.size()) < g.node_count()) unique.insert(std::move(closure));
    }
    return {unique.begin(), unique.end()};
}

/// Graphviz export; nodes of a decomposition are coloured by cyclic class.
inline std::string to_dot(const TransitionGraph& g, const std::vector<CyclicDecomposition>& decompositions = {}) {
    static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                    "#66a61e", "#e6ab02", "#a6761d", "#666666"};
    std::map<NodeId, std::string> colour;
    for (std::size_t k = 0; k < decompositions.size(); ++k) {
        const auto& dec = decompositions[k];
        for (std::size_t i = 0; i < dec.classes.size(); ++i)
            for (NodeId u : dec.classes[i])
                colour[u] = palette[(k + i) % (sizeof(palette) / sizeof(palette[0]))];
    }
    std::ostringstream out;
    out << "digraph transitions {\n";
    for (NodeId u = 0; u < g.node_count(); ++u) {
        out << "  n" << u;
        if (auto it = colour.find(u); it != colour.end())
            out << " [style=filled, fillcolor=\"" << it->second << "\"]";
        out << ";\n";
    }
    for (NodeId u = 0; u < g.node_count(); ++u)
        for (NodeId v : g.successors(u)) out << "  n" << u << " -> n" << v << ";\n";
    out << "}\n";
    return out.str();
}

}  // namespace mixdec
