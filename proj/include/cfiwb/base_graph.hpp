#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace cfiwb {

/// Ordered simple graph. Vertices are 0..n-1 and the vertex order is the
/// integer order; edges are stored as (u, v) with u < v, sorted
/// lexicographically, so the edge index is a stable address.
struct BaseGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::vector<int>> adj; // sorted neighbor lists

    static BaseGraph from_edges(int n, std::vector<std::pair<int, int>> edge_list);

    int degree(int v) const { return static_cast<int>(adj.at(v).size()); }
    std::vector<int> degree_sequence() const;
    bool is_regular() const;
    bool is_connected() const;
    int edge_index(int u, int v) const; // -1 if {u,v} is not an edge

    bool operator==(const BaseGraph& other) const {
        return n == other.n && edges == other.edges;
    }
};

/// Shortest cycle length; nullopt for forests.
std::optional<int> girth(const BaseGraph& g);

/// Minimum number of vertices whose removal disconnects the graph
/// (n-1 for complete graphs, 0 for disconnected ones). Exact, via
/// vertex-capacitated max-flow over non-adjacent pairs.
int vertex_connectivity(const BaseGraph& g);

struct GraphRequirements {
    int min_degree = 0;
    bool regular = false;
    int min_connectivity = 0;
    int min_girth = 0;
};

struct RequirementCheck {
    std::string name;
    std::string required;
    std::string actual;
    bool pass = false;
};

struct RequirementReport {
    std::vector<RequirementCheck> checks;
    bool pass = true;
};

RequirementReport check_requirements(const BaseGraph& g, const GraphRequirements& r);

/// Fixed catalog: k2..k8, k33, c3..c20, cage-3-5 (Petersen), cage-3-6
/// (Heawood), and 3-regular circulants circ-<n>-<s> = C_n(s, n/2).
BaseGraph catalog_graph(const std::string& name);
std::vector<std::string> catalog_names();

/// Pairing-model sampler, rejecting loops, parallel edges and disconnected
/// outputs. Deterministic for fixed (degree, n, seed).
BaseGraph random_regular(int degree, int n, std::uint64_t seed);

nlohmann::ordered_json graph_to_json(const BaseGraph& g);
BaseGraph graph_from_json(const nlohmann::json& doc);
std::string graph_to_dot(const BaseGraph& g);

} // namespace cfiwb
