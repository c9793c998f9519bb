#include "cfiwb/base_graph.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <deque>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "cfiwb/errors.hpp"

namespace cfiwb {

BaseGraph BaseGraph::from_edges(int n, std::vector<std::pair<int, int>> edge_list) {
    if (n < 0) throw DataError("vertex count must be non-negative");
    BaseGraph g;
    g.n = n;
    for (auto& [u, v] : edge_list) {
        if (u == v) throw DataError("loop at vertex " + std::to_string(u));
        if (u < 0 || v < 0 || u >= n || v >= n)
            throw DataError("edge endpoint out of range: (" + std::to_string(u) + "," +
                            std::to_string(v) + ")");
        if (u > v) std::swap(u, v);
    }
    std::sort(edge_list.begin(), edge_list.end());
    for (std::size_t i = 1; i < edge_list.size(); ++i)
        if (edge_list[i] == edge_list[i - 1])
            throw DataError("parallel edge (" + std::to_string(edge_list[i].first) + "," +
                            std::to_string(edge_list[i].second) + ")");
    g.edges = std::move(edge_list);
    g.adj.assign(n, {});
    for (auto [u, v] : g.edges) {
        g.adj[u].push_back(v);
        g.adj[v].push_back(u);
    }
    for (auto& list : g.adj) std::sort(list.begin(), list.end());
    return g;
}

std::vector<int> BaseGraph::degree_sequence() const {
    std::vector<int> d(n);
    for (int v = 0; v < n; ++v) d[v] = degree(v);
    return d;
}

bool BaseGraph::is_regular() const {
    for (int v = 1; v < n; ++v)
        if (degree(v) != degree(0)) return false;
    return true;
}

bool BaseGraph::is_connected() const {
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int count = 1;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                queue.push_back(v);
            }
    }
    return count == n;
}

int BaseGraph::edge_index(int u, int v) const {
    if (u > v) std::swap(u, v);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(u, v));
    if (it == edges.end() || *it != std::make_pair(u, v)) return -1;
    return static_cast<int>(it - edges.begin());
}

std::optional<int> girth(const BaseGraph& g) {
    // BFS from every root; a non-tree edge (x,y) at root r closes a walk of
    // length dist(x)+dist(y)+1 through r, and the minimum over all roots is
    // the exact girth.
    int best = std::numeric_limits<int>::max();
    std::vector<int> dist(g.n), parent(g.n);
    for (int root = 0; root < g.n; ++root) {
        std::fill(dist.begin(), dist.end(), -1);
        std::fill(parent.begin(), parent.end(), -1);
        std::deque<int> queue{root};
        dist[root] = 0;
        while (!queue.empty()) {
            int x = queue.front();
            queue.pop_front();
            for (int y : g.adj[x]) {
                if (dist[y] < 0) {
                    dist[y] = dist[x] + 1;
                    parent[y] = x;
                    queue.push_back(y);
                } else if (y != parent[x] && dist[y] >= 0) {
                    best = std::min(best, dist[x] + dist[y] + 1);
                }
            }
        }
    }
    if (best == std::numeric_limits<int>::max()) return std::nullopt;
    return best;
}

namespace {

// Unit-capacity max-flow from s to t on the vertex-split digraph; counts
// internally-disjoint s-t paths. Arcs 2k and 2k+1 are residual partners.
int vertex_disjoint_paths(const BaseGraph& g, int s, int t) {
    const int N = 2 * g.n; // node 2v = in-copy, 2v+1 = out-copy
    std::vector<int> head, cap;
    std::vector<std::vector<int>> out(N);
    auto add_arc = [&](int a, int b, int c) {
        out[a].push_back(static_cast<int>(head.size()));
        head.push_back(b);
        cap.push_back(c);
        out[b].push_back(static_cast<int>(head.size()));
        head.push_back(a);
        cap.push_back(0);
    };
    for (int v = 0; v < g.n; ++v)
        add_arc(2 * v, 2 * v + 1, (v == s || v == t) ? g.n : 1);
    for (auto [u, v] : g.edges) {
        add_arc(2 * u + 1, 2 * v, g.n);
        add_arc(2 * v + 1, 2 * u, g.n);
    }
    int source = 2 * s + 1, sink = 2 * t;
    int flow = 0;
    while (true) {
        std::vector<int> prev_arc(N, -1);
        std::vector<char> seen(N, 0);
        std::deque<int> queue{source};
        seen[source] = 1;
        while (!queue.empty() && !seen[sink]) {
            int a = queue.front();
            queue.pop_front();
            for (int arc : out[a]) {
                int b = head[arc];
                if (cap[arc] > 0 && !seen[b]) {
                    seen[b] = 1;
                    prev_arc[b] = arc;
                    queue.push_back(b);
                }
            }
        }
        if (!seen[sink]) break;
        for (int b = sink; b != source;) {
            int arc = prev_arc[b];
            cap[arc] -= 1;
            cap[arc ^ 1] += 1;
            b = head[arc ^ 1];
        }
        ++flow;
    }
    return flow;
}

} // namespace

int vertex_connectivity(const BaseGraph& g) {
    if (g.n <= 1) return 0;
    if (!g.is_connected()) return 0;
    int best = g.n - 1;
    bool complete = true;
    for (int s = 0; s < g.n; ++s)
        for (int t = s + 1; t < g.n; ++t) {
            if (g.edge_index(s, t) >= 0) continue;
            complete = false;
            best = std::min(best, vertex_disjoint_paths(g, s, t));
        }
    if (complete) return g.n - 1;
    return best;
}

RequirementReport check_requirements(const BaseGraph& g, const GraphRequirements& r) {
    if (r.min_degree < 0 || r.min_connectivity < 0 || r.min_girth < 0)
        throw UsageError("requirement bounds must be non-negative");
    RequirementReport report;
    auto push = [&](std::string name, std::string required, std::string actual, bool pass) {
        report.checks.push_back({std::move(name), std::move(required), std::move(actual), pass});
        report.pass = report.pass && report.checks.back().pass;
    };
    const auto degrees = g.degree_sequence();
    int mindeg = g.n == 0 ? 0 : *std::min_element(degrees.begin(), degrees.end());
    push("min_degree", ">= " + std::to_string(r.min_degree), std::to_string(mindeg),
         mindeg >= r.min_degree);
    if (r.regular)
        push("regular", "true", g.is_regular() ? "true" : "false", g.is_regular());
    int conn = vertex_connectivity(g);
    push("min_connectivity", ">= " + std::to_string(r.min_connectivity), std::to_string(conn),
         conn >= r.min_connectivity);
    auto gi = girth(g);
    std::string actual_girth = gi ? std::to_string(*gi) : "inf";
    push("min_girth", ">= " + std::to_string(r.min_girth), actual_girth,
         !gi.has_value() || *gi >= r.min_girth);
    return report;
}

namespace {

BaseGraph complete_graph(int n) {
    std::vector<std::pair<int, int>> e;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) e.emplace_back(u, v);
    return BaseGraph::from_edges(n, std::move(e));
}

BaseGraph cycle_graph(int n) {
    std::vector<std::pair<int, int>> e;
    for (int u = 0; u < n; ++u) e.emplace_back(u, (u + 1) % n);
    return BaseGraph::from_edges(n, std::move(e));
}

BaseGraph complete_bipartite_33() {
    std::vector<std::pair<int, int>> e;
    for (int u = 0; u < 3; ++u)
        for (int v = 3; v < 6; ++v) e.emplace_back(u, v);
    return BaseGraph::from_edges(6, std::move(e));
}

BaseGraph petersen_graph() {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < 5; ++i) {
        e.emplace_back(i, (i + 1) % 5);          // outer cycle
        e.emplace_back(5 + i, 5 + (i + 2) % 5);  // inner pentagram
        e.emplace_back(i, 5 + i);                // spokes
    }
    return BaseGraph::from_edges(10, std::move(e));
}

BaseGraph heawood_graph() {
    // LCF [5,-5]^7: a 14-cycle plus chords {i, i+5} for even i.
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < 14; ++i) e.emplace_back(i, (i + 1) % 14);
    for (int i = 0; i < 14; i += 2) e.emplace_back(i, (i + 5) % 14);
    return BaseGraph::from_edges(14, std::move(e));
}

BaseGraph circulant_cubic(int n, int s) {
    if (n < 4 || n > 32 || n % 2 != 0)
        throw UsageError("circ-<n>-<s> requires even n in [4,32]");
    if (s < 1 || 2 * s >= n)
        throw UsageError("circ-<n>-<s> requires 1 <= s < n/2");
    std::vector<std::pair<int, int>> e;
    for (int u = 0; u < n; ++u) {
        e.emplace_back(u, (u + s) % n);
        if (u < n / 2) e.emplace_back(u, u + n / 2);
    }
    return BaseGraph::from_edges(n, std::move(e));
}

} // namespace

BaseGraph catalog_graph(const std::string& name) {
    auto parse_suffix = [](const std::string& s, const std::string& prefix) -> std::optional<int> {
        if (s.size() <= prefix.size() || s.compare(0, prefix.size(), prefix) != 0)
            return std::nullopt;
        const std::string digits = s.substr(prefix.size());
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
            return std::nullopt;
        return std::atoi(digits.c_str());
    };
    if (name == "k33") return complete_bipartite_33();
    if (auto n = parse_suffix(name, "k")) {
        if (*n >= 2 && *n <= 8) return complete_graph(*n);
        throw UsageError("complete graphs are cataloged for 2 <= n <= 8");
    }
    if (auto n = parse_suffix(name, "c")) {
        if (*n >= 3 && *n <= 20) return cycle_graph(*n);
        throw UsageError("cycles are cataloged for 3 <= n <= 20");
    }
    if (name == "cage-3-5" || name == "petersen") return petersen_graph();
    if (name == "cage-3-6" || name == "heawood") return heawood_graph();
    if (name.rfind("circ-", 0) == 0) {
        auto rest = name.substr(5);
        auto dash = rest.find('-');
        if (dash != std::string::npos) {
            int n = std::atoi(rest.substr(0, dash).c_str());
            int s = std::atoi(rest.substr(dash + 1).c_str());
            return circulant_cubic(n, s);
        }
        throw UsageError("circulant key format is circ-<n>-<s>");
    }
    throw UsageError("unknown catalog key: " + name);
}

std::vector<std::string> catalog_names() {
    std::vector<std::string> names;
    for (int n = 2; n <= 8; ++n) names.push_back("k" + std::to_string(n));
    names.push_back("k33");
    for (int n = 3; n <= 20; ++n) names.push_back("c" + std::to_string(n));
    names.push_back("cage-3-5");
    names.push_back("cage-3-6");
    names.push_back("circ-<n>-<s>");
    return names;
}

namespace {

// Fixed Fisher-Yates with rejection-free bounded sampling so that the byte
// output is independent of the standard library in use.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
    std::uint64_t threshold = (-bound) % bound;
    while (true) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

} // namespace

BaseGraph random_regular(int degree, int n, std::uint64_t seed) {
    if (degree < 1 || n <= degree) throw UsageError("need n > degree >= 1");
    if ((static_cast<long long>(n) * degree) % 2 != 0)
        throw UsageError("n * degree must be even");
    std::mt19937_64 rng(seed);
    const int points = n * degree;
    std::vector<int> stub(points);
    constexpr int kBudget = 10000;
    for (int attempt = 0; attempt < kBudget; ++attempt) {
        for (int i = 0; i < points; ++i) stub[i] = i / degree;
        for (int i = points - 1; i > 0; --i) {
            int j = static_cast<int>(bounded_rand(rng, static_cast<std::uint64_t>(i) + 1));
            std::swap(stub[i], stub[j]);
        }
        std::set<std::pair<int, int>> seen;
        bool ok = true;
        for (int i = 0; i < points && ok; i += 2) {
            int u = stub[i], v = stub[i + 1];
            if (u == v) ok = false;
            else if (!seen.insert({std::min(u, v), std::max(u, v)}).second) ok = false;
        }
        if (!ok) continue;
        BaseGraph g = BaseGraph::from_edges(
            n, std::vector<std::pair<int, int>>(seen.begin(), seen.end()));
        if (g.is_connected()) return g;
    }
    throw ResourceError("pairing-model rejection budget exhausted for degree=" +
                        std::to_string(degree) + " n=" + std::to_string(n));
}

nlohmann::ordered_json graph_to_json(const BaseGraph& g) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    auto vertices = nlohmann::ordered_json::array();
    for (int v = 0; v < g.n; ++v) vertices.push_back(v);
    doc["vertices"] = std::move(vertices);
    auto edges = nlohmann::ordered_json::array();
    for (auto [u, v] : g.edges) edges.push_back(nlohmann::ordered_json::array({u, v}));
    doc["edges"] = std::move(edges);
    doc["meta"] = nlohmann::ordered_json::object();
    return doc;
}

BaseGraph graph_from_json(const nlohmann::json& doc) {
    try {
        if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("edges"))
            throw DataError("graph document must contain vertices and edges");
        if (doc.value("schema_version", 0) != 1)
            throw DataError("unsupported graph schema_version");
        const auto& verts = doc.at("vertices");
        int n = static_cast<int>(verts.size());
        for (int i = 0; i < n; ++i)
            if (verts.at(i).get<int>() != i)
                throw DataError("vertices must be 0..n-1 in order");
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : doc.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw DataError("edge must be a pair");
            edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        }
        return BaseGraph::from_edges(n, std::move(edges));
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("malformed graph document: ") + ex.what());
    }
}

std::string graph_to_dot(const BaseGraph& g) {
    std::ostringstream out;
    out << "graph G {\n";
    for (int v = 0; v < g.n; ++v) out << "  " << v << ";\n";
    for (auto [u, v] : g.edges) out << "  " << u << " -- " << v << ";\n";
    out << "}\n";
    return out.str();
}

} // namespace cfiwb
