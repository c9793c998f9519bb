#include "cfiwb/symmetry.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>

#include "cfiwb/algebra.hpp"
#include "cfiwb/errors.hpp"

namespace cfiwb {

long long FlowAutomorphism::twist(const BaseGraph& g, int from, int to) const {
    int e = g.edge_index(from, to);
    if (e < 0) throw UsageError("twist queried on a non-edge");
    long long v = edge_twist[e];
    if (from > to) v = (mod - v) % mod;
    return v;
}

std::vector<FlowAutomorphism> flow_basis(const BaseGraph& g, long long m) {
    if (m < 2) throw UsageError("modulus must be at least 2");
    if (!g.is_connected()) throw UsageError("flow basis requires a connected graph");
    std::vector<FlowAutomorphism> basis;
    if (g.n == 0) return basis;
    std::vector<int> parent(g.n, -1);
    std::vector<char> seen(g.n, 0);
    std::vector<char> tree_edge(g.edges.size(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v : g.adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                parent[v] = u;
                tree_edge[g.edge_index(u, v)] = 1;
                queue.push_back(v);
            }
    }
    std::vector<int> depth(g.n, 0);
    // parent pointers follow BFS order, so depths are computable in id order
    // after a pass that respects discovery; recompute by walking parents.
    for (int v = 0; v < g.n; ++v) {
        int d = 0, x = v;
        while (parent[x] >= 0) {
            x = parent[x];
            ++d;
        }
        depth[v] = d;
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (tree_edge[e]) continue;
        auto [u, v] = g.edges[e];
        FlowAutomorphism f;
        f.mod = m;
        f.edge_twist.assign(g.edges.size(), 0);
        // walk the cycle u -> tree path -> v -> (v,u) -> u
        auto add_step = [&](int from, int to, long long amount) {
            int idx = g.edge_index(from, to);
            long long val = amount;
            if (from > to) val = m - val;
            f.edge_twist[idx] = ((f.edge_twist[idx] + val) % m + m) % m;
        };
        int a = u, b = v;
        std::vector<int> left, right; // paths up to the meeting vertex
        while (depth[a] > depth[b]) {
            left.push_back(a);
            a = parent[a];
        }
        while (depth[b] > depth[a]) {
            right.push_back(b);
            b = parent[b];
        }
        while (a != b) {
            left.push_back(a);
            right.push_back(b);
            a = parent[a];
            b = parent[b];
        }
        // left: u ... child-of-lca, then lca, then reversed right: ... v
        std::vector<int> cycle;
        cycle.push_back(u);
        for (std::size_t i = 1; i < left.size(); ++i) cycle.push_back(left[i]);
        if (!left.empty()) cycle.push_back(a);
        else if (a != u) cycle.push_back(a);
        for (std::size_t i = right.size(); i-- > 0;) cycle.push_back(right[i]);
        if (cycle.back() != v) cycle.push_back(v);
        for (std::size_t i = 0; i + 1 < cycle.size(); ++i)
            add_step(cycle[i], cycle[i + 1], 1);
        add_step(v, u, 1);
        basis.push_back(std::move(f));
    }
    return basis;
}

FlowAutomorphism combine_flows(const BaseGraph& g, long long m,
                               std::span<const FlowAutomorphism> basis,
                               std::span<const long long> coeffs) {
    if (basis.size() != coeffs.size()) throw UsageError("coefficient count mismatch");
    FlowAutomorphism f;
    f.mod = m;
    f.edge_twist.assign(g.edges.size(), 0);
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            f.edge_twist[e] = (f.edge_twist[e] + coeffs[i] * basis[i].edge_twist[e]) % m;
    return f;
}

namespace {

std::vector<int> dense_ranks(const std::vector<int>& ranks) {
    std::vector<int> sorted(ranks);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<int> out(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i)
        out[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), ranks[i]) -
                                  sorted.begin());
    return out;
}

std::vector<int> dense_pair_ranks(const PairOrderRelation& po) {
    std::vector<int> sorted(po.rank);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<int> out(po.rank.size());
    for (std::size_t i = 0; i < po.rank.size(); ++i)
        out[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), po.rank[i]) -
                                  sorted.begin());
    return out;
}

} // namespace

bool check_structure_map(const CfiStructure& s, const CfiStructure& t,
                         const std::vector<int>& image) {
    if (s.n != t.n || static_cast<int>(image.size()) != s.n) return false;
    std::vector<char> hit(t.n, 0);
    for (int x = 0; x < s.n; ++x) {
        if (image[x] < 0 || image[x] >= t.n || hit[image[x]]) return false;
        hit[image[x]] = 1;
    }
    auto rs = dense_ranks(s.preorder_rank);
    auto rt = dense_ranks(t.preorder_rank);
    for (int x = 0; x < s.n; ++x)
        if (rs[x] != rt[image[x]]) return false;
    if (s.schema() != t.schema()) return false;
    for (std::size_t ri = 0; ri < s.relations.size(); ++ri) {
        const Relation& rel_s = s.relations[ri];
        const Relation* rel_t = t.find_relation(rel_s.name);
        if (!rel_t) return false;
        if (auto* es = std::get_if<ExplicitRelation>(&rel_s.table)) {
            auto* et = std::get_if<ExplicitRelation>(&rel_t->table);
            if (!et || es->arity != et->arity || es->tuples.size() != et->tuples.size())
                return false;
            std::vector<int> mapped(es->arity);
            for (const auto& tuple : es->tuples) {
                for (int i = 0; i < es->arity; ++i) mapped[i] = image[tuple[i]];
                if (!std::binary_search(et->tuples.begin(), et->tuples.end(), mapped))
                    return false;
            }
            // equal counts + injectivity give the reverse direction
        } else {
            const auto& ps = std::get<PairOrderRelation>(rel_s.table);
            auto* pt = std::get_if<PairOrderRelation>(&rel_t->table);
            if (!pt) return false;
            auto ds = dense_pair_ranks(ps);
            auto dt = dense_pair_ranks(*pt);
            for (int x = 0; x < s.n; ++x)
                for (int y = 0; y < s.n; ++y)
                    if (ds[std::size_t(x) * s.n + y] !=
                        dt[std::size_t(image[x]) * s.n + image[y]])
                        return false;
        }
    }
    return true;
}

namespace {

// label -> element lookup for provenance-carrying structures
std::map<std::pair<int, std::vector<long long>>, int> label_index(const CfiStructure& s) {
    std::map<std::pair<int, std::vector<long long>>, int> idx;
    const auto& p = *s.provenance;
    for (int x = 0; x < s.n; ++x) idx[{p.gadget[x], p.label[x]}] = x;
    return idx;
}

std::vector<int> flow_image(const CfiStructure& s, const CfiStructure& target,
                            const FlowAutomorphism& f) {
    const auto& p = *s.provenance;
    const BaseGraph& g = p.twist.base;
    const long long m = p.twist.mod;
    auto idx = label_index(target);
    std::vector<int> image(s.n, -1);
    for (int x = 0; x < s.n; ++x) {
        int u = p.gadget[x];
        std::vector<long long> lab = p.label[x];
        if (p.variant == CfiVariant::Outer) {
            int v = static_cast<int>(lab[1]);
            lab[0] = (lab[0] + f.twist(g, u, v)) % m;
        } else {
            for (int slot = 0; slot < g.degree(u); ++slot)
                lab[slot] = (lab[slot] + f.twist(g, u, g.adj[u][slot])) % m;
        }
        auto it = idx.find({u, lab});
        if (it == idx.end()) throw InternalError("flow image leaves the universe");
        image[x] = it->second;
    }
    return image;
}

} // namespace

StructureMap apply_flow(const CfiStructure& s, const FlowAutomorphism& f) {
    if (!s.provenance) throw UsageError("apply_flow requires provenance");
    const auto& p = *s.provenance;
    if (f.mod != p.twist.mod || f.edge_twist.size() != p.twist.base.edges.size())
        throw UsageError("flow does not match the structure's base graph");
    StructureMap map;
    map.image = flow_image(s, s, f);
    if (!check_structure_map(s, s, map.image))
        throw InternalError("flow-induced map is not an automorphism");
    map.verified = true;
    return map;
}

std::vector<std::vector<int>> flow_group_maps(const CfiStructure& s, long long max_group_order) {
    if (!s.provenance) throw UsageError("flow group requires provenance");
    const auto& p = *s.provenance;
    const BaseGraph& g = p.twist.base;
    const long long m = p.twist.mod;
    auto basis = flow_basis(g, m);
    long long order = 1;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        order *= m;
        if (order > max_group_order)
            throw ResourceError("flow group order exceeds the enumeration bound");
    }
    std::set<std::vector<int>> maps;
    std::vector<long long> coeffs(basis.size(), 0);
    while (true) {
        FlowAutomorphism f = combine_flows(g, m, basis, coeffs);
        StructureMap sm = apply_flow(s, f);
        maps.insert(sm.image);
        int pos = 0;
        while (pos < static_cast<int>(coeffs.size()) && coeffs[pos] == m - 1) coeffs[pos++] = 0;
        if (pos == static_cast<int>(coeffs.size())) break;
        ++coeffs[pos];
    }
    return {maps.begin(), maps.end()};
}

namespace {

// Generic backtracking over preorder-compatible bijections preserving every
// relation; used both for automorphism enumeration and isomorphism search.
struct BijectionSearch {
    const CfiStructure& s;
    const CfiStructure& t;
    std::vector<int> rank_s, rank_t;
    std::vector<std::vector<int>> dense_po_s, dense_po_t; // per pair-order relation
    std::vector<const ExplicitRelation*> expl_s, expl_t;
    std::vector<std::vector<std::vector<int>>> incident_s, incident_t; // rel -> element -> tuple ids
    std::vector<int> order;            // assignment order over s's universe
    std::vector<int> image, preimage;  // running partial map
    bool collect_all = false;
    std::vector<std::vector<int>> solutions;

    BijectionSearch(const CfiStructure& s_, const CfiStructure& t_) : s(s_), t(t_) {
        rank_s = dense_ranks(s.preorder_rank);
        rank_t = dense_ranks(t.preorder_rank);
        for (std::size_t ri = 0; ri < s.relations.size(); ++ri) {
            const Relation& rs = s.relations[ri];
            const Relation& rt = t.relations[ri];
            if (auto* es = std::get_if<ExplicitRelation>(&rs.table)) {
                expl_s.push_back(es);
                expl_t.push_back(&std::get<ExplicitRelation>(rt.table));
            } else {
                dense_po_s.push_back(dense_pair_ranks(std::get<PairOrderRelation>(rs.table)));
                dense_po_t.push_back(dense_pair_ranks(std::get<PairOrderRelation>(rt.table)));
            }
        }
        auto build_incidence = [](const std::vector<const ExplicitRelation*>& rels, int n) {
            std::vector<std::vector<std::vector<int>>> inc(rels.size());
            for (std::size_t r = 0; r < rels.size(); ++r) {
                inc[r].assign(n, {});
                for (std::size_t ti = 0; ti < rels[r]->tuples.size(); ++ti) {
                    std::set<int> elems(rels[r]->tuples[ti].begin(), rels[r]->tuples[ti].end());
                    for (int e : elems) inc[r][e].push_back(static_cast<int>(ti));
                }
            }
            return inc;
        };
        incident_s = build_incidence(expl_s, s.n);
        incident_t = build_incidence(expl_t, t.n);
        build_order();
        image.assign(s.n, -1);
        preimage.assign(t.n, -1);
    }

    // BFS over co-occurrence in explicit tuples plus preorder classes keeps
    // tightly constrained elements adjacent in the assignment order.
    void build_order() {
        std::vector<std::set<int>> adj(s.n);
        for (std::size_t r = 0; r < expl_s.size(); ++r)
            for (const auto& tuple : expl_s[r]->tuples)
                for (std::size_t i = 0; i < tuple.size(); ++i)
                    for (std::size_t j = i + 1; j < tuple.size(); ++j) {
                        adj[tuple[i]].insert(tuple[j]);
                        adj[tuple[j]].insert(tuple[i]);
                    }
        std::map<int, std::vector<int>> by_rank;
        for (int x = 0; x < s.n; ++x) by_rank[rank_s[x]].push_back(x);
        std::vector<char> placed(s.n, 0);
        std::deque<int> queue;
        for (int x = 0; x < s.n; ++x) {
            if (placed[x]) continue;
            queue.push_back(x);
            placed[x] = 1;
            while (!queue.empty()) {
                int a = queue.front();
                queue.pop_front();
                order.push_back(a);
                for (int b : by_rank[rank_s[a]])
                    if (!placed[b]) {
                        placed[b] = 1;
                        queue.push_back(b);
                    }
                for (int b : adj[a])
                    if (!placed[b]) {
                        placed[b] = 1;
                        queue.push_back(b);
                    }
            }
        }
    }

    bool feasible(int x, int y) const {
        if (rank_s[x] != rank_t[y]) return false;
        for (std::size_t r = 0; r < dense_po_s.size(); ++r) {
            const auto& ds = dense_po_s[r];
            const auto& dt = dense_po_t[r];
            if (ds[std::size_t(x) * s.n + x] != dt[std::size_t(y) * t.n + y]) return false;
            for (int x2 = 0; x2 < s.n; ++x2) {
                int y2 = image[x2];
                if (y2 < 0) continue;
                if (ds[std::size_t(x) * s.n + x2] != dt[std::size_t(y) * t.n + y2]) return false;
                if (ds[std::size_t(x2) * s.n + x] != dt[std::size_t(y2) * t.n + y]) return false;
            }
        }
        for (std::size_t r = 0; r < expl_s.size(); ++r) {
            std::vector<int> mapped;
            for (int ti : incident_s[r][x]) {
                const auto& tuple = expl_s[r]->tuples[ti];
                bool complete = true;
                for (int e : tuple)
                    if (e != x && image[e] < 0) {
                        complete = false;
                        break;
                    }
                if (!complete) continue;
                mapped.assign(tuple.size(), 0);
                for (std::size_t i = 0; i < tuple.size(); ++i)
                    mapped[i] = tuple[i] == x ? y : image[tuple[i]];
                if (!std::binary_search(expl_t[r]->tuples.begin(), expl_t[r]->tuples.end(), mapped))
                    return false;
            }
            for (int ti : incident_t[r][y]) {
                const auto& tuple = expl_t[r]->tuples[ti];
                bool complete = true;
                for (int e : tuple)
                    if (e != y && preimage[e] < 0) {
                        complete = false;
                        break;
                    }
                if (!complete) continue;
                mapped.assign(tuple.size(), 0);
                for (std::size_t i = 0; i < tuple.size(); ++i)
                    mapped[i] = tuple[i] == y ? x : preimage[tuple[i]];
                if (!std::binary_search(expl_s[r]->tuples.begin(), expl_s[r]->tuples.end(), mapped))
                    return false;
            }
        }
        return true;
    }

    bool search(std::size_t idx) {
        if (idx == order.size()) {
            solutions.push_back(image);
            return !collect_all;
        }
        int x = order[idx];
        for (int y = 0; y < t.n; ++y) {
            if (preimage[y] >= 0) continue;
            if (!feasible(x, y)) continue;
            image[x] = y;
            preimage[y] = x;
            if (search(idx + 1)) return true;
            image[x] = -1;
            preimage[y] = -1;
        }
        return false;
    }
};

bool schemas_match(const CfiStructure& s, const CfiStructure& t) {
    if (s.schema() != t.schema()) return false;
    for (std::size_t i = 0; i < s.relations.size(); ++i)
        if (s.relations[i].is_pair_order() != t.relations[i].is_pair_order()) return false;
    return true;
}

} // namespace

std::vector<StructureMap> brute_force_automorphisms(const CfiStructure& s, int max_universe) {
    if (s.n > max_universe)
        throw ResourceError("universe size " + std::to_string(s.n) +
                            " exceeds the automorphism search bound " +
                            std::to_string(max_universe));
    BijectionSearch search(s, s);
    search.collect_all = true;
    search.search(0);
    std::sort(search.solutions.begin(), search.solutions.end());
    std::vector<StructureMap> out;
    for (auto& image : search.solutions) {
        if (!check_structure_map(s, s, image)) throw InternalError("search produced a non-automorphism");
        out.push_back({std::move(image), true});
    }
    return out;
}

IsoSearchResult brute_force_isomorphism(const CfiStructure& s, const CfiStructure& t,
                                        int max_universe) {
    IsoSearchResult res;
    if (s.n != t.n) return res;
    if (s.n > max_universe)
        throw ResourceError("universe size " + std::to_string(s.n) +
                            " exceeds the isomorphism search bound " + std::to_string(max_universe));
    if (!schemas_match(s, t)) return res;
    {
        // preorder class profiles must agree
        auto rs = dense_ranks(s.preorder_rank);
        auto rt = dense_ranks(t.preorder_rank);
        std::map<int, int> hs, ht;
        for (int v : rs) ++hs[v];
        for (int v : rt) ++ht[v];
        if (hs != ht) return res;
    }
    BijectionSearch search(s, t);
    if (search.search(0)) {
        auto image = search.solutions.front();
        if (!check_structure_map(s, t, image)) throw InternalError("search produced a non-isomorphism");
        res.isomorphic = true;
        res.witness = StructureMap{std::move(image), true};
    }
    return res;
}

bool cfi_isomorphic_predicate(const TwistAssignment& lambda, const TwistAssignment& sigma) {
    if (!lambda.same_domain(sigma))
        throw UsageError("twist assignments live over different base graphs or moduli");
    return lambda.sum() == sigma.sum();
}

StructureMap isomorphism_witness(const BaseGraph& g, long long m, const TwistAssignment& lambda,
                                 const TwistAssignment& sigma, CfiVariant variant) {
    if (!lambda.same_domain(sigma) || !(lambda.base == g) || lambda.mod != m)
        throw UsageError("twist assignments do not match the given base graph and modulus");
    if (lambda.sum() != sigma.sum())
        throw UsageError("twist sums differ; no isomorphism exists");
    // Unknowns: x[2e] = delta(u->v), x[2e+1] = delta(v->u) for edge e = {u,v}, u < v.
    const int E = static_cast<int>(g.edges.size());
    RingMatrix sys(E + g.n, 2 * E, m);
    std::vector<long long> rhs(E + g.n, 0);
    for (int e = 0; e < E; ++e) {
        sys.at(e, 2 * e) = 1;
        sys.at(e, 2 * e + 1) = 1;
        rhs[e] = ((sigma.values[e] - lambda.values[e]) % m + m) % m;
    }
    for (int u = 0; u < g.n; ++u)
        for (int v : g.adj[u]) {
            int e = g.edge_index(u, v);
            int col = 2 * e + (u < v ? 0 : 1);
            sys.at(E + u, col) = (sys.at(E + u, col) + 1) % m;
        }
    AffineSolutionSet sol = zm_solve(sys, rhs);
    if (!sol.consistent)
        throw InternalError("relabeling system inconsistent despite equal twist sums");

    CfiStructure from = variant == CfiVariant::Outer ? build_cfi_outer(g, m, lambda)
                                                     : build_cfi_inner(g, m, lambda);
    CfiStructure to = variant == CfiVariant::Outer ? build_cfi_outer(g, m, sigma)
                                                   : build_cfi_inner(g, m, sigma);
    const auto& p = *from.provenance;
    auto idx = label_index(to);
    std::vector<int> image(from.n, -1);
    for (int x = 0; x < from.n; ++x) {
        int u = p.gadget[x];
        std::vector<long long> lab = p.label[x];
        auto shift = [&](int v) {
            int e = g.edge_index(u, v);
            return sol.particular[2 * e + (u < v ? 0 : 1)];
        };
        if (variant == CfiVariant::Outer) {
            int v = static_cast<int>(lab[1]);
            lab[0] = (lab[0] + shift(v)) % m;
        } else {
            for (int slot = 0; slot < g.degree(u); ++slot)
                lab[slot] = (lab[slot] + shift(g.adj[u][slot])) % m;
        }
        auto it = idx.find({u, lab});
        if (it == idx.end()) throw InternalError("witness image leaves the universe");
        image[x] = it->second;
    }
    if (!check_structure_map(from, to, image))
        throw InternalError("constructed witness failed verification");
    return StructureMap{std::move(image), true};
}

std::vector<int> k_orbits(const CfiStructure& s, int k, long long max_group_order) {
    if (k < 1) throw UsageError("k must be positive");
    auto maps = flow_group_maps(s, max_group_order);
    long long total = 1;
    for (int i = 0; i < k; ++i) {
        total *= s.n;
        if (total > (1LL << 26)) throw ResourceError("tuple space too large for orbit enumeration");
    }
    std::vector<int> orbit(total, -1);
    std::vector<int> tuple(k), mapped(k);
    int next_orbit = 0;
    for (long long t = 0; t < total; ++t) {
        if (orbit[t] >= 0) continue;
        long long rest = t;
        for (int i = k - 1; i >= 0; --i) {
            tuple[i] = static_cast<int>(rest % s.n);
            rest /= s.n;
        }
        for (const auto& gmap : maps) {
            long long idx2 = 0;
            for (int i = 0; i < k; ++i) idx2 = idx2 * s.n + gmap[tuple[i]];
            orbit[idx2] = next_orbit;
        }
        ++next_orbit;
    }
    return orbit;
}

// ---------------------------------------------------------------------------
// CFI-problem decider

namespace {

struct SlotPartition {
    // classes of a gadget's elements toward one neighboring gadget
    std::vector<int> class_of; // local element -> class id
    int classes = 0;
};

// Shared final step: edge/vertex shift system over Z_m.
bool shift_system_consistent(int num_gadgets, long long m,
                             const std::vector<std::pair<int, int>>& edges,
                             const std::vector<long long>& edge_const,
                             const std::vector<long long>& gadget_const,
                             const std::vector<std::vector<int>>& gadget_slots_of_edge) {
    // variable per (edge, side): x[2e] for the smaller gadget's slot
    const int E = static_cast<int>(edges.size());
    RingMatrix sys(E + num_gadgets, 2 * E, m);
    std::vector<long long> rhs(E + num_gadgets, 0);
    for (int e = 0; e < E; ++e) {
        sys.at(e, 2 * e) = 1;
        sys.at(e, 2 * e + 1) = 1;
        rhs[e] = ((-edge_const[e]) % m + m) % m;
    }
    for (int u = 0; u < num_gadgets; ++u) {
        for (int col : gadget_slots_of_edge[u]) sys.at(E + u, col) = (sys.at(E + u, col) + 1) % m;
        rhs[E + u] = ((-gadget_const[u]) % m + m) % m;
    }
    return zm_solve(sys, rhs).consistent;
}

bool solve_outer(const CfiStructure& s) {
    const Relation* rel_r = s.find_relation("R");
    const Relation* rel_c = s.find_relation("C");
    const Relation* rel_i = s.find_relation("I");
    if (!rel_r || !rel_c || !rel_i) throw DataError("outer structure needs R, C, I");
    const auto& R = std::get<ExplicitRelation>(rel_r->table);
    const auto& C = std::get<ExplicitRelation>(rel_c->table);
    const auto& I = std::get<ExplicitRelation>(rel_i->table);
    if (C.arity != 2 || I.arity != 2) throw DataError("unexpected arities in outer structure");

    auto rank = dense_ranks(s.preorder_rank);
    int num_slots = rank.empty() ? 0 : *std::max_element(rank.begin(), rank.end()) + 1;
    std::vector<std::vector<int>> slot_members(num_slots);
    for (int x = 0; x < s.n; ++x) slot_members[rank[x]].push_back(x);
    if (num_slots == 0) throw DataError("empty structure");
    const std::size_t m = slot_members[0].size();
    if (m < 2) throw DataError("slot classes must have at least two elements");
    for (const auto& members : slot_members)
        if (members.size() != m) throw DataError("slot classes have unequal sizes");

    // cycle successor within each slot from C
    std::vector<int> succ(s.n, -1);
    for (const auto& t : C.tuples) {
        if (rank[t[0]] != rank[t[1]]) throw DataError("C crosses slot classes");
        if (succ[t[0]] >= 0) throw DataError("C is not a union of directed cycles");
        succ[t[0]] = t[1];
    }
    std::vector<long long> gauge(s.n, -1);
    for (const auto& members : slot_members) {
        int start = members.front();
        long long a = 0;
        int x = start;
        do {
            if (x < 0 || gauge[x] >= 0) throw DataError("C cycle structure broken");
            gauge[x] = a++;
            x = succ[x];
        } while (x != start && a <= static_cast<long long>(m));
        if (x != start || a != static_cast<long long>(m))
            throw DataError("C cycles do not cover slots exactly");
    }

    // gadgets: R tuples connect slots of one gadget
    std::vector<int> gadget_of_slot(num_slots, -1);
    {
        std::vector<std::set<int>> slot_adj(num_slots);
        for (const auto& t : R.tuples) {
            std::set<int> slots;
            for (int e : t) slots.insert(rank[e]);
            if (static_cast<int>(slots.size()) != R.arity)
                throw DataError("R tuple does not span distinct slots");
            for (int a : slots)
                for (int b : slots)
                    if (a != b) slot_adj[a].insert(b);
        }
        int next = 0;
        for (int q = 0; q < num_slots; ++q) {
            if (gadget_of_slot[q] >= 0) continue;
            std::deque<int> queue{q};
            gadget_of_slot[q] = next;
            while (!queue.empty()) {
                int a = queue.front();
                queue.pop_front();
                for (int b : slot_adj[a])
                    if (gadget_of_slot[b] < 0) {
                        gadget_of_slot[b] = next;
                        queue.push_back(b);
                    }
            }
            ++next;
        }
    }
    int num_gadgets = *std::max_element(gadget_of_slot.begin(), gadget_of_slot.end()) + 1;

    // R sums constant per gadget
    std::vector<long long> gadget_const(num_gadgets, -1);
    std::vector<std::set<int>> gadget_slots(num_gadgets);
    for (int q = 0; q < num_slots; ++q) gadget_slots[gadget_of_slot[q]].insert(q);
    for (const auto& t : R.tuples) {
        long long sum = 0;
        for (int e : t) sum += gauge[e];
        sum %= static_cast<long long>(m);
        int u = gadget_of_slot[rank[t[0]]];
        std::set<int> slots;
        for (int e : t) slots.insert(rank[e]);
        if (slots != gadget_slots[u]) throw DataError("R tuple does not cover its gadget's slots");
        if (gadget_const[u] < 0) gadget_const[u] = sum;
        else if (gadget_const[u] != sum) throw DataError("R sums are not constant per gadget");
    }
    for (long long v : gadget_const)
        if (v < 0) throw DataError("gadget without R tuples");

    // slot matching and edge constants from I
    std::vector<int> matched_slot(num_slots, -1);
    std::vector<long long> slot_pair_const(num_slots, -1);
    for (const auto& t : I.tuples) {
        int q = rank[t[0]], q2 = rank[t[1]];
        if (gadget_of_slot[q] == gadget_of_slot[q2]) throw DataError("I connects a gadget to itself");
        if (matched_slot[q] < 0) matched_slot[q] = q2;
        else if (matched_slot[q] != q2) throw DataError("slot matched to two partners by I");
        long long c = (gauge[t[0]] + gauge[t[1]]) % static_cast<long long>(m);
        if (slot_pair_const[q] < 0) slot_pair_const[q] = c;
        else if (slot_pair_const[q] != c) throw DataError("I sums not constant per slot pair");
    }
    std::vector<std::pair<int, int>> edges;
    std::vector<long long> edge_const;
    std::vector<std::vector<int>> gadget_cols(num_gadgets);
    for (int q = 0; q < num_slots; ++q) {
        int q2 = matched_slot[q];
        if (q2 < 0) throw DataError("slot not matched by I");
        if (matched_slot[q2] != q) throw DataError("I slot matching not symmetric");
        if (slot_pair_const[q] != slot_pair_const[q2]) throw DataError("I constants asymmetric");
        if (q < q2) {
            int e = static_cast<int>(edges.size());
            edges.emplace_back(gadget_of_slot[q], gadget_of_slot[q2]);
            edge_const.push_back(slot_pair_const[q]);
            gadget_cols[gadget_of_slot[q]].push_back(2 * e);
            gadget_cols[gadget_of_slot[q2]].push_back(2 * e + 1);
        }
    }
    return shift_system_consistent(num_gadgets, static_cast<long long>(m), edges, edge_const,
                                   gadget_const, gadget_cols);
}

// Candidate Z_m labels for a gadget's slot classes, validated against the
// observed tag-set orders; all consistent labelings differ by per-slot
// shifts, which the final system absorbs.
struct GadgetDecoder {
    long long m;
    int deg;
    std::vector<int> members;              // global element ids
    std::vector<SlotPartition> slots;      // per neighbor, over local indices
    std::vector<int> neighbor_gadget;      // recovered base neighbor, ascending
    const std::vector<int>* obs_n;         // observed dense ranks, global table
    const std::vector<int>* obs_c;
    int total_n;                           // global universe size

    std::vector<std::vector<long long>> class_label; // slot -> class -> label
    std::vector<std::vector<long long>> labels;      // local element -> coordinate vector

    bool decode() {
        class_label.assign(slots.size(), {});
        for (std::size_t q = 0; q < slots.size(); ++q)
            class_label[q].assign(slots[q].classes, -1);
        // gauge: the class containing local element 0 gets label 0
        for (std::size_t q = 0; q < slots.size(); ++q) class_label[q][slots[q].class_of[0]] = 0;
        return assign_slot(0);
    }

    bool assign_slot(std::size_t q) {
        if (q == slots.size()) return validate();
        std::vector<int> unlabeled;
        for (int c = 0; c < slots[q].classes; ++c)
            if (class_label[q][c] < 0) unlabeled.push_back(c);
        std::vector<long long> free_labels;
        for (long long v = 1; v < m; ++v) free_labels.push_back(v);
        std::sort(unlabeled.begin(), unlabeled.end());
        return permute(q, unlabeled, free_labels, 0);
    }

    bool permute(std::size_t q, std::vector<int>& classes, std::vector<long long>& labels_left,
                 std::size_t at) {
        if (at == classes.size()) return assign_slot(q + 1);
        for (std::size_t pick = at; pick < labels_left.size(); ++pick) {
            std::swap(labels_left[at], labels_left[pick]);
            class_label[q][classes[at]] = labels_left[at];
            if (permute(q, classes, labels_left, at + 1)) return true;
            class_label[q][classes[at]] = -1;
            std::swap(labels_left[at], labels_left[pick]);
        }
        return false;
    }

    bool validate() {
        const int sz = static_cast<int>(members.size());
        labels.assign(sz, std::vector<long long>(slots.size()));
        for (int i = 0; i < sz; ++i)
            for (std::size_t q = 0; q < slots.size(); ++q)
                labels[i][q] = class_label[q][slots[q].class_of[i]];
        // injectivity
        {
            std::set<std::vector<long long>> seen(labels.begin(), labels.end());
            if (static_cast<int>(seen.size()) != sz) return false;
        }
        return order_matches(*obs_n, /*is_c=*/false) && order_matches(*obs_c, /*is_c=*/true);
    }

    bool order_matches(const std::vector<int>& obs, bool is_c) const {
        const int sz = static_cast<int>(members.size());
        std::vector<std::pair<int, std::vector<int>>> entries; // (obs rank, candidate tag set)
        entries.reserve(std::size_t(sz) * sz);
        for (int i = 0; i < sz; ++i)
            for (int j = 0; j < sz; ++j) {
                std::vector<int> tags;
                for (std::size_t q = 0; q < slots.size(); ++q) {
                    bool in = is_c ? (labels[i][q] + 1) % m == labels[j][q]
                                   : labels[i][q] == labels[j][q];
                    if (in) tags.push_back(neighbor_gadget[q]);
                }
                entries.emplace_back(obs[std::size_t(members[i]) * total_n + members[j]],
                                     std::move(tags));
            }
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < entries.size(); ++i) {
            const bool same_rank = entries[i].first == entries[i - 1].first;
            const auto cmp = entries[i - 1].second <=> entries[i].second;
            if (same_rank && cmp != 0) return false;
            if (!same_rank && cmp >= 0) return false;
        }
        return true;
    }
};

bool solve_inner(const CfiStructure& s) {
    const Relation* rel_n = s.find_relation("N");
    const Relation* rel_c = s.find_relation("C");
    const Relation* rel_i = s.find_relation("I");
    if (!rel_n || !rel_c || !rel_i) throw DataError("inner structure needs N, C, I");
    auto* po_n = std::get_if<PairOrderRelation>(&rel_n->table);
    auto* po_c = std::get_if<PairOrderRelation>(&rel_c->table);
    auto* ex_i = std::get_if<ExplicitRelation>(&rel_i->table);
    if (!po_n || !po_c || !ex_i || ex_i->arity != 2)
        throw DataError("unexpected table kinds in inner structure");

    auto rank = dense_ranks(s.preorder_rank);
    int num_gadgets = rank.empty() ? 0 : *std::max_element(rank.begin(), rank.end()) + 1;
    if (num_gadgets < 2) throw DataError("need at least two gadgets");
    std::vector<std::vector<int>> members(num_gadgets);
    std::vector<int> local_of(s.n, -1);
    for (int x = 0; x < s.n; ++x) {
        local_of[x] = static_cast<int>(members[rank[x]].size());
        members[rank[x]].push_back(x);
    }

    // neighbor gadgets via I
    std::vector<std::set<int>> nbr(num_gadgets);
    std::vector<std::vector<std::vector<int>>> i_nbrs(num_gadgets); // gadget -> local -> I-neighbors
    for (int u = 0; u < num_gadgets; ++u) i_nbrs[u].assign(members[u].size(), {});
    for (const auto& t : ex_i->tuples) {
        int u = rank[t[0]], w = rank[t[1]];
        if (u == w) throw DataError("I connects a gadget to itself");
        nbr[u].insert(w);
        i_nbrs[u][local_of[t[0]]].push_back(t[1]);
    }

    auto obs_n = dense_pair_ranks(*po_n);
    auto obs_c = dense_pair_ranks(*po_c);

    long long m = -1;
    std::vector<GadgetDecoder> decoders(num_gadgets);
    for (int u = 0; u < num_gadgets; ++u) {
        GadgetDecoder& dec = decoders[u];
        dec.members = members[u];
        dec.neighbor_gadget.assign(nbr[u].begin(), nbr[u].end());
        dec.deg = static_cast<int>(dec.neighbor_gadget.size());
        if (dec.deg == 0) throw DataError("gadget without I edges");
        dec.obs_n = &obs_n;
        dec.obs_c = &obs_c;
        dec.total_n = s.n;
        // slot partitions: equal I-neighborhood toward each neighbor gadget
        for (int w : dec.neighbor_gadget) {
            SlotPartition part;
            part.class_of.assign(members[u].size(), -1);
            std::map<std::vector<int>, int> classes;
            for (std::size_t i = 0; i < members[u].size(); ++i) {
                std::vector<int> nb;
                for (int y : i_nbrs[u][i])
                    if (rank[y] == w) nb.push_back(y);
                std::sort(nb.begin(), nb.end());
                if (nb.empty()) throw DataError("element with no I edge toward a neighbor gadget");
                auto it = classes.emplace(std::move(nb), static_cast<int>(classes.size()));
                part.class_of[i] = it.first->second;
            }
            part.classes = static_cast<int>(classes.size());
            // single-element gadgets (degree-1 base vertices) have one class
            if (members[u].size() > 1) {
                if (m < 0) m = part.classes;
                if (part.classes != m) throw DataError("slot class counts disagree");
            } else if (part.classes != 1) {
                throw DataError("single-element gadget with split slots");
            }
            dec.slots.push_back(std::move(part));
        }
    }
    if (m < 0) throw DataError("modulus not recoverable from slot classes");
    for (int u = 0; u < num_gadgets; ++u) {
        GadgetDecoder& dec = decoders[u];
        long long expect = 1;
        for (int i = 1; i < dec.deg; ++i) expect *= m;
        if (static_cast<long long>(members[u].size()) != expect)
            throw DataError("gadget size is not m^(degree-1)");
        dec.m = m;
        if (!dec.decode()) throw DataError("no coordinate labeling matches the tag tables");
    }

    // global re-validation: recompute both tag tables from decoded labels
    {
        std::map<std::vector<int>, int> rank_n_of, rank_c_of;
        std::vector<std::vector<int>> tag_n(std::size_t(s.n) * s.n), tag_c(std::size_t(s.n) * s.n);
        for (int u = 0; u < num_gadgets; ++u) {
            const auto& dec = decoders[u];
            for (std::size_t i = 0; i < dec.members.size(); ++i)
                for (std::size_t j = 0; j < dec.members.size(); ++j) {
                    auto& tn = tag_n[std::size_t(dec.members[i]) * s.n + dec.members[j]];
                    auto& tc = tag_c[std::size_t(dec.members[i]) * s.n + dec.members[j]];
                    for (std::size_t q = 0; q < dec.slots.size(); ++q) {
                        // encode (u, w) as u * num_gadgets + w to keep lexicographic order
                        int code = u * num_gadgets + dec.neighbor_gadget[q];
                        if (dec.labels[i][q] == dec.labels[j][q]) tn.push_back(code);
                        if ((dec.labels[i][q] + 1) % m == dec.labels[j][q]) tc.push_back(code);
                    }
                }
        }
        for (const auto& t : tag_n) rank_n_of.emplace(t, 0);
        for (const auto& t : tag_c) rank_c_of.emplace(t, 0);
        int next = 0;
        for (auto& [k, v] : rank_n_of) v = next++;
        next = 0;
        for (auto& [k, v] : rank_c_of) v = next++;
        for (std::size_t idx = 0; idx < tag_n.size(); ++idx) {
            if (rank_n_of.at(tag_n[idx]) != obs_n[idx]) throw DataError("N table mismatch after decoding");
            if (rank_c_of.at(tag_c[idx]) != obs_c[idx]) throw DataError("C table mismatch after decoding");
        }
    }

    // edge constants from I over decoded labels
    std::vector<std::pair<int, int>> edges;
    std::map<std::pair<int, int>, int> edge_id;
    std::vector<long long> edge_const;
    std::vector<std::vector<int>> gadget_cols(num_gadgets);
    for (int u = 0; u < num_gadgets; ++u)
        for (int w : nbr[u]) {
            if (w < u) continue;
            int e = static_cast<int>(edges.size());
            edges.emplace_back(u, w);
            edge_id[{u, w}] = e;
            edge_const.push_back(-1);
            gadget_cols[u].push_back(2 * e);
            gadget_cols[w].push_back(2 * e + 1);
        }
    auto slot_index = [&](int u, int w) {
        const auto& list = decoders[u].neighbor_gadget;
        return static_cast<int>(std::lower_bound(list.begin(), list.end(), w) - list.begin());
    };
    std::vector<long long> edge_tuple_count(edges.size(), 0);
    for (const auto& t : ex_i->tuples) {
        int u = rank[t[0]], w = rank[t[1]];
        if (u > w) continue;
        long long lu = decoders[u].labels[local_of[t[0]]][slot_index(u, w)];
        long long lw = decoders[w].labels[local_of[t[1]]][slot_index(w, u)];
        long long c = (lu + lw) % m;
        int e = edge_id.at({u, w});
        if (edge_const[e] < 0) edge_const[e] = c;
        else if (edge_const[e] != c) throw DataError("I constants differ within an edge");
        ++edge_tuple_count[e];
    }
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
        if (edge_const[e] < 0) throw DataError("edge without I tuples");
        auto [u, w] = edges[e];
        long long expect = static_cast<long long>(members[u].size()) * members[w].size() / m;
        if (members[u].size() == 1 && members[w].size() == 1) expect = 1;
        if (edge_tuple_count[e] != expect) throw DataError("I is not complete per matched classes");
    }

    std::vector<long long> gadget_const(num_gadgets, 0);
    for (int u = 0; u < num_gadgets; ++u) {
        long long beta = -1;
        for (std::size_t i = 0; i < decoders[u].members.size(); ++i) {
            long long sum = 0;
            for (std::size_t q = 0; q < decoders[u].slots.size(); ++q)
                sum = (sum + decoders[u].labels[i][q]) % m;
            if (beta < 0) beta = sum;
            else if (beta != sum) throw DataError("coordinate sums not constant per gadget");
        }
        gadget_const[u] = beta;
    }
    return shift_system_consistent(num_gadgets, m, edges, edge_const, gadget_const, gadget_cols);
}

} // namespace

bool solve_cfi_problem(const CfiStructure& s) {
    bool has_pair_order = false;
    for (const auto& r : s.relations) has_pair_order = has_pair_order || r.is_pair_order();
    if (has_pair_order) return solve_inner(s);
    return solve_outer(s);
}

} // namespace cfiwb
