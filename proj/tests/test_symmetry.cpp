#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "cfiwb/cfi.hpp"
#include "cfiwb/errors.hpp"
#include "cfiwb/symmetry.hpp"

using namespace cfiwb;

namespace {

std::set<std::vector<int>> map_set(const std::vector<StructureMap>& maps) {
    std::set<std::vector<int>> out;
    for (const auto& m : maps) out.insert(m.image);
    return out;
}

std::set<std::vector<int>> map_set(const std::vector<std::vector<int>>& maps) {
    return {maps.begin(), maps.end()};
}

} // namespace

TEST_CASE("flow basis size and zero-sum structure") {
    BaseGraph tree = BaseGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    CHECK(flow_basis(tree, 2).empty());

    BaseGraph k4 = catalog_graph("k4");
    auto basis = flow_basis(k4, 2);
    CHECK(basis.size() == 3); // |E| - |V| + 1

    for (const auto& f : basis)
        for (int u = 0; u < k4.n; ++u) {
            long long sum = 0;
            for (int v : k4.adj[u]) sum += f.twist(k4, u, v);
            CHECK(sum % 2 == 0);
        }
}

TEST_CASE("flow group orders and Abelian structure") {
    BaseGraph k4 = catalog_graph("k4");
    auto s2 = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    auto maps2 = flow_group_maps(s2);
    CHECK(maps2.size() == 8);

    auto s4 = build_cfi_inner(k4, 4, TwistAssignment::zero(k4, 4));
    auto maps4 = flow_group_maps(s4);
    CHECK(maps4.size() == 64);

    // every element's order divides m = 4 (Abelian 2-group)
    for (const auto& image : maps4) {
        std::vector<int> power(image.size());
        for (std::size_t i = 0; i < image.size(); ++i) power[i] = static_cast<int>(i);
        int order = 0;
        do {
            std::vector<int> next(power.size());
            for (std::size_t i = 0; i < power.size(); ++i) next[i] = image[power[i]];
            power = std::move(next);
            ++order;
        } while (![&] {
            for (std::size_t i = 0; i < power.size(); ++i)
                if (power[i] != static_cast<int>(i)) return false;
            return true;
        }() && order <= 8);
        CHECK((order == 1 || order == 2 || order == 4));
    }

    // flows commute: composition in either order gives the same map
    auto basis = flow_basis(k4, 4);
    auto f = apply_flow(s4, basis[0]).image;
    auto g = apply_flow(s4, basis[1]).image;
    std::vector<int> fg(f.size()), gf(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        fg[i] = f[g[i]];
        gf[i] = g[f[i]];
    }
    CHECK(fg == gf);
}

TEST_CASE("apply_flow: identity, verification, additivity") {
    BaseGraph k4 = catalog_graph("k4");
    auto s = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    FlowAutomorphism zero;
    zero.mod = 2;
    zero.edge_twist.assign(k4.edges.size(), 0);
    auto id = apply_flow(s, zero);
    CHECK(id.verified);
    for (int x = 0; x < s.n; ++x) CHECK(id.image[x] == x);

    auto basis = flow_basis(k4, 2);
    for (const auto& f : basis) CHECK(apply_flow(s, f).verified);

    // composition of flows is the pointwise sum of twists
    std::vector<long long> coeffs{1, 1, 0};
    auto combined = combine_flows(k4, 2, basis, coeffs);
    auto a = apply_flow(s, basis[0]).image;
    auto b = apply_flow(s, basis[1]).image;
    auto c = apply_flow(s, combined).image;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(c[i] == a[b[i]]);
}

TEST_CASE("brute force equals the flow group") {
    BaseGraph k4 = catalog_graph("k4");
    for (long long m : {2LL, 3LL}) {
        auto inner = build_cfi_inner(k4, m, TwistAssignment::zero(k4, m));
        auto flows = flow_group_maps(inner);
        auto brute = brute_force_automorphisms(inner);
        CAPTURE(m);
        CHECK(map_set(brute) == map_set(flows));

        auto outer = build_cfi_outer(k4, m, TwistAssignment::zero(k4, m));
        auto flows_o = flow_group_maps(outer);
        auto brute_o = brute_force_automorphisms(outer, 48);
        CHECK(map_set(brute_o) == map_set(flows_o));
    }
}

TEST_CASE("single gadget over a star base is rigid") {
    BaseGraph star = BaseGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    auto s = build_cfi_inner(star, 2, TwistAssignment::zero(star, 2));
    auto autos = brute_force_automorphisms(s);
    CHECK(autos.size() == 1); // tree: trivial cycle space
}

TEST_CASE("isomorphism predicate and witnesses") {
    BaseGraph k4 = catalog_graph("k4");
    auto zero2 = TwistAssignment::zero(k4, 2);
    CHECK(cfi_isomorphic_predicate(zero2, zero2));

    auto one = TwistAssignment::from_terms(k4, 2, {{0, 1}});
    CHECK(!cfi_isomorphic_predicate(zero2, one));

    auto e1 = TwistAssignment::from_terms(k4, 2, {{1, 1}});
    CHECK(cfi_isomorphic_predicate(one, e1));
    auto witness = isomorphism_witness(k4, 2, one, e1, CfiVariant::Inner);
    CHECK(witness.verified);
    auto witness_o = isomorphism_witness(k4, 2, one, e1, CfiVariant::Outer);
    CHECK(witness_o.verified);

    // equal sums over Z_4 via different edges
    auto a4 = TwistAssignment::from_terms(k4, 4, {{0, 1}});
    auto b4 = TwistAssignment::from_terms(k4, 4, {{3, 1}});
    CHECK(cfi_isomorphic_predicate(a4, b4));
    CHECK(isomorphism_witness(k4, 4, a4, b4, CfiVariant::Inner).verified);

    CHECK_THROWS_AS(isomorphism_witness(k4, 2, zero2, one, CfiVariant::Inner), UsageError);
    CHECK_THROWS_AS(cfi_isomorphic_predicate(zero2, TwistAssignment::zero(k4, 4)), UsageError);
}

TEST_CASE("witnesses on a larger base with Z_4 twists") {
    BaseGraph cage = catalog_graph("cage-3-5");
    auto lam = TwistAssignment::from_terms(cage, 4, {{0, 3}, {7, 2}});
    auto sig = TwistAssignment::from_terms(cage, 4, {{2, 1}, {9, 1}, {11, 3}});
    REQUIRE(twist_sum(lam) == twist_sum(sig));
    auto w = isomorphism_witness(cage, 4, lam, sig, CfiVariant::Inner);
    CHECK(w.verified);
}

TEST_CASE("brute force isomorphism agrees with the twist-sum criterion") {
    BaseGraph k4 = catalog_graph("k4");
    auto zero = TwistAssignment::zero(k4, 2);
    auto one = TwistAssignment::from_terms(k4, 2, {{0, 1}});
    auto other = TwistAssignment::from_terms(k4, 2, {{5, 1}});

    auto s_zero = build_cfi_inner(k4, 2, zero);
    auto s_one = build_cfi_inner(k4, 2, one);
    auto s_other = build_cfi_inner(k4, 2, other);

    auto same = brute_force_isomorphism(s_one, s_other);
    CHECK(same.isomorphic);
    CHECK(same.witness->verified);

    auto diff = brute_force_isomorphism(s_zero, s_one);
    CHECK(!diff.isomorphic);

    // a stripped copy stays isomorphic
    auto stripped = strip_labels(s_zero, 5);
    CHECK(brute_force_isomorphism(s_zero, stripped).isomorphic);

    CHECK_THROWS_AS(brute_force_isomorphism(s_zero, s_one, 4), ResourceError);
}

TEST_CASE("k-orbits of the inner K4 structure") {
    BaseGraph k4 = catalog_graph("k4");
    auto s = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    auto orbits1 = k_orbits(s, 1);
    std::set<int> distinct(orbits1.begin(), orbits1.end());
    CHECK(distinct.size() == 4); // flows act transitively on each gadget

    // orbits refine preorder ranks
    for (int x = 0; x < s.n; ++x)
        for (int y = 0; y < s.n; ++y)
            if (orbits1[x] == orbits1[y]) CHECK(s.preorder_rank[x] == s.preorder_rank[y]);

    // equality patterns are preserved: no orbit mixes diagonal and
    // off-diagonal pairs
    auto orbits2 = k_orbits(s, 2);
    std::set<int> diag, offdiag;
    for (int x = 0; x < s.n; ++x)
        for (int y = 0; y < s.n; ++y) {
            int idx = x * s.n + y;
            (x == y ? diag : offdiag).insert(orbits2[idx]);
        }
    for (int o : diag) CHECK(offdiag.count(o) == 0);
}

TEST_CASE("cfi problem decider on provenance-checked instances") {
    BaseGraph k4 = catalog_graph("k4");
    auto zero = TwistAssignment::zero(k4, 2);
    auto one = TwistAssignment::from_terms(k4, 2, {{3, 1}});

    CHECK(solve_cfi_problem(strip_labels(build_cfi_inner(k4, 2, zero), 7)));
    CHECK(!solve_cfi_problem(strip_labels(build_cfi_inner(k4, 2, one), 8)));
    CHECK(solve_cfi_problem(strip_labels(build_cfi_outer(k4, 2, zero), 9)));
    CHECK(!solve_cfi_problem(strip_labels(build_cfi_outer(k4, 2, one), 10)));

    // a pair of Z_4 instances over the Petersen graph
    BaseGraph cage = catalog_graph("cage-3-5");
    auto lam = TwistAssignment::from_terms(cage, 4, {{1, 2}, {6, 2}});
    CHECK(twist_sum(lam) == 0);
    CHECK(solve_cfi_problem(strip_labels(build_cfi_inner(cage, 4, lam), 11)));
    auto bad = TwistAssignment::from_terms(cage, 4, {{1, 2}, {6, 1}});
    CHECK(twist_sum(bad) != 0);
    CHECK(!solve_cfi_problem(strip_labels(build_cfi_inner(cage, 4, bad), 12)));

    // plain graphs are not CFI-shaped
    CHECK_THROWS_AS(solve_cfi_problem(graph_structure(k4)), DataError);
}
