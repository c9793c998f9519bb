#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "cfiwb/cfi.hpp"
#include "cfiwb/errors.hpp"
#include "cfiwb/symmetry.hpp"
#include "cfiwb/wl.hpp"

using namespace cfiwb;

TEST_CASE("a 6-cycle and two triangles: the classic discriminating pair") {
    BaseGraph c6 = catalog_graph("c6");
    BaseGraph cc = BaseGraph::from_edges(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
    auto a = graph_structure(c6);
    auto b = graph_structure(cc);
    CHECK(wl_equivalent(a, b, 1));
    CHECK(!wl_equivalent(a, b, 2));
    CHECK(distinguishing_dimension(a, b, 3) == 2);
}

TEST_CASE("self-equivalence and isomorphic CFI pairs") {
    BaseGraph k4 = catalog_graph("k4");
    auto zero = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    CHECK(wl_equivalent(zero, zero, 1));
    CHECK(wl_equivalent(zero, zero, 2));

    auto a = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{0, 1}}));
    auto b = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{4, 1}}));
    REQUIRE(brute_force_isomorphism(a, b).isomorphic);
    CHECK(wl_equivalent(a, b, 1));
    CHECK(wl_equivalent(a, b, 2));
    CHECK(wl_equivalent(a, b, 3));
    CHECK(!distinguishing_dimension(a, b, 2).has_value());
}

TEST_CASE("non-isomorphic K4 pair is 1-WL equivalent") {
    BaseGraph k4 = catalog_graph("k4");
    auto zero = TwistAssignment::zero(k4, 2);
    auto one = TwistAssignment::from_terms(k4, 2, {{0, 1}});
    for (bool inner : {true, false}) {
        auto a = inner ? build_cfi_inner(k4, 2, zero) : build_cfi_outer(k4, 2, zero);
        auto b = inner ? build_cfi_inner(k4, 2, one) : build_cfi_outer(k4, 2, one);
        CAPTURE(inner);
        CHECK(!brute_force_isomorphism(a, b).isomorphic);
        CHECK(wl_equivalent(a, b, 1));
    }
}

TEST_CASE("atomic types distinguish patterns and respect automorphisms") {
    BaseGraph k4 = catalog_graph("k4");
    auto s = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));

    std::vector<int> xx{0, 0}, xy{0, 1};
    CHECK(atomic_type(s, xx) != atomic_type(s, xy));

    // a pair inside I versus a pair outside
    const auto& i_rel = std::get<ExplicitRelation>(s.find_relation("I")->table);
    auto in_pair = i_rel.tuples.front();
    std::vector<int> out_pair{in_pair[0], in_pair[0]};
    CHECK(atomic_type(s, in_pair) != atomic_type(s, out_pair));

    // flow images have identical atomic types
    auto basis = flow_basis(k4, 2);
    auto f = apply_flow(s, basis[0]);
    for (int x = 0; x < s.n; ++x)
        for (int y = 0; y < s.n; ++y) {
            std::vector<int> t{x, y};
            std::vector<int> ft{f.image[x], f.image[y]};
            CHECK(atomic_type(s, t) == atomic_type(s, ft));
        }
}

TEST_CASE("colorings are automorphism-invariant, monotone and deterministic") {
    BaseGraph k4 = catalog_graph("k4");
    auto s = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    auto col = wl_stable(s, 2);

    // monotone class counts, stabilization confirmed by a repeat round
    for (std::size_t i = 1; i < col.round_class_counts.size(); ++i)
        CHECK(col.round_class_counts[i] >= col.round_class_counts[i - 1]);
    REQUIRE(col.round_class_counts.size() >= 2);
    CHECK(col.round_class_counts.back() ==
          col.round_class_counts[col.round_class_counts.size() - 2]);

    // automorphism invariance over the whole flow group
    for (const auto& image : flow_group_maps(s)) {
        for (int x = 0; x < s.n; ++x)
            for (int y = 0; y < s.n; ++y)
                CHECK(col.color[x * s.n + y] == col.color[image[x] * s.n + image[y]]);
    }

    // byte-identical across runs
    auto again = wl_stable(s, 2);
    CHECK(again.color == col.color);
    CHECK(again.rounds == col.rounds);
}

TEST_CASE("3-WL vertex classes equal flow orbits on the K5 inner structure") {
    BaseGraph k5 = catalog_graph("k5");
    auto s = build_cfi_inner(k5, 2, TwistAssignment::zero(k5, 2));
    REQUIRE(s.n == 40);
    auto col = wl_stable(s, 3);
    auto orbits = k_orbits(s, 1);

    // vertex class of x = color of the constant tuple (x, x, x)
    auto vertex_color = [&](int x) {
        long long idx = (static_cast<long long>(x) * s.n + x) * s.n + x;
        return col.color[idx];
    };
    for (int x = 0; x < s.n; ++x)
        for (int y = 0; y < s.n; ++y) {
            CAPTURE(x);
            CAPTURE(y);
            CHECK((orbits[x] == orbits[y]) == (vertex_color(x) == vertex_color(y)));
        }
}

TEST_CASE("wl input validation") {
    BaseGraph k4 = catalog_graph("k4");
    auto inner = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    auto outer = build_cfi_outer(k4, 2, TwistAssignment::zero(k4, 2));
    CHECK_THROWS_AS(wl_equivalent(inner, outer, 2), UsageError); // schema mismatch
    CHECK_THROWS_AS(wl_stable(inner, 0), UsageError);
    WlLimits tiny;
    tiny.max_tuples = 10;
    CHECK_THROWS_AS(wl_stable(inner, 2, tiny), ResourceError);
}
