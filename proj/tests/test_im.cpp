#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>

#include "cfiwb/cfi.hpp"
#include "cfiwb/errors.hpp"
#include "cfiwb/im.hpp"
#include "cfiwb/symmetry.hpp"
#include "cfiwb/wl.hpp"

using namespace cfiwb;

namespace {

// partition refinement: same fine class implies same coarse class
bool refines(const std::vector<int>& fine, const std::vector<int>& coarse) {
    REQUIRE(fine.size() == coarse.size());
    std::map<int, int> seen;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        auto [it, fresh] = seen.emplace(fine[i], coarse[i]);
        if (!fresh && it->second != coarse[i]) return false;
    }
    return true;
}

} // namespace

TEST_CASE("class matrices partition the grid") {
    BaseGraph k4 = catalog_graph("k4");
    auto s = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    auto col = wl_stable(s, 2);
    std::set<int> colors(col.color.begin(), col.color.end());

    std::vector<int> tuple{3, 7};
    RingMatrix sum(s.n, s.n, 2);
    // over the integers: use a larger modulus to count
    RingMatrix counting(s.n, s.n, 1LL << 30);
    for (int c : colors) {
        RingMatrix m = class_matrix(s, tuple, col.color, c, 0, 1, 2);
        for (std::size_t i = 0; i < m.a.size(); ++i)
            counting.a[i] += m.a[i];
    }
    for (auto v : counting.a) CHECK(v == 1); // each pair lands in exactly one class

    // the full tuple space is the all-ones matrix; an unused color is zero
    std::vector<int> all(col.color.size(), 0);
    RingMatrix ones = class_matrix(s, tuple, all, 0, 0, 1, 2);
    for (auto v : ones.a) CHECK(v == 1);
    RingMatrix zero = class_matrix(s, tuple, all, 99, 0, 1, 2);
    for (auto v : zero.a) CHECK(v == 0);

    CHECK_THROWS_AS(class_matrix(s, std::vector<int>{1}, all, 0, 0, 1, 2), UsageError);
}

TEST_CASE("equivalence on identical and isomorphic structures") {
    BaseGraph k4 = catalog_graph("k4");
    auto s = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    auto self = im_equivalent(s, s, 2, {2});
    CHECK(self.verdict == ImVerdict::Equivalent);
    CHECK(self.color_left == self.color_right);

    // flow-automorphic tuples stay together in the stable partition
    auto maps = flow_group_maps(s);
    for (const auto& image : maps)
        for (int x = 0; x < s.n; ++x)
            for (int y = 0; y < s.n; ++y)
                CHECK(self.color_left[x * s.n + y] ==
                      self.color_left[image[x] * s.n + image[y]]);

    auto a = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{0, 1}}));
    auto b = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{5, 1}}));
    for (int k : {2, 3}) {
        auto res = im_equivalent(a, b, k, {2});
        CAPTURE(k);
        CHECK(res.verdict == ImVerdict::Equivalent);
    }
    auto res3 = im_equivalent(a, b, 2, {3});
    CHECK(res3.verdict == ImVerdict::Equivalent);
}

TEST_CASE("the K4-base F2 pair separates at k = 3 with prime 2") {
    BaseGraph k4 = catalog_graph("k4");
    auto a = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    auto b = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{0, 1}}));
    REQUIRE(!brute_force_isomorphism(a, b).isomorphic);

    auto res = im_equivalent(a, b, 3, {2});
    CHECK(res.verdict == ImVerdict::NotEquivalent);
    REQUIRE(res.certificate.has_value());
    CHECK(res.certificate->reverified);
    CHECK(res.budget.unknown_verdicts == 0);

    // a larger prime set imposes strictly more conditions
    auto res23 = im_equivalent(a, b, 3, {2, 3});
    CHECK(res23.verdict == ImVerdict::NotEquivalent);
}

TEST_CASE("refinement properties of the stable partition") {
    BaseGraph k4 = catalog_graph("k4");
    auto a = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{0, 1}}));
    auto b = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{3, 1}}));

    auto q2 = im_equivalent(a, b, 2, {2});
    auto q3 = im_equivalent(a, b, 2, {3});
    auto q23 = im_equivalent(a, b, 2, {2, 3});
    REQUIRE(q2.verdict == ImVerdict::Equivalent);
    REQUIRE(q3.verdict == ImVerdict::Equivalent);
    REQUIRE(q23.verdict == ImVerdict::Equivalent);

    // the union prime set refines both single-prime partitions
    CHECK(refines(q23.color_left, q2.color_left));
    CHECK(refines(q23.color_left, q3.color_left));
    CHECK(refines(q23.color_right, q2.color_right));

    // monotone class counts across rounds
    for (std::size_t i = 1; i < q2.round_class_counts.size(); ++i)
        CHECK(q2.round_class_counts[i] >= q2.round_class_counts[i - 1]);

    // the stable partition refines the per-structure k-WL coloring
    {
        auto wl_a = wl_stable(a, 2);
        CHECK(refines(q2.color_left, wl_a.color));
    }

    // determinism
    auto again = im_equivalent(a, b, 2, {2});
    CHECK(again.color_left == q2.color_left);
    CHECK(again.rounds == q2.rounds);
}

TEST_CASE("prime sweep table") {
    BaseGraph k4 = catalog_graph("k4");
    auto a = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{0, 1}}));
    auto b = build_cfi_inner(k4, 2, TwistAssignment::from_terms(k4, 2, {{5, 1}}));
    auto table = prime_sweep(a, b, 2, {2, 3});
    REQUIRE(table.rows.size() == 3); // {2}, {3}, {2,3}
    for (const auto& row : table.rows) CHECK(row.verdict == ImVerdict::Equivalent);
}

TEST_CASE("im input validation") {
    BaseGraph k4 = catalog_graph("k4");
    auto s = build_cfi_inner(k4, 2, TwistAssignment::zero(k4, 2));
    CHECK_THROWS_AS(im_equivalent(s, s, 1, {2}), UsageError);
    CHECK_THROWS_AS(im_equivalent(s, s, 2, {}), UsageError);
    CHECK_THROWS_AS(im_equivalent(s, s, 2, {4}), UsageError);

    // different universe sizes yield an immediate size certificate
    BaseGraph k33 = catalog_graph("k33");
    auto t = build_cfi_inner(k33, 2, TwistAssignment::zero(k33, 2));
    auto sized = im_equivalent(s, t, 2, {2});
    CHECK(sized.verdict == ImVerdict::NotEquivalent);
    REQUIRE(sized.certificate.has_value());
    CHECK(sized.certificate->kind == "size");
}
