#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cfiwb/base_graph.hpp"

namespace cfiwb {

enum class CfiVariant { Outer, Inner };
enum class StructureVariant { Outer, Inner, Generic };

/// Edge twists lambda: E -> Z_mod over a fixed base graph; values are
/// indexed by position in the sorted edge list.
struct TwistAssignment {
    BaseGraph base;
    long long mod = 2;
    std::vector<long long> values;

    static TwistAssignment zero(const BaseGraph& g, long long m);
    static TwistAssignment from_terms(const BaseGraph& g, long long m,
                                      const std::vector<std::pair<int, long long>>& terms);
    long long sum() const;
    bool same_domain(const TwistAssignment& other) const {
        return mod == other.mod && base == other.base;
    }
};

long long twist_sum(const TwistAssignment& t);

struct ExplicitRelation {
    int arity = 2;
    std::vector<std::vector<int>> tuples; // sorted lexicographically, unique
};

/// Factored 4-ary table: the relation holds for (x, y, x', y') exactly when
/// rank[x][y] <= rank[x'][y']; ranks index the sorted list of tag sets.
struct PairOrderRelation {
    int n = 0;
    std::vector<int> rank; // n*n, row-major
    int rank_at(int x, int y) const { return rank[std::size_t(x) * n + y]; }
};

struct Relation {
    std::string name;
    std::variant<ExplicitRelation, PairOrderRelation> table;

    int arity() const;
    bool is_pair_order() const { return std::holds_alternative<PairOrderRelation>(table); }
};

bool relation_contains(const Relation& rel, std::span<const int> tuple);

struct Provenance {
    CfiVariant variant;
    TwistAssignment twist;                     // carries base graph and modulus
    std::vector<int> gadget;                   // element -> base vertex
    std::vector<std::vector<long long>> label; // outer: {a, v}; inner: coordinate vector
};

/// Finite relational structure with a total preorder; CFI builders attach
/// provenance, stripped or generic structures carry none.
struct CfiStructure {
    StructureVariant variant = StructureVariant::Generic;
    int n = 0;
    std::vector<int> preorder_rank;
    std::vector<Relation> relations;
    std::optional<Provenance> provenance;

    const Relation* find_relation(const std::string& name) const;
    std::vector<std::pair<std::string, int>> schema() const;
};

CfiStructure build_cfi_outer(const BaseGraph& g, long long m, const TwistAssignment& lambda);
CfiStructure build_cfi_inner(const BaseGraph& g, long long m, const TwistAssignment& lambda);

/// Renumbers the universe by a seeded permutation that respects preorder
/// classes and drops provenance.
CfiStructure strip_labels(const CfiStructure& s, std::uint64_t seed = 1);

std::string serialize(const CfiStructure& s);
CfiStructure deserialize(const std::string& text);
std::string export_dot(const CfiStructure& s);

/// Plain graph as a relational structure: one binary relation "E" (both
/// orientations) and a uniform preorder.
CfiStructure graph_structure(const BaseGraph& g);

} // namespace cfiwb
