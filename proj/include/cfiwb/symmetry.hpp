#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cfiwb/base_graph.hpp"
#include "cfiwb/cfi.hpp"

namespace cfiwb {

/// Automorphism of a CFI structure encoded as antisymmetric edge twists with
/// zero sum at every vertex (a circulation over Z_mod). Values are stored on
/// the canonical orientation u -> v with u < v.
struct FlowAutomorphism {
    long long mod = 2;
    std::vector<long long> edge_twist;

    long long twist(const BaseGraph& g, int from, int to) const;
};

/// One unit circulation around the fundamental cycle of every non-tree edge;
/// the group generated has order mod^(|E| - |V| + 1).
std::vector<FlowAutomorphism> flow_basis(const BaseGraph& g, long long m);

FlowAutomorphism combine_flows(const BaseGraph& g, long long m,
                               std::span<const FlowAutomorphism> basis,
                               std::span<const long long> coeffs);

struct StructureMap {
    std::vector<int> image;
    bool verified = false;
};

/// Full bidirectional check that `image` is an isomorphism s -> t
/// (relations and preorder, both ways).
bool check_structure_map(const CfiStructure& s, const CfiStructure& t,
                         const std::vector<int>& image);

/// Vertex map induced by a flow; throws InternalError if the induced map
/// fails relation verification (a construction bug). Requires provenance.
StructureMap apply_flow(const CfiStructure& s, const FlowAutomorphism& f);

/// All vertex maps of the group generated by the flow basis, sorted.
std::vector<std::vector<int>> flow_group_maps(const CfiStructure& s,
                                              long long max_group_order = 65536);

std::vector<StructureMap> brute_force_automorphisms(const CfiStructure& s, int max_universe = 40);

struct IsoSearchResult {
    bool isomorphic = false;
    std::optional<StructureMap> witness;
};

IsoSearchResult brute_force_isomorphism(const CfiStructure& s, const CfiStructure& t,
                                        int max_universe = 32);

bool cfi_isomorphic_predicate(const TwistAssignment& lambda, const TwistAssignment& sigma);

/// Constructive direction of the twist-sum criterion: requires equal twist
/// sums, solves for a relabeling flow and returns the verified map.
StructureMap isomorphism_witness(const BaseGraph& g, long long m, const TwistAssignment& lambda,
                                 const TwistAssignment& sigma, CfiVariant variant);

/// Orbit id per k-tuple (row-major tuple index) under the flow group.
std::vector<int> k_orbits(const CfiStructure& s, int k, long long max_group_order = 65536);

/// Polynomial-time decider: given a (possibly stripped) CFI structure,
/// decide whether it is isomorphic to the untwisted structure over the same
/// base graph, i.e. whether the total twist is zero.
bool solve_cfi_problem(const CfiStructure& s);

} // namespace cfiwb
