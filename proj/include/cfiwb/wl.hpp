#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfiwb/cfi.hpp"

namespace cfiwb {

struct TupleColoring {
    int k = 1;
    long long tuple_count = 0;
    std::vector<int> color;              // canonical color per tuple, row-major index
    int rounds = 0;                      // proper refinement rounds until stable
    std::vector<int> round_class_counts; // class counts, starting with the atomic round
};

struct WlLimits {
    long long max_tuples = 1LL << 24;
};

/// Stable k-dimensional refinement: new color = (old color, multiset over
/// universe elements x of the k-vector of colors of the position-i
/// substitutions). Color ids are canonical (sorted by signature).
TupleColoring wl_stable(const CfiStructure& s, int k, const WlLimits& limits = {});

/// Runs the refinement on the disjoint union and compares the two sides'
/// color histograms over pure tuples.
bool wl_equivalent(const CfiStructure& s, const CfiStructure& t, int k,
                   const WlLimits& limits = {});

std::optional<int> distinguishing_dimension(const CfiStructure& s, const CfiStructure& t,
                                            int k_max, const WlLimits& limits = {});

/// Human-readable atomic signature of a tuple (equality pattern, preorder
/// comparisons, relation membership under all position maps).
std::string atomic_type(const CfiStructure& s, std::span<const int> tuple);

} // namespace cfiwb
