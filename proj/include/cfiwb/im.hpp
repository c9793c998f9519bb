#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfiwb/algebra.hpp"
#include "cfiwb/cfi.hpp"

namespace cfiwb {

enum class ImVerdict { Equivalent, NotEquivalent, Unknown };

struct ImOptions {
    SimilarityBudgets budgets;
    long long max_tuples = 1LL << 24;
    long long max_rounds = -1; // default: tuple count
    bool positions_last_two_only = false;
    std::uint64_t seed = 20240915;
};

struct ImCertificate {
    int round = 0;
    int color = -1;
    long long count_left = 0, count_right = 0;
    std::string kind; // "size" | "counting" | "similarity"
    std::string detail;
    bool reverified = false;
};

struct ImBudgetReport {
    long long similarity_checks = 0;
    long long cache_hits = 0;
    long long unknown_verdicts = 0;
    long long permutation_witnesses = 0;
    long long notsimilar_splits = 0;
};

struct ImResult {
    ImVerdict verdict = ImVerdict::Unknown;
    int k = 2;
    std::vector<long long> primes;
    int rounds = 0;
    std::vector<int> round_class_counts;
    std::optional<ImCertificate> certificate;
    ImBudgetReport budget;
    std::string note;
    std::vector<int> color_left, color_right; // stable per-side tuple partitions
};

/// Iterated refinement of the two sides' k-tuple partitions: one counting
/// round, then per prime and ordered position pair a split of every class
/// into simultaneous-similarity groups of its members' substitution-matrix
/// families. Unknown similarity verdicts never split; they taint the final
/// verdict instead.
ImResult im_equivalent(const CfiStructure& s, const CfiStructure& t, int k,
                       std::vector<long long> primes, const ImOptions& opts = {});

/// 0/1 matrix of a partition class under substitutions at (pos_i, pos_j):
/// entry (x, y) = 1 iff tuple[pos_i -> x, pos_j -> y] has target_color.
/// `coloring` assigns a color to every k-tuple of s, row-major.
RingMatrix class_matrix(const CfiStructure& s, std::span<const int> tuple,
                        const std::vector<int>& coloring, int target_color, int pos_i, int pos_j,
                        long long p);

struct PrimeSweepRow {
    std::vector<long long> primes;
    ImVerdict verdict = ImVerdict::Unknown;
    int rounds = 0;
    std::string note;
};

struct PrimeSweepTable {
    std::vector<PrimeSweepRow> rows;
};

/// Verdicts for every singleton, every pair, and the full prime set.
PrimeSweepTable prime_sweep(const CfiStructure& s, const CfiStructure& t, int k,
                            std::vector<long long> primes, const ImOptions& opts = {});

} // namespace cfiwb
