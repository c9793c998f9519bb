#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cfiwb {

struct Modulus {
    long long value = 2;
    enum class Kind { Prime, PowerOfTwo, General } kind = Kind::Prime;

    static Modulus of(long long m);
    bool is_prime() const { return kind == Kind::Prime; }
};

bool is_prime_number(long long m);

/// Dense matrix over Z_mod, entries reduced into [0, mod).
struct RingMatrix {
    long long mod = 2;
    int rows = 0, cols = 0;
    std::vector<long long> a;

    RingMatrix() = default;
    RingMatrix(int r, int c, long long m) : mod(m), rows(r), cols(c), a(std::size_t(r) * c, 0) {}

    static RingMatrix identity(int n, long long m);

    long long& at(int r, int c) { return a[std::size_t(r) * cols + c]; }
    long long at(int r, int c) const { return a[std::size_t(r) * cols + c]; }

    RingMatrix mul(const RingMatrix& rhs) const;
    RingMatrix transpose() const;
    bool operator==(const RingMatrix& rhs) const = default;
};

struct AffineSolutionSet {
    long long mod = 2;
    bool consistent = false;
    std::vector<long long> particular;               // empty when inconsistent
    std::vector<std::vector<long long>> generators;  // of the homogeneous solutions
};

/// Rank over F_p. Usage error unless the modulus is prime.
int fp_rank(const RingMatrix& m);

/// Full solution set of M x = b over the prime field F_p.
AffineSolutionSet fp_solve(const RingMatrix& m, const std::vector<long long>& b);

/// Full solution set of M x = b over Z_mod. Prime moduli use field
/// elimination; prime powers use minimal-valuation pivoting; other
/// composites are split into prime-power components and recombined.
AffineSolutionSet zm_solve(const RingMatrix& m, const std::vector<long long>& b);

struct IntertwinerBasis {
    long long p = 2;
    int rows = 0, cols = 0; // shape of the matrices S in the space
    std::vector<RingMatrix> basis;
};

/// Basis of {S : S * Ms[c] == Ns[c] * S for all c} over F_p.
IntertwinerBasis intertwiner_space(std::span<const RingMatrix> ms, std::span<const RingMatrix> ns,
                                   long long p);

struct SimilarityBudgets {
    int random_trials = 512;            // invertibility trials in a large space
    long long exhaustive_limit = 65536; // enumerate p^r combinations up to this
    long long max_unknowns = 4096;      // skip the linear solve above this
    long long perm_search_nodes = 200000;
    long long trace_triple_limit = 200000; // cap on family^3 for trace invariants
};

enum class FindOutcome { Found, NotFound, Unknown };

struct FindInvertibleResult {
    FindOutcome outcome = FindOutcome::Unknown;
    std::optional<RingMatrix> witness;
    std::string detail;
};

FindInvertibleResult find_invertible(const IntertwinerBasis& basis, const SimilarityBudgets& budgets,
                                     std::mt19937_64& rng);

enum class SimilarityOutcome { Similar, NotSimilar, Unknown };

struct SimilarityResult {
    SimilarityOutcome outcome = SimilarityOutcome::Unknown;
    std::optional<RingMatrix> witness; // invertible S with S*M_c = N_c*S, verified
    std::string detail;
};

/// Decides whether two equally-indexed families of square 0/1 matrices are
/// simultaneously similar over F_p. Similar verdicts always carry a verified
/// witness; NotSimilar is returned only with a proof (invariant mismatch,
/// empty intertwiner space, or completed exhaustive search).
SimilarityResult simultaneous_similarity(std::span<const RingMatrix> ms,
                                         std::span<const RingMatrix> ns, long long p,
                                         const SimilarityBudgets& budgets, std::mt19937_64& rng);

/// A family of disjoint 0/1 matrices given as one color per grid cell; the
/// matrices for color c are the indicator of {(x,y) : cell[x*n+y] == c}.
/// Color ids are shared between the two sides being compared.
struct PartitionFamily {
    int n = 0;
    std::vector<int> cell;
};

/// simultaneous_similarity for partition-encoded families; avoids
/// materializing one dense matrix per color.
SimilarityResult partition_similarity(const PartitionFamily& a, const PartitionFamily& b,
                                      long long p, const SimilarityBudgets& budgets,
                                      std::mt19937_64& rng);

bool is_invertible(const RingMatrix& m); // prime modulus, square

} // namespace cfiwb
