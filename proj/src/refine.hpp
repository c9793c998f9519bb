#pragma once

// Shared tuple-refinement engine behind the WL and invertible-map
// equivalences. Not part of the public API.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <unordered_set>
#include <vector>

#include "cfiwb/cfi.hpp"
#include "cfiwb/errors.hpp"

namespace cfiwb::detail {

constexpr int kMaxK = 6;

// One or two structures viewed as a single universe. Preorder ranks are
// comparable only within a side; relations are the per-side unions.
struct StructureView {
    const CfiStructure* side_struct[2] = {nullptr, nullptr};
    int offset[2] = {0, 0};
    int size[2] = {0, 0};
    int n_total = 0;

    std::vector<std::uint8_t> side_of;
    std::vector<int> dense_rank; // per element, normalized within its side

    struct RelView {
        std::string name;
        int arity = 2;
        bool pair_order = false;
        bool packable = false;
        std::unordered_set<std::uint64_t> packed;
        std::set<std::vector<int>> fallback;
        const PairOrderRelation* po[2] = {nullptr, nullptr};
    };
    std::vector<RelView> rels;

    static StructureView single(const CfiStructure& s) { return make(&s, nullptr); }
    static StructureView disjoint_union(const CfiStructure& s, const CfiStructure& t) {
        return make(&s, &t);
    }

    static StructureView make(const CfiStructure* a, const CfiStructure* b);

    int side(int x) const { return side_of[x]; }

    // 0 = equal rank, 1 = less, 2 = greater, 3 = incomparable (cross side)
    int cmp_rank(int x, int y) const {
        if (side_of[x] != side_of[y]) return 3;
        int rx = dense_rank[x], ry = dense_rank[y];
        if (rx == ry) return 0;
        return rx < ry ? 1 : 2;
    }

    bool in_relation(int ri, std::span<const int> tuple) const {
        const RelView& rv = rels[ri];
        if (rv.pair_order) {
            if (tuple.size() != 4) return false;
            int sd = side_of[tuple[0]];
            for (int e : tuple)
                if (side_of[e] != sd) return false;
            const PairOrderRelation* po = rv.po[sd];
            int off = offset[sd];
            return po->rank_at(tuple[0] - off, tuple[1] - off) <=
                   po->rank_at(tuple[2] - off, tuple[3] - off);
        }
        if (rv.packable) {
            std::uint64_t key = 0;
            for (int e : tuple) key = (key << 8) | static_cast<std::uint64_t>(e);
            return rv.packed.count(key) > 0;
        }
        return rv.fallback.count(std::vector<int>(tuple.begin(), tuple.end())) > 0;
    }
};

// Position maps [arity] -> [k] in a fixed lexicographic order.
inline std::vector<std::vector<int>> position_maps(int arity, int k) {
    std::vector<std::vector<int>> maps;
    std::vector<int> cur(arity, 0);
    while (true) {
        maps.push_back(cur);
        int pos = arity - 1;
        while (pos >= 0 && cur[pos] == k - 1) cur[pos--] = 0;
        if (pos < 0) break;
        ++cur[pos];
    }
    return maps;
}

// Appends the atomic signature of `tuple` to `out`.
void atomic_signature(const StructureView& view,
                      const std::vector<std::vector<std::vector<int>>>& maps_per_rel,
                      std::span<const int> tuple, std::vector<int>& out);

// Tuple space: one block per side; tuples of a block draw entries from that
// block's element range only. Union-WL uses a single block over everything.
struct TupleSpace {
    const StructureView* view = nullptr;
    int k = 1;
    struct Block {
        int lo = 0, hi = 0;          // element range
        long long tuple_offset = 0;  // first global tuple index
        long long count = 0;         // (hi-lo)^k
    };
    std::vector<Block> blocks;
    long long total_tuples = 0;

    static TupleSpace over(const StructureView& view, int k, bool per_side_blocks);

    int block_of(long long t) const {
        return blocks.size() > 1 && t >= blocks[1].tuple_offset ? 1 : 0;
    }
    void decode(long long t, std::array<int, kMaxK>& digits) const {
        const Block& b = blocks[block_of(t)];
        long long rest = t - b.tuple_offset;
        int width = b.hi - b.lo;
        for (int i = k - 1; i >= 0; --i) {
            digits[i] = static_cast<int>(rest % width) + b.lo;
            rest /= width;
        }
    }
    long long encode(int block, std::span<const int> digits) const {
        const Block& b = blocks[block];
        long long idx = 0;
        for (int i = 0; i < k; ++i) idx = idx * (b.hi - b.lo) + (digits[i] - b.lo);
        return b.tuple_offset + idx;
    }
};

struct RefinementResult {
    std::vector<int> color; // canonical color per global tuple index
    int rounds = 0;
    std::vector<int> round_class_counts;
    int classes = 0;
};

// Runs the counting refinement to stability.
RefinementResult refine_to_stable(const TupleSpace& space, long long max_rounds = -1);

// One counting round; returns the new class count. `color` is updated in
// place with canonical ids.
int counting_round(const TupleSpace& space, std::vector<int>& color);

// Initial (atomic) coloring with canonical ids.
int atomic_round(const TupleSpace& space, std::vector<int>& color);

} // namespace cfiwb::detail
