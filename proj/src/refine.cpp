#include "refine.hpp"

#include <numeric>

namespace cfiwb::detail {

namespace {

std::vector<int> dense_ranks_local(const std::vector<int>& ranks) {
    std::vector<int> sorted(ranks);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<int> out(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i)
        out[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), ranks[i]) -
                                  sorted.begin());
    return out;
}

} // namespace

StructureView StructureView::make(const CfiStructure* a, const CfiStructure* b) {
    StructureView v;
    v.side_struct[0] = a;
    v.side_struct[1] = b;
    v.size[0] = a->n;
    v.size[1] = b ? b->n : 0;
    v.offset[0] = 0;
    v.offset[1] = a->n;
    v.n_total = v.size[0] + v.size[1];
    v.side_of.assign(v.n_total, 0);
    for (int x = v.offset[1]; x < v.n_total; ++x) v.side_of[x] = 1;
    v.dense_rank.resize(v.n_total);
    {
        auto da = dense_ranks_local(a->preorder_rank);
        std::copy(da.begin(), da.end(), v.dense_rank.begin());
        if (b) {
            auto db = dense_ranks_local(b->preorder_rank);
            std::copy(db.begin(), db.end(), v.dense_rank.begin() + v.offset[1]);
        }
    }
    if (b && a->schema() != b->schema())
        throw UsageError("structures have different schemas");
    for (std::size_t ri = 0; ri < a->relations.size(); ++ri) {
        const Relation& ra = a->relations[ri];
        RelView rv;
        rv.name = ra.name;
        rv.arity = ra.arity();
        rv.pair_order = ra.is_pair_order();
        if (rv.pair_order) {
            rv.po[0] = &std::get<PairOrderRelation>(ra.table);
            if (b) {
                const Relation& rb = b->relations[ri];
                if (!rb.is_pair_order()) throw UsageError("relation kinds differ across sides");
                rv.po[1] = &std::get<PairOrderRelation>(rb.table);
            }
        } else {
            rv.packable = v.n_total <= 255 && rv.arity <= 8;
            auto insert_tuples = [&](const ExplicitRelation& er, int off) {
                for (const auto& t : er.tuples) {
                    if (rv.packable) {
                        std::uint64_t key = 0;
                        for (int e : t) key = (key << 8) | static_cast<std::uint64_t>(e + off);
                        rv.packed.insert(key);
                    } else {
                        std::vector<int> shifted(t.size());
                        for (std::size_t i = 0; i < t.size(); ++i) shifted[i] = t[i] + off;
                        rv.fallback.insert(std::move(shifted));
                    }
                }
            };
            insert_tuples(std::get<ExplicitRelation>(ra.table), 0);
            if (b) {
                const Relation& rb = b->relations[ri];
                auto* eb = std::get_if<ExplicitRelation>(&rb.table);
                if (!eb) throw UsageError("relation kinds differ across sides");
                insert_tuples(*eb, v.offset[1]);
            }
        }
        v.rels.push_back(std::move(rv));
    }
    return v;
}

void atomic_signature(const StructureView& view,
                      const std::vector<std::vector<std::vector<int>>>& maps_per_rel,
                      std::span<const int> tuple, std::vector<int>& out) {
    const int k = static_cast<int>(tuple.size());
    // equality pattern: first equal position for each index
    for (int i = 0; i < k; ++i) {
        int first = i;
        for (int j = 0; j < i; ++j)
            if (tuple[j] == tuple[i]) {
                first = j;
                break;
            }
        out.push_back(first);
    }
    // preorder comparisons
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) out.push_back(view.cmp_rank(tuple[i], tuple[j]));
    // relation membership under all position maps, packed into 32-bit words
    std::array<int, 8> induced{};
    for (std::size_t ri = 0; ri < view.rels.size(); ++ri) {
        const auto& maps = maps_per_rel[ri];
        int word = 0, bits = 0;
        for (const auto& pm : maps) {
            const int arity = static_cast<int>(pm.size());
            for (int i = 0; i < arity; ++i) induced[i] = tuple[pm[i]];
            bool member = view.in_relation(static_cast<int>(ri),
                                           std::span<const int>(induced.data(), arity));
            word = (word << 1) | (member ? 1 : 0);
            if (++bits == 31) {
                out.push_back(word);
                word = 0;
                bits = 0;
            }
        }
        if (bits > 0) out.push_back(word);
        out.push_back(-1); // relation separator
    }
}

TupleSpace TupleSpace::over(const StructureView& view, int k, bool per_side_blocks) {
    if (k < 1 || k > kMaxK) throw UsageError("k must be between 1 and " + std::to_string(kMaxK));
    TupleSpace sp;
    sp.view = &view;
    sp.k = k;
    auto add_block = [&](int lo, int hi) {
        Block b;
        b.lo = lo;
        b.hi = hi;
        b.tuple_offset = sp.total_tuples;
        b.count = 1;
        for (int i = 0; i < k; ++i) b.count *= (hi - lo);
        sp.total_tuples += b.count;
        sp.blocks.push_back(b);
    };
    if (per_side_blocks) {
        add_block(0, view.size[0]);
        if (view.size[1] > 0) add_block(view.offset[1], view.n_total);
    } else {
        add_block(0, view.n_total);
    }
    return sp;
}

namespace {

// Sorts class members by their signatures and assigns new ids in signature
// order; parent classes are processed in id order, so the combined order is
// the lexicographic order of (parent color, signature).
struct Canonicalizer {
    std::vector<int>* color;
    std::vector<std::vector<long long>> classes; // members per old color
    int next_id = 0;
    std::vector<int> new_color;

    explicit Canonicalizer(std::vector<int>& c, int class_count) : color(&c) {
        classes.resize(class_count);
        for (std::size_t t = 0; t < c.size(); ++t)
            classes[c[t]].push_back(static_cast<long long>(t));
        new_color.assign(c.size(), -1);
    }

    template <typename SigFn>
    int run(SigFn&& signature_of) {
        std::vector<int> sig;
        for (auto& members : classes) {
            if (members.empty()) continue;
            std::vector<std::pair<std::vector<int>, long long>> keyed;
            keyed.reserve(members.size());
            for (long long t : members) {
                sig.clear();
                signature_of(t, sig);
                keyed.emplace_back(sig, t);
            }
            std::sort(keyed.begin(), keyed.end());
            for (std::size_t i = 0; i < keyed.size(); ++i) {
                if (i == 0 || keyed[i].first != keyed[i - 1].first) ++next_id;
                new_color[keyed[i].second] = next_id - 1;
            }
        }
        *color = std::move(new_color);
        return next_id;
    }
};

} // namespace

int atomic_round(const TupleSpace& space, std::vector<int>& color) {
    const StructureView& view = *space.view;
    std::vector<std::vector<std::vector<int>>> maps_per_rel;
    for (const auto& rv : view.rels) maps_per_rel.push_back(position_maps(rv.arity, space.k));
    color.assign(space.total_tuples, 0);
    if (space.total_tuples == 0) return 0;
    Canonicalizer canon(color, 1);
    std::array<int, kMaxK> digits{};
    return canon.run([&](long long t, std::vector<int>& sig) {
        space.decode(t, digits);
        atomic_signature(view, maps_per_rel, std::span<const int>(digits.data(), space.k), sig);
    });
}

int counting_round(const TupleSpace& space, std::vector<int>& color) {
    const int k = space.k;
    if (color.empty()) return 0;
    int old_count = *std::max_element(color.begin(), color.end()) + 1;
    Canonicalizer canon(color, old_count);
    std::array<int, kMaxK> digits{};
    std::vector<std::array<int, kMaxK>> vectors;
    return canon.run([&](long long t, std::vector<int>& sig) {
        int bi = space.block_of(t);
        const auto& b = space.blocks[bi];
        space.decode(t, digits);
        const int width = b.hi - b.lo;
        // strides for substituting position i
        long long stride = 1;
        std::array<long long, kMaxK> pos_stride{};
        for (int i = k - 1; i >= 0; --i) {
            pos_stride[i] = stride;
            stride *= width;
        }
        vectors.assign(width, {});
        for (int x = b.lo; x < b.hi; ++x) {
            auto& vec = vectors[x - b.lo];
            for (int i = 0; i < k; ++i) {
                long long idx = t + static_cast<long long>(x - digits[i]) * pos_stride[i];
                vec[i] = color[idx];
            }
            for (int i = k; i < kMaxK; ++i) vec[i] = 0;
        }
        std::sort(vectors.begin(), vectors.end());
        for (const auto& vec : vectors)
            for (int i = 0; i < k; ++i) sig.push_back(vec[i]);
    });
}

RefinementResult refine_to_stable(const TupleSpace& space, long long max_rounds) {
    RefinementResult res;
    int classes = atomic_round(space, res.color);
    res.round_class_counts.push_back(classes);
    if (max_rounds < 0) max_rounds = space.total_tuples;
    for (long long round = 0; round < max_rounds; ++round) {
        int next = counting_round(space, res.color);
        if (next == classes) {
            res.round_class_counts.push_back(next);
            break;
        }
        classes = next;
        res.rounds = static_cast<int>(round) + 1;
        res.round_class_counts.push_back(classes);
    }
    res.classes = classes;
    return res;
}

} // namespace cfiwb::detail
