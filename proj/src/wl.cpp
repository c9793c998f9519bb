#include "cfiwb/wl.hpp"

#include <map>
#include <sstream>

#include "cfiwb/errors.hpp"
#include "refine.hpp"

namespace cfiwb {

using detail::StructureView;
using detail::TupleSpace;

namespace {

void check_budget(long long tuples, const WlLimits& limits) {
    if (tuples > limits.max_tuples)
        throw ResourceError("tuple space of size " + std::to_string(tuples) +
                            " exceeds the budget " + std::to_string(limits.max_tuples));
}

} // namespace

TupleColoring wl_stable(const CfiStructure& s, int k, const WlLimits& limits) {
    if (k < 1) throw UsageError("k must be positive");
    StructureView view = StructureView::single(s);
    TupleSpace space = TupleSpace::over(view, k, /*per_side_blocks=*/false);
    check_budget(space.total_tuples, limits);
    auto res = detail::refine_to_stable(space);
    TupleColoring out;
    out.k = k;
    out.tuple_count = space.total_tuples;
    out.color = std::move(res.color);
    out.rounds = res.rounds;
    out.round_class_counts = std::move(res.round_class_counts);
    return out;
}

bool wl_equivalent(const CfiStructure& s, const CfiStructure& t, int k, const WlLimits& limits) {
    if (k < 1) throw UsageError("k must be positive");
    if (s.schema() != t.schema()) throw UsageError("schema mismatch");
    if (s.n != t.n) return false;
    StructureView view = StructureView::disjoint_union(s, t);
    TupleSpace space = TupleSpace::over(view, k, /*per_side_blocks=*/false);
    check_budget(space.total_tuples, limits);
    auto res = detail::refine_to_stable(space);

    // histograms over pure tuples of each side
    std::map<int, long long> hist_s, hist_t;
    std::array<int, detail::kMaxK> digits{};
    for (long long tup = 0; tup < space.total_tuples; ++tup) {
        space.decode(tup, digits);
        bool pure_s = true, pure_t = true;
        for (int i = 0; i < k; ++i) {
            if (digits[i] >= s.n) pure_s = false;
            else pure_t = false;
        }
        if (pure_s) ++hist_s[res.color[tup]];
        if (pure_t) ++hist_t[res.color[tup]];
    }
    return hist_s == hist_t;
}

std::optional<int> distinguishing_dimension(const CfiStructure& s, const CfiStructure& t,
                                            int k_max, const WlLimits& limits) {
    if (k_max < 1) throw UsageError("k_max must be positive");
    for (int k = 1; k <= k_max; ++k)
        if (!wl_equivalent(s, t, k, limits)) return k;
    return std::nullopt;
}

std::string atomic_type(const CfiStructure& s, std::span<const int> tuple) {
    for (int e : tuple)
        if (e < 0 || e >= s.n) throw UsageError("tuple entry out of range");
    StructureView view = StructureView::single(s);
    std::vector<std::vector<std::vector<int>>> maps_per_rel;
    for (const auto& rv : view.rels)
        maps_per_rel.push_back(detail::position_maps(rv.arity, static_cast<int>(tuple.size())));
    std::vector<int> sig;
    detail::atomic_signature(view, maps_per_rel, tuple, sig);
    std::ostringstream out;
    out << "atomic[";
    for (std::size_t i = 0; i < sig.size(); ++i) {
        if (i) out << ",";
        out << sig[i];
    }
    out << "]";
    return out.str();
}

} // namespace cfiwb
