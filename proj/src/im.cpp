#include "cfiwb/im.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cfiwb/errors.hpp"
#include "refine.hpp"

namespace cfiwb {

using detail::StructureView;
using detail::TupleSpace;

namespace {

std::uint64_t fnv_hash(const PartitionFamily& fam, std::uint64_t seed) {
    std::uint64_t h = seed;
    auto mix = [&](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(fam.n));
    for (int c : fam.cell) mix(static_cast<std::uint64_t>(c) + 1);
    return h;
}

struct FamilyKey {
    std::uint64_t h1, h2;
    auto operator<=>(const FamilyKey&) const = default;
};

FamilyKey family_key(const PartitionFamily& fam) {
    return {fnv_hash(fam, 0xcbf29ce484222325ULL), fnv_hash(fam, 0x100001b3ULL)};
}

struct Engine {
    const CfiStructure& s;
    const CfiStructure& t;
    int k;
    std::vector<long long> primes;
    ImOptions opts;
    std::mt19937_64 rng;

    StructureView view;
    TupleSpace space;
    std::vector<int> color;
    int classes = 0;

    ImResult result;
    bool tainted = false;

    // certificate payload for the most recent NotSimilar split
    struct Instance {
        PartitionFamily fam_a, fam_b;
        long long p = 2;
        int pos_i = 0, pos_j = 1;
        std::string detail;
        bool valid = false;
    };
    Instance last_split;

    std::map<std::tuple<long long, FamilyKey, FamilyKey>, SimilarityOutcome> cache;

    Engine(const CfiStructure& s_, const CfiStructure& t_, int k_, std::vector<long long> primes_,
           const ImOptions& o)
        : s(s_), t(t_), k(k_), primes(std::move(primes_)), opts(o), rng(o.seed),
          view(StructureView::disjoint_union(s_, t_)),
          space(TupleSpace::over(view, k_, /*per_side_blocks=*/true)) {}

    long long unit_key(long long tup, int pi, int pj, std::array<int, detail::kMaxK>& digits) const {
        int bi = space.block_of(tup);
        const auto& b = space.blocks[bi];
        space.decode(tup, digits);
        long long key = bi;
        for (int i = 0; i < k; ++i) {
            if (i == pi || i == pj) continue;
            key = key * (b.hi - b.lo) + (digits[i] - b.lo);
        }
        return key;
    }

    PartitionFamily build_family(long long any_tuple, int pi, int pj) const {
        std::array<int, detail::kMaxK> digits{};
        int bi = space.block_of(any_tuple);
        const auto& b = space.blocks[bi];
        space.decode(any_tuple, digits);
        const int width = b.hi - b.lo;
        long long stride = 1;
        std::array<long long, detail::kMaxK> pos_stride{};
        for (int i = k - 1; i >= 0; --i) {
            pos_stride[i] = stride;
            stride *= width;
        }
        long long base = any_tuple - (digits[pi] - b.lo) * pos_stride[pi] -
                         (digits[pj] - b.lo) * pos_stride[pj];
        PartitionFamily fam;
        fam.n = width;
        fam.cell.resize(std::size_t(width) * width);
        for (int x = 0; x < width; ++x)
            for (int y = 0; y < width; ++y)
                fam.cell[std::size_t(x) * width + y] =
                    color[base + x * pos_stride[pi] + y * pos_stride[pj]];
        return fam;
    }

    SimilarityOutcome verdict(const PartitionFamily& a, const FamilyKey& ka,
                              const PartitionFamily& b, const FamilyKey& kb, long long p,
                              std::string* detail_out) {
        auto key = std::make_tuple(p, ka, kb);
        auto it = cache.find(key);
        if (it != cache.end()) {
            ++result.budget.cache_hits;
            if (detail_out) *detail_out = "cached";
            return it->second;
        }
        ++result.budget.similarity_checks;
        SimilarityResult res = partition_similarity(a, b, p, opts.budgets, rng);
        if (res.outcome == SimilarityOutcome::Similar && res.detail == "permutation witness")
            ++result.budget.permutation_witnesses;
        if (res.outcome == SimilarityOutcome::Unknown) ++result.budget.unknown_verdicts;
        cache.emplace(key, res.outcome);
        if (detail_out) *detail_out = res.detail;
        return res.outcome;
    }

    // One similarity pass for a fixed prime and position pair. Returns true
    // if any class split.
    bool similarity_pass(long long p, int pi, int pj, int round) {
        std::array<int, detail::kMaxK> digits{};
        struct Entry {
            int cls;
            long long unit;
            long long tup;
            bool operator<(const Entry& o) const {
                if (cls != o.cls) return cls < o.cls;
                if (unit != o.unit) return unit < o.unit;
                return tup < o.tup;
            }
        };
        std::vector<Entry> entries(space.total_tuples);
        for (long long tup = 0; tup < space.total_tuples; ++tup)
            entries[tup] = {color[tup], unit_key(tup, pi, pj, digits), tup};
        std::sort(entries.begin(), entries.end());

        // families are shared across classes within this pass
        std::map<long long, std::pair<PartitionFamily, FamilyKey>> family_of_unit;
        auto family = [&](long long unit, long long any_tuple)
            -> const std::pair<PartitionFamily, FamilyKey>& {
            auto it = family_of_unit.find(unit);
            if (it == family_of_unit.end()) {
                PartitionFamily fam = build_family(any_tuple, pi, pj);
                FamilyKey key = family_key(fam);
                it = family_of_unit.emplace(unit, std::make_pair(std::move(fam), key)).first;
            }
            return it->second;
        };

        bool split_any = false;
        std::size_t i = 0;
        while (i < entries.size()) {
            std::size_t cls_end = i;
            while (cls_end < entries.size() && entries[cls_end].cls == entries[i].cls) ++cls_end;
            // unit runs within [i, cls_end)
            std::vector<std::pair<std::size_t, std::size_t>> unit_runs;
            for (std::size_t a = i; a < cls_end;) {
                std::size_t b = a;
                while (b < cls_end && entries[b].unit == entries[a].unit) ++b;
                unit_runs.emplace_back(a, b);
                a = b;
            }
            if (unit_runs.size() <= 1) {
                i = cls_end;
                continue;
            }
            std::vector<long long> group_rep_unit, group_rep_tuple;
            std::vector<std::vector<std::pair<std::size_t, std::size_t>>> group_runs;
            for (auto [a, b] : unit_runs) {
                const long long unit = entries[a].unit;
                const auto& [fam_b, key_b] = family(unit, entries[a].tup);
                int join = -1, join_unknown = -1;
                for (std::size_t g = 0; g < group_rep_unit.size(); ++g) {
                    const auto& [fam_a, key_a] = family(group_rep_unit[g], group_rep_tuple[g]);
                    std::string detail;
                    SimilarityOutcome out = verdict(fam_a, key_a, fam_b, key_b, p, &detail);
                    if (out == SimilarityOutcome::Similar) {
                        join = static_cast<int>(g);
                        break;
                    }
                    if (out == SimilarityOutcome::Unknown && join_unknown < 0)
                        join_unknown = static_cast<int>(g);
                    if (out == SimilarityOutcome::NotSimilar && !last_split.valid)
                        last_split = {fam_a, fam_b, p, pi, pj, detail, true};
                }
                if (join < 0 && join_unknown >= 0) {
                    join = join_unknown;
                    tainted = true;
                }
                if (join < 0) {
                    group_rep_unit.push_back(unit);
                    group_rep_tuple.push_back(entries[a].tup);
                    group_runs.push_back({{a, b}});
                } else {
                    group_runs[join].push_back({a, b});
                }
            }
            if (group_runs.size() > 1) {
                split_any = true;
                ++result.budget.notsimilar_splits;
                for (std::size_t g = 1; g < group_runs.size(); ++g) {
                    int fresh = classes++;
                    for (auto [a, b] : group_runs[g])
                        for (std::size_t e = a; e < b; ++e) color[entries[e].tup] = fresh;
                }
            }
            i = cls_end;
        }
        (void)round;
        return split_any;
    }

    // side histograms; empty optional when they match
    std::optional<ImCertificate> histogram_mismatch(int round, const char* kind) const {
        std::vector<std::pair<long long, long long>> hist(classes, {0, 0});
        const long long boundary =
            space.blocks.size() > 1 ? space.blocks[1].tuple_offset : space.total_tuples;
        for (long long tup = 0; tup < space.total_tuples; ++tup) {
            if (tup < boundary) ++hist[color[tup]].first;
            else ++hist[color[tup]].second;
        }
        for (int col = 0; col < classes; ++col)
            if (hist[col].first != hist[col].second) {
                ImCertificate cert;
                cert.round = round;
                cert.color = col;
                cert.count_left = hist[col].first;
                cert.count_right = hist[col].second;
                cert.kind = kind;
                return cert;
            }
        return std::nullopt;
    }

    ImResult run() {
        result.k = k;
        result.primes = primes;
        classes = detail::atomic_round(space, color);
        result.round_class_counts.push_back(classes);
        if (auto cert = histogram_mismatch(0, "counting")) {
            result.certificate = std::move(cert);
            result.certificate->reverified = true;
            result.verdict = ImVerdict::NotEquivalent;
            finish();
            return result;
        }
        std::vector<std::pair<int, int>> positions;
        if (opts.positions_last_two_only) {
            positions = {{k - 2, k - 1}, {k - 1, k - 2}};
        } else {
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j)
                    if (i != j) positions.emplace_back(i, j);
        }
        long long max_rounds = opts.max_rounds < 0 ? space.total_tuples : opts.max_rounds;
        for (long long round = 1; round <= max_rounds; ++round) {
            int before = classes;
            classes = detail::counting_round(space, color);
            if (auto cert = histogram_mismatch(static_cast<int>(round), "counting")) {
                // a mismatch after any unknown-join may be an artifact of the
                // unsplit class, so it only certifies non-equivalence when
                // the partition is untainted
                result.certificate = std::move(cert);
                result.certificate->reverified = !tainted;
                result.verdict = tainted ? ImVerdict::Unknown : ImVerdict::NotEquivalent;
                if (tainted) result.note = "histogram mismatch on a budget-tainted partition";
                result.rounds = static_cast<int>(round);
                result.round_class_counts.push_back(classes);
                finish();
                return result;
            }
            bool any_split = false;
            for (const auto& [pi, pj] : positions)
                for (long long p : primes) {
                    last_split.valid = false;
                    bool split = similarity_pass(p, pi, pj, static_cast<int>(round));
                    any_split = any_split || split;
                    if (auto cert = histogram_mismatch(static_cast<int>(round), "similarity")) {
                        cert->detail = "p=" + std::to_string(p) + " positions=(" +
                                       std::to_string(pi + 1) + "," + std::to_string(pj + 1) +
                                       ")" + (last_split.valid ? "; " + last_split.detail : "");
                        result.certificate = std::move(cert);
                        result.verdict = tainted ? ImVerdict::Unknown : ImVerdict::NotEquivalent;
                        if (tainted) result.note = "histogram mismatch on a budget-tainted partition";
                        result.rounds = static_cast<int>(round);
                        result.round_class_counts.push_back(classes);
                        if (!tainted) reverify_certificate();
                        finish();
                        return result;
                    }
                }
            result.round_class_counts.push_back(classes);
            result.rounds = static_cast<int>(round);
            if (classes == before && !any_split) break; // stable
        }
        result.verdict = tainted ? ImVerdict::Unknown : ImVerdict::Equivalent;
        if (tainted)
            result.note = "similarity budgets prevented a sound verdict on at least one pair";
        finish();
        return result;
    }

    void reverify_certificate() {
        if (!result.certificate || !last_split.valid) return;
        SimilarityBudgets beefed = opts.budgets;
        beefed.exhaustive_limit = std::max(beefed.exhaustive_limit, 1LL << 20);
        beefed.random_trials = std::max(beefed.random_trials * 4, 2048);
        beefed.perm_search_nodes = std::max(beefed.perm_search_nodes * 10, 1000000LL);
        std::mt19937_64 fresh(opts.seed ^ 0xabcdef);
        SimilarityResult res =
            partition_similarity(last_split.fam_a, last_split.fam_b, last_split.p, beefed, fresh);
        result.certificate->reverified = res.outcome == SimilarityOutcome::NotSimilar;
    }

    void finish() {
        // export per-side colorings
        const auto& b0 = space.blocks[0];
        result.color_left.assign(color.begin() + b0.tuple_offset,
                                 color.begin() + b0.tuple_offset + b0.count);
        if (space.blocks.size() > 1) {
            const auto& b1 = space.blocks[1];
            result.color_right.assign(color.begin() + b1.tuple_offset,
                                      color.begin() + b1.tuple_offset + b1.count);
        }
    }
};

} // namespace

ImResult im_equivalent(const CfiStructure& s, const CfiStructure& t, int k,
                       std::vector<long long> primes, const ImOptions& opts) {
    if (k < 2) throw UsageError("invertible-map equivalence needs k >= 2");
    if (primes.empty()) throw UsageError("prime set must be non-empty");
    std::sort(primes.begin(), primes.end());
    primes.erase(std::unique(primes.begin(), primes.end()), primes.end());
    for (long long p : primes)
        if (!is_prime_number(p)) throw UsageError(std::to_string(p) + " is not prime");
    if (s.schema() != t.schema()) throw UsageError("schema mismatch");
    ImResult size_check;
    if (s.n != t.n) {
        size_check.verdict = ImVerdict::NotEquivalent;
        size_check.k = k;
        size_check.primes = primes;
        ImCertificate cert;
        cert.kind = "size";
        cert.count_left = s.n;
        cert.count_right = t.n;
        cert.reverified = true;
        size_check.certificate = cert;
        return size_check;
    }
    long long tuples = 2;
    for (int i = 0; i < k; ++i) tuples *= s.n;
    if (tuples > opts.max_tuples)
        throw ResourceError("tuple space of size " + std::to_string(tuples) +
                            " exceeds the budget " + std::to_string(opts.max_tuples));
    Engine engine(s, t, k, primes, opts);
    return engine.run();
}

RingMatrix class_matrix(const CfiStructure& s, std::span<const int> tuple,
                        const std::vector<int>& coloring, int target_color, int pos_i, int pos_j,
                        long long p) {
    const int k = static_cast<int>(tuple.size());
    if (k < 2) throw UsageError("class matrices need k >= 2");
    if (pos_i == pos_j || pos_i < 0 || pos_j < 0 || pos_i >= k || pos_j >= k)
        throw UsageError("positions must be distinct and in range");
    long long expect = 1;
    for (int i = 0; i < k; ++i) expect *= s.n;
    if (static_cast<long long>(coloring.size()) != expect)
        throw UsageError("coloring size does not match the tuple space");
    for (int e : tuple)
        if (e < 0 || e >= s.n) throw UsageError("tuple entry out of range");
    RingMatrix out(s.n, s.n, p);
    std::vector<long long> stride(k);
    long long acc = 1;
    for (int i = k - 1; i >= 0; --i) {
        stride[i] = acc;
        acc *= s.n;
    }
    long long base = 0;
    for (int i = 0; i < k; ++i) base += static_cast<long long>(tuple[i]) * stride[i];
    base -= tuple[pos_i] * stride[pos_i] + tuple[pos_j] * stride[pos_j];
    for (int x = 0; x < s.n; ++x)
        for (int y = 0; y < s.n; ++y)
            out.at(x, y) =
                coloring[base + x * stride[pos_i] + y * stride[pos_j]] == target_color ? 1 : 0;
    return out;
}

PrimeSweepTable prime_sweep(const CfiStructure& s, const CfiStructure& t, int k,
                            std::vector<long long> primes, const ImOptions& opts) {
    std::sort(primes.begin(), primes.end());
    primes.erase(std::unique(primes.begin(), primes.end()), primes.end());
    PrimeSweepTable table;
    std::vector<std::vector<long long>> subsets;
    for (long long p : primes) subsets.push_back({p});
    for (std::size_t i = 0; i < primes.size(); ++i)
        for (std::size_t j = i + 1; j < primes.size(); ++j)
            subsets.push_back({primes[i], primes[j]});
    if (primes.size() > 2) subsets.push_back(primes);
    for (auto& q : subsets) {
        PrimeSweepRow row;
        row.primes = q;
        ImResult res = im_equivalent(s, t, k, q, opts);
        row.verdict = res.verdict;
        row.rounds = res.rounds;
        row.note = res.certificate ? res.certificate->kind : res.note;
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace cfiwb
