#include "cfiwb/cfi.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cfiwb/errors.hpp"
#include "cfiwb/rng.hpp"

namespace cfiwb {

TwistAssignment TwistAssignment::zero(const BaseGraph& g, long long m) {
    if (m < 2) throw UsageError("modulus must be at least 2");
    TwistAssignment t;
    t.base = g;
    t.mod = m;
    t.values.assign(g.edges.size(), 0);
    return t;
}

TwistAssignment TwistAssignment::from_terms(const BaseGraph& g, long long m,
                                            const std::vector<std::pair<int, long long>>& terms) {
    TwistAssignment t = zero(g, m);
    for (auto [idx, val] : terms) {
        if (idx < 0 || idx >= static_cast<int>(t.values.size()))
            throw UsageError("edge index out of range: " + std::to_string(idx));
        t.values[idx] = ((val % m) + m) % m;
    }
    return t;
}

long long TwistAssignment::sum() const {
    long long s = 0;
    for (long long v : values) s = (s + v) % mod;
    return s;
}

long long twist_sum(const TwistAssignment& t) { return t.sum(); }

int Relation::arity() const {
    if (auto* e = std::get_if<ExplicitRelation>(&table)) return e->arity;
    return 4;
}

bool relation_contains(const Relation& rel, std::span<const int> tuple) {
    if (auto* e = std::get_if<ExplicitRelation>(&rel.table)) {
        if (static_cast<int>(tuple.size()) != e->arity) return false;
        std::vector<int> key(tuple.begin(), tuple.end());
        return std::binary_search(e->tuples.begin(), e->tuples.end(), key);
    }
    const auto& po = std::get<PairOrderRelation>(rel.table);
    if (tuple.size() != 4) return false;
    return po.rank_at(tuple[0], tuple[1]) <= po.rank_at(tuple[2], tuple[3]);
}

const Relation* CfiStructure::find_relation(const std::string& name) const {
    for (const auto& r : relations)
        if (r.name == name) return &r;
    return nullptr;
}

std::vector<std::pair<std::string, int>> CfiStructure::schema() const {
    std::vector<std::pair<std::string, int>> s;
    for (const auto& r : relations) s.emplace_back(r.name, r.arity());
    return s;
}

namespace {

Relation make_explicit(std::string name, int arity, std::vector<std::vector<int>> tuples) {
    std::sort(tuples.begin(), tuples.end());
    tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
    Relation rel;
    rel.name = std::move(name);
    rel.table = ExplicitRelation{arity, std::move(tuples)};
    return rel;
}

// Relations are kept sorted by name so structures compare independently of
// construction or parse order.
void sort_relations(CfiStructure& s) {
    std::sort(s.relations.begin(), s.relations.end(),
              [](const Relation& a, const Relation& b) { return a.name < b.name; });
}

void check_builder_inputs(const BaseGraph& g, long long m, const TwistAssignment& lambda,
                          bool need_regular) {
    if (m < 2) throw UsageError("modulus must be at least 2");
    if (g.n == 0) throw UsageError("base graph is empty");
    if (!g.is_connected()) throw UsageError("base graph must be connected");
    if (need_regular && !g.is_regular())
        throw UsageError("outer construction requires a regular base graph");
    if (!(lambda.base == g) || lambda.mod != m ||
        lambda.values.size() != g.edges.size())
        throw DataError("twist assignment does not match the base graph and modulus");
}

} // namespace

CfiStructure build_cfi_outer(const BaseGraph& g, long long m, const TwistAssignment& lambda) {
    check_builder_inputs(g, m, lambda, /*need_regular=*/true);
    const int d = g.degree(0);
    if (d == 0) throw UsageError("outer construction requires positive degree");

    CfiStructure s;
    s.variant = StructureVariant::Outer;
    // Element (a, v) of gadget u has id offset(u) + slot(v)*m + a, slots in
    // neighbor order; the preorder rank is the global (u, v) slot index.
    std::vector<int> offset(g.n + 1, 0);
    for (int u = 0; u < g.n; ++u) offset[u + 1] = offset[u] + d * static_cast<int>(m);
    s.n = offset[g.n];
    s.preorder_rank.resize(s.n);
    Provenance prov;
    prov.variant = CfiVariant::Outer;
    prov.twist = lambda;
    prov.gadget.resize(s.n);
    prov.label.resize(s.n);
    int rank = 0;
    for (int u = 0; u < g.n; ++u) {
        for (int slot = 0; slot < d; ++slot) {
            int v = g.adj[u][slot];
            for (int a = 0; a < m; ++a) {
                int id = offset[u] + slot * static_cast<int>(m) + a;
                s.preorder_rank[id] = rank;
                prov.gadget[id] = u;
                prov.label[id] = {a, v};
            }
            ++rank;
        }
    }
    auto elem = [&](int u, int slot, long long a) {
        return offset[u] + slot * static_cast<int>(m) + static_cast<int>(a);
    };

    std::vector<std::vector<int>> r_tuples, c_tuples, i_tuples;
    for (int u = 0; u < g.n; ++u) {
        // zero-sum d-tuples, one element per neighbor slot
        std::vector<long long> coords(d, 0);
        while (true) {
            long long sum = std::accumulate(coords.begin(), coords.end() - 1, 0LL);
            coords[d - 1] = ((m - sum % m) % m);
            std::vector<int> tuple(d);
            for (int slot = 0; slot < d; ++slot) tuple[slot] = elem(u, slot, coords[slot]);
            r_tuples.push_back(std::move(tuple));
            int pos = d - 2;
            while (pos >= 0 && coords[pos] == m - 1) coords[pos--] = 0;
            if (pos < 0) break;
            ++coords[pos];
        }
        for (int slot = 0; slot < d; ++slot)
            for (long long a = 0; a < m; ++a)
                c_tuples.push_back({elem(u, slot, a), elem(u, slot, (a + 1) % m)});
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        auto [u, v] = g.edges[e];
        int slot_v = static_cast<int>(std::lower_bound(g.adj[u].begin(), g.adj[u].end(), v) -
                                      g.adj[u].begin());
        int slot_u = static_cast<int>(std::lower_bound(g.adj[v].begin(), g.adj[v].end(), u) -
                                      g.adj[v].begin());
        for (long long a = 0; a < m; ++a) {
            long long b = ((lambda.values[e] - a) % m + m) % m;
            i_tuples.push_back({elem(u, slot_v, a), elem(v, slot_u, b)});
            i_tuples.push_back({elem(v, slot_u, b), elem(u, slot_v, a)});
        }
    }
    s.relations.push_back(make_explicit("R", d, std::move(r_tuples)));
    s.relations.push_back(make_explicit("C", 2, std::move(c_tuples)));
    s.relations.push_back(make_explicit("I", 2, std::move(i_tuples)));
    sort_relations(s);
    s.provenance = std::move(prov);
    return s;
}

namespace {

// Zero-sum vectors over Z_m indexed by the sorted neighbor list, enumerated
// lexicographically by their free prefix.
std::vector<std::vector<long long>> zero_sum_vectors(int deg, long long m) {
    std::vector<std::vector<long long>> out;
    std::vector<long long> coords(deg, 0);
    while (true) {
        long long sum = 0;
        for (int i = 0; i + 1 < deg; ++i) sum += coords[i];
        coords[deg - 1] = (m - sum % m) % m;
        out.push_back(coords);
        int pos = deg - 2;
        while (pos >= 0 && coords[pos] == m - 1) coords[pos--] = 0;
        if (pos < 0) break;
        ++coords[pos];
    }
    return out;
}

} // namespace

CfiStructure build_cfi_inner(const BaseGraph& g, long long m, const TwistAssignment& lambda) {
    check_builder_inputs(g, m, lambda, /*need_regular=*/false);
    for (int u = 0; u < g.n; ++u)
        if (g.degree(u) == 0) throw UsageError("inner construction requires positive degrees");

    CfiStructure s;
    s.variant = StructureVariant::Inner;
    std::vector<int> offset(g.n + 1, 0);
    std::vector<std::vector<std::vector<long long>>> gadget_vectors(g.n);
    for (int u = 0; u < g.n; ++u) {
        gadget_vectors[u] = zero_sum_vectors(g.degree(u), m);
        offset[u + 1] = offset[u] + static_cast<int>(gadget_vectors[u].size());
    }
    s.n = offset[g.n];
    s.preorder_rank.resize(s.n);
    Provenance prov;
    prov.variant = CfiVariant::Inner;
    prov.twist = lambda;
    prov.gadget.resize(s.n);
    prov.label.resize(s.n);
    for (int u = 0; u < g.n; ++u)
        for (std::size_t i = 0; i < gadget_vectors[u].size(); ++i) {
            int id = offset[u] + static_cast<int>(i);
            s.preorder_rank[id] = u;
            prov.gadget[id] = u;
            prov.label[id] = gadget_vectors[u][i];
        }

    // Tag sets for the 4-ary tables: for a same-gadget pair (x, y) in B_u,
    // N tags are the (u,v) with x(v) == y(v), C tags those with x(v)+1 == y(v).
    // Pairs from different gadgets carry the empty tag set.
    std::map<std::vector<std::pair<int, int>>, int> tag_rank_n, tag_rank_c;
    std::vector<std::vector<std::pair<int, int>>> tags_n(std::size_t(s.n) * s.n),
        tags_c(std::size_t(s.n) * s.n);
    for (int u = 0; u < g.n; ++u) {
        const auto& vecs = gadget_vectors[u];
        const int deg = g.degree(u);
        for (std::size_t i = 0; i < vecs.size(); ++i)
            for (std::size_t j = 0; j < vecs.size(); ++j) {
                int x = offset[u] + static_cast<int>(i);
                int y = offset[u] + static_cast<int>(j);
                auto& tn = tags_n[std::size_t(x) * s.n + y];
                auto& tc = tags_c[std::size_t(x) * s.n + y];
                for (int slot = 0; slot < deg; ++slot) {
                    int v = g.adj[u][slot];
                    if (vecs[i][slot] == vecs[j][slot]) tn.emplace_back(u, v);
                    if ((vecs[i][slot] + 1) % m == vecs[j][slot]) tc.emplace_back(u, v);
                }
            }
    }
    for (const auto& t : tags_n) tag_rank_n.emplace(t, 0);
    for (const auto& t : tags_c) tag_rank_c.emplace(t, 0);
    int next = 0;
    for (auto& [key, val] : tag_rank_n) val = next++;
    next = 0;
    for (auto& [key, val] : tag_rank_c) val = next++;

    PairOrderRelation po_n, po_c;
    po_n.n = po_c.n = s.n;
    po_n.rank.resize(std::size_t(s.n) * s.n);
    po_c.rank.resize(std::size_t(s.n) * s.n);
    for (std::size_t idx = 0; idx < tags_n.size(); ++idx) {
        po_n.rank[idx] = tag_rank_n.at(tags_n[idx]);
        po_c.rank[idx] = tag_rank_c.at(tags_c[idx]);
    }

    std::vector<std::vector<int>> i_tuples;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        auto [u, v] = g.edges[e];
        int slot_v = static_cast<int>(std::lower_bound(g.adj[u].begin(), g.adj[u].end(), v) -
                                      g.adj[u].begin());
        int slot_u = static_cast<int>(std::lower_bound(g.adj[v].begin(), g.adj[v].end(), u) -
                                      g.adj[v].begin());
        for (std::size_t i = 0; i < gadget_vectors[u].size(); ++i)
            for (std::size_t j = 0; j < gadget_vectors[v].size(); ++j) {
                if ((gadget_vectors[u][i][slot_v] + gadget_vectors[v][j][slot_u]) % m !=
                    lambda.values[e])
                    continue;
                int x = offset[u] + static_cast<int>(i);
                int y = offset[v] + static_cast<int>(j);
                i_tuples.push_back({x, y});
                i_tuples.push_back({y, x});
            }
    }

    Relation rel_n, rel_c;
    rel_n.name = "N";
    rel_n.table = std::move(po_n);
    rel_c.name = "C";
    rel_c.table = std::move(po_c);
    s.relations.push_back(std::move(rel_n));
    s.relations.push_back(std::move(rel_c));
    s.relations.push_back(make_explicit("I", 2, std::move(i_tuples)));
    sort_relations(s);
    s.provenance = std::move(prov);
    return s;
}

CfiStructure strip_labels(const CfiStructure& s, std::uint64_t seed) {
    // permutation respecting preorder classes
    std::vector<std::vector<int>> classes;
    std::map<int, int> class_of_rank;
    for (int x = 0; x < s.n; ++x) {
        auto it = class_of_rank.find(s.preorder_rank[x]);
        if (it == class_of_rank.end()) {
            class_of_rank.emplace(s.preorder_rank[x], static_cast<int>(classes.size()));
            classes.push_back({x});
        } else {
            classes[it->second].push_back(x);
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<int> image(s.n);
    for (auto& members : classes) {
        std::vector<int> shuffled = members;
        for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i) {
            int j = static_cast<int>(bounded_rand(rng, static_cast<std::uint64_t>(i) + 1));
            std::swap(shuffled[i], shuffled[j]);
        }
        for (std::size_t i = 0; i < members.size(); ++i) image[members[i]] = shuffled[i];
    }

    CfiStructure out;
    out.variant = s.variant;
    out.n = s.n;
    out.preorder_rank.resize(s.n);
    for (int x = 0; x < s.n; ++x) out.preorder_rank[image[x]] = s.preorder_rank[x];
    for (const auto& rel : s.relations) {
        if (auto* e = std::get_if<ExplicitRelation>(&rel.table)) {
            std::vector<std::vector<int>> tuples;
            tuples.reserve(e->tuples.size());
            for (const auto& t : e->tuples) {
                std::vector<int> mapped(t.size());
                for (std::size_t i = 0; i < t.size(); ++i) mapped[i] = image[t[i]];
                tuples.push_back(std::move(mapped));
            }
            out.relations.push_back(make_explicit(rel.name, e->arity, std::move(tuples)));
        } else {
            const auto& po = std::get<PairOrderRelation>(rel.table);
            PairOrderRelation mapped;
            mapped.n = po.n;
            mapped.rank.resize(po.rank.size());
            for (int x = 0; x < po.n; ++x)
                for (int y = 0; y < po.n; ++y)
                    mapped.rank[std::size_t(image[x]) * po.n + image[y]] = po.rank_at(x, y);
            Relation r;
            r.name = rel.name;
            r.table = std::move(mapped);
            out.relations.push_back(std::move(r));
        }
    }
    sort_relations(out);
    return out;
}

namespace {

std::string variant_name(StructureVariant v) {
    switch (v) {
        case StructureVariant::Outer: return "outer";
        case StructureVariant::Inner: return "inner";
        default: return "generic";
    }
}

StructureVariant variant_from_name(const std::string& name) {
    if (name == "outer") return StructureVariant::Outer;
    if (name == "inner") return StructureVariant::Inner;
    if (name == "generic") return StructureVariant::Generic;
    throw DataError("unknown structure variant: " + name);
}

} // namespace

std::string serialize(const CfiStructure& s) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["variant"] = variant_name(s.variant);
    auto universe = nlohmann::ordered_json::array();
    for (int x = 0; x < s.n; ++x) {
        nlohmann::ordered_json el;
        el["id"] = x;
        el["preorder_rank"] = s.preorder_rank[x];
        if (s.provenance) {
            el["gadget"] = s.provenance->gadget[x];
            el["label"] = s.provenance->label[x];
        }
        universe.push_back(std::move(el));
    }
    doc["universe"] = std::move(universe);
    auto relations = nlohmann::ordered_json::object();
    for (const auto& rel : s.relations) {
        nlohmann::ordered_json r;
        r["arity"] = rel.arity();
        if (auto* e = std::get_if<ExplicitRelation>(&rel.table)) {
            r["tuples"] = e->tuples; // kept sorted by construction
        } else {
            const auto& po = std::get<PairOrderRelation>(rel.table);
            auto rows = nlohmann::ordered_json::array();
            for (int x = 0; x < po.n; ++x) {
                auto row = nlohmann::ordered_json::array();
                for (int y = 0; y < po.n; ++y) row.push_back(po.rank_at(x, y));
                rows.push_back(std::move(row));
            }
            r["pair_ranks"] = std::move(rows);
        }
        relations[rel.name] = std::move(r);
    }
    doc["relations"] = std::move(relations);
    if (s.provenance) {
        const auto& p = *s.provenance;
        nlohmann::ordered_json prov;
        prov["variant"] = p.variant == CfiVariant::Outer ? "outer" : "inner";
        prov["base_graph"] = graph_to_json(p.twist.base);
        prov["modulus"] = p.twist.mod;
        prov["twist"] = p.twist.values;
        doc["provenance"] = std::move(prov);
    }
    return doc.dump(2) + "\n";
}

CfiStructure deserialize(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw DataError(std::string("structure parse error: ") + ex.what());
    }
    try {
        if (!doc.is_object() || !doc.contains("universe") || !doc.contains("relations"))
            throw DataError("structure document must contain universe and relations");
        if (doc.value("schema_version", 0) != 1)
            throw DataError("unsupported structure schema_version");
        CfiStructure s;
        s.variant = variant_from_name(doc.value("variant", "generic"));
        const auto& universe = doc.at("universe");
        s.n = static_cast<int>(universe.size());
        s.preorder_rank.resize(s.n);
        std::vector<int> gadget(s.n, -1);
        std::vector<std::vector<long long>> label(s.n);
        bool has_label = false;
        for (int x = 0; x < s.n; ++x) {
            const auto& el = universe.at(x);
            if (el.at("id").get<int>() != x)
                throw DataError("universe ids must be 0..n-1 in order");
            s.preorder_rank[x] = el.at("preorder_rank").get<int>();
            if (el.contains("gadget")) {
                gadget[x] = el.at("gadget").get<int>();
                has_label = true;
            }
            if (el.contains("label")) label[x] = el.at("label").get<std::vector<long long>>();
        }
        for (auto it = doc.at("relations").begin(); it != doc.at("relations").end(); ++it) {
            const auto& r = it.value();
            Relation rel;
            rel.name = it.key();
            int arity = r.at("arity").get<int>();
            if (r.contains("tuples")) {
                ExplicitRelation e;
                e.arity = arity;
                for (const auto& t : r.at("tuples")) {
                    std::vector<int> tuple = t.get<std::vector<int>>();
                    if (static_cast<int>(tuple.size()) != arity)
                        throw DataError("tuple arity mismatch in relation " + rel.name);
                    for (int v : tuple)
                        if (v < 0 || v >= s.n)
                            throw DataError("tuple entry out of range in relation " + rel.name);
                    e.tuples.push_back(std::move(tuple));
                }
                std::sort(e.tuples.begin(), e.tuples.end());
                e.tuples.erase(std::unique(e.tuples.begin(), e.tuples.end()), e.tuples.end());
                rel.table = std::move(e);
            } else if (r.contains("pair_ranks")) {
                if (arity != 4) throw DataError("pair_ranks relations must have arity 4");
                PairOrderRelation po;
                po.n = s.n;
                po.rank.reserve(std::size_t(s.n) * s.n);
                const auto& rows = r.at("pair_ranks");
                if (static_cast<int>(rows.size()) != s.n)
                    throw DataError("pair_ranks row count mismatch");
                for (const auto& row : rows) {
                    if (static_cast<int>(row.size()) != s.n)
                        throw DataError("pair_ranks column count mismatch");
                    for (const auto& v : row) po.rank.push_back(v.get<int>());
                }
                rel.table = std::move(po);
            } else {
                throw DataError("relation " + rel.name + " needs tuples or pair_ranks");
            }
            s.relations.push_back(std::move(rel));
        }
        if (doc.contains("provenance")) {
            const auto& pj = doc.at("provenance");
            Provenance prov;
            prov.variant =
                pj.at("variant").get<std::string>() == "outer" ? CfiVariant::Outer : CfiVariant::Inner;
            BaseGraph base = graph_from_json(pj.at("base_graph"));
            long long mod = pj.at("modulus").get<long long>();
            TwistAssignment t = TwistAssignment::zero(base, mod);
            auto vals = pj.at("twist").get<std::vector<long long>>();
            if (vals.size() != t.values.size()) throw DataError("twist length mismatch");
            for (std::size_t i = 0; i < vals.size(); ++i) t.values[i] = ((vals[i] % mod) + mod) % mod;
            prov.twist = std::move(t);
            if (!has_label) throw DataError("provenance requires gadget/label annotations");
            prov.gadget = std::move(gadget);
            prov.label = std::move(label);
            s.provenance = std::move(prov);
        }
        sort_relations(s);
        return s;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("malformed structure document: ") + ex.what());
    }
}

std::string export_dot(const CfiStructure& s) {
    std::ostringstream out;
    out << "digraph S {\n";
    // cluster per gadget when known, otherwise per preorder class
    std::map<int, std::vector<int>> groups;
    for (int x = 0; x < s.n; ++x) {
        int key = s.provenance ? s.provenance->gadget[x] : s.preorder_rank[x];
        groups[key].push_back(x);
    }
    for (const auto& [key, members] : groups) {
        out << "  subgraph cluster_" << key << " {\n    label=\"g" << key << "\";\n";
        for (int x : members) out << "    " << x << ";\n";
        out << "  }\n";
    }
    if (const Relation* i_rel = s.find_relation("I")) {
        const auto& e = std::get<ExplicitRelation>(i_rel->table);
        for (const auto& t : e.tuples)
            if (t[0] < t[1]) out << "  " << t[0] << " -> " << t[1] << " [dir=none];\n";
    }
    if (const Relation* c_rel = s.find_relation("C")) {
        if (auto* e = std::get_if<ExplicitRelation>(&c_rel->table)) {
            for (const auto& t : e->tuples)
                out << "  " << t[0] << " -> " << t[1] << " [color=blue];\n";
        } else {
            // pairs with a non-empty C tag set have rank above the empty set's
            const auto& po = std::get<PairOrderRelation>(c_rel->table);
            for (int x = 0; x < po.n; ++x)
                for (int y = 0; y < po.n; ++y)
                    if (x != y && po.rank_at(x, y) > 0)
                        out << "  " << x << " -> " << y << " [color=blue];\n";
        }
    }
    out << "}\n";
    return out.str();
}

CfiStructure graph_structure(const BaseGraph& g) {
    CfiStructure s;
    s.variant = StructureVariant::Generic;
    s.n = g.n;
    s.preorder_rank.assign(g.n, 0);
    std::vector<std::vector<int>> tuples;
    for (auto [u, v] : g.edges) {
        tuples.push_back({u, v});
        tuples.push_back({v, u});
    }
    s.relations.push_back(make_explicit("E", 2, std::move(tuples)));
    return s;
}

} // namespace cfiwb
