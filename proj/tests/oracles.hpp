#pragma once

// Independent brute-force oracles for the test suites. These deliberately
// avoid the library's own algorithms: girth by simple-cycle enumeration,
// connectivity by separator enumeration, rank by minors, linear systems by
// full enumeration.

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "cfiwb/algebra.hpp"
#include "cfiwb/base_graph.hpp"

namespace oracle {

// shortest cycle by DFS over simple paths with a canonical minimal root
inline std::optional<int> girth_exhaustive(const cfiwb::BaseGraph& g) {
    int best = -1;
    std::vector<char> on_path(g.n, 0);
    std::vector<int> path;
    auto dfs = [&](auto&& self, int root, int v) -> void {
        for (int w : g.adj[v]) {
            if (w == root && path.size() >= 3) {
                int len = static_cast<int>(path.size());
                if (best < 0 || len < best) best = len;
            }
            if (w <= root || on_path[w]) continue;
            on_path[w] = 1;
            path.push_back(w);
            self(self, root, w);
            path.pop_back();
            on_path[w] = 0;
        }
    };
    for (int root = 0; root < g.n; ++root) {
        on_path.assign(g.n, 0);
        on_path[root] = 1;
        path = {root};
        dfs(dfs, root, root);
    }
    if (best < 0) return std::nullopt;
    return best;
}

inline bool connected_after_removal(const cfiwb::BaseGraph& g, const std::vector<char>& removed) {
    int start = -1, remaining = 0;
    for (int v = 0; v < g.n; ++v)
        if (!removed[v]) {
            ++remaining;
            if (start < 0) start = v;
        }
    if (remaining <= 1) return true;
    std::vector<char> seen(g.n, 0);
    std::vector<int> stack{start};
    seen[start] = 1;
    int count = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : g.adj[v])
            if (!removed[w] && !seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
    }
    return count == remaining;
}

// minimum separator size by enumerating all vertex subsets
inline int connectivity_exhaustive(const cfiwb::BaseGraph& g) {
    if (g.n <= 1) return 0;
    std::vector<char> removed(g.n, 0);
    if (!connected_after_removal(g, removed)) return 0;
    for (int size = 1; size <= g.n - 2; ++size) {
        std::vector<int> pick(size);
        auto rec = [&](auto&& self, int idx, int from) -> bool {
            if (idx == size) {
                std::fill(removed.begin(), removed.end(), 0);
                for (int v : pick) removed[v] = 1;
                return !connected_after_removal(g, removed);
            }
            for (int v = from; v < g.n; ++v) {
                pick[idx] = v;
                if (self(self, idx + 1, v + 1)) return true;
            }
            return false;
        };
        if (rec(rec, 0, 0)) return size;
    }
    return g.n - 1;
}

inline long long det_mod(std::vector<std::vector<long long>> w, long long p) {
    int n = static_cast<int>(w.size());
    long long det = 1;
    for (int col = 0; col < n; ++col) {
        int pivot = -1;
        for (int i = col; i < n; ++i)
            if (w[i][col] % p != 0) {
                pivot = i;
                break;
            }
        if (pivot < 0) return 0;
        if (pivot != col) {
            std::swap(w[pivot], w[col]);
            det = (p - det) % p;
        }
        det = det * (w[col][col] % p) % p;
        // eliminate below using modular inverse via Fermat (p prime, small)
        long long inv = 1;
        for (long long e = p - 2, base = w[col][col] % p; e > 0; e >>= 1) {
            if (e & 1) inv = inv * base % p;
            base = base * base % p;
        }
        for (int i = col + 1; i < n; ++i) {
            long long f = w[i][col] % p * inv % p;
            for (int j = col; j < n; ++j) w[i][j] = ((w[i][j] - f * w[col][j]) % p + p) % p;
        }
    }
    return ((det % p) + p) % p;
}

// rank as the largest size of a square submatrix with nonzero determinant
inline int rank_by_minors(const cfiwb::RingMatrix& m, long long p) {
    int best = 0;
    std::vector<int> rows, cols;
    auto choose = [&](auto&& self, int size, std::vector<int>& out, int limit, int from,
                      auto&& inner) -> bool {
        if (static_cast<int>(out.size()) == size) return inner(inner);
        for (int v = from; v < limit; ++v) {
            out.push_back(v);
            if (self(self, size, out, limit, v + 1, inner)) return true;
            out.pop_back();
        }
        return false;
    };
    int maxsize = std::min(m.rows, m.cols);
    for (int size = maxsize; size >= 1; --size) {
        rows.clear();
        bool found = choose(
            choose, size, rows, m.rows, 0, [&](auto&&) -> bool {
                cols.clear();
                auto inner_choose = [&](auto&& self2, int from) -> bool {
                    if (static_cast<int>(cols.size()) == size) {
                        std::vector<std::vector<long long>> sub(size,
                                                                std::vector<long long>(size));
                        for (int i = 0; i < size; ++i)
                            for (int j = 0; j < size; ++j) sub[i][j] = m.at(rows[i], cols[j]);
                        return det_mod(sub, p) != 0;
                    }
                    for (int v = from; v < m.cols; ++v) {
                        cols.push_back(v);
                        if (self2(self2, v + 1)) return true;
                        cols.pop_back();
                    }
                    return false;
                };
                return inner_choose(inner_choose, 0);
            });
        if (found) {
            best = size;
            break;
        }
    }
    return best;
}

// the full solution set of M x = b over Z_m by enumeration
inline std::set<std::vector<long long>> solve_exhaustive(const cfiwb::RingMatrix& m,
                                                         const std::vector<long long>& b) {
    std::set<std::vector<long long>> out;
    std::vector<long long> x(m.cols, 0);
    while (true) {
        bool ok = true;
        for (int i = 0; i < m.rows && ok; ++i) {
            long long acc = 0;
            for (int j = 0; j < m.cols; ++j) acc += m.at(i, j) * x[j];
            ok = ((acc - b[i]) % m.mod + m.mod) % m.mod == 0;
        }
        if (ok) out.insert(x);
        int pos = m.cols - 1;
        while (pos >= 0 && x[pos] == m.mod - 1) x[pos--] = 0;
        if (pos < 0) break;
        ++x[pos];
    }
    return out;
}

// expands an affine solution description into the explicit set
inline std::set<std::vector<long long>> expand_solutions(const cfiwb::AffineSolutionSet& sol,
                                                         int cols) {
    std::set<std::vector<long long>> out;
    if (!sol.consistent) return out;
    const long long m = sol.mod;
    std::vector<long long> coeff(sol.generators.size(), 0);
    while (true) {
        std::vector<long long> x(sol.particular);
        x.resize(cols);
        for (std::size_t i = 0; i < coeff.size(); ++i)
            for (int j = 0; j < cols; ++j)
                x[j] = (x[j] + coeff[i] * sol.generators[i][j]) % m;
        out.insert(x);
        int pos = static_cast<int>(coeff.size()) - 1;
        while (pos >= 0 && coeff[pos] == m - 1) coeff[pos--] = 0;
        if (pos < 0) break;
        ++coeff[pos];
    }
    return out;
}

} // namespace oracle
