#include "cfiwb/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cfiwb/errors.hpp"

namespace cfiwb {

namespace {

long long norm_mod(long long x, long long m) {
    x %= m;
    if (x < 0) x += m;
    return x;
}

long long egcd(long long a, long long b, long long& x, long long& y) {
    if (b == 0) {
        x = 1;
        y = 0;
        return a;
    }
    long long x1, y1;
    long long g = egcd(b, a % b, x1, y1);
    x = y1;
    y = x1 - (a / b) * y1;
    return g;
}

long long inv_mod(long long a, long long m) {
    long long x, y;
    long long g = egcd(norm_mod(a, m), m, x, y);
    if (g != 1) throw InternalError("element not invertible mod " + std::to_string(m));
    return norm_mod(x, m);
}

std::vector<std::pair<long long, int>> factorize(long long m) {
    std::vector<std::pair<long long, int>> fac;
    for (long long p = 2; p * p <= m; ++p) {
        if (m % p == 0) {
            int e = 0;
            while (m % p == 0) {
                m /= p;
                ++e;
            }
            fac.emplace_back(p, e);
        }
    }
    if (m > 1) fac.emplace_back(m, 1);
    return fac;
}

} // namespace

bool is_prime_number(long long m) {
    if (m < 2) return false;
    for (long long p = 2; p * p <= m; ++p)
        if (m % p == 0) return false;
    return true;
}

Modulus Modulus::of(long long m) {
    if (m < 2) throw UsageError("modulus must be at least 2");
    Modulus mod;
    mod.value = m;
    if (is_prime_number(m)) {
        mod.kind = Kind::Prime;
    } else if ((m & (m - 1)) == 0) {
        mod.kind = Kind::PowerOfTwo;
    } else {
        mod.kind = Kind::General;
    }
    return mod;
}

RingMatrix RingMatrix::identity(int n, long long m) {
    RingMatrix id(n, n, m);
    for (int i = 0; i < n; ++i) id.at(i, i) = 1;
    return id;
}

RingMatrix RingMatrix::mul(const RingMatrix& rhs) const {
    if (cols != rhs.rows || mod != rhs.mod) throw UsageError("matrix product shape mismatch");
    RingMatrix out(rows, rhs.cols, mod);
    for (int i = 0; i < rows; ++i)
        for (int l = 0; l < cols; ++l) {
            long long v = at(i, l);
            if (v == 0) continue;
            for (int j = 0; j < rhs.cols; ++j)
                out.at(i, j) = (out.at(i, j) + v * rhs.at(l, j)) % mod;
        }
    return out;
}

RingMatrix RingMatrix::transpose() const {
    RingMatrix out(cols, rows, mod);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(j, i) = at(i, j);
    return out;
}

int fp_rank(const RingMatrix& m) {
    if (!Modulus::of(m.mod).is_prime()) throw UsageError("fp_rank requires a prime modulus");
    const long long p = m.mod;
    std::vector<std::vector<long long>> w(m.rows, std::vector<long long>(m.cols));
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) w[i][j] = norm_mod(m.at(i, j), p);
    int rank = 0;
    for (int col = 0; col < m.cols && rank < m.rows; ++col) {
        int pivot = -1;
        for (int i = rank; i < m.rows; ++i)
            if (w[i][col] != 0) {
                pivot = i;
                break;
            }
        if (pivot < 0) continue;
        std::swap(w[rank], w[pivot]);
        long long inv = inv_mod(w[rank][col], p);
        for (int j = col; j < m.cols; ++j) w[rank][j] = w[rank][j] * inv % p;
        for (int i = 0; i < m.rows; ++i) {
            if (i == rank || w[i][col] == 0) continue;
            long long f = w[i][col];
            for (int j = col; j < m.cols; ++j)
                w[i][j] = norm_mod(w[i][j] - f * w[rank][j], p);
        }
        ++rank;
    }
    return rank;
}

AffineSolutionSet fp_solve(const RingMatrix& m, const std::vector<long long>& b) {
    const long long p = m.mod;
    if (!Modulus::of(p).is_prime()) throw UsageError("fp_solve requires a prime modulus");
    if (static_cast<int>(b.size()) != m.rows) throw UsageError("rhs length mismatch");
    const int R = m.rows, C = m.cols;
    std::vector<std::vector<long long>> w(R, std::vector<long long>(C + 1));
    for (int i = 0; i < R; ++i) {
        for (int j = 0; j < C; ++j) w[i][j] = norm_mod(m.at(i, j), p);
        w[i][C] = norm_mod(b[i], p);
    }
    std::vector<int> pivot_col;
    int rank = 0;
    for (int col = 0; col < C && rank < R; ++col) {
        int pivot = -1;
        for (int i = rank; i < R; ++i)
            if (w[i][col] != 0) {
                pivot = i;
                break;
            }
        if (pivot < 0) continue;
        std::swap(w[rank], w[pivot]);
        long long inv = inv_mod(w[rank][col], p);
        for (int j = col; j <= C; ++j) w[rank][j] = w[rank][j] * inv % p;
        for (int i = 0; i < R; ++i) {
            if (i == rank || w[i][col] == 0) continue;
            long long f = w[i][col];
            for (int j = col; j <= C; ++j) w[i][j] = norm_mod(w[i][j] - f * w[rank][j], p);
        }
        pivot_col.push_back(col);
        ++rank;
    }
    AffineSolutionSet sol;
    sol.mod = p;
    for (int i = rank; i < R; ++i)
        if (w[i][C] != 0) {
            sol.consistent = false;
            return sol;
        }
    sol.consistent = true;
    sol.particular.assign(C, 0);
    for (int r = 0; r < rank; ++r) sol.particular[pivot_col[r]] = w[r][C];
    std::vector<char> is_pivot(C, 0);
    for (int c : pivot_col) is_pivot[c] = 1;
    for (int f = 0; f < C; ++f) {
        if (is_pivot[f]) continue;
        std::vector<long long> gen(C, 0);
        gen[f] = 1;
        for (int r = 0; r < rank; ++r) gen[pivot_col[r]] = norm_mod(-w[r][f], p);
        sol.generators.push_back(std::move(gen));
    }
    return sol;
}

namespace {

int valuation(long long x, long long p, int e) {
    if (x == 0) return e;
    int v = 0;
    while (x % p == 0) {
        x /= p;
        ++v;
    }
    return v;
}

// Solve over Z_{p^e} with minimal-valuation pivoting into echelon form.
// The pivot valuation is minimal over the remaining submatrix when chosen,
// so in a pivot row every coefficient to the right (later pivot columns and
// free columns) has valuation at least the pivot's; back-substitution then
// divides exactly, for any free-variable assignment.
AffineSolutionSet prime_power_solve(const RingMatrix& m, const std::vector<long long>& b,
                                    long long p, int e) {
    const long long mod = m.mod;
    const int R = m.rows, C = m.cols;
    std::vector<std::vector<long long>> w(R, std::vector<long long>(C + 1));
    for (int i = 0; i < R; ++i) {
        for (int j = 0; j < C; ++j) w[i][j] = norm_mod(m.at(i, j), mod);
        w[i][C] = norm_mod(b[i], mod);
    }
    std::vector<int> pivot_col, pivot_val;
    std::vector<char> col_used(C, 0);
    int rank = 0;
    while (rank < R) {
        int best_i = -1, best_j = -1, best_v = e;
        for (int i = rank; i < R; ++i)
            for (int j = 0; j < C; ++j) {
                if (col_used[j] || w[i][j] == 0) continue;
                int v = valuation(w[i][j], p, e);
                if (v < best_v) {
                    best_v = v;
                    best_i = i;
                    best_j = j;
                }
            }
        if (best_i < 0) break;
        std::swap(w[rank], w[best_i]);
        long long unit = w[rank][best_j];
        for (int k = 0; k < best_v; ++k) unit /= p;
        long long scale = inv_mod(unit, mod);
        for (int j = 0; j <= C; ++j) w[rank][j] = w[rank][j] * scale % mod;
        long long piv = w[rank][best_j];
        for (int i = rank + 1; i < R; ++i) {
            if (w[i][best_j] == 0) continue;
            long long f = w[i][best_j] / piv; // exact: valuation >= best_v below
            for (int j = 0; j <= C; ++j) w[i][j] = norm_mod(w[i][j] - f * w[rank][j], mod);
        }
        col_used[best_j] = 1;
        pivot_col.push_back(best_j);
        pivot_val.push_back(best_v);
        ++rank;
    }
    AffineSolutionSet sol;
    sol.mod = mod;
    for (int i = rank; i < R; ++i)
        if (w[i][C] != 0) {
            sol.consistent = false;
            return sol;
        }
    std::vector<long long> pow_v(rank, 1);
    for (int r = 0; r < rank; ++r)
        for (int k = 0; k < pivot_val[r]; ++k) pow_v[r] *= p;

    auto back_solve = [&](std::vector<long long> x, bool with_rhs, int forced_pivot,
                          long long forced_value) -> std::optional<std::vector<long long>> {
        for (int r = rank - 1; r >= 0; --r) {
            long long acc = with_rhs ? w[r][C] : 0;
            for (int j = 0; j < C; ++j) {
                if (j == pivot_col[r] || w[r][j] == 0 || x[j] == 0) continue;
                acc = norm_mod(acc - w[r][j] * x[j], mod);
            }
            if (acc % pow_v[r] != 0) return std::nullopt;
            long long value = (acc / pow_v[r]) % mod;
            if (r == forced_pivot) value = norm_mod(value + forced_value, mod);
            x[pivot_col[r]] = value;
        }
        return x;
    };

    std::vector<long long> zero(C, 0);
    auto particular = back_solve(zero, true, -1, 0);
    if (!particular) {
        sol.consistent = false;
        return sol;
    }
    sol.consistent = true;
    sol.particular = *particular;
    for (int f = 0; f < C; ++f) {
        if (col_used[f]) continue;
        std::vector<long long> x(C, 0);
        x[f] = 1;
        auto gen = back_solve(std::move(x), false, -1, 0);
        if (!gen) throw InternalError("homogeneous back-substitution failed");
        sol.generators.push_back(std::move(*gen));
    }
    for (int r = 0; r < rank; ++r) {
        if (pivot_val[r] == 0) continue;
        auto gen = back_solve(zero, false, r, mod / pow_v[r]);
        if (!gen) throw InternalError("torsion back-substitution failed");
        if (std::any_of(gen->begin(), gen->end(), [](long long v) { return v != 0; }))
            sol.generators.push_back(std::move(*gen));
    }
    return sol;
}

} // namespace

AffineSolutionSet zm_solve(const RingMatrix& m, const std::vector<long long>& b) {
    if (static_cast<int>(b.size()) != m.rows) throw UsageError("rhs length mismatch");
    const long long mod = m.mod;
    auto fac = factorize(mod);
    if (fac.size() == 1 && fac[0].second == 1) return fp_solve(m, b);
    if (fac.size() == 1) return prime_power_solve(m, b, fac[0].first, fac[0].second);
    // Composite with several prime-power components: solve per component and
    // recombine by CRT, lifting each component generator with zeros elsewhere.
    AffineSolutionSet sol;
    sol.mod = mod;
    sol.consistent = true;
    sol.particular.assign(m.cols, 0);
    for (auto [p, e] : fac) {
        long long q = 1;
        for (int k = 0; k < e; ++k) q *= p;
        RingMatrix comp(m.rows, m.cols, q);
        for (std::size_t idx = 0; idx < m.a.size(); ++idx) comp.a[idx] = norm_mod(m.a[idx], q);
        std::vector<long long> bq(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) bq[i] = norm_mod(b[i], q);
        AffineSolutionSet part = (e == 1) ? fp_solve(comp, bq) : prime_power_solve(comp, bq, p, e);
        if (!part.consistent) {
            sol.consistent = false;
            sol.particular.clear();
            sol.generators.clear();
            return sol;
        }
        const long long rest = mod / q; // coprime to q
        const long long lift = rest % mod * inv_mod(rest % q, q) % mod; // 1 mod q, 0 mod rest
        for (int j = 0; j < m.cols; ++j)
            sol.particular[j] = (sol.particular[j] + part.particular[j] * lift) % mod;
        for (const auto& gen : part.generators) {
            std::vector<long long> lifted(m.cols, 0);
            for (int j = 0; j < m.cols; ++j) lifted[j] = gen[j] * lift % mod;
            sol.generators.push_back(std::move(lifted));
        }
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Constraint bases over F_p with reusable row buffers.

namespace {

class ConstraintBasis {
public:
    ConstraintBasis(int width, long long p) : width_(width), p_(p), pivot_of_(width, -1) {}

    // Reduces `row` in place; stores a copy when it extends the span.
    void add(std::vector<long long>& row) {
        for (int c = 0; c < width_; ++c) {
            if (row[c] == 0) continue;
            int r = pivot_of_[c];
            if (r < 0) {
                long long inv = inv_mod(row[c], p_);
                for (int j = c; j < width_; ++j) row[j] = row[j] * inv % p_;
                for (auto& existing : rows_) {
                    long long f = existing[c];
                    if (f == 0) continue;
                    for (int j = c; j < width_; ++j)
                        existing[j] = norm_mod(existing[j] - f * row[j], p_);
                }
                pivot_of_[c] = static_cast<int>(rows_.size());
                pivot_col_.push_back(c);
                rows_.push_back(row);
                return;
            }
            long long f = row[c];
            const auto& pr = rows_[r];
            for (int j = c; j < width_; ++j) row[j] = norm_mod(row[j] - f * pr[j], p_);
        }
    }

    int rank() const { return static_cast<int>(rows_.size()); }

    std::vector<std::vector<long long>> nullspace() const {
        std::vector<std::vector<long long>> basis;
        for (int f = 0; f < width_; ++f) {
            if (pivot_of_[f] >= 0) continue;
            std::vector<long long> v(width_, 0);
            v[f] = 1;
            for (std::size_t r = 0; r < rows_.size(); ++r)
                v[pivot_col_[r]] = norm_mod(-rows_[r][f], p_);
            basis.push_back(std::move(v));
        }
        return basis;
    }

private:
    int width_;
    long long p_;
    std::vector<int> pivot_of_;
    std::vector<int> pivot_col_;
    std::vector<std::vector<long long>> rows_;
};

class ConstraintBasis2 {
public:
    explicit ConstraintBasis2(int width)
        : width_(width), words_((width + 63) / 64), pivot_of_(width, -1) {}

    void add(std::vector<std::uint64_t>& row) {
        while (true) {
            int c = first_bit(row);
            if (c < 0) return;
            int r = pivot_of_[c];
            if (r < 0) {
                for (auto& existing : rows_)
                    if (get_bit(existing, c)) xor_into(existing, row);
                pivot_of_[c] = static_cast<int>(rows_.size());
                pivot_col_.push_back(c);
                rows_.push_back(row);
                return;
            }
            xor_into(row, rows_[r]);
        }
    }

    int rank() const { return static_cast<int>(rows_.size()); }
    int word_count() const { return words_; }

    std::vector<std::vector<long long>> nullspace() const {
        std::vector<std::vector<long long>> basis;
        for (int f = 0; f < width_; ++f) {
            if (pivot_of_[f] >= 0) continue;
            std::vector<long long> v(width_, 0);
            v[f] = 1;
            for (std::size_t r = 0; r < rows_.size(); ++r)
                if (get_bit(rows_[r], f)) v[pivot_col_[r]] = 1;
            basis.push_back(std::move(v));
        }
        return basis;
    }

private:
    static bool get_bit(const std::vector<std::uint64_t>& row, int c) {
        return (row[c >> 6] >> (c & 63)) & 1;
    }
    void xor_into(std::vector<std::uint64_t>& dst, const std::vector<std::uint64_t>& src) const {
        for (int w = 0; w < words_; ++w) dst[w] ^= src[w];
    }
    int first_bit(const std::vector<std::uint64_t>& row) const {
        for (int w = 0; w < words_; ++w)
            if (row[w]) return (w << 6) + __builtin_ctzll(row[w]);
        return -1;
    }

    int width_;
    int words_;
    std::vector<int> pivot_of_;
    std::vector<int> pivot_col_;
    std::vector<std::vector<std::uint64_t>> rows_;
};

// Sparse view of a matrix family: the 1-cells per family index, plus packed
// row bitsets for O(1) membership.
struct SparseFamily {
    int n = 0;
    int words = 0;
    std::vector<std::vector<std::pair<int, int>>> cells;
    std::vector<std::vector<std::uint64_t>> rowbits;

    static SparseFamily from_dense(std::span<const RingMatrix> ms, long long p) {
        SparseFamily f;
        f.n = ms.empty() ? 0 : ms[0].rows;
        f.words = (f.n + 63) / 64;
        for (const auto& m : ms) {
            std::vector<std::pair<int, int>> cell;
            std::vector<std::uint64_t> bits(std::size_t(f.n) * f.words, 0);
            for (int x = 0; x < f.n; ++x)
                for (int y = 0; y < f.n; ++y)
                    if (norm_mod(m.at(x, y), p) != 0) {
                        cell.emplace_back(x, y);
                        bits[std::size_t(x) * f.words + (y >> 6)] |= 1ULL << (y & 63);
                    }
            f.cells.push_back(std::move(cell));
            f.rowbits.push_back(std::move(bits));
        }
        return f;
    }

    // colors must be the sorted distinct values of `part.cell`
    static SparseFamily from_partition(const PartitionFamily& part, const std::vector<int>& colors) {
        SparseFamily f;
        f.n = part.n;
        f.words = (f.n + 63) / 64;
        f.cells.resize(colors.size());
        f.rowbits.assign(colors.size(),
                         std::vector<std::uint64_t>(std::size_t(f.n) * f.words, 0));
        for (int x = 0; x < f.n; ++x)
            for (int y = 0; y < f.n; ++y) {
                int c = part.cell[std::size_t(x) * f.n + y];
                auto it = std::lower_bound(colors.begin(), colors.end(), c);
                std::size_t idx = static_cast<std::size_t>(it - colors.begin());
                f.cells[idx].emplace_back(x, y);
                f.rowbits[idx][std::size_t(x) * f.words + (y >> 6)] |= 1ULL << (y & 63);
            }
        return f;
    }

    bool has(std::size_t c, int x, int y) const {
        return (rowbits[c][std::size_t(x) * words + (y >> 6)] >> (y & 63)) & 1;
    }

    long long trace(std::size_t c, long long p) const {
        long long t = 0;
        for (auto [x, y] : cells[c])
            if (x == y) ++t;
        return t % p;
    }

    long long pair_trace(std::size_t c, std::size_t d, long long p) const {
        long long t = 0;
        for (auto [x, y] : cells[c])
            if (has(d, y, x)) ++t;
        return t % p;
    }

    long long triple_trace(std::size_t c, std::size_t d, std::size_t e, long long p) const {
        long long t = 0;
        for (auto [x, y] : cells[c])
            for (auto [y2, z] : cells[d]) {
                if (y2 != y) continue;
                if (has(e, z, x)) ++t;
            }
        return t % p;
    }

    // rank over F_p of the 0/1 indicator of cells[c], via the compact
    // submatrix on its occupied rows and columns
    int sparse_rank(std::size_t c, long long p) const {
        const auto& cell = cells[c];
        if (cell.empty()) return 0;
        std::vector<int> rows, cols;
        for (auto [x, y] : cell) {
            rows.push_back(x);
            cols.push_back(y);
        }
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
        std::sort(cols.begin(), cols.end());
        cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
        RingMatrix sub(static_cast<int>(rows.size()), static_cast<int>(cols.size()), p);
        for (auto [x, y] : cell) {
            int i = static_cast<int>(std::lower_bound(rows.begin(), rows.end(), x) - rows.begin());
            int j = static_cast<int>(std::lower_bound(cols.begin(), cols.end(), y) - cols.begin());
            sub.at(i, j) = 1;
        }
        return fp_rank(sub);
    }
};

} // namespace

IntertwinerBasis intertwiner_space(std::span<const RingMatrix> ms, std::span<const RingMatrix> ns,
                                   long long p) {
    if (!Modulus::of(p).is_prime()) throw UsageError("intertwiner space requires a prime modulus");
    if (ms.size() != ns.size()) throw UsageError("family lengths differ");
    int n = ms.empty() ? 0 : ms[0].rows;
    int n2 = ns.empty() ? 0 : ns[0].rows;
    for (const auto& m : ms)
        if (m.rows != n || m.cols != n) throw UsageError("left family must be square, same size");
    for (const auto& m : ns)
        if (m.rows != n2 || m.cols != n2) throw UsageError("right family must be square, same size");

    IntertwinerBasis out;
    out.p = p;
    out.rows = n2;
    out.cols = n;
    const int unknowns = n2 * n; // S[i][j], i < n2, j < n
    if (unknowns == 0) return out;

    auto emit_basis = [&](const std::vector<std::vector<long long>>& null_vectors) {
        for (const auto& v : null_vectors) {
            RingMatrix s(n2, n, p);
            for (int i = 0; i < n2; ++i)
                for (int j = 0; j < n; ++j) s.at(i, j) = v[std::size_t(i) * n + j];
            out.basis.push_back(std::move(s));
        }
    };

    // Equation (c, i, j'): sum_l S[i,l]*M[l,j'] - sum_l N[i,l]*S[l,j'] = 0.
    if (p == 2) {
        ConstraintBasis2 basis(unknowns);
        std::vector<std::uint64_t> row((unknowns + 63) / 64);
        for (std::size_t c = 0; c < ms.size(); ++c) {
            const RingMatrix& M = ms[c];
            const RingMatrix& N = ns[c];
            for (int i = 0; i < n2; ++i)
                for (int jp = 0; jp < n; ++jp) {
                    std::fill(row.begin(), row.end(), 0);
                    for (int l = 0; l < n; ++l)
                        if (norm_mod(M.at(l, jp), 2)) {
                            std::size_t u = std::size_t(i) * n + l;
                            row[u >> 6] ^= 1ULL << (u & 63);
                        }
                    for (int l = 0; l < n2; ++l)
                        if (norm_mod(N.at(i, l), 2)) {
                            std::size_t u = std::size_t(l) * n + jp;
                            row[u >> 6] ^= 1ULL << (u & 63);
                        }
                    basis.add(row);
                }
        }
        emit_basis(basis.nullspace());
    } else {
        ConstraintBasis basis(unknowns, p);
        std::vector<long long> row(unknowns);
        for (std::size_t c = 0; c < ms.size(); ++c) {
            const RingMatrix& M = ms[c];
            const RingMatrix& N = ns[c];
            for (int i = 0; i < n2; ++i)
                for (int jp = 0; jp < n; ++jp) {
                    std::fill(row.begin(), row.end(), 0);
                    for (int l = 0; l < n; ++l) {
                        long long v = norm_mod(M.at(l, jp), p);
                        if (v) {
                            auto& slot = row[std::size_t(i) * n + l];
                            slot = norm_mod(slot + v, p);
                        }
                    }
                    for (int l = 0; l < n2; ++l) {
                        long long v = norm_mod(N.at(i, l), p);
                        if (v) {
                            auto& slot = row[std::size_t(l) * n + jp];
                            slot = norm_mod(slot - v, p);
                        }
                    }
                    basis.add(row);
                }
        }
        emit_basis(basis.nullspace());
    }
    return out;
}

bool is_invertible(const RingMatrix& m) {
    if (m.rows != m.cols) return false;
    if (m.rows == 0) return true;
    return fp_rank(m) == m.rows;
}

FindInvertibleResult find_invertible(const IntertwinerBasis& basis, const SimilarityBudgets& budgets,
                                     std::mt19937_64& rng) {
    FindInvertibleResult res;
    if (basis.rows != basis.cols) throw UsageError("find_invertible expects a square shape");
    const int n = basis.rows;
    const long long p = basis.p;
    if (n == 0) {
        res.outcome = FindOutcome::Found;
        res.witness = RingMatrix(0, 0, p);
        res.detail = "empty dimension";
        return res;
    }
    if (basis.basis.empty()) {
        res.outcome = FindOutcome::NotFound;
        res.detail = "empty space";
        return res;
    }
    const int r = static_cast<int>(basis.basis.size());
    auto combine = [&](const std::vector<long long>& coeff) {
        RingMatrix s(n, n, p);
        for (int idx = 0; idx < r; ++idx) {
            if (coeff[idx] == 0) continue;
            const RingMatrix& bmat = basis.basis[idx];
            for (std::size_t k = 0; k < s.a.size(); ++k)
                s.a[k] = (s.a[k] + coeff[idx] * bmat.a[k]) % p;
        }
        return s;
    };

    // Exhaustive enumeration whenever p^r fits the budget; the only branch
    // that can prove NotFound.
    bool exhaustible = [&] {
        long long total = 1;
        for (int i = 0; i < r; ++i) {
            if (total > budgets.exhaustive_limit / p) return false;
            total *= p;
        }
        return total <= budgets.exhaustive_limit;
    }();
    if (exhaustible) {
        std::vector<long long> coeff(r, 0);
        while (true) {
            int pos = 0;
            while (pos < r && coeff[pos] == p - 1) coeff[pos++] = 0;
            if (pos == r) break;
            coeff[pos] += 1;
            RingMatrix s = combine(coeff);
            if (is_invertible(s)) {
                res.outcome = FindOutcome::Found;
                res.witness = std::move(s);
                res.detail = "exhaustive";
                return res;
            }
        }
        res.outcome = FindOutcome::NotFound;
        res.detail = "exhausted all combinations";
        return res;
    }

    int trials = 0;
    for (int idx = 0; idx < r && trials < budgets.random_trials; ++idx, ++trials) {
        if (is_invertible(basis.basis[idx])) {
            res.outcome = FindOutcome::Found;
            res.witness = basis.basis[idx];
            res.detail = "basis element";
            return res;
        }
    }
    std::vector<long long> coeff(r);
    for (; trials < budgets.random_trials; ++trials) {
        for (int i = 0; i < r; ++i) coeff[i] = static_cast<long long>(rng() % p);
        RingMatrix s = combine(coeff);
        if (is_invertible(s)) {
            res.outcome = FindOutcome::Found;
            res.witness = std::move(s);
            res.detail = "random trial";
            return res;
        }
    }
    res.outcome = FindOutcome::Unknown;
    res.detail = "trial budget exhausted (space dimension " + std::to_string(r) + ")";
    return res;
}

// ---------------------------------------------------------------------------
// Simultaneous similarity

namespace {

// Complete search for a permutation pi with pair-color(pi x, pi y) equal to
// pair-color(x, y); colors must come from a shared id space.
struct PermTableSearch {
    int n = 0;
    const int* cm = nullptr;
    const int* cn = nullptr;
    std::vector<int> class_m, class_n;
    long long nodes_left = 0;
    bool complete = true;
    std::vector<int> image;

    static std::optional<std::vector<int>> run(int n, const std::vector<int>& cm,
                                               const std::vector<int>& cn, long long node_budget,
                                               bool& search_complete) {
        PermTableSearch ps;
        ps.n = n;
        ps.cm = cm.data();
        ps.cn = cn.data();
        ps.nodes_left = node_budget;
        // iterated vertex refinement over the complete pair-colored digraph
        std::vector<int> vm(n, 0), vn(n, 0);
        int classes = 1;
        for (int round = 0; round < n; ++round) {
            std::map<std::vector<int>, int> ids;
            auto refine = [&](const std::vector<int>& colors, const int* table,
                              std::vector<int>& out) {
                out.resize(n);
                std::vector<std::pair<int, std::pair<int, int>>> profile;
                for (int x = 0; x < n; ++x) {
                    std::vector<int> key;
                    key.push_back(colors[x]);
                    key.push_back(table[std::size_t(x) * n + x]);
                    profile.clear();
                    for (int y = 0; y < n; ++y) {
                        if (y == x) continue;
                        profile.push_back({colors[y],
                                           {table[std::size_t(x) * n + y],
                                            table[std::size_t(y) * n + x]}});
                    }
                    std::sort(profile.begin(), profile.end());
                    for (auto& pr : profile) {
                        key.push_back(pr.first);
                        key.push_back(pr.second.first);
                        key.push_back(pr.second.second);
                    }
                    auto it = ids.emplace(std::move(key), static_cast<int>(ids.size()));
                    out[x] = it.first->second;
                }
            };
            std::vector<int> nm, nn;
            refine(vm, ps.cm, nm);
            refine(vn, ps.cn, nn);
            int next_classes =
                static_cast<int>(std::set<int>(nm.begin(), nm.end()).size());
            vm = std::move(nm);
            vn = std::move(nn);
            if (next_classes == classes) break;
            classes = next_classes;
        }
        ps.class_m = vm;
        ps.class_n = vn;
        std::map<int, int> hm, hn;
        for (int x = 0; x < n; ++x) ++hm[vm[x]];
        for (int x = 0; x < n; ++x) ++hn[vn[x]];
        if (hm != hn) {
            search_complete = true;
            return std::nullopt;
        }
        ps.image.assign(n, -1);
        std::vector<char> used(n, 0);
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            int sa = hm[vm[a]], sb = hm[vm[b]];
            if (sa != sb) return sa < sb;
            return a < b;
        });
        bool ok = ps.assign(0, order, used);
        search_complete = ps.complete;
        if (ok) return ps.image;
        return std::nullopt;
    }

    bool assign(std::size_t idx, const std::vector<int>& order, std::vector<char>& used) {
        if (idx == order.size()) return true;
        int x = order[idx];
        for (int y = 0; y < n; ++y) {
            if (used[y] || class_n[y] != class_m[x]) continue;
            if (--nodes_left <= 0) {
                complete = false;
                return false;
            }
            bool ok = cm[std::size_t(x) * n + x] == cn[std::size_t(y) * n + y];
            for (std::size_t prev = 0; ok && prev < idx; ++prev) {
                int x2 = order[prev], y2 = image[x2];
                ok = cm[std::size_t(x) * n + x2] == cn[std::size_t(y) * n + y2] &&
                     cm[std::size_t(x2) * n + x] == cn[std::size_t(y2) * n + y];
            }
            if (!ok) continue;
            image[x] = y;
            used[y] = 1;
            if (assign(idx + 1, order, used)) return true;
            if (!complete) return false;
            image[x] = -1;
            used[y] = 0;
        }
        return false;
    }
};

// Pair-color tables from a sparse family (signature = set of members).
std::pair<std::vector<int>, std::vector<int>> pair_color_tables(const SparseFamily& fm,
                                                                const SparseFamily& fn) {
    std::map<std::vector<int>, int> interned;
    auto table = [&](const SparseFamily& f) {
        std::vector<std::vector<int>> sig(std::size_t(f.n) * f.n);
        for (std::size_t c = 0; c < f.cells.size(); ++c)
            for (auto [x, y] : f.cells[c]) sig[std::size_t(x) * f.n + y].push_back(int(c));
        std::vector<int> out(sig.size());
        for (std::size_t i = 0; i < sig.size(); ++i)
            out[i] = interned.emplace(sig[i], static_cast<int>(interned.size())).first->second;
        return out;
    };
    auto cm = table(fm);
    auto cn = table(fn);
    return {std::move(cm), std::move(cn)};
}

// Invariant pre-filters; returns a NotSimilar result when one differs.
std::optional<SimilarityResult> invariant_prefilter(const SparseFamily& fm, const SparseFamily& fn,
                                                    long long p, const SimilarityBudgets& budgets) {
    SimilarityResult res;
    const std::size_t fam = fm.cells.size();
    for (std::size_t c = 0; c < fam; ++c) {
        if (fm.sparse_rank(c, p) != fn.sparse_rank(c, p)) {
            res.outcome = SimilarityOutcome::NotSimilar;
            res.detail = "rank invariant differs at family index " + std::to_string(c);
            return res;
        }
        if (fm.trace(c, p) != fn.trace(c, p)) {
            res.outcome = SimilarityOutcome::NotSimilar;
            res.detail = "trace invariant differs at family index " + std::to_string(c);
            return res;
        }
    }
    for (std::size_t c = 0; c < fam; ++c)
        for (std::size_t d = 0; d < fam; ++d)
            if (fm.pair_trace(c, d, p) != fn.pair_trace(c, d, p)) {
                res.outcome = SimilarityOutcome::NotSimilar;
                res.detail = "trace of product differs at (" + std::to_string(c) + "," +
                             std::to_string(d) + ")";
                return res;
            }
    const long long fam_ll = static_cast<long long>(fam);
    if (fam_ll * fam_ll * fam_ll <= budgets.trace_triple_limit) {
        for (std::size_t c = 0; c < fam; ++c)
            for (std::size_t d = 0; d < fam; ++d)
                for (std::size_t e = 0; e < fam; ++e)
                    if (fm.triple_trace(c, d, e, p) != fn.triple_trace(c, d, e, p)) {
                        res.outcome = SimilarityOutcome::NotSimilar;
                        res.detail = "trace of triple product differs";
                        return res;
                    }
    }
    return std::nullopt;
}

// S * M_c == N_c * S for every c, checked through the sparse cells.
bool verify_sparse_intertwines(const RingMatrix& s, const SparseFamily& fm, const SparseFamily& fn,
                               long long p) {
    const int n = fm.n;
    for (std::size_t c = 0; c < fm.cells.size(); ++c) {
        RingMatrix left(n, n, p), right(n, n, p);
        for (auto [l, j] : fm.cells[c]) // (S*M)[i][j] += S[i][l]
            for (int i = 0; i < n; ++i)
                left.at(i, j) = (left.at(i, j) + s.at(i, l)) % p;
        for (auto [i, l] : fn.cells[c]) // (N*S)[i][j] += S[l][j]
            for (int j = 0; j < n; ++j)
                right.at(i, j) = (right.at(i, j) + s.at(l, j)) % p;
        if (!(left == right)) return false;
    }
    return true;
}

// Nullspace basis of the intertwiner constraints, built from sparse cells.
IntertwinerBasis sparse_intertwiner_space(const SparseFamily& fm, const SparseFamily& fn,
                                          long long p) {
    const int n = fm.n;
    const int unknowns = n * n;
    IntertwinerBasis out;
    out.p = p;
    out.rows = n;
    out.cols = n;
    if (unknowns == 0) return out;
    const std::size_t fam = fm.cells.size();
    // per family index: column lists of M and row lists of N
    auto emit_basis = [&](const std::vector<std::vector<long long>>& null_vectors) {
        for (const auto& v : null_vectors) {
            RingMatrix s(n, n, p);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) s.at(i, j) = v[std::size_t(i) * n + j];
            out.basis.push_back(std::move(s));
        }
    };
    std::vector<std::vector<int>> m_col(fam * n), n_row(fam * n);
    for (std::size_t c = 0; c < fam; ++c) {
        for (auto [l, j] : fm.cells[c]) m_col[c * n + j].push_back(l);
        for (auto [i, l] : fn.cells[c]) n_row[c * n + i].push_back(l);
    }
    if (p == 2) {
        ConstraintBasis2 basis(unknowns);
        std::vector<std::uint64_t> row((unknowns + 63) / 64);
        for (std::size_t c = 0; c < fam; ++c)
            for (int i = 0; i < n; ++i) {
                const auto& nr = n_row[c * n + i];
                for (int jp = 0; jp < n; ++jp) {
                    const auto& mc = m_col[c * n + jp];
                    if (mc.empty() && nr.empty()) continue;
                    std::fill(row.begin(), row.end(), 0);
                    for (int l : mc) {
                        std::size_t u = std::size_t(i) * n + l;
                        row[u >> 6] ^= 1ULL << (u & 63);
                    }
                    for (int l : nr) {
                        std::size_t u = std::size_t(l) * n + jp;
                        row[u >> 6] ^= 1ULL << (u & 63);
                    }
                    basis.add(row);
                    if (basis.rank() == unknowns) return out; // empty space
                }
            }
        emit_basis(basis.nullspace());
    } else {
        ConstraintBasis basis(unknowns, p);
        std::vector<long long> row(unknowns);
        for (std::size_t c = 0; c < fam; ++c)
            for (int i = 0; i < n; ++i) {
                const auto& nr = n_row[c * n + i];
                for (int jp = 0; jp < n; ++jp) {
                    const auto& mc = m_col[c * n + jp];
                    if (mc.empty() && nr.empty()) continue;
                    std::fill(row.begin(), row.end(), 0);
                    for (int l : mc) {
                        auto& slot = row[std::size_t(i) * n + l];
                        slot = norm_mod(slot + 1, p);
                    }
                    for (int l : nr) {
                        auto& slot = row[std::size_t(l) * n + jp];
                        slot = norm_mod(slot - 1, p);
                    }
                    basis.add(row);
                    if (basis.rank() == unknowns) return out;
                }
            }
        emit_basis(basis.nullspace());
    }
    return out;
}

SimilarityResult similarity_over_sparse(const SparseFamily& fm, const SparseFamily& fn, long long p,
                                        const SimilarityBudgets& budgets, std::mt19937_64& rng) {
    SimilarityResult res;
    const int n = fm.n;

    // A permutation witness settles the common case before any heavier
    // machinery; a failed search proves nothing by itself.
    bool search_complete = false;
    auto [cm, cn] = pair_color_tables(fm, fn);
    auto perm = PermTableSearch::run(n, cm, cn, budgets.perm_search_nodes, search_complete);
    if (perm) {
        RingMatrix s(n, n, p);
        for (int x = 0; x < n; ++x) s.at((*perm)[x], x) = 1;
        if (!verify_sparse_intertwines(s, fm, fn, p) || !is_invertible(s))
            throw InternalError("permutation witness failed verification");
        res.outcome = SimilarityOutcome::Similar;
        res.witness = std::move(s);
        res.detail = "permutation witness";
        return res;
    }

    if (auto filtered = invariant_prefilter(fm, fn, p, budgets)) return *filtered;

    if (static_cast<long long>(n) * n > budgets.max_unknowns) {
        res.outcome = SimilarityOutcome::Unknown;
        res.detail = "intertwiner system too large (" + std::to_string(n) + "^2 unknowns)";
        return res;
    }
    IntertwinerBasis basis = sparse_intertwiner_space(fm, fn, p);
    if (basis.basis.empty()) {
        res.outcome = SimilarityOutcome::NotSimilar;
        res.detail = "empty intertwiner space";
        return res;
    }
    FindInvertibleResult inv = find_invertible(basis, budgets, rng);
    switch (inv.outcome) {
        case FindOutcome::Found:
            if (!verify_sparse_intertwines(*inv.witness, fm, fn, p) || !is_invertible(*inv.witness))
                throw InternalError("similarity witness failed verification");
            res.outcome = SimilarityOutcome::Similar;
            res.witness = std::move(inv.witness);
            res.detail = inv.detail;
            return res;
        case FindOutcome::NotFound:
            res.outcome = SimilarityOutcome::NotSimilar;
            res.detail = "no invertible intertwiner: " + inv.detail;
            return res;
        case FindOutcome::Unknown:
            res.outcome = SimilarityOutcome::Unknown;
            res.detail = inv.detail;
            return res;
    }
    throw InternalError("unreachable");
}

} // namespace

SimilarityResult simultaneous_similarity(std::span<const RingMatrix> ms,
                                         std::span<const RingMatrix> ns, long long p,
                                         const SimilarityBudgets& budgets, std::mt19937_64& rng) {
    if (!Modulus::of(p).is_prime()) throw UsageError("similarity requires a prime modulus");
    if (ms.size() != ns.size()) throw UsageError("family lengths differ");
    SimilarityResult res;
    int n = ms.empty() ? 0 : ms[0].rows;
    int n2 = ns.empty() ? 0 : ns[0].rows;
    for (const auto& m : ms)
        if (m.rows != n || m.cols != n) throw UsageError("left family shape mismatch");
    for (const auto& m : ns)
        if (m.rows != n2 || m.cols != n2) throw UsageError("right family shape mismatch");
    if (n != n2) throw UsageError("similarity requires equal dimensions");

    if (n == 0) {
        res.outcome = SimilarityOutcome::Similar;
        res.witness = RingMatrix(0, 0, p);
        res.detail = "empty map";
        return res;
    }
    if (ms.empty()) {
        res.outcome = SimilarityOutcome::Similar;
        res.witness = RingMatrix::identity(n, p);
        res.detail = "empty family";
        return res;
    }
    SparseFamily fm = SparseFamily::from_dense(ms, p);
    SparseFamily fn = SparseFamily::from_dense(ns, p);
    return similarity_over_sparse(fm, fn, p, budgets, rng);
}

SimilarityResult partition_similarity(const PartitionFamily& a, const PartitionFamily& b,
                                      long long p, const SimilarityBudgets& budgets,
                                      std::mt19937_64& rng) {
    if (!Modulus::of(p).is_prime()) throw UsageError("similarity requires a prime modulus");
    if (a.n != b.n) throw UsageError("similarity requires equal dimensions");
    SimilarityResult res;
    if (a.n == 0) {
        res.outcome = SimilarityOutcome::Similar;
        res.witness = RingMatrix(0, 0, p);
        res.detail = "empty map";
        return res;
    }
    auto color_set = [](const PartitionFamily& f) {
        std::vector<int> colors(f.cell);
        std::sort(colors.begin(), colors.end());
        colors.erase(std::unique(colors.begin(), colors.end()), colors.end());
        return colors;
    };
    std::vector<int> ca = color_set(a), cb = color_set(b);
    if (ca != cb) {
        res.outcome = SimilarityOutcome::NotSimilar;
        res.detail = "cell color supports differ";
        return res;
    }
    SparseFamily fm = SparseFamily::from_partition(a, ca);
    SparseFamily fn = SparseFamily::from_partition(b, ca);
    return similarity_over_sparse(fm, fn, p, budgets, rng);
}

} // namespace cfiwb
