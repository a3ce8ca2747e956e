#include <effstab/lattice.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <effstab/errors.hpp>

namespace effstab
{

namespace
{

Int floor_div(Int a, Int b)
{
    Int q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

void row_axpy(IntMatrix &M, Eigen::Index dst, Int q, Eigen::Index src)
{
    if (q == 0) return;
    for (Eigen::Index c = 0; c < M.cols(); ++c) M(dst, c) = checked_sub(M(dst, c), checked_mul(q, M(src, c)));
}

// Unimodular row reduction of the first `pivot_cols` columns to echelon
// form. Returns the rank. Entries above the pivots are reduced when
// `reduce_above` is set (Hermite form).
int echelon(IntMatrix &M, Eigen::Index pivot_cols, bool reduce_above)
{
    Eigen::Index r = 0;
    for (Eigen::Index c = 0; c < pivot_cols && r < M.rows(); ++c) {
        while (true) {
            Eigen::Index best = -1;
            for (Eigen::Index i = r; i < M.rows(); ++i)
                if (M(i, c) != 0 && (best < 0 || std::abs(M(i, c)) < std::abs(M(best, c)))) best = i;
            if (best < 0) break;
            M.row(r).swap(M.row(best));
            bool clean = true;
            for (Eigen::Index i = r + 1; i < M.rows(); ++i) {
                if (M(i, c) == 0) continue;
                row_axpy(M, i, floor_div(M(i, c), M(r, c)), r);
                if (M(i, c) != 0) clean = false;
            }
            if (clean) break;
        }
        if (r >= M.rows() || M(r, c) == 0) continue;
        if (M(r, c) < 0) M.row(r) = -M.row(r);
        if (reduce_above)
            for (Eigen::Index i = 0; i < r; ++i) row_axpy(M, i, floor_div(M(i, c), M(r, c)), r);
        ++r;
    }
    return static_cast<int>(r);
}

IntMatrix to_rows(const std::vector<IntVector> &v, int n)
{
    IntMatrix M(static_cast<Eigen::Index>(v.size()), n);
    for (std::size_t i = 0; i < v.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    return M;
}

std::optional<PeriodicVector> try_period(const IntVector &p, const Rational &T)
{
    RationalVector w;
    for (Eigen::Index i = 0; i < p.size(); ++i) w.emplace_back(Rational(p(i)) / T);
    try {
        return period_of(w);
    } catch (const Error &) {
        return std::nullopt;
    }
}

// Simplest rational (least denominator, then least numerator) in [a, b],
// 0 < a <= b.
std::optional<Rational> simplest_in(double a, double b, int depth = 0)
{
    if (depth > 40 || !(a <= b)) return std::nullopt;
    const double k = std::ceil(a);
    if (k <= b) {
        if (k > 4e18) return std::nullopt;
        return Rational(static_cast<Int>(k));
    }
    const double fl = std::floor(a);
    auto inner = simplest_in(1.0 / (b - fl), 1.0 / (a - fl), depth + 1);
    if (!inner) return std::nullopt;
    try {
        return Rational(static_cast<Int>(fl)) + Rational(1) / *inner;
    } catch (const OverflowError &) {
        return std::nullopt;
    }
}

bool lex_less(const IntVector &a, const IntVector &b)
{
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

void enumerate_l1_ball(int n, int L, const std::function<void(const IntVector &)> &visit)
{
    IntVector k = IntVector::Zero(n);
    auto rec = [&](auto &&self, int i, int budget) -> void {
        if (i == n) {
            visit(k);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            k(i) = v;
            self(self, i + 1, budget - std::abs(v));
        }
        k(i) = 0;
    };
    rec(rec, 0, L);
}

std::vector<Int> flatten(const IntMatrix &M)
{
    std::vector<Int> out;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) out.push_back(M(i, j));
    return out;
}

} // namespace

IntVector PeriodicVector::scaled() const
{
    IntVector out(n());
    for (int i = 0; i < n(); ++i) {
        const Rational x = period * omega[static_cast<std::size_t>(i)];
        if (!x.is_integer()) throw InconsistencyError("period does not clear the denominators");
        out(i) = x.num();
    }
    return out;
}

void PeriodicVector::validate() const
{
    if (omega.empty()) throw ConfigError("empty frequency vector");
    if (period.sign() <= 0) throw InconsistencyError("period must be positive");
    const IntVector p = scaled();
    Int g = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) g = gcd(g, p(i));
    if (g == 0) throw DomainError("zero frequency vector has no period");
    if (g != 1) throw InconsistencyError("period is not minimal");
}

PeriodicVector period_of(const RationalVector &v)
{
    if (v.empty()) throw DomainError("empty frequency vector");
    Int D = 1;
    for (const auto &x : v) D = lcm(D, x.den());
    Int g = 0;
    for (const auto &x : v) g = gcd(g, checked_mul(x.num(), D / x.den()));
    if (g == 0) throw DomainError("zero vector has no period");
    PeriodicVector out{v, Rational(D, g)};
    out.validate();
    return out;
}

DirichletResult dirichlet_approx(const Eigen::VectorXd &v, double Q, long search_cap)
{
    const int n = static_cast<int>(v.size());
    if (n < 2) throw ConfigError("Dirichlet approximation needs n >= 2");
    if (!(Q > 1.0) || !std::isfinite(Q)) throw ConfigError("Dirichlet approximation needs Q > 1");
    if (!v.allFinite()) throw ConfigError("non-finite vector");
    const double vs = v.lpNorm<Eigen::Infinity>();
    if (vs == 0.0) throw DomainError("cannot approximate the zero vector");
    const double delta = std::pow(Q, -1.0 / (n - 1));
    constexpr double kSlack = 1e-12;

    std::optional<DirichletResult> best;
    auto consider = [&](const IntVector &p, const Rational &T) {
        const auto pv = try_period(p, T);
        if (!pv) return;
        DirichletResult r;
        r.omega = *pv;
        const Eigen::VectorXd w = pv->value();
        r.error = (v - w).lpNorm<Eigen::Infinity>();
        const double Tp = pv->period.to_double();
        r.error_bound = delta / Tp;
        r.lower = 1.0 / vs;
        r.upper = Q / vs;
        if (r.error > r.error_bound * (1 + kSlack) || Tp < r.lower * (1 - kSlack) || Tp > r.upper * (1 + kSlack)) return;
        if (best) {
            if (best->omega.period < pv->period) return;
            if (best->omega.period == pv->period && !lex_less(pv->scaled(), best->omega.scaled())) return;
        }
        best = r;
    };

    // Integer periods first.
    const long t_lo = std::max(1L, static_cast<long>(std::ceil(1.0 / vs - kSlack)));
    long t_hi = static_cast<long>(std::floor(Q / vs * (1 + kSlack)));
    if (search_cap > 0) t_hi = std::min(t_hi, t_lo + search_cap - 1);
    for (long T = t_lo; T <= t_hi; ++T) {
        std::vector<std::vector<Int>> choices(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const double x = static_cast<double>(T) * v(i);
            auto &c = choices[static_cast<std::size_t>(i)];
            c.push_back(static_cast<Int>(std::floor(x)));
            if (std::ceil(x) != std::floor(x)) c.push_back(static_cast<Int>(std::ceil(x)));
        }
        IntVector p(n);
        auto rec = [&](auto &&self, int i) -> void {
            if (i == n) {
                consider(p, Rational(static_cast<Int>(T)));
                return;
            }
            for (Int c : choices[static_cast<std::size_t>(i)]) {
                p(i) = c;
                self(self, i + 1);
            }
        };
        rec(rec, 0);
    }
    if (best) return *best;

    // Rational periods: numerator q of the largest component, then the
    // admissible interval of T from every component.
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const Int sgn = v(imax) > 0 ? 1 : -1;
    long q_hi = static_cast<long>(std::floor(Q + delta));
    if (search_cap > 0) q_hi = std::min(q_hi, search_cap);
    for (long q = 1; q <= q_hi; ++q) {
        const double a0 = std::max((q - delta) / vs, 1.0 / vs);
        const double b0 = std::min((q + delta) / vs, Q / vs);
        if (a0 > b0) continue;
        IntVector p(n);
        p(imax) = sgn * q;
        auto rec = [&](auto &&self, int j, double a, double b) -> void {
            if (j == n) {
                const double pad = (b - a) * 1e-9;
                if (auto T = simplest_in(a + pad, b - pad)) consider(p, *T);
                return;
            }
            if (j == imax) {
                self(self, j + 1, a, b);
                return;
            }
            if (v(j) == 0.0) {
                p(j) = 0;
                self(self, j + 1, a, b);
                return;
            }
            const double lo = std::min(a * v(j), b * v(j)) - delta, hi = std::max(a * v(j), b * v(j)) + delta;
            for (Int pj = static_cast<Int>(std::ceil(lo)); pj <= static_cast<Int>(std::floor(hi)); ++pj) {
                double x = (pj - delta) / v(j), y = (pj + delta) / v(j);
                if (x > y) std::swap(x, y);
                const double na = std::max(a, x), nb = std::min(b, y);
                if (na > nb) continue;
                p(j) = pj;
                self(self, j + 1, na, nb);
            }
        };
        rec(rec, 0, a0, b0);
    }
    if (best) return *best;
    throw ConfigError("Dirichlet search exhausted its cap without a candidate");
}

IntMatrix hermite_normal_form(const IntMatrix &rows)
{
    IntMatrix M = rows;
    const int r = echelon(M, M.cols(), true);
    return M.topRows(r);
}

IntMatrix integer_kernel(const IntMatrix &A)
{
    const Eigen::Index n = A.cols(), j = A.rows();
    IntMatrix M(n, j + n);
    M.leftCols(j) = A.transpose();
    M.rightCols(n) = IntMatrix::Identity(n, n);
    const int r = echelon(M, j, false);
    const IntMatrix K = M.bottomRightCorner(n - r, n);
    return hermite_normal_form(K);
}

IntMatrix saturate(const IntMatrix &rows)
{
    const Eigen::Index n = rows.cols();
    if (rows.rows() == 0) return IntMatrix(0, n);
    const IntMatrix K = integer_kernel(rows);
    if (K.rows() == 0) return IntMatrix::Identity(n, n);
    return integer_kernel(K);
}

int rational_rank(const std::vector<RationalVector> &rows)
{
    if (rows.empty()) return 0;
    std::vector<RationalVector> M = rows;
    const std::size_t cols = M.front().size();
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols && r < M.size(); ++c) {
        std::size_t piv = r;
        while (piv < M.size() && M[piv][c].is_zero()) ++piv;
        if (piv == M.size()) continue;
        std::swap(M[r], M[piv]);
        for (std::size_t i = r + 1; i < M.size(); ++i) {
            if (M[i][c].is_zero()) continue;
            const Rational f = M[i][c] / M[r][c];
            for (std::size_t k = c; k < cols; ++k) M[i][k] -= f * M[r][k];
        }
        ++r;
    }
    return static_cast<int>(r);
}

int rational_rank(const IntMatrix &rows)
{
    IntMatrix M = rows;
    return echelon(M, M.cols(), false);
}

IntMatrix resonance_module(const std::vector<PeriodicVector> &vectors, int n)
{
    std::vector<RationalVector> rows;
    std::vector<IntVector> scaled;
    for (const auto &w : vectors) {
        if (w.n() != n) throw ConfigError("frame vector has the wrong dimension");
        w.validate();
        rows.push_back(w.omega);
        scaled.push_back(w.scaled());
    }
    if (rational_rank(rows) != static_cast<int>(vectors.size()))
        throw DependenceError("frame vectors are linearly dependent");
    if (vectors.empty()) return IntMatrix::Identity(n, n);
    return integer_kernel(to_rows(scaled, n));
}

ResonanceFrame ResonanceFrame::build(int n, std::vector<PeriodicVector> vectors)
{
    if (n < 1) throw ConfigError("dimension must be positive");
    ResonanceFrame f;
    f.n = n;
    f.module_basis = resonance_module(vectors, n);
    f.vectors = std::move(vectors);
    f.lambda_basis = orthonormal_span(f.module_basis, n);
    f.l_index = 1;
    if (!f.vectors.empty()) {
        f.l_index = 0;
        for (const auto &w : f.vectors) f.l_index = std::max(f.l_index, w.scaled().cwiseAbs().maxCoeff());
    }
    return f;
}

ResonanceFrame ResonanceFrame::prefix(int i) const
{
    if (i < 0 || i > j()) throw ConfigError("frame prefix out of range");
    return build(n, std::vector<PeriodicVector>(vectors.begin(), vectors.begin() + i));
}

Eigen::MatrixXd orthonormal_span(const IntMatrix &rows, int n)
{
    Eigen::MatrixXd E(n, rows.rows());
    Eigen::Index cols = 0;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Eigen::VectorXd x = rows.row(r).transpose().cast<double>();
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index c = 0; c < cols; ++c) x -= E.col(c).dot(x) * E.col(c);
        const double nx = x.norm();
        if (nx < 1e-12) throw DependenceError("rows do not span independently");
        E.col(cols++) = x / nx;
    }
    return E.leftCols(cols);
}

Projections projections(const ResonanceFrame &frame)
{
    const Eigen::MatrixXd &E = frame.lambda_basis;
    Projections p;
    p.pi = E * E.transpose();
    if (E.cols() == 0) p.pi = Eigen::MatrixXd::Zero(frame.n, frame.n);
    p.pi_perp = Eigen::MatrixXd::Identity(frame.n, frame.n) - p.pi;
    return p;
}

void RationalSubspace::validate() const
{
    if (n < 1) throw ConfigError("subspace dimension must be positive");
    if (normals.rows() > 0 && normals.cols() != n) throw ConfigError("normals have the wrong length");
    if (rational_rank(normals) != normals.rows()) throw DependenceError("subspace normals are dependent");
}

std::string RationalSubspace::str() const
{
    if (normals.rows() == 0) return "R^" + std::to_string(n);
    std::ostringstream os;
    os << "perp{";
    for (Eigen::Index i = 0; i < normals.rows(); ++i) {
        if (i) os << ", ";
        os << '(';
        for (Eigen::Index j = 0; j < normals.cols(); ++j) os << (j ? ", " : "") << normals(i, j);
        os << ')';
    }
    os << '}';
    return os.str();
}

bool subspace_in_GL(const RationalSubspace &s, int L)
{
    if (L < 1) throw ConfigError("L must be >= 1");
    s.validate();
    const int c = static_cast<int>(s.normals.rows());
    if (c == 0) return true;
    std::vector<IntVector> inside;
    enumerate_l1_ball(s.n, L, [&](const IntVector &k) {
        if (k.isZero()) return;
        IntMatrix M(c + 1, s.n);
        M.topRows(c) = s.normals;
        M.row(c) = k.transpose();
        if (rational_rank(M) == c) inside.push_back(k);
    });
    if (static_cast<int>(inside.size()) < c) return false;
    return rational_rank(to_rows(inside, s.n)) == c;
}

std::vector<LeveledSubspace> enumerate_subspaces(int n, int L_max)
{
    if (n < 1 || L_max < 1) throw ConfigError("need n >= 1 and L_max >= 1");
    // Primitive vectors up to sign (first nonzero entry positive).
    std::vector<IntVector> prim;
    enumerate_l1_ball(n, L_max, [&](const IntVector &k) {
        Int g = 0;
        for (Eigen::Index i = 0; i < k.size(); ++i) g = gcd(g, k(i));
        if (g != 1) return;
        Eigen::Index first = 0;
        while (k(first) == 0) ++first;
        if (k(first) > 0) prim.push_back(k);
    });
    std::stable_sort(prim.begin(), prim.end(), [](const IntVector &a, const IntVector &b) {
        const Int la = a.cwiseAbs().sum(), lb = b.cwiseAbs().sum();
        if (la != lb) return la < lb;
        return lex_less(a, b);
    });

    std::vector<LeveledSubspace> out;
    out.push_back({RationalSubspace{n, IntMatrix(0, n)}, 1});
    for (int c = 1; c < n; ++c) {
        std::map<std::vector<Int>, std::pair<IntMatrix, int>> found;
        std::vector<std::size_t> pick;
        auto rec = [&](auto &&self, std::size_t start) -> void {
            if (static_cast<int>(pick.size()) == c) {
                std::vector<IntVector> rows;
                Int level = 0;
                for (std::size_t i : pick) {
                    rows.push_back(prim[i]);
                    level = std::max(level, prim[i].cwiseAbs().sum());
                }
                const IntMatrix M = to_rows(rows, n);
                if (rational_rank(M) != c) return;
                const IntMatrix key = saturate(M);
                auto [it, fresh] = found.try_emplace(flatten(key), key, static_cast<int>(level));
                if (!fresh) it->second.second = std::min(it->second.second, static_cast<int>(level));
                return;
            }
            for (std::size_t i = start; i < prim.size(); ++i) {
                pick.push_back(i);
                self(self, i + 1);
                pick.pop_back();
            }
        };
        rec(rec, 0);
        std::vector<LeveledSubspace> layer;
        for (auto &[key, val] : found) layer.push_back({RationalSubspace{n, val.first}, val.second});
        std::stable_sort(layer.begin(), layer.end(),
                         [](const LeveledSubspace &a, const LeveledSubspace &b) { return a.level < b.level; });
        // Lower dimension first: more normals.
        out.insert(out.begin(), layer.begin(), layer.end());
    }
    return out;
}

} // namespace effstab
