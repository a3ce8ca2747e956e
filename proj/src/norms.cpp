#include <effstab/norms.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <effstab/errors.hpp>
#include <effstab/series_io.hpp>

namespace effstab
{

namespace
{

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Terms whose a-priori bound falls below this fraction of the running sum
// cannot change the double result.
constexpr double kNegligible = 1e-17;

struct Order {
    std::vector<int> angle;
    std::vector<int> action;
    int total = 0;
};

// All derivative orders with total <= cap that do not annihilate s.
std::vector<Order> live_orders(const Series &s, int cap)
{
    const int n = s.n();
    std::vector<int> max_order(static_cast<std::size_t>(2 * n), 0);
    for (const auto &[idx, c] : s.terms()) {
        for (int j = 0; j < n; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (idx.k[jj] != 0) max_order[jj] = cap;
            max_order[jj + static_cast<std::size_t>(n)] =
                std::max(max_order[jj + static_cast<std::size_t>(n)], static_cast<int>(idx.l[jj]));
        }
    }
    std::vector<Order> out;
    std::vector<int> cur(static_cast<std::size_t>(2 * n), 0);
    auto rec = [&](auto &&self, int var, int used) -> void {
        if (var == 2 * n) {
            Order o;
            o.angle.assign(cur.begin(), cur.begin() + n);
            o.action.assign(cur.begin() + n, cur.end());
            o.total = used;
            out.push_back(std::move(o));
            return;
        }
        const int top = std::min(max_order[static_cast<std::size_t>(var)], cap - used);
        for (int e = 0; e <= top; ++e) {
            cur[static_cast<std::size_t>(var)] = e;
            self(self, var + 1, used + e);
        }
        cur[static_cast<std::size_t>(var)] = 0;
    };
    rec(rec, 0, 0);
    std::stable_sort(out.begin(), out.end(), [](const Order &a, const Order &b) { return a.total < b.total; });
    return out;
}

double log_factorial_product(const Order &o)
{
    double acc = 0.0;
    for (int e : o.angle) acc += std::lgamma(e + 1.0);
    for (int e : o.action) acc += std::lgamma(e + 1.0);
    return acc;
}

// Weighted sum over live derivative orders; weight(order) returns the
// multiplier of sup |d^l s|.
template <class Weight>
double weighted_derivative_sum(const Series &s, int cap, const GridSpec &grid, Weight weight)
{
    double sum = 0.0;
    for (const Order &o : live_orders(s, cap)) {
        const double w = weight(o);
        if (w == 0.0) continue;
        const Series d = partial_derivative(s, o.angle, o.action);
        if (d.empty()) continue;
        if (sum > 0.0 && w * d.majorant_norm() < kNegligible * sum) continue;
        sum += w * grid_sup(d, grid);
    }
    return sum;
}

} // namespace

void GevreyParams::validate() const
{
    if (!(alpha >= 1.0)) throw ConfigError("Gevrey alpha must be >= 1");
    if (!(L > 0.0)) throw ConfigError("Gevrey L must be > 0");
}

void GridSpec::validate() const
{
    if (angle_points < 1 || action_points < 1) throw ConfigError("grid sizes must be positive");
}

std::string GridSpec::str() const
{
    return std::to_string(angle_points) + "x" + std::to_string(action_points);
}

std::string NormCertificate::csv_header() { return "norm_kind,value,cap,grid_spec"; }

std::string NormCertificate::csv_row() const
{
    return kind + "," + format_real(value) + "," + std::to_string(cap) + "," + grid.str();
}

double grid_sup(const Series &s, const GridSpec &grid)
{
    grid.validate();
    if (s.empty()) return 0.0;
    const int n = s.n();
    const double R = s.domain().R;
    const int K = s.k_max();
    const int A = s.angle_independent() ? 1 : grid.angle_points;
    const int M = s.action_independent() ? 1 : grid.action_points;

    // Group the terms by Fourier mode.
    std::vector<MultiIndex> modes;
    std::vector<std::vector<std::pair<MultiIndex, Coefficient>>> by_mode;
    for (const auto &[idx, c] : s.terms()) {
        MultiIndex key;
        key.k = idx.k;
        if (modes.empty() || modes.back().k != key.k) {
            modes.push_back(key);
            by_mode.emplace_back();
        }
        by_mode.back().emplace_back(idx, c);
    }

    // phase[k + K][a] = exp(2 pi i k a / A)
    std::vector<std::vector<Coefficient>> phase(static_cast<std::size_t>(2 * K + 1),
                                                std::vector<Coefficient>(static_cast<std::size_t>(A)));
    for (int k = -K; k <= K; ++k)
        for (int a = 0; a < A; ++a)
            phase[static_cast<std::size_t>(k + K)][static_cast<std::size_t>(a)] =
                std::polar(1.0, kTwoPi * static_cast<double>(k) * a / A);

    std::vector<double> offsets(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) offsets[static_cast<std::size_t>(m)] = M == 1 ? 0.0 : R * (-1.0 + 2.0 * m / (M - 1));

    std::size_t n_action = 1, n_angle = 1;
    for (int j = 0; j < n; ++j) {
        n_action *= static_cast<std::size_t>(M);
        n_angle *= static_cast<std::size_t>(A);
    }

    // E[ig * modes + q] = exp(2 pi i k_q . theta_ig)
    std::vector<Coefficient> E(n_angle * modes.size());
    std::vector<int> mi(static_cast<std::size_t>(n)), ai(static_cast<std::size_t>(n));
    for (std::size_t ig = 0; ig < n_angle; ++ig) {
        std::size_t r2 = ig;
        for (int j = 0; j < n; ++j) {
            ai[static_cast<std::size_t>(j)] = static_cast<int>(r2 % static_cast<std::size_t>(A));
            r2 /= static_cast<std::size_t>(A);
        }
        for (std::size_t q = 0; q < modes.size(); ++q) {
            Coefficient z = 1.0;
            for (int j = 0; j < n; ++j) {
                const int k = modes[q].k[static_cast<std::size_t>(j)];
                if (k != 0) z *= phase[static_cast<std::size_t>(k + K)][static_cast<std::size_t>(ai[static_cast<std::size_t>(j)])];
            }
            E[ig * modes.size() + q] = z;
        }
    }

    double best = 0.0;
    std::vector<Coefficient> P(modes.size());
    for (std::size_t ia = 0; ia < n_action; ++ia) {
        std::size_t rest = ia;
        for (int j = 0; j < n; ++j) {
            mi[static_cast<std::size_t>(j)] = static_cast<int>(rest % static_cast<std::size_t>(M));
            rest /= static_cast<std::size_t>(M);
        }
        for (std::size_t q = 0; q < modes.size(); ++q) {
            Coefficient acc = 0.0;
            for (const auto &[idx, c] : by_mode[q]) {
                double mono = 1.0;
                for (int j = 0; j < n; ++j) {
                    const double x = offsets[static_cast<std::size_t>(mi[static_cast<std::size_t>(j)])];
                    for (int e = 0; e < idx.l[static_cast<std::size_t>(j)]; ++e) mono *= x;
                }
                acc += c * mono;
            }
            P[q] = acc;
        }
        const Coefficient *row = E.data();
        for (std::size_t ig = 0; ig < n_angle; ++ig, row += modes.size()) {
            double value = 0.0;
            for (std::size_t q = 0; q < modes.size(); ++q)
                value += P[q].real() * row[q].real() - P[q].imag() * row[q].imag();
            best = std::max(best, std::abs(value));
        }
    }
    return best;
}

NormCertificate gevrey_norm(const Series &s, const GevreyParams &p, int deriv_order_cap, const GridSpec &grid)
{
    p.validate();
    if (deriv_order_cap < 0) throw ConfigError("derivative order cap must be >= 0");
    const double logL = std::log(p.L);
    const double value = weighted_derivative_sum(s, deriv_order_cap, grid, [&](const Order &o) {
        return std::exp(p.alpha * (o.total * logL - log_factorial_product(o)));
    });
    std::ostringstream kind;
    kind << "gevrey " << format_real(p.alpha) << ' ' << format_real(p.L);
    return {kind.str(), value, true, deriv_order_cap, grid};
}

NormCertificate ck_norm(const Series &s, int k, const GridSpec &grid)
{
    if (k < 0) throw ConfigError("C^k order must be >= 0");
    const double value =
        weighted_derivative_sum(s, k, grid, [](const Order &o) { return std::exp(-log_factorial_product(o)); });
    return {"ck " + std::to_string(k), value, true, k, grid};
}

double derivative_bound_factor(int p, const GevreyParams &params, int n)
{
    // #{l in N^{2n} : |l| = p} = C(p + 2n - 1, 2n - 1)
    double count = 1.0;
    for (int i = 1; i <= 2 * n - 1; ++i) count *= static_cast<double>(p + i) / i;
    double peak = 0.0;
    for (int N = std::max(p, 1); N <= 64 * (p + 1); ++N)
        peak = std::max(peak, p * std::log(static_cast<double>(N)) - (N - p) * std::log(2.0));
    return std::exp(params.alpha * (peak - p * std::log(params.L))) * count;
}

DerivativeBoundReport check_derivative_bound(const Series &s, const GevreyParams &params, int p, int cap,
                                             const GridSpec &grid)
{
    params.validate();
    if (p < 0) throw ConfigError("derivative order must be >= 0");
    DerivativeBoundReport r;
    r.p = p;
    const GevreyParams half{params.alpha, params.L / 2};
    for (const Order &o : live_orders(s, p)) {
        if (o.total != p) continue;
        const Series d = partial_derivative(s, o.angle, o.action);
        if (!d.empty()) r.lhs += gevrey_norm(d, half, cap, grid).value;
    }
    r.rhs = gevrey_norm(s, params, cap + p, grid).value;
    r.ratio = r.lhs == 0.0 ? 0.0 : r.lhs / r.rhs;
    r.bound = constants::kDerivativeBound * derivative_bound_factor(p, params, s.n());
    r.within = r.ratio <= r.bound * (1.0 + 1e-12);
    return r;
}

Series compose(const Series &f, const NearIdentityMap &phi, double rho_prime, const CompositionOptions &opt,
               Series *dropped)
{
    const int n = f.n();
    if (static_cast<int>(phi.angle_shift.size()) != n || static_cast<int>(phi.action_shift.size()) != n)
        throw ConfigError("near-identity map needs n angle and n action components");
    if (!(rho_prime > 0.0) || rho_prime > f.domain().R) throw ConfigError("rho' must lie in (0, R]");

    int K = f.k_max(), D = f.d_max();
    std::vector<const Series *> shifts;
    for (const auto &s : phi.angle_shift) shifts.push_back(&s);
    for (const auto &s : phi.action_shift) shifts.push_back(&s);
    for (const Series *s : shifts) {
        if (s->domain() != f.domain() || s->center() != f.center())
            throw ConfigError("map components must live on the domain of f");
        K = std::max(K, s->k_max());
        D = std::max(D, s->d_max());
    }
    // Wide enough that only the Taylor order truncates by default.
    K = opt.k_max >= 0 ? opt.k_max : K * (opt.order + 1);
    D = opt.d_max >= 0 ? opt.d_max : D * (opt.order + 1);

    // Phi(B(rho')) must stay inside B(R).
    const Domain small{n, rho_prime};
    for (const auto &s : phi.action_shift)
        if (rho_prime + s.with_domain(small).majorant_norm() > f.domain().R * (1.0 + 1e-12))
            throw DomainError("near-identity map leaves the domain of f");

    Series out(f.domain(), f.center(), K, D);
    Series lost(f.domain(), f.center(), K, D);
    std::vector<int> orders(static_cast<std::size_t>(2 * n), 0);
    const Series one = Series::constant(f.domain(), 1.0).with_bounds(K, D);

    auto rec = [&](auto &&self, int var, int used, const Series &factor) -> void {
        if (var == 2 * n) {
            const Series d = partial_derivative(f, std::span<const int>(orders.data(), static_cast<std::size_t>(n)),
                                                std::span<const int>(orders.data() + n, static_cast<std::size_t>(n)));
            if (d.empty()) return;
            auto t = product_detailed(d.with_bounds(std::max(K, d.k_max()), std::max(D, d.d_max())), factor);
            auto fit = truncate(t.kept, K, D);
            out += fit.kept;
            lost += t.dropped;
            lost += fit.dropped;
            return;
        }
        const Series &shift = *shifts[static_cast<std::size_t>(var)];
        Series cur = factor;
        for (int e = 0; e + used <= opt.order; ++e) {
            orders[static_cast<std::size_t>(var)] = e;
            self(self, var + 1, used + e, cur);
            if (shift.empty()) break;
            auto t = product_detailed(cur, shift.with_bounds(K, D));
            cur = t.kept * (1.0 / (e + 1));
            lost += t.dropped * (1.0 / (e + 1));
        }
        orders[static_cast<std::size_t>(var)] = 0;
    };
    rec(rec, 0, 0, one);
    if (dropped) *dropped = lost.with_domain(small);
    return out.with_domain(small);
}

CompositionReport check_composition_bound(const Series &f, const NearIdentityMap &phi, const GevreyParams &p, double C,
                                          double rho_prime, const CompositionOptions &opt)
{
    p.validate();
    if (!(C > 0.0)) throw ConfigError("composition constant C must be > 0");
    CompositionReport r;
    Series lost;
    r.composition = compose(f, phi, rho_prime, opt, &lost);
    const GevreyParams shrunk{p.alpha, C * p.L};
    r.composed = gevrey_norm(r.composition, shrunk, opt.cap, opt.grid).value;
    r.original = gevrey_norm(f, p, opt.cap, opt.grid).value;
    r.tolerance = gevrey_norm(lost, shrunk, opt.cap, opt.grid).value + constants::kCompositionSlack * r.original;
    r.holds = r.composed <= r.original + r.tolerance;
    return r;
}

} // namespace effstab
