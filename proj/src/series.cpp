#include <effstab/series.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include <effstab/errors.hpp>

namespace effstab
{

namespace
{

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::complex<double> kTwoPiI{0.0, kTwoPi};

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex &m) const noexcept
    {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](std::int16_t v) {
            h ^= static_cast<std::uint16_t>(v);
            h *= 1099511628211ULL;
        };
        for (auto v : m.k) mix(v);
        for (auto v : m.l) mix(v);
        return static_cast<std::size_t>(h);
    }
};

using Accumulator = std::unordered_map<MultiIndex, Coefficient, MultiIndexHash>;

void require_same_space(const Series &F, const Series &G, const char *what)
{
    if (!(F.domain() == G.domain()) || F.center().size() != G.center().size() || F.center() != G.center()) {
        throw DomainError(std::string(what) + ": operands live on different domains or centers");
    }
}

Truncation split(const Accumulator &acc, const Domain &d, const Eigen::VectorXd &center, int k_max, int d_max)
{
    Truncation out{Series(d, center, k_max, d_max), Series(d, center, k_max, d_max)};
    // Deterministic order: move into ordered maps before summing anything.
    std::map<MultiIndex, Coefficient> ordered(acc.begin(), acc.end());
    std::map<MultiIndex, Coefficient> dropped;
    for (const auto &[idx, c] : ordered) {
        if (c == Coefficient(0.0)) continue;
        if (out.kept.in_bounds(idx)) {
            out.kept.set(idx, c);
        } else {
            dropped.emplace(idx, c);
        }
    }
    // The dropped series keeps its terms even though they exceed the box.
    const int big_k = std::max(k_max, [&] {
        int m = 0;
        for (const auto &[idx, c] : dropped) m = std::max(m, idx.k_sup(d.n));
        return m;
    }());
    const int big_d = std::max(d_max, [&] {
        int m = 0;
        for (const auto &[idx, c] : dropped) m = std::max(m, idx.l_total(d.n));
        return m;
    }());
    out.dropped = Series(d, center, big_k, big_d);
    for (const auto &[idx, c] : dropped) out.dropped.set(idx, c);
    out.kept.set_truncation_loss(out.dropped.coefficient_norm());
    return out;
}

double binomial(int n, int k)
{
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

bool inside_ball(const Eigen::VectorXd &x, const Eigen::VectorXd &center, double R)
{
    return (x - center).lpNorm<Eigen::Infinity>() <= R * (1.0 + 1e-9) + 1e-15;
}

} // namespace

void Domain::validate() const
{
    if (n < 1 || n > kMaxDim) throw ConfigError("domain dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    if (!(R > 0.0) || !std::isfinite(R)) throw ConfigError("domain radius must be positive");
}

MultiIndex::MultiIndex(std::span<const int> angle, std::span<const int> action)
{
    if (angle.size() > kMaxDim || action.size() > kMaxDim) throw ConfigError("multi-index longer than kMaxDim");
    for (std::size_t i = 0; i < angle.size(); ++i) k[i] = static_cast<std::int16_t>(angle[i]);
    for (std::size_t i = 0; i < action.size(); ++i) {
        if (action[i] < 0) throw ConfigError("negative Taylor exponent");
        l[i] = static_cast<std::int16_t>(action[i]);
    }
}

MultiIndex::MultiIndex(std::initializer_list<int> angle, std::initializer_list<int> action)
    : MultiIndex(std::span<const int>(angle.begin(), angle.size()), std::span<const int>(action.begin(), action.size()))
{
}

int MultiIndex::k_sup(int n) const
{
    int m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(static_cast<int>(k[i])));
    return m;
}

int MultiIndex::l_total(int n) const
{
    int s = 0;
    for (int i = 0; i < n; ++i) s += l[i];
    return s;
}

bool MultiIndex::angle_zero() const
{
    return std::all_of(k.begin(), k.end(), [](auto v) { return v == 0; });
}

MultiIndex MultiIndex::negated_angle() const
{
    MultiIndex m = *this;
    for (auto &v : m.k) v = static_cast<std::int16_t>(-v);
    return m;
}

Series::Series(Domain domain, int k_max, int d_max) : Series(domain, Eigen::VectorXd::Zero(domain.n), k_max, d_max) {}

Series::Series(Domain domain, Eigen::VectorXd center, int k_max, int d_max)
    : domain_(domain), center_(std::move(center)), k_max_(k_max), d_max_(d_max)
{
    domain_.validate();
    if (center_.size() != domain_.n) throw ConfigError("series center has wrong dimension");
    if (k_max < 0 || d_max < 0) throw ConfigError("truncation orders must be nonnegative");
}

Series Series::constant(Domain d, double value, int k_max, int d_max)
{
    Series s(d, k_max, d_max);
    s.add(MultiIndex{}, value);
    return s;
}

Series Series::action(Domain d, int i, int k_max, int d_max)
{
    if (i < 0 || i >= d.n) throw ConfigError("action index out of range");
    Series s(d, k_max, std::max(d_max, 1));
    MultiIndex m;
    m.l[static_cast<std::size_t>(i)] = 1;
    s.add(m, 1.0);
    return s;
}

Series Series::cosine(Domain d, std::span<const int> k, double amplitude, int k_max, int d_max, double phase)
{
    if (static_cast<int>(k.size()) != d.n) throw ConfigError("mode vector has wrong dimension");
    Series s(d, k_max, d_max);
    MultiIndex m(k, {});
    if (m.angle_zero()) {
        s.add(m, amplitude * std::cos(phase));
        return s;
    }
    const Coefficient half = 0.5 * amplitude * std::polar(1.0, phase);
    s.add(m, half);
    s.add(m.negated_angle(), std::conj(half));
    return s;
}

Series Series::sine(Domain d, std::span<const int> k, double amplitude, int k_max, int d_max)
{
    return cosine(d, k, amplitude, k_max, d_max, -std::numbers::pi / 2.0);
}

Series Series::linear(Domain d, const Eigen::VectorXd &omega, int k_max, int d_max)
{
    if (omega.size() != d.n) throw ConfigError("frequency has wrong dimension");
    Series s(d, k_max, std::max(d_max, 1));
    for (int i = 0; i < d.n; ++i) {
        if (omega(i) == 0.0) continue;
        MultiIndex m;
        m.l[static_cast<std::size_t>(i)] = 1;
        s.add(m, omega(i));
    }
    return s;
}

Series Series::quadratic(Domain d, const Eigen::MatrixXd &Q, int k_max, int d_max)
{
    if (Q.rows() != d.n || Q.cols() != d.n) throw ConfigError("quadratic form has wrong shape");
    Series s(d, k_max, std::max(d_max, 2));
    for (int i = 0; i < d.n; ++i) {
        for (int j = i; j < d.n; ++j) {
            const double c = i == j ? 0.5 * Q(i, i) : 0.5 * (Q(i, j) + Q(j, i));
            if (c == 0.0) continue;
            MultiIndex m;
            m.l[static_cast<std::size_t>(i)] += 1;
            m.l[static_cast<std::size_t>(j)] += 1;
            s.add(m, c);
        }
    }
    return s;
}

Coefficient Series::coeff(const MultiIndex &idx) const
{
    const auto it = terms_.find(idx);
    return it == terms_.end() ? Coefficient(0.0) : it->second;
}

bool Series::in_bounds(const MultiIndex &idx) const
{
    for (int i = domain_.n; i < kMaxDim; ++i) {
        if (idx.k[static_cast<std::size_t>(i)] != 0 || idx.l[static_cast<std::size_t>(i)] != 0) return false;
    }
    for (int i = 0; i < domain_.n; ++i) {
        if (idx.l[static_cast<std::size_t>(i)] < 0) return false;
    }
    return idx.k_sup(domain_.n) <= k_max_ && idx.l_total(domain_.n) <= d_max_;
}

void Series::add(const MultiIndex &idx, Coefficient c)
{
    if (!in_bounds(idx)) throw ConfigError("multi-index outside the truncation box");
    if (c == Coefficient(0.0)) return;
    auto [it, inserted] = terms_.try_emplace(idx, c);
    if (!inserted) {
        it->second += c;
        if (it->second == Coefficient(0.0)) terms_.erase(it);
    }
}

void Series::set(const MultiIndex &idx, Coefficient c)
{
    if (!in_bounds(idx)) throw ConfigError("multi-index outside the truncation box");
    if (c == Coefficient(0.0)) {
        terms_.erase(idx);
    } else {
        terms_[idx] = c;
    }
}

double Series::reality_defect() const
{
    double worst = 0.0;
    for (const auto &[idx, c] : terms_) {
        worst = std::max(worst, std::abs(coeff(idx.negated_angle()) - std::conj(c)));
    }
    return worst;
}

bool Series::angle_independent() const
{
    return std::all_of(terms_.begin(), terms_.end(), [](const auto &t) { return t.first.angle_zero(); });
}

bool Series::action_independent() const
{
    return std::all_of(terms_.begin(), terms_.end(), [this](const auto &t) { return t.first.l_total(domain_.n) == 0; });
}

double Series::coefficient_norm() const
{
    double s = 0.0;
    for (const auto &[idx, c] : terms_) s += std::abs(c);
    return s;
}

double Series::majorant_norm() const
{
    double s = 0.0;
    for (const auto &[idx, c] : terms_) s += std::abs(c) * std::pow(domain_.R, idx.l_total(domain_.n));
    return s;
}

Series Series::with_bounds(int k_max, int d_max) const
{
    Series out(domain_, center_, k_max, d_max);
    double lost = truncation_loss_;
    for (const auto &[idx, c] : terms_) {
        if (out.in_bounds(idx)) {
            out.terms_.emplace(idx, c);
        } else {
            lost += std::abs(c);
        }
    }
    out.truncation_loss_ = lost;
    return out;
}

Series Series::with_domain(Domain d) const
{
    if (d.n != domain_.n) throw ConfigError("with_domain cannot change the dimension");
    Series out = *this;
    d.validate();
    out.domain_ = d;
    return out;
}

Series Series::operator-() const
{
    Series out = *this;
    for (auto &[idx, c] : out.terms_) c = -c;
    return out;
}

bool Series::compatible(const Series &o) const
{
    return domain_ == o.domain_ && center_ == o.center_ && k_max_ == o.k_max_ && d_max_ == o.d_max_;
}

Series &Series::operator+=(const Series &o)
{
    require_same_space(*this, o, "series addition");
    k_max_ = std::max(k_max_, o.k_max_);
    d_max_ = std::max(d_max_, o.d_max_);
    for (const auto &[idx, c] : o.terms_) add(idx, c);
    truncation_loss_ += o.truncation_loss_;
    return *this;
}

Series &Series::operator-=(const Series &o)
{
    require_same_space(*this, o, "series subtraction");
    k_max_ = std::max(k_max_, o.k_max_);
    d_max_ = std::max(d_max_, o.d_max_);
    for (const auto &[idx, c] : o.terms_) add(idx, -c);
    truncation_loss_ += o.truncation_loss_;
    return *this;
}

Series &Series::operator*=(double a)
{
    if (a == 0.0) {
        terms_.clear();
    } else {
        for (auto &[idx, c] : terms_) c *= a;
    }
    truncation_loss_ *= std::abs(a);
    return *this;
}

std::complex<double> evaluate_complex(const Series &s, const Eigen::VectorXd &theta, const Eigen::VectorXd &action)
{
    const int n = s.n();
    if (theta.size() != n || action.size() != n) throw ConfigError("evaluation point has wrong dimension");
    if (!inside_ball(action, s.center(), s.domain().R)) throw DomainError("action outside the series domain");
    std::complex<double> sum = 0.0;
    const Eigen::VectorXd x = action - s.center();
    for (const auto &[idx, c] : s.terms()) {
        double phase = 0.0;
        double mono = 1.0;
        for (int j = 0; j < n; ++j) {
            phase += idx.k[static_cast<std::size_t>(j)] * theta(j);
            mono *= std::pow(x(j), idx.l[static_cast<std::size_t>(j)]);
        }
        sum += c * mono * std::polar(1.0, kTwoPi * phase);
    }
    return sum;
}

double evaluate(const Series &s, const Eigen::VectorXd &theta, const Eigen::VectorXd &action)
{
    const auto z = evaluate_complex(s, theta, action);
    double scale = 1.0;
    const Eigen::VectorXd x = action - s.center();
    for (const auto &[idx, c] : s.terms()) {
        double mono = 1.0;
        for (int j = 0; j < s.n(); ++j) mono *= std::pow(std::abs(x(j)), idx.l[static_cast<std::size_t>(j)]);
        scale += std::abs(c) * mono;
    }
    if (std::abs(z.imag()) > 1e-12 * scale) {
        throw CorruptSeriesError("series evaluates to a complex value; reality invariant broken");
    }
    return z.real();
}

Series partial_derivative(const Series &s, Variable v)
{
    if (v.index < 0 || v.index >= s.n()) throw ConfigError("derivative index out of range");
    const auto j = static_cast<std::size_t>(v.index);
    Series out(s.domain(), s.center(), s.k_max(), s.d_max());
    for (const auto &[idx, c] : s.terms()) {
        if (v.kind == Variable::Kind::angle) {
            if (idx.k[j] == 0) continue;
            out.set(idx, c * kTwoPiI * static_cast<double>(idx.k[j]));
        } else {
            if (idx.l[j] == 0) continue;
            MultiIndex m = idx;
            m.l[j] = static_cast<std::int16_t>(m.l[j] - 1);
            out.set(m, c * static_cast<double>(idx.l[j]));
        }
    }
    return out;
}

Series partial_derivative(const Series &s, std::span<const int> angle_orders, std::span<const int> action_orders)
{
    const int n = s.n();
    if (static_cast<int>(angle_orders.size()) != n || static_cast<int>(action_orders.size()) != n) {
        throw ConfigError("derivative order vector has wrong dimension");
    }
    Series out(s.domain(), s.center(), s.k_max(), s.d_max());
    for (const auto &[idx, c] : s.terms()) {
        Coefficient v = c;
        MultiIndex m = idx;
        bool zero = false;
        for (int j = 0; j < n && !zero; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            const int p = angle_orders[jj];
            if (p > 0) {
                if (idx.k[jj] == 0) {
                    zero = true;
                    break;
                }
                v *= std::pow(kTwoPiI * static_cast<double>(idx.k[jj]), p);
            }
            const int q = action_orders[jj];
            if (q > idx.l[jj]) {
                zero = true;
                break;
            }
            for (int r = 0; r < q; ++r) v *= static_cast<double>(idx.l[jj] - r);
            m.l[jj] = static_cast<std::int16_t>(idx.l[jj] - q);
        }
        if (!zero) out.set(m, v);
    }
    return out;
}

Truncation truncate(const Series &s, int k_max, int d_max)
{
    if (k_max > s.k_max() || d_max > s.d_max()) throw ConfigError("truncate cannot enlarge the truncation box");
    Truncation out{Series(s.domain(), s.center(), k_max, d_max), Series(s.domain(), s.center(), s.k_max(), s.d_max())};
    for (const auto &[idx, c] : s.terms()) {
        if (out.kept.in_bounds(idx)) {
            out.kept.set(idx, c);
        } else {
            out.dropped.set(idx, c);
        }
    }
    out.kept.set_truncation_loss(s.truncation_loss() + out.dropped.coefficient_norm());
    return out;
}

Truncation product_detailed(const Series &F, const Series &G)
{
    require_same_space(F, G, "product");
    const int n = F.n();
    Accumulator acc;
    acc.reserve(F.size() * G.size() / 2 + 1);
    for (const auto &[a, ca] : F.terms()) {
        for (const auto &[b, cb] : G.terms()) {
            MultiIndex m;
            for (int j = 0; j < n; ++j) {
                const auto jj = static_cast<std::size_t>(j);
                m.k[jj] = static_cast<std::int16_t>(a.k[jj] + b.k[jj]);
                m.l[jj] = static_cast<std::int16_t>(a.l[jj] + b.l[jj]);
            }
            acc[m] += ca * cb;
        }
    }
    return split(acc, F.domain(), F.center(), std::max(F.k_max(), G.k_max()), std::max(F.d_max(), G.d_max()));
}

Series product(const Series &F, const Series &G)
{
    return product_detailed(F, G).kept;
}

Truncation poisson_bracket_detailed(const Series &F, const Series &G)
{
    require_same_space(F, G, "poisson bracket");
    const int n = F.n();
    Accumulator acc;
    acc.reserve(F.size() * G.size() + 1);
    for (const auto &[a, ca] : F.terms()) {
        for (const auto &[b, cb] : G.terms()) {
            const Coefficient base = kTwoPiI * ca * cb;
            for (int j = 0; j < n; ++j) {
                const auto jj = static_cast<std::size_t>(j);
                // theta_j-derivative of F times I_j-derivative of G, minus the swap;
                // both land on the same index (k_a + k_b, l_a + l_b - e_j).
                const int weight = a.k[jj] * b.l[jj] - a.l[jj] * b.k[jj];
                if (weight == 0) continue;
                MultiIndex m;
                for (int i = 0; i < n; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    m.k[ii] = static_cast<std::int16_t>(a.k[ii] + b.k[ii]);
                    m.l[ii] = static_cast<std::int16_t>(a.l[ii] + b.l[ii]);
                }
                m.l[jj] = static_cast<std::int16_t>(m.l[jj] - 1);
                acc[m] += base * static_cast<double>(weight);
            }
        }
    }
    return split(acc, F.domain(), F.center(), std::max(F.k_max(), G.k_max()), std::max(F.d_max(), G.d_max()));
}

Series poisson_bracket(const Series &F, const Series &G)
{
    return poisson_bracket_detailed(F, G).kept;
}

Series recenter(const Series &s, const Eigen::VectorXd &new_center, double new_R)
{
    const int n = s.n();
    if (new_center.size() != n) throw ConfigError("new center has wrong dimension");
    Series out(Domain{n, new_R}, new_center, s.k_max(), s.d_max());
    const Eigen::VectorXd delta = new_center - s.center();
    for (const auto &[idx, c] : s.terms()) {
        // Enumerate all a <= l componentwise.
        std::array<int, kMaxDim> a{};
        while (true) {
            Coefficient v = c;
            MultiIndex m = idx;
            for (int j = 0; j < n; ++j) {
                const auto jj = static_cast<std::size_t>(j);
                v *= binomial(idx.l[jj], a[jj]) * std::pow(delta(j), idx.l[jj] - a[jj]);
                m.l[jj] = static_cast<std::int16_t>(a[jj]);
            }
            out.add(m, v);
            int j = 0;
            for (; j < n; ++j) {
                const auto jj = static_cast<std::size_t>(j);
                if (a[jj] < idx.l[jj]) {
                    ++a[jj];
                    break;
                }
                a[jj] = 0;
            }
            if (j == n) break;
        }
    }
    out.set_truncation_loss(s.truncation_loss());
    return out;
}

Series rescale_actions(const Series &s, const Eigen::VectorXd &center, double mu, double new_R)
{
    if (!(mu > 0.0)) throw ConfigError("scaling factor must be positive");
    const Eigen::VectorXd corner_gap = (center - s.center()).cwiseAbs();
    if ((corner_gap.array() + mu * new_R).maxCoeff() > s.domain().R * (1.0 + 1e-12)) {
        throw DomainError("scaled ball leaves the series domain");
    }
    const Series shifted = recenter(s, center, mu * new_R);
    Series out(Domain{s.n(), new_R}, s.k_max(), s.d_max());
    for (const auto &[idx, c] : shifted.terms()) out.set(idx, c * std::pow(mu, idx.l_total(s.n())));
    out.set_truncation_loss(s.truncation_loss());
    return out;
}

Series unscale_actions(const Series &s, const Eigen::VectorXd &center, double mu, double new_R)
{
    if (!(mu > 0.0)) throw ConfigError("scaling factor must be positive");
    if (s.center().norm() != 0.0) throw ConfigError("unscale_actions expects a series centered at the origin");
    Series out(Domain{s.n(), new_R}, center, s.k_max(), s.d_max());
    for (const auto &[idx, c] : s.terms()) out.set(idx, c * std::pow(mu, -idx.l_total(s.n())));
    out.set_truncation_loss(s.truncation_loss());
    return out;
}

SeriesEvaluator::SeriesEvaluator(const Series &s)
    : n_(s.n()), k_max_(0), d_max_(0), center_(s.center())
{
    for (const auto &[idx, c] : s.terms()) {
        k_.push_back(idx.k);
        l_.push_back(idx.l);
        coeffs_.push_back(c);
        k_max_ = std::max(k_max_, idx.k_sup(n_));
        for (int j = 0; j < n_; ++j) d_max_ = std::max(d_max_, static_cast<int>(idx.l[static_cast<std::size_t>(j)]));
    }
    phase_table_.resize(static_cast<std::size_t>(n_ * (2 * k_max_ + 1)));
    power_table_.resize(static_cast<std::size_t>(n_ * (d_max_ + 1)));
}

void SeriesEvaluator::fill_tables(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const
{
    const int width = 2 * k_max_ + 1;
    for (int j = 0; j < n_; ++j) {
        const std::complex<double> e = std::polar(1.0, kTwoPi * theta(j));
        const std::complex<double> einv = std::conj(e);
        auto *row = &phase_table_[static_cast<std::size_t>(j * width + k_max_)];
        row[0] = 1.0;
        for (int k = 1; k <= k_max_; ++k) {
            row[k] = row[k - 1] * e;
            row[-k] = row[-k + 1] * einv;
        }
        const double x = action(j) - center_(j);
        auto *prow = &power_table_[static_cast<std::size_t>(j * (d_max_ + 1))];
        prow[0] = 1.0;
        for (int p = 1; p <= d_max_; ++p) prow[p] = prow[p - 1] * x;
    }
}

std::complex<double> SeriesEvaluator::value_complex(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const
{
    if (coeffs_.empty()) return 0.0;
    fill_tables(theta, action);
    const int width = 2 * k_max_ + 1;
    std::complex<double> sum = 0.0;
    for (std::size_t t = 0; t < coeffs_.size(); ++t) {
        std::complex<double> e = coeffs_[t];
        double mono = 1.0;
        for (int j = 0; j < n_; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (k_[t][jj] != 0) e *= phase_table_[static_cast<std::size_t>(j * width + k_max_ + k_[t][jj])];
            if (l_[t][jj] != 0) mono *= power_table_[static_cast<std::size_t>(j * (d_max_ + 1) + l_[t][jj])];
        }
        sum += e * mono;
    }
    return sum;
}

double SeriesEvaluator::value(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const
{
    return value_complex(theta, action).real();
}

double SeriesEvaluator::value_and_gradient(const Eigen::VectorXd &theta, const Eigen::VectorXd &action,
                                           Eigen::VectorXd &grad_theta, Eigen::VectorXd &grad_action) const
{
    grad_theta.setZero(n_);
    grad_action.setZero(n_);
    if (coeffs_.empty()) return 0.0;
    fill_tables(theta, action);
    const int width = 2 * k_max_ + 1;
    double value = 0.0;
    for (std::size_t t = 0; t < coeffs_.size(); ++t) {
        std::complex<double> e = coeffs_[t];
        for (int j = 0; j < n_; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (k_[t][jj] != 0) e *= phase_table_[static_cast<std::size_t>(j * width + k_max_ + k_[t][jj])];
        }
        double mono = 1.0;
        for (int j = 0; j < n_; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (l_[t][jj] != 0) mono *= power_table_[static_cast<std::size_t>(j * (d_max_ + 1) + l_[t][jj])];
        }
        const std::complex<double> v = e * mono;
        value += v.real();
        for (int j = 0; j < n_; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (k_[t][jj] != 0) grad_theta(j) += (kTwoPiI * static_cast<double>(k_[t][jj]) * v).real();
            if (l_[t][jj] != 0) {
                double partial = static_cast<double>(l_[t][jj]);
                for (int i = 0; i < n_; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    const int p = i == j ? l_[t][ii] - 1 : l_[t][ii];
                    if (p != 0) partial *= power_table_[static_cast<std::size_t>(i * (d_max_ + 1) + p)];
                }
                grad_action(j) += (e * partial).real();
            }
        }
    }
    return value;
}

void SeriesEvaluator::angle_gradient(const Eigen::VectorXd &theta, const Eigen::VectorXd &action,
                                     Eigen::VectorXd &grad_theta) const
{
    grad_theta.setZero(n_);
    if (coeffs_.empty()) return;
    fill_tables(theta, action);
    const int width = 2 * k_max_ + 1;
    for (std::size_t t = 0; t < coeffs_.size(); ++t) {
        std::complex<double> e = coeffs_[t];
        bool any = false;
        for (int j = 0; j < n_; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (k_[t][jj] != 0) {
                e *= phase_table_[static_cast<std::size_t>(j * width + k_max_ + k_[t][jj])];
                any = true;
            }
            if (l_[t][jj] != 0) e *= power_table_[static_cast<std::size_t>(j * (d_max_ + 1) + l_[t][jj])];
        }
        if (!any) continue;
        for (int j = 0; j < n_; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (k_[t][jj] != 0) grad_theta(j) += (kTwoPiI * static_cast<double>(k_[t][jj]) * e).real();
        }
    }
}

std::string regularity_tag(const Regularity &r)
{
    if (const auto *g = std::get_if<Gevrey>(&r)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "gevrey %.17g %.17g", g->alpha, g->L);
        return buf;
    }
    const auto &f = std::get<FiniteDiff>(r);
    return "finite " + std::to_string(f.k) + " " + std::to_string(f.k_star);
}

void HamiltonianSystem::validate() const
{
    if (integrable.n() != perturbation.n()) throw ConfigError("integrable and perturbation dimensions differ");
    if (!integrable.angle_independent()) throw ConfigError("integrable part depends on the angles");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be nonnegative");
    if (const auto *g = std::get_if<Gevrey>(&regularity)) {
        if (!(g->alpha >= 1.0) || !(g->L > 0.0)) throw ConfigError("Gevrey class needs alpha >= 1 and L > 0");
    } else {
        const auto &f = std::get<FiniteDiff>(regularity);
        if (f.k_star < 1 || f.k < n() + 1 || f.k < f.k_star * n() + 1) {
            throw ConfigError("finite regularity needs k >= k* n + 1 with k* >= 1");
        }
    }
}

double HamiltonianSystem::energy(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const
{
    return evaluate(integrable, theta, action) + epsilon * evaluate(perturbation, theta, action);
}

Eigen::VectorXd HamiltonianSystem::frequency(const Eigen::VectorXd &action) const
{
    Eigen::VectorXd gt, ga;
    SeriesEvaluator(integrable).value_and_gradient(Eigen::VectorXd::Zero(n()), action, gt, ga);
    return ga;
}

} // namespace effstab
