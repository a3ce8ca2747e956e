#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <effstab/errors.hpp>
#include <effstab/normal_form.hpp>

#include "test_support.hpp"

using namespace effstab;
using effstab::testing::max_coefficient_gap;
using effstab::testing::random_real_series;

namespace
{

constexpr double kPi = std::numbers::pi;

PeriodicVector pv(std::initializer_list<Rational> xs)
{
    return period_of(RationalVector(xs));
}

std::vector<int> ints(std::initializer_list<int> xs) { return std::vector<int>(xs); }

// omega = p / T with |p| <= 5 and T <= t_max.
PeriodicVector random_periodic(std::mt19937_64 &rng, int n, int t_max)
{
    std::uniform_int_distribution<int> pd(-5, 5), td(1, t_max);
    while (true) {
        RationalVector w;
        bool nonzero = false;
        const int T = td(rng);
        for (int i = 0; i < n; ++i) {
            const int p = pd(rng);
            nonzero = nonzero || p != 0;
            w.emplace_back(p, T);
        }
        if (nonzero) return period_of(w);
    }
}

// omega_2 = omega_1 + e / N for a random small e not parallel to omega_1.
ResonanceFrame random_close_frame(std::mt19937_64 &rng, int n)
{
    std::uniform_int_distribution<int> ed(-3, 3);
    while (true) {
        const PeriodicVector w1 = random_periodic(rng, n, 3);
        RationalVector w2 = w1.omega;
        for (auto &x : w2) x = x + Rational(ed(rng), 400);
        bool zero = true;
        for (const auto &x : w2) zero = zero && x == Rational(0);
        if (zero) continue;
        try {
            return ResonanceFrame::build(n, {w1, period_of(w2)});
        } catch (const DependenceError &) {
        }
    }
}

bool modes_satisfy(const Series &s, const PeriodicVector &w)
{
    const IntVector p = w.scaled();
    for (const auto &[idx, c] : s.terms()) {
        Int dot = 0;
        for (int i = 0; i < s.n(); ++i) dot += idx.k[static_cast<std::size_t>(i)] * p(i);
        if (dot != 0) return false;
    }
    return true;
}

// Keeps the modes of f with k . w = 0.
Series restrict_to(const Series &f, const PeriodicVector &w)
{
    Series out(f.domain(), f.center(), f.k_max(), f.d_max());
    const IntVector p = w.scaled();
    for (const auto &[idx, c] : f.terms()) {
        Int dot = 0;
        for (int i = 0; i < f.n(); ++i) dot += idx.k[static_cast<std::size_t>(i)] * p(i);
        if (dot == 0) out.set(idx, c);
    }
    return out;
}

// Time-one flow of chi by classical RK4: theta' = d chi/dI, I' = -d chi/dtheta.
void rk4_flow(const Series &chi, Eigen::VectorXd &theta, Eigen::VectorXd &action, int steps)
{
    const SeriesEvaluator ev(chi);
    const int n = chi.n();
    const double h = 1.0 / steps;
    auto rhs = [&](const Eigen::VectorXd &t, const Eigen::VectorXd &a, Eigen::VectorXd &dt, Eigen::VectorXd &da) {
        Eigen::VectorXd gt(n), ga(n);
        ev.value_and_gradient(t, a, gt, ga);
        dt = ga;
        da = -gt;
    };
    Eigen::VectorXd k1t, k1a, k2t, k2a, k3t, k3a, k4t, k4a;
    for (int s = 0; s < steps; ++s) {
        rhs(theta, action, k1t, k1a);
        rhs(theta + 0.5 * h * k1t, action + 0.5 * h * k1a, k2t, k2a);
        rhs(theta + 0.5 * h * k2t, action + 0.5 * h * k2a, k3t, k3a);
        rhs(theta + h * k3t, action + h * k3a, k4t, k4a);
        theta += h / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t);
        action += h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a);
    }
}

} // namespace

TEST_CASE("resonant average examples")
{
    const Domain d{2, 1.0};
    const Series c1 = Series::cosine(d, ints({1, 0}), 1.0, 2, 1);
    const Series c2 = Series::cosine(d, ints({0, 1}), 1.0, 2, 1);
    const Series c12 = Series::cosine(d, ints({1, 1}), 1.0, 2, 1);
    CHECK(resonant_average(c1, pv({1, 0})).empty());
    CHECK(max_coefficient_gap(resonant_average(c2, pv({1, 0})), c2) == 0.0);
    CHECK(max_coefficient_gap(resonant_average(c12, pv({1, -1})), c12) == 0.0);
}

TEST_CASE("homological examples")
{
    const Domain d{2, 1.0};
    const PeriodicVector w = pv({1, 0});
    const Series f = Series::cosine(d, ints({1, 0}), 1.0, 2, 1);
    const Series chi = homological_solve(f, w);
    // sin(2 pi theta_1) / (2 pi) = (e - conj e) / (4 pi i)
    CHECK(std::abs(chi.coeff(MultiIndex({1, 0}, {0, 0})) - Coefficient(0.0, -1.0 / (4 * kPi))) < 1e-15);
    CHECK(std::abs(chi.coeff(MultiIndex({-1, 0}, {0, 0})) - Coefficient(0.0, 1.0 / (4 * kPi))) < 1e-15);
    // d/dtheta_1 of sin(2 pi theta_1)/(2 pi) is cos(2 pi theta_1).
    const Series l = linear_hamiltonian(f, w.value());
    CHECK(max_coefficient_gap(poisson_bracket(chi, l), f) < 1e-15);

    CHECK(homological_solve(Series::cosine(d, ints({0, 1}), 1.0, 2, 1), w).empty());
    CHECK(homological_solve(Series(d, 2, 1), w).empty());
}

TEST_CASE("homological identity on random series")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 3;
        const int K = 1 + static_cast<int>(rng() % 8);
        const int D = static_cast<int>(rng() % 4);
        const Series f = random_real_series(rng, Domain{n, 1.0}, K, D, 12);
        const PeriodicVector w = random_periodic(rng, n, 20);
        const Series chi = homological_solve(f, w);
        const Series lhs = poisson_bracket(chi, linear_hamiltonian(f, w.value())) + resonant_average(f, w);
        double scale = 0.0;
        for (const auto &[idx, c] : f.terms()) scale = std::max(scale, std::abs(c));
        CHECK(max_coefficient_gap(lhs, f) <= 1e-12 * scale);
        // Every divided mode has |k . omega| >= 1/T.
        CHECK(chi.is_real(1e-12));
    }
}

TEST_CASE("resonant average is a commuting projection")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 2;
        const Series f = random_real_series(rng, Domain{n, 1.0}, 3, 2, 15);
        const PeriodicVector a = random_periodic(rng, n, 6), b = random_periodic(rng, n, 6);
        const Series once = resonant_average(f, a);
        CHECK(max_coefficient_gap(resonant_average(once, a), once) == 0.0);
        // Linear Hamiltonians always commute, so any pair qualifies.
        CHECK(max_coefficient_gap(resonant_average(resonant_average(f, a), b),
                                  resonant_average(resonant_average(f, b), a)) == 0.0);
    }
}

TEST_CASE("averaging preserves a commuting symmetry")
{
    std::mt19937_64 rng(13);
    NormalFormConfig cfg;
    cfg.m = 2;
    cfg.lie_order = 4;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 2;
        const PeriodicVector w1 = random_periodic(rng, n, 4), w2 = random_periodic(rng, n, 4);
        const Series f = restrict_to(random_real_series(rng, Domain{n, 1.0}, 3, 1, 30, 1e-4), w2);
        REQUIRE(modes_satisfy(f, w2));
        CHECK(modes_satisfy(homological_solve(f, w1), w2));
        CHECK(modes_satisfy(resonant_average(f, w1), w2));
        const AveragingResult r = periodic_averaging(f, w1, cfg);
        CHECK(modes_satisfy(r.g, w2));
        CHECK(modes_satisfy(r.remainder, w2));
        for (const auto &s : r.steps) CHECK(modes_satisfy(s.generator, w2));
    }
}

TEST_CASE("lie transform examples")
{
    std::mt19937_64 rng(14);
    const Domain d{2, 1.0};
    const Series H = random_real_series(rng, d, 2, 2, 10);
    CHECK(max_coefficient_gap(lie_transform(H, Series(d, 2, 2), 5), H) == 0.0);

    // l + {l, chi} = l - (f - [f]) at first order.
    const PeriodicVector w = pv({1, Rational(1, 2)});
    const Series f = random_real_series(rng, d, 2, 1, 10);
    const Series chi = homological_solve(f, w);
    const Series l = linear_hamiltonian(f, w.value());
    const Series expect = l - (f - resonant_average(f, w));
    CHECK(max_coefficient_gap(lie_transform(l, chi, 1), expect) < 1e-14);

    // Order one is linear in H.
    const Series H2 = random_real_series(rng, d, 2, 2, 10);
    const Series g = random_real_series(rng, d, 2, 2, 6, 0.1);
    const Series lin = lie_transform(H + H2, g, 1) - lie_transform(H, g, 1) - lie_transform(H2, g, 1);
    for (const auto &[idx, c] : lin.terms()) CHECK(std::abs(c) < 1e-13);
}

TEST_CASE("lie transform matches the flow")
{
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        const Domain d{2, 1.0};
        // A wide box so the truncated terms are the high-order ones only.
        Series H = random_real_series(rng, d, 2, 2, 8);
        H = H.with_bounds(12, 8);
        const Series chi = random_real_series(rng, d, 1, 1, 4, 1e-3).with_bounds(12, 8);
        const Series moved = lie_transform(H, chi, 6);
        for (int p = 0; p < 5; ++p) {
            Eigen::VectorXd theta = testing::random_point(rng, 2, 0.0, 1.0);
            Eigen::VectorXd action = testing::random_point(rng, 2, -0.5, 0.5);
            const double lie = evaluate(moved, theta, action);
            rk4_flow(chi, theta, action, 200);
            CHECK(std::abs(evaluate(H, theta, action) - lie) < 1e-11 * (1.0 + H.majorant_norm()));
        }
    }
}

TEST_CASE("transform displacement and inverse")
{
    std::mt19937_64 rng(16);
    const Domain d{2, 1.0};
    NearIdentityTransform phi;
    phi.lie_order = 8;
    phi.generators.push_back(random_real_series(rng, d, 1, 1, 3, 1e-3).with_bounds(10, 6));
    phi.generators.push_back(random_real_series(rng, d, 1, 1, 3, 1e-3).with_bounds(10, 6));
    const Series like(d, 10, 6);
    const auto da = phi.angle_displacement(like);
    const auto di = phi.action_displacement(like);
    for (int p = 0; p < 5; ++p) {
        Eigen::VectorXd theta = testing::random_point(rng, 2, 0.0, 1.0);
        Eigen::VectorXd action = testing::random_point(rng, 2, -0.5, 0.5);
        Eigen::VectorXd t = theta, a = action;
        // Phi = Phi_1 o Phi_2: the last generator moves the point first.
        rk4_flow(phi.generators[1], t, a, 100);
        rk4_flow(phi.generators[0], t, a, 100);
        for (int i = 0; i < 2; ++i) {
            CHECK(std::abs(theta(i) + evaluate(da[static_cast<std::size_t>(i)], theta, action) - t(i)) < 1e-12);
            CHECK(std::abs(action(i) + evaluate(di[static_cast<std::size_t>(i)], theta, action) - a(i)) < 1e-12);
        }
    }
    // F o Phi o Phi^{-1} = F to the truncation order.
    const Series F = random_real_series(rng, d, 2, 2, 6).with_bounds(10, 6);
    const Series back = phi.inverse().pullback(phi.pullback(F));
    CHECK(max_coefficient_gap(back, F) < 1e-12);
    CHECK(phi.inverse().inverse().generators.size() == 2);
}

TEST_CASE("periodic averaging examples")
{
    const Domain d{2, 1.0};
    NormalFormConfig cfg;
    cfg.m = 5;
    const PeriodicVector w = pv({1, 0});

    const Series res = Series::cosine(d, ints({0, 1}), 1e-3, 4, 2);
    const AveragingResult a = periodic_averaging(res, w, cfg);
    CHECK(max_coefficient_gap(a.g, res) == 0.0);
    CHECK(a.remainder.empty());
    CHECK(a.steps.empty());

    const AveragingResult z = periodic_averaging(Series(d, 4, 2), w, cfg);
    CHECK(z.g.empty());
    CHECK(z.remainder.empty());
    CHECK(z.transform.identity());

    // An action-dependent amplitude gives a genuine cascade of harmonics.
    Series f = Series::cosine(d, ints({1, 0}), 1e-3, 8, 4);
    f += product(Series::action(d, 0, 8, 4), Series::cosine(d, ints({1, 1}), 1e-3, 8, 4));
    const AveragingResult r = periodic_averaging(f, w, cfg);
    REQUIRE(r.steps.size() == 5);
    for (std::size_t i = 1; i < r.steps.size(); ++i) CHECK(r.steps[i].remainder_norm < r.steps[i - 1].remainder_norm);
    CHECK(r.steps[0].remainder_norm < 1e-4 * f.majorant_norm());
    for (const auto &s : r.steps) {
        // Generator invariant: {chi, l} = input - [input].
        CHECK(s.generator.is_real(1e-15));
    }
    CHECK(modes_satisfy(r.g, w));
    CHECK(r.small_T.holds());
}

TEST_CASE("averaging step invariant")
{
    std::mt19937_64 rng(17);
    NormalFormConfig cfg;
    cfg.m = 3;
    for (int trial = 0; trial < 20; ++trial) {
        const Domain d{2, 1.0};
        const PeriodicVector w = random_periodic(rng, 2, 4);
        const Series f = random_real_series(rng, d, 2, 1, 8, 1e-4).with_bounds(6, 3);
        const AveragingResult r = periodic_averaging(f, w, cfg);
        Series input = f;
        double scale = 0.0;
        for (const auto &[idx, c] : f.terms()) scale = std::max(scale, std::abs(c));
        for (const auto &s : r.steps) {
            const Series lhs = poisson_bracket(s.generator, linear_hamiltonian(f, w.value()));
            CHECK(max_coefficient_gap(lhs, s.input - s.resonant_part) <= 1e-12 * scale);
            // The recorded input is the transformed perturbation, up to the
            // rounding of the oracle's own l + F sum.
            CHECK(max_coefficient_gap(s.input, input) <= 1e-14);
            input = lie_transform(linear_hamiltonian(f, w.value()) + input, s.generator, cfg.lie_order) -
                    linear_hamiltonian(f, w.value());
        }
    }
}

TEST_CASE("periodic averaging reports divergence")
{
    const Domain d{2, 1.0};
    NormalFormConfig cfg;
    cfg.m = 6;
    // T = 50 and an O(1) action-dependent perturbation: T |f| >> 1.
    const PeriodicVector w = pv({1, Rational(1, 50)});
    Series f = product(Series::action(d, 0, 6, 3), Series::cosine(d, ints({1, 1}), 2.0, 6, 3));
    f += product(Series::action(d, 1, 6, 3), Series::cosine(d, ints({0, 1}), 2.0, 6, 3));
    CHECK_THROWS_AS(periodic_averaging(f, w, cfg), DivergenceError);
}

TEST_CASE("composed normal form examples")
{
    const Domain d{2, 1.0};
    NormalFormConfig cfg;
    cfg.m = 3;

    // j = 1 is periodic averaging.
    const PeriodicVector w = pv({1, Rational(1, 3)});
    Series f = Series::cosine(d, ints({1, 0}), 1e-4, 4, 2);
    f += product(Series::action(d, 1, 4, 2), Series::cosine(d, ints({1, -3}), 1e-4, 4, 2));
    const NormalFormResult one = composed_normal_form(f, ResonanceFrame::build(2, {w}), cfg);
    const AveragingResult avg = periodic_averaging(f, w, cfg);
    CHECK(max_coefficient_gap(one.g, avg.g) == 0.0);
    CHECK(max_coefficient_gap(one.remainder, avg.remainder) == 0.0);
    CHECK(one.transform.generators.size() == avg.transform.generators.size());
    CHECK(one.symmetry_checked);

    // Full frame: g_2 is integrable.
    const ResonanceFrame full = ResonanceFrame::build(2, {pv({1, 0}), pv({0, 1})});
    Series h = Series::cosine(d, ints({1, 0}), 1e-4, 4, 2);
    h += Series::cosine(d, ints({0, 1}), 1e-4, 4, 2);
    h += Series::cosine(d, ints({1, 1}), 1e-4, 4, 2);
    const NormalFormResult two = composed_normal_form(h, full, cfg);
    for (const auto &[idx, c] : two.g.terms()) CHECK(idx.angle_zero());
    CHECK(two.symmetry_checked);
    CHECK(two.steps.size() == 2);

    const NormalFormResult zero = composed_normal_form(Series(d, 4, 2), full, cfg);
    CHECK(zero.remainder.empty());
    CHECK(zero.transform.identity());
    for (const auto &[idx, c] : zero.g.terms()) CHECK(std::abs(c) < 1e-300);
}

TEST_CASE("composed normal form is frame resonant on random frames")
{
    std::mt19937_64 rng(18);
    NormalFormConfig cfg;
    cfg.m = 2;
    cfg.lie_order = 4;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 2;
        const ResonanceFrame frame = random_close_frame(rng, n);
        const int K = n == 2 ? 2 : 1;
        const Series f = random_real_series(rng, Domain{n, 1.0}, K, 1, 6, 1e-6);
        const NormalFormResult r = composed_normal_form(f, frame, cfg);
        CHECK(r.symmetry_checked);
        CHECK(verify_resonant_symmetry(r.g, frame));
        // H o Phi_j = l_j + g_j + f_j to the truncation order.
        const Series l = linear_hamiltonian(f, frame.vectors.back().value());
        const Series pulled = r.transform.pullback(l + f);
        CHECK(max_coefficient_gap(pulled, l + r.g + r.remainder) < 1e-12);
    }
}

TEST_CASE("localize and scale")
{
    const Domain d{2, 1.0};
    // Linear h with a periodic frequency: nothing survives.
    HamiltonianSystem lin{Series::linear(d, Eigen::Vector2d(1.0, 0.5), 0, 2), Series(d, 2, 2), 0.0, Gevrey{}};
    const ScaledHamiltonian s0 = localize_and_scale(lin, Eigen::Vector2d(0.1, 0.2), 0.01, pv({1, Rational(1, 2)}), 2.0);
    for (const auto &[idx, c] : s0.f_tilde.terms()) CHECK(std::abs(c) < 1e-12);

    // h = |I|^2 / 2 at (0.3, 0): f tilde = (c - omega) . J + mu |J|^2 / 2.
    HamiltonianSystem q{Series::quadratic(d, Eigen::Matrix2d::Identity(), 0, 2), Series(d, 2, 2), 0.0, Gevrey{}};
    const PeriodicVector w = dirichlet_approx(Eigen::Vector2d(0.3, 0.0), 10).omega;
    const double mu = 0.02;
    const ScaledHamiltonian s = localize_and_scale(q, Eigen::Vector2d(0.3, 0.0), mu, w, 2.0);
    const Eigen::VectorXd gap = Eigen::Vector2d(0.3, 0.0) - w.value();
    CHECK(std::abs(s.f_tilde.coeff(MultiIndex({0, 0}, {1, 0})).real() - gap(0)) < 1e-14);
    CHECK(std::abs(s.f_tilde.coeff(MultiIndex({0, 0}, {0, 1})).real() - gap(1)) < 1e-14);
    CHECK(std::abs(s.f_tilde.coeff(MultiIndex({0, 0}, {2, 0})).real() - mu / 2) < 1e-15);
    CHECK(std::abs(s.f_tilde.coeff(MultiIndex({0, 0}, {0, 2})).real() - mu / 2) < 1e-15);
    CHECK(s.f_tilde.domain().R == 6.0);

    CHECK_THROWS_AS(localize_and_scale(q, Eigen::Vector2d(0.3, 0.0), 0.2, w, 2.0), DomainError);
}

TEST_CASE("local normal form")
{
    const Domain d{2, 1.0};
    NormalFormConfig cfg;
    cfg.m = 3;
    const Series h = Series::quadratic(d, Eigen::Matrix2d::Identity(), 6, 2);

    // f = 0: no remainder, g from h's own Taylor block.
    const Eigen::Vector2d c(0.5, -0.5);
    const ResonanceFrame frame = ResonanceFrame::build(2, {pv({Rational(1, 2), Rational(-1, 2)})});
    HamiltonianSystem free{h, Series(d, 6, 2), 0.0, Gevrey{}};
    const NormalFormResult r0 = local_normal_form(free, c, frame, {0.01}, cfg);
    CHECK(r0.remainder.empty());
    CHECK(r0.transform.identity());
    CHECK(r0.theta_derivative_sup == 0.0);

    // Quasi-convex toy near the omega_1 = omega_2 resonance: the
    // remainder's angle derivative drops with m.
    HamiltonianSystem toy{h, Series::cosine(d, ints({1, 1}), 1.0, 6, 2), 1e-6, Gevrey{}};
    const Eigen::Vector2d c2(0.51, 0.49);
    const ResonanceFrame diag = ResonanceFrame::build(2, {pv({Rational(1, 2), Rational(1, 2)})});
    double previous = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= 4; ++m) {
        cfg.m = m;
        const NormalFormResult r = local_normal_form(toy, c2, diag, {0.02}, cfg);
        CHECK(r.theta_derivative_sup < previous);
        CHECK(verify_resonant_symmetry(r.g, diag));
        MESSAGE("m = " << m << ": sup |d_theta f_1| = " << r.theta_derivative_sup);
        previous = r.theta_derivative_sup;
    }
    CHECK(previous < 1e-3 * 1e-6);

    // epsilon >= mu^2 is rejected.
    CHECK_THROWS_AS(local_normal_form(toy, c2, diag, {1e-3}, cfg), ConfigError);

    // Full rank: g_2 integrable.
    cfg.m = 2;
    const ResonanceFrame full = ResonanceFrame::build(2, {pv({Rational(1, 2), Rational(1, 2)}), pv({Rational(1, 2), 0})});
    const NormalFormResult rf = local_normal_form(toy, Eigen::Vector2d(0.5, 0.01), full, {0.6, 0.02}, cfg);
    CHECK(rf.symmetry_checked);
    for (const auto &[idx, cc] : rf.g.terms()) CHECK(idx.angle_zero());
}

TEST_CASE("resonant symmetry examples")
{
    const Domain d{2, 1.0};
    const ResonanceFrame f1 = ResonanceFrame::build(2, {pv({1, -1})});
    CHECK(verify_resonant_symmetry(Series::quadratic(d, Eigen::Matrix2d::Identity(), 2, 2), f1));
    CHECK(verify_resonant_symmetry(Series::cosine(d, ints({1, 1}), 1.0, 2, 1), f1));
    CHECK_FALSE(
        verify_resonant_symmetry(Series::cosine(d, ints({1, 0}), 1.0, 2, 1), ResonanceFrame::build(2, {pv({1, 0})})));
}

TEST_CASE("time scales and radius ratio")
{
    CHECK(time_scale(Gevrey{1.0, 1.0}, 3) == doctest::Approx(std::exp(3.0)));
    CHECK(time_scale(Gevrey{2.0, 1.0}, 4) == doctest::Approx(std::exp(2.0)));
    CHECK(time_scale(FiniteDiff{5, 2}, 3) == 9.0);
    CHECK(NormalFormConfig::radius_ratio(2, 1.0) == 1.0 / 16.0);
    CHECK(NormalFormConfig::radius_ratio(2, 2.0) == doctest::Approx(0.5 / 16.0));
    NormalFormConfig bad;
    bad.m = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
