#include <doctest.h>

#include <cmath>
#include <numbers>

#include <effstab/dynamics.hpp>
#include <effstab/errors.hpp>

using namespace effstab;

namespace
{

constexpr double kPi = std::numbers::pi;

std::vector<int> ints(std::initializer_list<int> xs) { return std::vector<int>(xs); }

HamiltonianSystem pendulum(double eps)
{
    const Domain d{1, 2.0};
    Eigen::MatrixXd Q(1, 1);
    Q << 1.0;
    return {Series::quadratic(d, Q, 1, 2), Series::cosine(d, ints({1}), 1.0, 1, 2), eps, Gevrey{}};
}

Eigen::VectorXd v1(double x)
{
    Eigen::VectorXd v(1);
    v << x;
    return v;
}

// Linear drift: theta_1 is frozen, so I_1' = -2 pi eps cos(2 pi theta_1(0)).
HamiltonianSystem forced(double eps)
{
    const Domain d{2, 1.0};
    return {Series::linear(d, Eigen::Vector2d(0.0, 1.0), 1, 1), Series::sine(d, ints({1, 0}), 1.0, 1, 1), eps,
            Gevrey{}};
}

} // namespace

TEST_CASE("integrable flows are exact")
{
    const Domain d{2, 1.0};
    HamiltonianSystem H{Series::quadratic(d, Eigen::Matrix2d::Identity(), 0, 2), Series(d, 0, 2), 0.0, Gevrey{}};
    IntegratorConfig cfg;
    cfg.step = 0.01;
    cfg.stride = 10;
    const TrajectoryRecord r = integrate(H, Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.3, 0.4), 5.0, cfg);
    CHECK(r.scheme == Scheme::leapfrog);
    CHECK(r.size() == 51);
    for (std::size_t s = 0; s < r.size(); ++s) {
        CHECK((r.action[s] - Eigen::Vector2d(0.3, 0.4)).norm() == 0.0);
        for (int i = 0; i < 2; ++i) {
            const double expect = std::fmod(0.1 * (i + 1) + r.times[s] * (0.3 + 0.1 * i), 1.0);
            double gap = std::abs(r.theta[s](i) - expect);
            gap = std::min(gap, 1.0 - gap);
            CHECK(gap < 1e-12);
        }
    }

    HamiltonianSystem L{Series::linear(d, Eigen::Vector2d(1.0, std::sqrt(2.0)), 0, 1), Series(d, 0, 1), 0.0,
                        Gevrey{}};
    const TrajectoryRecord q = integrate(L, Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.0, 0.0), 3.0, cfg);
    for (std::size_t s = 0; s < q.size(); ++s) {
        const double e1 = std::fmod(0.5 + q.times[s], 1.0), e2 = std::fmod(q.times[s] * std::sqrt(2.0), 1.0);
        double g1 = std::abs(q.theta[s](0) - e1), g2 = std::abs(q.theta[s](1) - e2);
        CHECK(std::min(g1, 1.0 - g1) < 1e-12);
        CHECK(std::min(g2, 1.0 - g2) < 1e-12);
    }
}

TEST_CASE("pendulum matches energy conservation and a fine reference")
{
    const HamiltonianSystem H = pendulum(1e-2);
    IntegratorConfig cfg;
    cfg.step = 1e-3;
    cfg.stride = 10;
    const TrajectoryRecord r = integrate(H, v1(0.1), v1(0.3), 10.0, cfg);
    const double E = H.energy(v1(0.1), v1(0.3));
    IntegratorConfig fine = cfg;
    fine.step = 1e-5;
    fine.stride = 1000;
    const TrajectoryRecord ref = integrate(H, v1(0.1), v1(0.3), 10.0, fine);
    REQUIRE(ref.size() == r.size());
    for (std::size_t s = 0; s < r.size(); ++s) {
        // Rotating branch: I = sqrt(2 (E - eps cos(2 pi theta))).
        const double oracle = std::sqrt(2.0 * (E - 1e-2 * std::cos(2 * kPi * r.theta[s](0))));
        CHECK(std::abs(r.action[s](0) - oracle) < 1e-4);
        CHECK(std::abs(r.action[s](0) - ref.action[s](0)) < 1e-4);
    }
}

TEST_CASE("symplectic health")
{
    const HamiltonianSystem H = pendulum(1e-2);
    IntegratorConfig cfg;
    cfg.step = 1e-3;
    cfg.stride = 1000;
    const TrajectoryRecord r = integrate(H, v1(0.1), v1(0.3), 100.0, cfg);
    CHECK(r.times.back() == doctest::Approx(100.0));
    CHECK(r.max_energy_deviation < 1e-6);
    CHECK_FALSE(r.energy_flag);
    CHECK(reversibility_error(H, v1(0.1), v1(0.3), 100.0, cfg) < 1e-8);

    // The implicit midpoint rule on a non-separable system.
    const Domain d{2, 1.0};
    Series f = product(Series::action(d, 0, 1, 2), Series::cosine(d, ints({1, -1}), 1.0, 1, 2));
    HamiltonianSystem ns{Series::quadratic(d, Eigen::Matrix2d::Identity(), 1, 2), f, 1e-3, Gevrey{}};
    IntegratorConfig mid;
    mid.step = 1e-2;
    mid.stride = 100;
    const TrajectoryRecord m = integrate(ns, Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.3, 0.2), 50.0, mid);
    CHECK(m.scheme == Scheme::implicit_midpoint);
    CHECK(m.max_energy_deviation < 1e-6);
    CHECK(reversibility_error(ns, Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.3, 0.2), 20.0, mid) < 1e-10);
    mid.scheme = Scheme::leapfrog;
    CHECK_THROWS_AS(integrate(ns, Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.3, 0.2), 1.0, mid), ConfigError);
}

TEST_CASE("escape times")
{
    const Domain d{2, 1.0};
    HamiltonianSystem H{Series::quadratic(d, Eigen::Matrix2d::Identity(), 0, 2), Series(d, 0, 2), 0.0, Gevrey{}};
    IntegratorConfig cfg;
    cfg.step = 0.01;
    const TrajectoryRecord r = integrate(H, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.3, 0.4), 2.0, cfg);
    CHECK(escape_time(r, Eigen::Vector2d(0.3, 0.4), 1e-9) == kNever);
    CHECK(escape_time(r, Eigen::Vector2d(0.3, 0.4), 0.0) == 0.0);
    CHECK_THROWS_AS(escape_time(r, Eigen::Vector2d(0.0, 0.0), 0.1), DomainError);

    const double eps = 1e-2;
    const TrajectoryRecord f = integrate(forced(eps), Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.0, 0.0), 5.0, cfg);
    const double rate = 2 * kPi * eps;
    const double t = escape_time(f, Eigen::Vector2d(0.0, 0.0), 0.1);
    CHECK(std::abs(t - 0.1 / rate) <= cfg.step);
    CHECK(t >= 0.1 / rate - 1e-12);
}

TEST_CASE("transverse drift")
{
    const Domain d{2, 1.0};
    // omega = (1,0) and g = cos(2 pi theta_2): I_1 never moves.
    HamiltonianSystem H{Series::linear(d, Eigen::Vector2d(1.0, 0.0), 1, 1), Series::cosine(d, ints({0, 1}), 1.0, 1, 1),
                        1e-2, Gevrey{}};
    const ResonanceFrame frame = ResonanceFrame::build(2, {period_of({Rational(1), Rational(0)})});
    IntegratorConfig cfg;
    cfg.step = 0.01;
    cfg.stride = 10;
    const TrajectoryRecord r = integrate(H, Eigen::Vector2d(0.0, 0.3), Eigen::Vector2d(0.0, 0.0), 10.0, cfg);
    REQUIRE_FALSE(r.escaped);
    CHECK(transverse_drift(r, frame, 0.0).max == 0.0);
    CHECK(transverse_drift(r, frame, 5.0).per_sample.size() == 51);

    // Full frame: the transverse drift is the total drift.
    const ResonanceFrame full =
        ResonanceFrame::build(2, {period_of({Rational(1), Rational(0)}), period_of({Rational(0), Rational(1)})});
    const TransverseDrift all = transverse_drift(r, full, 0.0);
    double total = 0.0;
    for (const auto &a : r.action) total = std::max(total, (a - r.action.front()).cwiseAbs().maxCoeff());
    CHECK(all.max == doctest::Approx(total).epsilon(1e-12));
    CHECK(total > 1e-3);
    CHECK_THROWS_AS(transverse_drift(r, frame, 30.0), ConfigError);

    // Leaving the ball stops the run.
    CHECK(integrate(H, Eigen::Vector2d(0.0, 0.3), Eigen::Vector2d(0.0, 0.0), 40.0, cfg).escaped);

    // Integrable: nothing moves.
    HamiltonianSystem free{Series::quadratic(d, Eigen::Matrix2d::Identity(), 0, 2), Series(d, 0, 2), 0.0, Gevrey{}};
    const TrajectoryRecord q = integrate(free, Eigen::Vector2d(0.0, 0.3), Eigen::Vector2d(0.2, 0.1), 5.0, cfg);
    CHECK(transverse_drift(q, full, 0.0).max == 0.0);
}

TEST_CASE("drift times")
{
    IntegratorConfig cfg;
    cfg.step = 1e-3;
    const Domain d{2, 1.0};
    HamiltonianSystem free{Series::quadratic(d, Eigen::Matrix2d::Identity(), 0, 2), Series(d, 0, 2), 0.0, Gevrey{}};
    CHECK_FALSE(drift_time(free, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.1, 0.1), 1e-6, 10.0, cfg).crossed());

    // Pendulum: a threshold below the oscillation is crossed when the fine
    // reference crosses it.
    const HamiltonianSystem H = pendulum(1e-2);
    const DriftResult hit = drift_time(H, v1(0.1), v1(0.3), 0.02, 20.0, cfg);
    REQUIRE(hit.crossed());
    IntegratorConfig fine = cfg;
    fine.step = 1e-5;
    const DriftResult ref = drift_time(H, v1(0.1), v1(0.3), 0.02, 20.0, fine);
    CHECK(std::abs(hit.time - ref.time) <= 2 * cfg.step);

    // Energy confinement: I stays between sqrt(2(E -+ eps)).
    const double E = H.energy(v1(0.1), v1(0.3));
    const double bound = std::max(std::sqrt(2 * (E + 1e-2)) - 0.3, 0.3 - std::sqrt(2 * (E - 1e-2)));
    const DriftResult miss = drift_time(H, v1(0.1), v1(0.3), bound * 1.01, 20.0, cfg);
    CHECK_FALSE(miss.crossed());
    CHECK(miss.max_displacement <= bound * 1.001);
    CHECK_THROWS_AS(drift_time(H, v1(0.1), v1(0.3), 0.0, 1.0, cfg), ConfigError);
}

TEST_CASE("time budgets and records")
{
    CHECK(TimeBudget::make(Gevrey{1.0, 1.0}, 4).tau_m == doctest::Approx(std::exp(4.0)));
    CHECK(TimeBudget::make(FiniteDiff{9, 3}, 5).tau_m == 125.0);
    CHECK(TimeBudget::make(Gevrey{1.0, 1.0}, 40, 1e4).tau_m == 1e4);
    TimeBudget bad = TimeBudget::make(FiniteDiff{9, 3}, 5);
    bad.tau_m = 200.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    const HamiltonianSystem H = pendulum(1e-2);
    IntegratorConfig cfg;
    cfg.step = 0.5;
    const TrajectoryRecord r = integrate(H, v1(0.1), v1(0.3), 1.0, cfg);
    const std::string csv = r.csv();
    CHECK(csv.rfind("t,theta_1,I_1,H,config_hash\n", 0) == 0);
    CHECK(csv.find(cfg.hash()) != std::string::npos);
    CHECK(cfg.hash().size() == 16);
    CHECK(parse_scheme("midpoint") == Scheme::implicit_midpoint);
    CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
    cfg.step = 0.0;
    CHECK_THROWS_AS(integrate(H, v1(0.1), v1(0.3), 1.0, cfg), ConfigError);
    cfg.step = 0.1;
    CHECK_THROWS_AS(integrate(H, v1(0.1), v1(3.0), 1.0, cfg), DomainError);
}
