#include <doctest.h>

#include <cmath>
#include <numbers>

#include <effstab/errors.hpp>
#include <effstab/norms.hpp>

#include "test_support.hpp"

using namespace effstab;
using effstab::testing::random_real_series;

namespace
{
constexpr double kPi = std::numbers::pi;
const Domain kPlane{2, 1.0};
const std::vector<int> kE1{1, 0};
const GridSpec kSmall{16, 9};

// Independent oracle: sum_p (2 pi L)^p / p! for cos(2 pi theta_1) at alpha = 1.
double cosine_oracle(double L, int cap)
{
    double term = 1.0, sum = 1.0;
    for (int p = 1; p <= cap; ++p) {
        term *= 2 * kPi * L / p;
        sum += term;
    }
    return sum;
}
} // namespace

TEST_CASE("gevrey norm examples")
{
    CHECK(gevrey_norm(Series::constant(kPlane, -2.5), {1.0, 0.3}, 40, kSmall).value == doctest::Approx(2.5));
    CHECK(gevrey_norm(Series::action(kPlane, 0), {1.0, 0.5}, 5, kSmall).value == doctest::Approx(1.5));

    const Series c = Series::cosine(kPlane, kE1, 1.0, 1, 0);
    const NormCertificate cert = gevrey_norm(c, {1.0, 0.1}, 60);
    CHECK(cert.lower_bound);
    CHECK(cert.value == doctest::Approx(std::exp(0.2 * kPi)).epsilon(1e-10));
    CHECK(cert.value == doctest::Approx(cosine_oracle(0.1, 60)).epsilon(1e-12));
    CHECK(cert.csv_row().find("gevrey 1 0.10000000000000001,") == 0);
}

TEST_CASE("analytic sanity: cos(2 pi theta_1) at alpha = 1 matches exp(2 pi L)")
{
    for (double L : {0.05, 0.1, 0.15, 0.2}) {
        const double v = gevrey_norm(Series::cosine(kPlane, kE1, 1.0, 1, 0), {1.0, L}, 50).value;
        CHECK(std::abs(v - std::exp(2 * kPi * L)) < 1e-10 * std::exp(2 * kPi * L));
    }
}

TEST_CASE("C^k norm examples and monotonicity")
{
    CHECK(ck_norm(Series::constant(kPlane, 3.0), 4, kSmall).value == doctest::Approx(3.0));
    CHECK(ck_norm(Series::action(kPlane, 0), 1, kSmall).value == doctest::Approx(2.0));
    CHECK(ck_norm(Series::action(kPlane, 0), 0, kSmall).value == doctest::Approx(1.0));

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Series s = random_real_series(rng, kPlane, 2, 2, 5);
        double prev = 0.0;
        for (int k = 0; k <= 5; ++k) {
            const double v = ck_norm(s, k, kSmall).value;
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("gevrey norm is homogeneous and subadditive on the grid")
{
    std::mt19937_64 rng(5);
    const GevreyParams p{1.5, 0.2};
    for (int trial = 0; trial < 25; ++trial) {
        const Series f = random_real_series(rng, kPlane, 2, 2, 4);
        const Series g = random_real_series(rng, kPlane, 2, 2, 4);
        const double nf = gevrey_norm(f, p, 10, kSmall).value;
        const double ng = gevrey_norm(g, p, 10, kSmall).value;
        CHECK(gevrey_norm(-3.0 * f, p, 10, kSmall).value == doctest::Approx(3.0 * nf).epsilon(1e-12));
        CHECK(gevrey_norm(f + g, p, 10, kSmall).value <= (nf + ng) * (1 + 1e-12));
    }
}

TEST_CASE("algebra property up to the truncation loss")
{
    std::mt19937_64 rng(7);
    const GevreyParams p{1.0, 0.1};
    for (int trial = 0; trial < 20; ++trial) {
        const Series f = random_real_series(rng, kPlane, 2, 1, 3);
        const Series g = random_real_series(rng, kPlane, 2, 1, 3);
        const auto fg = product_detailed(f, g);
        const double lhs = gevrey_norm(fg.kept, p, 8, kSmall).value;
        const double rhs = gevrey_norm(f, p, 8, kSmall).value * gevrey_norm(g, p, 8, kSmall).value;
        const double loss = gevrey_norm(fg.dropped, p, 8, kSmall).value;
        CHECK(lhs <= (rhs + loss) * (1 + 1e-12));
    }
}

TEST_CASE("derivative bound")
{
    const GevreyParams p{1.0, 0.1};
    const auto zero = check_derivative_bound(Series::constant(kPlane, 2.0), p, 1, 10, kSmall);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.ratio == 0.0);

    const auto c = check_derivative_bound(Series::cosine(kPlane, kE1, 1.0, 1, 0), p, 1, 30, kSmall);
    // Oracle: lhs = 2 pi exp(pi L), rhs = exp(2 pi L).
    CHECK(c.lhs == doctest::Approx(2 * kPi * std::exp(kPi * 0.1)).epsilon(1e-9));
    CHECK(c.within);

    Series sq(kPlane, 0, 2);
    sq.add(MultiIndex({0, 0}, {2, 0}), 1.0);
    const auto q = check_derivative_bound(sq, p, 2, 10, kSmall);
    // d^2/dI_1^2 I_1^2 = 2 is the only second derivative.
    CHECK(q.lhs == doctest::Approx(2.0));
    CHECK(q.within);

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 15; ++trial) {
        const Series s = random_real_series(rng, kPlane, 2, 2, 4);
        for (int order = 1; order <= 3; ++order) CHECK(check_derivative_bound(s, {1.2, 0.3}, order, 8, kSmall).within);
    }
}

TEST_CASE("composition bound")
{
    const GevreyParams p{1.0, 0.1};
    const Domain d{2, 1.0};
    const Series zero(d, 0, 0);
    const NearIdentityMap identity{{zero, zero}, {zero, zero}};

    const Series c = Series::constant(d, 1.75);
    const auto rc = check_composition_bound(c, identity, p, 0.5, 0.8, {.order = 4, .cap = 10, .grid = kSmall});
    CHECK(rc.composed == doctest::Approx(1.75));
    CHECK(rc.original == doctest::Approx(1.75));
    CHECK(rc.holds);

    const Series f = Series::action(d, 0);
    const auto ri = check_composition_bound(f, identity, p, 0.5, 0.8, {.order = 4, .cap = 10, .grid = kSmall});
    CHECK(ri.holds);
    CHECK(ri.composed == doctest::Approx(0.8 + 0.05));

    const Series shift = Series::sine(d, kE1, 0.1, 1, 0);
    const NearIdentityMap push{{zero, zero}, {shift, zero}};
    const auto rs = check_composition_bound(f, push, p, 0.5, 0.8, {.order = 4, .cap = 20, .grid = kSmall});
    CHECK(rs.holds);
    // f o Phi = I_1 + 0.1 sin(2 pi theta_1) exactly.
    const Eigen::Vector2d th(0.2, 0.7), I(0.3, -0.1);
    CHECK(evaluate(rs.composition, th, I) == doctest::Approx(0.3 + 0.1 * std::sin(2 * kPi * 0.2)));

    const NearIdentityMap big{{zero, zero}, {Series::constant(d, 0.5), zero}};
    CHECK_THROWS_AS(compose(f, big, 0.8, {}), DomainError);
}

TEST_CASE("composition of a cosine along an angle shift")
{
    const Domain d{2, 1.0};
    const Series zero(d, 0, 0);
    const Series f = Series::cosine(d, kE1, 1.0, 1, 0);
    const NearIdentityMap shift{{Series::constant(d, 0.01), zero}, {zero, zero}};
    CompositionOptions opt{.order = 10, .cap = 20, .grid = kSmall};
    const Series g = compose(f, shift, 1.0, opt);
    const Eigen::Vector2d th(0.13, 0.4), I(0.0, 0.0);
    CHECK(evaluate(g, th, I) == doctest::Approx(std::cos(2 * kPi * 0.14)).epsilon(1e-10));
}

TEST_CASE("invalid parameters")
{
    CHECK_THROWS_AS(gevrey_norm(Series::constant(kPlane, 1), {0.5, 1.0}), ConfigError);
    CHECK_THROWS_AS(gevrey_norm(Series::constant(kPlane, 1), {1.0, 0.0}), ConfigError);
    CHECK_THROWS_AS(ck_norm(Series::constant(kPlane, 1), -1), ConfigError);
}
