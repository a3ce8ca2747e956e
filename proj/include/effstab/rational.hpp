#ifndef EFFSTAB_RATIONAL_HPP
#define EFFSTAB_RATIONAL_HPP

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace effstab
{

using Int = std::int64_t;

// Checked 64-bit helpers. All throw OverflowError on overflow.
Int checked_add(Int a, Int b);
Int checked_sub(Int a, Int b);
Int checked_mul(Int a, Int b);
Int gcd(Int a, Int b);
Int lcm(Int a, Int b);

/// Exact rational number with a 64-bit numerator and a positive 64-bit
/// denominator, always kept in lowest terms. Intermediate products go
/// through 128-bit integers; a result that does not fit throws OverflowError.
class Rational
{
public:
    constexpr Rational() = default;
    Rational(Int num); // NOLINT(google-explicit-constructor)
    Rational(Int num, Int den);

    // Accepts "3", "-2/5", "0.25", "1e-3", "2.5E2". Decimal input is
    // converted exactly (0.1 -> 1/10).
    static Rational parse(std::string_view text);

    Int num() const { return num_; }
    Int den() const { return den_; }
    bool is_integer() const { return den_ == 1; }
    bool is_zero() const { return num_ == 0; }
    int sign() const { return (num_ > 0) - (num_ < 0); }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string str() const;

    Rational operator-() const;
    Rational &operator+=(const Rational &o);
    Rational &operator-=(const Rational &o);
    Rational &operator*=(const Rational &o);
    Rational &operator/=(const Rational &o);

    friend Rational operator+(Rational a, const Rational &b) { return a += b; }
    friend Rational operator-(Rational a, const Rational &b) { return a -= b; }
    friend Rational operator*(Rational a, const Rational &b) { return a *= b; }
    friend Rational operator/(Rational a, const Rational &b) { return a /= b; }

    friend bool operator==(const Rational &a, const Rational &b) = default;
    friend std::strong_ordering operator<=>(const Rational &a, const Rational &b);

private:
    Int num_ = 0;
    Int den_ = 1;
};

Rational abs(const Rational &r);
Rational pow(const Rational &base, int exponent);
std::ostream &operator<<(std::ostream &os, const Rational &r);

using RationalVector = std::vector<Rational>;
using IntVector = Eigen::Matrix<Int, Eigen::Dynamic, 1>;
using IntMatrix = Eigen::Matrix<Int, Eigen::Dynamic, Eigen::Dynamic>;

Eigen::VectorXd to_double(const RationalVector &v);
Rational dot(const IntVector &k, const RationalVector &w);
// Comma separated list of rationals, e.g. "1,1/3".
RationalVector parse_rational_vector(std::string_view text);
std::string format_rational_vector(const RationalVector &v);

} // namespace effstab

#endif
