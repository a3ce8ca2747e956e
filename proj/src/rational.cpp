#include <effstab/rational.hpp>

#include <cctype>
#include <limits>
#include <ostream>
#include <sstream>

#include <effstab/errors.hpp>

namespace effstab
{

namespace
{

using Wide = __int128;

Int narrow(Wide v)
{
    if (v > std::numeric_limits<Int>::max() || v < std::numeric_limits<Int>::min()) {
        throw OverflowError("rational arithmetic overflow");
    }
    return static_cast<Int>(v);
}

Wide wide_gcd(Wide a, Wide b)
{
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        Wide t = a % b;
        a = b;
        b = t;
    }
    return a;
}

Rational make_reduced(Wide num, Wide den)
{
    if (den == 0) throw std::domain_error("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const Wide g = wide_gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return Rational(narrow(num), narrow(den));
}

} // namespace

Int checked_add(Int a, Int b)
{
    Int r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("integer overflow in addition");
    return r;
}

Int checked_sub(Int a, Int b)
{
    Int r;
    if (__builtin_sub_overflow(a, b, &r)) throw OverflowError("integer overflow in subtraction");
    return r;
}

Int checked_mul(Int a, Int b)
{
    Int r;
    if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("integer overflow in multiplication");
    return r;
}

Int gcd(Int a, Int b)
{
    return narrow(wide_gcd(a, b));
}

Int lcm(Int a, Int b)
{
    if (a == 0 || b == 0) return 0;
    const Int g = gcd(a, b);
    return checked_mul(a / g < 0 ? -(a / g) : a / g, b < 0 ? -b : b);
}

Rational::Rational(Int num) : num_(num), den_(1) {}

Rational::Rational(Int num, Int den)
{
    if (den == 0) throw std::domain_error("rational with zero denominator");
    Wide n = num, d = den;
    if (d < 0) {
        n = -n;
        d = -d;
    }
    const Wide g = wide_gcd(n, d);
    if (g > 1) {
        n /= g;
        d /= g;
    }
    num_ = narrow(n);
    den_ = narrow(d);
}

Rational Rational::parse(std::string_view text)
{
    auto fail = [&]() { return ConfigError("cannot parse rational '" + std::string(text) + "'"); };
    std::string s;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    }
    if (s.empty()) throw fail();
    if (const auto slash = s.find('/'); slash != std::string::npos) {
        const Rational a = parse(s.substr(0, slash));
        const Rational b = parse(s.substr(slash + 1));
        if (b.is_zero()) throw fail();
        return a / b;
    }
    std::size_t pos = 0;
    bool negative = false;
    if (s[pos] == '+' || s[pos] == '-') negative = s[pos++] == '-';
    Wide mantissa = 0;
    int scale = 0;
    bool any_digit = false, seen_point = false;
    for (; pos < s.size(); ++pos) {
        const char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            mantissa = mantissa * 10 + (c - '0');
            if (mantissa > std::numeric_limits<Int>::max()) throw OverflowError("rational literal too long");
            if (seen_point) --scale;
            any_digit = true;
        } else if (c == '.' && !seen_point) {
            seen_point = true;
        } else {
            break;
        }
    }
    if (!any_digit) throw fail();
    if (pos < s.size()) {
        if (s[pos] != 'e' && s[pos] != 'E') throw fail();
        ++pos;
        int exp_sign = 1;
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) exp_sign = s[pos++] == '-' ? -1 : 1;
        int e = 0;
        bool any = false;
        for (; pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])); ++pos) {
            e = e * 10 + (s[pos] - '0');
            if (e > 40) throw OverflowError("rational literal exponent too large");
            any = true;
        }
        if (!any || pos != s.size()) throw fail();
        scale += exp_sign * e;
    }
    Wide num = negative ? -mantissa : mantissa;
    Wide den = 1;
    for (; scale > 0; --scale) num *= 10;
    for (; scale < 0; ++scale) den *= 10;
    return make_reduced(num, den);
}

std::string Rational::str() const
{
    std::ostringstream os;
    os << *this;
    return os.str();
}

Rational Rational::operator-() const
{
    return Rational(checked_sub(0, num_), den_);
}

Rational &Rational::operator+=(const Rational &o)
{
    *this = make_reduced(Wide(num_) * o.den_ + Wide(o.num_) * den_, Wide(den_) * o.den_);
    return *this;
}

Rational &Rational::operator-=(const Rational &o)
{
    *this = make_reduced(Wide(num_) * o.den_ - Wide(o.num_) * den_, Wide(den_) * o.den_);
    return *this;
}

Rational &Rational::operator*=(const Rational &o)
{
    *this = make_reduced(Wide(num_) * o.num_, Wide(den_) * o.den_);
    return *this;
}

Rational &Rational::operator/=(const Rational &o)
{
    if (o.num_ == 0) throw std::domain_error("rational division by zero");
    *this = make_reduced(Wide(num_) * o.den_, Wide(den_) * o.num_);
    return *this;
}

std::strong_ordering operator<=>(const Rational &a, const Rational &b)
{
    return Wide(a.num_) * b.den_ <=> Wide(b.num_) * a.den_;
}

Rational abs(const Rational &r)
{
    return r.sign() < 0 ? -r : r;
}

Rational pow(const Rational &base, int exponent)
{
    Rational result(1);
    Rational b = exponent < 0 ? Rational(1) / base : base;
    for (int e = exponent < 0 ? -exponent : exponent; e > 0; --e) result *= b;
    return result;
}

std::ostream &operator<<(std::ostream &os, const Rational &r)
{
    os << r.num();
    if (r.den() != 1) os << '/' << r.den();
    return os;
}

Eigen::VectorXd to_double(const RationalVector &v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].to_double();
    return out;
}

Rational dot(const IntVector &k, const RationalVector &w)
{
    Rational s(0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (k(static_cast<Eigen::Index>(i)) != 0) s += Rational(k(static_cast<Eigen::Index>(i))) * w[i];
    }
    return s;
}

RationalVector parse_rational_vector(std::string_view text)
{
    RationalVector out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.push_back(Rational::parse(piece));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_rational_vector(const RationalVector &v)
{
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += v[i].str();
    }
    return s + ")";
}

} // namespace effstab
