#ifndef EFFSTAB_SERIES_HPP
#define EFFSTAB_SERIES_HPP

#include <array>
#include <compare>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace effstab
{

// Largest phase-space half-dimension a series can carry.
inline constexpr int kMaxDim = 6;

/// Phase space T^n x B(center, R). Action balls use the supremum norm and
/// angles live in [0,1) with the 2*pi factor kept inside the exponentials.
struct Domain {
    int n = 1;
    double R = 1.0;

    void validate() const;
    friend bool operator==(const Domain &, const Domain &) = default;
};

/// Fourier index k in Z^n paired with a Taylor exponent l in N^n.
/// Entries past the owning dimension are zero.
struct MultiIndex {
    std::array<std::int16_t, kMaxDim> k{};
    std::array<std::int16_t, kMaxDim> l{};

    MultiIndex() = default;
    MultiIndex(std::span<const int> angle, std::span<const int> action);
    MultiIndex(std::initializer_list<int> angle, std::initializer_list<int> action);

    int k_sup(int n) const;
    int l_total(int n) const;
    bool angle_zero() const;
    MultiIndex negated_angle() const;

    friend auto operator<=>(const MultiIndex &, const MultiIndex &) = default;
};

/// Names one phase-space coordinate: angle theta_i or action I_i.
struct Variable {
    enum class Kind { angle, action };
    Kind kind;
    int index;

    static Variable angle(int i) { return {Kind::angle, i}; }
    static Variable action(int i) { return {Kind::action, i}; }
};

using Coefficient = std::complex<double>;

/// Truncated Fourier-Taylor series
///   s(theta, I) = sum c_{k,l} (I - center)^l exp(2 pi i k.theta)
/// with |k|_inf <= k_max and |l|_1 <= d_max. Absent indices are zero.
///
/// Coefficients satisfy c_{-k,l} = conj(c_{k,l}) so that evaluation is
/// real; builders keep both halves. Operations that drop terms record the
/// dropped l1 coefficient mass in truncation_loss().
class Series
{
public:
    using Terms = std::map<MultiIndex, Coefficient>;

    Series() = default;
    Series(Domain domain, int k_max, int d_max);
    Series(Domain domain, Eigen::VectorXd center, int k_max, int d_max);

    // Builders.
    static Series constant(Domain d, double value, int k_max = 0, int d_max = 0);
    static Series action(Domain d, int i, int k_max = 0, int d_max = 1);
    // amplitude * cos(2 pi k.theta + phase)
    static Series cosine(Domain d, std::span<const int> k, double amplitude, int k_max, int d_max, double phase = 0.0);
    static Series sine(Domain d, std::span<const int> k, double amplitude, int k_max, int d_max);
    // omega . I (expanded around the origin)
    static Series linear(Domain d, const Eigen::VectorXd &omega, int k_max = 0, int d_max = 1);
    // 0.5 * (I - c)^T Q (I - c) with Q symmetric
    static Series quadratic(Domain d, const Eigen::MatrixXd &Q, int k_max = 0, int d_max = 2);

    const Domain &domain() const { return domain_; }
    int n() const { return domain_.n; }
    const Eigen::VectorXd &center() const { return center_; }
    int k_max() const { return k_max_; }
    int d_max() const { return d_max_; }
    const Terms &terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    Coefficient coeff(const MultiIndex &idx) const;
    // Accumulates into idx; exact zeros are erased. Throws ConfigError when
    // idx lies outside the truncation box.
    void add(const MultiIndex &idx, Coefficient c);
    void set(const MultiIndex &idx, Coefficient c);
    bool in_bounds(const MultiIndex &idx) const;

    double truncation_loss() const { return truncation_loss_; }
    void set_truncation_loss(double loss) { truncation_loss_ = loss; }

    // Largest |c_{-k,l} - conj(c_{k,l})|.
    double reality_defect() const;
    bool is_real(double tol = 1e-12) const { return reality_defect() <= tol; }
    bool angle_independent() const;
    bool action_independent() const;

    // sum |c|
    double coefficient_norm() const;
    // sum |c| R^{|l|}, an upper bound for the sup over the domain.
    double majorant_norm() const;

    // Same terms with a different truncation box. Terms outside the new
    // box are dropped and their mass added to truncation_loss().
    Series with_bounds(int k_max, int d_max) const;
    Series with_domain(Domain d) const;

    Series operator-() const;
    Series &operator+=(const Series &o);
    Series &operator-=(const Series &o);
    Series &operator*=(double a);
    friend Series operator+(Series a, const Series &b) { return a += b; }
    friend Series operator-(Series a, const Series &b) { return a -= b; }
    friend Series operator*(Series a, double s) { return a *= s; }
    friend Series operator*(double s, Series a) { return a *= s; }

    // Same domain, center and truncation box.
    bool compatible(const Series &o) const;

private:
    Domain domain_;
    Eigen::VectorXd center_;
    int k_max_ = 0;
    int d_max_ = 0;
    Terms terms_;
    double truncation_loss_ = 0.0;
};

/// Result of a truncating operation: the retained series and the terms
/// that fell outside the box.
struct Truncation {
    Series kept;
    Series dropped;

    double dropped_mass() const { return dropped.coefficient_norm(); }
};

std::complex<double> evaluate_complex(const Series &s, const Eigen::VectorXd &theta, const Eigen::VectorXd &action);
// Real value; throws DomainError outside the ball and CorruptSeriesError
// when the imaginary residue exceeds 1e-12 relative to the term magnitude.
double evaluate(const Series &s, const Eigen::VectorXd &theta, const Eigen::VectorXd &action);

// d/dtheta_j multiplies by 2 pi i k_j; d/dI_j lowers l_j and multiplies by
// l_j. The truncation box is kept (action derivatives have degree <= d_max-1).
Series partial_derivative(const Series &s, Variable v);
// Mixed derivative: angle orders then action orders.
Series partial_derivative(const Series &s, std::span<const int> angle_orders, std::span<const int> action_orders);

Truncation truncate(const Series &s, int k_max, int d_max);

// Product truncated back to the box of the left operand.
Truncation product_detailed(const Series &F, const Series &G);
Series product(const Series &F, const Series &G);

/// {F,G} = sum_j dF/dtheta_j dG/dI_j - dF/dI_j dG/dtheta_j, truncated to the
/// box of F. Requires identical domain and center.
Truncation poisson_bracket_detailed(const Series &F, const Series &G);
Series poisson_bracket(const Series &F, const Series &G);

// Re-expands the Taylor part around another center (exact binomial shift).
Series recenter(const Series &s, const Eigen::VectorXd &new_center, double new_R);
// s(theta, center + mu * J) as a series in J around 0 on B(0, new_R).
Series rescale_actions(const Series &s, const Eigen::VectorXd &center, double mu, double new_R);
// Inverse of rescale_actions: t(theta, (I - center)/mu) around center.
Series unscale_actions(const Series &s, const Eigen::VectorXd &center, double mu, double new_R);

/// Compiled form of a series for repeated pointwise evaluation of the value
/// and its first derivatives (used by integrators and grid sups).
class SeriesEvaluator
{
public:
    SeriesEvaluator() = default;
    explicit SeriesEvaluator(const Series &s);

    int n() const { return n_; }
    bool empty() const { return coeffs_.empty(); }
    // Real value at a point.
    double value(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const;
    std::complex<double> value_complex(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const;
    // Value plus gradient in theta and in I.
    double value_and_gradient(const Eigen::VectorXd &theta, const Eigen::VectorXd &action, Eigen::VectorXd &grad_theta,
                              Eigen::VectorXd &grad_action) const;
    void angle_gradient(const Eigen::VectorXd &theta, const Eigen::VectorXd &action, Eigen::VectorXd &grad_theta) const;

private:
    void fill_tables(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const;

    int n_ = 0;
    int k_max_ = 0;
    int d_max_ = 0;
    Eigen::VectorXd center_;
    std::vector<std::array<std::int16_t, kMaxDim>> k_;
    std::vector<std::array<std::int16_t, kMaxDim>> l_;
    std::vector<Coefficient> coeffs_;
    mutable std::vector<Coefficient> phase_table_;
    mutable std::vector<double> power_table_;
};

/// Regularity class of a Hamiltonian: (alpha, L)-Gevrey or C^k with the
/// auxiliary integer k* (k >= k* n + 1).
struct Gevrey {
    double alpha = 1.0;
    double L = 1.0;
};
struct FiniteDiff {
    int k = 2;
    int k_star = 1;
};
using Regularity = std::variant<Gevrey, FiniteDiff>;

std::string regularity_tag(const Regularity &r);

/// H = integrable + epsilon * perturbation.
struct HamiltonianSystem {
    Series integrable;
    Series perturbation;
    double epsilon = 0.0;
    Regularity regularity = Gevrey{};

    // Checks that the integrable part has only k = 0 modes, epsilon >= 0, and
    // the regularity constraints (alpha >= 1, L > 0; k >= k* n + 1).
    void validate() const;
    int n() const { return integrable.n(); }
    double energy(const Eigen::VectorXd &theta, const Eigen::VectorXd &action) const;
    Eigen::VectorXd frequency(const Eigen::VectorXd &action) const;
};

} // namespace effstab

#endif
