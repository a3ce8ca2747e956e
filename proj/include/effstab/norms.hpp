#ifndef EFFSTAB_NORMS_HPP
#define EFFSTAB_NORMS_HPP

#include <string>
#include <vector>

#include <effstab/constants.hpp>
#include <effstab/series.hpp>

namespace effstab
{

struct GevreyParams {
    double alpha = 1.0;
    double L = 1.0;

    void validate() const;
};

/// Uniform sampling grid for C^0 sups: angle_points per angle coordinate on
/// [0,1) and action_points per action coordinate across [c-R, c+R].
struct GridSpec {
    int angle_points = constants::kAnglePoints;
    int action_points = constants::kActionPoints;

    void validate() const;
    std::string str() const; // "64x33"
};

/// A norm value computed from a finite partial sum over a finite grid, so a
/// lower bound for the true function-space norm.
struct NormCertificate {
    std::string kind; // "gevrey a L" or "ck k"
    double value = 0.0;
    bool lower_bound = true;
    int cap = 0;
    GridSpec grid;

    static std::string csv_header(); // norm_kind,value,cap,grid_spec
    std::string csv_row() const;
};

// Max over the grid of |s|.
double grid_sup(const Series &s, const GridSpec &grid = {});

// sum_{|l| <= cap} L^{|l| alpha} (l!)^{-alpha} sup |d^l s|, l ranging over
// angle and action derivative orders.
NormCertificate gevrey_norm(const Series &s, const GevreyParams &p, int deriv_order_cap = constants::kGevreyCap,
                            const GridSpec &grid = {});
// sum_{|l| <= k} (l!)^{-1} sup |d^l s|
NormCertificate ck_norm(const Series &s, int k, const GridSpec &grid = {});

struct DerivativeBoundReport {
    int p = 0;
    double lhs = 0.0;   // sum_{|l|=p} |d^l s|_{alpha, L/2}
    double rhs = 0.0;   // |s|_{alpha, L}
    double ratio = 0.0; // lhs / rhs (0 when lhs = 0)
    double bound = 0.0; // frozen constant times the explicit Leibniz factor
    bool within = true;
};

// The explicit factor: L^{-p alpha} * #{|l| = p} * max_N (N^p 2^{p-N})^alpha.
double derivative_bound_factor(int p, const GevreyParams &params, int n);

DerivativeBoundReport check_derivative_bound(const Series &s, const GevreyParams &params, int p, int cap = 12,
                                             const GridSpec &grid = {});

/// Near-identity map Phi(theta, I) = (theta + angle_shift, I + action_shift),
/// each component a series on the domain of f.
struct NearIdentityMap {
    std::vector<Series> angle_shift;
    std::vector<Series> action_shift;
};

struct CompositionReport {
    double composed = 0.0; // |f o Phi|_{alpha, C L} on the smaller ball
    double original = 0.0; // |f|_{alpha, L}
    double tolerance = 0.0;
    bool holds = false;
    Series composition;
};

struct CompositionOptions {
    int order = 8; // Taylor order of the substitution
    int cap = 12;
    GridSpec grid{};
    int k_max = -1; // result box; -1 means widest operand box
    int d_max = -1;
};

// f o Phi by Taylor substitution at the base point. Throws DomainError when
// Phi moves B(rho_prime) out of the ball of f.
Series compose(const Series &f, const NearIdentityMap &phi, double rho_prime, const CompositionOptions &opt,
               Series *dropped = nullptr);

CompositionReport check_composition_bound(const Series &f, const NearIdentityMap &phi, const GevreyParams &p, double C,
                                          double rho_prime, const CompositionOptions &opt = {});

} // namespace effstab

#endif
