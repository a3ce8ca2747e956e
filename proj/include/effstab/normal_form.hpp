#ifndef EFFSTAB_NORMAL_FORM_HPP
#define EFFSTAB_NORMAL_FORM_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include <effstab/lattice.hpp>
#include <effstab/norms.hpp>
#include <effstab/series.hpp>

namespace effstab
{

/// A named "lhs < multiplier * rhs" check. log_margin > 0 iff it holds.
struct ConditionMargin {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double multiplier = 1.0;

    double log_margin() const;
    bool holds() const { return lhs < multiplier * rhs; }
};

struct NormalFormConfig {
    int m = 4;          // averaging iterations per frequency
    int lie_order = 8;  // terms of exp(ad chi) kept
    int k_max = -1;     // working truncation box; -1 keeps the input box
    int d_max = -1;
    double rho = 2.0;   // rho_1; the scaled ball has radius 3 rho_j, rho_j = 2^{j-1} rho
    double multiplier = 1.0; // on the right-hand side of every reported condition
    GridSpec grid{16, 9};    // sups of theta-derivatives

    void validate() const;
    // Lemma-style radius ratio C = (2n)^{(1-alpha)/alpha} / 16.
    static double radius_ratio(int n, double alpha);
    double rho_at(int j) const;
};

// Keeps exactly the modes with k . omega = 0.
Series resonant_average(const Series &f, const PeriodicVector &w);
// chi with {chi, omega . I} = f - [f]_omega.
Series homological_solve(const Series &f, const PeriodicVector &w);
// omega . I as a series in the box of `like`.
Series linear_hamiltonian(const Series &like, const Eigen::VectorXd &omega);

// H + {H,chi} + {{H,chi},chi}/2 + ... up to `order` brackets; every bracket
// is truncated to the box of H and its dropped mass added to the loss.
Series lie_transform(const Series &H, const Series &chi, int order);

/// Composition Phi = Phi_{chi_1} o Phi_{chi_2} o ... of time-one flows.
/// Pullbacks apply the generators in list order.
struct NearIdentityTransform {
    std::vector<Series> generators;
    int lie_order = 8;

    bool identity() const { return generators.empty(); }
    Series pullback(const Series &F) const;
    NearIdentityTransform inverse() const;
    // Phi o Psi (Phi's generators first).
    NearIdentityTransform then(const NearIdentityTransform &psi) const;
    // theta o Phi - theta and I o Phi - I, componentwise, in the box of
    // `like`.
    std::vector<Series> angle_displacement(const Series &like) const;
    std::vector<Series> action_displacement(const Series &like) const;
};

struct AveragingStep {
    PeriodicVector frequency;
    Series input; // perturbation entering the step
    Series resonant_part;
    Series generator;
    double remainder_norm = 0.0; // majorant norm of the non-resonant part after the step
    double truncation_loss = 0.0;
};

struct AveragingResult {
    Series g;         // resonant part, {g, l_omega} = 0 mode-wise
    Series remainder; // non-resonant part left after the last step
    NearIdentityTransform transform;
    std::vector<AveragingStep> steps;
    std::vector<double> contraction; // remainder ratios step to step
    ConditionMargin small_T;         // T mu < 1
    ConditionMargin small_mT;        // m T mu < 1
};

// Up to cfg.m first-order Lie steps on H = omega . I + f; stops early
// once the non-resonant part vanishes exactly. Throws DivergenceError when
// the remainder grows above the roundoff floor.
AveragingResult periodic_averaging(const Series &f, const PeriodicVector &w, const NormalFormConfig &cfg);

struct NormCertificates {
    double g_norm = 0.0;
    double remainder_norm = 0.0;
    double displacement_norm = 0.0;
};

struct NormalFormResult {
    ResonanceFrame frame;
    std::vector<std::vector<AveragingStep>> steps; // per frequency, omega_j first
    Series g;
    Series remainder;
    NearIdentityTransform transform;
    NormCertificates norms;
    bool symmetry_checked = false;
    std::vector<ConditionMargin> conditions;

    // Filled by local_normal_form.
    bool localized = false;
    Eigen::VectorXd center;
    double mu = 0.0;
    double theta_derivative_sup = 0.0; // sup |d_theta f_j| on B(center, 2 rho mu)
    double target = 0.0;               // tau_m^{-1} mu
    double action_displacement = 0.0;  // sup |Pi_I Psi - Id|
    Series scaled_g;                   // g tilde - h tilde, scaled coordinates
    Series scaled_remainder;           // f tilde_j, scaled coordinates
};

// H = omega_j . I + f for the frame omega_1..omega_j.
NormalFormResult composed_normal_form(const Series &f, const ResonanceFrame &frame, const NormalFormConfig &cfg);

struct ScaledHamiltonian {
    PeriodicVector omega;
    Eigen::VectorXd center;
    double mu = 0.0;
    Series h_tilde; // (grad h(c) - omega) . J + Taylor block / mu
    Series f_tilde; // h_tilde + eps f(c + mu J) / mu
    double f_norm = 0.0; // majorant norm of f_tilde
    ConditionMargin size; // |f tilde| < mu
};

// mu^{-1} H(theta, c + mu J) - omega . J on |J| <= 3 rho. Throws DomainError
// when B(c, 3 rho mu) leaves the domain.
ScaledHamiltonian localize_and_scale(const HamiltonianSystem &H, const Eigen::VectorXd &center, double mu,
                                     const PeriodicVector &omega, double rho, int k_max = -1, int d_max = -1);

// tau_m = exp(m^{1/alpha}) or m^{k*}.
double time_scale(const Regularity &r, int m);

// Proposition-style local normal form around `center` for the frame, with
// mu_schedule[i] = mu_{i+1}. Scales by mu_j, runs the composed normal form
// and maps the pieces back.
NormalFormResult local_normal_form(const HamiltonianSystem &H, const Eigen::VectorXd &center,
                                   const ResonanceFrame &frame, const std::vector<double> &mu_schedule,
                                   const NormalFormConfig &cfg);

// Mode test plus a grid test of Pi_perp d_theta g.
bool verify_resonant_symmetry(const Series &g, const ResonanceFrame &frame, const GridSpec &grid = {8, 5});

} // namespace effstab

#endif
