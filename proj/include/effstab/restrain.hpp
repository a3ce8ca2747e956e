#ifndef EFFSTAB_RESTRAIN_HPP
#define EFFSTAB_RESTRAIN_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <effstab/dynamics.hpp>
#include <effstab/lattice.hpp>
#include <effstab/normal_form.hpp>
#include <effstab/rational.hpp>
#include <effstab/series.hpp>

namespace effstab
{

/// a_j = (2 tau (n+1))^{-n-1+j}, j = 1..n, and a = b = (2 (n+1) tau)^{-n} / 3.
struct ExponentSet {
    int n = 0;
    Rational tau;
    std::vector<Rational> a_list;
    Rational a;
    Rational b;

    std::string str() const;
};

// Requires n >= 1 and tau >= 2.
ExponentSet exponents(int n, const Rational &tau);

// m = max(1, floor(multiplier * eps^{-a})) and tau_m from the regularity,
// capped above by tau_cap.
TimeBudget time_budget(double epsilon, const Regularity &r, const ExponentSet &e, double m_multiplier = 1.0,
                       double tau_cap = kNever);

/// Implicit constants of the construction. Every "<." inequality named by
/// its label ("i".."xi", "B:T mu", ...) reads lhs < multiplier * rhs.
struct Multipliers {
    double mu = 1.0;    // mu_j = mu * T_j^{-1} eps^{a_j}
    double mu0 = 1.0;   // mu_0 = mu0 * eps^b
    double c = 1.0;     // c_j = c * (T_j mu_j / L_j)^tau, c_0 = c * mu_0
    double steep = 1.0; // escape once |Pi_j grad h| > steep * c_j^2
    double Q = 1.0;     // Dirichlet Q_{j+1} = Q * eps^{-a_{j+1}(n-1)}
    std::map<std::string, double> conditions;

    double of(const std::string &label) const;
    std::string str() const;
};

struct ConditionParams {
    int n = 2;
    Rational tau{2};
    double gamma = 1.0;
    double epsilon = 1e-6;
    int m = 1;
    std::vector<double> periods; // T_1..T_n
    std::vector<Int> levels;     // L_1..L_n
    Multipliers mult;
};

struct ConditionReport {
    double epsilon = 0.0;
    double mu0 = 0.0;
    std::vector<double> mu; // mu_1..mu_n
    std::vector<ConditionMargin> entries;
    bool passed = true;
    std::string first_failure;

    // label, lhs, rhs, multiplier, log margin, log margin / log(1/eps), verdict
    std::string table() const;
};

// Evaluates the eleven conditions (i)-(xi) with mu_j = mu T_j^{-1} eps^{a_j}.
ConditionReport check_conditions(const ConditionParams &p);

struct RestrainConfig {
    Rational tau{2};
    double gamma = 1.0;
    Multipliers mult;
    NormalFormConfig normal_form; // for the normalized actions
    bool normalize = true;        // false: track the raw actions throughout
};

/// The sequences of a restrained solution together with everything needed
/// to re-evaluate the logged inequalities.
struct RestrainFrame {
    int n = 0;
    double epsilon = 0.0;
    Rational tau{2};
    double gamma = 1.0;
    int m = 1;
    std::vector<double> mu;       // mu_0..mu_n
    std::vector<double> times;    // t_0..t_{n+1} (t_{n+1} = tau_m)
    std::vector<std::size_t> samples; // sample indices of t_0..t_n
    std::vector<PeriodicVector> vectors;
    std::vector<Eigen::VectorXd> centers; // I_1..I_n
    std::vector<double> interval_drift;   // max |I^j(t) - I^j(t_j)| on [t_j, t_{j+1}], j = 0..n
    std::vector<double> displacement;     // sup |I^j - I| observed, j = 1..n
    std::vector<ConditionMargin> condition_log;
    // Per level j = 1..n: the action displacement of Psi_j^{-1} in scaled
    // coordinates (empty when the level tracks raw actions).
    std::vector<std::vector<Series>> inverse_displacement;
    bool approximate = false;
    std::vector<std::string> notes;
    Multipliers mult;
    std::string trajectory_hash;
    std::string config_hash;

    double chain_bound() const;
    std::string text() const;
};

struct RestrainOutcome {
    bool certified = false;
    RestrainFrame frame; // complete when certified, partial otherwise
    std::string failed_condition;
    std::vector<std::string> trace;
};

// Builds the sequences along the recorded trajectory (sample resolution).
// Requires n >= 2 (the Dirichlet step needs it).
RestrainOutcome try_restrain(const HamiltonianSystem &H, const TrajectoryRecord &traj, const TimeBudget &budget,
                             const RestrainConfig &cfg);

// I^j at sample s of the trajectory under the frame's level-j transform.
Eigen::VectorXd normalized_action(const RestrainFrame &f, int j, const TrajectoryRecord &traj, std::size_t s);

// Re-evaluates the (C_j) and (B_{j+1}) inequalities from the raw data.
bool verify_certificate(const RestrainFrame &f, const HamiltonianSystem &H, const TrajectoryRecord &traj,
                        std::string *why = nullptr);

struct StabilityCheck {
    bool holds = true;
    double bound = 0.0; // (n+1)^2 mu_0
    double max_displacement = 0.0;
    double witness_time = kNever; // first violating sample time
    double chain_bound = 0.0;
};

// |I(t) - I(0)| < (n+1)^2 mu_0 on the samples with t <= tau_m.
StabilityCheck restrained_implies_stable(const RestrainFrame &f, const TrajectoryRecord &traj);

} // namespace effstab

#endif
