#ifndef EFFSTAB_DYNAMICS_HPP
#define EFFSTAB_DYNAMICS_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <effstab/lattice.hpp>
#include <effstab/series.hpp>

namespace effstab
{

// Returned by escape and crossing-time queries when nothing happens.
inline constexpr double kNever = std::numeric_limits<double>::infinity();

enum class Scheme {
    automatic,        // leapfrog when H = h(I) + f(theta), implicit midpoint otherwise
    leapfrog,         // kick-drift-kick Strang splitting
    implicit_midpoint
};
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string &name);

struct IntegratorConfig {
    double step = 1e-3;
    Scheme scheme = Scheme::automatic;
    double energy_tolerance = 1e-6; // relative; exceeding it sets a flag
    int stride = 1;                 // keep every stride-th step
    double iteration_tolerance = 1e-13;
    int max_iterations = 50;
    std::uint64_t seed = 0; // provenance only

    void validate() const;
    std::string canonical() const;
    std::string hash() const; // 16 hex digits of FNV-1a over canonical()
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string &data);
std::string hex64(std::uint64_t v);

struct TrajectoryRecord {
    int n = 0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> theta; // reduced to [0,1)
    std::vector<Eigen::VectorXd> action;
    std::vector<double> energy;
    bool escaped = false;
    double max_energy_deviation = 0.0; // relative, over every step
    bool energy_flag = false;
    Scheme scheme = Scheme::automatic; // the one actually used
    std::uint64_t seed = 0;
    std::string config_hash;

    std::size_t size() const { return times.size(); }
    // Columns t, theta_1..theta_n, I_1..I_n, H, config_hash.
    std::string csv() const;
};

struct TimeBudget {
    int m = 1;
    double tau_m = 0.0;
    Regularity regularity;

    // tau_m from the regularity, optionally capped from above.
    static TimeBudget make(const Regularity &r, int m, double cap = kNever);
    void validate() const;
};

// Called after every step with (t, theta unwrapped, I); returning false stops.
using StepObserver = std::function<bool(double, const Eigen::VectorXd &, const Eigen::VectorXd &)>;

// Integrates from (theta0, I0) up to t_max with uniform steps no longer than
// cfg.step. Stops early, flagged, when I leaves the domain ball.
TrajectoryRecord integrate(const HamiltonianSystem &H, const Eigen::VectorXd &theta0, const Eigen::VectorXd &I0,
                           double t_max, const IntegratorConfig &cfg, const StepObserver &observer = {});

// |z(0) - Phi_{-t} Phi_t z(0)| in the sup norm (angles unwrapped).
double reversibility_error(const HamiltonianSystem &H, const Eigen::VectorXd &theta0, const Eigen::VectorXd &I0,
                           double t, const IntegratorConfig &cfg);

// First sample time with |I - center| >= radius, or kNever.
double escape_time(const TrajectoryRecord &traj, const Eigen::VectorXd &center, double radius);

struct TransverseDrift {
    std::vector<double> per_sample; // from the first sample at or after from_time
    double max = 0.0;
};

// sup-norm of Pi_perp (I(t) - I(from_time)).
TransverseDrift transverse_drift(const TrajectoryRecord &traj, const ResonanceFrame &frame, double from_time);

struct DriftResult {
    double time = kNever; // first step time with |I(t) - I(0)| >= threshold
    double max_displacement = 0.0;
    double t_reached = 0.0;
    bool escaped = false;
    bool crossed() const { return time != kNever; }
};

// Checked at every step; capped runs return kNever.
DriftResult drift_time(const HamiltonianSystem &H, const Eigen::VectorXd &theta0, const Eigen::VectorXd &I0,
                       double threshold, double t_cap, const IntegratorConfig &cfg);

} // namespace effstab

#endif
