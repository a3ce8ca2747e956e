#ifndef EFFSTAB_HARNESS_HPP
#define EFFSTAB_HARNESS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <effstab/dynamics.hpp>
#include <effstab/restrain.hpp>
#include <effstab/series.hpp>

namespace effstab
{

// Builtin families:
//   quasi-convex        1/2 |I|^2 + eps cos 2 pi (theta_1 + ... + theta_n)
//   linear-diophantine  omega . I + eps cos 2 pi theta_1, omega = (1, golden - 1) or (1, sqrt2 - 1, sqrt3 - 1)
//   degenerate-steep    I_1^2/2 + I_2^3/3 + I_1 I_2^2/2 + eps cos 2 pi (theta_1 + theta_2)
//   pendulum            I^2/2 + eps cos 2 pi theta (n = 1)
//   half-first          I_1^2/2 + eps cos 2 pi theta_2 (n = 2)
std::vector<std::string> builtin_names();
HamiltonianSystem builtin_system(const std::string &name, int n, double epsilon);
// Default dimension of a builtin (2, or 1 for the pendulum).
int builtin_dimension(const std::string &name);

// Flat "key = value" text; '#' starts a comment. Duplicate keys throw.
std::map<std::string, std::string> parse_key_values(const std::string &text);

struct ExperimentConfig {
    std::string system = "quasi-convex"; // builtin name or "files"
    int n = 0;                           // 0: the builtin's default
    std::string h_file;                  // system = files
    std::string f_file;
    std::vector<double> epsilons{1e-2};  // in (0,1), sorted descending
    int samples = 4;                     // initial conditions per epsilon
    double action_radius = -1.0;         // initial actions in B(center, radius); default R/2
    std::uint64_t seed = 1;
    IntegratorConfig integrator;
    Rational tau{2};
    double m_multiplier = 1.0;
    double tau_cap = 1e4;
    long max_steps = 10'000'000;  // per row; a deterministic stand-in for a wall-clock cap
    double threshold_scale = -1.0; // default (n+1)^2
    double threshold_power = -1.0; // default b
    bool restrain = false;
    double gamma = 1.0;
    Multipliers mult;
    int workers = 1;
    std::string output;

    static ExperimentConfig parse(const std::string &text);
    static ExperimentConfig load(const std::string &path);
    void validate() const;
    // Sorted key=value lines of every field except workers and output.
    std::string canonical() const;
    std::string hash() const;

    HamiltonianSystem system_at(double epsilon) const;
    int dimension() const;
};

struct ScalingRecord {
    double epsilon = 0.0;
    int index = 0;
    Eigen::VectorXd theta0;
    Eigen::VectorXd I0;
    double threshold = 0.0;
    double t_cap = 0.0;
    bool censored = false;        // t_cap was cut below tau_m by max_steps
    double drift_time = kNever;   // kNever is written as "inf"
    double max_displacement = 0.0;
    double t_reached = 0.0;
    bool escaped = false;
    std::string certificate = "off";
    double runtime = 0.0; // seconds, kept out of the data section
    std::string key;

    static std::string csv_header(int n);
    std::string csv_row() const;
    static ScalingRecord parse_row(const std::string &row, int n);
};

struct FitSummary {
    std::string model; // "gevrey" (x = eps^{-a/alpha}) or "finite" (x = k* a log(1/eps))
    int rows_used = 0;
    bool defined = false; // needs two distinct x values
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<double> residuals;
    double rms = 0.0;

    std::string str() const;
};

// Least squares log T* = intercept + slope x on the non-sentinel rows.
FitSummary fit_scaling(const std::vector<ScalingRecord> &records, const ExperimentConfig &cfg);

struct ScalingOptions {
    bool resume = true;
    std::string timestamp; // first line of the file; empty: current UTC time
};

struct ScalingResult {
    std::vector<ScalingRecord> records; // canonical order: epsilon, then index
    FitSummary fit;
    std::string data; // everything after the timestamp line
    int resumed = 0;
};

// Rows run in parallel; the output file receives each finished row as a
// complete line and is rewritten in canonical order at the end.
ScalingResult run_scaling(const ExperimentConfig &cfg, const ScalingOptions &opts = {});

// Drops the first (timestamp) line.
std::string data_section(const std::string &file_text);

} // namespace effstab

#endif
