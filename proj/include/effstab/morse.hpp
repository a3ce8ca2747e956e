#ifndef EFFSTAB_MORSE_HPP
#define EFFSTAB_MORSE_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <effstab/lattice.hpp>
#include <effstab/series.hpp>

namespace effstab
{

struct MorseParams {
    double gamma = 1.0;
    double tau = 2.0;

    void validate() const;
};

/// An integrable Hamiltonian h(I) on the closed sup-ball B(center, R),
/// with gradient and Hessian.
struct ActionFunction {
    int n = 0;
    double R = 1.0;
    Eigen::VectorXd center;
    std::function<double(const Eigen::VectorXd &)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd &)> gradient;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd &)> hessian;

    // From an angle-independent series.
    static ActionFunction from_series(const Series &h);
    // h(I) - xi . I
    ActionFunction tilted(const Eigen::VectorXd &xi) const;
    ActionFunction scaled(double c) const;
    bool contains(const Eigen::VectorXd &I) const;
};

/// Orthonormal bases e (of Lambda) and f (of its complement), as columns.
struct AdaptedBasis {
    Eigen::MatrixXd e;
    Eigen::MatrixXd f;
};

AdaptedBasis adapted_coordinates(const RationalSubspace &s);

enum class MorseBranch { GradientLarge, HessianNondegenerate, Fail };
std::string to_string(MorseBranch b);

struct MorseAt {
    MorseBranch branch = MorseBranch::Fail;
    double gradient_norm = 0.0; // || e^T grad h ||
    double sigma_min = 0.0;     // smallest singular value of e^T Hess e
    double threshold = 0.0;     // gamma L^{-tau}
    double gradient_margin() const { return gradient_norm - threshold; }
    double hessian_margin() const { return sigma_min - threshold; }
};

MorseAt check_morse_at(const ActionFunction &h, const AdaptedBasis &basis, const Eigen::VectorXd &point,
                       const MorseParams &p, int L);
MorseAt check_morse_at(const ActionFunction &h, const RationalSubspace &s, const Eigen::VectorXd &point,
                       const MorseParams &p, int L);

struct MorseFailure {
    RationalSubspace subspace;
    int level = 0;
    Eigen::VectorXd point;
    double gradient_margin = 0.0;
    double hessian_margin = 0.0;
};

struct MorseReport {
    MorseParams params;
    int L_max = 0;
    int grid_points = 0;       // per coordinate
    std::size_t points = 0;    // sampled points inside the ball
    std::map<int, int> subspaces_per_dim;
    std::vector<MorseFailure> failures; // first failures, capped
    std::size_t failure_count = 0;
    // Least over subspaces and points of max(g, sigma) L^tau: the check
    // passes exactly for gamma below this value.
    double gamma_star = 0.0;
    bool passed = false;
    double gradient_multiplier = 1.0;
    double hessian_multiplier = 1.0;

    std::string summary() const;
    // Sorted-key CSV: subspace,level,dim,min_gradient,min_sigma,min_best_margin
    std::string margins_csv() const;
    std::vector<std::string> margin_rows;
};

// Every subspace of G^L(n,k), L <= L_max, is tested at its least level L
// (the threshold gamma L^{-tau} only shrinks as L grows) on the points of
// a grid_points^n grid over the cube around the center that lie in the
// Euclidean ball of radius R.
MorseReport check_morse(const ActionFunction &h, const MorseParams &p, int L_max, int grid_points = 33,
                        int threads = 0);

struct PrevalenceReport {
    int samples = 0;
    std::optional<double> fraction; // undefined when samples == 0
    std::map<int, int> histogram;   // ladder exponent e (gamma = 2^-e) -> count
    std::vector<double> gammas;     // best gamma per sample, 0 if none
};

// Requires tau > 2(n^2 + 1). Draws xi uniformly from [-xi_box, xi_box]^n.
PrevalenceReport sample_prevalence(const ActionFunction &h, double tau, int num_samples, double xi_box, int L_max,
                                   int grid_points, std::uint64_t seed);

struct SteepnessQuery {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> curve; // samples of Gamma_j
    double c = 0.0;                     // c_j < 1
    ResonanceFrame frame;
};

struct EscapeResult {
    bool found = false;
    std::size_t index = 0;
    double time = 0.0;
    double projected_gradient = 0.0; // |Pi_j grad h| at the escape sample
    double threshold = 0.0;          // multiple * c^2
    bool containment = false;        // |Gamma(t) - Gamma(t_j)| < c on [t_j, t_{j+1}]
    double precondition_margin = 0.0; // gamma L_j^{-tau} - c
};

// Scans the samples in time order for the first one where
// |Pi_j grad h(Gamma)| > multiple * c^2 (sup norms). Throws ConfigError on
// malformed curves, including ones whose end-to-end length is below c.
EscapeResult steepness_escape(const SteepnessQuery &q, const ActionFunction &h, double gamma, double tau,
                              double multiple = 1.0);

} // namespace effstab

#endif
