#ifndef EFFSTAB_LATTICE_HPP
#define EFFSTAB_LATTICE_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include <effstab/rational.hpp>

namespace effstab
{

/// Rational frequency omega with its period T: the least positive real with
/// T * omega integral.
struct PeriodicVector {
    RationalVector omega;
    Rational period;

    int n() const { return static_cast<int>(omega.size()); }
    Eigen::VectorXd value() const { return to_double(omega); }
    // T * omega, an integer vector with coprime entries.
    IntVector scaled() const;
    void validate() const;
};

PeriodicVector period_of(const RationalVector &v);

struct DirichletResult {
    PeriodicVector omega;
    double error = 0.0;       // |v - omega|_inf
    double error_bound = 0.0; // T^{-1} Q^{-1/(n-1)}
    double lower = 0.0;       // |v|^{-1}
    double upper = 0.0;       // Q |v|^{-1}
    // Nonnegative when the corresponding inequality holds.
    double error_margin() const { return error_bound - error; }
    double lower_margin() const { return omega.period.to_double() - lower; }
    double upper_margin() const { return upper - omega.period.to_double(); }
};

// Periodic omega and T with |v - omega| <= T^{-1} Q^{-1/(n-1)} and
// |v|^{-1} <= T <= Q |v|^{-1} (sup norms). Integer periods are scanned
// first (smallest T, then lexicographically smallest T omega); a rational
// period search over the numerators of the largest component is the
// fallback. search_cap bounds both scans (0: no extra bound).
DirichletResult dirichlet_approx(const Eigen::VectorXd &v, double Q, long search_cap = 0);

// Row-style Hermite normal form of the row lattice, zero rows removed.
IntMatrix hermite_normal_form(const IntMatrix &rows);
// Basis (rows, HNF) of {k in Z^n : A k = 0}.
IntMatrix integer_kernel(const IntMatrix &A);
// Basis (rows, HNF) of span_R(rows) intersected with Z^n.
IntMatrix saturate(const IntMatrix &rows);
int rational_rank(const IntMatrix &rows);
int rational_rank(const std::vector<RationalVector> &rows);

// M = {k : k . omega_i = 0 for every i}; rows in HNF. Throws
// DependenceError for dependent inputs.
IntMatrix resonance_module(const std::vector<PeriodicVector> &vectors, int n);

/// Independent periodic vectors omega_1..omega_j with the resonance module
/// M_j, an orthonormal basis of Lambda_j = span_R M_j (columns) and
/// L_j = max_i |T_i omega_i|_inf (L_0 = 1).
struct ResonanceFrame {
    int n = 0;
    std::vector<PeriodicVector> vectors;
    IntMatrix module_basis;
    Eigen::MatrixXd lambda_basis;
    Int l_index = 1;

    static ResonanceFrame build(int n, std::vector<PeriodicVector> vectors);
    int j() const { return static_cast<int>(vectors.size()); }
    // First i vectors as a frame.
    ResonanceFrame prefix(int i) const;
};

struct Projections {
    Eigen::MatrixXd pi;
    Eigen::MatrixXd pi_perp;
};

Projections projections(const ResonanceFrame &frame);
// Orthonormal basis (columns) of the real span of integer rows.
Eigen::MatrixXd orthonormal_span(const IntMatrix &rows, int n);

/// Linear subspace given by integer normals spanning its orthogonal
/// complement; dim = n - #normals.
struct RationalSubspace {
    int n = 0;
    IntMatrix normals; // rows

    int dim() const { return n - static_cast<int>(normals.rows()); }
    void validate() const;
    std::string str() const; // "perp{(1, -1)}" or "R^n"
};

bool subspace_in_GL(const RationalSubspace &s, int L);

struct LeveledSubspace {
    RationalSubspace subspace; // normals = HNF of the saturated complement
    int level = 0;             // least L with subspace in G^L(n, dim)
};

// Every subspace of dimension 1..n in G^{L_max}(n, k), each once, tagged
// with its least level. Ordered by dimension, level, then normals.
std::vector<LeveledSubspace> enumerate_subspaces(int n, int L_max);

} // namespace effstab

#endif
