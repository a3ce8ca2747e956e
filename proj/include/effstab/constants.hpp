#ifndef EFFSTAB_CONSTANTS_HPP
#define EFFSTAB_CONSTANTS_HPP

// Frozen numerical stand-ins for the implicit constants hidden behind the
// "a <. b" (a <= C b) relations of the stability argument. They were fixed
// once against the test corpus in tests/ and must not be tuned per run.

namespace effstab::constants
{

// Multiplier on the explicit Leibniz-type bound used by
// check_derivative_bound.
inline constexpr double kDerivativeBound = 1.0;

// Relative slack allowed on the composition inequality for roundoff.
inline constexpr double kCompositionSlack = 1e-12;

// Default multipliers on the right-hand sides of the restrain conditions.
inline constexpr double kConditionMultiplier = 1.0;

// Constant c in mu_j = c * T_j^{-1} * eps^{a_j}.
inline constexpr double kRadiusConstant = 1.0;

// Multiplier on eps^{-a} when deriving the averaging order m.
inline constexpr double kOrderMultiplier = 1.0;

// Default Gevrey derivative-order cap and sampling grid.
inline constexpr int kGevreyCap = 40;
inline constexpr int kAnglePoints = 64;
inline constexpr int kActionPoints = 33;

} // namespace effstab::constants

#endif
