#include <effstab/normal_form.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <effstab/errors.hpp>

namespace effstab
{
namespace
{

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Integer k . (T omega); zero iff k . omega = 0.
Int mode_dot(const MultiIndex &idx, const IntVector &p)
{
    Int s = 0;
    for (int i = 0; i < p.size(); ++i) s = checked_add(s, checked_mul(idx.k[static_cast<std::size_t>(i)], p(i)));
    return s;
}

void require_dimension(const Series &f, const PeriodicVector &w)
{
    if (w.n() != f.n()) throw ConfigError("frequency dimension does not match the series");
}

Series working_box(const Series &f, const NormalFormConfig &cfg)
{
    const int K = cfg.k_max >= 0 ? cfg.k_max : f.k_max();
    const int D = cfg.d_max >= 0 ? cfg.d_max : f.d_max();
    if (K == f.k_max() && D == f.d_max()) return f;
    if (K >= f.k_max() && D >= f.d_max()) {
        Series out(f.domain(), f.center(), K, D);
        for (const auto &[idx, c] : f.terms()) out.set(idx, c);
        out.set_truncation_loss(f.truncation_loss());
        return out;
    }
    return f.with_bounds(K, D);
}

Series zero_like(const Series &f)
{
    return Series(f.domain(), f.center(), f.k_max(), f.d_max());
}

double sup_of_angle_derivatives(const Series &s, const GridSpec &grid)
{
    double best = 0.0;
    for (int i = 0; i < s.n(); ++i) {
        const Series d = partial_derivative(s, Variable::angle(i));
        if (!d.empty()) best = std::max(best, grid_sup(d, grid));
    }
    return best;
}

std::string trace(const std::vector<AveragingStep> &steps)
{
    std::ostringstream os;
    os.precision(6);
    for (std::size_t i = 0; i < steps.size(); ++i) os << (i ? ", " : "") << steps[i].remainder_norm;
    return os.str();
}

} // namespace

double ConditionMargin::log_margin() const
{
    if (lhs <= 0.0) return std::numeric_limits<double>::infinity();
    if (multiplier * rhs <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(multiplier * rhs / lhs);
}

void NormalFormConfig::validate() const
{
    if (m < 1) throw ConfigError("iteration count m must be at least 1");
    if (lie_order < 1) throw ConfigError("Lie order must be at least 1");
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    if (!(multiplier > 0.0)) throw ConfigError("condition multiplier must be positive");
    grid.validate();
}

double NormalFormConfig::radius_ratio(int n, double alpha)
{
    if (n < 1 || !(alpha >= 1.0)) throw ConfigError("radius ratio needs n >= 1 and alpha >= 1");
    return std::pow(2.0 * n, (1.0 - alpha) / alpha) / 16.0;
}

double NormalFormConfig::rho_at(int j) const
{
    return rho * std::ldexp(1.0, std::max(j, 1) - 1);
}

Series resonant_average(const Series &f, const PeriodicVector &w)
{
    require_dimension(f, w);
    const IntVector p = w.scaled();
    Series out = zero_like(f);
    for (const auto &[idx, c] : f.terms())
        if (mode_dot(idx, p) == 0) out.set(idx, c);
    out.set_truncation_loss(f.truncation_loss());
    return out;
}

Series homological_solve(const Series &f, const PeriodicVector &w)
{
    require_dimension(f, w);
    const IntVector p = w.scaled();
    const double T = w.period.to_double();
    const double floor = (1.0 - 1e-9) / T;
    Series chi = zero_like(f);
    for (const auto &[idx, c] : f.terms()) {
        const Int kp = mode_dot(idx, p);
        if (kp == 0) continue;
        const double divisor = static_cast<double>(kp) / T;
        if (std::abs(divisor) < floor) throw InconsistencyError("small divisor below 1/T for a periodic frequency");
        chi.set(idx, c / Coefficient(0.0, kTwoPi * divisor));
    }
    return chi;
}

Series linear_hamiltonian(const Series &like, const Eigen::VectorXd &omega)
{
    if (omega.size() != like.n()) throw ConfigError("frequency dimension does not match the series");
    Series out = zero_like(like);
    if (out.d_max() < 1) out = Series(like.domain(), like.center(), like.k_max(), 1);
    for (int i = 0; i < like.n(); ++i) {
        std::vector<int> l(static_cast<std::size_t>(like.n()), 0);
        std::vector<int> k(static_cast<std::size_t>(like.n()), 0);
        l[static_cast<std::size_t>(i)] = 1;
        if (omega(i) != 0.0) out.set(MultiIndex(k, l), omega(i));
    }
    return out;
}

Series lie_transform(const Series &H, const Series &chi, int order)
{
    if (order < 1) throw ConfigError("Lie order must be at least 1");
    Series sum = H;
    if (chi.empty()) return sum;
    Series term = H;
    double loss = 0.0;
    for (int k = 1; k <= order && !term.empty(); ++k) {
        Truncation t = poisson_bracket_detailed(term, chi);
        loss += t.dropped_mass() / k;
        term = t.kept.with_bounds(H.k_max(), H.d_max());
        loss += term.truncation_loss();
        term.set_truncation_loss(0.0);
        term *= 1.0 / k;
        sum += term;
    }
    sum = sum.with_bounds(H.k_max(), H.d_max());
    sum.set_truncation_loss(H.truncation_loss() + loss);
    return sum;
}

Series NearIdentityTransform::pullback(const Series &F) const
{
    Series out = F;
    for (const auto &chi : generators) out = lie_transform(out, chi, lie_order);
    return out;
}

NearIdentityTransform NearIdentityTransform::inverse() const
{
    NearIdentityTransform inv;
    inv.lie_order = lie_order;
    for (auto it = generators.rbegin(); it != generators.rend(); ++it) inv.generators.push_back(-*it);
    return inv;
}

NearIdentityTransform NearIdentityTransform::then(const NearIdentityTransform &psi) const
{
    NearIdentityTransform out = *this;
    out.lie_order = std::max(lie_order, psi.lie_order);
    out.generators.insert(out.generators.end(), psi.generators.begin(), psi.generators.end());
    return out;
}

std::vector<Series> NearIdentityTransform::angle_displacement(const Series &like) const
{
    // theta_i o Phi_chi - theta_i is the Lie series of d chi / d I_i; for a
    // composition D <- lie_chi(D) + delta_chi, generators in list order.
    std::vector<Series> out(static_cast<std::size_t>(like.n()), zero_like(like));
    for (const auto &chi : generators) {
        const Series c = chi.with_bounds(like.k_max(), like.d_max());
        for (int i = 0; i < like.n(); ++i) {
            auto &D = out[static_cast<std::size_t>(i)];
            // ad^{k-1}(d chi/dI_i) / k!
            Series term = partial_derivative(c, Variable::action(i));
            Series delta = term;
            for (int k = 2; k <= lie_order && !term.empty(); ++k) {
                term = poisson_bracket(term, c).with_bounds(like.k_max(), like.d_max());
                term *= 1.0 / k;
                delta += term;
            }
            D = lie_transform(D, c, lie_order) + delta;
        }
    }
    return out;
}

std::vector<Series> NearIdentityTransform::action_displacement(const Series &like) const
{
    std::vector<Series> out;
    for (int i = 0; i < like.n(); ++i) {
        Series Ii = zero_like(like);
        if (Ii.d_max() < 1) Ii = Series(like.domain(), like.center(), like.k_max(), 1);
        std::vector<int> l(static_cast<std::size_t>(like.n()), 0);
        std::vector<int> k(static_cast<std::size_t>(like.n()), 0);
        l[static_cast<std::size_t>(i)] = 1;
        Ii.set(MultiIndex(k, l), 1.0);
        Series moved = Ii;
        for (const auto &chi : generators) moved = lie_transform(moved, chi.with_bounds(Ii.k_max(), Ii.d_max()), lie_order);
        out.push_back(moved - Ii);
    }
    return out;
}

AveragingResult periodic_averaging(const Series &f_in, const PeriodicVector &w, const NormalFormConfig &cfg)
{
    cfg.validate();
    require_dimension(f_in, w);
    w.validate();
    const Series f = working_box(f_in, cfg);
    const double T = w.period.to_double();

    AveragingResult res;
    res.transform.lie_order = cfg.lie_order;
    const double size = f.majorant_norm();
    res.small_T = {"T mu < 1", T * size, 1.0, cfg.multiplier};
    res.small_mT = {"m T mu < 1", cfg.m * T * size, 1.0, cfg.multiplier};

    // Anything below this is rounding noise from the brackets.
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(size, 1e-300);

    Series F = f;
    Series N = F - resonant_average(F, w);
    double previous = N.majorant_norm();
    for (int it = 0; it < cfg.m && !N.empty(); ++it) {
        AveragingStep step;
        step.frequency = w;
        step.input = F;
        step.resonant_part = F - N;
        step.generator = homological_solve(N, w);
        const Series &chi = step.generator;

        // exp(ad chi)(l + F) with {l, chi} = -N folded in exactly:
        // [F] + sum_{k>=1} ad^k F / k! + sum_{k>=2} ad^{k-1}(-N) / k!.
        Series next = step.resonant_part;
        double loss = 0.0;
        Series term = F;
        for (int k = 1; k <= cfg.lie_order && !term.empty(); ++k) {
            Truncation t = poisson_bracket_detailed(term, chi);
            loss += t.dropped_mass() / k;
            term = t.kept;
            term.set_truncation_loss(0.0);
            term *= 1.0 / k;
            next += term;
        }
        Series v = -N;
        double fact = 1.0;
        for (int k = 2; k <= cfg.lie_order && !v.empty(); ++k) {
            Truncation t = poisson_bracket_detailed(v, chi);
            fact *= k;
            loss += t.dropped_mass() / fact;
            v = t.kept;
            v.set_truncation_loss(0.0);
            next += v * (1.0 / fact);
        }
        next = next.with_bounds(f.k_max(), f.d_max());
        loss += next.truncation_loss() - F.truncation_loss() - step.resonant_part.truncation_loss();
        next.set_truncation_loss(F.truncation_loss() + std::max(loss, 0.0));

        F = next;
        N = F - resonant_average(F, w);
        step.remainder_norm = N.majorant_norm();
        step.truncation_loss = std::max(loss, 0.0);
        res.transform.generators.push_back(chi);
        res.contraction.push_back(previous > 0.0 ? step.remainder_norm / previous : 0.0);
        res.steps.push_back(step);
        if (step.remainder_norm > previous && step.remainder_norm > floor) {
            throw DivergenceError("averaging remainder grew along omega = " + format_rational_vector(w.omega) +
                                  "; remainder norms: " + trace(res.steps));
        }
        previous = step.remainder_norm;
    }
    res.g = F - N;
    res.remainder = N;
    return res;
}

NormalFormResult composed_normal_form(const Series &f_in, const ResonanceFrame &frame, const NormalFormConfig &cfg)
{
    cfg.validate();
    const int j = frame.j();
    if (j < 1) throw ConfigError("composed normal form needs at least one frequency");
    if (frame.n != f_in.n()) throw ConfigError("frame dimension does not match the series");
    const Series f = working_box(f_in, cfg);

    NormalFormResult out;
    out.frame = frame;
    const PeriodicVector &wj = frame.vectors.back();
    AveragingResult avg = periodic_averaging(f, wj, cfg);
    avg.small_T.name = "A_" + std::to_string(j) + ": " + avg.small_T.name;
    avg.small_mT.name = "A_" + std::to_string(j) + ": " + avg.small_mT.name;

    if (j == 1) {
        out.steps.push_back(avg.steps);
        out.g = avg.g;
        out.remainder = avg.remainder;
        out.transform = avg.transform;
        out.conditions = {avg.small_T, avg.small_mT};
    } else {
        // H o Phi^j = l_{j-1} + ftilde + f^j with ftilde = l_j - l_{j-1} + g^j.
        const Eigen::VectorXd dw = wj.value() - frame.vectors[static_cast<std::size_t>(j - 2)].value();
        const Series shift = linear_hamiltonian(f, dw);
        Series ftilde = avg.g + shift;
        NormalFormResult inner = composed_normal_form(ftilde, frame.prefix(j - 1), cfg);

        out.steps.push_back(avg.steps);
        for (auto &s : inner.steps) out.steps.push_back(std::move(s));
        out.g = (inner.g - shift).with_bounds(f.k_max(), f.d_max());
        out.remainder = inner.remainder + inner.transform.pullback(avg.remainder);
        out.transform = avg.transform.then(inner.transform);
        out.conditions = {avg.small_T, avg.small_mT};
        const double gap = dw.cwiseAbs().maxCoeff();
        out.conditions.push_back({"A_" + std::to_string(j) + ": |omega_j - omega_{j-1}| < |f|", gap,
                                  std::max(f.majorant_norm(), 1e-300), cfg.multiplier});
        for (auto &c : inner.conditions) out.conditions.push_back(std::move(c));
    }

    out.norms.g_norm = out.g.majorant_norm();
    out.norms.remainder_norm = out.remainder.majorant_norm();
    double disp = 0.0;
    for (const auto &d : out.transform.action_displacement(f)) disp = std::max(disp, d.majorant_norm());
    out.norms.displacement_norm = disp;
    out.symmetry_checked = verify_resonant_symmetry(out.g, frame);
    return out;
}

ScaledHamiltonian localize_and_scale(const HamiltonianSystem &H, const Eigen::VectorXd &center, double mu,
                                     const PeriodicVector &omega, double rho, int k_max, int d_max)
{
    H.validate();
    const int n = H.n();
    if (omega.omega.size() == 0) throw ConfigError("a periodic vector is required for the localization");
    if (omega.n() != n || center.size() != n) throw ConfigError("dimension mismatch in localize_and_scale");
    omega.validate();
    if (!(mu > 0.0) || !(rho > 0.0)) throw ConfigError("mu and rho must be positive");
    const double radius = 3.0 * rho;

    const int K = k_max >= 0 ? k_max : std::max(H.integrable.k_max(), H.perturbation.k_max());
    const int D = d_max >= 0 ? d_max : std::max(H.integrable.d_max(), H.perturbation.d_max());

    // Both rescale calls check that B(center, 3 rho mu) stays in the domain.
    Series hs = rescale_actions(H.integrable, center, mu, radius);
    Series fs = H.perturbation.empty() ? Series(Domain{n, radius}, K, D)
                                       : rescale_actions(H.perturbation, center, mu, radius);
    const auto box = [&](const Series &s) {
        Series out(Domain{n, radius}, K, D);
        for (const auto &[idx, c] : s.terms())
            if (out.in_bounds(idx)) out.set(idx, c);
        return out;
    };
    hs = box(hs);
    fs = box(fs);

    ScaledHamiltonian out;
    out.omega = omega;
    out.center = center;
    out.mu = mu;

    // h(c + mu J)/mu - h(c)/mu - omega . J
    Series ht = hs * (1.0 / mu);
    ht.set(MultiIndex{}, 0.0);
    ht -= linear_hamiltonian(ht, omega.value());
    out.h_tilde = ht;
    out.f_tilde = ht + fs * (H.epsilon / mu);
    out.f_norm = out.f_tilde.majorant_norm();
    out.size = {"|f tilde| < mu", out.f_norm, mu, 1.0};
    return out;
}

double time_scale(const Regularity &r, int m)
{
    if (m < 1) throw ConfigError("m must be at least 1");
    if (const auto *g = std::get_if<Gevrey>(&r)) return std::exp(std::pow(m, 1.0 / g->alpha));
    const auto &c = std::get<FiniteDiff>(r);
    return std::pow(static_cast<double>(m), c.k_star);
}

NormalFormResult local_normal_form(const HamiltonianSystem &H, const Eigen::VectorXd &center,
                                   const ResonanceFrame &frame, const std::vector<double> &mu_schedule,
                                   const NormalFormConfig &cfg)
{
    cfg.validate();
    H.validate();
    const int j = frame.j();
    if (j < 1) throw ConfigError("local normal form needs at least one frequency");
    if (static_cast<int>(mu_schedule.size()) != j) throw ConfigError("mu schedule length must equal the frame size");
    for (int i = 0; i < j; ++i) {
        const double mi = mu_schedule[static_cast<std::size_t>(i)];
        if (!(mi > 0.0)) throw ConfigError("mu schedule entries must be positive");
        if (!(H.epsilon < mi * mi)) {
            throw ConfigError("condition B_" + std::to_string(i + 1) + " fails: epsilon >= mu_" + std::to_string(i + 1) +
                              "^2");
        }
    }
    const double mu = mu_schedule.back();
    const PeriodicVector &wj = frame.vectors.back();
    const double rho_j = cfg.rho_at(j);

    const ScaledHamiltonian S = localize_and_scale(H, center, mu, wj, rho_j, cfg.k_max, cfg.d_max);
    NormalFormConfig inner_cfg = cfg;
    inner_cfg.k_max = -1;
    inner_cfg.d_max = -1;
    NormalFormResult r = composed_normal_form(S.f_tilde, frame, inner_cfg);

    std::vector<ConditionMargin> conds;
    const Eigen::VectorXd mismatch = H.frequency(center) - wj.value();
    conds.push_back({"B_" + std::to_string(j) + ": |grad h(I_j) - omega_j| < mu_j", mismatch.cwiseAbs().maxCoeff(), mu,
                     cfg.multiplier});
    for (int i = 0; i < j; ++i) {
        const double mi = mu_schedule[static_cast<std::size_t>(i)];
        conds.push_back({"B_" + std::to_string(i + 1) + ": epsilon < mu_i^2", H.epsilon, mi * mi, 1.0});
        if (i > 0) {
            const Eigen::VectorXd dw =
                frame.vectors[static_cast<std::size_t>(i)].value() - frame.vectors[static_cast<std::size_t>(i - 1)].value();
            conds.push_back({"B_" + std::to_string(i + 1) + ": |omega_i - omega_{i-1}| < mu_{i-1}", dw.cwiseAbs().maxCoeff(),
                             mu_schedule[static_cast<std::size_t>(i - 1)], cfg.multiplier});
        }
    }
    conds.push_back({"scaled size: |f tilde| < 1", S.f_norm, 1.0, cfg.multiplier});
    for (auto &c : r.conditions) conds.push_back(std::move(c));
    r.conditions = std::move(conds);

    r.localized = true;
    r.center = center;
    r.mu = mu;
    r.scaled_g = r.g - S.h_tilde;
    r.scaled_remainder = r.remainder;

    // Measured on J in B(0, 2 rho_1), i.e. I in B(center, 2 rho_1 mu).
    const Domain inner{H.n(), 2.0 * cfg.rho};
    r.theta_derivative_sup = r.remainder.empty() ? 0.0 : mu * sup_of_angle_derivatives(r.remainder.with_domain(inner), cfg.grid);
    r.target = mu / time_scale(H.regularity, cfg.m);
    double disp = 0.0;
    for (const auto &d : r.transform.action_displacement(S.f_tilde)) disp = std::max(disp, d.with_domain(inner).majorant_norm());
    r.action_displacement = mu * disp;
    r.conditions.push_back({"|d_theta f_j| < mu_j / tau_m", r.theta_derivative_sup, r.target, cfg.multiplier});
    r.conditions.push_back({"|Pi_I Psi_j - Id| < mu_j", r.action_displacement, mu, cfg.multiplier});

    const double back_R = 3.0 * rho_j * mu;
    r.g = unscale_actions(r.scaled_g, center, mu, back_R) * mu;
    r.remainder = unscale_actions(r.scaled_remainder, center, mu, back_R) * mu;
    r.norms.g_norm = r.g.majorant_norm();
    r.norms.remainder_norm = r.remainder.majorant_norm();
    r.norms.displacement_norm = r.action_displacement;
    return r;
}

bool verify_resonant_symmetry(const Series &g, const ResonanceFrame &frame, const GridSpec &grid)
{
    if (frame.n != g.n()) throw ConfigError("frame dimension does not match the series");
    for (const auto &w : frame.vectors) {
        const IntVector p = w.scaled();
        for (const auto &[idx, c] : g.terms())
            if (mode_dot(idx, p) != 0) return false;
    }
    if (g.empty() || frame.j() == 0) return true;

    // Pointwise: Pi_perp d_theta g vanishes on a grid.
    const Projections P = projections(frame);
    const SeriesEvaluator ev(g);
    const int n = g.n();
    Eigen::VectorXd theta(n), action(n), gt(n), ga(n);
    const double R = g.domain().R;
    double scale = 1.0;
    for (const auto &[idx, c] : g.terms()) scale += std::abs(c) * kTwoPi * idx.k_sup(n);
    const int na = grid.angle_points;
    const int nI = grid.action_points;
    long total = 1;
    for (int i = 0; i < n; ++i) total *= na;
    for (long a = 0; a < total; ++a) {
        long r = a;
        for (int i = 0; i < n; ++i) {
            theta(i) = static_cast<double>(r % na) / na;
            r /= na;
        }
        // Actions along the diagonal of the cube.
        for (int s = 0; s < nI; ++s) {
            const double x = nI == 1 ? 0.0 : -R + 2.0 * R * s / (nI - 1);
            action = g.center().array() + x;
            ev.value_and_gradient(theta, action, gt, ga);
            if ((P.pi_perp * gt).norm() > 1e-10 * scale) return false;
        }
    }
    return true;
}

} // namespace effstab
