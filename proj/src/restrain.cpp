#include <effstab/restrain.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <effstab/errors.hpp>

namespace effstab
{

std::string ExponentSet::str() const
{
    std::ostringstream os;
    os << "n=" << n << " tau=" << tau.str();
    for (std::size_t j = 0; j < a_list.size(); ++j) os << " a_" << j + 1 << "=" << a_list[j].str();
    os << " a=" << a.str() << " b=" << b.str();
    return os.str();
}

ExponentSet exponents(int n, const Rational &tau)
{
    if (n < 1) throw ConfigError("exponents need n >= 1");
    if (tau < Rational(2)) throw ConfigError("exponents need tau >= 2");
    ExponentSet e;
    e.n = n;
    e.tau = tau;
    const Rational base = Rational(2) * tau * Rational(n + 1);
    for (int j = 1; j <= n; ++j) e.a_list.push_back(pow(base, j - n - 1));
    e.a = pow(base, -n) / Rational(3);
    e.b = e.a;
    return e;
}

TimeBudget time_budget(double epsilon, const Regularity &r, const ExponentSet &e, double m_multiplier, double tau_cap)
{
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("time budget needs 0 < eps < 1");
    if (!(m_multiplier > 0.0)) throw ConfigError("m multiplier must be positive");
    const double raw = m_multiplier * std::pow(epsilon, -e.a.to_double());
    const double capped = std::min(raw, 1e9);
    const int m = std::max(1, static_cast<int>(std::floor(capped)));
    return TimeBudget::make(r, m, tau_cap);
}

double Multipliers::of(const std::string &label) const
{
    const auto it = conditions.find(label);
    return it == conditions.end() ? 1.0 : it->second;
}

std::string Multipliers::str() const
{
    std::ostringstream os;
    os << std::setprecision(17) << "mu=" << mu << " mu0=" << mu0 << " c=" << c << " steep=" << steep << " Q=" << Q;
    for (const auto &[k, v] : conditions) os << " " << k << "=" << v;
    return os.str();
}

namespace
{

// ConditionMargin with the label's multiplier.
ConditionMargin margin(const std::string &label, const std::string &name, double lhs, double rhs,
                       const Multipliers &mult)
{
    return ConditionMargin{name, lhs, rhs, mult.of(label)};
}

// Exact "<" (no multiplier), used for eps < mu^2.
ConditionMargin strict(const std::string &name, double lhs, double rhs) { return ConditionMargin{name, lhs, rhs, 1.0}; }

double sup_norm(const Eigen::VectorXd &v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

} // namespace

std::string ConditionReport::table() const
{
    std::ostringstream os;
    const double log_inv = std::log(1.0 / epsilon);
    os << "condition,lhs,rhs,multiplier,log_margin,log_eps_units,verdict\n";
    os << std::setprecision(6);
    for (const auto &c : entries) {
        const double lm = c.log_margin();
        os << c.name << "," << c.lhs << "," << c.rhs << "," << c.multiplier << "," << lm << "," << lm / log_inv << ","
           << (c.holds() ? "holds" : "FAILS") << "\n";
    }
    return os.str();
}

ConditionReport check_conditions(const ConditionParams &p)
{
    if (p.n < 1) throw ConfigError("conditions need n >= 1");
    if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) throw ConfigError("conditions need 0 < eps < 1");
    if (!(p.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (p.m < 1) throw ConfigError("m must be at least 1");
    if (static_cast<int>(p.periods.size()) != p.n || static_cast<int>(p.levels.size()) != p.n)
        throw ConfigError("need n periods and n levels");
    for (double T : p.periods)
        if (!(T > 0.0)) throw ConfigError("periods must be positive");
    for (Int L : p.levels)
        if (L < 1) throw ConfigError("levels must be at least 1");

    const ExponentSet e = exponents(p.n, p.tau);
    const double eps = p.epsilon;
    const double tau = p.tau.to_double();
    ConditionReport r;
    r.epsilon = eps;
    r.mu0 = p.mult.mu0 * std::pow(eps, e.b.to_double());
    for (int j = 0; j < p.n; ++j) r.mu.push_back(p.mult.mu * std::pow(eps, e.a_list[j].to_double()) / p.periods[j]);

    auto T = [&](int j) { return p.periods[j - 1]; };
    auto mu = [&](int j) { return j == 0 ? r.mu0 : r.mu[j - 1]; };
    auto X = [&](int j) { return std::pow(T(j) * mu(j) / static_cast<double>(p.levels[j - 1]), tau); };
    auto tag = [](const char *label, int j) { return "(" + std::string(label) + ") j=" + std::to_string(j); };

    for (int j = 1; j < p.n; ++j) r.entries.push_back(margin("i", tag("i", j), mu(j + 1), X(j) * X(j), p.mult));
    for (int j = 1; j < p.n; ++j) r.entries.push_back(margin("ii", tag("ii", j), X(j), mu(j), p.mult));
    for (int j = 1; j <= p.n; ++j) r.entries.push_back(margin("iii", tag("iii", j), p.m * T(j) * mu(j), 1.0, p.mult));
    r.entries.push_back(margin("iv", "(iv) mu_1 < mu_0^2", mu(1), r.mu0 * r.mu0, p.mult));
    for (int j = 1; j <= p.n; ++j) r.entries.push_back(strict(tag("v", j), eps, mu(j) * mu(j)));
    for (int j = 1; j < p.n; ++j) {
        const double rhs = p.gamma * std::pow(static_cast<double>(p.levels[j - 1]), -tau);
        r.entries.push_back(margin("vi", tag("vi", j), X(j), rhs, p.mult));
    }
    for (int j = 1; j <= p.n; ++j) r.entries.push_back(margin("vii", tag("vii", j), T(j) * mu(j), 1.0, p.mult));
    for (int j = 1; j <= p.n; ++j) r.entries.push_back(margin("viii", tag("viii", j), mu(j), 1.0, p.mult));
    for (int j = 2; j <= p.n; ++j) r.entries.push_back(margin("ix", tag("ix", j), mu(j), mu(j - 1), p.mult));
    r.entries.push_back(margin("x", "(x) mu_0 < gamma", r.mu0, p.gamma, p.mult));
    r.entries.push_back(margin("xi", "(xi) mu_0 < 1", r.mu0, 1.0, p.mult));

    // (x) and (xi) come first, as in the monitor; then the listed order.
    const std::size_t k = r.entries.size();
    for (std::size_t i : {k - 2, k - 1})
        if (!r.entries[i].holds() && r.passed) {
            r.passed = false;
            r.first_failure = r.entries[i].name;
        }
    for (const auto &c : r.entries)
        if (!c.holds() && r.passed) {
            r.passed = false;
            r.first_failure = c.name;
        }
    return r;
}

double RestrainFrame::chain_bound() const
{
    double s = 0.0;
    for (double d : interval_drift) s += d;
    for (double d : displacement) s += 2.0 * d;
    return s;
}

std::string RestrainFrame::text() const
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "n: " << n << "\n";
    os << "epsilon: " << epsilon << "\n";
    os << "tau: " << tau.str() << "\n";
    os << "gamma: " << gamma << "\n";
    os << "m: " << m << "\n";
    os << "multipliers: " << mult.str() << "\n";
    os << "approximate: " << (approximate ? "true" : "false") << "\n";
    for (std::size_t j = 0; j < mu.size(); ++j) os << "mu_" << j << ": " << mu[j] << "\n";
    for (std::size_t j = 0; j < times.size(); ++j) os << "t_" << j << ": " << times[j] << "\n";
    for (std::size_t j = 0; j < vectors.size(); ++j)
        os << "omega_" << j + 1 << ": (" << format_rational_vector(vectors[j].omega) << ") T=" << vectors[j].period.str()
           << "\n";
    for (std::size_t j = 0; j < centers.size(); ++j) {
        os << "I_" << j + 1 << ":";
        for (Eigen::Index i = 0; i < centers[j].size(); ++i) os << " " << centers[j](i);
        os << "\n";
    }
    for (std::size_t j = 0; j < interval_drift.size(); ++j) os << "drift_" << j << ": " << interval_drift[j] << "\n";
    for (std::size_t j = 0; j < displacement.size(); ++j) os << "displacement_" << j + 1 << ": " << displacement[j] << "\n";
    os << "chain_bound: " << chain_bound() << "\n";
    for (const auto &c : condition_log)
        os << "condition: " << c.name << " lhs=" << c.lhs << " rhs=" << c.rhs << " mult=" << c.multiplier << " "
           << (c.holds() ? "holds" : "FAILS") << "\n";
    for (const auto &note : notes) os << "note: " << note << "\n";
    os << "trajectory_hash: " << trajectory_hash << "\n";
    os << "config_hash: " << config_hash << "\n";
    return os.str();
}

namespace
{

// Normalized action at level j (1-based) or std::nullopt outside the
// domain of the transform.
std::optional<Eigen::VectorXd> level_action(const RestrainFrame &f, int j, const TrajectoryRecord &traj, std::size_t s)
{
    const Eigen::VectorXd &I = traj.action[s];
    if (j == 0) return I;
    const auto &disp = f.inverse_displacement[j - 1];
    if (disp.empty()) return I;
    const double mu = f.mu[j];
    const Eigen::VectorXd J = (I - f.centers[j - 1]) / mu;
    if (sup_norm(J) > disp.front().domain().R) return std::nullopt;
    Eigen::VectorXd out = I;
    for (int i = 0; i < traj.n; ++i) out(i) += mu * evaluate(disp[i], traj.theta[s], J);
    return out;
}

struct Roundtrip {
    std::vector<Series> inverse_action;
    double error = 0.0;
};

// Action displacement of Psi^{-1} plus the worst roundtrip error
// Psi(Psi^{-1}(x)) - x over the given samples (unscaled units).
Roundtrip roundtrip(const NormalFormResult &nf, const TrajectoryRecord &traj, const std::vector<std::size_t> &probe)
{
    const Series &like = nf.scaled_g;
    const NearIdentityTransform inv = nf.transform.inverse();
    Roundtrip r;
    r.inverse_action = inv.action_displacement(like);
    const auto inv_angle = inv.angle_displacement(like);
    const auto fwd_action = nf.transform.action_displacement(like);
    const int n = traj.n;
    for (std::size_t s : probe) {
        const Eigen::VectorXd J = (traj.action[s] - nf.center) / nf.mu;
        if (sup_norm(J) > like.domain().R) continue;
        Eigen::VectorXd th = traj.theta[s];
        Eigen::VectorXd K = J;
        for (int i = 0; i < n; ++i) {
            th(i) += evaluate(inv_angle[i], traj.theta[s], J);
            K(i) += evaluate(r.inverse_action[i], traj.theta[s], J);
        }
        if (sup_norm(K) > like.domain().R) {
            r.error = kNever;
            continue;
        }
        Eigen::VectorXd back = K;
        for (int i = 0; i < n; ++i) back(i) += evaluate(fwd_action[i], th, K);
        r.error = std::max(r.error, nf.mu * sup_norm(back - J));
    }
    return r;
}

std::string frame_config_hash(const RestrainConfig &cfg, const TimeBudget &budget)
{
    std::ostringstream os;
    os << std::setprecision(17) << "tau=" << cfg.tau.str() << ";gamma=" << cfg.gamma << ";" << cfg.mult.str()
       << ";m=" << budget.m << ";tau_m=" << budget.tau_m << ";nf_m=" << cfg.normal_form.m
       << ";lie=" << cfg.normal_form.lie_order << ";rho=" << cfg.normal_form.rho
       << ";normalize=" << cfg.normalize;
    return hex64(fnv1a(os.str()));
}

} // namespace

Eigen::VectorXd normalized_action(const RestrainFrame &f, int j, const TrajectoryRecord &traj, std::size_t s)
{
    if (j < 0 || j > static_cast<int>(f.inverse_displacement.size())) throw ConfigError("level out of range");
    if (s >= traj.size()) throw ConfigError("sample out of range");
    auto a = level_action(f, j, traj, s);
    if (!a) throw DomainError("sample outside the domain of the level transform");
    return *a;
}

RestrainOutcome try_restrain(const HamiltonianSystem &H, const TrajectoryRecord &traj, const TimeBudget &budget,
                             const RestrainConfig &cfg)
{
    H.validate();
    budget.validate();
    const int n = H.n();
    if (n < 2) throw ConfigError("restrain monitor needs n >= 2");
    if (traj.n != n || traj.size() == 0) throw ConfigError("trajectory does not match the system");
    if (!(H.epsilon > 0.0 && H.epsilon < 1.0)) throw ConfigError("restrain monitor needs 0 < eps < 1");
    if (!(cfg.gamma > 0.0)) throw ConfigError("gamma must be positive");

    const ExponentSet E = exponents(n, cfg.tau);
    const double eps = H.epsilon;
    const double tau = cfg.tau.to_double();
    const Multipliers &mult = cfg.mult;

    RestrainOutcome out;
    RestrainFrame &f = out.frame;
    f.n = n;
    f.epsilon = eps;
    f.tau = cfg.tau;
    f.gamma = cfg.gamma;
    f.m = budget.m;
    f.mult = mult;
    f.trajectory_hash = hex64(fnv1a(traj.csv()));
    f.config_hash = frame_config_hash(cfg, budget);

    const double mu0 = mult.mu0 * std::pow(eps, E.b.to_double());
    f.mu.push_back(mu0);
    f.times.push_back(traj.times.front());
    f.samples.push_back(0);

    auto fail = [&](const std::string &what) {
        out.certified = false;
        out.failed_condition = what;
        out.trace.push_back("fail: " + what);
        return out;
    };
    // Logs c; returns false when it fails.
    auto check = [&](const ConditionMargin &c) {
        f.condition_log.push_back(c);
        std::ostringstream os;
        os << std::setprecision(6) << c.name << ": " << c.lhs << " < " << c.multiplier << " * " << c.rhs << " "
           << (c.holds() ? "holds" : "FAILS");
        out.trace.push_back(os.str());
        return c.holds();
    };

    if (!check(margin("x", "(x) mu_0 < gamma", mu0, cfg.gamma, mult))) return fail("(x) mu_0 < gamma");
    if (!check(margin("xi", "(xi) mu_0 < 1", mu0, 1.0, mult))) return fail("(xi) mu_0 < 1");

    // Samples up to tau_m.
    std::size_t last = 0;
    while (last + 1 < traj.size() && traj.times[last + 1] <= budget.tau_m * (1.0 + 1e-12)) ++last;
    if (traj.times[last] < budget.tau_m * (1.0 - 1e-9))
        out.trace.push_back("note: trajectory ends before tau_m");

    const SeriesEvaluator h_eval(H.integrable);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(n), gt(n), gI(n);
    auto grad_h = [&](const Eigen::VectorXd &I) {
        h_eval.value_and_gradient(zero, I, gt, gI);
        return Eigen::VectorXd(gI);
    };

    for (int j = 0; j < n; ++j) {
        const std::size_t sj = f.samples[j];
        const auto base_opt = level_action(f, j, traj, sj);
        if (!base_opt) return fail("(C_" + std::to_string(j) + ") I^j(t_j) outside the level domain");
        const Eigen::VectorXd base = *base_opt;
        const ResonanceFrame frame_j = ResonanceFrame::build(n, f.vectors);
        const Eigen::MatrixXd Pi = j == 0 ? Eigen::MatrixXd::Identity(n, n) : projections(frame_j).pi;
        const double mu_j = f.mu[j];
        double c_j = mult.c * mu0;
        if (j > 0) {
            const double T = f.vectors[j - 1].period.to_double();
            const double L = static_cast<double>(frame_j.l_index);
            c_j = mult.c * std::pow(T * mu_j / L, tau);
            const std::string tj = " j=" + std::to_string(j);
            if (!check(margin("ii", "(ii) c_j < mu_j" + tj, c_j, mu_j, mult))) return fail("(ii) c_j < mu_j" + tj);
            if (!check(margin("vi", "(vi) c_j < gamma L_j^-tau" + tj, c_j, cfg.gamma * std::pow(L, -tau), mult)))
                return fail("(vi) c_j < gamma L_j^-tau" + tj);
        }

        // Scan for the escape of |Pi_j grad h(Gamma_j)| above steep * c_j^2.
        std::size_t next = last;
        bool escaped = false;
        double drift = 0.0;
        for (std::size_t s = sj; s <= last; ++s) {
            const auto a = level_action(f, j, traj, s);
            if (!a) return fail("(C_" + std::to_string(j) + ") normalized solution left the level domain");
            drift = std::max(drift, sup_norm(*a - base));
            const Eigen::VectorXd gamma_pt = base + Pi * (*a - base);
            if (sup_norm(gamma_pt - base) >= c_j)
                return fail("(steep_" + std::to_string(j) + ") Gamma_j left B(Gamma_j(t_j), c_j) before escaping");
            if (sup_norm(Pi * grad_h(gamma_pt)) > mult.steep * c_j * c_j) {
                next = s;
                escaped = true;
                break;
            }
        }
        if (!escaped)
            f.notes.push_back("level " + std::to_string(j) + ": no escape before tau_m, t_" + std::to_string(j + 1) +
                              " set to the budget boundary");
        f.interval_drift.push_back(drift);
        if (!check(strict("(C_" + std::to_string(j) + ") |I^j(t) - I^j(t_j)| < mu_j", drift, mu_j)))
            return fail("(C_" + std::to_string(j) + ") |I^j(t) - I^j(t_j)| < mu_j");

        const Eigen::VectorXd center = *level_action(f, j, traj, next);
        const Eigen::VectorXd v = grad_h(center);
        const double a_next = E.a_list[j].to_double();
        const double Q = mult.Q * std::pow(eps, -a_next * (n - 1));
        const DirichletResult D = dirichlet_approx(v, Q);
        const double T = D.omega.period.to_double();
        const double mu_next = mult.mu * std::pow(eps, a_next) / T;
        const std::string tn = " j=" + std::to_string(j + 1);
        {
            std::ostringstream os;
            os << std::setprecision(10) << "level " << j + 1 << ": t=" << traj.times[next] << " omega=("
               << format_rational_vector(D.omega.omega) << ") T=" << D.omega.period.str() << " mu=" << mu_next;
            out.trace.push_back(os.str());
        }

        if (!check(strict("(C_" + std::to_string(j) + ") |grad h(I_{j+1}) - omega_{j+1}| < mu_{j+1}",
                          sup_norm(v - D.omega.value()), mu_next)))
            return fail("(C_" + std::to_string(j) + ") |grad h(I_{j+1}) - omega_{j+1}| < mu_{j+1}");

        std::vector<RationalVector> rows;
        for (const auto &w : f.vectors) rows.push_back(w.omega);
        rows.push_back(D.omega.omega);
        if (rational_rank(rows) != j + 1) return fail("(independence) omega_1..omega_" + std::to_string(j + 1));

        bool ok = true;
        if (j == 0) {
            ok &= check(margin("iv", "(iv) mu_1 < mu_0^2", mu_next, mu0 * mu0, mult));
            ok &= check(margin("ix", "(ix) mu_1 < mu_0", mu_next, mu0, mult));
        } else {
            const double Tj = f.vectors[j - 1].period.to_double();
            const double X = std::pow(Tj * mu_j / static_cast<double>(frame_j.l_index), tau);
            ok &= check(margin("i", "(i) mu_{j+1} < (T_j mu_j / L_j)^{2 tau}" + tn, mu_next, X * X, mult));
            ok &= check(margin("ix", "(ix) mu_{j+1} < mu_j" + tn, mu_next, mu_j, mult));
            ok &= check(margin("B", "(B) |omega_{j+1} - omega_j| < mu_j" + tn,
                               sup_norm(D.omega.value() - f.vectors[j - 1].value()), mu_j, mult));
        }
        ok &= check(margin("nesting", "(nesting) 2 mu_{j+1} < mu_j" + tn, 2.0 * mu_next, mu_j, mult));
        ok &= check(margin("vii", "(vii) T mu < 1" + tn, T * mu_next, 1.0, mult));
        ok &= check(margin("iii", "(iii) m T mu < 1" + tn, budget.m * T * mu_next, 1.0, mult));
        ok &= check(margin("viii", "(viii) mu < 1" + tn, mu_next, 1.0, mult));
        ok &= check(strict("(v) eps < mu^2" + tn, eps, mu_next * mu_next));
        if (!ok) {
            for (const auto &c : f.condition_log)
                if (!c.holds()) return fail(c.name);
        }

        f.vectors.push_back(D.omega);
        f.mu.push_back(mu_next);
        f.times.push_back(traj.times[next]);
        f.samples.push_back(next);
        f.centers.push_back(center);

        // Level j+1 transform.
        std::vector<Series> inverse_action;
        if (cfg.normalize) {
            std::vector<double> schedule(f.mu.begin() + 1, f.mu.end());
            try {
                const ResonanceFrame frame_next = ResonanceFrame::build(n, f.vectors);
                const NormalFormResult nf = local_normal_form(H, center, frame_next, schedule, cfg.normal_form);
                std::vector<std::size_t> probe;
                const std::size_t span = last - next;
                for (int k = 0; k <= 8; ++k) probe.push_back(next + span * static_cast<std::size_t>(k) / 8);
                Roundtrip rt = roundtrip(nf, traj, probe);
                if (rt.error > mu_next / 10.0) {
                    f.approximate = true;
                    std::ostringstream os;
                    os << "level " << j + 1 << ": roundtrip error " << rt.error << " above mu/10, raw actions used";
                    f.notes.push_back(os.str());
                } else {
                    inverse_action = std::move(rt.inverse_action);
                }
            } catch (const Error &err) {
                f.approximate = true;
                f.notes.push_back("level " + std::to_string(j + 1) + ": normal form unavailable (" + err.what() +
                                  "), raw actions used");
            }
        } else {
            f.approximate = true;
        }
        f.inverse_displacement.push_back(std::move(inverse_action));

        // Observed |I^{j+1} - I| on the remaining samples.
        double disp = 0.0;
        for (std::size_t s = next; s <= last; ++s) {
            const auto a = level_action(f, j + 1, traj, s);
            if (!a) break;
            disp = std::max(disp, sup_norm(*a - traj.action[s]));
        }
        f.displacement.push_back(disp);
    }

    // Final interval [t_n, tau_m].
    const std::size_t sn = f.samples.back();
    const auto base_opt = level_action(f, n, traj, sn);
    double drift = 0.0;
    if (base_opt) {
        for (std::size_t s = sn; s <= last; ++s) {
            const auto a = level_action(f, n, traj, s);
            if (!a) return fail("(C_" + std::to_string(n) + ") normalized solution left the level domain");
            drift = std::max(drift, sup_norm(*a - *base_opt));
        }
    }
    f.interval_drift.push_back(drift);
    f.times.push_back(traj.times[last]);
    out.certified = true;
    out.trace.push_back("certified");
    return out;
}

bool verify_certificate(const RestrainFrame &f, const HamiltonianSystem &H, const TrajectoryRecord &traj,
                        std::string *why)
{
    auto reject = [&](const std::string &w) {
        if (why) *why = w;
        return false;
    };
    const int n = f.n;
    if (n != H.n() || n != traj.n) return reject("dimension mismatch");
    if (f.trajectory_hash != hex64(fnv1a(traj.csv()))) return reject("trajectory hash mismatch");
    if (static_cast<int>(f.mu.size()) != n + 1 || static_cast<int>(f.vectors.size()) != n ||
        static_cast<int>(f.samples.size()) != n + 1 || static_cast<int>(f.times.size()) != n + 2 ||
        static_cast<int>(f.inverse_displacement.size()) != n)
        return reject("incomplete frame");

    const ExponentSet E = exponents(n, f.tau);
    const double eps = f.epsilon;
    const double tau = f.tau.to_double();
    const Multipliers &mult = f.mult;
    const double mu0 = mult.mu0 * std::pow(eps, E.b.to_double());
    if (std::abs(f.mu[0] - mu0) > 1e-12 * mu0) return reject("mu_0 does not match eps^b");
    if (!(mu0 < mult.of("x") * f.gamma) || !(mu0 < mult.of("xi"))) return reject("(x)/(xi)");

    for (int j = 1; j <= n + 1; ++j)
        if (!(f.times[j] >= f.times[j - 1])) return reject("times are not monotone");

    const SeriesEvaluator h_eval(H.integrable);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(n), gt(n), gI(n);

    const std::size_t last = [&] {
        std::size_t s = 0;
        while (s + 1 < traj.size() && traj.times[s + 1] <= f.times.back()) ++s;
        return s;
    }();

    for (int j = 0; j < n; ++j) {
        const std::size_t a = f.samples[j], b = f.samples[j + 1];
        if (b < a || traj.times[b] != f.times[j + 1]) return reject("sample/time mismatch");
        const auto base = level_action(f, j, traj, a);
        if (!base) return reject("level base outside domain");
        for (std::size_t s = a; s <= b; ++s) {
            const auto x = level_action(f, j, traj, s);
            if (!x || !(sup_norm(*x - *base) < f.mu[j])) return reject("(C_" + std::to_string(j) + ") drift");
        }
        const auto c = level_action(f, j, traj, b);
        if (!c || sup_norm(*c - f.centers[j]) > 1e-12 * (1.0 + sup_norm(f.centers[j])))
            return reject("center mismatch");
        h_eval.value_and_gradient(zero, *c, gt, gI);
        const PeriodicVector &w = f.vectors[j];
        const double T = w.period.to_double();
        const double mu = mult.mu * std::pow(eps, E.a_list[j].to_double()) / T;
        if (std::abs(f.mu[j + 1] - mu) > 1e-12 * mu) return reject("mu_" + std::to_string(j + 1) + " mismatch");
        if (!(sup_norm(gI - w.value()) < mu)) return reject("(C_" + std::to_string(j) + ") frequency");
        if (!(eps < mu * mu)) return reject("(v) eps < mu^2");
        if (!(T * mu < mult.of("vii"))) return reject("(vii)");
        if (!(f.m * T * mu < mult.of("iii"))) return reject("(iii)");
        if (!(mu < mult.of("viii"))) return reject("(viii)");
        if (!(mu < mult.of("ix") * f.mu[j])) return reject("(ix)");
        if (!(2.0 * mu < mult.of("nesting") * f.mu[j])) return reject("(nesting)");
        if (j == 0) {
            if (!(mu < mult.of("iv") * mu0 * mu0)) return reject("(iv)");
        } else {
            const ResonanceFrame fr = ResonanceFrame::build(n, {f.vectors.begin(), f.vectors.begin() + j});
            const double X = std::pow(f.vectors[j - 1].period.to_double() * f.mu[j] / static_cast<double>(fr.l_index), tau);
            if (!(mu < mult.of("i") * X * X)) return reject("(i)");
            if (!(sup_norm(w.value() - f.vectors[j - 1].value()) < mult.of("B") * f.mu[j])) return reject("(B)");
        }
    }
    std::vector<RationalVector> rows;
    for (const auto &w : f.vectors) rows.push_back(w.omega);
    if (rational_rank(rows) != n) return reject("frequencies are dependent");
    (void)last;
    return true;
}

StabilityCheck restrained_implies_stable(const RestrainFrame &f, const TrajectoryRecord &traj)
{
    if (f.mu.empty()) throw ConfigError("frame has no radii");
    if (traj.size() == 0) throw ConfigError("empty trajectory");
    StabilityCheck c;
    c.bound = static_cast<double>((f.n + 1) * (f.n + 1)) * f.mu[0];
    c.chain_bound = f.chain_bound();
    const double t_end = f.times.empty() ? kNever : f.times.back();
    for (std::size_t s = 0; s < traj.size() && traj.times[s] <= t_end; ++s) {
        const double d = sup_norm(traj.action[s] - traj.action[0]);
        c.max_displacement = std::max(c.max_displacement, d);
        if (c.holds && !(d < c.bound)) {
            c.holds = false;
            c.witness_time = traj.times[s];
        }
    }
    return c;
}

} // namespace effstab
