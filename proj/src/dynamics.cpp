#include <effstab/dynamics.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <effstab/errors.hpp>
#include <effstab/series_io.hpp>

namespace effstab
{
namespace
{

/// Compiled H = h + eps f with the pieces each scheme needs.
class Flow
{
public:
    Flow(const HamiltonianSystem &H, Scheme requested)
        : n_(H.n()), eps_(H.epsilon), h_(H.integrable), f_(H.perturbation), center_(H.integrable.center()),
          R_(H.integrable.domain().R)
    {
        const bool separable = H.perturbation.action_independent() || H.epsilon == 0.0;
        scheme_ = requested;
        if (scheme_ == Scheme::automatic) scheme_ = separable ? Scheme::leapfrog : Scheme::implicit_midpoint;
        if (scheme_ == Scheme::leapfrog && !separable)
            throw ConfigError("leapfrog needs a perturbation independent of the actions");
    }

    Scheme scheme() const { return scheme_; }

    double energy(const Eigen::VectorXd &t, const Eigen::VectorXd &a) const
    {
        return h_.value(t, a) + (eps_ != 0.0 ? eps_ * f_.value(t, a) : 0.0);
    }

    bool inside(const Eigen::VectorXd &a) const { return (a - center_).cwiseAbs().maxCoeff() <= R_; }

    // theta' = dH/dI, I' = -dH/dtheta
    void field(const Eigen::VectorXd &t, const Eigen::VectorXd &a, Eigen::VectorXd &dt, Eigen::VectorXd &da) const
    {
        h_.value_and_gradient(t, a, gt_, ga_);
        dt = ga_;
        da = -gt_;
        if (eps_ != 0.0 && !f_.empty()) {
            f_.value_and_gradient(t, a, gt_, ga_);
            dt += eps_ * ga_;
            da -= eps_ * gt_;
        }
    }

    void step(Eigen::VectorXd &t, Eigen::VectorXd &a, double h, double tol, int max_it) const
    {
        if (scheme_ == Scheme::leapfrog) {
            kick(t, a, 0.5 * h);
            h_.value_and_gradient(t, a, gt_, ga_);
            t += h * ga_;
            kick(t, a, 0.5 * h);
            return;
        }
        // z1 = z0 + h J grad H((z0 + z1) / 2) by fixed-point iteration.
        Eigen::VectorXd dt, da;
        field(t, a, dt, da);
        Eigen::VectorXd t1 = t + h * dt, a1 = a + h * da;
        for (int it = 0; it < max_it; ++it) {
            field(0.5 * (t + t1), 0.5 * (a + a1), dt, da);
            const Eigen::VectorXd tn = t + h * dt, an = a + h * da;
            const double change = std::max((tn - t1).cwiseAbs().maxCoeff(), (an - a1).cwiseAbs().maxCoeff());
            t1 = tn;
            a1 = an;
            if (change <= tol * (1.0 + std::max(t1.cwiseAbs().maxCoeff(), a1.cwiseAbs().maxCoeff()))) {
                t = t1;
                a = a1;
                return;
            }
        }
        throw IntegrationError("implicit midpoint iteration did not converge in " + std::to_string(max_it) +
                               " iterations");
    }

private:
    void kick(const Eigen::VectorXd &t, Eigen::VectorXd &a, double h) const
    {
        if (eps_ == 0.0 || f_.empty()) return;
        f_.angle_gradient(t, a, gt_);
        a -= (h * eps_) * gt_;
    }

    int n_;
    double eps_;
    SeriesEvaluator h_, f_;
    Eigen::VectorXd center_;
    double R_;
    Scheme scheme_ = Scheme::automatic;
    mutable Eigen::VectorXd gt_, ga_;
};

Eigen::VectorXd reduce(const Eigen::VectorXd &t)
{
    Eigen::VectorXd r = t;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        r(i) -= std::floor(r(i));
        if (r(i) >= 1.0) r(i) = 0.0;
    }
    return r;
}

bool finite(const Eigen::VectorXd &v)
{
    return v.allFinite();
}

void check_start(const HamiltonianSystem &H, const Eigen::VectorXd &theta0, const Eigen::VectorXd &I0)
{
    H.validate();
    if (theta0.size() != H.n() || I0.size() != H.n()) throw ConfigError("initial state has the wrong dimension");
    if (!finite(theta0) || !finite(I0)) throw ConfigError("initial state is not finite");
    const Eigen::VectorXd gap = (I0 - H.integrable.center()).cwiseAbs();
    if (gap.maxCoeff() > H.integrable.domain().R) throw DomainError("initial action lies outside the domain");
}

} // namespace

std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::automatic:
        return "auto";
    case Scheme::leapfrog:
        return "leapfrog";
    case Scheme::implicit_midpoint:
        return "midpoint";
    }
    return "auto";
}

Scheme parse_scheme(const std::string &name)
{
    if (name == "auto") return Scheme::automatic;
    if (name == "leapfrog") return Scheme::leapfrog;
    if (name == "midpoint") return Scheme::implicit_midpoint;
    throw ConfigError("unknown scheme '" + name + "' (auto, leapfrog, midpoint)");
}

void IntegratorConfig::validate() const
{
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("integration step must be positive");
    if (stride < 1) throw ConfigError("stride must be at least 1");
    if (!(energy_tolerance > 0.0)) throw ConfigError("energy tolerance must be positive");
    if (!(iteration_tolerance > 0.0) || max_iterations < 1) throw ConfigError("bad fixed-point settings");
}

std::string IntegratorConfig::canonical() const
{
    return "step=" + format_real(step) + ";scheme=" + to_string(scheme) + ";energy_tolerance=" +
           format_real(energy_tolerance) + ";stride=" + std::to_string(stride) +
           ";iteration_tolerance=" + format_real(iteration_tolerance) +
           ";max_iterations=" + std::to_string(max_iterations) + ";seed=" + std::to_string(seed);
}

std::string IntegratorConfig::hash() const
{
    return hex64(fnv1a(canonical()));
}

std::uint64_t fnv1a(const std::string &data)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string TrajectoryRecord::csv() const
{
    std::ostringstream os;
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",theta_" << i;
    for (int i = 1; i <= n; ++i) os << ",I_" << i;
    os << ",H,config_hash\n";
    for (std::size_t s = 0; s < times.size(); ++s) {
        os << format_real(times[s]);
        for (int i = 0; i < n; ++i) os << ',' << format_real(theta[s](i));
        for (int i = 0; i < n; ++i) os << ',' << format_real(action[s](i));
        os << ',' << format_real(energy[s]) << ',' << config_hash << '\n';
    }
    return os.str();
}

TimeBudget TimeBudget::make(const Regularity &r, int m, double cap)
{
    if (m < 1) throw ConfigError("m must be at least 1");
    TimeBudget b;
    b.m = m;
    b.regularity = r;
    if (const auto *g = std::get_if<Gevrey>(&r))
        b.tau_m = std::exp(std::pow(m, 1.0 / g->alpha));
    else
        b.tau_m = std::pow(static_cast<double>(m), std::get<FiniteDiff>(r).k_star);
    b.tau_m = std::min(b.tau_m, cap);
    return b;
}

void TimeBudget::validate() const
{
    if (m < 1 || !(tau_m > 0.0)) throw ConfigError("time budget needs m >= 1 and tau_m > 0");
    const double expected = make(regularity, m).tau_m;
    if (tau_m > expected * (1.0 + 1e-12)) throw ConfigError("tau_m exceeds the value fixed by the regularity");
}

TrajectoryRecord integrate(const HamiltonianSystem &H, const Eigen::VectorXd &theta0, const Eigen::VectorXd &I0,
                           double t_max, const IntegratorConfig &cfg, const StepObserver &observer)
{
    cfg.validate();
    check_start(H, theta0, I0);
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be finite and nonnegative");

    const Flow flow(H, cfg.scheme);
    TrajectoryRecord rec;
    rec.n = H.n();
    rec.scheme = flow.scheme();
    rec.seed = cfg.seed;
    rec.config_hash = cfg.hash();

    const auto steps = static_cast<long long>(std::ceil(t_max / cfg.step - 1e-9));
    const double h = steps > 0 ? t_max / static_cast<double>(steps) : 0.0;
    Eigen::VectorXd t = theta0, a = I0;
    const double e0 = flow.energy(t, a);
    const double escale = std::max(std::abs(e0), 1e-12);
    auto record = [&](double time, double e) {
        rec.times.push_back(time);
        rec.theta.push_back(reduce(t));
        rec.action.push_back(a);
        rec.energy.push_back(e);
    };
    record(0.0, e0);

    for (long long s = 1; s <= steps; ++s) {
        flow.step(t, a, h, cfg.iteration_tolerance, cfg.max_iterations);
        if (!finite(t) || !finite(a)) throw IntegrationError("non-finite state at step " + std::to_string(s));
        const double time = static_cast<double>(s) * h;
        const double e = flow.energy(t, a);
        const double dev = std::abs(e - e0) / escale;
        rec.max_energy_deviation = std::max(rec.max_energy_deviation, dev);
        const bool out = !flow.inside(a);
        const bool stop = observer && !observer(time, t, a);
        if (s % cfg.stride == 0 || s == steps || out || stop) record(time, e);
        if (out) {
            rec.escaped = true;
            break;
        }
        if (stop) break;
    }
    rec.energy_flag = rec.max_energy_deviation > cfg.energy_tolerance;
    return rec;
}

double reversibility_error(const HamiltonianSystem &H, const Eigen::VectorXd &theta0, const Eigen::VectorXd &I0,
                           double t_end, const IntegratorConfig &cfg)
{
    cfg.validate();
    check_start(H, theta0, I0);
    const Flow flow(H, cfg.scheme);
    const auto steps = static_cast<long long>(std::ceil(t_end / cfg.step - 1e-9));
    const double h = t_end / static_cast<double>(std::max(steps, 1LL));
    Eigen::VectorXd t = theta0, a = I0;
    for (long long s = 0; s < steps; ++s) flow.step(t, a, h, cfg.iteration_tolerance, cfg.max_iterations);
    for (long long s = 0; s < steps; ++s) flow.step(t, a, -h, cfg.iteration_tolerance, cfg.max_iterations);
    return std::max((t - theta0).cwiseAbs().maxCoeff(), (a - I0).cwiseAbs().maxCoeff());
}

double escape_time(const TrajectoryRecord &traj, const Eigen::VectorXd &center, double radius)
{
    if (traj.times.empty()) throw ConfigError("empty trajectory");
    if (!(radius >= 0.0)) throw ConfigError("radius must be nonnegative");
    if (center.size() != traj.n) throw ConfigError("center has the wrong dimension");
    const double start = (traj.action.front() - center).cwiseAbs().maxCoeff();
    if (start > radius) throw DomainError("trajectory starts outside the ball");
    for (std::size_t s = 0; s < traj.size(); ++s)
        if ((traj.action[s] - center).cwiseAbs().maxCoeff() >= radius) return traj.times[s];
    return kNever;
}

TransverseDrift transverse_drift(const TrajectoryRecord &traj, const ResonanceFrame &frame, double from_time)
{
    if (traj.times.empty()) throw ConfigError("empty trajectory");
    if (frame.n != traj.n) throw ConfigError("frame dimension does not match the trajectory");
    if (from_time < traj.times.front() - 1e-12 || from_time > traj.times.back() + 1e-12)
        throw ConfigError("from_time lies outside the trajectory");
    std::size_t s0 = 0;
    while (s0 + 1 < traj.size() && traj.times[s0] < from_time - 1e-12) ++s0;
    const Eigen::MatrixXd P = frame.j() == 0 ? Eigen::MatrixXd::Zero(traj.n, traj.n) : projections(frame).pi_perp;
    TransverseDrift out;
    for (std::size_t s = s0; s < traj.size(); ++s) {
        const double d = (P * (traj.action[s] - traj.action[s0])).cwiseAbs().maxCoeff();
        out.per_sample.push_back(d);
        out.max = std::max(out.max, d);
    }
    return out;
}

DriftResult drift_time(const HamiltonianSystem &H, const Eigen::VectorXd &theta0, const Eigen::VectorXd &I0,
                       double threshold, double t_cap, const IntegratorConfig &cfg)
{
    if (!(threshold > 0.0)) throw ConfigError("drift threshold must be positive");
    DriftResult res;
    IntegratorConfig quiet = cfg;
    // Only the crossing matters; keep memory flat on long runs.
    quiet.stride = std::max(cfg.stride, 1 << 20);
    const TrajectoryRecord rec = integrate(H, theta0, I0, t_cap, quiet,
                                           [&](double time, const Eigen::VectorXd &, const Eigen::VectorXd &a) {
                                               const double d = (a - I0).cwiseAbs().maxCoeff();
                                               res.max_displacement = std::max(res.max_displacement, d);
                                               res.t_reached = time;
                                               if (d >= threshold) {
                                                   res.time = time;
                                                   return false;
                                               }
                                               return true;
                                           });
    res.escaped = rec.escaped;
    return res;
}

} // namespace effstab
