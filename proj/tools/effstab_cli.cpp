// effstab command-line front end. Exit codes: 0 success, 2 when a report
// finds a failing condition, 1 on errors.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include <effstab/dynamics.hpp>
#include <effstab/errors.hpp>
#include <effstab/harness.hpp>
#include <effstab/lattice.hpp>
#include <effstab/morse.hpp>
#include <effstab/normal_form.hpp>
#include <effstab/restrain.hpp>
#include <effstab/series_io.hpp>

using namespace effstab;

namespace
{

constexpr int kConditionFailed = 2;

Eigen::VectorXd parse_vector(const std::string &text)
{
    std::vector<double> xs;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            xs.push_back(std::stod(part));
        } catch (const std::exception &) {
            throw ConfigError("bad number '" + part + "' in '" + text + "'");
        }
    }
    if (xs.empty()) throw ConfigError("empty vector");
    return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

// "1/2,1/2;1/2,0" -> periodic vectors.
std::vector<PeriodicVector> parse_frame(const std::string &text)
{
    std::vector<PeriodicVector> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ';')) out.push_back(period_of(parse_rational_vector(part)));
    if (out.empty()) throw ConfigError("empty frame");
    return out;
}

Multipliers parse_multipliers(const std::vector<std::string> &items)
{
    std::string text;
    for (const auto &item : items) text += "mult." + item + "\n";
    return ExperimentConfig::parse(text).mult;
}

struct SystemOptions {
    std::string system;
    int n = 0;
    std::string h_file;
    std::string f_file;
    double eps = 0.0;

    void add(CLI::App *app, bool need_eps = true)
    {
        app->add_option("--system", system, "builtin family");
        app->add_option("--n", n, "dimension for builtins");
        app->add_option("--h-file", h_file, "integrable part (series file)");
        app->add_option("--f-file", f_file, "perturbation (series file)");
        if (need_eps) app->add_option("--eps", eps, "perturbation size");
    }

    HamiltonianSystem build() const
    {
        if (!system.empty()) return builtin_system(system, n, eps);
        if (h_file.empty()) throw ConfigError("need --system or --h-file");
        const SeriesFile h = load_series(h_file);
        Series f = f_file.empty() ? Series(h.series.domain(), 0, h.series.d_max()) : load_series(f_file).series;
        HamiltonianSystem H{h.series, f, eps, h.regularity.value_or(Regularity{Gevrey{}})};
        H.validate();
        return H;
    }
};

// theta uniform on the torus and I uniform in B(center, R/2), from the seed.
void starting_point(const HamiltonianSystem &H, std::uint64_t seed, Eigen::VectorXd &theta, Eigen::VectorXd &I)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    const int n = H.n();
    const double R = H.integrable.domain().R;
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    theta.resize(n);
    I.resize(n);
    for (int i = 0; i < n; ++i) theta(i) = unit();
    for (int i = 0; i < n; ++i) I(i) = H.integrable.center()(i) + R * (unit() - 0.5);
}

void write_text(const std::string &path, const std::string &text)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

std::string rational_line(const std::string &name, const Rational &r)
{
    std::ostringstream os;
    os << name << " = " << r.str() << " (" << std::setprecision(17) << r.to_double() << ")";
    return os.str();
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"effstab: effective stability workbench"};
    app.require_subcommand(1);

    // approx
    auto *approx = app.add_subcommand("approx", "periodic approximation of a frequency vector");
    std::string approx_v;
    double approx_Q = 0.0;
    long approx_cap = 0;
    approx->add_option("--v", approx_v, "vector, comma separated")->required();
    approx->add_option("--Q", approx_Q, "Dirichlet parameter Q > 1")->required();
    approx->add_option("--search-cap", approx_cap, "bound on the period scans");

    // exponents
    auto *expo = app.add_subcommand("exponents", "stability exponents a_j, a, b");
    int expo_n = 2;
    std::string expo_tau = "2";
    expo->add_option("--n", expo_n)->required();
    expo->add_option("--tau", expo_tau)->required();

    // conditions
    auto *cond = app.add_subcommand("conditions", "margins of the eleven conditions");
    ConditionParams cp;
    std::string cond_tau = "2", cond_periods, cond_levels;
    std::vector<std::string> cond_mult;
    cond->add_option("--n", cp.n)->required();
    cond->add_option("--tau", cond_tau);
    cond->add_option("--eps", cp.epsilon)->required();
    cond->add_option("--gamma", cp.gamma);
    cond->add_option("--m", cp.m);
    cond->add_option("--periods", cond_periods, "T_1..T_n")->required();
    cond->add_option("--levels", cond_levels, "L_1..L_n")->required();
    cond->add_option("--mult", cond_mult, "multiplier, e.g. c=0.1 or iv=2");

    // normalform
    auto *nf = app.add_subcommand("normalform", "composed or local normal form");
    SystemOptions nf_sys;
    nf_sys.add(nf);
    std::string nf_frame, nf_center, nf_mu, nf_out;
    NormalFormConfig nf_cfg;
    nf->add_option("--frame", nf_frame, "periodic vectors, e.g. 1/2,1/2;1/2,0")->required();
    nf->add_option("--center", nf_center, "localize around this action");
    nf->add_option("--mu", nf_mu, "mu_1..mu_j (with --center)");
    nf->add_option("--m", nf_cfg.m);
    nf->add_option("--lie-order", nf_cfg.lie_order);
    nf->add_option("--rho", nf_cfg.rho);
    nf->add_option("--out", nf_out, "prefix for the g and remainder series files");

    // morse-check
    auto *morse = app.add_subcommand("morse-check", "Diophantine-Morse check of h");
    SystemOptions morse_sys;
    morse_sys.add(morse, false);
    MorseParams mp;
    int morse_L = 3, morse_grid = 33, morse_threads = 0;
    std::string morse_margins;
    morse->add_option("--gamma", mp.gamma);
    morse->add_option("--tau", mp.tau);
    morse->add_option("--L-max", morse_L);
    morse->add_option("--grid", morse_grid);
    morse->add_option("--threads", morse_threads);
    morse->add_option("--margins", morse_margins, "write per-subspace margins CSV");

    // drift
    auto *drift = app.add_subcommand("drift", "integrate and record a trajectory");
    SystemOptions drift_sys;
    drift_sys.add(drift);
    std::uint64_t drift_seed = 0;
    std::string drift_theta, drift_I, drift_out, drift_scheme = "auto";
    double drift_t = 100.0, drift_threshold = 0.0;
    IntegratorConfig drift_cfg;
    drift_cfg.stride = 100;
    drift->add_option("--seed", drift_seed);
    drift->add_option("--theta", drift_theta);
    drift->add_option("--I", drift_I);
    drift->add_option("--t-max", drift_t);
    drift->add_option("--step", drift_cfg.step);
    drift->add_option("--stride", drift_cfg.stride);
    drift->add_option("--scheme", drift_scheme);
    drift->add_option("--threshold", drift_threshold, "also report the first crossing of |I - I(0)|");
    drift->add_option("--out", drift_out, "trajectory CSV (default stdout)");

    // restrain
    auto *rest = app.add_subcommand("restrain", "online restrain monitor along a trajectory");
    SystemOptions rest_sys;
    rest_sys.add(rest);
    std::uint64_t rest_seed = 0;
    std::string rest_theta, rest_I, rest_tau = "2", rest_out;
    std::vector<std::string> rest_mult;
    double rest_m_mult = 1.0, rest_cap = 1e4, rest_step = 1e-2;
    RestrainConfig rest_cfg;
    rest->add_option("--seed", rest_seed);
    rest->add_option("--theta", rest_theta);
    rest->add_option("--I", rest_I);
    rest->add_option("--tau", rest_tau);
    rest->add_option("--gamma", rest_cfg.gamma);
    rest->add_option("--m-multiplier", rest_m_mult);
    rest->add_option("--tau-cap", rest_cap);
    rest->add_option("--step", rest_step);
    rest->add_option("--mult", rest_mult, "multiplier, e.g. c=0.1 or B=2");
    rest->add_option("--out", rest_out, "certificate file");

    // scaling
    auto *scal = app.add_subcommand("scaling", "drift-time scaling study from a config file");
    std::string scal_config, scal_output, scal_stamp;
    int scal_workers = 0;
    bool scal_fresh = false;
    scal->add_option("--config", scal_config)->required();
    scal->add_option("--output", scal_output);
    scal->add_option("--workers", scal_workers);
    scal->add_option("--timestamp", scal_stamp, "header stamp (default current UTC time)");
    scal->add_flag("--no-resume", scal_fresh);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*approx) {
            const DirichletResult r = dirichlet_approx(parse_vector(approx_v), approx_Q, approx_cap);
            std::cout << "omega = " << format_rational_vector(r.omega.omega) << "  T = " << r.omega.period.str() << "\n";
            std::cout << std::setprecision(17) << "error = " << r.error << "  bound = " << r.error_bound << "\n";
            std::cout << "period range = [" << r.lower << ", " << r.upper << "]\n";
            return 0;
        }
        if (*expo) {
            const ExponentSet e = exponents(expo_n, Rational::parse(expo_tau));
            for (std::size_t j = 0; j < e.a_list.size(); ++j)
                std::cout << rational_line("a_" + std::to_string(j + 1), e.a_list[j]) << "\n";
            std::cout << rational_line("a", e.a) << "\n" << rational_line("b", e.b) << "\n";
            return 0;
        }
        if (*cond) {
            cp.tau = Rational::parse(cond_tau);
            for (double T : parse_vector(cond_periods)) cp.periods.push_back(T);
            for (double L : parse_vector(cond_levels)) cp.levels.push_back(static_cast<Int>(std::llround(L)));
            cp.mult = parse_multipliers(cond_mult);
            const ConditionReport r = check_conditions(cp);
            std::cout << std::setprecision(10) << "mu_0 = " << r.mu0 << "\n";
            for (std::size_t j = 0; j < r.mu.size(); ++j) std::cout << "mu_" << j + 1 << " = " << r.mu[j] << "\n";
            std::cout << r.table();
            std::cout << (r.passed ? "all conditions hold\n" : "first failure: " + r.first_failure + "\n");
            return r.passed ? 0 : kConditionFailed;
        }
        if (*nf) {
            const HamiltonianSystem H = nf_sys.build();
            const ResonanceFrame frame = ResonanceFrame::build(H.n(), parse_frame(nf_frame));
            NormalFormResult r;
            if (!nf_center.empty()) {
                std::vector<double> mus;
                for (double m : parse_vector(nf_mu)) mus.push_back(m);
                r = local_normal_form(H, parse_vector(nf_center), frame, mus, nf_cfg);
            } else {
                r = composed_normal_form(H.perturbation * H.epsilon, frame, nf_cfg);
            }
            std::cout << std::setprecision(10);
            for (std::size_t j = 0; j < r.steps.size(); ++j) {
                std::cout << "omega_" << j + 1 << " remainder norms:";
                for (const auto &s : r.steps[j]) std::cout << " " << s.remainder_norm;
                std::cout << "\n";
            }
            std::cout << "|g| = " << r.norms.g_norm << "\n|remainder| = " << r.norms.remainder_norm
                      << "\n|displacement| = " << r.norms.displacement_norm << "\n";
            std::cout << "symmetry = " << (r.symmetry_checked ? "verified" : "not verified") << "\n";
            bool ok = r.symmetry_checked;
            for (const auto &c : r.conditions) {
                std::cout << c.name << ": " << c.lhs << " < " << c.multiplier << " * " << c.rhs << " "
                          << (c.holds() ? "holds" : "FAILS") << "\n";
                ok &= c.holds();
            }
            if (!nf_out.empty()) {
                save_series(nf_out + ".g.series", r.g);
                save_series(nf_out + ".remainder.series", r.remainder);
            }
            return ok ? 0 : kConditionFailed;
        }
        if (*morse) {
            const HamiltonianSystem H = morse_sys.build();
            const MorseReport r = check_morse(ActionFunction::from_series(H.integrable), mp, morse_L, morse_grid,
                                              morse_threads);
            std::cout << r.summary();
            if (!morse_margins.empty()) write_text(morse_margins, r.margins_csv());
            return r.passed ? 0 : kConditionFailed;
        }
        if (*drift) {
            const HamiltonianSystem H = drift_sys.build();
            Eigen::VectorXd theta, I;
            starting_point(H, drift_seed, theta, I);
            if (!drift_theta.empty()) theta = parse_vector(drift_theta);
            if (!drift_I.empty()) I = parse_vector(drift_I);
            drift_cfg.scheme = parse_scheme(drift_scheme);
            drift_cfg.seed = drift_seed;
            const TrajectoryRecord tr = integrate(H, theta, I, drift_t, drift_cfg);
            if (drift_out.empty())
                std::cout << tr.csv();
            else
                write_text(drift_out, tr.csv());
            std::ostream &info = drift_out.empty() ? std::cerr : std::cout;
            info << std::setprecision(10) << "samples = " << tr.size() << "  scheme = " << to_string(tr.scheme)
                 << "  max energy deviation = " << tr.max_energy_deviation << (tr.energy_flag ? " (flagged)" : "")
                 << (tr.escaped ? "  escaped" : "") << "\n";
            if (drift_threshold > 0.0) {
                const DriftResult d = drift_time(H, theta, I, drift_threshold, drift_t, drift_cfg);
                info << "drift time = " << (d.crossed() ? std::to_string(d.time) : "never") << "\n";
            }
            return 0;
        }
        if (*rest) {
            const HamiltonianSystem H = rest_sys.build();
            Eigen::VectorXd theta, I;
            starting_point(H, rest_seed, theta, I);
            if (!rest_theta.empty()) theta = parse_vector(rest_theta);
            if (!rest_I.empty()) I = parse_vector(rest_I);
            rest_cfg.tau = Rational::parse(rest_tau);
            rest_cfg.mult = parse_multipliers(rest_mult);
            const ExponentSet e = exponents(H.n(), rest_cfg.tau);
            const TimeBudget budget = time_budget(H.epsilon, H.regularity, e, rest_m_mult, rest_cap);
            IntegratorConfig ic;
            ic.step = rest_step;
            ic.stride = std::max(1, static_cast<int>(std::ceil(budget.tau_m / rest_step) / 20000.0));
            ic.seed = rest_seed;
            const TrajectoryRecord tr = integrate(H, theta, I, budget.tau_m, ic);
            const RestrainOutcome o = try_restrain(H, tr, budget, rest_cfg);
            for (const auto &line : o.trace) std::cout << line << "\n";
            if (!o.certified) {
                std::cout << "not certified: " << o.failed_condition << "\n";
                return kConditionFailed;
            }
            const StabilityCheck s = restrained_implies_stable(o.frame, tr);
            std::cout << std::setprecision(10) << "stability bound (n+1)^2 mu_0 = " << s.bound
                      << "  max |I(t) - I(0)| = " << s.max_displacement << (s.holds ? "  holds" : "  VIOLATED") << "\n";
            if (!rest_out.empty())
                write_text(rest_out, o.frame.text());
            else
                std::cout << o.frame.text();
            return s.holds ? 0 : kConditionFailed;
        }
        if (*scal) {
            ExperimentConfig c = ExperimentConfig::load(scal_config);
            if (!scal_output.empty()) c.output = scal_output;
            if (scal_workers > 0) c.workers = scal_workers;
            const ScalingResult r = run_scaling(c, {!scal_fresh, scal_stamp});
            if (c.output.empty()) std::cout << r.data;
            std::cout << "rows = " << r.records.size() << "  resumed = " << r.resumed << "\n" << r.fit.str();
            return 0;
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
