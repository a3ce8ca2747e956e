#include <effstab/harness.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <effstab/errors.hpp>
#include <effstab/series_io.hpp>

namespace effstab
{

namespace
{

std::string trim(const std::string &s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string &s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string &key, const std::string &v)
{
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception &) {
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
}

long parse_long(const std::string &key, const std::string &v)
{
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception &) {
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string &key, const std::string &v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

Series cosine_mode(const Domain &d, std::vector<int> k, int k_max, int d_max)
{
    return Series::cosine(d, k, 1.0, k_max, d_max);
}

// Uniform double in [0,1) from the top 53 bits; identical on every platform.
double unit(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string csv_cell(std::string s)
{
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

std::string real_cell(double x) { return std::isinf(x) ? (x > 0 ? "inf" : "-inf") : format_real(x); }

double parse_real_cell(const std::string &s)
{
    if (s == "inf") return kNever;
    if (s == "-inf") return -kNever;
    return parse_double("cell", s);
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

std::vector<std::string> builtin_names()
{
    return {"quasi-convex", "linear-diophantine", "degenerate-steep", "pendulum", "half-first"};
}

int builtin_dimension(const std::string &name)
{
    if (name == "pendulum") return 1;
    const auto names = builtin_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) throw ConfigError("unknown system '" + name + "'");
    return 2;
}

HamiltonianSystem builtin_system(const std::string &name, int n, double epsilon)
{
    if (n == 0) n = builtin_dimension(name);
    if (n < 1 || n > kMaxDim) throw ConfigError("dimension out of range");
    if (epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
    HamiltonianSystem H;
    H.epsilon = epsilon;
    H.regularity = Gevrey{1.0, 1.0};
    if (name == "quasi-convex") {
        const Domain d{n, 2.0};
        H.integrable = Series::quadratic(d, Eigen::MatrixXd::Identity(n, n), 2, 2);
        H.perturbation = cosine_mode(d, std::vector<int>(static_cast<std::size_t>(n), 1), 2, 2);
    } else if (name == "linear-diophantine") {
        const Domain d{n, 1.0};
        Eigen::VectorXd w(n);
        if (n == 2)
            w << 1.0, (std::sqrt(5.0) - 1.0) / 2.0;
        else if (n == 3)
            w << 1.0, std::sqrt(2.0) - 1.0, std::sqrt(3.0) - 1.0;
        else
            throw ConfigError("linear-diophantine is defined for n = 2 and 3");
        H.integrable = Series::linear(d, w, 1, 1);
        std::vector<int> k(static_cast<std::size_t>(n), 0);
        k[0] = 1;
        H.perturbation = cosine_mode(d, k, 1, 1);
    } else if (name == "degenerate-steep") {
        if (n != 2) throw ConfigError("degenerate-steep is defined for n = 2");
        const Domain d{2, 1.0};
        Series h(d, 2, 3);
        h.add(MultiIndex({0, 0}, {2, 0}), 0.5);
        h.add(MultiIndex({0, 0}, {0, 3}), 1.0 / 3.0);
        h.add(MultiIndex({0, 0}, {1, 2}), 0.5);
        H.integrable = h;
        H.perturbation = cosine_mode(d, {1, 1}, 2, 3);
    } else if (name == "pendulum") {
        if (n != 1) throw ConfigError("pendulum is defined for n = 1");
        const Domain d{1, 2.0};
        H.integrable = Series::quadratic(d, Eigen::MatrixXd::Identity(1, 1), 1, 2);
        H.perturbation = cosine_mode(d, {1}, 1, 2);
    } else if (name == "half-first") {
        if (n != 2) throw ConfigError("half-first is defined for n = 2");
        const Domain d{2, 1.0};
        Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
        Q(0, 0) = 1.0;
        H.integrable = Series::quadratic(d, Q, 1, 2);
        H.perturbation = cosine_mode(d, {0, 1}, 1, 2);
    } else {
        throw ConfigError("unknown system '" + name + "'");
    }
    H.validate();
    return H;
}

std::map<std::string, std::string> parse_key_values(const std::string &text)
{
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int number = 0;
    while (std::getline(is, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
        if (!kv.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
    }
    return kv;
}

ExperimentConfig ExperimentConfig::parse(const std::string &text)
{
    ExperimentConfig c;
    for (const auto &[key, v] : parse_key_values(text)) {
        if (key == "system")
            c.system = v;
        else if (key == "n")
            c.n = static_cast<int>(parse_long(key, v));
        else if (key == "h_file")
            c.h_file = v;
        else if (key == "f_file")
            c.f_file = v;
        else if (key == "epsilons") {
            c.epsilons.clear();
            for (const auto &part : split(v, ',')) c.epsilons.push_back(parse_double(key, trim(part)));
        } else if (key == "samples")
            c.samples = static_cast<int>(parse_long(key, v));
        else if (key == "action_radius")
            c.action_radius = parse_double(key, v);
        else if (key == "seed")
            c.seed = static_cast<std::uint64_t>(parse_long(key, v));
        else if (key == "step")
            c.integrator.step = parse_double(key, v);
        else if (key == "scheme")
            c.integrator.scheme = parse_scheme(v);
        else if (key == "energy_tolerance")
            c.integrator.energy_tolerance = parse_double(key, v);
        else if (key == "tau")
            c.tau = Rational::parse(v);
        else if (key == "m_multiplier")
            c.m_multiplier = parse_double(key, v);
        else if (key == "tau_cap")
            c.tau_cap = v == "inf" ? kNever : parse_double(key, v);
        else if (key == "max_steps")
            c.max_steps = parse_long(key, v);
        else if (key == "threshold_scale")
            c.threshold_scale = parse_double(key, v);
        else if (key == "threshold_power")
            c.threshold_power = parse_double(key, v);
        else if (key == "restrain")
            c.restrain = parse_bool(key, v);
        else if (key == "gamma")
            c.gamma = parse_double(key, v);
        else if (key.rfind("mult.", 0) == 0) {
            const std::string name = key.substr(5);
            const double x = parse_double(key, v);
            if (name == "mu")
                c.mult.mu = x;
            else if (name == "mu0")
                c.mult.mu0 = x;
            else if (name == "c")
                c.mult.c = x;
            else if (name == "steep")
                c.mult.steep = x;
            else if (name == "Q")
                c.mult.Q = x;
            else
                c.mult.conditions[name] = x;
        } else if (key == "workers")
            c.workers = static_cast<int>(parse_long(key, v));
        else if (key == "output")
            c.output = v;
        else
            throw ConfigError("unknown config key '" + key + "'");
    }
    c.integrator.seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string &path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void ExperimentConfig::validate() const
{
    if (system == "files") {
        if (h_file.empty() || f_file.empty()) throw ConfigError("system = files needs h_file and f_file");
    } else {
        builtin_dimension(system);
    }
    if (epsilons.empty()) throw ConfigError("epsilons must not be empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) throw ConfigError("epsilons must lie in (0,1)");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw ConfigError("epsilons must be sorted descending");
    }
    if (samples < 1) throw ConfigError("samples must be at least 1");
    if (action_radius != -1.0 && !(action_radius >= 0.0)) throw ConfigError("action_radius must be nonnegative");
    integrator.validate();
    if (tau < Rational(2)) throw ConfigError("tau must be at least 2");
    if (!(m_multiplier > 0.0)) throw ConfigError("m_multiplier must be positive");
    if (!(tau_cap > 0.0)) throw ConfigError("tau_cap must be positive");
    if (max_steps < 1) throw ConfigError("max_steps must be positive");
    if (threshold_scale != -1.0 && !(threshold_scale > 0.0)) throw ConfigError("threshold_scale must be positive");
    if (threshold_power != -1.0 && !(threshold_power >= 0.0)) throw ConfigError("threshold_power must be nonnegative");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (workers < 1) throw ConfigError("workers must be at least 1");
}

std::string ExperimentConfig::canonical() const
{
    std::map<std::string, std::string> kv;
    kv["system"] = system;
    kv["n"] = std::to_string(dimension());
    kv["h_file"] = h_file;
    kv["f_file"] = f_file;
    std::string eps;
    for (std::size_t i = 0; i < epsilons.size(); ++i) eps += (i ? "," : "") + format_real(epsilons[i]);
    kv["epsilons"] = eps;
    kv["samples"] = std::to_string(samples);
    kv["seed"] = std::to_string(seed);
    kv["action_radius"] = format_real(action_radius);
    kv["integrator"] = integrator.canonical();
    kv["tau"] = tau.str();
    kv["m_multiplier"] = format_real(m_multiplier);
    kv["tau_cap"] = real_cell(tau_cap);
    kv["max_steps"] = std::to_string(max_steps);
    kv["threshold_scale"] = format_real(threshold_scale);
    kv["threshold_power"] = format_real(threshold_power);
    kv["restrain"] = restrain ? "true" : "false";
    kv["gamma"] = format_real(gamma);
    kv["mult"] = mult.str();
    std::string out;
    for (const auto &[k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a(canonical())); }

int ExperimentConfig::dimension() const
{
    if (n > 0) return n;
    if (system == "files") return load_series(h_file).series.n();
    return builtin_dimension(system);
}

HamiltonianSystem ExperimentConfig::system_at(double epsilon) const
{
    if (system != "files") return builtin_system(system, n, epsilon);
    const SeriesFile h = load_series(h_file);
    const SeriesFile f = load_series(f_file);
    HamiltonianSystem H{h.series, f.series, epsilon, h.regularity.value_or(Regularity{Gevrey{}})};
    H.validate();
    return H;
}

std::string ScalingRecord::csv_header(int n)
{
    std::string h = "epsilon,index";
    for (int i = 1; i <= n; ++i) h += ",theta0_" + std::to_string(i);
    for (int i = 1; i <= n; ++i) h += ",I0_" + std::to_string(i);
    h += ",threshold,t_cap,censored,drift_time,max_displacement,t_reached,escaped,certificate,key";
    return h;
}

std::string ScalingRecord::csv_row() const
{
    std::ostringstream os;
    os << format_real(epsilon) << "," << index;
    for (Eigen::Index i = 0; i < theta0.size(); ++i) os << "," << format_real(theta0(i));
    for (Eigen::Index i = 0; i < I0.size(); ++i) os << "," << format_real(I0(i));
    os << "," << format_real(threshold) << "," << real_cell(t_cap) << "," << (censored ? 1 : 0) << ","
       << real_cell(drift_time) << "," << format_real(max_displacement) << "," << format_real(t_reached) << ","
       << (escaped ? 1 : 0) << "," << csv_cell(certificate) << "," << key;
    return os.str();
}

ScalingRecord ScalingRecord::parse_row(const std::string &row, int n)
{
    const auto cells = split(row, ',');
    if (static_cast<int>(cells.size()) != 2 * n + 11) throw CorruptSeriesError("scaling row has the wrong width");
    ScalingRecord r;
    std::size_t c = 0;
    r.epsilon = parse_real_cell(cells[c++]);
    r.index = static_cast<int>(parse_long("index", cells[c++]));
    r.theta0.resize(n);
    r.I0.resize(n);
    for (int i = 0; i < n; ++i) r.theta0(i) = parse_real_cell(cells[c++]);
    for (int i = 0; i < n; ++i) r.I0(i) = parse_real_cell(cells[c++]);
    r.threshold = parse_real_cell(cells[c++]);
    r.t_cap = parse_real_cell(cells[c++]);
    r.censored = cells[c++] == "1";
    r.drift_time = parse_real_cell(cells[c++]);
    r.max_displacement = parse_real_cell(cells[c++]);
    r.t_reached = parse_real_cell(cells[c++]);
    r.escaped = cells[c++] == "1";
    r.certificate = cells[c++];
    r.key = cells[c++];
    return r;
}

std::string FitSummary::str() const
{
    std::ostringstream os;
    os << "model: " << model << "\n";
    os << "rows_used: " << rows_used << "\n";
    if (!defined) {
        os << "fit: undefined (fewer than two distinct x values)\n";
        return os.str();
    }
    os << "slope: " << format_real(slope) << "\n";
    os << "intercept: " << format_real(intercept) << "\n";
    os << "rms_residual: " << format_real(rms) << "\n";
    os << "residuals:";
    for (double r : residuals) os << " " << format_real(r);
    os << "\n";
    return os.str();
}

FitSummary fit_scaling(const std::vector<ScalingRecord> &records, const ExperimentConfig &cfg)
{
    const HamiltonianSystem H = cfg.system_at(cfg.epsilons.front());
    const ExponentSet E = exponents(H.n(), cfg.tau);
    const double a = E.a.to_double();
    FitSummary fit;
    std::vector<double> xs, ys;
    const auto *g = std::get_if<Gevrey>(&H.regularity);
    fit.model = g ? "gevrey" : "finite";
    for (const auto &r : records) {
        if (r.drift_time == kNever || !(r.drift_time > 0.0)) continue;
        const double x = g ? std::pow(r.epsilon, -a / g->alpha)
                           : std::get<FiniteDiff>(H.regularity).k_star * a * std::log(1.0 / r.epsilon);
        xs.push_back(x);
        ys.push_back(std::log(r.drift_time));
    }
    fit.rows_used = static_cast<int>(xs.size());
    const bool spread = !xs.empty() && *std::max_element(xs.begin(), xs.end()) > *std::min_element(xs.begin(), xs.end());
    if (!spread) return fit;
    Eigen::MatrixXd A(xs.size(), 2);
    Eigen::VectorXd y(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        A(static_cast<Eigen::Index>(i), 0) = 1.0;
        A(static_cast<Eigen::Index>(i), 1) = xs[i];
        y(static_cast<Eigen::Index>(i)) = ys[i];
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(y);
    fit.defined = true;
    fit.intercept = c(0);
    fit.slope = c(1);
    const Eigen::VectorXd res = y - A * c;
    fit.residuals.assign(res.data(), res.data() + res.size());
    fit.rms = std::sqrt(res.squaredNorm() / static_cast<double>(res.size()));
    return fit;
}

std::string data_section(const std::string &file_text)
{
    const auto nl = file_text.find('\n');
    return nl == std::string::npos ? std::string() : file_text.substr(nl + 1);
}

namespace
{

struct Row {
    double epsilon;
    int index;
    Eigen::VectorXd theta0;
    Eigen::VectorXd I0;
    std::string key;
};

ScalingRecord run_row(const ExperimentConfig &cfg, const Row &row)
{
    const auto start = std::chrono::steady_clock::now();
    const HamiltonianSystem H = cfg.system_at(row.epsilon);
    const int n = H.n();
    const ExponentSet E = exponents(n, cfg.tau);
    ScalingRecord r;
    r.epsilon = row.epsilon;
    r.index = row.index;
    r.theta0 = row.theta0;
    r.I0 = row.I0;
    r.key = row.key;
    const double scale = cfg.threshold_scale > 0.0 ? cfg.threshold_scale : static_cast<double>((n + 1) * (n + 1));
    const double power = cfg.threshold_power >= 0.0 ? cfg.threshold_power : E.b.to_double();
    r.threshold = scale * std::pow(row.epsilon, power);
    const TimeBudget budget = time_budget(row.epsilon, H.regularity, E, cfg.m_multiplier, cfg.tau_cap);
    const double step_cap = static_cast<double>(cfg.max_steps) * cfg.integrator.step;
    r.t_cap = std::min(budget.tau_m, step_cap);
    r.censored = step_cap < budget.tau_m;

    const DriftResult d = drift_time(H, row.theta0, row.I0, r.threshold, r.t_cap, cfg.integrator);
    r.drift_time = d.time;
    r.max_displacement = d.max_displacement;
    r.t_reached = d.t_reached;
    r.escaped = d.escaped;

    if (cfg.restrain) {
        if (n < 2) {
            r.certificate = "n/a";
        } else {
            IntegratorConfig ic = cfg.integrator;
            const double steps = std::ceil(r.t_cap / ic.step);
            ic.stride = std::max(1, static_cast<int>(steps / 20000.0));
            const TrajectoryRecord tr = integrate(H, row.theta0, row.I0, r.t_cap, ic);
            TimeBudget b = budget;
            b.tau_m = r.t_cap;
            RestrainConfig rc;
            rc.tau = cfg.tau;
            rc.gamma = cfg.gamma;
            rc.mult = cfg.mult;
            if (tr.escaped) {
                r.certificate = "failed:trajectory left the domain";
            } else {
                const RestrainOutcome o = try_restrain(H, tr, b, rc);
                if (o.certified)
                    r.certificate = o.frame.approximate ? "certified-approximate" : "certified";
                else
                    r.certificate = "failed:" + o.failed_condition;
            }
        }
    }
    r.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

} // namespace

ScalingResult run_scaling(const ExperimentConfig &cfg, const ScalingOptions &opts)
{
    cfg.validate();
    const HamiltonianSystem H0 = cfg.system_at(cfg.epsilons.front());
    const int n = H0.n();
    const std::string config_hash = cfg.hash();

    // Initial conditions: theta uniform on the torus, I uniform in the sup-ball.
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32)};
    std::mt19937_64 rng(seq);
    std::vector<Eigen::VectorXd> thetas, actions;
    const Eigen::VectorXd center = H0.integrable.center();
    const double radius = cfg.action_radius >= 0.0 ? cfg.action_radius : H0.integrable.domain().R / 2.0;
    for (int i = 0; i < cfg.samples; ++i) {
        Eigen::VectorXd th(n), I(n);
        for (int c = 0; c < n; ++c) th(c) = unit(rng);
        for (int c = 0; c < n; ++c) I(c) = center(c) + radius * (2.0 * unit(rng) - 1.0);
        thetas.push_back(th);
        actions.push_back(I);
    }
    std::vector<Row> rows;
    for (double eps : cfg.epsilons)
        for (int i = 0; i < cfg.samples; ++i) {
            const std::string key = hex64(fnv1a(config_hash + "|" + format_real(eps) + "|" + std::to_string(i)));
            rows.push_back({eps, i, thetas[i], actions[i], key});
        }

    const std::string header = "# config " + config_hash + "\n" + ScalingRecord::csv_header(n) + "\n";
    const std::string stamp = "# effstab scaling " + (opts.timestamp.empty() ? utc_now() : opts.timestamp) + "\n";

    // Finished rows from an earlier, interrupted run.
    std::map<std::string, ScalingRecord> done;
    if (!cfg.output.empty() && opts.resume && std::filesystem::exists(cfg.output)) {
        std::ifstream in(cfg.output);
        std::string line;
        std::getline(in, line); // timestamp
        std::getline(in, line);
        if (line != "# config " + config_hash)
            throw ConfigError("existing output '" + cfg.output + "' was written for a different config");
        std::getline(in, line); // column header
        while (std::getline(in, line)) {
            if (in.eof()) break; // no trailing newline: an incomplete line
            try {
                ScalingRecord r = ScalingRecord::parse_row(line, n);
                done.emplace(r.key, std::move(r));
            } catch (const Error &) {
            }
        }
    }

    std::vector<ScalingRecord> results(rows.size());
    std::vector<char> have(rows.size(), 0);
    ScalingResult out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto it = done.find(rows[i].key);
        if (it != done.end()) {
            results[i] = it->second;
            have[i] = 1;
            ++out.resumed;
        }
    }

    std::ofstream progress;
    if (!cfg.output.empty()) {
        progress.open(cfg.output, std::ios::trunc);
        if (!progress) throw ConfigError("cannot write '" + cfg.output + "'");
        progress << stamp << header;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (have[i]) progress << results[i].csv_row() << "\n";
        progress.flush();
    }

    std::mutex writer;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            if (have[i]) continue;
            try {
                ScalingRecord r = run_row(cfg, rows[i]);
                const std::lock_guard<std::mutex> lock(writer);
                if (progress.is_open()) {
                    progress << r.csv_row() << "\n";
                    progress.flush();
                }
                results[i] = std::move(r);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(writer);
                if (!failure) failure = std::current_exception();
                next = rows.size();
                return;
            }
        }
    };
    const int workers = std::min<int>(cfg.workers, static_cast<int>(rows.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    out.records = std::move(results);
    out.fit = fit_scaling(out.records, cfg);
    out.data = header;
    for (const auto &r : out.records) out.data += r.csv_row() + "\n";

    if (!cfg.output.empty()) {
        progress.close();
        const std::string tmp = cfg.output + ".tmp";
        {
            std::ofstream f(tmp, std::ios::trunc);
            f << stamp << out.data;
        }
        std::filesystem::rename(tmp, cfg.output);
        std::ofstream fit(cfg.output + ".fit.txt", std::ios::trunc);
        fit << out.fit.str();
        std::ofstream timing(cfg.output + ".timing.csv", std::ios::trunc);
        timing << "epsilon,index,runtime_seconds\n";
        for (const auto &r : out.records) timing << format_real(r.epsilon) << "," << r.index << "," << r.runtime << "\n";
    }
    return out;
}

} // namespace effstab
