#include <effstab/morse.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include <effstab/errors.hpp>
#include <effstab/series_io.hpp>

namespace effstab
{

namespace
{

constexpr std::size_t kFailureCap = 50;

std::vector<Eigen::VectorXd> ball_grid(const ActionFunction &h, int points)
{
    std::vector<Eigen::VectorXd> out;
    std::size_t total = 1;
    for (int i = 0; i < h.n; ++i) total *= static_cast<std::size_t>(points);
    Eigen::VectorXd x(h.n);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        for (int i = 0; i < h.n; ++i) {
            const auto m = static_cast<double>(rest % static_cast<std::size_t>(points));
            rest /= static_cast<std::size_t>(points);
            x(i) = points == 1 ? 0.0 : h.R * (-1.0 + 2.0 * m / (points - 1));
        }
        if (x.norm() <= h.R * (1 + 1e-12)) out.push_back(h.center + x);
    }
    return out;
}

struct SubspaceOutcome {
    std::vector<MorseFailure> failures;
    std::size_t failure_count = 0;
    double gamma_star = std::numeric_limits<double>::infinity();
    double min_gradient = std::numeric_limits<double>::infinity();
    double min_sigma = std::numeric_limits<double>::infinity();
    double min_margin = std::numeric_limits<double>::infinity();
};

} // namespace

void MorseParams::validate() const
{
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (!(tau >= 0.0)) throw ConfigError("tau must be >= 0");
}

ActionFunction ActionFunction::from_series(const Series &h)
{
    if (!h.angle_independent()) throw ConfigError("integrable part must not depend on the angles");
    const int n = h.n();
    ActionFunction f;
    f.n = n;
    f.R = h.domain().R;
    f.center = h.center();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    auto value = std::make_shared<SeriesEvaluator>(h);
    std::vector<std::vector<SeriesEvaluator>> second(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            second[static_cast<std::size_t>(i)].emplace_back(
                partial_derivative(partial_derivative(h, Variable::action(i)), Variable::action(j)));
    auto hess = std::make_shared<std::vector<std::vector<SeriesEvaluator>>>(std::move(second));
    f.value = [value, zero](const Eigen::VectorXd &I) { return value->value(zero, I); };
    f.gradient = [value, zero](const Eigen::VectorXd &I) {
        Eigen::VectorXd gt, ga;
        value->value_and_gradient(zero, I, gt, ga);
        return ga;
    };
    f.hessian = [hess, zero, n](const Eigen::VectorXd &I) {
        Eigen::MatrixXd H(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                H(i, j) = (*hess)[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].value(zero, I);
        return H;
    };
    return f;
}

ActionFunction ActionFunction::tilted(const Eigen::VectorXd &xi) const
{
    ActionFunction f = *this;
    f.value = [v = value, xi](const Eigen::VectorXd &I) { return v(I) - xi.dot(I); };
    f.gradient = [g = gradient, xi](const Eigen::VectorXd &I) { return Eigen::VectorXd(g(I) - xi); };
    return f;
}

ActionFunction ActionFunction::scaled(double c) const
{
    ActionFunction f = *this;
    f.value = [v = value, c](const Eigen::VectorXd &I) { return c * v(I); };
    f.gradient = [g = gradient, c](const Eigen::VectorXd &I) { return Eigen::VectorXd(c * g(I)); };
    f.hessian = [H = hessian, c](const Eigen::VectorXd &I) { return Eigen::MatrixXd(c * H(I)); };
    return f;
}

bool ActionFunction::contains(const Eigen::VectorXd &I) const
{
    return I.size() == n && (I - center).lpNorm<Eigen::Infinity>() <= R * (1 + 1e-9);
}

AdaptedBasis adapted_coordinates(const RationalSubspace &s)
{
    s.validate();
    AdaptedBasis b;
    b.f = orthonormal_span(s.normals, s.n);
    // Complete with canonical vectors in index order.
    Eigen::MatrixXd all(s.n, s.n);
    all.leftCols(b.f.cols()) = b.f;
    Eigen::Index cols = b.f.cols();
    for (int i = 0; i < s.n && cols < s.n; ++i) {
        Eigen::VectorXd x = Eigen::VectorXd::Unit(s.n, i);
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index c = 0; c < cols; ++c) x -= all.col(c).dot(x) * all.col(c);
        if (x.norm() < 1e-8) continue;
        all.col(cols++) = x.normalized();
    }
    if (cols != s.n) throw DependenceError("could not complete an orthonormal basis");
    b.e = all.rightCols(s.n - b.f.cols());
    return b;
}

std::string to_string(MorseBranch b)
{
    switch (b) {
    case MorseBranch::GradientLarge: return "gradient";
    case MorseBranch::HessianNondegenerate: return "hessian";
    case MorseBranch::Fail: return "fail";
    }
    return "?";
}

MorseAt check_morse_at(const ActionFunction &h, const AdaptedBasis &basis, const Eigen::VectorXd &point,
                       const MorseParams &p, int L)
{
    p.validate();
    if (L < 1) throw ConfigError("L must be >= 1");
    if (!h.contains(point)) throw DomainError("point outside the action ball");
    const Eigen::MatrixXd &E = basis.e;
    MorseAt r;
    r.threshold = p.gamma * std::pow(static_cast<double>(L), -p.tau);
    r.gradient_norm = (E.transpose() * h.gradient(point)).norm();
    if (E.cols() > 0) {
        const Eigen::MatrixXd block = E.transpose() * h.hessian(point) * E;
        r.sigma_min = Eigen::JacobiSVD<Eigen::MatrixXd>(block).singularValues().minCoeff();
    }
    if (r.gradient_norm > r.threshold)
        r.branch = MorseBranch::GradientLarge;
    else if (r.sigma_min > r.threshold)
        r.branch = MorseBranch::HessianNondegenerate;
    else
        r.branch = MorseBranch::Fail;
    return r;
}

MorseAt check_morse_at(const ActionFunction &h, const RationalSubspace &s, const Eigen::VectorXd &point,
                       const MorseParams &p, int L)
{
    return check_morse_at(h, adapted_coordinates(s), point, p, L);
}

MorseReport check_morse(const ActionFunction &h, const MorseParams &p, int L_max, int grid_points, int threads)
{
    p.validate();
    if (L_max < 1) throw ConfigError("L_max must be >= 1");
    if (grid_points < 1) throw ConfigError("grid must have at least one point");
    const auto subspaces = enumerate_subspaces(h.n, L_max);
    const auto points = ball_grid(h, grid_points);
    std::vector<SubspaceOutcome> outcomes(subspaces.size());

    auto work = [&](std::size_t s) {
        const auto &ls = subspaces[s];
        const AdaptedBasis basis = adapted_coordinates(ls.subspace);
        SubspaceOutcome &o = outcomes[s];
        const double Ltau = std::pow(static_cast<double>(ls.level), p.tau);
        for (const auto &x : points) {
            const MorseAt r = check_morse_at(h, basis, x, p, ls.level);
            const double best = std::max(r.gradient_norm, r.sigma_min);
            o.gamma_star = std::min(o.gamma_star, best * Ltau);
            o.min_gradient = std::min(o.min_gradient, r.gradient_norm);
            o.min_sigma = std::min(o.min_sigma, r.sigma_min);
            o.min_margin = std::min(o.min_margin, best - r.threshold);
            if (r.branch == MorseBranch::Fail) {
                ++o.failure_count;
                if (o.failures.size() < kFailureCap)
                    o.failures.push_back({ls.subspace, ls.level, x, r.gradient_margin(), r.hessian_margin()});
            }
        }
    };

    unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::min(8u, std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<unsigned>(workers, static_cast<unsigned>(subspaces.size()));
    if (workers <= 1) {
        for (std::size_t s = 0; s < subspaces.size(); ++s) work(s);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t s = w; s < subspaces.size(); s += workers) work(s);
            });
        for (auto &t : pool) t.join();
    }

    MorseReport rep;
    rep.params = p;
    rep.L_max = L_max;
    rep.grid_points = grid_points;
    rep.points = points.size();
    rep.gamma_star = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < subspaces.size(); ++s) {
        const auto &ls = subspaces[s];
        const auto &o = outcomes[s];
        ++rep.subspaces_per_dim[ls.subspace.dim()];
        rep.gamma_star = std::min(rep.gamma_star, o.gamma_star);
        rep.failure_count += o.failure_count;
        for (const auto &f : o.failures)
            if (rep.failures.size() < kFailureCap) rep.failures.push_back(f);
        rep.margin_rows.push_back(ls.subspace.str() + "," + std::to_string(ls.level) + "," +
                                  std::to_string(ls.subspace.dim()) + "," + format_real(o.min_gradient) + "," +
                                  format_real(o.min_sigma) + "," + format_real(o.min_margin));
    }
    rep.passed = rep.failure_count == 0;
    return rep;
}

std::string MorseReport::summary() const
{
    std::ostringstream os;
    os << "morse-check\n";
    os << "gamma = " << format_real(params.gamma) << "\n";
    os << "tau = " << format_real(params.tau) << "\n";
    os << "L_max = " << L_max << "\n";
    os << "grid = " << grid_points << " per coordinate, " << points << " points in the ball\n";
    for (const auto &[dim, count] : subspaces_per_dim) os << "subspaces dim " << dim << " = " << count << "\n";
    os << "multipliers = " << format_real(gradient_multiplier) << " " << format_real(hessian_multiplier) << "\n";
    os << "gamma_star = " << format_real(gamma_star) << "\n";
    os << "failures = " << failure_count << "\n";
    for (const auto &f : failures) {
        os << "fail " << f.subspace.str() << " L=" << f.level << " at (";
        for (Eigen::Index i = 0; i < f.point.size(); ++i) os << (i ? ", " : "") << format_real(f.point(i));
        os << ") gradient_margin=" << format_real(f.gradient_margin)
           << " hessian_margin=" << format_real(f.hessian_margin) << "\n";
    }
    os << "passed = " << (passed ? "true" : "false") << "\n";
    return os.str();
}

std::string MorseReport::margins_csv() const
{
    std::string out = "subspace,level,dim,min_gradient,min_sigma,min_best_margin\n";
    for (const auto &row : margin_rows) {
        // Quote the subspace column; it contains commas.
        const auto cut = row.find("},");
        if (row.rfind("perp{", 0) == 0 && cut != std::string::npos)
            out += "\"" + row.substr(0, cut + 1) + "\"" + row.substr(cut + 1) + "\n";
        else
            out += row + "\n";
    }
    return out;
}

PrevalenceReport sample_prevalence(const ActionFunction &h, double tau, int num_samples, double xi_box, int L_max,
                                   int grid_points, std::uint64_t seed)
{
    const double need = 2.0 * (h.n * h.n + 1);
    if (!(tau > need)) throw ConfigError("prevalence sampling needs tau > 2(n^2+1)");
    if (num_samples < 0) throw ConfigError("sample count must be >= 0");
    PrevalenceReport rep;
    rep.samples = num_samples;
    if (num_samples == 0) return rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-xi_box, xi_box);
    int passing = 0;
    for (int s = 0; s < num_samples; ++s) {
        Eigen::VectorXd xi(h.n);
        for (int i = 0; i < h.n; ++i) xi(i) = u(rng);
        // Passing is monotone in gamma, so one sweep yields gamma_star and
        // the ladder answer is the largest 2^-e strictly below it.
        const auto r = check_morse(h.tilted(xi), {1.0, tau}, L_max, grid_points, 1);
        double best = 0.0;
        for (int e = 0; e <= 20; ++e) {
            const double g = std::ldexp(1.0, -e);
            if (g < r.gamma_star) {
                best = g;
                ++rep.histogram[e];
                break;
            }
        }
        if (best > 0.0) ++passing;
        rep.gammas.push_back(best);
    }
    rep.fraction = static_cast<double>(passing) / num_samples;
    return rep;
}

EscapeResult steepness_escape(const SteepnessQuery &q, const ActionFunction &h, double gamma, double tau,
                              double multiple)
{
    if (q.curve.empty() || q.curve.size() != q.times.size()) throw ConfigError("malformed curve samples");
    if (!(q.c > 0.0) || !(q.c < 1.0)) throw ConfigError("c_j must lie in (0, 1)");
    for (std::size_t i = 1; i < q.times.size(); ++i)
        if (!(q.times[i] >= q.times[i - 1])) throw ConfigError("curve times must be nondecreasing");
    const Eigen::VectorXd &start = q.curve.front();
    const Projections P = projections(q.frame);
    for (const auto &x : q.curve) {
        if (x.size() != h.n) throw ConfigError("curve sample has the wrong dimension");
        if (!h.contains(x)) throw ConfigError("curve leaves the action ball");
        if ((P.pi_perp * (x - start)).lpNorm<Eigen::Infinity>() > 1e-9 * (1 + (x - start).lpNorm<Eigen::Infinity>()))
            throw ConfigError("curve leaves the affine subspace");
    }
    if ((q.curve.back() - start).lpNorm<Eigen::Infinity>() < q.c * (1 - 1e-12))
        throw ConfigError("curve length does not reach c_j");

    EscapeResult r;
    r.threshold = multiple * q.c * q.c;
    r.precondition_margin = gamma * std::pow(static_cast<double>(q.frame.l_index), -tau) - q.c;
    for (std::size_t i = 0; i < q.curve.size(); ++i) {
        if ((q.curve[i] - start).lpNorm<Eigen::Infinity>() >= q.c) break;
        const double g = (P.pi * h.gradient(q.curve[i])).lpNorm<Eigen::Infinity>();
        if (g > r.threshold) {
            r.found = true;
            r.index = i;
            r.time = q.times[i];
            r.projected_gradient = g;
            r.containment = true;
            return r;
        }
    }
    return r;
}

} // namespace effstab
