#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <effstab/errors.hpp>
#include <effstab/harness.hpp>
#include <effstab/series_io.hpp>

using namespace effstab;

namespace
{

std::string slurp(const std::string &path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string &name)
{
    const auto dir = std::filesystem::temp_directory_path() / "effstab_test_harness";
    std::filesystem::create_directories(dir);
    const auto p = dir / name;
    std::filesystem::remove(p);
    return p;
}

} // namespace

TEST_CASE("builtin systems")
{
    for (const auto &name : builtin_names()) {
        const HamiltonianSystem H = builtin_system(name, 0, 1e-3);
        CHECK(H.n() == builtin_dimension(name));
        CHECK(H.integrable.angle_independent());
        CHECK_FALSE(H.perturbation.empty());
    }
    // Direct evaluation oracle for the quasi-convex family.
    const HamiltonianSystem H = builtin_system("quasi-convex", 3, 0.01);
    const Eigen::Vector3d th(0.1, 0.2, 0.05), I(0.3, -0.2, 0.4);
    const double expect = 0.5 * I.squaredNorm() + 0.01 * std::cos(2.0 * std::numbers::pi * th.sum());
    CHECK(H.energy(th, I) == doctest::Approx(expect).epsilon(1e-14));
    const HamiltonianSystem steep = builtin_system("degenerate-steep", 2, 0.0);
    const Eigen::Vector2d J(0.3, 0.2);
    CHECK(steep.energy(Eigen::Vector2d::Zero(), J) ==
          doctest::Approx(0.045 + 0.008 / 3.0 + 0.5 * 0.3 * 0.04).epsilon(1e-14));
    CHECK_THROWS_AS(builtin_system("nope", 0, 0.1), ConfigError);
    CHECK_THROWS_AS(builtin_system("pendulum", 2, 0.1), ConfigError);
    CHECK_THROWS_AS(builtin_system("linear-diophantine", 4, 0.1), ConfigError);
}

TEST_CASE("key-value parsing")
{
    const auto kv = parse_key_values("# comment\n a = 1 \n\nb=x # trailing\n");
    CHECK(kv.size() == 2);
    CHECK(kv.at("a") == "1");
    CHECK(kv.at("b") == "x");
    CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_key_values("just words\n"), ConfigError);
}

TEST_CASE("experiment config")
{
    const ExperimentConfig c = ExperimentConfig::parse("system = pendulum\nepsilons = 1e-2, 1e-3\nseed = 7\n"
                                                       "mult.c = 0.1\nmult.B = 2\nworkers = 4\n");
    CHECK(c.system == "pendulum");
    CHECK(c.epsilons.size() == 2);
    CHECK(c.seed == 7);
    CHECK(c.mult.c == 0.1);
    CHECK(c.mult.of("B") == 2.0);
    CHECK(c.dimension() == 1);

    ExperimentConfig d = c;
    d.workers = 1;
    d.output = "elsewhere.csv";
    CHECK(d.hash() == c.hash());
    d.seed = 8;
    CHECK(d.hash() != c.hash());

    CHECK_THROWS_AS(ExperimentConfig::parse("epsilons = 1e-3, 1e-2\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("epsilons = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("samples = x\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("system = files\n"), ConfigError);
}

TEST_CASE("scaling rows round-trip through CSV")
{
    ScalingRecord r;
    r.epsilon = 1e-3;
    r.index = 4;
    r.theta0 = Eigen::Vector2d(0.1, 0.7);
    r.I0 = Eigen::Vector2d(-0.3, 1.0 / 3.0);
    r.threshold = 0.25;
    r.t_cap = 100.0;
    r.drift_time = kNever;
    r.max_displacement = 1e-5;
    r.t_reached = 100.0;
    r.certificate = "failed:(ii) c_j < mu_j, j=1";
    r.key = "00ff";
    const ScalingRecord back = ScalingRecord::parse_row(r.csv_row(), 2);
    CHECK(back.csv_row() == r.csv_row());
    CHECK(back.drift_time == kNever);
    CHECK(back.I0(1) == r.I0(1));
    CHECK(back.certificate == "failed:(ii) c_j < mu_j; j=1");
    CHECK_THROWS_AS(ScalingRecord::parse_row("1,2,3", 2), CorruptSeriesError);
}

TEST_CASE("scaling: f = 0 never drifts")
{
    const Domain d{2, 1.0};
    const auto h = scratch("h.series"), f = scratch("f.series");
    save_series(h.string(), Series::quadratic(d, Eigen::Matrix2d::Identity(), 0, 2), Regularity{Gevrey{}});
    save_series(f.string(), Series(d, 0, 2));
    ExperimentConfig c = ExperimentConfig::parse("system = files\nh_file = " + h.string() + "\nf_file = " + f.string() +
                                                 "\nepsilons = 1e-2, 1e-3\nsamples = 3\nstep = 0.01\ntau_cap = 50\n");
    const ScalingResult r = run_scaling(c);
    REQUIRE(r.records.size() == 6);
    for (const auto &row : r.records) {
        CHECK(row.drift_time == kNever);
        CHECK(row.max_displacement == 0.0);
    }
    CHECK(r.fit.rows_used == 0);
    CHECK_FALSE(r.fit.defined);
}

TEST_CASE("scaling: pendulum crossing times grow as eps decreases")
{
    // Starting at the resonance I = 0, the motion scales as
    // I(t; eps) = sqrt(eps) J(sqrt(eps) t), so crossing a threshold of
    // size sqrt(eps) takes a time proportional to eps^{-1/2}.
    const ExperimentConfig c = ExperimentConfig::parse(
        "system = pendulum\nepsilons = 1e-2, 1e-3, 1e-4\nsamples = 3\naction_radius = 0\nseed = 3\n"
        "step = 0.001\nthreshold_scale = 0.5\nthreshold_power = 0.5\nm_multiplier = 10\ntau_cap = 1000\n"
        "workers = 3\n");
    const ScalingResult r = run_scaling(c);
    REQUIRE(r.records.size() == 9);
    int compared = 0;
    for (int i = 0; i < 3; ++i) {
        const double t2 = r.records[i].drift_time, t3 = r.records[3 + i].drift_time, t4 = r.records[6 + i].drift_time;
        const double cosine = std::cos(2.0 * std::numbers::pi * r.records[i].theta0(0));
        if (cosine + 1.0 < 0.2) continue; // never reaches the threshold
        REQUIRE(t2 != kNever);
        CHECK(t2 < t3);
        CHECK(t3 < t4);
        CHECK(t3 / t2 == doctest::Approx(std::sqrt(10.0)).epsilon(0.01));
        CHECK(t4 / t3 == doctest::Approx(std::sqrt(10.0)).epsilon(0.01));
        ++compared;
    }
    CHECK(compared > 0);
    REQUIRE(r.fit.defined);
    CHECK(r.fit.model == "gevrey");
}

TEST_CASE("scaling determinism and resume")
{
    const auto out = scratch("scaling.csv");
    const std::string text = "system = quasi-convex\nepsilons = 1e-2, 1e-3\nsamples = 3\nseed = 11\nstep = 0.01\n"
                             "tau_cap = 20\nthreshold_scale = 0.01\nthreshold_power = 0\nrestrain = true\n"
                             "mult.c = 0.1\nmult.B = 2\noutput = " +
                             out.string() + "\n";
    ExperimentConfig c = ExperimentConfig::parse(text);
    const ScalingResult a = run_scaling(c, {false, "first"});
    const std::string file_a = slurp(out.string());
    CHECK(file_a.rfind("# effstab scaling first\n", 0) == 0);
    CHECK(data_section(file_a) == a.data);

    c.workers = 4;
    const ScalingResult b = run_scaling(c, {false, "second"});
    CHECK(b.data == a.data);
    CHECK(data_section(slurp(out.string())) == a.data);
    bool some_certificate = false;
    for (const auto &row : b.records) some_certificate |= row.certificate != "off";
    CHECK(some_certificate);

    // Interrupt: keep two finished rows plus half a line.
    std::istringstream lines(file_a);
    std::string line, cut;
    for (int i = 0; i < 5 && std::getline(lines, line); ++i) cut += line + "\n";
    std::getline(lines, line);
    cut += line.substr(0, line.size() / 2);
    {
        std::ofstream f(out.string(), std::ios::trunc);
        f << cut;
    }
    const ScalingResult resumed = run_scaling(c, {true, "third"});
    CHECK(resumed.resumed == 2);
    CHECK(resumed.data == a.data);
    CHECK(data_section(slurp(out.string())) == a.data);

    ExperimentConfig other = c;
    other.seed = 12;
    CHECK_THROWS_AS(run_scaling(other, {true, "x"}), ConfigError);
}

TEST_CASE("least squares fit of log T*")
{
    ExperimentConfig c;
    c.system = "quasi-convex";
    const double a = 1.0 / 432.0;
    std::vector<ScalingRecord> rows;
    for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
        ScalingRecord r;
        r.epsilon = eps;
        r.drift_time = std::exp(2.0 + 3.0 * std::pow(eps, -a));
        rows.push_back(r);
    }
    ScalingRecord sentinel;
    sentinel.epsilon = 1e-9;
    rows.push_back(sentinel);
    const FitSummary f = fit_scaling(rows, c);
    CHECK(f.rows_used == 4);
    REQUIRE(f.defined);
    CHECK(f.slope == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(f.intercept == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(f.rms < 1e-8);
    CHECK(f.str().find("slope: ") != std::string::npos);
}
