#include <effstab/series_io.hpp>

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <effstab/errors.hpp>

namespace effstab
{

std::string format_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_series(std::ostream &os, const Series &s, const std::optional<Regularity> &regularity)
{
    const int n = s.n();
    os << "effstab-series 1\n";
    os << "n " << n << "\n";
    os << "R " << format_real(s.domain().R) << "\n";
    os << "center";
    for (int j = 0; j < n; ++j) os << ' ' << format_real(s.center()(j));
    os << "\n";
    os << "k_max " << s.k_max() << "\n";
    os << "d_max " << s.d_max() << "\n";
    os << "regularity " << (regularity ? regularity_tag(*regularity) : std::string("none")) << "\n";
    os << "terms " << s.size() << "\n";
    for (const auto &[idx, c] : s.terms()) {
        for (int j = 0; j < n; ++j) os << (j ? " " : "") << idx.k[static_cast<std::size_t>(j)];
        os << " |";
        for (int j = 0; j < n; ++j) os << ' ' << idx.l[static_cast<std::size_t>(j)];
        os << " | " << format_real(c.real()) << ' ' << format_real(c.imag()) << "\n";
    }
}

namespace
{

std::string next_line(std::istream &is)
{
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
        return line;
    }
    throw ConfigError("series file truncated");
}

std::istringstream expect(std::istream &is, const std::string &key)
{
    std::istringstream ls(next_line(is));
    std::string word;
    ls >> word;
    if (word != key) throw ConfigError("series file: expected '" + key + "', found '" + word + "'");
    return ls;
}

double parse_real(const std::string &tok)
{
    char *end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ConfigError("series file: bad real '" + tok + "'");
    return v;
}

} // namespace

SeriesFile read_series(std::istream &is)
{
    {
        auto ls = expect(is, "effstab-series");
        int version = 0;
        ls >> version;
        if (version != 1) throw ConfigError("series file: unsupported version");
    }
    int n = 0;
    expect(is, "n") >> n;
    std::string tok;
    expect(is, "R") >> tok;
    const double R = parse_real(tok);
    Eigen::VectorXd center(n);
    {
        auto ls = expect(is, "center");
        for (int j = 0; j < n; ++j) {
            if (!(ls >> tok)) throw ConfigError("series file: short center");
            center(j) = parse_real(tok);
        }
    }
    int k_max = 0, d_max = 0;
    expect(is, "k_max") >> k_max;
    expect(is, "d_max") >> d_max;
    std::optional<Regularity> regularity;
    {
        auto ls = expect(is, "regularity");
        std::string kind;
        ls >> kind;
        if (kind == "gevrey") {
            std::string a, l;
            ls >> a >> l;
            regularity = Gevrey{parse_real(a), parse_real(l)};
        } else if (kind == "finite") {
            FiniteDiff f;
            ls >> f.k >> f.k_star;
            regularity = f;
        } else if (kind != "none") {
            throw ConfigError("series file: unknown regularity '" + kind + "'");
        }
    }
    std::size_t count = 0;
    expect(is, "terms") >> count;
    SeriesFile out{Series(Domain{n, R}, center, k_max, d_max), regularity};
    for (std::size_t t = 0; t < count; ++t) {
        std::istringstream ls(next_line(is));
        std::vector<int> k(static_cast<std::size_t>(n)), l(static_cast<std::size_t>(n));
        for (auto &v : k) ls >> v;
        ls >> tok;
        if (tok != "|") throw ConfigError("series file: malformed record");
        for (auto &v : l) ls >> v;
        ls >> tok;
        if (tok != "|" || !ls) throw ConfigError("series file: malformed record");
        std::string re, im;
        if (!(ls >> re >> im)) throw ConfigError("series file: malformed coefficient");
        out.series.add(MultiIndex(k, l), Coefficient(parse_real(re), parse_real(im)));
    }
    return out;
}

void save_series(const std::string &path, const Series &s, const std::optional<Regularity> &regularity)
{
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    write_series(os, s, regularity);
}

SeriesFile load_series(const std::string &path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    return read_series(is);
}

} // namespace effstab
