#ifndef EFFSTAB_SERIES_IO_HPP
#define EFFSTAB_SERIES_IO_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include <effstab/series.hpp>

namespace effstab
{

// Text format, one header field per line followed by one record per
// coefficient:
//
//   effstab-series 1
//   n 2
//   R 1
//   center 0 0
//   k_max 3
//   d_max 2
//   regularity gevrey 1 0.5        (or "finite 5 2", or "none")
//   terms 2
//   1 0 | 0 0 | 0.5 0
//   -1 0 | 0 0 | 0.5 -0
//
// Reals are written with 17 significant digits so a write/read cycle is
// bit-exact.
struct SeriesFile {
    Series series;
    std::optional<Regularity> regularity;
};

void write_series(std::ostream &os, const Series &s, const std::optional<Regularity> &regularity = std::nullopt);
SeriesFile read_series(std::istream &is);

void save_series(const std::string &path, const Series &s, const std::optional<Regularity> &regularity = std::nullopt);
SeriesFile load_series(const std::string &path);

// "%.17g"
std::string format_real(double x);

} // namespace effstab

#endif
