#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfld/discrete_distribution.hpp"
#include "mfld/gaussian.hpp"

namespace mfld {

// Plain-text tabular format: one atom per line, "<point>\t<weight>", weights
// with 17 significant digits. Tuple points are comma-joined; tuples of
// vectors separate the vectors with ';'. Lines starting with '#' are skipped.

inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class P>
void write_distribution(std::ostream& os, const DiscreteDistribution<P>& d) {
  for (const auto& a : d.atoms()) os << AtomTraits<P>::format(a.point) << '\t' << format_real(a.weight) << '\n';
}

template <class P>
DiscreteDistribution<P> read_distribution(std::istream& is) {
  std::vector<Atom<P>> atoms;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DomainError("line " + std::to_string(lineno) + ": missing tab separator");
    P point = AtomTraits<P>::parse(std::string_view(line).substr(0, tab));
    const double w = AtomTraits<double>::parse(std::string_view(line).substr(tab + 1));
    atoms.push_back({std::move(point), w});
  }
  return DiscreteDistribution<P>(std::move(atoms));
}

// Gaussian laws: a "mean" line followed by one "cov" line per row.
inline void write_gaussian(std::ostream& os, const GaussianMeasure& g) {
  auto row = [&](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_real(v(i));
  };
  os << "mean\t";
  row(g.mean());
  os << '\n';
  for (Eigen::Index r = 0; r < g.dimension(); ++r) {
    os << "cov\t";
    row(g.covariance().row(r));
    os << '\n';
  }
}

inline GaussianMeasure read_gaussian(std::istream& is) {
  std::vector<double> mean;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DomainError("Gaussian record without tab separator");
    const std::string key = line.substr(0, tab);
    auto values = AtomTraits<std::vector<double>>::parse(std::string_view(line).substr(tab + 1));
    if (key == "mean")
      mean = std::move(values);
    else if (key == "cov")
      rows.push_back(std::move(values));
    else
      throw DomainError("unknown Gaussian record '" + key + "'");
  }
  const auto n = static_cast<Eigen::Index>(mean.size());
  if (static_cast<Eigen::Index>(rows.size()) != n) throw DomainError("covariance row count differs from mean length");
  Eigen::VectorXd m(n);
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i) = mean[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw DomainError("ragged covariance row");
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return GaussianMeasure(std::move(m), std::move(c));
}

}  // namespace mfld
