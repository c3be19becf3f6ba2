#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfld/extended_real.hpp"

namespace mfld::harness {

// File could not be written; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kRateReportHeader = "instance,N,measured,rate,gap,bound,pass";
inline constexpr const char* kIdentityReportHeader = "identity,instances,max_deviation,tolerance,pass";

struct RateRow {
  std::string instance;
  std::size_t N = 0;
  double measured = 0.0;  // -(1/N) log P, or an estimate
  ExtendedReal rate;
  double gap = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct RateReport {
  std::string title;
  std::vector<RateRow> rows;
  bool pass = true;
  std::vector<std::string> notes;  // reasons for an overall failure

  void add(RateRow row) {
    pass = pass && row.pass;
    rows.push_back(std::move(row));
  }
  void fail(std::string why) {
    pass = false;
    notes.push_back(std::move(why));
  }
};

struct IdentityRow {
  std::string identity;
  std::size_t instances = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct IdentityReport {
  std::vector<IdentityRow> rows;
  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const IdentityRow& r) { return r.pass; });
  }
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string fmt(const ExtendedReal& x) { return x.is_infinite() ? "inf" : fmt(x.value()); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace detail

inline std::string to_csv(const RateReport& report) {
  std::ostringstream os;
  os << kRateReportHeader << '\n';
  for (const auto& r : report.rows)
    os << detail::csv_field(r.instance) << ',' << r.N << ',' << detail::fmt(r.measured) << ','
       << detail::fmt(r.rate) << ',' << detail::fmt(r.gap) << ',' << detail::fmt(r.bound) << ','
       << (r.pass ? "true" : "false") << '\n';
  return os.str();
}

inline std::string to_csv(const IdentityReport& report) {
  std::ostringstream os;
  os << kIdentityReportHeader << '\n';
  for (const auto& r : report.rows)
    os << detail::csv_field(r.identity) << ',' << r.instances << ',' << detail::fmt(r.max_deviation) << ','
       << detail::fmt(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
  return os.str();
}

/// Static log-log line plot, one polyline per series. Nonpositive values
/// cannot be drawn on log axes and are skipped.
inline std::string to_svg(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel) {
  constexpr double W = 640, H = 420, L = 70, R = 20, Top = 40, Bottom = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0) || !std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, std::log10(s.x[i]));
      xmax = std::max(xmax, std::log10(s.x[i]));
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  // whole decades around the data
  xmin = std::floor(xmin), xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin), ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double ly) { return H - Bottom - (ly - ymin) / (ymax - ymin) * (H - Top - Bottom); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << detail::xml_escape(title) << "</text>\n";
  os << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - Bottom << "\" x2=\"" << W - R << "\" y2=\"" << H - Bottom << "\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << Top << "\" x2=\"" << L << "\" y2=\"" << H - Bottom << "\"/>\n</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (double d = xmin; d <= xmax + 1e-9; d += 1.0)
    os << "<line x1=\"" << detail::fixed(px(d)) << "\" y1=\"" << H - Bottom << "\" x2=\"" << detail::fixed(px(d))
       << "\" y2=\"" << H - Bottom + 5 << "\" stroke=\"black\"/><text x=\"" << detail::fixed(px(d)) << "\" y=\""
       << H - Bottom + 18 << "\" text-anchor=\"middle\">1e" << static_cast<int>(d) << "</text>\n";
  for (double d = ymin; d <= ymax + 1e-9; d += 1.0)
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << detail::fixed(py(d)) << "\" x2=\"" << L << "\" y2=\""
       << detail::fixed(py(d)) << "\" stroke=\"black\"/><text x=\"" << L - 8 << "\" y=\""
       << detail::fixed(py(d) + 4) << "\" text-anchor=\"end\">1e" << static_cast<int>(d) << "</text>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
     << detail::xml_escape(xlabel) << "</text>\n"
     << "<text x=\"16\" y=\"" << (Top + H - Bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (Top + H - Bottom) / 2 << ")\">" << detail::xml_escape(ylabel) << "</text>\n</g>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % std::size(colors)];
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0) || !std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += detail::fixed(px(std::log10(s.x[i]))) + ',' + detail::fixed(py(std::log10(s.y[i])));
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    os << "<text x=\"" << W - R - 150 << "\" y=\"" << Top + 16 * (k + 1) << "\" fill=\"" << color
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError(path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << content;
  out.flush();
  if (!out) throw IoError(path.string() + ": write failed");
}

struct ReportPaths {
  std::filesystem::path csv;  // empty: skip
  std::filesystem::path svg;  // empty: skip
};

/// Writes the CSV and, when requested, an SVG of the given series.
template <class Report>
void emit_reports(const Report& report, const ReportPaths& paths, const std::vector<Series>& series = {},
                  const std::string& title = "", const std::string& xlabel = "N", const std::string& ylabel = "") {
  if (!paths.csv.empty()) write_file(paths.csv, to_csv(report));
  if (!paths.svg.empty()) write_file(paths.svg, to_svg(series, title, xlabel, ylabel));
}

}  // namespace mfld::harness
