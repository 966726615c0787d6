#pragma once

// Report tables, their CSV schemas and an SVG plot of gap curves.
//
// CSV: header row, comma separator, LF line endings, numbers printed with
// %.17g so a parse of the emitted text reproduces every value exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fgps/config.hpp"
#include "fgps/error.hpp"
#include "fgps/samplers.hpp"

namespace fgps {

inline constexpr const char* kGapReportHeader = "t,alpha_bar,operator,kernel_sigma,method,mean_l2,rms,std_l2,count";
inline constexpr const char* kRestorationReportHeader =
    "trial,method,operator,mse_truth,mse_posterior_mean,residual_norm,wall_time_s";
inline constexpr const char* kSampleHeader = "index,x0,y,x_hat,posterior_mean";

struct GapRow {
  std::size_t t = 0;
  double alpha_bar = 0.0;
  std::string op;
  double kernel_sigma = 0.0;
  std::string method;
  double mean_l2 = 0.0;
  double rms = 0.0;  // mean of ||gap||_2 / sqrt(n)
  double std_l2 = 0.0;
  std::size_t count = 0;

  bool operator==(const GapRow&) const = default;
};

struct GapReport {
  std::vector<GapRow> rows;
  bool operator==(const GapReport&) const = default;
};

inline void sort_rows(GapReport& report) {
  std::sort(report.rows.begin(), report.rows.end(), [](const GapRow& a, const GapRow& b) {
    return std::tie(a.op, a.kernel_sigma, a.method, a.t) < std::tie(b.op, b.kernel_sigma, b.method, b.t);
  });
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class Row, class Parse>
std::vector<Row> parse_csv(const std::string& text, const char* header, std::size_t columns, Parse parse_row) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) throw IoError(std::string("csv: expected header '") + header + "'");
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != columns) throw IoError("csv line " + std::to_string(line_no) + ": wrong column count");
    try {
      rows.push_back(parse_row(fields));
    } catch (const std::logic_error&) {
      throw IoError("csv line " + std::to_string(line_no) + ": malformed value");
    }
  }
  return rows;
}

}  // namespace detail

inline std::string emit_csv(const GapReport& report) {
  using detail::fmt_double;
  std::string out = std::string(kGapReportHeader) + "\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.t) + "," + fmt_double(r.alpha_bar) + "," + r.op + "," + fmt_double(r.kernel_sigma) + "," +
           r.method + "," + fmt_double(r.mean_l2) + "," + fmt_double(r.rms) + "," + fmt_double(r.std_l2) + "," +
           std::to_string(r.count) + "\n";
  }
  return out;
}

inline GapReport parse_gap_csv(const std::string& text) {
  GapReport report;
  report.rows = detail::parse_csv<GapRow>(text, kGapReportHeader, 9, [](const std::vector<std::string>& f) {
    return GapRow{std::stoul(f[0]), std::stod(f[1]), f[2],           std::stod(f[3]), f[4],
                  std::stod(f[5]),  std::stod(f[6]), std::stod(f[7]), std::stoul(f[8])};
  });
  return report;
}

// Wall time is left empty unless timing was requested, keeping reruns
// byte-identical by default.
inline std::string emit_csv(const RestorationReport& report) {
  using detail::fmt_double;
  std::string out = std::string(kRestorationReportHeader) + "\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.trial) + "," + r.method + "," + r.op + "," + fmt_double(r.mse_truth) + "," +
           fmt_double(r.mse_posterior_mean) + "," + fmt_double(r.residual_norm) + "," +
           (r.wall_time_s ? fmt_double(*r.wall_time_s) : "") + "\n";
  }
  return out;
}

inline RestorationReport parse_restoration_csv(const std::string& text) {
  RestorationReport report;
  report.rows = detail::parse_csv<RestorationRow>(
      text, kRestorationReportHeader, 7, [](const std::vector<std::string>& f) {
        RestorationRow r{std::stoul(f[0]), f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                         std::nullopt};
        if (!f[6].empty()) r.wall_time_s = std::stod(f[6]);
        return r;
      });
  return report;
}

// ===== SVG plot: mean gap vs t, log-scale y =====

inline std::string emit_plot(const GapReport& report) {
  constexpr double width = 720, height = 480, left = 80, right = 180, top = 30, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;

  std::map<std::string, std::vector<const GapRow*>> series;
  std::size_t t_max = 1;
  double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
  for (const auto& r : report.rows) {
    series[r.op + " s=" + detail::fmt_double(r.kernel_sigma) + " " + r.method].push_back(&r);
    t_max = std::max(t_max, r.t);
    if (r.mean_l2 > 0.0 && std::isfinite(r.mean_l2)) {
      y_min = std::min(y_min, r.mean_l2);
      y_max = std::max(y_max, r.mean_l2);
    }
  }
  if (!std::isfinite(y_min)) {
    y_min = 1e-3;
    y_max = 1.0;
  }
  const double lo = std::floor(std::log10(y_min)), hi = std::max(lo + 1.0, std::ceil(std::log10(y_max)));
  auto px = [&](double t) { return left + plot_w * (t - 1.0) / std::max(1.0, static_cast<double>(t_max) - 1.0); };
  auto py = [&](double v) { return top + plot_h * (hi - std::log10(v)) / (hi - lo); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream o;
  char buf[160];
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
    << width << " " << height << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  for (double e = lo; e <= hi; e += 1.0) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#dddddd\"/>\n"
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">1e%d</text>\n",
                  left, py(std::pow(10.0, e)), left + plot_w, py(std::pow(10.0, e)), left - 6, py(std::pow(10.0, e)) + 4,
                  static_cast<int>(e));
    o << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" stroke=\"black\"/>\n", left,
                top, plot_w, plot_h);
  o << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">diffusion step t</text>\n",
                left + plot_w / 2, height - 12);
  o << buf;
  o << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
    << top + plot_h / 2 << ")\" text-anchor=\"middle\">mean gap (log scale)</text>\n";

  std::size_t idx = 0;
  for (const auto& [name, rows] : series) {
    const char* color = colors[idx % std::size(colors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto* r : rows) {
      if (!(r->mean_l2 > 0.0) || !std::isfinite(r->mean_l2)) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(static_cast<double>(r->t)), py(r->mean_l2));
      o << buf;
    }
    o << "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" fill=\"%s\">%s</text>\n", left + plot_w + 8,
                  top + 14.0 * static_cast<double>(idx + 1), color, name.c_str());
    o << buf;
    ++idx;
  }
  o << "</svg>\n";
  return o.str();
}

// ===== files =====

// Writes through a sibling temporary and renames it into place, so a failed
// run never leaves a partial file behind.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      out.flush();
      if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (const std::filesystem::filesystem_error& e) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string() + ": " + e.what());
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

inline void emit_csv(const GapReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, emit_csv(report));
}

inline void emit_csv(const RestorationReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, emit_csv(report));
}

inline void emit_plot(const GapReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, emit_plot(report));
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fgps
