#include "qadmit/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace qadmit {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvFormatError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  const double a = std::fabs(v);
  if (a != 0.0 && (a >= 1e5 || a < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.1e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

std::string escape(const std::string& s) {
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

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Points {
  std::vector<double> x;
  std::vector<double> y;
};

Points series_points(const AggregateSeries& s, const PlotOptions& opt) {
  Points p;
  const double scale = opt.mode == PlotMode::kRescaled ? static_cast<double>(std::max(1, s.tau_mix)) : 1.0;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double x = static_cast<double>(s.t[i]) / scale;
    if (opt.log_x && x <= 0.0) continue;
    double y = 0.0;
    switch (opt.mode) {
      case PlotMode::kRegret: y = s.mean_regret[i]; break;
      case PlotMode::kThreshold: y = s.mean_threshold[i]; break;
      case PlotMode::kRescaled: y = s.mean_regret[i] / scale; break;
    }
    if (!std::isfinite(y)) continue;
    p.x.push_back(opt.log_x ? std::log10(x) : x);
    p.y.push_back(y);
  }
  return p;
}

}  // namespace

PlotMode parse_plot_mode(const std::string& name) {
  if (name == "regret") return PlotMode::kRegret;
  if (name == "threshold") return PlotMode::kThreshold;
  if (name == "rescaled") return PlotMode::kRescaled;
  throw std::invalid_argument("unknown plot mode '" + name + "' (expected regret, threshold or rescaled)");
}

AggregateSeries read_aggregate_csv(std::istream& in, const std::string& label) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_csv_line(line).empty()) break;
  }
  const auto header = split_csv_line(line);
  if (header.empty()) throw CsvFormatError(label + ": empty CSV");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* name : {"t", "mean_regret", "stderr_regret", "mean_threshold"}) {
    if (!col.count(name)) throw CsvFormatError(label + ": missing column '" + std::string(name) + "'");
  }

  AggregateSeries s;
  s.label = label;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cells = split_csv_line(line);
    if (cells.empty()) continue;
    if (cells.size() != header.size()) {
      throw CsvFormatError(label + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                           " fields, expected " + std::to_string(header.size()));
    }
    s.t.push_back(static_cast<std::int64_t>(parse_double(cells[col["t"]], lineno)));
    s.mean_regret.push_back(parse_double(cells[col["mean_regret"]], lineno));
    s.stderr_regret.push_back(parse_double(cells[col["stderr_regret"]], lineno));
    s.mean_threshold.push_back(parse_double(cells[col["mean_threshold"]], lineno));
  }
  if (s.t.empty()) throw CsvFormatError(label + ": no data rows");
  return s;
}

AggregateSeries load_aggregate_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_aggregate_csv(in, std::filesystem::path(path).stem().string());
}

std::string render_svg(const std::vector<AggregateSeries>& series, const PlotOptions& options) {
  if (series.empty()) throw std::invalid_argument("nothing to plot");
  constexpr double left = 80, right = 190, top = 40, bottom = 60;
  const double pw = kCanvasWidth - left - right;
  const double ph = kCanvasHeight - top - bottom;

  std::vector<Points> pts;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    pts.push_back(series_points(s, options));
    for (double x : pts.back().x) x0 = std::min(x0, x), x1 = std::max(x1, x);
    for (double y : pts.back().y) y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  if (!std::isfinite(x0)) throw std::invalid_argument("no plottable points");
  y0 = std::min(y0, 0.0);
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCanvasWidth << "\" height=\"" << kCanvasHeight
    << "\" viewBox=\"0 0 " << kCanvasWidth << ' ' << kCanvasHeight << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << escape(options.title) << "</text>\n";
  }

  o << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
    << fmt(top + ph) << "\"/>\n";
  o << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(top + ph)
    << "\"/>\n";
  o << "</g>\n";

  o << "<g class=\"ticks\" font-size=\"11\">\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = x0 + (x1 - x0) * i / kTicks;
    const double yv = y0 + (y1 - y0) * i / kTicks;
    o << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(options.log_x ? std::pow(10.0, xv) : xv) << "</text>\n";
    o << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(sy(yv) + 4) << "\" text-anchor=\"end\">" << tick_label(yv)
      << "</text>\n";
  }
  o << "</g>\n";

  const char* xlabel = options.mode == PlotMode::kRescaled ? "t / tau_mix" : "t";
  const char* ylabel = options.mode == PlotMode::kThreshold   ? "mean threshold"
                       : options.mode == PlotMode::kRescaled ? "mean regret / tau_mix"
                                                              : "mean regret";
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(kCanvasHeight - 16.0)
    << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << (options.log_x ? " (log scale)" : "") << "</text>\n";
  o << "<text x=\"18\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
    << fmt(top + ph / 2) << ")\">" << ylabel << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts[k].x.size(); ++i) {
      if (i) o << ' ';
      o << fmt(sx(pts[k].x[i])) << ',' << fmt(sy(pts[k].y[i]));
    }
    o << "\"/>\n";
  }

  o << "<g class=\"legend\" font-size=\"12\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = top + 10 + 20.0 * static_cast<double>(k);
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<line x1=\"" << fmt(left + pw + 15) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left + pw + 40) << "\" y2=\""
      << fmt(y) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fmt(left + pw + 46) << "\" y=\"" << fmt(y + 4) << "\">" << escape(series[k].label)
      << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace qadmit
