#include "hyperbo/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "hyperbo/error.hpp"
#include "hyperbo/pretrain.hpp"

namespace hyperbo {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(std::string_view s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

// Five evenly spaced ticks.
std::vector<double> ticks(const Range& r) {
  std::vector<double> t;
  for (int i = 0; i <= 4; ++i) t.push_back(r.lo + (r.hi - r.lo) * i / 4.0);
  return t;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

class Canvas {
 public:
  Canvas(std::string_view title, Range x, Range y) : x_(x), y_(y) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os_ << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n";
  }

  double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

  void axes(std::string_view x_label, std::string_view y_label, bool numeric_x) {
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    const double y1 = kTop;
    os_ << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\""
        << y0 << "\"/><line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\"/></g>\n";
    for (double t : ticks(y_)) {
      os_ << "<line x1=\"" << x0 - 4 << "\" y1=\"" << py(t) << "\" x2=\"" << x0 << "\" y2=\"" << py(t)
          << "\" stroke=\"black\"/><text x=\"" << x0 - 7 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
          << fmt(t) << "</text>\n";
    }
    if (numeric_x) {
      for (double t : ticks(x_)) {
        os_ << "<line x1=\"" << px(t) << "\" y1=\"" << y0 << "\" x2=\"" << px(t) << "\" y2=\"" << y0 + 4
            << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">"
            << fmt(t) << "</text>\n";
      }
    }
    os_ << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
        << escape(x_label) << "</text>\n";
    os_ << "<text transform=\"translate(20," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(y_label) << "</text>\n";
  }

  void x_label_at(double x, std::string_view label) {
    os_ << "<text x=\"" << px(x) << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">"
        << escape(label) << "</text>\n";
  }

  void legend(std::size_t i, std::string_view name, const char* color) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 15;
    os_ << "<rect x=\"" << x << "\" y=\"" << y - 8 << "\" width=\"12\" height=\"12\" fill=\"" << color
        << "\"/><text x=\"" << x + 18 << "\" y=\"" << y + 2 << "\">" << escape(name) << "</text>\n";
  }

  std::ostringstream& raw() { return os_; }

  std::string finish(std::string_view embedded_csv) {
    if (!embedded_csv.empty()) os_ << "<metadata id=\"data\"><![CDATA[\n" << embedded_csv << "]]></metadata>\n";
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  Range x_;
  Range y_;
  std::ostringstream os_;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<double> kde(const std::vector<double>& values, const std::vector<double>& at) {
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  std::vector<double> out(at.size(), 0.0);
  if (finite.empty()) return out;
  const double n = static_cast<double>(finite.size());
  const double mean = std::accumulate(finite.begin(), finite.end(), 0.0) / n;
  double var = 0.0;
  for (double v : finite) var += (v - mean) * (v - mean);
  const double sd = finite.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  double h = 1.06 * sd * std::pow(n, -0.2);
  if (!(h > 0.0)) h = std::max(1e-3, 1e-3 * std::abs(mean));
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < at.size(); ++i) {
    double s = 0.0;
    for (double v : finite) {
      const double z = (at[i] - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    out[i] = norm * s;
  }
  return out;
}

std::string line_chart_svg(std::string_view title, std::string_view x_label, std::string_view y_label,
                           const std::vector<LineSeries>& series, std::string_view embedded_csv) {
  Range xr;
  Range yr;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.add(s.x[i]);
      const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
      yr.add(s.y[i] - e);
      yr.add(s.y[i] + e);
    }
  }
  xr.finish();
  yr.finish();
  Canvas c(title, xr, yr);
  c.axes(x_label, y_label, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % kPalette.size()];
    if (!s.err.empty()) {
      std::ostringstream band;
      for (std::size_t i = 0; i < s.x.size(); ++i) band << c.px(s.x[i]) << ',' << c.py(s.y[i] + s.err[i]) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) band << c.px(s.x[i]) << ',' << c.py(s.y[i] - s.err[i]) << ' ';
      c.raw() << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.15\"/>\n";
    }
    c.raw() << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) c.raw() << c.px(s.x[i]) << ',' << c.py(s.y[i]) << ' ';
    c.raw() << "\"/>\n";
    c.legend(k, s.name, color);
  }
  return c.finish(embedded_csv);
}

std::string violin_svg(std::string_view title, std::string_view x_label, std::string_view y_label,
                       const std::vector<ViolinGroup>& groups, std::string_view embedded_csv) {
  Range yr;
  for (const auto& g : groups)
    for (double v : g.values) yr.add(v);
  yr.finish();
  Range xr{0.0, static_cast<double>(std::max<std::size_t>(groups.size(), 1)) + 1.0};
  Canvas c(title, xr, yr);
  c.axes(x_label, y_label, false);
  const double half_width_px = 0.4 * (c.px(1.0) - c.px(0.0));
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const double center = static_cast<double>(k) + 1.0;
    const auto& g = groups[k];
    c.x_label_at(center, g.label);
    std::vector<double> finite;
    for (double v : g.values)
      if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) continue;
    std::sort(finite.begin(), finite.end());
    const double lo = finite.front();
    const double hi = finite.back();
    std::vector<double> at;
    constexpr int kPoints = 60;
    for (int i = 0; i <= kPoints; ++i) at.push_back(lo + (hi - lo) * i / kPoints);
    const auto dens = kde(finite, at);
    const double peak = *std::max_element(dens.begin(), dens.end());
    const char* color = kPalette[k % kPalette.size()];
    const double cx = c.px(center);
    std::ostringstream pts;
    for (std::size_t i = 0; i < at.size(); ++i)
      pts << cx + half_width_px * (peak > 0 ? dens[i] / peak : 0.0) << ',' << c.py(at[i]) << ' ';
    for (std::size_t i = at.size(); i-- > 0;)
      pts << cx - half_width_px * (peak > 0 ? dens[i] / peak : 0.0) << ',' << c.py(at[i]) << ' ';
    c.raw() << "<polygon points=\"" << pts.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.5\" stroke=\""
            << color << "\"/>\n";
    const double median = finite.size() % 2 ? finite[finite.size() / 2]
                                            : 0.5 * (finite[finite.size() / 2 - 1] + finite[finite.size() / 2]);
    c.raw() << "<line x1=\"" << cx - half_width_px / 2 << "\" y1=\"" << c.py(median) << "\" x2=\""
            << cx + half_width_px / 2 << "\" y2=\"" << c.py(median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  return c.finish(embedded_csv);
}

std::string curves_csv_to_svg(std::string_view csv, std::string_view title) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("method,step,mean", 0) != 0)
    throw LoadError("curves CSV must start with the header method,step,mean,std");
  std::vector<LineSeries> series;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 3) throw LoadError("curves CSV row has too few columns: " + line);
    if (series.empty() || series.back().name != cells[0]) series.push_back({cells[0], {}, {}, {}});
    auto& s = series.back();
    try {
      s.x.push_back(std::stod(cells[1]));
      s.y.push_back(std::stod(cells[2]));
      s.err.push_back(cells.size() > 3 ? std::stod(cells[3]) : 0.0);
    } catch (const std::exception&) {
      throw LoadError("curves CSV row is not numeric: " + line);
    }
  }
  if (series.empty()) throw LoadError("curves CSV has no rows");
  return line_chart_svg(title, "BO iteration", "average normalized simple regret", series, csv);
}

std::map<std::string, std::string> asymptotics_csv_to_svgs(std::string_view csv) {
  const AsymptoticsTable table = asymptotics_from_csv(csv);
  std::set<std::string> params;
  std::set<int> grid;
  for (const auto& r : table) {
    if (r.parameter == "fit_failed") continue;
    params.insert(r.parameter);
    grid.insert(r.grid);
  }
  std::map<std::string, std::string> out;
  for (const auto& p : params) {
    std::vector<ViolinGroup> groups;
    std::ostringstream data;
    data.precision(17);
    data << "grid,seed,value\n";
    for (int g : grid) {
      ViolinGroup group{std::to_string(g), asymptotics_column(table, g, p)};
      for (const auto& r : table)
        if (r.grid == g && r.parameter == p) data << r.grid << ',' << r.seed << ',' << r.value << '\n';
      groups.push_back(std::move(group));
    }
    out.emplace(p, violin_svg("Estimated " + p, "grid size", p, groups, data.str()));
  }
  return out;
}

}  // namespace hyperbo
