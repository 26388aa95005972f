#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include "config.hpp"
#include "svq/text.hpp"

namespace svqcli {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  return s == "-0.00" ? "0.00" : s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double cell(const svq::AnalysisTable& t, std::size_t row, std::size_t col) {
  return svq::parse_number(t.rows.at(row).at(col), t.name + " " + t.columns.at(col));
}

std::size_t column(const svq::AnalysisTable& t, const std::string& name) {
  for (std::size_t k = 0; k < t.columns.size(); ++k)
    if (t.columns[k] == name) return k;
  throw DataError(t.name + ": missing column '" + name + "'");
}

std::string attribute(const svq::AnalysisTable& t, const std::string& key) {
  for (const auto& [k, v] : t.attributes)
    if (k == key) return v;
  throw DataError(t.name + ": missing attribute '" + key + "'");
}

constexpr double kMargin = 28.0;

void frame(Svg& svg, double x, double y, double w, double h) { svg.rect(x, y, w, h, "none", "#333333"); }

}  // namespace

Svg::Svg(double width, double height) : width_(width), height_(height) {}

void Svg::rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke) {
  body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
           "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>\n";
}

void Svg::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width,
               bool dashed) {
  body_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) +
           "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) + "\"" +
           (dashed ? " stroke-dasharray=\"4 3\"" : "") + "/>\n";
}

void Svg::polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke,
                   double width) {
  if (points.empty()) return;
  body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) + "\" points=\"";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) body_ += ' ';
    body_ += fmt(points[i].first) + ',' + fmt(points[i].second);
  }
  body_ += "\"/>\n";
}

void Svg::circle(double cx, double cy, double r, const std::string& fill, const std::string& stroke) {
  body_ += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\" fill=\"" + fill +
           "\" stroke=\"" + stroke + "\"/>\n";
}

void Svg::text(double x, double y, const std::string& content, double size, const std::string& anchor) {
  body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           fmt(size) + "\" text-anchor=\"" + anchor + "\">" + escape(content) + "</text>\n";
}

std::string Svg::str() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width_) + "\" height=\"" + fmt(height_) +
         "\" viewBox=\"0 0 " + fmt(width_) + " " + fmt(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
         body_ + "</svg>\n";
}

std::string ramp_colour(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * static_cast<double>(stops.size() - 1);
  const auto k = std::min(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(k);
  char buf[8];
  const auto c = [&](int i) { return static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i]))); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(0), c(1), c(2));
  return buf;
}

std::string series_colour(std::size_t k) {
  static constexpr std::array<const char*, 10> palette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                       "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[k % palette.size()];
}

std::string plot_heatmap(const svq::AnalysisTable& t, std::size_t size) {
  const double s = static_cast<double>(size);
  Svg svg(s, s);
  const double inner = s - 2 * kMargin;
  const std::size_t bins = t.rows.size();
  double top = 0.0;
  for (std::size_t r = 0; r < bins; ++r)
    for (std::size_t c = 1; c < t.columns.size(); ++c) top = std::max(top, cell(t, r, c));
  if (bins > 0 && top > 0.0) {
    const double w = inner / static_cast<double>(bins);
    for (std::size_t r = 0; r < bins; ++r)
      for (std::size_t c = 1; c < t.columns.size(); ++c) {
        const double v = cell(t, r, c);
        if (v <= 0.0) continue;
        // row index runs along x, column index upward along y
        svg.rect(kMargin + static_cast<double>(r) * w, kMargin + inner - static_cast<double>(c) * w, w, w,
                 ramp_colour(v / top));
      }
  }
  frame(svg, kMargin, kMargin, inner, inner);
  svg.text(s / 2, s - 8, "phi" + attribute(t, "axis_a"), 11, "middle");
  svg.text(10, s / 2, "phi" + attribute(t, "axis_b"), 11, "middle");
  svg.text(s / 2, 16, t.name, 11, "middle");
  return svg.str();
}

std::string plot_connectivity(const svq::AnalysisTable& t, std::size_t size) {
  std::vector<std::size_t> layers;
  for (const auto& v : [&] {
         std::vector<std::string> parts;
         std::string cur;
         for (char ch : attribute(t, "layers")) {
           if (ch == ':') {
             parts.push_back(cur);
             cur.clear();
           } else {
             cur += ch;
           }
         }
         parts.push_back(cur);
         return parts;
       }())
    layers.push_back(static_cast<std::size_t>(svq::parse_number(v, "layers")));
  const double s = static_cast<double>(size);
  Svg svg(s, s);
  const std::size_t L = layers.size();
  auto pos = [&](std::size_t layer, std::size_t node) {
    const double x = kMargin + (s - 2 * kMargin) * (static_cast<double>(node) + 0.5) / static_cast<double>(layers[layer]);
    const double y = s - kMargin - (s - 2 * kMargin) * static_cast<double>(layer) / static_cast<double>(L - 1);
    return std::pair{x, y};
  };
  const auto cs = column(t, "stage");
  const auto cc = column(t, "code");
  const auto ci = column(t, "input");
  const auto cv = column(t, "value");
  double top = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) top = std::max(top, std::abs(cell(t, r, cv)));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto stage = static_cast<std::size_t>(cell(t, r, cs));
    const auto code = static_cast<std::size_t>(cell(t, r, cc));
    const auto input = static_cast<std::size_t>(cell(t, r, ci));
    const double v = cell(t, r, cv);
    if (stage < 1 || stage >= L || code < 1 || code > layers[stage] || input < 1 || input > layers[stage - 1])
      throw DataError(t.name + ": edge out of range in row " + std::to_string(r + 1));
    const auto [x1, y1] = pos(stage - 1, input - 1);
    const auto [x2, y2] = pos(stage, code - 1);
    svg.line(x1, y1, x2, y2, "#222222", top > 0.0 ? 0.2 + 2.8 * std::abs(v) / top : 0.2, v < 0.0);
  }
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < layers[l]; ++k) {
      const auto [x, y] = pos(l, k);
      svg.circle(x, y, 3.0, "#ffffff", "#000000");
    }
  svg.text(s / 2, 16, t.name, 11, "middle");
  return svg.str();
}

/// Hinton diagram: one row per code, square area by magnitude, filled when positive.
std::string plot_codebook(const svq::AnalysisTable& t, std::size_t size) {
  const double s = static_cast<double>(size);
  Svg svg(s, s);
  const std::size_t codes = t.rows.size();
  const std::size_t dims = t.columns.size() > 1 ? t.columns.size() - 1 : 0;
  double top = 0.0;
  for (std::size_t r = 0; r < codes; ++r)
    for (std::size_t c = 1; c <= dims; ++c) top = std::max(top, std::abs(cell(t, r, c)));
  const double inner = s - 2 * kMargin;
  const double w = inner / static_cast<double>(std::max<std::size_t>({codes, dims, 1}));
  if (top > 0.0)
    for (std::size_t r = 0; r < codes; ++r)
      for (std::size_t c = 1; c <= dims; ++c) {
        const double v = cell(t, r, c);
        const double side = 0.9 * w * std::sqrt(std::abs(v) / top);
        const double cx = kMargin + (static_cast<double>(c - 1) + 0.5) * w;
        const double cy = kMargin + (static_cast<double>(r) + 0.5) * w;
        svg.rect(cx - side / 2, cy - side / 2, side, side, v >= 0.0 ? "#222222" : "#ffffff", "#222222");
      }
  frame(svg, kMargin, kMargin, w * static_cast<double>(dims), w * static_cast<double>(codes));
  svg.text(s / 2, s - 8, "component", 11, "middle");
  svg.text(10, s / 2, "code", 11, "middle");
  svg.text(s / 2, 16, t.name, 11, "middle");
  return svg.str();
}

std::string plot_activity(const svq::AnalysisTable& t, std::size_t size) {
  const std::size_t grid = static_cast<std::size_t>(svq::parse_number(attribute(t, "grid"), "grid"));
  const std::size_t first = column(t, "phi_b") + 1;
  const std::size_t nodes = t.columns.size() - first;
  const std::size_t per_row = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(nodes)))));
  const std::size_t rows = nodes == 0 ? 1 : (nodes + per_row - 1) / per_row;
  const double s = static_cast<double>(size);
  Svg svg(s, s);
  const double panel = (s - 2 * kMargin) / static_cast<double>(std::max(per_row, rows));
  const double w = (panel - 4.0) / static_cast<double>(grid);
  const auto ci = column(t, "i");
  const auto cj = column(t, "j");
  for (std::size_t n = 0; n < nodes; ++n) {
    const double px = kMargin + static_cast<double>(n % per_row) * panel;
    const double py = kMargin + static_cast<double>(n / per_row) * panel;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double i = cell(t, r, ci);
      const double j = cell(t, r, cj);
      svg.rect(px + i * w, py + (panel - 4.0) - (j + 1) * w, w, w, ramp_colour(cell(t, r, first + n)));
    }
    frame(svg, px, py, panel - 4.0, panel - 4.0);
  }
  svg.text(s / 2, 16, t.name, 11, "middle");
  return svg.str();
}

std::string plot_curves(const svq::AnalysisTable& t, std::size_t size) {
  const double s = static_cast<double>(size);
  Svg svg(s, s);
  const double inner = s - 2 * kMargin;
  double xmin = 0.0, xmax = 1.0, ymax = 0.0;
  if (!t.rows.empty()) {
    xmin = cell(t, 0, 0);
    xmax = cell(t, t.rows.size() - 1, 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      for (std::size_t c = 1; c < t.columns.size(); ++c) ymax = std::max(ymax, cell(t, r, c));
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= 0.0) ymax = 1.0;
  for (std::size_t c = 1; c < t.columns.size(); ++c) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      pts.emplace_back(kMargin + inner * (cell(t, r, 0) - xmin) / (xmax - xmin),
                       kMargin + inner * (1.0 - cell(t, r, c) / ymax));
    svg.polyline(pts, series_colour(c - 1), 1.2);
  }
  frame(svg, kMargin, kMargin, inner, inner);
  svg.text(s / 2, s - 8, t.columns.empty() ? "" : t.columns.front(), 11, "middle");
  svg.text(s / 2, 16, t.name, 11, "middle");
  return svg.str();
}

std::string plot_trace(const svq::TrainingTrace& trace, std::size_t size) {
  const double s = static_cast<double>(size);
  Svg svg(s, s);
  const double inner = s - 2 * kMargin;
  double ymax = 0.0;
  for (const auto& e : trace.epochs) ymax = std::max(ymax, e.weighted_total);
  if (ymax <= 0.0) ymax = 1.0;
  const double span = trace.epochs.size() > 1 ? static_cast<double>(trace.epochs.size() - 1) : 1.0;
  std::vector<std::pair<double, double>> total;
  std::vector<std::vector<std::pair<double, double>>> stages;
  for (std::size_t k = 0; k < trace.epochs.size(); ++k) {
    const auto& e = trace.epochs[k];
    const double x = kMargin + inner * static_cast<double>(k) / span;
    total.emplace_back(x, kMargin + inner * (1.0 - e.weighted_total / ymax));
    stages.resize(e.stages.size());
    for (std::size_t l = 0; l < e.stages.size(); ++l)
      stages[l].emplace_back(x, kMargin + inner * (1.0 - std::min(1.0, e.stages[l].total / ymax)));
  }
  for (std::size_t l = 0; l < stages.size(); ++l) svg.polyline(stages[l], series_colour(l + 1), 0.8);
  svg.polyline(total, "#000000", 1.5);
  frame(svg, kMargin, kMargin, inner, inner);
  svg.text(s / 2, s - 8, "epoch", 11, "middle");
  svg.text(s / 2, 16, "objective", 11, "middle");
  return svg.str();
}

}  // namespace svqcli
