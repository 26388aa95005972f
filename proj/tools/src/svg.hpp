#pragma once

#include <string>
#include <vector>

#include "svq/persistence.hpp"

namespace svqcli {

/// Minimal SVG builder with fixed two-decimal coordinates so output bytes are reproducible.
class Svg {
public:
  Svg(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width,
            bool dashed = false);
  void polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke, double width);
  void circle(double cx, double cy, double r, const std::string& fill, const std::string& stroke = "none");
  void text(double x, double y, const std::string& content, double size = 10, const std::string& anchor = "start");

  std::string str() const;

private:
  double width_;
  double height_;
  std::string body_;
};

/// Maps [0, 1] onto a dark-to-light colour ramp.
std::string ramp_colour(double t);
/// Distinct colour for series k.
std::string series_colour(std::size_t k);

std::string plot_heatmap(const svq::AnalysisTable& table, std::size_t size);
std::string plot_connectivity(const svq::AnalysisTable& table, std::size_t size);
std::string plot_activity(const svq::AnalysisTable& table, std::size_t size);
std::string plot_codebook(const svq::AnalysisTable& table, std::size_t size);
std::string plot_curves(const svq::AnalysisTable& table, std::size_t size);
std::string plot_trace(const svq::TrainingTrace& trace, std::size_t size);

}  // namespace svqcli
