#pragma once

#include <string>
#include <vector>

namespace robnet {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG line chart (no external plotting dependency).
// log_y switches the vertical axis to log10; non-positive values are
// dropped from log plots.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<SvgSeries>& series, bool log_y);

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series, bool log_y);

}  // namespace robnet
