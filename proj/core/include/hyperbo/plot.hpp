#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hyperbo {

struct LineSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional half-width of a shaded band
};

struct ViolinGroup {
  std::string label;
  std::vector<double> values;
};

// Static SVG documents. The source table is embedded verbatim in a
// <metadata> element so every figure can be re-derived from the file.
[[nodiscard]] std::string line_chart_svg(std::string_view title, std::string_view x_label, std::string_view y_label,
                                         const std::vector<LineSeries>& series, std::string_view embedded_csv = {});
[[nodiscard]] std::string violin_svg(std::string_view title, std::string_view x_label, std::string_view y_label,
                                     const std::vector<ViolinGroup>& groups, std::string_view embedded_csv = {});

// Gaussian KDE with Silverman's bandwidth, evaluated at `at`.
[[nodiscard]] std::vector<double> kde(const std::vector<double>& values, const std::vector<double>& at);

// Curves CSV (method,step,mean,std) to one regret chart.
[[nodiscard]] std::string curves_csv_to_svg(std::string_view csv, std::string_view title = "Normalized simple regret");
// Asymptotics CSV (grid,seed,parameter,value) to one violin chart per parameter.
[[nodiscard]] std::map<std::string, std::string> asymptotics_csv_to_svgs(std::string_view csv);

}  // namespace hyperbo
