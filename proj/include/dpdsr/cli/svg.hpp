#pragma once

#include <string>
#include <vector>

namespace dpdsr::cli {

struct Series {
    std::string label;
    std::vector<double> values;
    std::string color = "#1f77b4";
};

/// Line plot of each series against its sample index. Non-finite values
/// break the line.
std::string svg_line_plot(const std::string& title, const std::vector<Series>& series, const std::string& x_label = "t",
                          const std::string& y_label = "x");

/// Overlaid density histograms over a shared range.
std::string svg_histogram(const std::string& title, const std::vector<Series>& series, std::size_t bins = 40,
                          const std::string& x_label = "x");

}  // namespace dpdsr::cli
