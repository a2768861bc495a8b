#pragma once

// Presentation helpers for the report subcommand: a minimal CSV reader and
// SVG scatter, box and line plots.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "core/qcmetrics.hpp"

namespace uqr::report {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column; throws FormatError when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> numbers(const std::string& name) const;
};

Table read_csv(const std::filesystem::path& path);

struct Series {
  std::string label;
  std::vector<double> x, y;
};

std::string scatter_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const Series& points, const qc::Fit* fit);
std::string lines_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);
std::string box_svg(const std::string& title, const std::string& y_label,
                    const std::vector<std::pair<std::string, qc::BoxSummary>>& boxes);

}  // namespace uqr::report
