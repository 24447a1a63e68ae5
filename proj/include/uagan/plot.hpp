#pragma once

// Static SVG scatter plots of 2-D point sets.

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "uagan/tensor.hpp"

namespace uagan {

struct NumericCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
// Header line plus rows of numbers; FormatError on ragged or non-numeric
// rows.
NumericCsv read_numeric_csv(const std::filesystem::path& path);

struct PlotInput {
  std::vector<std::array<double, 2>> real;
  std::vector<std::array<double, 2>> generated;
  std::vector<std::array<double, 2>> noise;
  // Optional discriminator evaluations on a regular grid: x, y, value in [0, 1].
  std::vector<std::array<double, 3>> heat;
};

// First two columns of a numeric CSV as points.
std::vector<std::array<double, 2>> points_from_csv(const NumericCsv& csv);
std::vector<std::array<double, 3>> heat_from_csv(const NumericCsv& csv);

// Each point becomes one <circle class="marker ..."/>; heat cells are
// <rect class="heat"/>. Axes are always drawn.
std::string render_svg(const PlotInput& input);

}  // namespace uagan
