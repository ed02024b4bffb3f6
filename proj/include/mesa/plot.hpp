#pragma once

#include "mesa/image.hpp"

#include <string>
#include <vector>

namespace mesa {

struct WidthDistribution;

/// Histogram of the sample with the fitted density curve overlaid; written
/// as a PNG. An empty sample renders the curve alone.
void plot_width_distribution(const std::vector<double>& widths, const WidthDistribution& dist,
                             const std::string& path);

/// Simple labelled bar chart (one bar per value), written as a PNG.
void plot_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
               const std::string& title, const std::string& path);

/// Tiles images (resized to tile_px squares) into a labelled grid.
ImageTensor contact_sheet(const std::vector<ImageTensor>& tiles, const std::vector<std::string>& labels,
                          int columns, int tile_px);

}  // namespace mesa
