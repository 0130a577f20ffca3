#pragma once

#include <ntx/types.hpp>

#include <string>
#include <vector>

namespace ntx {

// Scatter plot of n x 2 points colored by integer label (Fig. 2/3-style
// document-embedding maps).
void svg_scatter(const Matrix& points, const std::vector<int>& labels,
                 const std::string& path, const std::string& title = "");

// One colored cell per token, linear color scale normalized over the given
// scores (saliency heatmaps).
void svg_token_heatmap(const std::vector<std::string>& tokens,
                       const std::vector<double>& scores,
                       const std::string& path,
                       const std::string& title = "");

// Row x column heatmap of weights in [0, 1] (attention maps: rows are
// decoding steps, columns source positions).
void svg_grid_heatmap(const Matrix& weights,
                      const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels,
                      const std::string& path, const std::string& title = "");

std::string xml_escape(const std::string& s);

}  // namespace ntx
