#include <ntx/svg.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ntx {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                          "#bcbd22", "#17becf"};
constexpr int kPaletteSize = 10;

std::string heat_color(double t) {
  // white -> red ramp
  t = std::clamp(t, 0.0, 1.0);
  const int g = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#ff%02x%02x", g, g);
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

void svg_scatter(const Matrix& points, const std::vector<int>& labels,
                 const std::string& path, const std::string& title) {
  require(points.cols() == 2, "svg_scatter: points must be n x 2");
  require(labels.size() == static_cast<std::size_t>(points.rows()),
          "svg_scatter: one label per point");
  const double w = 640, h = 480, margin = 40;

  double xmin = points.col(0).minCoeff(), xmax = points.col(0).maxCoeff();
  double ymin = points.col(1).minCoeff(), ymax = points.col(1).maxCoeff();
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
      << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h
      << "\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << w / 2
        << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\">"
        << xml_escape(title) << "</text>\n";
  for (Index i = 0; i < points.rows(); ++i) {
    const double px =
        margin + (points(i, 0) - xmin) / (xmax - xmin) * (w - 2 * margin);
    const double py =
        h - margin - (points(i, 1) - ymin) / (ymax - ymin) * (h - 2 * margin);
    const int label = labels[static_cast<std::size_t>(i)];
    const char* color =
        kPalette[((label % kPaletteSize) + kPaletteSize) % kPaletteSize];
    out << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py)
        << "\" r=\"4\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
  }
  out << "</svg>\n";
}

void svg_token_heatmap(const std::vector<std::string>& tokens,
                       const std::vector<double>& scores,
                       const std::string& path, const std::string& title) {
  require(tokens.size() == scores.size(),
          "svg_token_heatmap: one score per token");
  require(!tokens.empty(), "svg_token_heatmap: empty input");
  const double cell_w = 72, cell_h = 28, margin = 10, title_h = 24;
  const int per_row = 8;
  const int rows =
      static_cast<int>((tokens.size() + per_row - 1) / per_row);
  const double w = margin * 2 + cell_w * std::min<std::size_t>(
                                            tokens.size(), per_row);
  const double h = margin * 2 + title_h + cell_h * rows;

  const double max_score =
      *std::max_element(scores.begin(), scores.end());
  const double denom = max_score > 0.0 ? max_score : 1.0;

  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
      << "\">\n<rect width=\"" << w << "\" height=\"" << h
      << "\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << margin << "\" y=\"" << margin + 12
        << "\" font-family=\"sans-serif\" font-size=\"13\">"
        << xml_escape(title) << "</text>\n";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double x = margin + cell_w * static_cast<double>(i % per_row);
    const double y =
        margin + title_h + cell_h * static_cast<double>(i / per_row);
    out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
        << cell_w - 2 << "\" height=\"" << cell_h - 2 << "\" fill=\""
        << heat_color(scores[i] / denom) << "\" stroke=\"#ccc\"/>\n";
    out << "<text x=\"" << fmt(x + cell_w / 2 - 1) << "\" y=\""
        << fmt(y + cell_h / 2 + 4)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << xml_escape(tokens[i]) << "</text>\n";
  }
  out << "</svg>\n";
}

void svg_grid_heatmap(const Matrix& weights,
                      const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels,
                      const std::string& path, const std::string& title) {
  require(weights.rows() >= 1 && weights.cols() >= 1,
          "svg_grid_heatmap: empty grid");
  require(row_labels.empty() ||
              row_labels.size() == static_cast<std::size_t>(weights.rows()),
          "svg_grid_heatmap: row label count");
  require(col_labels.empty() ||
              col_labels.size() == static_cast<std::size_t>(weights.cols()),
          "svg_grid_heatmap: column label count");
  const double cell = 34, label_w = 90, label_h = 70, margin = 10,
               title_h = title.empty() ? 0 : 24;
  const double w = margin * 2 + label_w + cell * weights.cols();
  const double h = margin * 2 + title_h + label_h + cell * weights.rows();

  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
      << "\">\n<rect width=\"" << w << "\" height=\"" << h
      << "\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << margin << "\" y=\"" << margin + 12
        << "\" font-family=\"sans-serif\" font-size=\"13\">"
        << xml_escape(title) << "</text>\n";
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    const double x = margin + label_w + cell * (static_cast<double>(c) + 0.5);
    const double y = margin + title_h + label_h - 8;
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y)
        << "\" text-anchor=\"start\" font-family=\"sans-serif\" "
           "font-size=\"11\" transform=\"rotate(-60 "
        << fmt(x) << ' ' << fmt(y) << ")\">" << xml_escape(col_labels[c])
        << "</text>\n";
  }
  for (Index r = 0; r < weights.rows(); ++r) {
    const double y = margin + title_h + label_h + cell * r;
    if (!row_labels.empty())
      out << "<text x=\"" << fmt(margin + label_w - 6) << "\" y=\""
          << fmt(y + cell / 2 + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
             "font-size=\"11\">"
          << xml_escape(row_labels[static_cast<std::size_t>(r)])
          << "</text>\n";
    for (Index c = 0; c < weights.cols(); ++c) {
      const double x = margin + label_w + cell * c;
      out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
          << cell - 1 << "\" height=\"" << cell - 1 << "\" fill=\""
          << heat_color(weights(r, c)) << "\" stroke=\"#ddd\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace ntx
