#ifndef CLIMAX_SVG_HPP
#define CLIMAX_SVG_HPP

// Minimal SVG charts for explanation scores and stability curves.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "climax/evaluation.hpp"
#include "climax/explainers.hpp"

namespace climax::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

/// Horizontal bars, one per top feature; positive scores in one fill and
/// negative scores in another.
inline std::string score_bars(const Explanation& e, const std::vector<std::string>& names,
                              const std::string& title) {
  const double width = 640, bar_h = 26, top = 40, label_w = 220, plot_w = width - label_w - 40;
  const double height = top + bar_h * static_cast<double>(e.top_features.size()) + 30;
  double max_abs = 0.0;
  for (const FeatureScore& f : e.top_features) max_abs = std::max(max_abs, std::abs(f.score));
  if (max_abs == 0.0) max_abs = 1.0;
  const double zero_x = label_w + plot_w / 2;

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<text x=\"10\" y=\"22\" font-size=\"14\">" + escape(title) + "</text>\n";
  double y = top;
  for (const FeatureScore& f : e.top_features) {
    const double len = (plot_w / 2) * std::abs(f.score) / max_abs;
    const double x0 = f.score >= 0 ? zero_x : zero_x - len;
    const std::string fill = f.score >= 0 ? "#2b8a3e" : "#c92a2a";
    const std::string name = static_cast<std::size_t>(f.index) < names.size()
                                 ? names[static_cast<std::size_t>(f.index)]
                                 : "x" + std::to_string(f.index);
    s += "<text x=\"10\" y=\"" + num(y + bar_h * 0.65) + "\">" + escape(name) + "</text>\n";
    s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y + 3) + "\" width=\"" + num(len) + "\" height=\"" +
         num(bar_h - 6) + "\" fill=\"" + fill + "\"/>\n";
    s += "<text x=\"" + num(width - 36) + "\" y=\"" + num(y + bar_h * 0.65) + "\" text-anchor=\"end\">" +
         num(f.score) + "</text>\n";
    y += bar_h;
  }
  s += "<line x1=\"" + num(zero_x) + "\" y1=\"" + num(top) + "\" x2=\"" + num(zero_x) + "\" y2=\"" + num(y) +
       "\" stroke=\"#333\"/>\n</svg>\n";
  return s;
}

/// Mean Jaccard against n', one polyline per method.
inline std::string stability_lines(const StabilityReport& r) {
  const double width = 640, height = 400, left = 60, right = 160, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  const std::vector<StabilitySummary> summary = r.summary();
  std::vector<std::string> methods;
  std::vector<Index> grid;
  for (const StabilitySummary& s : summary) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    if (std::find(grid.begin(), grid.end(), s.n_prime) == grid.end()) grid.push_back(s.n_prime);
  }
  std::sort(grid.begin(), grid.end());
  const double gmin = grid.empty() ? 0 : static_cast<double>(grid.front());
  const double gmax = grid.empty() ? 1 : static_cast<double>(grid.back());
  auto px = [&](double n) { return gmax > gmin ? left + pw * (n - gmin) / (gmax - gmin) : left + pw / 2; };
  auto py = [&](double j) { return top + ph * (1.0 - j); };
  static const char* colors[] = {"#1c7ed6", "#e8590c", "#2b8a3e", "#862e9c", "#c92a2a", "#495057"};

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<text x=\"" + num(left) + "\" y=\"24\" font-size=\"14\">" + escape(r.dataset) +
       ": mean top-k Jaccard</text>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double j = t / 4.0;
    s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(j) + 4) + "\" text-anchor=\"end\">" + num(j) +
         "</text>\n";
  }
  for (Index n : grid)
    s += "<text x=\"" + num(px(static_cast<double>(n))) + "\" y=\"" + num(top + ph + 18) +
         "\" text-anchor=\"middle\">" + std::to_string(n) + "</text>\n";
  s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(height - 10) + "\" text-anchor=\"middle\">n'</text>\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const std::string color = colors[m % 6];
    std::string pts;
    for (Index n : grid)
      for (const StabilitySummary& su : summary)
        if (su.method == methods[m] && su.n_prime == n && !std::isnan(su.mean_jaccard)) {
          pts += num(px(static_cast<double>(n))) + "," + num(py(su.mean_jaccard)) + " ";
          s += "<circle cx=\"" + num(px(static_cast<double>(n))) + "\" cy=\"" + num(py(su.mean_jaccard)) +
               "\" r=\"3\" fill=\"" + color + "\"/>\n";
        }
    s += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    const double ly = top + 16 + 18 * static_cast<double>(m);
    s += "<line x1=\"" + num(width - right + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
         num(width - right + 32) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(width - right + 38) + "\" y=\"" + num(ly) + "\">" + escape(methods[m]) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace climax::svg

#endif  // CLIMAX_SVG_HPP
