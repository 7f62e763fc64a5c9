#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "avfusion/errors.hpp"
#include "avfusion/io.hpp"

namespace avf::io {

namespace {

constexpr const char* kPalette[] = {"#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

}  // namespace

std::string boxplot_svg(const std::vector<BoxGroup>& groups, const std::vector<std::string>& model_labels,
                        const std::string& title) {
  if (groups.empty()) throw ConfigError("boxplot_svg: need at least one group");
  std::size_t n_models = model_labels.size();
  for (const auto& g : groups) n_models = std::max(n_models, g.boxes.size());
  if (n_models == 0) n_models = 1;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& g : groups) {
    for (const auto& b : g.boxes) {
      lo = std::min({lo, b.whisker_low, b.min});
      hi = std::max({hi, b.whisker_high, b.max});
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 180.0;
  }
  // Round the axis out to 10 degree ticks inside [0, 180].
  lo = std::max(0.0, std::floor(lo / 10.0) * 10.0);
  hi = std::min(180.0, std::ceil(hi / 10.0) * 10.0);
  if (hi <= lo) hi = lo + 10.0;

  const double box_w = 14.0, box_gap = 4.0, group_gap = 18.0;
  const double left = 60.0, right = 20.0, top = 40.0, plot_h = 300.0, bottom = 90.0;
  const double group_w = static_cast<double>(n_models) * (box_w + box_gap) - box_gap;
  const double plot_w = static_cast<double>(groups.size()) * (group_w + group_gap) + group_gap;
  const double width = left + plot_w + right;
  const double height = top + plot_h + bottom;
  auto y = [&](double deg) { return top + plot_h * (hi - deg) / (hi - lo); };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"white\"/>\n";
  if (!title.empty()) {
    s << "<text x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
      << "</text>\n";
  }

  // axes
  s << "<g class=\"axis\" stroke=\"black\">\n";
  s << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
    << num(top + plot_h) << "\"/>\n";
  s << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(left + plot_w)
    << "\" y2=\"" << num(top + plot_h) << "\"/>\n";
  s << "</g>\n";
  const double step = (hi - lo) > 60.0 ? 20.0 : 10.0;
  for (double t = lo; t <= hi + 1e-9; t += step) {
    s << "<line class=\"tick\" x1=\"" << num(left - 4) << "\" y1=\"" << num(y(t)) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(y(t)) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y(t) + 3) << "\" text-anchor=\"end\">" << num(t)
      << "&#176;</text>\n";
  }
  s << "<text x=\"14\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << num(top + plot_h / 2) << ")\">angle (degrees)</text>\n";

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double gx = left + group_gap + static_cast<double>(gi) * (group_w + group_gap);
    s << "<g class=\"group\">\n";
    for (std::size_t m = 0; m < g.boxes.size(); ++m) {
      const auto& b = g.boxes[m];
      const char* color = kPalette[m % std::size(kPalette)];
      const double x0 = gx + static_cast<double>(m) * (box_w + box_gap);
      const double xc = x0 + box_w / 2;
      s << "<line class=\"whisker\" x1=\"" << num(xc) << "\" y1=\"" << num(y(b.whisker_high)) << "\" x2=\""
        << num(xc) << "\" y2=\"" << num(y(b.q3)) << "\" stroke=\"black\"/>\n";
      s << "<line class=\"whisker\" x1=\"" << num(xc) << "\" y1=\"" << num(y(b.q1)) << "\" x2=\"" << num(xc)
        << "\" y2=\"" << num(y(b.whisker_low)) << "\" stroke=\"black\"/>\n";
      for (double wv : {b.whisker_low, b.whisker_high}) {
        s << "<line class=\"cap\" x1=\"" << num(x0 + 3) << "\" y1=\"" << num(y(wv)) << "\" x2=\""
          << num(x0 + box_w - 3) << "\" y2=\"" << num(y(wv)) << "\" stroke=\"black\"/>\n";
      }
      s << "<rect class=\"box\" x=\"" << num(x0) << "\" y=\"" << num(y(b.q3)) << "\" width=\"" << num(box_w)
        << "\" height=\"" << num(std::max(0.0, y(b.q1) - y(b.q3))) << "\" fill=\"" << color
        << "\" fill-opacity=\"0.6\" stroke=\"black\"/>\n";
      s << "<line class=\"median\" x1=\"" << num(x0) << "\" y1=\"" << num(y(b.median)) << "\" x2=\""
        << num(x0 + box_w) << "\" y2=\"" << num(y(b.median)) << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
      for (double o : b.outliers) {
        s << "<circle class=\"outlier\" cx=\"" << num(xc) << "\" cy=\"" << num(y(o))
          << "\" r=\"2\" fill=\"none\" stroke=\"" << color << "\"/>\n";
      }
    }
    const double lx = gx + group_w / 2;
    const double ly = top + plot_h + 12;
    s << "<text x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" text-anchor=\"end\" transform=\"rotate(-45 "
      << num(lx) << " " << num(ly) << ")\">" << escape(g.label) << "</text>\n";
    s << "</g>\n";
  }

  // legend
  for (std::size_t m = 0; m < model_labels.size(); ++m) {
    const double lx = left + 10 + static_cast<double>(m) * 110.0;
    const double ly = height - 16;
    s << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[m % std::size(kPalette)] << "\" fill-opacity=\"0.6\" stroke=\"black\"/>\n";
    s << "<text x=\"" << num(lx + 14) << "\" y=\"" << num(ly) << "\">" << escape(model_labels[m]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void render_boxplot_svg(const std::filesystem::path& path, const std::vector<BoxGroup>& groups,
                        const std::vector<std::string>& model_labels, const std::string& title) {
  write_text(path, boxplot_svg(groups, model_labels, title));
}

}  // namespace avf::io
