#include "spbs/plots.hpp"

#include <algorithm>
#include <sstream>

namespace spbs {

void write_breakdown_chart(const std::vector<BreakdownRow>& rows, const std::string& title,
                           const std::string& path) {
  const int width = std::max(420, 90 + 70 * static_cast<int>(rows.size()));
  const int height = 320;
  const int left = 60, bottom = 270, top = 50;
  const double plot_h = bottom - top;
  const double group_w = (width - left - 30) / std::max<std::size_t>(rows.size(), 1);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
  for (int tick = 0; tick <= 5; ++tick) {
    double frac = tick / 5.0;
    double y = bottom - frac * plot_h;
    svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << width - 20 << "\" y2=\"" << y
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
        << format_fixed(frac, 1) << "</text>\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double x0 = left + static_cast<double>(i) * group_w + 8;
    double bar_w = (group_w - 24) / 2.0;
    double map_h = std::clamp(rows[i].map, 0.0, 1.0) * plot_h;
    double f1_h = std::clamp(rows[i].f1, 0.0, 1.0) * plot_h;
    svg << "<rect x=\"" << x0 << "\" y=\"" << bottom - map_h << "\" width=\"" << bar_w
        << "\" height=\"" << map_h << "\" fill=\"#4878cf\"/>\n";
    svg << "<rect x=\"" << x0 + bar_w + 4 << "\" y=\"" << bottom - f1_h << "\" width=\"" << bar_w
        << "\" height=\"" << f1_h << "\" fill=\"#ee854a\"/>\n";
    svg << "<text x=\"" << x0 + bar_w << "\" y=\"" << bottom + 16
        << "\" text-anchor=\"middle\">" << rows[i].bin << "</text>\n";
    svg << "<text x=\"" << x0 + bar_w << "\" y=\"" << bottom + 32
        << "\" text-anchor=\"middle\" fill=\"#777777\">n=" << rows[i].count << "</text>\n";
  }
  svg << "<rect x=\"" << left << "\" y=\"" << height - 18 << "\" width=\"12\" height=\"12\" fill=\"#4878cf\"/>"
      << "<text x=\"" << left + 16 << "\" y=\"" << height - 8 << "\">MAP</text>\n";
  svg << "<rect x=\"" << left + 70 << "\" y=\"" << height - 18 << "\" width=\"12\" height=\"12\" fill=\"#ee854a\"/>"
      << "<text x=\"" << left + 86 << "\" y=\"" << height - 8 << "\">F1</text>\n";
  svg << "</svg>\n";
  write_file(path, svg.str());
}

}  // namespace spbs
