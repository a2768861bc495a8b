#include "core/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace uqr::report {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Frame {
  double x0, x1, y0, y1;

  static Frame fit(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    const double px = 0.05 * (x1 - x0), py = 0.05 * (y1 - y0);
    return Frame{x0 - px, x1 + px, y0 - py, y1 + py};
  }
  double sx(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double sy(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& x_label, const std::string& y_label,
          bool x_ticks = true) {
  const double l = kLeft, r = kWidth - kRight, t = kTop, b = kHeight - kBottom;
  os << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << r - l << "\" height=\"" << b - t
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << l - 6 << "\" y=\"" << f.sy(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    if (!x_ticks) continue;
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    os << "<text x=\"" << f.sx(xv) << "\" y=\"" << b + 16 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
  }
  os << "<text x=\"" << (l + r) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(x_label)
     << "</text>\n";
  os << "<text transform=\"translate(16," << (t + b) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(y_label) << "</text>\n";
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FormatError("CSV lacks column '" + name + "'", 0);
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> Table::numbers(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(rows[i].at(c), &used);
      if (used != rows[i][c].size()) throw std::invalid_argument("trailing text");
      out.push_back(v);
    } catch (const std::exception&) {
      throw FormatError("CSV column '" + name + "' row " + std::to_string(i + 1) + " is not numeric", 0);
    }
  }
  return out;
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::Data, "cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV", 0);
  t.header = split_line(line);
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw FormatError(path.string() + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(t.header.size()),
                        offset);
    t.rows.push_back(std::move(fields));
    offset += line.size() + 1;
  }
  return t;
}

std::string scatter_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const Series& points, const qc::Fit* fit) {
  if (points.x.empty()) throw ContractError("scatter plot needs points");
  const auto [xmin, xmax] = std::minmax_element(points.x.begin(), points.x.end());
  const auto [ymin, ymax] = std::minmax_element(points.y.begin(), points.y.end());
  const Frame f = Frame::fit(*xmin, *xmax, *ymin, *ymax);
  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, x_label, y_label);
  for (std::size_t i = 0; i < points.x.size(); ++i)
    os << "<circle cx=\"" << f.sx(points.x[i]) << "\" cy=\"" << f.sy(points.y[i]) << "\" r=\"3\" fill=\""
       << kPalette[0] << "\"/>\n";
  if (fit && !fit->degenerate) {
    const double a = *xmin, b = *xmax;
    os << "<line x1=\"" << f.sx(a) << "\" y1=\"" << f.sy(fit->intercept + fit->slope * a) << "\" x2=\"" << f.sx(b)
       << "\" y2=\"" << f.sy(fit->intercept + fit->slope * b) << "\" stroke=\"" << kPalette[1]
       << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << kLeft + 8 << "\" y=\"" << kTop + 16 << "\">R² = " << num(fit->r2) << "</text>\n";
  } else if (fit) {
    os << "<text x=\"" << kLeft + 8 << "\" y=\"" << kTop + 16 << "\">R² undefined (degenerate)</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string lines_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) throw ContractError("line plot needs points");
  const Frame f = Frame::fit(x0, x1, y0, y1);
  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, x_label, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << f.sx(s.x[i]) << ',' << f.sy(s.y[i]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 16 + 16 * static_cast<double>(k)
       << "\" text-anchor=\"end\" fill=\"" << colour << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string box_svg(const std::string& title, const std::string& y_label,
                    const std::vector<std::pair<std::string, qc::BoxSummary>>& boxes) {
  if (boxes.empty()) throw ContractError("box plot needs groups");
  double y0 = INFINITY, y1 = -INFINITY;
  for (const auto& [_, b] : boxes) {
    y0 = std::min(y0, b.min);
    y1 = std::max(y1, b.max);
  }
  const Frame f = Frame::fit(0, static_cast<double>(boxes.size()), y0, y1);
  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, "", y_label, false);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const auto& [label, b] = boxes[k];
    const double cx = kLeft + slot * (static_cast<double>(k) + 0.5), half = std::min(40.0, slot / 4);
    const char* colour = kPalette[k % std::size(kPalette)];
    os << "<line x1=\"" << cx << "\" y1=\"" << f.sy(b.whisker_low) << "\" x2=\"" << cx << "\" y2=\""
       << f.sy(b.whisker_high) << "\" stroke=\"#444\"/>\n";
    os << "<rect x=\"" << cx - half << "\" y=\"" << f.sy(b.q3) << "\" width=\"" << 2 * half << "\" height=\""
       << std::max(1.0, f.sy(b.q1) - f.sy(b.q3)) << "\" fill=\"" << colour << "\" fill-opacity=\"0.35\" stroke=\""
       << colour << "\"/>\n";
    os << "<line x1=\"" << cx - half << "\" y1=\"" << f.sy(b.median) << "\" x2=\"" << cx + half << "\" y2=\""
       << f.sy(b.median) << "\" stroke=\"#000\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << cx << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << escape(label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace uqr::report
