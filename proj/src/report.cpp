#include "rtwatch/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rtwatch/csv.hpp"
#include "rtwatch/errors.hpp"

namespace fs = std::filesystem;

namespace rtwatch {

// ---------------------------------------------------------------------------
// Tables

void emit_estimates(const RtEstimate& estimate, std::ostream& out) {
  if (estimate.empty()) throw DataError("empty estimate");
  const std::string sigma = format_number(estimate.sigma);
  out << "date,rt_mode,rt_mean,hdi_low,hdi_high,sigma,flagged\n";
  for (const auto& r : estimate.records) {
    out << r.date.iso() << ',' << csv::format_fixed(r.mode, kEstimateDecimals) << ','
        << csv::format_fixed(r.mean, kEstimateDecimals) << ',' << csv::format_fixed(r.hdi_low, kEstimateDecimals)
        << ',' << csv::format_fixed(r.hdi_high, kEstimateDecimals) << ',' << sigma << ',' << (r.flagged ? 1 : 0)
        << '\n';
  }
}

void emit_estimates(const RtEstimate& estimate, const fs::path& path) {
  std::ostringstream buf;
  emit_estimates(estimate, buf);
  write_text_file(path, buf.str());
}

RtEstimate read_estimates(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw DataError("estimates: empty file");
  csv::Header header(fields);
  const auto date_col = header.require("date");
  const auto mode_col = header.require("rt_mode");
  const auto mean_col = header.require("rt_mean");
  const auto low_col = header.require("hdi_low");
  const auto high_col = header.require("hdi_high");
  const auto sigma_col = header.require("sigma");
  const auto flag_col = header.require("flagged");

  auto number = [&](std::size_t col) {
    auto v = col < fields.size() ? csv::parse_double(fields[col]) : std::nullopt;
    if (!v) throw DataError(fmt::format("estimates: bad value in row {}", reader.records_read()));
    return *v;
  };

  RtEstimate est;
  while (reader.next(fields)) {
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;
    RtRecord r;
    r.date = Date::from_iso(csv::trim(fields.at(date_col)));
    r.mode = number(mode_col);
    r.mean = number(mean_col);
    r.hdi_low = number(low_col);
    r.hdi_high = number(high_col);
    r.flagged = number(flag_col) != 0.0;
    est.sigma = number(sigma_col);
    est.records.push_back(r);
  }
  if (est.empty()) throw DataError("estimates: no rows");
  return est;
}

RtEstimate read_estimates(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("estimates file not found: " + path.string());
  return read_estimates(in);
}

void write_case_series(const CaseSeries& series, std::ostream& out, const std::vector<double>& true_r) {
  if (!true_r.empty() && true_r.size() != series.size()) throw DataError("true_r length mismatch");
  out << "date,new_cases" << (true_r.empty() ? "" : ",true_r") << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << series.dates[i].iso() << ',' << series.counts[i];
    if (!true_r.empty()) out << ',' << format_number(true_r[i]);
    out << '\n';
  }
}

CaseSeries read_case_series(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw DataError("case series: empty file");
  csv::Header header(fields);
  const auto date_col = header.require("date");
  const auto cases_col = header.require("new_cases");
  CaseSeries series;
  series.source_label = "csv";
  while (reader.next(fields)) {
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;
    auto date = Date::parse_iso(csv::trim(fields.at(date_col)));
    auto v = cases_col < fields.size() ? csv::parse_double(fields[cases_col]) : std::nullopt;
    if (!date || !v || *v < 0.0 || *v != std::floor(*v))
      throw DataError(fmt::format("case series: bad row {}", reader.records_read()));
    series.dates.push_back(*date);
    series.counts.push_back(static_cast<std::int64_t>(*v));
  }
  series.validate();
  return series;
}

CaseSeries read_case_series(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("case series file not found: " + path.string());
  auto series = read_case_series(in);
  series.source_label = path.filename().string();
  return series;
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("cannot write '" + path.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot write '" + path.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 540.0;
constexpr double kLeft = 80.0;
constexpr double kRight = kWidth - 80.0;
constexpr double kTop = 50.0;
constexpr double kBottom = kHeight - 100.0;

constexpr std::string_view kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                         "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return csv::format_fixed(v, 2); }

double nice_step(double span, int target) {
  double raw = span / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double f = raw / mag;
  double nice = f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0;
  return nice * mag;
}

struct Scale {
  AxisRange range;
  double step = 1.0;

  double y(double v) const { return kBottom - (v - range.low) / (range.high - range.low) * (kBottom - kTop); }
  int decimals() const { return std::max(0, static_cast<int>(-std::floor(std::log10(step) + 1e-9))); }
  std::vector<double> ticks() const {
    std::vector<double> out;
    for (int i = 0;; ++i) {
      double v = range.low + i * step;
      if (v > range.high + step * 1e-6) break;
      out.push_back(v);
    }
    return out;
  }
};

Scale make_scale(std::optional<AxisRange> fixed, double lo, double hi, bool any) {
  Scale s;
  if (fixed) {
    s.range = *fixed;
    double span = s.range.high - s.range.low;
    bool integral = s.range.low == std::floor(s.range.low) && s.range.high == std::floor(s.range.high);
    s.step = integral && span <= 10.0 ? 1.0 : nice_step(span, 5);
    return s;
  }
  if (!any) {
    lo = 0.0;
    hi = 1.0;
  } else if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  s.step = nice_step(hi - lo, 5);
  s.range = {std::floor(lo / s.step) * s.step, std::ceil(hi / s.step) * s.step};
  return s;
}

std::vector<Date> date_ticks(Date first, Date last) {
  std::vector<Date> ticks;
  const int span = last - first;
  if (span <= 70) {
    for (Date d = first; d <= last; d = d + 7) ticks.push_back(d);
    return ticks;
  }
  const int months = span <= 300 ? 1 : span <= 900 ? 3 : 6;
  std::chrono::year_month_day ymd{first.to_sys_days()};
  std::chrono::year_month ym{ymd.year(), ymd.month()};
  if (ymd.day() != std::chrono::day{1}) ym += std::chrono::months{1};
  while (true) {
    unsigned m = static_cast<unsigned>(ym.month());
    Date d = Date::from_sys_days(std::chrono::sys_days{ym / std::chrono::day{1}});
    if (d > last) break;
    if ((m - 1) % static_cast<unsigned>(months) == 0) ticks.push_back(d);
    ym += std::chrono::months{1};
  }
  return ticks;
}

struct Layout {
  const JoinedTable& table;
  Date first;
  double span;

  double x(std::size_t row) const {
    return kLeft + static_cast<double>(table.dates()[row] - first) / span * (kRight - kLeft);
  }
  double x(Date d) const { return kLeft + static_cast<double>(d - first) / span * (kRight - kLeft); }
};

void polyline(std::ostringstream& svg, const std::vector<std::pair<double, double>>& pts, const std::string& color) {
  if (pts.size() == 1) {
    svg << "<circle cx=\"" << num(pts[0].first) << "\" cy=\"" << num(pts[0].second) << "\" r=\"2\" fill=\"" << color
        << "\"/>\n";
    return;
  }
  svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) svg << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
  svg << "\"/>\n";
}

}  // namespace

std::string chart_overlay(const JoinedTable& table, const ChartSpec& spec) {
  std::vector<const JoinedTable::Column*> cols;
  for (const auto& s : spec.series) cols.push_back(&table.column(s.column));
  const JoinedTable::Column* band_low = spec.band ? &table.column(spec.band->low_column) : nullptr;
  const JoinedTable::Column* band_high = spec.band ? &table.column(spec.band->high_column) : nullptr;

  bool has_right = false;
  double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
  bool any[2] = {false, false};
  auto include = [&](int axis, std::optional<double> v) {
    if (!v || !std::isfinite(*v)) return;
    lo[axis] = std::min(lo[axis], *v);
    hi[axis] = std::max(hi[axis], *v);
    any[axis] = true;
  };
  for (std::size_t k = 0; k < cols.size(); ++k) {
    int axis = spec.series[k].axis == Axis::right ? 1 : 0;
    has_right = has_right || axis == 1;
    for (auto v : cols[k]->values) include(axis, v);
  }
  if (band_low) {
    for (auto v : band_low->values) include(0, v);
    for (auto v : band_high->values) include(0, v);
  }
  const bool has_data = any[0] || any[1];
  if (spec.reference_line && any[0]) include(0, spec.reference_line);
  has_right = has_right || spec.right_range.has_value();

  const Scale left = make_scale(spec.left_range, lo[0], hi[0], any[0]);
  const Scale right = make_scale(spec.right_range, lo[1], hi[1], any[1]);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
      << "\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<title>" << xml_escape(spec.title) << "</title>\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(spec.title) << "</text>\n";

  // Axes and gridlines.
  svg << "<g stroke=\"#e0e0e0\" stroke-width=\"1\">\n";
  for (double v : left.ticks())
    svg << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kRight) << "\" y1=\"" << num(left.y(v)) << "\" y2=\""
        << num(left.y(v)) << "\"/>\n";
  svg << "</g>\n";
  svg << "<g stroke=\"#333333\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kRight) << "\" y1=\"" << num(kBottom) << "\" y2=\""
      << num(kBottom) << "\"/>\n"
      << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" y2=\""
      << num(kBottom) << "\"/>\n";
  if (has_right)
    svg << "<line x1=\"" << num(kRight) << "\" x2=\"" << num(kRight) << "\" y1=\"" << num(kTop) << "\" y2=\""
        << num(kBottom) << "\"/>\n";
  svg << "</g>\n";

  svg << "<g text-anchor=\"end\">\n";
  for (double v : left.ticks())
    svg << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(left.y(v) + 4) << "\">"
        << csv::format_fixed(v, left.decimals()) << "</text>\n";
  svg << "</g>\n";
  if (has_right) {
    svg << "<g text-anchor=\"start\">\n";
    for (double v : right.ticks())
      svg << "<text x=\"" << num(kRight + 6) << "\" y=\"" << num(right.y(v) + 4) << "\">"
          << csv::format_fixed(v, right.decimals()) << "</text>\n";
    svg << "</g>\n";
  }
  const double mid_y = (kTop + kBottom) / 2;
  if (!spec.left_label.empty())
    svg << "<text x=\"20\" y=\"" << num(mid_y) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << num(mid_y)
        << ")\">" << xml_escape(spec.left_label) << "</text>\n";
  if (has_right && !spec.right_label.empty())
    svg << "<text x=\"" << num(kWidth - 20) << "\" y=\"" << num(mid_y)
        << "\" text-anchor=\"middle\" transform=\"rotate(90 " << num(kWidth - 20) << ' ' << num(mid_y) << ")\">"
        << xml_escape(spec.right_label) << "</text>\n";

  if (!table.empty()) {
    const Layout layout{table, table.dates().front(), std::max(1.0, double(table.dates().back() - table.dates().front()))};
    svg << "<g text-anchor=\"middle\">\n";
    for (Date d : date_ticks(table.dates().front(), table.dates().back())) {
      double x = layout.x(d);
      svg << "<line x1=\"" << num(x) << "\" x2=\"" << num(x) << "\" y1=\"" << num(kBottom) << "\" y2=\""
          << num(kBottom + 5) << "\" stroke=\"#333333\"/>\n"
          << "<text x=\"" << num(x) << "\" y=\"" << num(kBottom + 18) << "\">" << d.iso() << "</text>\n";
    }
    svg << "</g>\n";

    if (band_low) {
      const std::size_t n = table.rows();
      std::size_t i = 0;
      while (i < n) {
        if (!band_low->values[i] || !band_high->values[i]) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < n && band_low->values[j] && band_high->values[j]) ++j;
        svg << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
        for (std::size_t k = i; k < j; ++k)
          svg << (k > i ? " " : "") << num(layout.x(k)) << ',' << num(left.y(*band_high->values[k]));
        for (std::size_t k = j; k-- > i;) svg << ' ' << num(layout.x(k)) << ',' << num(left.y(*band_low->values[k]));
        svg << "\"/>\n";
        i = j;
      }
    }

    if (spec.reference_line && any[0])
      svg << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kRight) << "\" y1=\"" << num(left.y(*spec.reference_line))
          << "\" y2=\"" << num(left.y(*spec.reference_line)) << "\" stroke=\"#555555\" stroke-dasharray=\"4 3\"/>\n";

    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto& s = spec.series[k];
      const Scale& scale = s.axis == Axis::right ? right : left;
      const std::string color = s.color.empty() ? std::string(kPalette[k % std::size(kPalette)]) : s.color;
      const auto& values = cols[k]->values;
      std::vector<std::pair<double, double>> run;
      for (std::size_t r = 0; r < values.size(); ++r) {
        if (!values[r]) {
          if (!run.empty()) polyline(svg, run, color);
          run.clear();
          continue;
        }
        double y = scale.y(*values[r]);
        if (s.style == SeriesStyle::step && !run.empty()) run.emplace_back(layout.x(r), run.back().second);
        run.emplace_back(layout.x(r), y);
      }
      if (!run.empty()) polyline(svg, run, color);
    }
  }

  if (!has_data)
    svg << "<text x=\"" << num((kLeft + kRight) / 2) << "\" y=\"" << num(mid_y)
        << "\" text-anchor=\"middle\" font-size=\"16\" fill=\"#777777\">no data</text>\n";

  // Legend.
  double lx = kLeft;
  const double ly = kHeight - 40;
  auto legend = [&](const std::string& color, const std::string& label, bool block) {
    if (block)
      svg << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\" width=\"18\" height=\"10\" fill=\"" << color
          << "\" fill-opacity=\"0.25\"/>\n";
    else
      svg << "<line x1=\"" << num(lx) << "\" x2=\"" << num(lx + 18) << "\" y1=\"" << num(ly - 3) << "\" y2=\""
          << num(ly - 3) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(lx + 24) << "\" y=\"" << num(ly + 1) << "\">" << xml_escape(label) << "</text>\n";
    lx += 40.0 + 6.5 * static_cast<double>(label.size());
  };
  svg << "<g>\n";
  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const std::string color = s.color.empty() ? std::string(kPalette[k % std::size(kPalette)]) : s.color;
    std::string label = s.label.empty() ? s.column : s.label;
    if (has_right) label += s.axis == Axis::right ? " (right)" : " (left)";
    legend(color, label, false);
  }
  if (spec.band) legend("#1f77b4", spec.band->label.empty() ? "credible interval" : spec.band->label, true);
  svg << "</g>\n</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------
// Presets

namespace {

SeriesSpec line(std::string column, std::string label, Axis axis = Axis::left) {
  return {std::move(column), std::move(label), axis, SeriesStyle::line, ""};
}

SeriesSpec step(std::string column, std::string label) {
  return {std::move(column), std::move(label), Axis::right, SeriesStyle::step, ""};
}

std::vector<ChartSpec> build_presets() {
  std::vector<ChartSpec> p;
  {
    ChartSpec c;
    c.name = "fig1";
    c.title = "Cases, stringency index and residential mobility";
    c.series = {line("new_cases", "new cases"), step("stringency_index", "stringency index"),
                line("residential", "residential % change (7-day avg)", Axis::right)};
    c.left_label = "daily new cases";
    c.right_label = "index / % change from baseline";
    p.push_back(c);
  }
  {
    ChartSpec c;
    c.name = "fig2";
    c.title = "R-value and stringency index";
    c.series = {line("rt_mode", "R (posterior mode)"), step("stringency_index", "stringency index")};
    c.band = BandSpec{"hdi_low", "hdi_high", "90% HDI"};
    c.left_label = "R";
    c.right_label = "stringency index";
    c.right_range = AxisRange{0.0, 100.0};
    c.reference_line = 1.0;
    p.push_back(c);
  }
  {
    ChartSpec c;
    c.name = "fig3";
    c.title = "Grocery and pharmacy mobility and restrictions on internal movement";
    c.series = {line("grocery_pharmacy", "grocery & pharmacy % change (7-day avg)"),
                step("c7_internal_movement", "C7 internal movement")};
    c.left_label = "% change from baseline";
    c.right_label = "C7 level";
    c.right_range = AxisRange{0.0, 2.0};
    p.push_back(c);
  }
  {
    ChartSpec c;
    c.name = "fig4";
    c.title = "Transit stations mobility and transport restrictions";
    c.series = {line("transit_stations", "transit stations % change (7-day avg)"),
                step("c5_close_public_transport", "C5 close public transport"),
                step("c7_internal_movement", "C7 internal movement")};
    c.left_label = "% change from baseline";
    c.right_label = "indicator level";
    c.right_range = AxisRange{0.0, 2.0};
    p.push_back(c);
  }
  {
    ChartSpec c;
    c.name = "fig5";
    c.title = "Workplace mobility, school closing and public transport";
    c.series = {line("workplaces", "workplaces % change (7-day avg)"), step("c1_school_closing", "C1 school closing"),
                step("c5_close_public_transport", "C5 close public transport")};
    c.left_label = "% change from baseline";
    c.right_label = "indicator level";
    c.right_range = AxisRange{0.0, 3.0};
    p.push_back(c);
  }
  {
    ChartSpec c;
    c.name = "fig6";
    c.title = "Search interest over time";
    c.left_label = "interest (0-100)";
    c.left_range = AxisRange{0.0, 100.0};
    p.push_back(c);
  }
  {
    ChartSpec c;
    c.name = "fig7";
    c.title = "R-value and government policies";
    c.series = {line("rt_mode", "R (posterior mode)"), step("c1_school_closing", "C1 school closing"),
                step("c6_stay_at_home", "C6 stay at home"), step("c8_international_travel", "C8 international travel"),
                step("h7_vaccination_policy", "H7 vaccination policy")};
    c.band = BandSpec{"hdi_low", "hdi_high", "90% HDI"};
    c.left_label = "R";
    c.right_label = "indicator level";
    c.right_range = AxisRange{0.0, 5.0};
    c.reference_line = 1.0;
    p.push_back(c);
  }
  return p;
}

}  // namespace

const std::vector<ChartSpec>& figure_presets() {
  static const std::vector<ChartSpec> presets = build_presets();
  return presets;
}

std::optional<ChartSpec> find_preset(std::string_view name) {
  for (const auto& p : figure_presets())
    if (p.name == name) return p;
  return std::nullopt;
}

ChartSpec trends_chart(const JoinedTable& trends) {
  ChartSpec spec = *find_preset("fig6");
  for (const auto& col : trends.columns()) spec.series.push_back(line(col.name, col.name));
  return spec;
}

std::string index_html(std::string_view title, const std::vector<std::pair<std::string, std::string>>& links) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>" << xml_escape(title)
      << "</title>\n</head>\n<body>\n<h1>" << xml_escape(title) << "</h1>\n<ul>\n";
  for (const auto& [label, href] : links)
    out << "<li><a href=\"" << xml_escape(href) << "\">" << xml_escape(label) << "</a></li>\n";
  out << "</ul>\n</body>\n</html>\n";
  return out.str();
}

}  // namespace rtwatch
