#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtwatch/ingest.hpp"
#include "rtwatch/rt_core.hpp"

namespace rtwatch {

// Decimal places used for R values in the estimates CSV.
inline constexpr int kEstimateDecimals = 6;

// Estimates CSV: date,rt_mode,rt_mean,hdi_low,hdi_high,sigma,flagged with LF
// line ends. Throws DataError on an empty estimate or an unwritable path.
void emit_estimates(const RtEstimate& estimate, std::ostream& out);
void emit_estimates(const RtEstimate& estimate, const std::filesystem::path& path);

// Inverse of emit_estimates; throws DataError if the file is missing or malformed.
RtEstimate read_estimates(std::istream& in);
RtEstimate read_estimates(const std::filesystem::path& path);

// CaseSeries CSV shared by the simulator and `estimate --input`: date,new_cases[,extra...].
void write_case_series(const CaseSeries& series, std::ostream& out, const std::vector<double>& true_r = {});
CaseSeries read_case_series(std::istream& in);
CaseSeries read_case_series(const std::filesystem::path& path);

enum class Axis { left, right };
enum class SeriesStyle { line, step };

struct SeriesSpec {
  std::string column;
  std::string label;
  Axis axis = Axis::left;
  SeriesStyle style = SeriesStyle::line;
  std::string color;  // empty picks from the default palette
};

struct BandSpec {
  std::string low_column;
  std::string high_column;
  std::string label;
};

struct AxisRange {
  double low = 0.0;
  double high = 1.0;
};

struct ChartSpec {
  std::string name;
  std::string title;
  std::vector<SeriesSpec> series;
  std::optional<BandSpec> band;  // drawn on the left axis
  std::string left_label;
  std::string right_label;
  std::optional<AxisRange> left_range;   // auto-fitted when unset
  std::optional<AxisRange> right_range;  // auto-fitted when unset
  std::optional<double> reference_line;  // horizontal rule on the left axis
};

// Self-contained SVG 1.1 overlay chart. Throws DataError naming any column the
// spec references that the table lacks.
std::string chart_overlay(const JoinedTable& table, const ChartSpec& spec);

// The seven figure presets, fig1..fig7. fig6 expects the search-interest table
// and charts every column it carries.
const std::vector<ChartSpec>& figure_presets();
std::optional<ChartSpec> find_preset(std::string_view name);
// fig6 bound to the terms present in a trends table.
ChartSpec trends_chart(const JoinedTable& trends);

// Static page linking each (label, href) pair; no scripts.
std::string index_html(std::string_view title, const std::vector<std::pair<std::string, std::string>>& links);

// Writes via a temporary file and rename; throws DataError when the path is unwritable.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace rtwatch
