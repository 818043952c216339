#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtwatch/date.hpp"
#include "rtwatch/rt_core.hpp"

namespace rtwatch {

struct Snapshot;

// A value the parser changed or could not read as-is.
struct Flag {
  Date date;
  std::string field;
  std::string reason;
};

// Ledger of how raw new-case values were altered on the way into a CaseSeries.
struct ClampAudit {
  double raw_total = 0.0;      // sum of every parsed value, negatives included
  double clamped_total = 0.0;  // sum of negative values replaced by 0
  std::size_t clamped_days = 0;
  std::size_t missing_days = 0;  // blank cells plus calendar gaps, filled with 0

  // Sum of the counts that made it into the series.
  double kept_total() const { return raw_total - clamped_total; }
};

struct OwidData {
  CaseSeries cases;
  std::optional<SmoothedSeries> source_smoothed;  // OWID's own 7-day column, when present
  std::string location;
  ClampAudit audit;
  std::vector<Flag> flags;

  // Sum of the kept daily counts.
  std::int64_t cumulative_total() const;
};

enum class Indicator : std::size_t {
  school_closing = 0,         // C1, 0-3
  close_public_transport,     // C5, 0-2
  stay_at_home,               // C6, 0-3
  internal_movement,          // C7, 0-2
  international_travel,       // C8, 0-4
  vaccination_policy,         // H7, 0-5
};

inline constexpr std::size_t kIndicatorCount = 6;

struct IndicatorInfo {
  std::string_view code;
  std::string_view column;  // joined-table column name
  int max_level;
};

const IndicatorInfo& indicator_info(Indicator which);

struct PolicyRecord {
  Date date;
  std::optional<double> stringency_index;
  // Every stringency column the file carries, by upstream column name.
  std::map<std::string, double> stringency_variants;
  std::array<std::optional<int>, kIndicatorCount> indicators{};
  std::vector<std::string> flags;

  std::optional<int> indicator(Indicator which) const { return indicators[static_cast<std::size_t>(which)]; }
};

enum class MobilityCategory : std::size_t {
  retail_recreation = 0,
  grocery_pharmacy,
  parks,
  transit_stations,
  workplaces,
  residential,
};

inline constexpr std::size_t kMobilityCategoryCount = 6;

std::string_view mobility_category_name(MobilityCategory which);

struct MobilityRecord {
  Date date;
  std::array<std::optional<double>, kMobilityCategoryCount> categories{};
  std::vector<std::string> flags;

  std::optional<double> get(MobilityCategory which) const { return categories[static_cast<std::size_t>(which)]; }
};

struct MobilityData {
  std::vector<MobilityRecord> records;
  std::vector<std::string> warnings;
};

struct TrendsRecord {
  Date date;
  std::string term;
  int interest = 0;
  std::vector<std::string> flags;
};

// OWID compact/full CSV. Missing or negative new-case cells become 0 and are
// flagged; calendar gaps are filled with 0.
OwidData parse_owid(std::istream& in, std::string_view iso_code);
OwidData parse_owid(const Snapshot& snapshot, std::string_view iso_code);

// OxCGRT national CSV. `country` matches CountryCode or a normalized CountryName.
std::vector<PolicyRecord> parse_oxcgrt(std::istream& in, std::string_view country);
std::vector<PolicyRecord> parse_oxcgrt(const Snapshot& snapshot, std::string_view country);

// Google community mobility CSV. `country` is a name, alpha-2 or alpha-3 code.
MobilityData parse_mobility(std::istream& in, std::string_view country,
                            std::optional<std::string_view> sub_region = std::nullopt);
MobilityData parse_mobility(const Snapshot& snapshot, std::string_view country,
                            std::optional<std::string_view> sub_region = std::nullopt);

// Trailing mean over the last `window_days` calendar days, present values only.
std::vector<MobilityRecord> moving_average(const std::vector<MobilityRecord>& records, int window_days = 7);

// Google Trends "interest over time" export. Non-empty `term_labels` replace
// the header's term names one-for-one.
std::vector<TrendsRecord> parse_trends(std::istream& in, const std::vector<std::string>& term_labels = {});
std::vector<TrendsRecord> parse_trends_file(const std::string& path, const std::vector<std::string>& term_labels = {});

// Date-indexed table of optional reals, one row per day.
class JoinedTable {
 public:
  struct Column {
    std::string name;
    std::vector<std::optional<double>> values;
  };

  const std::vector<Date>& dates() const { return dates_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::size_t rows() const { return dates_.size(); }
  bool empty() const { return dates_.empty(); }

  const Column* find(std::string_view name) const;
  // Throws DataError naming the column when absent.
  const Column& column(std::string_view name) const;
  std::optional<std::size_t> row_of(Date date) const;

  // Rows with from <= date <= to.
  JoinedTable slice(Date from, Date to) const;

  // Outer-joins a sparse series into the table, extending the date range.
  void add_series(const std::string& name, const std::vector<std::pair<Date, std::optional<double>>>& points);

  void write_csv(std::ostream& out) const;
  void write_jsonl(std::ostream& out) const;

 private:
  void ensure_dates(const std::vector<Date>& extra);

  std::vector<Date> dates_;
  std::vector<Column> columns_;
};

// Column names produced by join_daily, in order after "date".
const std::vector<std::string>& joined_columns();

JoinedTable join_daily(const CaseSeries& cases, const RtEstimate& rt, const std::vector<PolicyRecord>& policy,
                       const std::vector<MobilityRecord>& mobility);

// One column per term; used for the search-interest chart.
JoinedTable trends_table(const std::vector<TrendsRecord>& records);

// Shortest round-trip decimal, or "" for missing.
std::string format_number(std::optional<double> value);

}  // namespace rtwatch
