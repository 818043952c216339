#include "rtwatch/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "rtwatch/countries.hpp"
#include "rtwatch/csv.hpp"
#include "rtwatch/errors.hpp"
#include "rtwatch/snapshot.hpp"

namespace rtwatch {

namespace {

constexpr IndicatorInfo kIndicators[kIndicatorCount] = {
    {"C1", "c1_school_closing", 3},     {"C5", "c5_close_public_transport", 2},
    {"C6", "c6_stay_at_home", 3},       {"C7", "c7_internal_movement", 2},
    {"C8", "c8_international_travel", 4}, {"H7", "h7_vaccination_policy", 5},
};

constexpr std::string_view kMobilityNames[kMobilityCategoryCount] = {
    "retail_recreation", "grocery_pharmacy", "parks", "transit_stations", "workplaces", "residential",
};

constexpr std::string_view kMobilityColumns[kMobilityCategoryCount] = {
    "retail_and_recreation_percent_change_from_baseline",
    "grocery_and_pharmacy_percent_change_from_baseline",
    "parks_percent_change_from_baseline",
    "transit_stations_percent_change_from_baseline",
    "workplaces_percent_change_from_baseline",
    "residential_percent_change_from_baseline",
};

constexpr double kMobilitySuspect = 200.0;

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view cell(const std::vector<std::string>& row, std::size_t i) {
  return i < row.size() ? csv::trim(row[i]) : std::string_view{};
}

std::string_view cell(const std::vector<std::string>& row, std::optional<std::size_t> i) {
  return i ? cell(row, *i) : std::string_view{};
}

csv::Header read_header(csv::Reader& reader, std::string_view what) {
  std::vector<std::string> names;
  if (!reader.next(names)) throw DataError(std::string(what) + ": empty file");
  return csv::Header(std::move(names));
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool contains(std::string_view s, std::string_view part) { return s.find(part) != std::string_view::npos; }

std::istringstream snapshot_stream(const Snapshot& snapshot) {
  return std::istringstream(SnapshotCache::read(snapshot));
}

}  // namespace

const IndicatorInfo& indicator_info(Indicator which) { return kIndicators[static_cast<std::size_t>(which)]; }

std::string_view mobility_category_name(MobilityCategory which) {
  return kMobilityNames[static_cast<std::size_t>(which)];
}

std::int64_t OwidData::cumulative_total() const {
  std::int64_t total = 0;
  for (auto c : cases.counts) total += c;
  return total;
}

// ---------------------------------------------------------------------------
// OWID

OwidData parse_owid(std::istream& in, std::string_view iso_code) {
  csv::Reader reader(in);
  auto header = read_header(reader, "owid");
  const auto date_col = header.require("date");
  const auto code_col = header.require_any({"iso_code", "code"});
  const auto cases_col = header.require("new_cases");
  const auto smoothed_col = header.find("new_cases_smoothed");
  const auto location_col = header.find_any({"location", "country"});

  const std::string wanted = upper(iso_code);
  struct Row {
    Date date;
    std::optional<double> raw;
    std::optional<double> smoothed;
  };
  std::vector<Row> rows;
  std::string location;

  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (upper(cell(fields, code_col)) != wanted) continue;
    auto date = Date::parse_iso(cell(fields, date_col));
    if (!date) throw DataError("owid: malformed date '" + std::string(cell(fields, date_col)) + "'");
    if (location.empty()) location = std::string(cell(fields, location_col));
    rows.push_back({*date, csv::parse_double(cell(fields, cases_col)),
                    smoothed_col ? csv::parse_double(cell(fields, *smoothed_col)) : std::nullopt});
  }
  if (rows.empty()) throw DataError("country not found: " + std::string(iso_code));

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].date == rows[i - 1].date) throw DataError("owid: duplicate date " + rows[i].date.iso());

  OwidData out;
  out.location = location;
  out.cases.source_label = "owid:" + wanted;
  SmoothedSeries smoothed;
  smoothed.window_days = 7;
  bool any_smoothed = false;

  std::size_t next = 0;
  for (Date d = rows.front().date; d <= rows.back().date; ++d) {
    out.cases.dates.push_back(d);
    smoothed.dates.push_back(d);
    if (rows[next].date != d) {
      out.cases.counts.push_back(0);
      smoothed.values.push_back(0.0);
      ++out.audit.missing_days;
      out.flags.push_back({d, "new_cases", "date absent, filled with 0"});
      continue;
    }
    const Row& row = rows[next++];
    if (!row.raw) {
      out.cases.counts.push_back(0);
      ++out.audit.missing_days;
      out.flags.push_back({d, "new_cases", "missing, filled with 0"});
    } else if (*row.raw < 0.0) {
      out.cases.counts.push_back(0);
      out.audit.raw_total += *row.raw;
      out.audit.clamped_total += *row.raw;
      ++out.audit.clamped_days;
      out.flags.push_back({d, "new_cases", fmt::format("negative revision {} clamped to 0", *row.raw)});
    } else {
      out.cases.counts.push_back(std::llround(*row.raw));
      out.audit.raw_total += *row.raw;
    }
    if (row.smoothed) {
      any_smoothed = true;
      if (*row.smoothed < 0.0) out.flags.push_back({d, "new_cases_smoothed", "negative value clamped to 0"});
      smoothed.values.push_back(std::max(0.0, *row.smoothed));
    } else {
      smoothed.values.push_back(0.0);
    }
  }
  if (any_smoothed) out.source_smoothed = std::move(smoothed);
  return out;
}

OwidData parse_owid(const Snapshot& snapshot, std::string_view iso_code) {
  auto in = snapshot_stream(snapshot);
  return parse_owid(in, iso_code);
}

// ---------------------------------------------------------------------------
// OxCGRT

namespace {

// Upstream renamed indicator columns over time (C6_, C6M_, C6NV_, ...).
std::optional<std::size_t> find_indicator_column(const csv::Header& header, std::string_view code) {
  static constexpr std::string_view suffixes[] = {"_", "M_", "EV_", "E_", "NV_", "V_"};
  for (auto suffix : suffixes) {
    const std::string prefix = std::string(code) + std::string(suffix);
    for (std::size_t i = 0; i < header.names().size(); ++i) {
      std::string_view name = csv::trim(header.names()[i]);
      if (starts_with(name, prefix) && !contains(name, "Flag") && !contains(name, "Notes")) return i;
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<PolicyRecord> parse_oxcgrt(std::istream& in, std::string_view country) {
  csv::Reader reader(in);
  auto header = read_header(reader, "oxcgrt");
  const auto date_col = header.require("Date");
  const auto name_col = header.find("CountryName");
  const auto code_col = header.find("CountryCode");
  if (!name_col && !code_col) throw SchemaDriftError("CountryName");
  const auto region_col = header.find("RegionName");
  const auto jurisdiction_col = header.find("Jurisdiction");

  std::array<std::size_t, kIndicatorCount> indicator_cols{};
  for (std::size_t k = 0; k < kIndicatorCount; ++k) {
    auto col = find_indicator_column(header, kIndicators[k].code);
    if (!col) throw SchemaDriftError(std::string(kIndicators[k].code) + "_*");
    indicator_cols[k] = *col;
  }

  std::vector<std::pair<std::string, std::size_t>> stringency_cols;
  for (std::size_t i = 0; i < header.names().size(); ++i) {
    std::string_view name = csv::trim(header.names()[i]);
    if (starts_with(name, "Stringency") && !contains(name, "Flag") && !contains(name, "Notes"))
      stringency_cols.emplace_back(std::string(name), i);
  }
  if (stringency_cols.empty()) throw SchemaDriftError("StringencyIndex");
  static constexpr std::string_view preference[] = {"StringencyIndex", "StringencyIndex_Average",
                                                    "StringencyIndexForDisplay", "StringencyIndex_Average_ForDisplay"};
  std::string primary = stringency_cols.front().first;
  for (auto p : preference) {
    auto it = std::find_if(stringency_cols.begin(), stringency_cols.end(), [&](const auto& c) { return c.first == p; });
    if (it != stringency_cols.end()) {
      primary = it->first;
      break;
    }
  }

  const std::string wanted_code = upper(country);
  const std::string wanted_name = normalize_name(country);
  std::vector<PolicyRecord> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    bool match = (code_col && upper(cell(fields, *code_col)) == wanted_code) ||
                 (name_col && normalize_name(cell(fields, *name_col)) == wanted_name);
    if (!match) continue;
    if (jurisdiction_col) {
      auto j = cell(fields, *jurisdiction_col);
      if (!j.empty() && j != "NAT_TOTAL") continue;
    } else if (region_col && !cell(fields, *region_col).empty()) {
      continue;
    }
    auto date = Date::parse_any(cell(fields, date_col));
    if (!date) throw DataError("oxcgrt: malformed date '" + std::string(cell(fields, date_col)) + "'");

    PolicyRecord rec;
    rec.date = *date;
    for (const auto& [name, col] : stringency_cols) {
      auto v = csv::parse_double(cell(fields, col));
      if (!v) continue;
      if (*v < 0.0 || *v > 100.0) rec.flags.push_back(fmt::format("{} out of range: {}", name, *v));
      rec.stringency_variants[name] = *v;
      if (name == primary) rec.stringency_index = *v;
    }
    for (std::size_t k = 0; k < kIndicatorCount; ++k) {
      auto raw = cell(fields, indicator_cols[k]);
      if (raw.empty()) continue;
      auto v = csv::parse_double(raw);
      if (!v || *v != std::floor(*v)) {
        rec.flags.push_back(fmt::format("{} unreadable: '{}'", kIndicators[k].code, raw));
        continue;
      }
      int level = static_cast<int>(*v);
      if (level < 0 || level > kIndicators[k].max_level)
        rec.flags.push_back(fmt::format("{} out of range: {}", kIndicators[k].code, level));
      rec.indicators[k] = level;
    }
    out.push_back(std::move(rec));
  }

  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].date == out[i - 1].date) throw DataError("oxcgrt: duplicate national row for " + out[i].date.iso());
  return out;
}

std::vector<PolicyRecord> parse_oxcgrt(const Snapshot& snapshot, std::string_view country) {
  auto in = snapshot_stream(snapshot);
  return parse_oxcgrt(in, country);
}

// ---------------------------------------------------------------------------
// Google community mobility

MobilityData parse_mobility(std::istream& in, std::string_view country, std::optional<std::string_view> sub_region) {
  csv::Reader reader(in);
  auto header = read_header(reader, "mobility");
  const auto date_col = header.require("date");
  const auto name_col = header.find("country_region");
  const auto code_col = header.find("country_region_code");
  if (!name_col && !code_col) throw SchemaDriftError("country_region");
  const auto sub1_col = header.require("sub_region_1");
  const auto sub2_col = header.find("sub_region_2");
  const auto metro_col = header.find("metro_area");
  std::array<std::size_t, kMobilityCategoryCount> category_cols{};
  for (std::size_t c = 0; c < kMobilityCategoryCount; ++c) category_cols[c] = header.require(kMobilityColumns[c]);

  std::string wanted_code = upper(country);
  std::string wanted_name = normalize_name(country);
  if (auto iso = find_country(country)) {
    wanted_code = std::string(iso->alpha2);
    if (country.size() == 3) wanted_name = normalize_name(iso->name);
  }
  const std::string wanted_sub = sub_region ? normalize_name(*sub_region) : std::string();

  MobilityData out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    bool match = (code_col && upper(cell(fields, *code_col)) == wanted_code) ||
                 (name_col && normalize_name(cell(fields, *name_col)) == wanted_name);
    if (!match) continue;
    if (!cell(fields, sub2_col).empty() || !cell(fields, metro_col).empty()) continue;
    auto sub1 = cell(fields, sub1_col);
    if (sub_region ? normalize_name(sub1) != wanted_sub : !sub1.empty()) continue;

    auto date = Date::parse_iso(cell(fields, date_col));
    if (!date) throw DataError("mobility: malformed date '" + std::string(cell(fields, date_col)) + "'");
    MobilityRecord rec;
    rec.date = *date;
    for (std::size_t c = 0; c < kMobilityCategoryCount; ++c) {
      auto v = csv::parse_double(cell(fields, category_cols[c]));
      if (!v) continue;
      if (std::abs(*v) > kMobilitySuspect) rec.flags.push_back(fmt::format("{} suspect: {}", kMobilityNames[c], *v));
      rec.categories[c] = *v;
    }
    out.records.push_back(std::move(rec));
  }

  std::stable_sort(out.records.begin(), out.records.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.records.size(); ++i)
    if (out.records[i].date == out.records[i - 1].date)
      throw DataError("mobility: duplicate row for " + out.records[i].date.iso());
  if (out.records.empty() && sub_region)
    out.warnings.push_back("no mobility rows for sub-region '" + std::string(*sub_region) + "'");
  return out;
}

MobilityData parse_mobility(const Snapshot& snapshot, std::string_view country,
                            std::optional<std::string_view> sub_region) {
  auto in = snapshot_stream(snapshot);
  return parse_mobility(in, country, sub_region);
}

std::vector<MobilityRecord> moving_average(const std::vector<MobilityRecord>& records, int window_days) {
  if (window_days < 1) throw DataError("moving average window must be >= 1");
  std::vector<MobilityRecord> out;
  out.reserve(records.size());
  std::size_t first = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    while (records[i].date - records[first].date >= window_days) ++first;
    MobilityRecord avg;
    avg.date = records[i].date;
    avg.flags = records[i].flags;
    for (std::size_t c = 0; c < kMobilityCategoryCount; ++c) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t j = first; j <= i; ++j) {
        if (records[j].categories[c]) {
          sum += *records[j].categories[c];
          ++n;
        }
      }
      if (n > 0) avg.categories[c] = sum / n;
    }
    out.push_back(std::move(avg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Google Trends

std::vector<TrendsRecord> parse_trends(std::istream& in, const std::vector<std::string>& term_labels) {
  csv::Reader reader(in);
  std::vector<std::string> fields;
  std::optional<std::vector<std::string>> header;
  while (reader.next(fields)) {
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;
    std::string first = upper(csv::trim(fields[0]));
    if (starts_with(first, "CATEGORY:")) continue;
    if ((first == "WEEK" || first == "DAY" || first == "MONTH" || first == "DATE" || first == "TIME") &&
        fields.size() >= 2) {
      header = fields;
      break;
    }
    throw DataError("not a trends export");
  }
  if (!header) throw DataError("not a trends export");

  std::vector<std::string> terms;
  for (std::size_t i = 1; i < header->size(); ++i) {
    std::string_view name = csv::trim((*header)[i]);
    // "zoom download: (Nepal)" -> "zoom download"
    if (auto pos = name.rfind(": ("); pos != std::string_view::npos && name.back() == ')') name = name.substr(0, pos);
    terms.emplace_back(name);
  }
  if (!term_labels.empty()) {
    if (term_labels.size() != terms.size()) throw DataError("not a trends export: term label count mismatch");
    terms = term_labels;
  }

  std::vector<TrendsRecord> out;
  while (reader.next(fields)) {
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;
    auto date = Date::parse_any(csv::trim(fields[0]));
    if (!date) throw DataError("not a trends export: bad date '" + std::string(csv::trim(fields[0])) + "'");
    for (std::size_t t = 0; t < terms.size(); ++t) {
      auto raw = cell(fields, t + 1);
      if (raw.empty()) continue;
      TrendsRecord rec;
      rec.date = *date;
      rec.term = terms[t];
      if (raw == "<1") {
        rec.interest = 0;
        rec.flags.push_back("<1 reported as 0");
      } else {
        auto v = csv::parse_double(raw);
        if (!v) throw DataError("trends: unreadable interest '" + std::string(raw) + "'");
        rec.interest = static_cast<int>(std::lround(*v));
        if (rec.interest < 0 || rec.interest > 100) rec.flags.push_back(fmt::format("interest out of range: {}", *v));
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<TrendsRecord> parse_trends_file(const std::string& path, const std::vector<std::string>& term_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open trends export '" + path + "'");
  return parse_trends(in, term_labels);
}

// ---------------------------------------------------------------------------
// Joined table

const JoinedTable::Column* JoinedTable::find(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return &c;
  return nullptr;
}

const JoinedTable::Column& JoinedTable::column(std::string_view name) const {
  if (auto c = find(name)) return *c;
  throw DataError("unknown column '" + std::string(name) + "'");
}

std::optional<std::size_t> JoinedTable::row_of(Date date) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
  if (it == dates_.end() || *it != date) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

JoinedTable JoinedTable::slice(Date from, Date to) const {
  JoinedTable out;
  auto lo = std::lower_bound(dates_.begin(), dates_.end(), from) - dates_.begin();
  auto hi = std::upper_bound(dates_.begin(), dates_.end(), to) - dates_.begin();
  if (hi < lo) hi = lo;
  out.dates_.assign(dates_.begin() + lo, dates_.begin() + hi);
  for (const auto& c : columns_)
    out.columns_.push_back({c.name, {c.values.begin() + lo, c.values.begin() + hi}});
  return out;
}

void JoinedTable::ensure_dates(const std::vector<Date>& extra) {
  std::vector<Date> merged;
  std::set_union(dates_.begin(), dates_.end(), extra.begin(), extra.end(), std::back_inserter(merged));
  if (merged.size() == dates_.size()) return;
  for (auto& col : columns_) {
    std::vector<std::optional<double>> values(merged.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < merged.size() && j < dates_.size(); ++i)
      if (merged[i] == dates_[j]) values[i] = col.values[j++];
    col.values = std::move(values);
  }
  dates_ = std::move(merged);
}

void JoinedTable::add_series(const std::string& name, const std::vector<std::pair<Date, std::optional<double>>>& points) {
  std::vector<Date> extra;
  extra.reserve(points.size());
  for (const auto& p : points) extra.push_back(p.first);
  std::sort(extra.begin(), extra.end());
  extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
  ensure_dates(extra);

  Column* col = nullptr;
  for (auto& c : columns_)
    if (c.name == name) col = &c;
  if (!col) {
    columns_.push_back({name, std::vector<std::optional<double>>(dates_.size())});
    col = &columns_.back();
  }
  for (const auto& [date, value] : points)
    if (value) col->values[*row_of(date)] = value;
}

std::string format_number(std::optional<double> value) {
  if (!value) return {};
  if (*value == 0.0) return "0";
  return fmt::format("{}", *value);
}

void JoinedTable::write_csv(std::ostream& out) const {
  out << "date";
  for (const auto& c : columns_) out << ',' << csv::escape(c.name);
  out << '\n';
  for (std::size_t r = 0; r < dates_.size(); ++r) {
    out << dates_[r].iso();
    for (const auto& c : columns_) out << ',' << format_number(c.values[r]);
    out << '\n';
  }
}

void JoinedTable::write_jsonl(std::ostream& out) const {
  for (std::size_t r = 0; r < dates_.size(); ++r) {
    out << "{\"date\":\"" << dates_[r].iso() << '"';
    for (const auto& c : columns_) {
      out << ",\"" << c.name << "\":";
      if (c.values[r])
        out << format_number(c.values[r]);
      else
        out << "null";
    }
    out << "}\n";
  }
}

const std::vector<std::string>& joined_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"new_cases", "rt_mode", "rt_mean", "hdi_low", "hdi_high", "stringency_index"};
    for (const auto& info : kIndicators) n.emplace_back(info.column);
    for (auto m : kMobilityNames) n.emplace_back(m);
    return n;
  }();
  return names;
}

JoinedTable join_daily(const CaseSeries& cases, const RtEstimate& rt, const std::vector<PolicyRecord>& policy,
                       const std::vector<MobilityRecord>& mobility) {
  using Points = std::vector<std::pair<Date, std::optional<double>>>;
  JoinedTable table;
  auto add = [&](const std::string& name, Points points) { table.add_series(name, points); };

  Points p;
  for (std::size_t i = 0; i < cases.size(); ++i) p.emplace_back(cases.dates[i], static_cast<double>(cases.counts[i]));
  add("new_cases", std::move(p));

  Points mode, mean, low, high;
  for (const auto& r : rt.records) {
    mode.emplace_back(r.date, r.mode);
    mean.emplace_back(r.date, r.mean);
    low.emplace_back(r.date, r.hdi_low);
    high.emplace_back(r.date, r.hdi_high);
  }
  add("rt_mode", std::move(mode));
  add("rt_mean", std::move(mean));
  add("hdi_low", std::move(low));
  add("hdi_high", std::move(high));

  Points stringency;
  for (const auto& rec : policy) stringency.emplace_back(rec.date, rec.stringency_index);
  add("stringency_index", std::move(stringency));
  for (std::size_t k = 0; k < kIndicatorCount; ++k) {
    Points ind;
    for (const auto& rec : policy) {
      auto v = rec.indicators[k];
      ind.emplace_back(rec.date, v ? std::optional<double>(*v) : std::nullopt);
    }
    add(std::string(kIndicators[k].column), std::move(ind));
  }
  for (std::size_t c = 0; c < kMobilityCategoryCount; ++c) {
    Points mob;
    for (const auto& rec : mobility) mob.emplace_back(rec.date, rec.categories[c]);
    add(std::string(kMobilityNames[c]), std::move(mob));
  }
  return table;
}

JoinedTable trends_table(const std::vector<TrendsRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<Date, std::optional<double>>>> by_term;
  for (const auto& r : records) {
    if (!by_term.count(r.term)) order.push_back(r.term);
    by_term[r.term].emplace_back(r.date, static_cast<double>(r.interest));
  }
  JoinedTable table;
  for (const auto& term : order) table.add_series(term, by_term[term]);
  return table;
}

}  // namespace rtwatch
