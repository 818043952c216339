#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rtwatch/rt_core.hpp"
#include "rtwatch/snapshot.hpp"

namespace rtwatch {

struct SourceSettings {
  std::string url;
  std::string digest;  // optional pin: snapshot digest or prefix
};

struct Config {
  EstimatorConfig estimator;

  // [sources]
  std::string cache_dir = "cache";
  std::array<SourceSettings, 3> sources;  // indexed by Source
  std::string trends_csv;
  std::vector<std::string> trends_terms;

  // [report]
  std::vector<std::string> figures{"all"};
  int mobility_average_days = 7;
  std::string title = "R-value monitor";

  SourceSettings& source(Source s) { return sources[static_cast<std::size_t>(s)]; }
  const SourceSettings& source(Source s) const { return sources[static_cast<std::size_t>(s)]; }

  // Echo of every setting, for run metadata.
  nlohmann::json to_json() const;
};

// Parses TOML with [estimator], [sources] and [report] tables. Unknown keys and
// bad values throw UsageError.
Config parse_config(std::string_view toml_text);
Config load_config(const std::filesystem::path& path);

}  // namespace rtwatch
