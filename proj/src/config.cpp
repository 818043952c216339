#include "rtwatch/config.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "rtwatch/errors.hpp"

namespace rtwatch {

namespace {

using json = nlohmann::json;

std::string where(const toml::node& node) {
  const auto& src = node.source();
  return "line " + std::to_string(src.begin.line);
}

[[noreturn]] void bad(const std::string& key, const toml::node& node, const std::string& what) {
  throw UsageError("config: " + key + " (" + where(node) + "): " + what);
}

double get_real(const std::string& key, const toml::node& node) {
  if (auto v = node.value<double>()) return *v;
  bad(key, node, "expected a number");
}

std::int64_t get_int(const std::string& key, const toml::node& node) {
  if (node.is_integer()) return *node.value<std::int64_t>();
  bad(key, node, "expected an integer");
}

bool get_bool(const std::string& key, const toml::node& node) {
  if (auto v = node.as_boolean()) return v->get();
  bad(key, node, "expected true or false");
}

std::string get_string(const std::string& key, const toml::node& node) {
  if (auto v = node.as_string()) return v->get();
  bad(key, node, "expected a string");
}

std::vector<std::string> get_strings(const std::string& key, const toml::node& node) {
  const auto* arr = node.as_array();
  if (!arr) bad(key, node, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& item : *arr) out.push_back(get_string(key, item));
  return out;
}

std::vector<double> get_reals(const std::string& key, const toml::node& node) {
  const auto* arr = node.as_array();
  if (!arr) bad(key, node, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& item : *arr) out.push_back(get_real(key, item));
  return out;
}

const toml::table& section(const toml::table& root, std::string_view name) {
  static const toml::table empty;
  const auto* node = root.get(name);
  if (!node) return empty;
  if (!node->is_table()) throw UsageError("config: [" + std::string(name) + "] must be a table");
  return *node->as_table();
}

void apply_estimator(const toml::table& t, Config& cfg) {
  auto& e = cfg.estimator;
  double r_min = e.grid.r_min(), r_max = e.grid.r_max();
  std::int64_t points = static_cast<std::int64_t>(e.grid.size());
  for (const auto& [k, node] : t) {
    const std::string key = "estimator." + std::string(k.str());
    const std::string_view name = k.str();
    if (name == "r_min") r_min = get_real(key, node);
    else if (name == "r_max") r_max = get_real(key, node);
    else if (name == "grid_points") points = get_int(key, node);
    else if (name == "serial_interval_days") {
      double days = get_real(key, node);
      if (!(days > 0.0)) bad(key, node, "must be positive");
      e.serial = SerialInterval(days);
    } else if (name == "sigma") {
      if (auto s = node.as_string()) {
        if (s->get() != "auto") bad(key, node, "expected a number or \"auto\"");
        e.sigma.reset();
      } else {
        e.sigma = get_real(key, node);
      }
    } else if (name == "sigma_candidates") e.sigma_candidates = get_reals(key, node);
    else if (name == "window_days") e.window_days = static_cast<int>(get_int(key, node));
    else if (name == "window_std") e.window_std = get_real(key, node);
    else if (name == "leading_trim_cutoff") e.leading_trim_cutoff = get_real(key, node);
    else if (name == "hdi_mass") e.hdi_mass = get_real(key, node);
    else if (name == "use_source_smoothed") e.use_source_smoothed = get_bool(key, node);
    else if (name == "initial_prior") {
      auto v = get_string(key, node);
      if (v == "uniform") e.initial_prior = InitialPrior::uniform;
      else if (v == "gamma") e.initial_prior = InitialPrior::gamma;
      else bad(key, node, "expected \"uniform\" or \"gamma\"");
    } else if (name == "gamma_prior_shape") e.gamma_prior_shape = get_real(key, node);
    else bad(key, node, "unknown key");
  }
  if (points < 2) throw UsageError("config: estimator.grid_points must be >= 2");
  try {
    e.grid = RtGrid(r_min, r_max, static_cast<std::size_t>(points));
    e.validate();
  } catch (const DataError& err) {
    throw UsageError(std::string("config: ") + err.what());
  }
}

void apply_sources(const toml::table& t, Config& cfg) {
  for (const auto& [k, node] : t) {
    const std::string key = "sources." + std::string(k.str());
    const std::string_view name = k.str();
    if (name == "cache_dir") {
      cfg.cache_dir = get_string(key, node);
      continue;
    }
    if (name == "trends_csv") {
      cfg.trends_csv = get_string(key, node);
      continue;
    }
    if (name == "trends_terms") {
      cfg.trends_terms = get_strings(key, node);
      continue;
    }
    bool matched = false;
    for (Source s : {Source::owid, Source::oxcgrt, Source::mobility}) {
      const std::string base(source_name(s));
      if (name == base + "_url") cfg.source(s).url = get_string(key, node);
      else if (name == base + "_digest") cfg.source(s).digest = get_string(key, node);
      else continue;
      matched = true;
    }
    if (!matched) bad(key, node, "unknown key");
  }
}

void apply_report(const toml::table& t, Config& cfg) {
  for (const auto& [k, node] : t) {
    const std::string key = "report." + std::string(k.str());
    const std::string_view name = k.str();
    if (name == "figures") cfg.figures = get_strings(key, node);
    else if (name == "mobility_average_days") {
      auto v = get_int(key, node);
      if (v < 1) bad(key, node, "must be >= 1");
      cfg.mobility_average_days = static_cast<int>(v);
    } else if (name == "title") cfg.title = get_string(key, node);
    else bad(key, node, "unknown key");
  }
}

}  // namespace

Config parse_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " (line " << e.source().begin.line << ")";
    throw UsageError(msg.str());
  }
  for (const auto& [k, node] : root) {
    const std::string_view name = k.str();
    if (name != "estimator" && name != "sources" && name != "report")
      throw UsageError("config: unknown section [" + std::string(name) + "]");
  }
  Config cfg;
  apply_estimator(section(root, "estimator"), cfg);
  apply_sources(section(root, "sources"), cfg);
  apply_report(section(root, "report"), cfg);
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("config: cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

nlohmann::json Config::to_json() const {
  const auto& e = estimator;
  json est = {
      {"r_min", e.grid.r_min()},
      {"r_max", e.grid.r_max()},
      {"grid_points", e.grid.size()},
      {"serial_interval_days", e.serial.days()},
      {"sigma", e.sigma ? json(*e.sigma) : json("auto")},
      {"sigma_candidates", e.sigma_candidates},
      {"window_days", e.window_days},
      {"window_std", e.window_std},
      {"leading_trim_cutoff", e.leading_trim_cutoff},
      {"hdi_mass", e.hdi_mass},
      {"use_source_smoothed", e.use_source_smoothed},
      {"initial_prior", e.initial_prior == InitialPrior::uniform ? "uniform" : "gamma"},
      {"gamma_prior_shape", e.gamma_prior_shape},
  };
  json src = {{"cache_dir", cache_dir}, {"trends_csv", trends_csv}, {"trends_terms", trends_terms}};
  for (Source s : {Source::owid, Source::oxcgrt, Source::mobility}) {
    const std::string base(source_name(s));
    src[base + "_url"] = source(s).url;
    src[base + "_digest"] = source(s).digest;
  }
  json rep = {{"figures", figures}, {"mobility_average_days", mobility_average_days}, {"title", title}};
  return {{"estimator", est}, {"sources", src}, {"report", rep}};
}

}  // namespace rtwatch
