#include "rtwatch/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "rtwatch/config.hpp"
#include "rtwatch/csv.hpp"
#include "rtwatch/errors.hpp"
#include "rtwatch/ingest.hpp"
#include "rtwatch/report.hpp"
#include "rtwatch/rt_core.hpp"
#include "rtwatch/sim_oracle.hpp"
#include "rtwatch/snapshot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace rtwatch {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kDefaultConfig = "rtwatch.toml";

struct Common {
  std::string config_path;
  std::string cache_dir;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "TOML config file (default: ./rtwatch.toml when present)");
  sub->add_option("--cache-dir", common.cache_dir, "Snapshot cache directory (overrides $RTWATCH_CACHE_DIR)");
}

Config load(const Common& common) {
  if (!common.config_path.empty()) return load_config(common.config_path);
  if (fs::exists(kDefaultConfig)) return load_config(kDefaultConfig);
  return Config{};
}

fs::path cache_dir(const Config& cfg, const Common& common) {
  if (!common.cache_dir.empty()) return common.cache_dir;
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) return env;
  return cfg.cache_dir;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json snapshot_json(const Snapshot& s) {
  return {{"source", s.source}, {"digest", s.digest}, {"timestamp", s.timestamp},
          {"path", s.path.string()}, {"url", s.url}, {"bytes", s.bytes}};
}

json run_header(const std::string& command, const std::vector<std::string>& args, const Config& cfg) {
  return {{"tool", "rtwatch"}, {"version", kVersion}, {"command", command}, {"args", args}, {"config", cfg.to_json()}};
}

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

std::string normalize_iso3(const std::string& code) {
  if (code.size() != 3 || !std::all_of(code.begin(), code.end(), [](unsigned char c) { return std::isalpha(c); }))
    throw UsageError("country must be an ISO 3166-1 alpha-3 code, got '" + code + "'");
  std::string out = code;
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Pinned digest when configured, else the newest cached snapshot.
std::optional<Snapshot> cached_snapshot(const Config& cfg, const fs::path& cache, Source source) {
  SnapshotCache store(cache);
  const auto& pin = cfg.source(source).digest;
  if (!pin.empty()) {
    auto hit = store.find_by_digest(source, pin);
    if (!hit) throw SourceError(fmt::format("pinned {} snapshot {} not in cache {}", source_name(source), pin,
                                            cache.string()));
    return hit;
  }
  return store.latest(source);
}

Snapshot require_snapshot(const Config& cfg, const fs::path& cache, Source source, const Downloader& download) {
  if (auto hit = cached_snapshot(cfg, cache, source)) return *hit;
  return fetch_source(source, cache, false, cfg.source(source).url, download).snapshot;
}

void apply_sigma_flag(const std::string& flag, EstimatorConfig& est) {
  if (flag.empty()) return;
  if (flag == "auto") {
    est.sigma.reset();
    return;
  }
  auto v = csv::parse_double(flag);
  if (!v || !(*v > 0.0)) throw UsageError("--sigma expects a positive number or 'auto'");
  est.sigma = *v;
}

json estimate_summary(const RtEstimate& est) {
  json flagged = json::array();
  for (const auto& r : est.records)
    if (r.flagged) flagged.push_back(r.date.iso());
  return {{"sigma", est.sigma},
          {"hdi_mass", est.hdi_mass},
          {"records", est.size()},
          {"first_date", est.records.front().date.iso()},
          {"last_date", est.records.back().date.iso()},
          {"flagged_dates", flagged}};
}

// ---------------------------------------------------------------------------

struct FetchArgs {
  Common common;
  std::vector<std::string> sources;
  bool refresh = false;
};

int cmd_fetch(const FetchArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
              const Downloader& download) {
  Config cfg = load(a.common);
  fs::path cache = cache_dir(cfg, a.common);

  std::vector<Source> sources;
  for (const auto& name : a.sources) {
    auto s = parse_source(name);
    if (!s) throw UsageError("unknown source '" + name + "'");
    if (std::find(sources.begin(), sources.end(), *s) == sources.end()) sources.push_back(*s);
  }

  std::vector<std::future<FetchResult>> jobs;
  for (Source s : sources)
    jobs.push_back(std::async(std::launch::async, [&, s] {
      return fetch_source(s, cache, a.refresh, cfg.source(s).url, download);
    }));

  json meta = run_header("fetch", args, cfg);
  meta["cache_dir"] = cache.string();
  meta["snapshots"] = json::array();
  int status = kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string name(source_name(sources[i]));
    try {
      auto r = jobs[i].get();
      out << fmt::format("{}: {} {} sha256:{}\n", name, r.from_cache ? "cached" : "fetched", r.snapshot.path.string(),
                         r.snapshot.digest.substr(0, 12));
      auto entry = snapshot_json(r.snapshot);
      entry["from_cache"] = r.from_cache;
      meta["snapshots"].push_back(entry);
    } catch (const SourceError& e) {
      err << name << ": " << e.what() << '\n';
      meta["snapshots"].push_back({{"source", name}, {"error", e.what()}});
      status = kExitSource;
    }
  }
  write_json(cache / "fetch_metadata.json", meta);
  return status;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  Common common;
  std::vector<std::string> countries;
  std::string input;
  std::string out = "out";
  std::string sigma;
  bool use_source_smoothed = false;
};

int cmd_estimate(const EstimateArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                 const Downloader& download) {
  Config cfg = load(a.common);
  apply_sigma_flag(a.sigma, cfg.estimator);
  if (a.use_source_smoothed) cfg.estimator.use_source_smoothed = true;
  cfg.estimator.validate();
  if (a.countries.empty() == a.input.empty()) throw UsageError("estimate needs exactly one of --country or --input");

  if (!a.input.empty()) {
    fs::path input(a.input);
    CaseSeries series = read_case_series(input);
    RtEstimate est = estimate_rt(series, cfg.estimator);
    fs::path dir(a.out);
    emit_estimates(est, dir / "estimates.csv");
    json meta = run_header("estimate", args, cfg);
    meta["input"] = {{"path", input.string()}, {"sha256", sha256_hex(read_bytes(input))}};
    meta["estimate"] = estimate_summary(est);
    write_json(dir / "estimate_metadata.json", meta);
    out << fmt::format("estimates: {} ({} days, sigma {})\n", (dir / "estimates.csv").string(), est.size(),
                       format_number(est.sigma));
    return kExitOk;
  }

  std::vector<std::string> isos;
  for (const auto& raw : a.countries) isos.push_back(normalize_iso3(raw));
  fs::path cache = cache_dir(cfg, a.common);
  Snapshot snap = require_snapshot(cfg, cache, Source::owid, download);
  for (const auto& iso : isos) {
    OwidData data = parse_owid(snap, iso);
    RtEstimate est;
    if (cfg.estimator.use_source_smoothed) {
      if (!data.source_smoothed) throw DataError("owid snapshot has no new_cases_smoothed values for " + iso);
      est = estimate_rt(*data.source_smoothed, cfg.estimator);
    } else {
      est = estimate_rt(data.cases, cfg.estimator);
    }
    fs::path dir = fs::path(a.out) / iso;
    emit_estimates(est, dir / "estimates.csv");

    json meta = run_header("estimate", args, cfg);
    meta["country"] = iso;
    meta["location"] = data.location;
    meta["snapshots"] = {{"owid", snapshot_json(snap)}};
    meta["estimate"] = estimate_summary(est);
    meta["clamp_audit"] = {{"raw_total", data.audit.raw_total},
                           {"clamped_total", data.audit.clamped_total},
                           {"kept_total", data.audit.kept_total()},
                           {"clamped_days", data.audit.clamped_days},
                           {"missing_days", data.audit.missing_days}};
    json flags = json::array();
    for (const auto& f : data.flags) flags.push_back({{"date", f.date.iso()}, {"field", f.field}, {"reason", f.reason}});
    meta["data_flags"] = flags;
    write_json(dir / "estimate_metadata.json", meta);
    if (!data.flags.empty()) err << fmt::format("{}: {} input values flagged (see metadata)\n", iso, data.flags.size());
    out << fmt::format("{}: {} ({} days, sigma {})\n", iso, (dir / "estimates.csv").string(), est.size(),
                       format_number(est.sigma));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string scenario;
  std::string traj;
  std::optional<std::uint64_t> seed;
  std::optional<double> k0;
  std::string mode = "stochastic";
  std::string out;
};

RtTrajectory read_trajectory(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("trajectory file not found: " + path.string());
  csv::Reader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw DataError("trajectory: empty file");
  csv::Header header(fields);
  const auto date_col = header.require("date");
  const auto r_col = header.require_any({"r", "true_r", "rt"});
  RtTrajectory traj;
  traj.label = path.filename().string();
  while (reader.next(fields)) {
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;
    auto date = Date::parse_iso(csv::trim(fields.at(date_col)));
    auto r = r_col < fields.size() ? csv::parse_double(fields[r_col]) : std::nullopt;
    if (!date || !r || *r < 0.0) throw DataError(fmt::format("trajectory: bad row {}", reader.records_read()));
    if (!traj.dates.empty() && *date != traj.dates.back() + 1)
      throw DataError("trajectory: dates must be consecutive days");
    traj.dates.push_back(*date);
    traj.true_r.push_back(*r);
  }
  if (traj.dates.empty()) throw DataError("trajectory: no rows");
  return traj;
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  Config cfg = load(a.common);
  if (a.scenario.empty() == a.traj.empty()) throw UsageError("simulate needs exactly one of --scenario or --traj");

  RtTrajectory traj;
  SimConfig sim;
  sim.serial = cfg.estimator.serial;
  if (!a.scenario.empty()) {
    Scenario sc;
    try {
      sc = find_scenario(a.scenario);
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
    traj = sc.trajectory;
    sim = sc.config;
  } else {
    traj = read_trajectory(a.traj);
  }
  if (a.seed) sim.seed = *a.seed;
  if (a.k0) sim.k0 = *a.k0;
  if (a.mode == "stochastic") sim.mode = SimMode::stochastic;
  else if (a.mode == "deterministic") sim.mode = SimMode::deterministic_mean;
  else throw UsageError("--mode must be 'stochastic' or 'deterministic'");

  auto result = simulate_cases(traj, sim);
  std::ostringstream csv;
  write_case_series(result.cases, csv, traj.true_r);
  fs::path path(a.out);
  write_text_file(path, csv.str());

  json meta = run_header("simulate", args, cfg);
  meta["trajectory"] = a.scenario.empty() ? json{{"file", a.traj}, {"sha256", sha256_hex(read_bytes(a.traj))}}
                                          : json{{"scenario", a.scenario}};
  meta["seed"] = sim.seed;
  meta["k0"] = sim.k0;
  meta["mode"] = a.mode;
  meta["serial_interval_days"] = sim.serial.days();
  meta["rows"] = result.cases.size();
  meta["output_sha256"] = sha256_hex(csv.str());
  fs::path meta_path = path;
  meta_path.replace_extension(".meta.json");
  write_json(meta_path, meta);
  out << fmt::format("simulated {} days -> {}\n", result.cases.size(), path.string());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  Common common;
  std::vector<std::string> countries;
  std::string estimates;
  std::vector<std::string> figures;
  std::string out = "out";
  std::string trends;
  std::string from;
  std::string to;
};

std::vector<ChartSpec> select_figures(const std::vector<std::string>& names) {
  std::vector<ChartSpec> out;
  for (const auto& name : names) {
    if (name == "all") return figure_presets();
    auto preset = find_preset(name);
    if (!preset) throw UsageError("unknown figure '" + name + "' (expected fig1..fig7 or all)");
    out.push_back(*preset);
  }
  return out;
}

int render_report(const Config& cfg, const std::vector<ChartSpec>& figures, const JoinedTable& table,
                  const JoinedTable& trends, const fs::path& dir, json meta, std::ostream& out) {
  std::ostringstream csv, jsonl;
  table.write_csv(csv);
  table.write_jsonl(jsonl);
  write_text_file(dir / "joined.csv", csv.str());
  write_text_file(dir / "joined.jsonl", jsonl.str());

  std::vector<std::pair<std::string, std::string>> links;
  json charts = json::array();
  for (const auto& preset : figures) {
    const bool is_trends = preset.name == "fig6";
    ChartSpec spec = is_trends ? trends_chart(trends) : preset;
    std::string svg = chart_overlay(is_trends ? trends : table, spec);
    const std::string file = spec.name + ".svg";
    write_text_file(dir / file, svg);
    links.emplace_back(spec.name + ": " + spec.title, file);
    charts.push_back({{"name", spec.name}, {"file", file}, {"sha256", sha256_hex(svg)}});
  }
  links.emplace_back("joined table (CSV)", "joined.csv");
  links.emplace_back("joined table (JSON lines)", "joined.jsonl");
  links.emplace_back("estimates (CSV)", "estimates.csv");
  write_text_file(dir / "index.html", index_html(cfg.title, links));

  meta["charts"] = charts;
  meta["joined_sha256"] = sha256_hex(csv.str());
  write_json(dir / "report_metadata.json", meta);
  out << fmt::format("report: {} ({} charts)\n", (dir / "index.html").string(), charts.size());
  return kExitOk;
}

int cmd_report(const ReportArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config cfg = load(a.common);
  if (a.countries.empty() == a.estimates.empty()) throw UsageError("report needs exactly one of --country or --estimates");
  const auto figures = select_figures(a.figures.empty() ? cfg.figures : a.figures);

  std::optional<Date> from, to;
  if (!a.from.empty() && !(from = Date::parse_iso(a.from))) throw UsageError("--from expects YYYY-MM-DD");
  if (!a.to.empty() && !(to = Date::parse_iso(a.to))) throw UsageError("--to expects YYYY-MM-DD");
  auto window = [&](const JoinedTable& t) {
    if (!from && !to) return t;
    return t.slice(from.value_or(Date(INT32_MIN / 2)), to.value_or(Date(INT32_MAX / 2)));
  };

  std::string trends_path = a.trends.empty() ? cfg.trends_csv : a.trends;
  JoinedTable trends;
  json trends_meta = nullptr;
  if (!trends_path.empty()) {
    trends = window(trends_table(parse_trends_file(trends_path, cfg.trends_terms)));
    trends_meta = {{"path", trends_path}, {"sha256", sha256_hex(read_bytes(trends_path))}};
  }

  if (!a.estimates.empty()) {
    fs::path est_path(a.estimates);
    RtEstimate est = read_estimates(est_path);
    JoinedTable table = window(join_daily({}, est, {}, {}));
    json meta = run_header("report", args, cfg);
    meta["estimates"] = {{"path", est_path.string()}, {"sha256", sha256_hex(read_bytes(est_path))}};
    meta["trends"] = trends_meta;
    fs::path dir(a.out);
    if (fs::absolute(est_path.parent_path()) != fs::absolute(dir))
      write_text_file(dir / "estimates.csv", read_bytes(est_path));
    return render_report(cfg, figures, table, trends, dir, meta, out);
  }

  std::vector<std::string> isos;
  for (const auto& raw : a.countries) isos.push_back(normalize_iso3(raw));
  fs::path cache = cache_dir(cfg, a.common);
  for (const auto& iso : isos) {
    fs::path dir = fs::path(a.out) / iso;
    fs::path est_path = dir / "estimates.csv";
    if (!fs::exists(est_path))
      throw DataError(fmt::format("no estimates at {}; run `rtwatch estimate --country {} --out {}` first",
                                  est_path.string(), iso, a.out));
    RtEstimate est = read_estimates(est_path);

    json meta = run_header("report", args, cfg);
    meta["country"] = iso;
    meta["estimates"] = {{"path", est_path.string()}, {"sha256", sha256_hex(read_bytes(est_path))}};
    meta["trends"] = trends_meta;
    json snaps = json::object();
    json warnings = json::array();

    CaseSeries cases;
    std::vector<PolicyRecord> policy;
    std::vector<MobilityRecord> mobility;
    if (auto s = cached_snapshot(cfg, cache, Source::owid)) {
      cases = parse_owid(*s, iso).cases;
      snaps["owid"] = snapshot_json(*s);
    } else {
      warnings.push_back("no owid snapshot cached; case column left empty");
    }
    if (auto s = cached_snapshot(cfg, cache, Source::oxcgrt)) {
      policy = parse_oxcgrt(*s, iso);
      snaps["oxcgrt"] = snapshot_json(*s);
      if (policy.empty()) warnings.push_back("oxcgrt snapshot has no national rows for " + iso);
    } else {
      warnings.push_back("no oxcgrt snapshot cached; policy columns left empty");
    }
    if (auto s = cached_snapshot(cfg, cache, Source::mobility)) {
      auto mob = parse_mobility(*s, iso);
      mobility = moving_average(mob.records, cfg.mobility_average_days);
      for (const auto& w : mob.warnings) warnings.push_back(w);
      snaps["mobility"] = snapshot_json(*s);
      if (mob.records.empty()) warnings.push_back("mobility snapshot has no country-level rows for " + iso);
    } else {
      warnings.push_back("no mobility snapshot cached; mobility columns left empty");
    }
    for (const auto& w : warnings) err << iso << ": " << w.get<std::string>() << '\n';
    meta["snapshots"] = snaps;
    meta["warnings"] = warnings;

    JoinedTable table = window(join_daily(cases, est, policy, mobility));
    render_report(cfg, figures, table, trends, dir, meta, out);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Downloader& download) {
  CLI::App app{"Real-time R-value estimation from case counts and alternative data", "rtwatch"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  FetchArgs fetch;
  auto* fetch_cmd = app.add_subcommand("fetch", "Download source CSVs into the snapshot cache");
  fetch_cmd->add_option("sources", fetch.sources, "owid, oxcgrt, mobility")
      ->required()
      ->check(CLI::IsMember({"owid", "oxcgrt", "mobility"}));
  fetch_cmd->add_flag("--refresh", fetch.refresh, "Download even when a snapshot is cached");
  add_common(fetch_cmd, fetch.common);

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate R_t and write estimates.csv plus metadata");
  auto* country_opt = est_cmd->add_option("--country", est.countries, "ISO 3166-1 alpha-3 code (repeatable)");
  auto* input_opt = est_cmd->add_option("--input", est.input, "CaseSeries CSV (date,new_cases) instead of OWID");
  country_opt->excludes(input_opt);
  est_cmd->add_option("--out", est.out, "Output directory")->capture_default_str();
  est_cmd->add_option("--sigma", est.sigma, "Random-walk sigma or 'auto'");
  est_cmd->add_flag("--use-source-smoothed", est.use_source_smoothed, "Use the source's own smoothed column");
  add_common(est_cmd, est.common);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate daily cases from a known R trajectory");
  auto* scen_opt = sim_cmd->add_option("--scenario", sim.scenario, "constant-1.5, step, random-walk, extinction");
  auto* traj_opt = sim_cmd->add_option("--traj", sim.traj, "Trajectory CSV with date,r columns");
  scen_opt->excludes(traj_opt);
  sim_cmd->add_option("--seed", sim.seed, "RNG seed");
  sim_cmd->add_option("--k0", sim.k0, "Initial case count");
  sim_cmd->add_option("--mode", sim.mode, "stochastic or deterministic")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output CSV")->required();
  add_common(sim_cmd, sim.common);

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Render SVG charts, joined tables and index.html");
  auto* rep_country = rep_cmd->add_option("--country", rep.countries, "ISO 3166-1 alpha-3 code (repeatable)");
  auto* rep_est = rep_cmd->add_option("--estimates", rep.estimates, "Estimates CSV to chart without source data");
  rep_country->excludes(rep_est);
  rep_cmd->add_option("--figures", rep.figures, "all or a comma-separated list of fig1..fig7")->delimiter(',');
  rep_cmd->add_option("--out", rep.out, "Output directory (also where estimates are read)")->capture_default_str();
  rep_cmd->add_option("--trends", rep.trends, "Search-interest CSV export for fig6");
  rep_cmd->add_option("--from", rep.from, "First date to chart (YYYY-MM-DD)");
  rep_cmd->add_option("--to", rep.to, "Last date to chart (YYYY-MM-DD)");
  add_common(rep_cmd, rep.common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*fetch_cmd) return cmd_fetch(fetch, args, out, err, download);
    if (*est_cmd) return cmd_estimate(est, args, out, err, download);
    if (*sim_cmd) return cmd_simulate(sim, args, out);
    if (*rep_cmd) return cmd_report(rep, args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SourceError& e) {
    err << "source error: " << e.what() << '\n';
    return kExitSource;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace rtwatch
