// Acceptance gate: one PASS / FAIL / BLOCKED line per criterion.
//
//   acceptance [--group all|synthetic|archive] [--archive DIR]
//
// Archive criteria read owid.csv, oxcgrt.csv and mobility.csv from DIR
// (default $RTWATCH_ARCHIVE_DIR). Exit status: 1 if any criterion failed,
// 77 if none failed but some were blocked, else 0.

#include <sys/resource.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "oracles.hpp"
#include "rtwatch/cli.hpp"
#include "rtwatch/errors.hpp"
#include "rtwatch/ingest.hpp"
#include "rtwatch/report.hpp"
#include "rtwatch/rt_core.hpp"
#include "rtwatch/sim_oracle.hpp"

using namespace rtwatch;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Status { pass, fail, blocked };

struct Outcome {
  Status status;
  std::string detail;
};

constexpr int kBurnIn = 14;
constexpr double kRuntimeLimitArchive = 5.0;
constexpr double kRuntimeLimitPerf = 1.0;
constexpr double kMemoryLimitMb = 200.0;

Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Status::pass : Status::fail, std::move(d)}; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double peak_rss_mb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<double>(usage.ru_maxrss) / 1024.0;
}

Date d(const char* iso) { return Date::from_iso(iso); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Archive criteria

struct Archive {
  fs::path dir;
  std::string missing;  // why the archive cannot be used, empty when usable

  explicit Archive(const std::string& path) : dir(path) {
    if (path.empty()) missing = "no archive directory (set RTWATCH_ARCHIVE_DIR or --archive)";
  }
  std::optional<fs::path> file(const char* name, std::string& why) const {
    if (!missing.empty()) {
      why = missing;
      return std::nullopt;
    }
    fs::path p = dir / name;
    if (!fs::exists(p)) {
      why = "archived snapshot " + p.string() + " not found";
      return std::nullopt;
    }
    return p;
  }
};

struct NepalRun {
  std::optional<RtEstimate> estimate;
  double seconds = 0.0;
  std::string why;
};

NepalRun run_nepal(const Archive& archive) {
  NepalRun run;
  auto path = archive.file("owid.csv", run.why);
  if (!path) return run;
  auto t0 = Clock::now();
  std::ifstream in(*path, std::ios::binary);
  auto data = parse_owid(in, "NPL");
  run.estimate = estimate_rt(data.cases, EstimatorConfig{});
  run.seconds = seconds_since(t0);
  return run;
}

Outcome window_extreme(const NepalRun& run, Date from, Date to, bool want_max, double lo, double hi) {
  if (!run.estimate) return {Status::blocked, run.why};
  std::optional<double> best;
  Date at;
  for (const auto& r : run.estimate->records) {
    if (r.date < from || r.date > to) continue;
    if (!best || (want_max ? r.mode > *best : r.mode < *best)) {
      best = r.mode;
      at = r.date;
    }
  }
  if (!best) return fail("no estimates in window");
  bool ok = *best >= lo && *best <= hi && run.seconds < kRuntimeLimitArchive;
  return verdict(ok, fmt::format("{} rt_mode {:.3f} on {} (target [{}, {}]), sigma {}, runtime {:.2f} s",
                                 want_max ? "max" : "min", *best, at.iso(), lo, hi, format_number(run.estimate->sigma),
                                 run.seconds));
}

Outcome oxcgrt_anchor(const Archive& archive) {
  std::string why;
  auto path = archive.file("oxcgrt.csv", why);
  if (!path) return {Status::blocked, why};
  std::ifstream in(*path, std::ios::binary);
  auto recs = parse_oxcgrt(in, "NPL");
  const Date from = d("2021-04-20"), to = d("2021-05-10");
  auto near = [](double v, double target) { return std::abs(v - target) < 0.005; };

  std::vector<std::string> matched;
  std::set<std::string> variants;
  for (const auto& r : recs)
    for (const auto& [name, v] : r.stringency_variants) variants.insert(name);
  for (const auto& name : variants) {
    std::optional<Date> low_at;
    bool found = false;
    for (const auto& r : recs) {
      if (r.date < from || r.date > to) continue;
      auto it = r.stringency_variants.find(name);
      if (it == r.stringency_variants.end()) continue;
      if (near(it->second, 30.56)) low_at = r.date;
      if (low_at && near(it->second, 91.67) && r.date > *low_at) found = true;
    }
    if (found) matched.push_back(name);
  }

  std::optional<Date> c6_zero, c6_three;
  for (const auto& r : recs) {
    if (r.date < from || r.date > to) continue;
    auto c6 = r.indicator(Indicator::stay_at_home);
    if (c6 == 0 && !c6_three) c6_zero = r.date;
    if (c6 == 3 && c6_zero && !c6_three) c6_three = r.date;
  }
  std::string names;
  for (const auto& m : matched) names += (names.empty() ? "" : ",") + m;
  bool ok = !matched.empty() && c6_three.has_value();
  return verdict(ok, fmt::format("30.56->91.67 matched on [{}]; C6 0->3 {}", names.empty() ? "none" : names,
                                 c6_three ? "on " + c6_three->iso() : "not found"));
}

Outcome mobility_anchors(const Archive& archive) {
  std::string why;
  auto path = archive.file("mobility.csv", why);
  if (!path) return {Status::blocked, why};
  std::ifstream in(*path, std::ios::binary);
  auto raw = parse_mobility(in, "NPL").records;
  auto avg = moving_average(raw, 7);
  auto value = [](const std::vector<MobilityRecord>& recs, Date date, MobilityCategory c) -> std::optional<double> {
    for (const auto& r : recs)
      if (r.date == date) return r.get(c);
    return std::nullopt;
  };
  struct Anchor {
    const char* label;
    const std::vector<MobilityRecord>* recs;
    MobilityCategory cat;
    const char* date;
    double target;
  };
  const Anchor anchors[] = {
      {"residential avg", &avg, MobilityCategory::residential, "2021-04-28", 1},
      {"residential avg", &avg, MobilityCategory::residential, "2021-05-05", 19},
      {"grocery raw", &raw, MobilityCategory::grocery_pharmacy, "2021-04-28", 81},
      {"grocery raw", &raw, MobilityCategory::grocery_pharmacy, "2021-05-05", -21},
      {"transit raw", &raw, MobilityCategory::transit_stations, "2021-04-28", 56},
      {"transit raw", &raw, MobilityCategory::transit_stations, "2021-05-05", -41},
  };
  bool ok = true;
  std::string detail;
  for (const auto& a : anchors) {
    auto v = value(*a.recs, d(a.date), a.cat);
    bool hit = v && std::abs(*v - a.target) <= 2.0;
    ok = ok && hit;
    detail += fmt::format("{}{} {}={} (want {}±2)", detail.empty() ? "" : "; ", a.label, a.date,
                          v ? format_number(*v) : "missing", a.target);
  }
  return verdict(ok, detail);
}

// ---------------------------------------------------------------------------
// Synthetic criteria

Outcome oracle_recovery() {
  EstimatorConfig cfg;

  // (a) constant R = 1.5
  auto a = find_scenario("constant-1.5");
  auto est_a = estimate_rt(simulate_cases(a.trajectory, a.config).cases, cfg);
  int hits = 0, scored = 0;
  const Date burn_a = est_a.records.front().date + kBurnIn;
  for (const auto& r : est_a.records) {
    if (r.date < burn_a) continue;
    ++scored;
    hits += std::abs(r.mode - 1.5) <= 0.2;
  }
  const double frac_a = static_cast<double>(hits) / scored;

  // (b) step 2.0 -> 0.8 at day 60
  auto b = find_scenario("step");
  auto est_b = estimate_rt(simulate_cases(b.trajectory, b.config).cases, cfg);
  const Date burn_b = est_b.records.front().date + kBurnIn;
  std::optional<int> crossing;
  for (const auto& r : est_b.records) {
    if (r.date < burn_b) continue;
    if (r.mode < 1.0) {
      crossing = (r.date - b.trajectory.dates.front()) + 1;
      break;
    }
  }

  // Coverage: Poisson seeds 1..200 round-robin over scenarios (a), (b), (c).
  const auto scenarios = standard_scenarios();
  std::array<long, 3> covered{}, days{};
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const std::size_t which = (seed - 1) % 3;
    Scenario sc = scenarios[which];
    sc.config.seed = seed;
    auto sim = simulate_cases(sc.trajectory, sc.config);
    RtEstimate est;
    try {
      est = estimate_rt(sim.cases, cfg);
    } catch (const DataError&) {
      continue;  // extinct before reaching the trim cutoff: nothing to score
    }
    const Date burn = est.records.front().date + kBurnIn;
    for (const auto& r : est.records) {
      if (r.date < burn) continue;
      const auto t = static_cast<std::size_t>(r.date - sc.trajectory.dates.front());
      if (sim.cases.counts[t] == 0) continue;
      const double truth = sc.trajectory.true_r[t];
      ++days[which];
      covered[which] += r.hdi_low <= truth && truth <= r.hdi_high;
    }
  }
  const long total_days = days[0] + days[1] + days[2];
  const double coverage = static_cast<double>(covered[0] + covered[1] + covered[2]) / total_days;
  auto cov = [&](std::size_t i) { return static_cast<double>(covered[i]) / days[i]; };

  bool ok = frac_a >= 0.8 && crossing && std::abs(*crossing - 60) <= 10 && coverage >= 0.70 && coverage <= 0.98;
  return verdict(ok, fmt::format("(a) {:.1f}% of days within 0.2 (need 80%); (b) crossing day {} (need 50..70); "
                                 "coverage {:.1f}% over {} days (need 70..98%; a {:.1f}%, b {:.1f}%, c {:.1f}%)",
                                 100 * frac_a, crossing ? std::to_string(*crossing) : "none", 100 * coverage,
                                 total_days, 100 * cov(0), 100 * cov(1), 100 * cov(2)));
}

Outcome exactness() {
  std::vector<std::string> failures;

  // Posterior rows sum to 1.
  double worst_sum = 0.0;
  {
    auto sc = find_scenario("random-walk");
    auto sim = simulate_cases(sc.trajectory, sc.config);
    EstimatorConfig cfg;
    auto smoothed = trim_leading(smooth_cases(sim.cases, cfg.window_days, cfg.window_std), cfg.leading_trim_cutoff);
    auto ll = likelihood_matrix(smoothed, cfg.grid, cfg.serial);
    for (double sigma : cfg.sigma_candidates) {
      auto post = posterior_sequence(ll, TransitionKernel(cfg.grid, sigma), initial_prior(cfg), cfg.grid);
      for (std::size_t t = 0; t < post.rows(); ++t) {
        double s = 0.0;
        for (double v : post.row(t)) s += v;
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      }
    }
  }
  if (worst_sum > 1e-9) failures.push_back(fmt::format("row sum off by {:.3g}", worst_sum));

  // expected_rate(k, gamma, 1) == k exactly.
  int rate_checks = 0;
  for (double k : {0.0, 1.0, 3.0, 17.0, 250.0, 1e6, 123456789.0, 0.5})
    for (double gamma : {1.0 / 7.0, 0.2, 1.0 / 3.0}) {
      ++rate_checks;
      if (expected_rate(k, gamma, 1.0) != k) failures.push_back(fmt::format("expected_rate({}, {}, 1) != k", k, gamma));
    }

  // Filter against the dense reimplementation.
  double worst_diff = 0.0;
  int instances = 0;
  Xoshiro256 rng(515);
  while (instances < 10) {
    const std::size_t n = 21 + static_cast<std::size_t>(rng.uniform() * 180);
    const int days = 4 + static_cast<int>(rng.uniform() * 20);
    const double sigma = 0.03 + rng.uniform() * 0.6;
    const double r_max = 3.0 + rng.uniform() * 5.0;
    SimConfig sc;
    sc.k0 = 30 + rng.uniform() * 300;
    sc.seed = rng.next();
    auto traj = random_walk_trajectory(rng.next(), 1.2, 0.1, 0.3, 2.5, days);
    auto sim = simulate_cases(traj, sc);
    if (std::find(sim.cases.counts.begin(), sim.cases.counts.end(), 0) != sim.cases.counts.end()) continue;
    ++instances;
    RtGrid grid(0.0, r_max, n);
    std::vector<double> prior(n, 1.0 / static_cast<double>(n));
    SmoothedSeries s;
    s.dates = sim.cases.dates;
    s.values.assign(sim.cases.counts.begin(), sim.cases.counts.end());
    auto post = posterior_sequence(likelihood_matrix(s, grid, SerialInterval(7.0)), TransitionKernel(grid, sigma),
                                   prior, grid);
    std::vector<long> counts(sim.cases.counts.begin(), sim.cases.counts.end());
    auto ref = oracle::dense_filter(counts, oracle::grid_points(0.0, r_max, n), 1.0 / 7.0, sigma, prior);
    for (std::size_t t = 0; t < post.rows(); ++t)
      for (std::size_t i = 0; i < n; ++i) worst_diff = std::max(worst_diff, std::abs(post.row(t)[i] - ref.posteriors[t][i]));
  }
  if (worst_diff > 1e-10) failures.push_back(fmt::format("filter differs from oracle by {:.3g}", worst_diff));

  // HDI against the exhaustive scan.
  int hdi_checks = 0, hdi_mismatch = 0;
  for (std::size_t n : {2, 3, 11, 101, 257, 1201, 2001}) {
    for (int rep = 0; rep < 4; ++rep) {
      std::vector<double> p(n);
      double total = 0.0;
      const double centre = rng.uniform() * n, width = 1.0 + rng.uniform() * n / 4.0;
      for (std::size_t i = 0; i < n; ++i) {
        double z = (static_cast<double>(i) - centre) / width;
        p[i] = std::exp(-0.5 * z * z) * (rep % 2 ? 1.0 + rng.uniform() : 1.0);
        total += p[i];
      }
      for (auto& v : p) v /= total;
      for (double mass : {0.5, 0.9, 0.95}) {
        ++hdi_checks;
        auto got = highest_density_indices(p, mass);
        auto want = oracle::hdi_scan(p, mass);
        hdi_mismatch += got.first != want.first || got.last != want.last;
      }
    }
  }
  if (hdi_mismatch) failures.push_back(fmt::format("{} HDI mismatches", hdi_mismatch));

  std::string detail = fmt::format(
      "max |row sum - 1| {:.2g}; {} expected_rate checks; filter vs dense oracle max diff {:.2g} over {} instances; "
      "HDI {}/{} match exhaustive scan",
      worst_sum, rate_checks, worst_diff, instances, hdi_checks - hdi_mismatch, hdi_checks);
  for (const auto& f : failures) detail += "; FAIL " + f;
  return verdict(failures.empty(), detail);
}

Outcome performance() {
  // 500 days, R oscillating around 1 so counts stay well inside the grid.
  std::vector<double> r;
  for (int t = 0; t < 500; ++t) r.push_back(1.0 + 0.3 * std::sin(t / 40.0));
  RtTrajectory traj;
  for (int t = 0; t < 500; ++t) {
    traj.dates.push_back(kScenarioStart + t);
    traj.true_r.push_back(r[t]);
  }
  SimConfig sc;
  sc.k0 = 2000;
  sc.seed = 42;
  auto cases = simulate_cases(traj, sc).cases;

  EstimatorConfig cfg;
  auto t0 = Clock::now();
  auto est = estimate_rt(cases, cfg);
  const double secs = seconds_since(t0);
  const double rss = peak_rss_mb();
  bool ok = secs < kRuntimeLimitPerf && rss < kMemoryLimitMb && cfg.grid.size() == 1201 &&
            cfg.sigma_candidates.size() == 8 && est.size() >= 490;
  return verdict(ok, fmt::format("{} days, {} grid points, {} sigma candidates: {:.3f} s (limit 1 s), peak RSS "
                                 "{:.1f} MB (limit 200 MB)",
                                 cases.size(), cfg.grid.size(), cfg.sigma_candidates.size(), secs, rss));
}

Outcome determinism() {
  fs::path root = fs::temp_directory_path() / fmt::format("rtwatch_accept_{}", ::getpid());
  fs::remove_all(root);
  fs::create_directories(root);

  // Synthetic OWID-style snapshot served by an in-memory downloader.
  auto sc = find_scenario("step");
  auto cases = simulate_cases(sc.trajectory, sc.config).cases;
  std::ostringstream owid;
  owid << "iso_code,location,date,new_cases\n";
  for (std::size_t i = 0; i < cases.size(); ++i) owid << "AAA,Testland," << cases.dates[i].iso() << ',' << cases.counts[i] << '\n';
  const std::string body = owid.str();
  Downloader net = [&](const std::string&) { return body; };

  std::ofstream(root / "rtwatch.toml") << "[sources]\ncache_dir = \"" << (root / "cache").string()
                                       << "\"\nowid_url = \"memory://owid\"\n";
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) {
    args.push_back("--config");
    args.push_back((root / "rtwatch.toml").string());
    return run_cli(args, sink, sink, net);
  };

  std::vector<std::string> errors;
  for (const char* dir : {"run1", "run2"}) {
    const std::string out = (root / dir).string();
    if (run({"estimate", "--country", "AAA", "--out", out}) != 0) errors.push_back("estimate failed");
    if (run({"report", "--country", "AAA", "--figures", "all", "--out", out}) != 0) errors.push_back("report failed");
  }

  int compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "run1" / "AAA")) {
    auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".svg") continue;
    ++compared;
    differing += slurp(entry.path()) != slurp(root / "run2" / "AAA" / entry.path().filename());
  }
  fs::remove_all(root);
  bool ok = errors.empty() && differing == 0 && compared >= 9;
  std::string detail = fmt::format("{} CSV/SVG files compared across two estimate+report runs, {} differ", compared,
                                   differing);
  for (const auto& e : errors) detail += "; " + e;
  if (!ok && !sink.str().empty()) detail += "; output: " + sink.str();
  return verdict(ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string group = "all";
  std::string archive_dir;
  if (const char* env = std::getenv("RTWATCH_ARCHIVE_DIR")) archive_dir = env;
  app.add_option("--group", group, "all, synthetic or archive")->check(CLI::IsMember({"all", "synthetic", "archive"}));
  app.add_option("--archive", archive_dir, "Directory with owid.csv, oxcgrt.csv and mobility.csv");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    const char* name;
    bool archive;
    std::function<Outcome()> check;
  };
  const Archive archive(archive_dir);
  std::optional<NepalRun> nepal;
  auto nepal_run = [&]() -> const NepalRun& {
    if (!nepal) nepal = run_nepal(archive);
    return *nepal;
  };

  // Performance first so the peak-RSS reading is not inflated by later checks.
  const std::vector<Criterion> criteria = {
      {"performance", false, performance},
      {"exactness", false, exactness},
      {"oracle_recovery", false, oracle_recovery},
      {"determinism", false, determinism},
      {"nepal_peak", true,
       [&] { return window_extreme(nepal_run(), d("2021-04-15"), d("2021-04-25"), true, 2.0, 3.0); }},
      {"nepal_suppression", true,
       [&] { return window_extreme(nepal_run(), d("2021-06-01"), d("2021-06-15"), false, 0.3, 0.7); }},
      {"oxcgrt_anchor", true, [&] { return oxcgrt_anchor(archive); }},
      {"mobility_anchors", true, [&] { return mobility_anchors(archive); }},
  };

  int failed = 0, blocked = 0;
  for (const auto& c : criteria) {
    if (group == "synthetic" && c.archive) continue;
    if (group == "archive" && !c.archive) continue;
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "BLOCKED";
    std::cout << fmt::format("{:<8} {:<18} {}\n", tag, c.name, o.detail) << std::flush;
    failed += o.status == Status::fail;
    blocked += o.status == Status::blocked;
  }
  if (failed) return 1;
  if (blocked) return 77;
  return 0;
}
