#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rtwatch/cli.hpp"
#include "rtwatch/errors.hpp"
#include "rtwatch/report.hpp"
#include "rtwatch/sim_oracle.hpp"

using namespace rtwatch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("rtwatch_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Synthetic OWID-style file: country AAA follows the constant-1.5 scenario
// for 60 days then R = 0.7; BBB is a short unrelated series.
std::string synthetic_owid() {
  auto traj = step_trajectory(1.5, 0.7, 61, 120);
  SimConfig sim;
  sim.k0 = 50;
  sim.seed = 11;
  auto cases = simulate_cases(traj, sim).cases;
  std::ostringstream out;
  out << "iso_code,location,date,new_cases,new_cases_smoothed\n";
  for (std::size_t i = 0; i < cases.size(); ++i)
    out << "AAA,Testland," << cases.dates[i].iso() << ',' << cases.counts[i] << ",\n";
  out << "BBB,Otherland,2021-01-01,3,\n";
  return out.str();
}

struct Fixture {
  TempDir tmp;
  fs::path cache = tmp.path / "cache";
  fs::path config = tmp.path / "rtwatch.toml";
  int calls = 0;
  bool down = false;
  std::string owid = synthetic_owid();
  std::string oxcgrt = slurp(std::string(RTWATCH_TEST_DATA) + "/oxcgrt_small.csv");
  std::string mobility = slurp(std::string(RTWATCH_TEST_DATA) + "/mobility_small.csv");

  Fixture() {
    std::ofstream(config) << "[sources]\ncache_dir = \"" << cache.string()
                          << "\"\nowid_url = \"https://example.invalid/owid.csv\"\n"
                             "oxcgrt_url = \"https://example.invalid/oxcgrt.csv\"\n"
                             "mobility_url = \"https://example.invalid/mobility.csv\"\n";
  }

  Downloader net() {
    return [this](const std::string& url) -> std::string {
      ++calls;
      if (down) throw SourceError("source unavailable: " + url);
      if (url.find("owid") != std::string::npos) return owid;
      if (url.find("oxcgrt") != std::string::npos) return oxcgrt;
      return mobility;
    };
  }

  struct Result {
    int code;
    std::string out;
    std::string err;
  };

  Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err, net());
    return {code, out.str(), err.str()};
  }
  Result run_cfg(std::vector<std::string> args) {
    args.push_back("--config");
    args.push_back(config.string());
    return run(args);
  }
};

}  // namespace

TEST_CASE("cli: usage errors exit 64") {
  Fixture f;
  CHECK(f.run({}).code == kExitUsage);
  CHECK(f.run({"bogus"}).code == kExitUsage);
  CHECK(f.run_cfg({"fetch", "bogus"}).code == kExitUsage);
  CHECK(f.run_cfg({"simulate", "--scenario", "nope", "--out", (f.tmp.path / "x.csv").string()}).code == kExitUsage);
  CHECK(f.run_cfg({"estimate", "--country", "NP"}).code == kExitUsage);
  CHECK(f.run_cfg({"estimate"}).code == kExitUsage);
  CHECK(f.run_cfg({"report", "--country", "AAA", "--figures", "fig9"}).code == kExitUsage);
  CHECK(f.run({"estimate", "--input", "x.csv", "--config", "/nonexistent.toml"}).code == kExitUsage);
  CHECK(f.run({"--help"}).code == kExitOk);
  CHECK(f.calls == 0);
}

TEST_CASE("cli: fetch cold, warm and refresh") {
  Fixture f;
  auto r = f.run_cfg({"fetch", "owid"});
  CHECK(r.code == 0);
  CHECK(r.out.find("owid: fetched") != std::string::npos);
  CHECK(f.calls == 1);

  r = f.run_cfg({"fetch", "owid"});
  CHECK(r.code == 0);
  CHECK(r.out.find("owid: cached") != std::string::npos);
  CHECK(f.calls == 1);

  r = f.run_cfg({"fetch", "owid", "oxcgrt", "mobility", "--refresh"});
  CHECK(r.code == 0);
  CHECK(f.calls == 4);
  SnapshotCache cache(f.cache);
  CHECK(cache.list(Source::owid).size() == 2);
  CHECK(cache.list(Source::oxcgrt).size() == 1);
  CHECK(cache.list(Source::mobility).size() == 1);

  auto meta = nlohmann::json::parse(slurp(f.cache / "fetch_metadata.json"));
  CHECK(meta["command"] == "fetch");
  CHECK(meta["snapshots"].size() == 3);
}

TEST_CASE("cli: fetch with network down on a cold cache exits 2") {
  Fixture f;
  f.down = true;
  auto r = f.run_cfg({"fetch", "oxcgrt"});
  CHECK(r.code == kExitSource);
  CHECK(r.err.find("source unavailable") != std::string::npos);
}

TEST_CASE("cli: cache dir from environment, flag wins over it") {
  Fixture f;
  fs::path env_cache = f.tmp.path / "env_cache";
  ::setenv(kCacheDirEnv, env_cache.c_str(), 1);
  auto r = f.run_cfg({"fetch", "owid"});
  CHECK(r.code == 0);
  CHECK(SnapshotCache(env_cache).list(Source::owid).size() == 1);
  fs::path flag_cache = f.tmp.path / "flag_cache";
  r = f.run_cfg({"fetch", "owid", "--cache-dir", flag_cache.string()});
  CHECK(SnapshotCache(flag_cache).list(Source::owid).size() == 1);
  ::unsetenv(kCacheDirEnv);
}

TEST_CASE("cli: estimate from cached OWID snapshot") {
  Fixture f;
  REQUIRE(f.run_cfg({"fetch", "owid"}).code == 0);
  fs::path out = f.tmp.path / "out";
  auto r = f.run_cfg({"estimate", "--country", "aaa", "--out", out.string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(f.calls == 1);
  auto est = read_estimates(out / "AAA" / "estimates.csv");
  CHECK(est.size() > 100);

  auto meta = nlohmann::json::parse(slurp(out / "AAA" / "estimate_metadata.json"));
  CHECK(meta["country"] == "AAA");
  CHECK(meta["snapshots"]["owid"]["digest"] == sha256_hex(f.owid));
  CHECK(meta["estimate"]["sigma"].get<double>() == est.sigma);
  CHECK(meta["estimate"].contains("flagged_dates"));
  CHECK(meta["config"]["estimator"]["grid_points"] == 1201);

  r = f.run_cfg({"estimate", "--country", "ZZZ", "--out", out.string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("country not found") != std::string::npos);

  r = f.run_cfg({"estimate", "--country", "BBB", "--out", out.string()});
  CHECK(r.code == kExitData);
}

TEST_CASE("cli: pinned digest missing from cache is a source error") {
  Fixture f;
  std::ofstream(f.config, std::ios::app) << "owid_digest = \"ffffffffffff\"\n";
  auto r = f.run_cfg({"estimate", "--country", "AAA", "--out", (f.tmp.path / "o").string()});
  CHECK(r.code == kExitSource);
  CHECK(f.calls == 0);
}

TEST_CASE("cli: simulate is deterministic and sized") {
  Fixture f;
  fs::path a = f.tmp.path / "a.csv", b = f.tmp.path / "b.csv", s = f.tmp.path / "step.csv";
  REQUIRE(f.run_cfg({"simulate", "--scenario", "constant-1.5", "--seed", "7", "--out", a.string()}).code == 0);
  REQUIRE(f.run_cfg({"simulate", "--scenario", "constant-1.5", "--seed", "7", "--out", b.string()}).code == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(f.run_cfg({"simulate", "--scenario", "step", "--seed", "1", "--out", s.string()}).code == 0);
  std::istringstream in(slurp(s));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 121);
  CHECK(fs::exists(f.tmp.path / "step.meta.json"));
  auto meta = nlohmann::json::parse(slurp(f.tmp.path / "step.meta.json"));
  CHECK(meta["seed"] == 1);
  CHECK(meta["output_sha256"] == sha256_hex(slurp(s)));
}

TEST_CASE("cli: simulate from a trajectory file") {
  Fixture f;
  fs::path traj = f.tmp.path / "traj.csv";
  std::ofstream(traj) << "date,r\n2021-01-01,1.2\n2021-01-02,1.2\n2021-01-03,0.9\n";
  fs::path out = f.tmp.path / "t.csv";
  REQUIRE(f.run_cfg({"simulate", "--traj", traj.string(), "--mode", "deterministic", "--k0", "100", "--out",
                     out.string()})
              .code == 0);
  CHECK(slurp(out).starts_with("date,new_cases,true_r\n2021-01-01,100,1.2\n"));
  CHECK(f.run_cfg({"simulate", "--traj", traj.string(), "--mode", "fast", "--out", out.string()}).code == kExitUsage);
}

TEST_CASE("cli: estimate --input on simulated constant-1.5 recovers R") {
  Fixture f;
  fs::path sim = f.tmp.path / "sim.csv";
  REQUIRE(f.run_cfg({"simulate", "--scenario", "constant-1.5", "--seed", "3", "--out", sim.string()}).code == 0);
  fs::path out = f.tmp.path / "est";
  REQUIRE(f.run_cfg({"estimate", "--input", sim.string(), "--out", out.string()}).code == 0);
  auto est = read_estimates(out / "estimates.csv");
  int hits = 0, scored = 0;
  for (std::size_t i = 20; i < est.size(); ++i) {
    ++scored;
    if (std::abs(est.records[i].mode - 1.5) <= 0.2) ++hits;
  }
  CHECK(hits >= 0.8 * scored);
  auto meta = nlohmann::json::parse(slurp(out / "estimate_metadata.json"));
  CHECK(meta["input"]["sha256"] == sha256_hex(slurp(sim)));
}

TEST_CASE("cli: report presets, index and missing estimates") {
  Fixture f;
  fs::path out = f.tmp.path / "out";
  auto r = f.run_cfg({"report", "--country", "AAA", "--out", out.string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("rtwatch estimate --country AAA") != std::string::npos);

  REQUIRE(f.run_cfg({"fetch", "owid", "oxcgrt", "mobility"}).code == 0);
  REQUIRE(f.run_cfg({"estimate", "--country", "AAA", "--out", out.string()}).code == 0);

  fs::path one = f.tmp.path / "one";
  fs::create_directories(one / "AAA");
  fs::copy_file(out / "AAA" / "estimates.csv", one / "AAA" / "estimates.csv");
  r = f.run_cfg({"report", "--country", "AAA", "--figures", "fig2", "--out", one.string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  int svgs = 0;
  for (const auto& e : fs::directory_iterator(one / "AAA")) svgs += e.path().extension() == ".svg";
  CHECK(svgs == 1);

  r = f.run_cfg({"report", "--country", "AAA", "--figures", "all", "--out", out.string(), "--trends",
                 std::string(RTWATCH_TEST_DATA) + "/trends_small.csv"});
  REQUIRE(r.code == 0);
  for (int i = 1; i <= 7; ++i) CHECK(fs::exists(out / "AAA" / ("fig" + std::to_string(i) + ".svg")));
  auto index = slurp(out / "AAA" / "index.html");
  for (int i = 1; i <= 7; ++i) CHECK(index.find("fig" + std::to_string(i) + ".svg") != std::string::npos);
  CHECK(fs::exists(out / "AAA" / "joined.csv"));
  CHECK(fs::exists(out / "AAA" / "joined.jsonl"));
  auto meta = nlohmann::json::parse(slurp(out / "AAA" / "report_metadata.json"));
  CHECK(meta["charts"].size() == 7);
  CHECK(meta["snapshots"].contains("oxcgrt"));
}

TEST_CASE("cli: estimate and report outputs are byte-identical across runs") {
  Fixture f;
  REQUIRE(f.run_cfg({"fetch", "owid", "oxcgrt", "mobility"}).code == 0);
  fs::path a = f.tmp.path / "a", b = f.tmp.path / "b";
  for (const auto& dir : {a, b}) {
    REQUIRE(f.run_cfg({"estimate", "--country", "AAA", "--out", dir.string()}).code == 0);
    REQUIRE(f.run_cfg({"report", "--country", "AAA", "--out", dir.string()}).code == 0);
  }
  for (const auto& name : {"estimates.csv", "joined.csv", "fig1.svg", "fig2.svg", "fig7.svg", "index.html"})
    CHECK_MESSAGE(slurp(a / "AAA" / name) == slurp(b / "AAA" / name), name);
}
