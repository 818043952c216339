#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "rtwatch/errors.hpp"
#include "rtwatch/sim_oracle.hpp"

using namespace rtwatch;

TEST_SUITE("rng") {
  TEST_CASE("xoshiro256** reference outputs from state {1,2,3,4}") {
    auto rng = Xoshiro256::from_state({1, 2, 3, 4});
    CHECK(rng.next() == 11520ULL);
    CHECK(rng.next() == 0ULL);
    CHECK(rng.next() == 1509978240ULL);
    CHECK(rng.next() == 1215971899390074240ULL);
  }

  TEST_CASE("uniform stays in the open unit interval") {
    Xoshiro256 rng(0);
    for (int i = 0; i < 100000; ++i) {
      double u = rng.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
    }
  }

  TEST_CASE("poisson draws have the right mean and variance") {
    for (double lambda : {0.4, 3.0, 9.9, 10.0, 57.0, 2.5e4}) {
      Xoshiro256 rng(static_cast<std::uint64_t>(lambda * 1000));
      const int n = 40000;
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i) {
        double k = static_cast<double>(sample_poisson(lambda, rng));
        sum += k;
        sq += k * k;
      }
      double mean = sum / n;
      double var = sq / n - mean * mean;
      CHECK(std::abs(mean - lambda) < 4.0 * std::sqrt(lambda / n));
      CHECK(var == doctest::Approx(lambda).epsilon(0.05));
    }
  }

  TEST_CASE("poisson rejects unusable rates") {
    Xoshiro256 rng(1);
    CHECK(sample_poisson(0.0, rng) == 0);
    CHECK_THROWS_AS(sample_poisson(-1.0, rng), DataError);
    CHECK_THROWS_AS(sample_poisson(1e16, rng), DataError);
  }
}

TEST_SUITE("simulate_cases") {
  TEST_CASE("deterministic mean at R = 1 stays at k0") {
    SimConfig cfg;
    cfg.mode = SimMode::deterministic_mean;
    cfg.k0 = 250.0;
    auto sim = simulate_cases(constant_trajectory(1.0, 30), cfg);
    for (std::size_t t = 0; t < sim.means.size(); ++t) {
      CHECK(sim.means[t] == 250.0);
      CHECK(sim.cases.counts[t] == 250);
    }
  }

  TEST_CASE("deterministic mean at R = 2 follows the closed form") {
    SimConfig cfg;
    cfg.mode = SimMode::deterministic_mean;
    cfg.k0 = 100.0;
    auto sim = simulate_cases(constant_trajectory(2.0, 3), cfg);
    // mpmath: 100 e^{1/7}, 100 e^{2/7}
    CHECK(sim.means[1] == doctest::Approx(115.35649948951078).epsilon(1e-12));
    CHECK(sim.means[2] == doctest::Approx(133.07121974473500).epsilon(1e-12));
    CHECK(sim.cases.counts[1] == 115);
    CHECK(sim.cases.counts[2] == 133);
  }

  TEST_CASE("deterministic mean under constant R is exactly geometric") {
    SimConfig cfg;
    cfg.mode = SimMode::deterministic_mean;
    cfg.k0 = 37.0;
    for (double r : {0.6, 1.3, 2.7}) {
      auto sim = simulate_cases(constant_trajectory(r, 60), cfg);
      const double ratio = std::exp((r - 1.0) / 7.0);
      for (std::size_t t = 1; t < sim.means.size(); ++t)
        CHECK(sim.means[t] / sim.means[t - 1] == doctest::Approx(ratio).epsilon(1e-13));
    }
  }

  TEST_CASE("stochastic runs are seed-deterministic") {
    auto s = find_scenario("random-walk");
    auto a = simulate_cases(s.trajectory, s.config);
    auto b = simulate_cases(s.trajectory, s.config);
    CHECK(a.cases.counts == b.cases.counts);
    CHECK(a.cases.dates == b.cases.dates);
    s.config.seed += 1;
    auto c = simulate_cases(s.trajectory, s.config);
    CHECK(a.cases.counts != c.cases.counts);
  }

  TEST_CASE("across-run mean tracks the deterministic trajectory") {
    auto s = find_scenario("constant-1.5");
    SimConfig det = s.config;
    det.mode = SimMode::deterministic_mean;
    auto mean_path = simulate_cases(s.trajectory, det).means;

    const int runs = 1000;
    for (int day : {10, 60, 120}) {
      double sum = 0.0, sq = 0.0;
      for (int seed = 0; seed < runs; ++seed) {
        SimConfig cfg = s.config;
        cfg.seed = static_cast<std::uint64_t>(seed) + 1;
        auto sim = simulate_cases(s.trajectory, cfg);
        double k = static_cast<double>(sim.cases.counts[static_cast<std::size_t>(day - 1)]);
        sum += k;
        sq += k * k;
      }
      double mean = sum / runs;
      double se = std::sqrt((sq / runs - mean * mean) / (runs - 1));
      CHECK(std::abs(mean - mean_path[static_cast<std::size_t>(day - 1)]) <= 3.0 * se);
    }
  }

  TEST_CASE("extinction is absorbing") {
    auto s = find_scenario("extinction");
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      s.config.seed = seed;
      auto sim = simulate_cases(s.trajectory, s.config);
      for (std::size_t t = 1; t < sim.cases.size(); ++t)
        if (sim.cases.counts[t - 1] == 0) REQUIRE(sim.cases.counts[t] == 0);
    }
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(simulate_cases(RtTrajectory{}, SimConfig{}), DataError);
    SimConfig cfg;
    cfg.k0 = 0.0;
    CHECK_THROWS_AS(simulate_cases(constant_trajectory(1.0, 3), cfg), DataError);
  }
}

TEST_SUITE("standard_scenarios") {
  TEST_CASE("the four validation scenarios") {
    auto all = standard_scenarios();
    REQUIRE(all.size() == 4);
    CHECK(all[0].name == "constant-1.5");
    CHECK(all[1].name == "step");
    CHECK(all[2].name == "random-walk");
    CHECK(all[3].name == "extinction");
    for (const auto& s : all) CHECK(s.trajectory.size() == 120);
  }

  TEST_CASE("constant scenario") {
    auto a = find_scenario("constant-1.5");
    CHECK(a.trajectory.true_r.front() == 1.5);
    CHECK(a.trajectory.true_r.back() == 1.5);
  }

  TEST_CASE("step scenario switches on day 60") {
    auto b = find_scenario("step");
    CHECK(b.trajectory.true_r[58] == 2.0);  // day 59
    CHECK(b.trajectory.true_r[59] == 0.8);  // day 60
  }

  TEST_CASE("random walk is clipped and contiguous") {
    auto c = find_scenario("random-walk");
    for (std::size_t t = 0; t < c.trajectory.size(); ++t) {
      CHECK(c.trajectory.true_r[t] >= 0.0);
      CHECK(c.trajectory.true_r[t] <= 6.0);
      if (t > 0) CHECK(c.trajectory.dates[t] - c.trajectory.dates[t - 1] == 1);
    }
    auto clipped = random_walk_trajectory(3, 0.1, 2.0, 0.0, 0.5, 200);
    CHECK(*std::max_element(clipped.true_r.begin(), clipped.true_r.end()) == 0.5);
    CHECK(*std::min_element(clipped.true_r.begin(), clipped.true_r.end()) == 0.0);
  }

  TEST_CASE("subcritical scenario dies out for most seeds") {
    auto d = find_scenario("extinction");
    int extinct = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      d.config.seed = seed;
      auto sim = simulate_cases(d.trajectory, d.config);
      extinct += sim.cases.counts.back() == 0;
    }
    CHECK(extinct >= 90);
  }

  TEST_CASE("unknown name") { CHECK_THROWS_AS(find_scenario("nope"), DataError); }
}
