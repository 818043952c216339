#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rtwatch/date.hpp"
#include "rtwatch/rt_core.hpp"

namespace rtwatch {

// xoshiro256** seeded through splitmix64. Identical seeds give identical
// streams on every platform.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);
  static Xoshiro256 from_state(const std::array<std::uint64_t, 4>& state);

  std::uint64_t next();
  // Uniform on the open interval (0, 1): ((x >> 11) + 0.5) * 2^-53.
  double uniform();
  // Standard normal by Box-Muller (cosine branch only, two uniforms per draw).
  double normal();

 private:
  Xoshiro256() = default;
  std::array<std::uint64_t, 4> s_{};
};

// Poisson draw: sequential inversion for lambda < 10, Hormann's PTRS
// transformed rejection otherwise. Throws DataError for lambda > 1e15.
std::int64_t sample_poisson(double lambda, Xoshiro256& rng);

struct RtTrajectory {
  std::vector<Date> dates;
  std::vector<double> true_r;
  std::string label;

  std::size_t size() const { return dates.size(); }
};

enum class SimMode { stochastic, deterministic_mean };

struct SimConfig {
  double k0 = 100.0;
  SerialInterval serial{7.0};
  std::uint64_t seed = 1;
  SimMode mode = SimMode::stochastic;
};

struct SimulatedCases {
  CaseSeries cases;
  // Unrounded k_t in deterministic-mean mode; the Poisson rate lambda_t in
  // stochastic mode (k_0 at index 0 in both).
  std::vector<double> means;
};

SimulatedCases simulate_cases(const RtTrajectory& traj, const SimConfig& config);

struct Scenario {
  std::string name;
  RtTrajectory trajectory;
  SimConfig config;
};

inline const Date kScenarioStart{2021, 1, 1};

RtTrajectory constant_trajectory(double r, int days, Date start = kScenarioStart);
RtTrajectory step_trajectory(double before, double after, int change_day, int days, Date start = kScenarioStart);
// Gaussian random walk from `start_r`, clipped to [lo, hi] after every step.
RtTrajectory random_walk_trajectory(std::uint64_t seed, double start_r, double step_std, double lo, double hi, int days,
                                    Date start = kScenarioStart);

// (a) constant-1.5, (b) step, (c) random-walk, (d) extinction.
std::vector<Scenario> standard_scenarios();
// Throws DataError for an unknown name.
Scenario find_scenario(const std::string& name);

}  // namespace rtwatch
