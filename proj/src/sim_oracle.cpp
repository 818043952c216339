#include "rtwatch/sim_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rtwatch/errors.hpp"

namespace rtwatch {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr double kMaxLambda = 1e15;

std::int64_t poisson_inversion(double lambda, Xoshiro256& rng) {
  double p = std::exp(-lambda);
  double cdf = p;
  double u = rng.uniform();
  std::int64_t k = 0;
  while (u > cdf && k < 1000) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

std::int64_t poisson_ptrs(double lambda, Xoshiro256& rng) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -lambda + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::int64_t>(k);
  }
}

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& word : s_) word = splitmix64(seed);
}

Xoshiro256 Xoshiro256::from_state(const std::array<std::uint64_t, 4>& state) {
  Xoshiro256 rng;
  rng.s_ = state;
  return rng;
}

std::uint64_t Xoshiro256::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

double Xoshiro256::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t sample_poisson(double lambda, Xoshiro256& rng) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DataError("invalid Poisson rate");
  if (lambda > kMaxLambda) throw DataError("Poisson rate exceeds simulator range");
  if (lambda == 0.0) return 0;
  return lambda < 10.0 ? poisson_inversion(lambda, rng) : poisson_ptrs(lambda, rng);
}

SimulatedCases simulate_cases(const RtTrajectory& traj, const SimConfig& config) {
  if (traj.dates.empty()) throw DataError("empty trajectory");
  if (traj.dates.size() != traj.true_r.size()) throw DataError("trajectory dates and values differ in length");
  if (!(config.k0 > 0.0)) throw DataError("k0 must be positive");

  const double gamma = config.serial.gamma();
  SimulatedCases out;
  out.cases.dates = traj.dates;
  out.cases.source_label = "sim:" + traj.label;
  out.cases.counts.resize(traj.size());
  out.means.resize(traj.size());

  const double k0 = std::round(config.k0);
  out.means[0] = k0;
  out.cases.counts[0] = static_cast<std::int64_t>(k0);

  if (config.mode == SimMode::deterministic_mean) {
    double k = k0;
    for (std::size_t t = 1; t < traj.size(); ++t) {
      k = expected_rate(k, gamma, traj.true_r[t]);
      out.means[t] = k;
      out.cases.counts[t] = std::llround(k);
    }
    return out;
  }

  Xoshiro256 rng(config.seed);
  std::int64_t prev = out.cases.counts[0];
  for (std::size_t t = 1; t < traj.size(); ++t) {
    double lambda = expected_rate(static_cast<double>(prev), gamma, traj.true_r[t]);
    out.means[t] = lambda;
    prev = prev == 0 ? 0 : sample_poisson(lambda, rng);
    out.cases.counts[t] = prev;
  }
  return out;
}

RtTrajectory constant_trajectory(double r, int days, Date start) {
  RtTrajectory traj;
  traj.label = "constant";
  for (int d = 0; d < days; ++d) {
    traj.dates.push_back(start + d);
    traj.true_r.push_back(r);
  }
  return traj;
}

RtTrajectory step_trajectory(double before, double after, int change_day, int days, Date start) {
  RtTrajectory traj;
  traj.label = "step";
  for (int d = 0; d < days; ++d) {
    traj.dates.push_back(start + d);
    // Days are 1-based: day `change_day` is the first day at the new level.
    traj.true_r.push_back(d + 1 < change_day ? before : after);
  }
  return traj;
}

RtTrajectory random_walk_trajectory(std::uint64_t seed, double start_r, double step_std, double lo, double hi, int days,
                                    Date start) {
  Xoshiro256 rng(seed);
  RtTrajectory traj;
  traj.label = "random-walk";
  double r = std::clamp(start_r, lo, hi);
  for (int d = 0; d < days; ++d) {
    traj.dates.push_back(start + d);
    traj.true_r.push_back(r);
    r = std::clamp(r + step_std * rng.normal(), lo, hi);
  }
  return traj;
}

std::vector<Scenario> standard_scenarios() {
  std::vector<Scenario> out;

  Scenario a{"constant-1.5", constant_trajectory(1.5, 120), {}};
  a.trajectory.label = a.name;
  a.config.k0 = 500.0;
  out.push_back(std::move(a));

  Scenario b{"step", step_trajectory(2.0, 0.8, 60, 120), {}};
  b.config.k0 = 100.0;
  out.push_back(std::move(b));

  Scenario c{"random-walk", random_walk_trajectory(20210421, 1.0, 0.15, 0.0, 6.0, 120), {}};
  c.config.k0 = 500.0;
  out.push_back(std::move(c));

  Scenario d{"extinction", constant_trajectory(0.5, 120), {}};
  d.trajectory.label = d.name;
  d.config.k0 = 20.0;
  out.push_back(std::move(d));

  return out;
}

Scenario find_scenario(const std::string& name) {
  for (auto& s : standard_scenarios())
    if (s.name == name) return s;
  throw DataError("unknown scenario '" + name + "'");
}

}  // namespace rtwatch
