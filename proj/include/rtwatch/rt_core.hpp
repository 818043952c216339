#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtwatch/date.hpp"

namespace rtwatch {

// Daily new-case counts on a contiguous run of dates.
struct CaseSeries {
  std::vector<Date> dates;
  std::vector<std::int64_t> counts;
  std::string source_label;

  std::size_t size() const { return dates.size(); }
  bool empty() const { return dates.empty(); }
  // Throws DataError when dates are not strictly consecutive or a count is negative.
  void validate() const;
};

struct SmoothedSeries {
  std::vector<Date> dates;
  std::vector<double> values;
  int window_days = 1;
  double window_std = 0.0;

  std::size_t size() const { return dates.size(); }
  bool empty() const { return dates.empty(); }
};

// Evenly spaced support of R_t: r_min + i * (r_max - r_min) / (n_points - 1).
class RtGrid {
 public:
  RtGrid(double r_min, double r_max, std::size_t n_points);

  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  std::size_t size() const { return n_; }
  double step() const { return (r_max_ - r_min_) / static_cast<double>(n_ - 1); }
  double operator[](std::size_t i) const { return r_min_ + static_cast<double>(i) * step(); }
  std::vector<double> points() const;
  std::size_t nearest_index(double r) const;

  bool operator==(const RtGrid&) const = default;

 private:
  double r_min_;
  double r_max_;
  std::size_t n_;
};

// Serial interval in days; gamma is always derived as its reciprocal.
class SerialInterval {
 public:
  explicit SerialInterval(double days = 7.0);

  double days() const { return days_; }
  double gamma() const { return 1.0 / days_; }

 private:
  double days_;
};

// Log-likelihood of each date's count over the grid, one row per date
// starting at the second date of the input series.
struct LikelihoodMatrix {
  std::vector<Date> dates;
  std::size_t n_points = 0;
  std::vector<double> values;  // row-major, dates.size() x n_points
  std::vector<bool> flagged;   // lambda floored because k_{t-1} = 0 < k_t

  std::size_t rows() const { return dates.size(); }
  std::span<const double> row(std::size_t t) const { return {values.data() + t * n_points, n_points}; }
  std::span<double> row(std::size_t t) { return {values.data() + t * n_points, n_points}; }
};

// Row-stochastic Gaussian random-walk transition over grid points:
// entry (i, j) = g(|i - j|) / Z_i with g(d) = exp(-(d * step)^2 / (2 sigma^2)).
class TransitionKernel {
 public:
  TransitionKernel(const RtGrid& grid, double sigma);

  std::size_t size() const { return n_; }
  double sigma() const { return sigma_; }
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> dense() const;  // row-major n x n

  // prior(j) = sum_i posterior(i) * K(i, j)
  void propagate(std::span<const double> posterior, std::span<double> prior) const;

 private:
  std::size_t n_;
  double sigma_;
  std::vector<double> profile_;  // g(d), d = 0..n-1
  std::vector<double> inv_row_sum_;
  std::size_t support_ = 0;  // largest d with g(d) > 0
};

struct PosteriorMatrix {
  std::vector<Date> dates;
  RtGrid grid{0.0, 1.0, 2};
  std::vector<double> values;           // row-major, dates.size() x grid.size()
  std::vector<double> log_normalizers;  // log P(k_t | k_1..k_{t-1})

  std::size_t rows() const { return dates.size(); }
  std::span<const double> row(std::size_t t) const { return {values.data() + t * grid.size(), grid.size()}; }
  double total_log_evidence() const;
};

struct RtRecord {
  Date date;
  double mode = 0.0;
  double mean = 0.0;
  double hdi_low = 0.0;
  double hdi_high = 0.0;
  bool flagged = false;
};

struct RtEstimate {
  std::vector<RtRecord> records;
  double sigma = 0.0;
  double hdi_mass = 0.9;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

enum class InitialPrior { uniform, gamma };

struct EstimatorConfig {
  RtGrid grid{0.0, 12.0, 1201};
  SerialInterval serial{7.0};
  std::optional<double> sigma;  // nullopt selects by marginal likelihood
  std::vector<double> sigma_candidates{0.01, 0.03, 0.05, 0.1, 0.15, 0.25, 0.5, 1.0};
  int window_days = 7;
  double window_std = 2.0;
  double leading_trim_cutoff = 10.0;
  double hdi_mass = 0.9;
  bool use_source_smoothed = false;
  InitialPrior initial_prior = InitialPrior::uniform;
  double gamma_prior_shape = 4.0;  // used when initial_prior == gamma

  // Throws DataError on out-of-range settings.
  void validate() const;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct IndexInterval {
  std::size_t first = 0;
  std::size_t last = 0;
};

// Floor applied to lambda when yesterday had zero cases but today does not.
inline constexpr double kLambdaFloor = 1e-8;

SmoothedSeries smooth_cases(const CaseSeries& series, int window_days, double window_std);

SmoothedSeries trim_leading(const SmoothedSeries& series, double cutoff);

double expected_rate(double k_prev, double gamma, double r);

// k ln(lambda) - lambda - lnGamma(k + 1); -infinity when lambda = 0 < k.
double log_poisson_pmf(double k, double lambda);

LikelihoodMatrix likelihood_matrix(const SmoothedSeries& series, const RtGrid& grid, const SerialInterval& serial);

TransitionKernel gaussian_transition_kernel(const RtGrid& grid, double sigma);

// Throws DataError("posterior collapsed") if a row has no finite mass.
PosteriorMatrix posterior_sequence(const LikelihoodMatrix& log_likelihoods, const TransitionKernel& kernel,
                                   std::span<const double> initial_prior, const RtGrid& grid);

IndexInterval highest_density_indices(std::span<const double> distribution, double mass);
Interval highest_density_interval(std::span<const double> distribution, const RtGrid& grid, double mass);

std::vector<double> initial_prior(const EstimatorConfig& config);

double optimize_sigma(const SmoothedSeries& series, const EstimatorConfig& config);

// Full pipeline from raw counts.
RtEstimate estimate_rt(const CaseSeries& series, const EstimatorConfig& config);
// Pipeline from an already smoothed series (source-smoothed or noise-free input).
RtEstimate estimate_rt(const SmoothedSeries& series, const EstimatorConfig& config);

// Per-date summaries of a posterior: mode (ties to lower r), mean and HDI.
RtEstimate summarize_posterior(const PosteriorMatrix& posterior, const std::vector<bool>& flagged, double sigma,
                               double hdi_mass);

}  // namespace rtwatch
