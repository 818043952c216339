#include "rtwatch/rt_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rtwatch/errors.hpp"

namespace rtwatch {

namespace {

constexpr double kHdiTolerance = 1e-12;
constexpr double kNormTolerance = 1e-9;
// Posterior entries below this fraction of the row maximum are not propagated.
constexpr double kPropagationCutoff = 1e-40;

}  // namespace

void CaseSeries::validate() const {
  if (dates.size() != counts.size()) throw DataError("case series: dates and counts differ in length");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw DataError("case series: negative count on " + dates[i].iso());
    if (i > 0 && dates[i] - dates[i - 1] != 1) throw DataError("case series: dates not contiguous at " + dates[i].iso());
  }
}

RtGrid::RtGrid(double r_min, double r_max, std::size_t n_points) : r_min_(r_min), r_max_(r_max), n_(n_points) {
  if (!(r_min >= 0.0) || !std::isfinite(r_max) || !(r_max > r_min) || n_points < 2)
    throw DataError("invalid grid: need 0 <= r_min < r_max and at least 2 points");
}

std::vector<double> RtGrid::points() const {
  std::vector<double> p(n_);
  for (std::size_t i = 0; i < n_; ++i) p[i] = (*this)[i];
  return p;
}

std::size_t RtGrid::nearest_index(double r) const {
  double pos = std::round((r - r_min_) / step());
  if (pos <= 0.0) return 0;
  return std::min(n_ - 1, static_cast<std::size_t>(pos));
}

SerialInterval::SerialInterval(double days) : days_(days) {
  if (!(days > 0.0) || !std::isfinite(days)) throw DataError("serial interval must be positive");
}

void EstimatorConfig::validate() const {
  if (sigma && !(*sigma > 0.0)) throw DataError("sigma must be positive");
  if (!sigma) {
    if (sigma_candidates.empty()) throw DataError("sigma_candidates must be non-empty when sigma is auto");
    for (double s : sigma_candidates)
      if (!(s > 0.0) || !std::isfinite(s)) throw DataError("sigma_candidates must be strictly positive");
  }
  if (window_days < 1 || window_days % 2 == 0) throw DataError("smoothing window must be odd and >= 1");
  if (!(window_std > 0.0)) throw DataError("smoothing std must be positive");
  if (!(leading_trim_cutoff >= 0.0)) throw DataError("leading_trim_cutoff must be >= 0");
  if (!(hdi_mass > 0.0 && hdi_mass < 1.0)) throw DataError("hdi_mass must lie in (0, 1)");
  if (initial_prior == InitialPrior::gamma && !(gamma_prior_shape > 0.0))
    throw DataError("gamma_prior_shape must be positive");
}

SmoothedSeries smooth_cases(const CaseSeries& series, int window_days, double window_std) {
  if (series.empty()) throw DataError("empty input");
  if (window_days < 1 || window_days % 2 == 0) throw DataError("smoothing window must be odd and >= 1");
  if (!(window_std > 0.0)) throw DataError("smoothing std must be positive");
  series.validate();

  const int half = window_days / 2;
  std::vector<double> weights(static_cast<std::size_t>(window_days));
  for (int d = -half; d <= half; ++d)
    weights[static_cast<std::size_t>(d + half)] = std::exp(-static_cast<double>(d * d) / (2.0 * window_std * window_std));

  const auto n = static_cast<std::ptrdiff_t>(series.size());
  SmoothedSeries out;
  out.dates = series.dates;
  out.values.resize(series.size());
  out.window_days = window_days;
  out.window_std = window_std;
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double num = 0.0;
    double den = 0.0;
    for (int d = -half; d <= half; ++d) {
      std::ptrdiff_t s = t + d;
      if (s < 0 || s >= n) continue;
      double w = weights[static_cast<std::size_t>(d + half)];
      num += w * static_cast<double>(series.counts[static_cast<std::size_t>(s)]);
      den += w;
    }
    out.values[static_cast<std::size_t>(t)] = std::max(0.0, num / den);
  }
  return out;
}

SmoothedSeries trim_leading(const SmoothedSeries& series, double cutoff) {
  if (!(cutoff >= 0.0)) throw DataError("cutoff must be >= 0");
  auto it = std::find_if(series.values.begin(), series.values.end(), [cutoff](double v) { return v >= cutoff; });
  if (it == series.values.end()) throw DataError("series never reaches cutoff");
  auto offset = it - series.values.begin();
  SmoothedSeries out;
  out.dates.assign(series.dates.begin() + offset, series.dates.end());
  out.values.assign(it, series.values.end());
  out.window_days = series.window_days;
  out.window_std = series.window_std;
  return out;
}

double expected_rate(double k_prev, double gamma, double r) { return k_prev * std::exp(gamma * (r - 1.0)); }

double log_poisson_pmf(double k, double lambda) {
  if (!(k >= 0.0) || !(lambda >= 0.0)) throw DataError("invalid Poisson argument");
  if (lambda == 0.0) return k == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

LikelihoodMatrix likelihood_matrix(const SmoothedSeries& series, const RtGrid& grid, const SerialInterval& serial) {
  if (series.size() < 2) throw DataError("insufficient data");
  const std::size_t n = grid.size();
  std::vector<double> growth(n);
  for (std::size_t i = 0; i < n; ++i) growth[i] = std::exp(serial.gamma() * (grid[i] - 1.0));

  LikelihoodMatrix out;
  out.n_points = n;
  out.dates.assign(series.dates.begin() + 1, series.dates.end());
  out.values.resize(out.dates.size() * n);
  out.flagged.assign(out.dates.size(), false);
  for (std::size_t t = 1; t < series.size(); ++t) {
    const double k = series.values[t];
    const double k_prev = series.values[t - 1];
    auto row = out.row(t - 1);
    if (k_prev == 0.0 && k > 0.0) {
      out.flagged[t - 1] = true;
      std::fill(row.begin(), row.end(), log_poisson_pmf(k, kLambdaFloor));
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) row[i] = log_poisson_pmf(k, k_prev * growth[i]);
  }
  return out;
}

TransitionKernel::TransitionKernel(const RtGrid& grid, double sigma) : n_(grid.size()), sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DataError("sigma must be positive");
  const double step = grid.step();
  profile_.resize(n_);
  for (std::size_t d = 0; d < n_; ++d) {
    double x = static_cast<double>(d) * step;
    profile_[d] = std::exp(-(x * x) / (2.0 * sigma * sigma));
    if (profile_[d] > 0.0) support_ = d;
  }
  // Z_i = sum_{d=0..i} g(d) + sum_{d=1..n-1-i} g(d)
  std::vector<double> cum(n_);
  std::partial_sum(profile_.begin(), profile_.end(), cum.begin());
  inv_row_sum_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) inv_row_sum_[i] = 1.0 / (cum[i] + cum[n_ - 1 - i] - profile_[0]);
}

double TransitionKernel::at(std::size_t i, std::size_t j) const { return profile_[i > j ? i - j : j - i] * inv_row_sum_[i]; }

std::vector<double> TransitionKernel::dense() const {
  std::vector<double> m(n_ * n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) m[i * n_ + j] = at(i, j);
  return m;
}

void TransitionKernel::propagate(std::span<const double> posterior, std::span<double> prior) const {
  std::fill(prior.begin(), prior.end(), 0.0);
  const double* g = profile_.data();
  double* out = prior.data();
  const double floor = *std::max_element(posterior.begin(), posterior.end()) * kPropagationCutoff;
  for (std::size_t i = 0; i < n_; ++i) {
    if (posterior[i] <= floor) continue;
    const double w = posterior[i] * inv_row_sum_[i];
    const std::size_t lo = i > support_ ? i - support_ : 0;
    const std::size_t hi = std::min(n_ - 1, i + support_);
    for (std::size_t j = i; j <= hi; ++j) out[j] += w * g[j - i];
    for (std::size_t j = lo; j < i; ++j) out[j] += w * g[i - j];
  }
}

TransitionKernel gaussian_transition_kernel(const RtGrid& grid, double sigma) { return TransitionKernel(grid, sigma); }

double PosteriorMatrix::total_log_evidence() const {
  return std::accumulate(log_normalizers.begin(), log_normalizers.end(), 0.0);
}

PosteriorMatrix posterior_sequence(const LikelihoodMatrix& log_likelihoods, const TransitionKernel& kernel,
                                   std::span<const double> initial_prior, const RtGrid& grid) {
  const std::size_t n = grid.size();
  if (log_likelihoods.n_points != n || kernel.size() != n || initial_prior.size() != n)
    throw DataError("posterior_sequence: dimension mismatch");
  double prior_sum = std::accumulate(initial_prior.begin(), initial_prior.end(), 0.0);
  if (std::abs(prior_sum - 1.0) > kNormTolerance) throw DataError("initial prior must sum to 1");

  PosteriorMatrix out;
  out.dates = log_likelihoods.dates;
  out.grid = grid;
  out.values.resize(out.dates.size() * n);
  out.log_normalizers.resize(out.dates.size());

  std::vector<double> prior(initial_prior.begin(), initial_prior.end());
  std::vector<double> log_joint(n);
  for (std::size_t t = 0; t < out.dates.size(); ++t) {
    if (t > 0) kernel.propagate(out.row(t - 1), prior);
    auto ll = log_likelihoods.row(t);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      log_joint[i] = prior[i] > 0.0 ? ll[i] + std::log(prior[i]) : -std::numeric_limits<double>::infinity();
      peak = std::max(peak, log_joint[i]);
    }
    if (!std::isfinite(peak)) throw DataError("posterior collapsed on " + out.dates[t].iso());
    double* post = out.values.data() + t * n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      post[i] = std::exp(log_joint[i] - peak);
      sum += post[i];
    }
    for (std::size_t i = 0; i < n; ++i) post[i] /= sum;
    out.log_normalizers[t] = peak + std::log(sum);
  }
  return out;
}

IndexInterval highest_density_indices(std::span<const double> distribution, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw DataError("HDI mass must lie in (0, 1)");
  const std::size_t n = distribution.size();
  if (n == 0) throw DataError("HDI of empty distribution");
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + distribution[i];
  if (std::abs(cum[n] - 1.0) > kNormTolerance) throw DataError("HDI distribution must sum to 1");

  const double target = mass - kHdiTolerance;
  IndexInterval best{0, n - 1};
  std::size_t right = 0;
  for (std::size_t left = 0; left < n; ++left) {
    right = std::max(right, left);
    while (right < n && cum[right + 1] - cum[left] < target) ++right;
    if (right == n) break;
    if (right - left < best.last - best.first) best = {left, right};
  }
  return best;
}

Interval highest_density_interval(std::span<const double> distribution, const RtGrid& grid, double mass) {
  if (distribution.size() != grid.size()) throw DataError("HDI: distribution and grid differ in size");
  auto idx = highest_density_indices(distribution, mass);
  return {grid[idx.first], grid[idx.last]};
}

std::vector<double> initial_prior(const EstimatorConfig& config) {
  const std::size_t n = config.grid.size();
  std::vector<double> prior(n, 1.0 / static_cast<double>(n));
  if (config.initial_prior == InitialPrior::gamma) {
    const double a = config.gamma_prior_shape;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = config.grid[i];
      prior[i] = r > 0.0 ? std::exp((a - 1.0) * std::log(r) - r - std::lgamma(a)) : (a == 1.0 ? 1.0 : 0.0);
      sum += prior[i];
    }
    if (!(sum > 0.0)) throw DataError("gamma initial prior has no mass on the grid");
    for (double& p : prior) p /= sum;
  }
  return prior;
}

namespace {

struct SigmaFit {
  double sigma;
  PosteriorMatrix posterior;
};

SigmaFit fit_sigma(const LikelihoodMatrix& ll, const EstimatorConfig& config, std::span<const double> prior) {
  std::optional<SigmaFit> best;
  for (double sigma : config.sigma_candidates) {
    if (best && sigma == best->sigma) continue;
    PosteriorMatrix post;
    try {
      post = posterior_sequence(ll, TransitionKernel(config.grid, sigma), prior, config.grid);
    } catch (const DataError&) {
      continue;
    }
    double total = post.total_log_evidence();
    if (!std::isfinite(total)) continue;
    if (!best) {
      best = SigmaFit{sigma, std::move(post)};
      continue;
    }
    double best_total = best->posterior.total_log_evidence();
    if (total > best_total || (total == best_total && sigma < best->sigma)) best = SigmaFit{sigma, std::move(post)};
  }
  if (!best) throw DataError("no viable sigma");
  return std::move(*best);
}

SmoothedSeries as_smoothed(const CaseSeries& series) {
  series.validate();
  SmoothedSeries s;
  s.dates = series.dates;
  s.values.assign(series.counts.begin(), series.counts.end());
  return s;
}

}  // namespace

double optimize_sigma(const SmoothedSeries& series, const EstimatorConfig& config) {
  if (config.sigma_candidates.empty()) throw DataError("sigma_candidates must be non-empty");
  auto ll = likelihood_matrix(series, config.grid, config.serial);
  auto prior = initial_prior(config);
  return fit_sigma(ll, config, prior).sigma;
}

RtEstimate summarize_posterior(const PosteriorMatrix& posterior, const std::vector<bool>& flagged, double sigma,
                               double hdi_mass) {
  RtEstimate est;
  est.sigma = sigma;
  est.hdi_mass = hdi_mass;
  est.records.reserve(posterior.rows());
  const auto& grid = posterior.grid;
  for (std::size_t t = 0; t < posterior.rows(); ++t) {
    auto row = posterior.row(t);
    std::size_t mode = 0;
    double mean = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] > row[mode]) mode = i;
      mean += grid[i] * row[i];
    }
    auto hdi = highest_density_indices(row, hdi_mass);
    hdi.first = std::min(hdi.first, mode);
    hdi.last = std::max(hdi.last, mode);
    RtRecord rec;
    rec.date = posterior.dates[t];
    rec.mode = grid[mode];
    rec.mean = std::clamp(mean, grid.r_min(), grid.r_max());
    rec.hdi_low = grid[hdi.first];
    rec.hdi_high = grid[hdi.last];
    rec.flagged = t < flagged.size() && flagged[t];
    est.records.push_back(rec);
  }
  return est;
}

RtEstimate estimate_rt(const SmoothedSeries& series, const EstimatorConfig& config) {
  config.validate();
  if (series.empty()) throw DataError("empty input");
  auto trimmed = trim_leading(series, config.leading_trim_cutoff);
  if (trimmed.size() < 2) throw DataError("insufficient data");
  auto ll = likelihood_matrix(trimmed, config.grid, config.serial);
  auto prior = initial_prior(config);

  SigmaFit fit = config.sigma ? SigmaFit{*config.sigma, posterior_sequence(ll, TransitionKernel(config.grid, *config.sigma),
                                                                           prior, config.grid)}
                              : fit_sigma(ll, config, prior);
  return summarize_posterior(fit.posterior, ll.flagged, fit.sigma, config.hdi_mass);
}

RtEstimate estimate_rt(const CaseSeries& series, const EstimatorConfig& config) {
  config.validate();
  if (series.empty()) throw DataError("empty input");
  if (config.use_source_smoothed) return estimate_rt(as_smoothed(series), config);
  return estimate_rt(smooth_cases(series, config.window_days, config.window_std), config);
}

}  // namespace rtwatch
