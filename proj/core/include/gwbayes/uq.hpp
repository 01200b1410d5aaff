#pragma once

// Identifiability campaigns on synthetic data and Monte Carlo propagation of
// the Laplace posterior to travel-time distributions.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gwbayes/flow.hpp"
#include "gwbayes/inversion.hpp"
#include "gwbayes/laplace.hpp"
#include "gwbayes/model.hpp"
#include "gwbayes/tracking.hpp"

namespace gwbayes {

// ---------------------------------------------------------------- metrics

struct ParameterMetrics {
  double ratio_to_true = 0.0;
  double coefficient_of_variation = 0.0;
  double variance_reduction_ratio = 0.0;  // posterior variance / uniform prior variance
  bool truth_in_2sigma = false;
};

std::array<ParameterMetrics, 4> identifiability_metrics(const ParameterVector& mu, const Eigen::Matrix4d& sigma,
                                                        const ParameterVector& p_true, const PriorBox& box);

// ------------------------------------------------------- identifiability

struct IdentifiabilityOptions {
  std::vector<double> noise_levels{0.25, 0.5, 1.0, 2.0, 3.0, 4.0};
  int replicates = 5;
  std::uint64_t seed = 1;
  std::vector<double> sigma_grid = default_sigma_grid();
  CalibrationOptions calibration;  // its `workers` is ignored; cells are the jobs
  SolverOptions solver;
  double step_fraction = 2e-4;
  CovarianceOptions covariance;
  int workers = 1;
};

struct IdentifiabilityCell {
  double noise_level = 0.0;
  int replicate = 0;
  bool calibrated = false;
  bool has_posterior = false;
  std::string error;  // empty on success
  CalibrationResult calibration;  // trace dropped
  PosteriorGaussian posterior;
  bool hpas_flat = false;
  std::array<ParameterMetrics, 4> metrics{};
};

struct IdentifiabilityReport {
  ParameterVector p_true;
  double hpas_true = 0.0;
  PriorBox box;
  std::vector<IdentifiabilityCell> cells;  // level-major, then replicate
};

/// One job per (level, replicate): synthetic data, calibration, Laplace
/// posterior, metrics. Noise for level index l comes from
/// derive_seed(seed, {l}). Failures are recorded in the cell.
IdentifiabilityReport identifiability_study(const Scenario& scenario, const ParameterVector& p_true,
                                            const IdentifiabilityOptions& opts);

/// One row per level x replicate x parameter.
std::string identifiability_report_csv(const IdentifiabilityReport& report);
/// Per-level aggregates. The 0.5-2 ratio band and the 0.1 variance
/// reduction cut are this tool's own thresholds.
std::string identifiability_summary_json(const IdentifiabilityReport& report);

// ------------------------------------------------------------- sampling

struct SamplingResult {
  std::vector<ParameterVector> draws;
  std::size_t rejections = 0;
};

/// Multivariate normal draws mu + L z restricted to positive, ordered vectors
/// by rejection. Draw i uses its own stream derive_seed(seed, {i}). Throws
/// SamplingError when a single draw needs more than `max_rejects` attempts.
SamplingResult sample_posterior(const PosteriorGaussian& pg, std::size_t n, std::uint64_t seed,
                                std::size_t max_rejects = 1000);

// ------------------------------------------------------------ forward UQ

/// Linear interpolation between order statistics at position (n-1) q / 100.
double percentile(const std::vector<double>& sorted, double q);
double median(std::vector<double> values);

struct ForwardUqOptions {
  std::size_t n_draws = 500;
  int release_spacing = 5;
  std::uint64_t seed = 1;
  std::size_t max_rejects = 1000;
  double threshold_years = 25.0;
  std::vector<double> levels{25.0, 50.0, 75.0, 90.0, 99.0};
  SolverOptions solver;
  TrackingOptions tracking;
  int workers = 1;
};

struct Realization {
  ParameterVector p;
  bool ok = false;
  std::string error;
  std::vector<double> percentiles;  // one per level
  double percent_under_threshold = 0.0;
  std::size_t n_released = 0;
  std::size_t n_zero_excluded = 0;
  std::size_t n_unterminated = 0;
  std::vector<double> times;  // ascending, years
};

struct TravelTimeEnsemble {
  std::vector<double> levels;
  double threshold_years = 25.0;
  std::size_t rejections = 0;
  std::vector<Realization> realizations;
};

/// Realization i is a function of the scenario and draw i only.
Realization run_realization(const Scenario& scenario, const ParameterVector& p, const ForwardUqOptions& opts);

TravelTimeEnsemble forward_uq(const Scenario& scenario, const PosteriorGaussian& pg, const ForwardUqOptions& opts);

struct SummaryRow {
  double level = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct EnsembleSummary {
  std::vector<SummaryRow> percentiles;
  SummaryRow under_threshold;  // level holds the threshold in years
  std::size_t n_requested = 0;
  std::size_t n_succeeded = 0;
  std::size_t rejections = 0;
};

/// Throws Error when no realization succeeded.
EnsembleSummary ensemble_summary(const TravelTimeEnsemble& ens);

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
};

/// Bins [k w, (k+1) w) covering the data, empty interior bins included.
std::vector<HistogramBin> histogram(const std::vector<double>& values, double bin_width);

std::string ensemble_percentiles_csv(const TravelTimeEnsemble& ens);
std::string ensemble_summary_json(const TravelTimeEnsemble& ens, const EnsembleSummary& summary);
std::string histogram_csv(const std::vector<HistogramBin>& bins);
/// realization,time_years,cdf with cdf = (k+1)/n over each sorted sample.
std::string cdf_long_csv(const TravelTimeEnsemble& ens);

}  // namespace gwbayes
