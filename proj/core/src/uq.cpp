#include "gwbayes/uq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>

#include "gwbayes/error.hpp"
#include "gwbayes/parallel.hpp"
#include "gwbayes/rng.hpp"
#include "gwbayes/text.hpp"

namespace gwbayes {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// JSON has no NaN/inf; those become null.
nlohmann::ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

struct Stats {
  double mean = kNaN, sd = kNaN, min = kNaN, max = kNaN;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

nlohmann::ordered_json stats_json(const std::vector<double>& v) {
  const Stats s = stats(v);
  return {{"mean", number(s.mean)}, {"sd", number(s.sd)}, {"min", number(s.min)}, {"max", number(s.max)}};
}

}  // namespace

std::array<ParameterMetrics, 4> identifiability_metrics(const ParameterVector& mu, const Eigen::Matrix4d& sigma,
                                                        const ParameterVector& p_true, const PriorBox& box) {
  std::array<ParameterMetrics, 4> m{};
  for (std::size_t j = 0; j < 4; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double var = sigma(jj, jj);
    const double sd = std::sqrt(std::max(var, 0.0));
    m[j].ratio_to_true = mu[j] / p_true[j];
    m[j].coefficient_of_variation = sd / mu[j];
    m[j].variance_reduction_ratio = var / box.uniform_variance(j);
    m[j].truth_in_2sigma = std::abs(p_true[j] - mu[j]) <= 2.0 * sd;
  }
  return m;
}

IdentifiabilityReport identifiability_study(const Scenario& scenario, const ParameterVector& p_true,
                                            const IdentifiabilityOptions& opts) {
  if (!scenario.prior.contains(p_true) || !validate_ordering(p_true)) {
    throw ValidationError("p_true must lie inside the prior box and respect the ordering");
  }
  if (opts.replicates < 1) throw ValidationError("replicates >= 1");
  for (double level : opts.noise_levels) {
    if (!(level >= 0.0)) throw ValidationError("noise levels must be >= 0");
  }

  IdentifiabilityReport report;
  report.p_true = p_true;
  report.box = scenario.prior;
  const HeadField truth = solve_steady_heads(scenario, p_true, opts.solver);
  report.hpas_true = compute_hpas(truth, scenario);

  std::vector<ObservationSet> datasets;
  for (std::size_t l = 0; l < opts.noise_levels.size(); ++l) {
    auto sets = generate_synthetic_heads(scenario, p_true, opts.noise_levels[l], derive_seed(opts.seed, {l}),
                                         opts.replicates, opts.solver);
    for (std::size_t r = 0; r < sets.size(); ++r) {
      datasets.push_back(std::move(sets[r]));
      IdentifiabilityCell cell;
      cell.noise_level = opts.noise_levels[l];
      cell.replicate = static_cast<int>(r);
      report.cells.push_back(std::move(cell));
    }
  }

  CalibrationOptions copts = opts.calibration;
  copts.workers = 1;
  copts.keep_trace = false;
  const auto done = parallel_map(datasets.size(), opts.workers, [&](std::size_t i) {
    IdentifiabilityCell cell = report.cells[i];
    const ForwardModel model(scenario, datasets[i].wells, opts.solver);
    try {
      cell.calibration = calibrate(model, datasets[i], opts.sigma_grid, copts);
      cell.calibrated = true;
    } catch (const Error& e) {
      cell.error = std::string("calibration: ") + e.what();
      return cell;
    }
    try {
      const LaplaceResult lr = laplace_posterior(model, datasets[i], cell.calibration.mu_post,
                                                 cell.calibration.sigma_h_hat, opts.step_fraction, opts.covariance);
      cell.posterior = lr.posterior;
      cell.hpas_flat = lr.jacobians.hpas_flat();
      cell.has_posterior = true;
      cell.metrics = identifiability_metrics(cell.posterior.mu, cell.posterior.sigma, p_true, scenario.prior);
    } catch (const Error& e) {
      cell.error = std::string("laplace: ") + e.what();
      cell.posterior.mu = cell.calibration.mu_post;
      cell.posterior.sigma_h_hat = cell.calibration.sigma_h_hat;
    }
    return cell;
  });
  report.cells = done;
  return report;
}

std::string identifiability_report_csv(const IdentifiabilityReport& report) {
  std::string out =
      "noise_level,replicate,parameter,p_true,mu_post,posterior_sd,ratio_to_true,coefficient_of_variation,"
      "variance_reduction_ratio,truth_in_2sigma,sigma_h_hat,sigma_ratio,nll,h_pas,hpas_flat,status\n";
  for (const auto& c : report.cells) {
    const std::string status = c.has_posterior ? "ok" : (c.calibrated ? "no_posterior" : "failed");
    for (std::size_t j = 0; j < 4; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto& m = c.metrics[j];
      const double mu = c.calibrated ? c.calibration.mu_post[j] : kNaN;
      const bool post = c.has_posterior;
      out += format_double(c.noise_level) + "," + std::to_string(c.replicate) + "," + kParameterNames[j] + "," +
             format_double(report.p_true[j]) + "," + format_double(mu) + "," +
             format_double(post ? std::sqrt(c.posterior.sigma(jj, jj)) : kNaN) + "," +
             format_double(c.calibrated ? mu / report.p_true[j] : kNaN) + "," +
             format_double(post ? m.coefficient_of_variation : kNaN) + "," +
             format_double(post ? m.variance_reduction_ratio : kNaN) + "," +
             (post ? (m.truth_in_2sigma ? "1" : "0") : "") + "," +
             format_double(c.calibrated ? c.calibration.sigma_h_hat : kNaN) + "," +
             format_double(c.calibrated && c.noise_level > 0.0 ? c.calibration.sigma_h_hat / c.noise_level : kNaN) +
             "," + format_double(c.calibrated ? c.calibration.nll_at_min : kNaN) + "," +
             format_double(c.calibrated ? c.calibration.h_pas_at_min : kNaN) + "," + (c.hpas_flat ? "1" : "0") +
             "," + status + "\n";
    }
  }
  return out;
}

std::string identifiability_summary_json(const IdentifiabilityReport& report) {
  nlohmann::ordered_json doc;
  doc["p_true"] = report.p_true.as_array();
  doc["h_pas_true"] = report.hpas_true;
  doc["thresholds"] = {{"ratio_band", {0.5, 2.0}},
                       {"variance_reduction_cut", 0.1},
                       {"coefficient_of_variation_cut", 0.5},
                       {"note", "pass/fail thresholds are defined by this tool"}};

  std::vector<double> levels;
  for (const auto& c : report.cells) {
    if (std::find(levels.begin(), levels.end(), c.noise_level) == levels.end()) levels.push_back(c.noise_level);
  }
  std::size_t total_ratio = 0, total_in_band = 0, total_vr = 0, total_vr_below = 0;
  nlohmann::ordered_json per_level = nlohmann::ordered_json::array();
  for (double level : levels) {
    std::vector<double> sigma_hat, sigma_ratio;
    std::size_t n_cells = 0, n_cal = 0, n_post = 0, in_band = 0, vr_below = 0, cov_below = 0;
    for (const auto& c : report.cells) {
      if (c.noise_level != level) continue;
      ++n_cells;
      if (!c.calibrated) continue;
      ++n_cal;
      sigma_hat.push_back(c.calibration.sigma_h_hat);
      if (level > 0.0) sigma_ratio.push_back(c.calibration.sigma_h_hat / level);
      for (std::size_t j = 0; j < 4; ++j) {
        const double ratio = c.calibration.mu_post[j] / report.p_true[j];
        if (ratio >= 0.5 && ratio <= 2.0) ++in_band;
      }
      if (!c.has_posterior) continue;
      ++n_post;
      for (const auto& m : c.metrics) {
        if (m.variance_reduction_ratio < 0.1) ++vr_below;
        if (m.coefficient_of_variation < 0.5) ++cov_below;
      }
    }
    total_ratio += 4 * n_cells;
    total_in_band += in_band;
    total_vr += 4 * n_cells;
    total_vr_below += vr_below;
    nlohmann::ordered_json row;
    row["noise_level"] = level;
    row["cells"] = n_cells;
    row["calibrated"] = n_cal;
    row["with_posterior"] = n_post;
    row["sigma_h_hat"] = stats_json(sigma_hat);
    row["sigma_ratio"] = stats_json(sigma_ratio);
    row["ratios_in_band"] = in_band;
    row["variance_reduction_below_cut"] = vr_below;
    row["cov_below_cut"] = cov_below;
    per_level.push_back(row);
  }
  doc["levels"] = per_level;
  doc["totals"] = {{"parameter_cells", total_ratio},
                   {"ratios_in_band", total_in_band},
                   {"variance_reduction_below_cut", total_vr_below},
                   {"variance_reduction_cells", total_vr}};
  nlohmann::ordered_json failures = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    if (!c.error.empty()) {
      failures.push_back({{"noise_level", c.noise_level}, {"replicate", c.replicate}, {"error", c.error}});
    }
  }
  doc["failures"] = failures;
  return doc.dump(2) + "\n";
}

SamplingResult sample_posterior(const PosteriorGaussian& pg, std::size_t n, std::uint64_t seed,
                                std::size_t max_rejects) {
  pg.validate(true);
  // Sigma = D C D with D the standard deviations; the correlation matrix C
  // is factored by eigen-decomposition so a zero or singular Sigma still
  // yields a valid (degenerate) factor.
  Eigen::Vector4d sd;
  for (int j = 0; j < 4; ++j) sd[j] = std::sqrt(pg.sigma(j, j));
  Eigen::Matrix4d corr = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i != j && sd[i] > 0.0 && sd[j] > 0.0) corr(i, j) = pg.sigma(i, j) / (sd[i] * sd[j]);
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(corr);
  const Eigen::Vector4d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Matrix4d factor = sd.asDiagonal() * es.eigenvectors() * root.asDiagonal();

  SamplingResult out;
  out.draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {i}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > max_rejects) {
        throw SamplingError("posterior sampling: acceptance rate below 1/" + std::to_string(max_rejects) +
                    "; inspect the posterior mean and covariance");
      }
      Eigen::Vector4d z;
      for (int j = 0; j < 4; ++j) z[j] = normal(rng);
      const Eigen::Vector4d x = factor * z;
      ParameterVector p;
      for (std::size_t j = 0; j < 4; ++j) p[j] = pg.mu[j] + x[static_cast<Eigen::Index>(j)];
      if (all_positive(p) && validate_ordering(p)) {
        out.draws.push_back(p);
        break;
      }
      ++out.rejections;
    }
  }
  return out;
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw ValidationError("percentile level must be in [0, 100]");
  const double pos = static_cast<double>(sorted.size() - 1) * q / 100.0;
  const auto k = static_cast<std::size_t>(std::floor(pos));
  if (k + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(k);
  return sorted[k] + frac * (sorted[k + 1] - sorted[k]);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Realization run_realization(const Scenario& scenario, const ParameterVector& p, const ForwardUqOptions& opts) {
  Realization r;
  r.p = p;
  try {
    const HeadField hf = solve_steady_heads(scenario, p, opts.solver);
    if (!hf.converged) throw Error("flow solve did not converge");
    const VelocityField vf = build_velocity_field(hf, scenario, p, opts.tracking);
    const TravelTimeSample sample = travel_time_distribution(vf, release_grid(vf, opts.release_spacing), opts.tracking);
    r.n_released = sample.n_released;
    r.n_zero_excluded = sample.n_zero_excluded;
    r.n_unterminated = sample.n_unterminated;
    r.times = sample.times;
    if (r.times.empty()) throw Error("no particle produced a positive travel time");
    for (double q : opts.levels) r.percentiles.push_back(percentile(r.times, q));
    const auto under = std::lower_bound(r.times.begin(), r.times.end(), opts.threshold_years) - r.times.begin();
    r.percent_under_threshold = 100.0 * static_cast<double>(under) / static_cast<double>(r.times.size());
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
    r.percentiles.assign(opts.levels.size(), kNaN);
    r.percent_under_threshold = kNaN;
  }
  return r;
}

TravelTimeEnsemble forward_uq(const Scenario& scenario, const PosteriorGaussian& pg, const ForwardUqOptions& opts) {
  if (opts.release_spacing < 1) throw ValidationError("release spacing >= 1");
  for (double q : opts.levels) {
    if (!(q > 0.0 && q < 100.0)) throw ValidationError("percentile levels must be in (0, 100)");
  }
  const SamplingResult draws = sample_posterior(pg, opts.n_draws, opts.seed, opts.max_rejects);
  TravelTimeEnsemble ens;
  ens.levels = opts.levels;
  ens.threshold_years = opts.threshold_years;
  ens.rejections = draws.rejections;
  ens.realizations = parallel_map(draws.draws.size(), opts.workers,
                                  [&](std::size_t i) { return run_realization(scenario, draws.draws[i], opts); });
  return ens;
}

EnsembleSummary ensemble_summary(const TravelTimeEnsemble& ens) {
  EnsembleSummary s;
  s.n_requested = ens.realizations.size();
  s.rejections = ens.rejections;
  std::vector<const Realization*> ok;
  for (const auto& r : ens.realizations) {
    if (r.ok) ok.push_back(&r);
  }
  s.n_succeeded = ok.size();
  if (ok.empty()) throw Error("ensemble summary: no successful realization");

  auto summarize = [&](double level, auto value) {
    std::vector<double> v;
    v.reserve(ok.size());
    for (const Realization* r : ok) v.push_back(value(*r));
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return SummaryRow{level, median(v), *lo, *hi};
  };
  for (std::size_t k = 0; k < ens.levels.size(); ++k) {
    s.percentiles.push_back(summarize(ens.levels[k], [k](const Realization& r) { return r.percentiles[k]; }));
  }
  s.under_threshold = summarize(ens.threshold_years, [](const Realization& r) { return r.percent_under_threshold; });
  return s;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0.0)) throw ValidationError("histogram bin width must be > 0");
  std::vector<HistogramBin> bins;
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) return bins;
  const auto [lo, hi] = std::minmax_element(finite.begin(), finite.end());
  const auto k0 = static_cast<long long>(std::floor(*lo / bin_width));
  const auto k1 = static_cast<long long>(std::floor(*hi / bin_width));
  if (k1 - k0 > 1000000) throw ValidationError("histogram would need more than 1e6 bins; increase the bin width");
  for (long long k = k0; k <= k1; ++k) {
    bins.push_back({static_cast<double>(k) * bin_width, static_cast<double>(k + 1) * bin_width, 0});
  }
  for (double v : finite) {
    const auto k = static_cast<long long>(std::floor(v / bin_width));
    ++bins[static_cast<std::size_t>(k - k0)].count;
  }
  return bins;
}

namespace {

std::string level_label(double q) {
  return "p" + format_double(q);
}

}  // namespace

std::string ensemble_percentiles_csv(const TravelTimeEnsemble& ens) {
  std::string out = "realization,k_zone1,k_zone2,k_zone3,r_irrig,status,n_released,n_zero_excluded,n_unterminated,n_times";
  for (double q : ens.levels) out += "," + level_label(q);
  out += ",percent_under_threshold\n";
  for (std::size_t i = 0; i < ens.realizations.size(); ++i) {
    const auto& r = ens.realizations[i];
    out += std::to_string(i);
    for (std::size_t j = 0; j < 4; ++j) out += "," + format_double(r.p[j]);
    out += std::string(",") + (r.ok ? "ok" : "failed") + "," + std::to_string(r.n_released) + "," +
           std::to_string(r.n_zero_excluded) + "," + std::to_string(r.n_unterminated) + "," +
           std::to_string(r.times.size());
    for (double v : r.percentiles) out += "," + format_double(v);
    out += "," + format_double(r.percent_under_threshold) + "\n";
  }
  return out;
}

std::string ensemble_summary_json(const TravelTimeEnsemble& ens, const EnsembleSummary& s) {
  nlohmann::ordered_json doc;
  doc["n_requested"] = s.n_requested;
  doc["n_succeeded"] = s.n_succeeded;
  doc["n_failed"] = s.n_requested - s.n_succeeded;
  doc["rejections"] = s.rejections;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : s.percentiles) {
    rows.push_back({{"percentile", r.level}, {"median", r.median}, {"min", r.min}, {"max", r.max}});
  }
  doc["percentiles"] = rows;
  doc["percent_under_threshold"] = {{"threshold_years", ens.threshold_years},
                                    {"median", s.under_threshold.median},
                                    {"min", s.under_threshold.min},
                                    {"max", s.under_threshold.max}};
  nlohmann::ordered_json failures = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ens.realizations.size(); ++i) {
    if (!ens.realizations[i].ok) failures.push_back({{"realization", i}, {"error", ens.realizations[i].error}});
  }
  doc["failures"] = failures;
  return doc.dump(2) + "\n";
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::string out = "bin_low,bin_high,count\n";
  for (const auto& b : bins) {
    out += format_double(b.low) + "," + format_double(b.high) + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

std::string cdf_long_csv(const TravelTimeEnsemble& ens) {
  std::string out = "realization,time_years,cdf\n";
  for (std::size_t i = 0; i < ens.realizations.size(); ++i) {
    const auto& t = ens.realizations[i].times;
    const auto n = static_cast<double>(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      out += std::to_string(i) + "," + format_double(t[k]) + "," + format_double(static_cast<double>(k + 1) / n) + "\n";
    }
  }
  return out;
}

}  // namespace gwbayes
