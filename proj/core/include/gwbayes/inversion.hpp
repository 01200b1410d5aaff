#pragma once

// Expert-augmented Gaussian likelihood and the composite minimizer that
// produces the posterior mode.
//
//   NLL(p) = SSR(p) / (2 sigma_h^2) + (H_PAS(p) - H*)^2 / (2 sigma_HPAS^2)
//          + nb log sigma_h + log sigma_HPAS + (nb + 1)/2 log(2 pi)
//
// The uniform prior and the evidence constant do not move the argmin and
// are never represented.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gwbayes/flow.hpp"
#include "gwbayes/model.hpp"
#include "gwbayes/nelder_mead.hpp"

namespace gwbayes {

struct ObservationSet {
  WellSet wells;  // every entry carries observed_head
  double h_pas_star = 1.0;   // percent
  double sigma_hpas = 0.33;  // percent

  std::vector<double> observed() const;
  /// Throws ValidationError unless at least one head is observed and sigma_hpas > 0.
  void validate() const;
};

/// Observations taken from a scenario's wells (entries without a head are
/// skipped) and its expert target.
ObservationSet observations_from_scenario(const Scenario& scenario);

struct ForwardResponse {
  std::vector<double> heads;  // at the observation wells
  double hpas = 0.0;
  bool converged = false;
};

/// Memoizing forward model: one steady solve per distinct parameter vector
/// (bitwise key). Safe to share between threads.
class ForwardModel {
 public:
  ForwardModel(const Scenario& scenario, WellSet wells, SolverOptions opts = {});

  std::shared_ptr<const ForwardResponse> evaluate(const ParameterVector& p) const;

  const Scenario& scenario() const noexcept { return scenario_; }
  const WellSet& wells() const noexcept { return wells_; }
  const SolverOptions& options() const noexcept { return opts_; }
  std::size_t solve_count() const;

 private:
  Scenario scenario_;
  WellSet wells_;
  SolverOptions opts_;
  mutable std::mutex mutex_;
  mutable std::map<std::array<std::uint64_t, 4>, std::shared_ptr<const ForwardResponse>> cache_;
  mutable std::size_t solves_ = 0;
};

/// The zero-residual part of the NLL: nb log sigma_h + log sigma_HPAS + (nb+1)/2 log 2pi.
double nll_constant(std::size_t nb_wells, double sigma_h, double sigma_hpas);

double nll_from_residuals(double ssr, double hpas_residual, std::size_t nb_wells, double sigma_h, double sigma_hpas);

double sum_squared_residuals(const std::vector<double>& model, const std::vector<double>& observed);

/// +infinity when `p` is unordered or non-positive or the solve fails.
double nll_joint(const ParameterVector& p, const ObservationSet& obs, double sigma_h, const ForwardModel& model);
double nll_joint(const ParameterVector& p, const ObservationSet& obs, double sigma_h, const Scenario& scenario,
                 const SolverOptions& opts = {});

/// Heads at the wells plus N(0, sigma^2) noise, one fresh stream per replicate
/// derived from (seed, replicate). H* is set to H_PAS(p_true) and sigma_HPAS
/// is taken from the scenario.
std::vector<ObservationSet> generate_synthetic_heads(const Scenario& scenario, const ParameterVector& p_true,
                                                     double sigma, std::uint64_t seed, int replicates,
                                                     const SolverOptions& opts = {});

/// Per-parameter sample counts for the Cartesian scan, in parameter order
/// (k_zone1, k_zone2, k_zone3, r_irrig).
struct ScanSpec {
  std::array<int, 4> counts{15, 4, 15, 20};
  static ScanSpec coarse() { return {{6, 4, 6, 5}}; }
};

/// Log-spaced values including both endpoints; a count of 1 yields the
/// geometric midpoint.
std::vector<double> log_spaced(const Interval& range, int count);

std::size_t scan_grid_raw_count(const ScanSpec& spec);

/// Cartesian product (r_irrig varying fastest) filtered by validate_ordering.
std::vector<ParameterVector> scan_grid(const ScanSpec& spec, const PriorBox& box);

/// Nelder-Mead in log-parameter space. The objective sees linear parameters.
NelderMeadResult minimize_log_space(const std::function<double(const ParameterVector&)>& objective,
                                    const ParameterVector& start, const PriorBox& box,
                                    const NelderMeadOptions& opts = {}, double step_fraction = 0.05);
ParameterVector from_log(const std::vector<double>& x);

/// Twelve log-spaced values in [0.1, 8] m.
std::vector<double> default_sigma_grid();

struct CalibrationOptions {
  ScanSpec scan;
  NelderMeadOptions simplex;
  double simplex_step_fraction = 0.05;
  int n_starts = 3;
  bool refine_sigma = true;   // closed-form sigma_h polish after the sweep
  int max_sigma_refinements = 8;
  int workers = 1;
  bool keep_trace = true;
};

enum class TracePhase { scan, simplex, refine };
std::string to_string(TracePhase phase);

struct TraceEntry {
  TracePhase phase = TracePhase::scan;
  double sigma_h = 0.0;
  ParameterVector p;
  double nll = 0.0;
  double ssr = 0.0;
  double hpas = 0.0;
};

struct CalibrationResult {
  ParameterVector mu_post;
  double sigma_h_hat = 0.0;
  double nll_at_min = 0.0;
  double h_pas_at_min = 0.0;
  double ssr_at_min = 0.0;
  std::size_t raw_candidates = 0;
  std::size_t filtered_candidates = 0;
  std::size_t forward_solves = 0;
  std::vector<TraceEntry> trace;
};

/// Sweep over `sigma_grid`; for each value scan the grid, refine the best
/// `n_starts` candidates with Nelder-Mead and keep the overall minimum.
/// Throws Error when every candidate is infeasible.
CalibrationResult calibrate(const ForwardModel& model, const ObservationSet& obs,
                            const std::vector<double>& sigma_grid, const CalibrationOptions& opts = {});

std::string calibration_to_json(const CalibrationResult& result);
std::string trace_to_csv(const CalibrationResult& result);

}  // namespace gwbayes
