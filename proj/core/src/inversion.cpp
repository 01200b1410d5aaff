#include "gwbayes/inversion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>

#include "gwbayes/error.hpp"
#include "gwbayes/parallel.hpp"
#include "gwbayes/rng.hpp"
#include "gwbayes/text.hpp"

namespace gwbayes {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<double> ObservationSet::observed() const {
  std::vector<double> out;
  out.reserve(wells.size());
  for (const auto& w : wells) out.push_back(w.observed_head.value_or(std::numeric_limits<double>::quiet_NaN()));
  return out;
}

void ObservationSet::validate() const {
  if (wells.empty()) throw ValidationError("observation set needs at least one observed head");
  for (const auto& w : wells) {
    if (!w.observed_head || !std::isfinite(*w.observed_head)) {
      throw ValidationError("well '" + w.id + "' has no observed head");
    }
  }
  if (!(sigma_hpas > 0.0)) throw ValidationError("sigma_hpas > 0");
}

ObservationSet observations_from_scenario(const Scenario& s) {
  ObservationSet obs;
  for (const auto& w : s.wells) {
    if (w.observed_head) obs.wells.push_back(w);
  }
  obs.h_pas_star = s.expert.h_pas_star;
  obs.sigma_hpas = s.expert.sigma_hpas;
  return obs;
}

ForwardModel::ForwardModel(const Scenario& scenario, WellSet wells, SolverOptions opts)
    : scenario_(scenario), wells_(std::move(wells)), opts_(opts) {
  opts_.validate();
}

std::shared_ptr<const ForwardResponse> ForwardModel::evaluate(const ParameterVector& p) const {
  std::array<std::uint64_t, 4> key{};
  for (std::size_t j = 0; j < 4; ++j) key[j] = std::bit_cast<std::uint64_t>(p[j]);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto r = std::make_shared<ForwardResponse>();
  if (all_positive(p)) {
    try {
      const HeadField hf = solve_steady_heads(scenario_, p, opts_);
      r->converged = hf.converged;
      if (hf.converged) {
        r->heads = sample_wells(hf, scenario_, wells_);
        r->hpas = compute_hpas(hf, scenario_);
      }
    } catch (const SingularSystemError&) {
      r->converged = false;
    }
  }
  std::lock_guard lock(mutex_);
  ++solves_;
  auto [it, inserted] = cache_.emplace(key, std::move(r));
  return it->second;
}

std::size_t ForwardModel::solve_count() const {
  std::lock_guard lock(mutex_);
  return solves_;
}

double nll_constant(std::size_t nb, double sigma_h, double sigma_hpas) {
  const double n = static_cast<double>(nb);
  return n * std::log(sigma_h) + std::log(sigma_hpas) + 0.5 * (n + 1.0) * std::log(2.0 * std::numbers::pi);
}

double nll_from_residuals(double ssr, double hpas_residual, std::size_t nb, double sigma_h, double sigma_hpas) {
  return ssr / (2.0 * sigma_h * sigma_h) + hpas_residual * hpas_residual / (2.0 * sigma_hpas * sigma_hpas) +
         nll_constant(nb, sigma_h, sigma_hpas);
}

double sum_squared_residuals(const std::vector<double>& model, const std::vector<double>& observed) {
  double ssr = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double r = model[i] - observed[i];
    ssr += r * r;
  }
  return ssr;
}

double nll_joint(const ParameterVector& p, const ObservationSet& obs, double sigma_h, const ForwardModel& model) {
  if (!(sigma_h > 0.0)) throw ValidationError("sigma_h > 0");
  if (!all_positive(p) || !validate_ordering(p)) return kInf;
  const auto r = model.evaluate(p);
  if (!r->converged) return kInf;
  const double ssr = sum_squared_residuals(r->heads, obs.observed());
  return nll_from_residuals(ssr, r->hpas - obs.h_pas_star, obs.wells.size(), sigma_h, obs.sigma_hpas);
}

double nll_joint(const ParameterVector& p, const ObservationSet& obs, double sigma_h, const Scenario& scenario,
                 const SolverOptions& opts) {
  const ForwardModel model(scenario, obs.wells, opts);
  return nll_joint(p, obs, sigma_h, model);
}

std::vector<ObservationSet> generate_synthetic_heads(const Scenario& scenario, const ParameterVector& p_true,
                                                     double sigma, std::uint64_t seed, int replicates,
                                                     const SolverOptions& opts) {
  if (!(sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  const HeadField hf = solve_steady_heads(scenario, p_true, opts);
  if (!hf.converged) throw Error("forward solve at p_true did not converge");
  const auto heads = sample_wells(hf, scenario, scenario.wells);
  const double hpas = compute_hpas(hf, scenario);

  std::vector<ObservationSet> out;
  out.reserve(static_cast<std::size_t>(std::max(replicates, 0)));
  for (int rep = 0; rep < replicates; ++rep) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(rep)}));
    std::normal_distribution<double> noise(0.0, 1.0);
    ObservationSet obs;
    obs.wells = scenario.wells;
    for (std::size_t i = 0; i < heads.size(); ++i) obs.wells[i].observed_head = heads[i] + sigma * noise(rng);
    obs.h_pas_star = hpas;
    obs.sigma_hpas = scenario.expert.sigma_hpas;
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<double> log_spaced(const Interval& range, int count) {
  if (count < 1) throw ValidationError("scan counts must be >= 1");
  if (!(range.low > 0.0 && range.high >= range.low)) throw ValidationError("log spacing needs 0 < low <= high");
  if (count == 1) return {std::sqrt(range.low * range.high)};
  std::vector<double> v(static_cast<std::size_t>(count));
  const double a = std::log(range.low);
  const double b = std::log(range.high);
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
  v.front() = range.low;
  v.back() = range.high;
  return v;
}

std::size_t scan_grid_raw_count(const ScanSpec& spec) {
  std::size_t n = 1;
  for (int c : spec.counts) n *= static_cast<std::size_t>(std::max(c, 0));
  return n;
}

std::vector<ParameterVector> scan_grid(const ScanSpec& spec, const PriorBox& box) {
  std::array<std::vector<double>, 4> axes;
  for (std::size_t j = 0; j < 4; ++j) axes[j] = log_spaced(box.bounds[j], spec.counts[j]);
  std::vector<ParameterVector> out;
  for (double k1 : axes[0]) {
    for (double k2 : axes[1]) {
      for (double k3 : axes[2]) {
        for (double r : axes[3]) {
          const ParameterVector p{k1, k2, k3, r};
          if (validate_ordering(p)) out.push_back(p);
        }
      }
    }
  }
  return out;
}

ParameterVector from_log(const std::vector<double>& x) {
  return {std::exp(x[0]), std::exp(x[1]), std::exp(x[2]), std::exp(x[3])};
}

NelderMeadResult minimize_log_space(const std::function<double(const ParameterVector&)>& objective,
                                    const ParameterVector& start, const PriorBox& box,
                                    const NelderMeadOptions& opts, double step_fraction) {
  std::vector<double> x0(4), steps(4);
  for (std::size_t j = 0; j < 4; ++j) {
    x0[j] = std::log(start[j]);
    steps[j] = step_fraction * std::log(box.bounds[j].high / box.bounds[j].low);
  }
  return nelder_mead_minimize([&](const std::vector<double>& x) { return objective(from_log(x)); }, x0, steps, opts);
}

std::vector<double> default_sigma_grid() {
  return log_spaced(Interval{0.1, 8.0}, 12);
}

std::string to_string(TracePhase phase) {
  switch (phase) {
    case TracePhase::scan: return "scan";
    case TracePhase::simplex: return "simplex";
    case TracePhase::refine: return "refine";
  }
  return "unknown";
}

namespace {

struct Evaluated {
  double nll = kInf;
  double ssr = kInf;
  double hpas = 0.0;
};

class Tracker {
 public:
  Tracker(bool keep, std::vector<TraceEntry>& trace) : keep_(keep), trace_(trace) {}

  void record(TracePhase phase, double sigma, const ParameterVector& p, const Evaluated& e) {
    if (keep_) trace_.push_back({phase, sigma, p, e.nll, e.ssr, e.hpas});
    if (e.nll < best.nll) {
      best = {phase, sigma, p, e.nll, e.ssr, e.hpas};
    }
  }

  TraceEntry best{TracePhase::scan, 0.0, {}, kInf, kInf, 0.0};

 private:
  bool keep_;
  std::vector<TraceEntry>& trace_;
};

}  // namespace

CalibrationResult calibrate(const ForwardModel& model, const ObservationSet& obs,
                            const std::vector<double>& sigma_grid, const CalibrationOptions& opts) {
  obs.validate();
  if (sigma_grid.empty()) throw ValidationError("sigma grid must not be empty");
  for (double s : sigma_grid) {
    if (!(s > 0.0)) throw ValidationError("sigma grid values must be > 0");
  }
  const auto& box = model.scenario().prior;
  const std::vector<double> observed = obs.observed();
  const std::size_t nb = observed.size();
  const std::size_t solves_before = model.solve_count();

  CalibrationResult result;
  result.raw_candidates = scan_grid_raw_count(opts.scan);
  const std::vector<ParameterVector> grid = scan_grid(opts.scan, box);
  result.filtered_candidates = grid.size();

  auto evaluate = [&](ParameterVector& p, double sigma) {
    Evaluated e;
    // exp(log(x)) may land an ulp outside the box at its edges; such points
    // are pulled back in, anything further out is infeasible.
    for (std::size_t j = 0; j < 4; ++j) {
      const auto& b = box.bounds[j];
      if (p[j] < b.low * (1.0 - 1e-12) || p[j] > b.high * (1.0 + 1e-12)) return e;
      p[j] = std::clamp(p[j], b.low, b.high);
    }
    if (!all_positive(p) || !validate_ordering(p)) return e;
    const auto r = model.evaluate(p);
    if (!r->converged) return e;
    e.ssr = sum_squared_residuals(r->heads, observed);
    e.hpas = r->hpas;
    e.nll = nll_from_residuals(e.ssr, r->hpas - obs.h_pas_star, nb, sigma, obs.sigma_hpas);
    return e;
  };

  const auto responses =
      parallel_map(grid.size(), opts.workers, [&](std::size_t i) { return model.evaluate(grid[i]); });

  Tracker tracker(opts.keep_trace, result.trace);
  auto refine_from = [&](const ParameterVector& start, double sigma, TracePhase phase) {
    auto objective = [&](ParameterVector p) {
      const Evaluated e = evaluate(p, sigma);
      tracker.record(phase, sigma, p, e);
      return e.nll;
    };
    minimize_log_space(objective, start, box, opts.simplex, opts.simplex_step_fraction);
  };

  // Scores every scan candidate at `sigma` (cached solves, no new work) and
  // returns the feasible ones ranked by NLL.
  auto score_scan = [&](double sigma) {
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Evaluated e;
      if (responses[i]->converged) {
        e.ssr = sum_squared_residuals(responses[i]->heads, observed);
        e.hpas = responses[i]->hpas;
        e.nll = nll_from_residuals(e.ssr, e.hpas - obs.h_pas_star, nb, sigma, obs.sigma_hpas);
      }
      tracker.record(TracePhase::scan, sigma, grid[i], e);
      if (std::isfinite(e.nll)) ranked.emplace_back(e.nll, i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    return ranked;
  };

  for (double sigma : sigma_grid) {
    const auto ranked = score_scan(sigma);
    const auto starts = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(opts.n_starts, 0)));
    for (std::size_t k = 0; k < starts; ++k) refine_from(grid[ranked[k].second], sigma, TracePhase::simplex);
  }
  if (!std::isfinite(tracker.best.nll)) throw Error("calibration failed: every candidate is infeasible");

  if (opts.refine_sigma) {
    // For fixed p the NLL is minimized by sigma_h = sqrt(SSR / nb); alternate
    // that closed form with a simplex pass until sigma_h settles.
    const auto [lo, hi] = std::minmax_element(sigma_grid.begin(), sigma_grid.end());
    for (int round = 0; round < opts.max_sigma_refinements; ++round) {
      const TraceEntry best = tracker.best;
      const double sigma = std::clamp(std::sqrt(best.ssr / static_cast<double>(nb)), *lo, *hi);
      if (std::abs(sigma - best.sigma_h) <= 1e-9 * best.sigma_h) break;
      score_scan(sigma);
      ParameterVector p = best.p;
      const Evaluated e = evaluate(p, sigma);
      tracker.record(TracePhase::refine, sigma, p, e);
      refine_from(best.p, sigma, TracePhase::refine);
    }
  }

  const TraceEntry& best = tracker.best;
  result.mu_post = best.p;
  result.sigma_h_hat = best.sigma_h;
  result.nll_at_min = best.nll;
  result.h_pas_at_min = best.hpas;
  result.ssr_at_min = best.ssr;
  result.forward_solves = model.solve_count() - solves_before;
  return result;
}

std::string calibration_to_json(const CalibrationResult& r) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json mu;
  for (std::size_t j = 0; j < 4; ++j) mu[kParameterNames[j]] = r.mu_post[j];
  doc["mu_post"] = mu;
  doc["sigma_h_hat"] = r.sigma_h_hat;
  doc["nll"] = r.nll_at_min;
  doc["h_pas"] = r.h_pas_at_min;
  doc["ssr"] = r.ssr_at_min;
  doc["raw_candidates"] = r.raw_candidates;
  doc["filtered_candidates"] = r.filtered_candidates;
  doc["forward_solves"] = r.forward_solves;
  return doc.dump(2) + "\n";
}

std::string trace_to_csv(const CalibrationResult& r) {
  std::string out = "index,phase,sigma_h,k_zone1,k_zone2,k_zone3,r_irrig,nll,ssr,h_pas\n";
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& t = r.trace[i];
    out += std::to_string(i) + "," + to_string(t.phase) + "," + format_double(t.sigma_h);
    for (std::size_t j = 0; j < 4; ++j) out += "," + format_double(t.p[j]);
    out += "," + format_double(t.nll) + "," + format_double(t.ssr) + "," + format_double(t.hpas) + "\n";
  }
  return out;
}

}  // namespace gwbayes
