#include "gwbayes/cli/app.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>

#include "gwbayes/cli/campaign.hpp"
#include "gwbayes/cli/run_io.hpp"
#include "gwbayes/error.hpp"
#include "gwbayes/flow.hpp"
#include "gwbayes/inversion.hpp"
#include "gwbayes/laplace.hpp"
#include "gwbayes/parallel.hpp"
#include "gwbayes/rng.hpp"
#include "gwbayes/scenario_io.hpp"
#include "gwbayes/synthetic_valley.hpp"
#include "gwbayes/text.hpp"
#include "gwbayes/tracking.hpp"
#include "gwbayes/uq.hpp"

namespace gwbayes::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
  std::string solver_mode;  // empty: keep the scenario's choice
};

// State shared between a command and the manifest writer in run().
struct Context {
  RunManifest manifest;
  fs::path out_dir;
  bool ready = false;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  void begin(const std::string& command, const Common& c) {
    manifest.command = command;
    manifest.seed = c.seed;
    manifest.workers = c.workers;
    out_dir = c.out_dir;
    fs::create_directories(out_dir);
    ready = true;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Master seed; all randomness derives from it")->capture_default_str();
  sub->add_option("--workers", c.workers, "Worker threads (default from GWBAYES_WORKERS)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--solver-mode", c.solver_mode, "confined_linear or unconfined_picard (overrides the scenario)")
      ->check(CLI::IsMember({"confined_linear", "unconfined_picard"}));
}

ScenarioFile load_scenario_for(Context& ctx, const std::string& path, const Common& c) {
  ScenarioFile sf = load_scenario_file(path);
  if (!c.solver_mode.empty()) sf.solver.mode = solver_mode_from_string(c.solver_mode);
  ctx.manifest.add_input(path, sf.text);
  ctx.manifest.config["solver"] = solver_to_json(sf.solver);
  return sf;
}

nlohmann::ordered_json params_json(const ParameterVector& p) {
  nlohmann::ordered_json j;
  for (std::size_t k = 0; k < 4; ++k) j[kParameterNames[k]] = p[k];
  return j;
}

ParameterVector params_or_base(const std::string& text) {
  return text.empty() ? ParameterVector::base_case() : parse_parameters(text);
}

// ------------------------------------------------------------------ solve

struct SolveArgs {
  std::string scenario;
  std::string params;
};

int cmd_solve(Context& ctx, const Common& c, const SolveArgs& a) {
  ctx.begin("solve", c);
  const ScenarioFile sf = load_scenario_for(ctx, a.scenario, c);
  const ParameterVector p = params_or_base(a.params);
  ctx.manifest.config["params"] = params_json(p);

  const HeadField hf = solve_steady_heads(sf.scenario, p, sf.solver);
  ctx.manifest.counters["solves"] = 1;
  const Grid& g = sf.scenario.grid;

  std::string heads = "layer,row,col,head_m\n";
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    if (!g.is_active(i)) continue;
    const CellIndex ci = g.cell(i);
    heads += std::to_string(ci.layer) + "," + std::to_string(ci.row) + "," + std::to_string(ci.col) + "," +
             format_double(hf.head[i]) + "\n";
  }
  emit(ctx.out_dir, "heads.csv", heads, ctx.manifest);

  const auto well_heads = sample_wells(hf, sf.scenario, sf.scenario.wells);
  std::string wells = "well_id,layer,row,col,head_m,observed_head_m,residual_m\n";
  for (std::size_t k = 0; k < well_heads.size(); ++k) {
    const Well& w = sf.scenario.wells[k];
    wells += w.id + "," + std::to_string(w.cell.layer) + "," + std::to_string(w.cell.row) + "," +
             std::to_string(w.cell.col) + "," + format_double(well_heads[k]) + "," +
             (w.observed_head ? format_double(*w.observed_head) + "," + format_double(well_heads[k] - *w.observed_head)
                              : std::string(",")) +
             "\n";
  }
  emit(ctx.out_dir, "well_heads.csv", wells, ctx.manifest);

  const FluxBudget b = flux_budget(hf, sf.scenario, p);
  nlohmann::ordered_json doc;
  doc["converged"] = hf.converged;
  doc["iterations"] = hf.iterations;
  doc["residual_norm"] = hf.residual_norm;
  doc["max_head_change"] = hf.max_head_change;
  doc["solver_mode"] = to_string(hf.mode);
  doc["h_pas"] = compute_hpas(hf, sf.scenario);
  doc["budget"] = {{"chd_net", b.chd_net},
                   {"chd_in", b.chd_in},
                   {"chd_out", b.chd_out},
                   {"ghb_net", b.ghb_net},
                   {"ghb_in", b.ghb_in},
                   {"ghb_out", b.ghb_out},
                   {"drn_out", b.drn_out},
                   {"rch_in", b.rch_in},
                   {"imbalance", b.imbalance},
                   {"relative_imbalance", b.scale() > 0.0 ? std::abs(b.imbalance) / b.scale() : 0.0}};
  emit(ctx.out_dir, "budget.json", doc.dump(2) + "\n", ctx.manifest);
  if (!hf.converged) {
    ctx.manifest.message = "flow solve did not converge";
    *ctx.err << "error: flow solve did not converge after " << hf.iterations << " iterations\n";
    return kExitNotConverged;
  }
  *ctx.out << "solved " << g.n_cells() << " cells, H_PAS " << format_double(doc["h_pas"].get<double>()) << " %\n";
  return kExitOk;
}

// ------------------------------------------------------------------ track

struct TrackArgs {
  std::string scenario;
  std::string params;
  int spacing = 5;
  double max_time_years = 10000.0;
  std::string weak_sinks = "pass_through";
};

int cmd_track(Context& ctx, const Common& c, const TrackArgs& a) {
  ctx.begin("track", c);
  const ScenarioFile sf = load_scenario_for(ctx, a.scenario, c);
  const ParameterVector p = params_or_base(a.params);
  TrackingOptions to;
  to.max_time_years = a.max_time_years;
  to.weak_sinks = a.weak_sinks == "stop" ? WeakSinkPolicy::stop : WeakSinkPolicy::pass_through;
  ctx.manifest.config["params"] = params_json(p);
  ctx.manifest.config["spacing"] = a.spacing;
  ctx.manifest.config["max_time_years"] = a.max_time_years;
  ctx.manifest.config["weak_sinks"] = a.weak_sinks;

  const HeadField hf = solve_steady_heads(sf.scenario, p, sf.solver);
  ctx.manifest.counters["solves"] = 1;
  if (!hf.converged) {
    ctx.manifest.message = "flow solve did not converge";
    *ctx.err << "error: flow solve did not converge\n";
    return kExitNotConverged;
  }
  const VelocityField vf = build_velocity_field(hf, sf.scenario, p, to);
  const auto starts = release_grid(vf, a.spacing);
  const TravelTimeSample sample = travel_time_distribution(vf, starts, to);
  ctx.manifest.counters["tracked_particles"] = sample.n_released;
  emit(ctx.out_dir, "travel_times.csv", travel_times_to_csv(sample), ctx.manifest);

  nlohmann::ordered_json doc;
  doc["n_released"] = sample.n_released;
  doc["n_zero_excluded"] = sample.n_zero_excluded;
  doc["n_unterminated"] = sample.n_unterminated;
  doc["n_times"] = sample.times.size();
  nlohmann::ordered_json pct;
  if (!sample.times.empty()) {
    for (double q : {25.0, 50.0, 75.0, 90.0, 99.0}) pct["p" + format_double(q)] = percentile(sample.times, q);
  }
  doc["percentiles_years"] = pct;
  emit(ctx.out_dir, "tracking_summary.json", doc.dump(2) + "\n", ctx.manifest);
  if (sample.times.empty()) *ctx.err << "warning: no particle produced a positive travel time\n";
  *ctx.out << "tracked " << sample.n_released << " particles, " << sample.times.size() << " travel times\n";
  return kExitOk;
}

// -------------------------------------------------------- make-synthetic

struct SyntheticArgs {
  std::string scenario;
  std::string params;
  double sigma = 0.0;
  int replicates = 1;
};

int cmd_make_synthetic(Context& ctx, const Common& c, const SyntheticArgs& a) {
  ctx.begin("make-synthetic", c);
  const ScenarioFile sf = load_scenario_for(ctx, a.scenario, c);
  const ParameterVector p = params_or_base(a.params);
  ctx.manifest.config["p_true"] = params_json(p);
  ctx.manifest.config["sigma"] = a.sigma;
  ctx.manifest.config["replicates"] = a.replicates;
  if (a.replicates < 1) throw ValidationError("replicates >= 1");

  const auto sets = generate_synthetic_heads(sf.scenario, p, a.sigma, c.seed, a.replicates, sf.solver);
  ctx.manifest.counters["solves"] = 1;
  for (std::size_t r = 0; r < sets.size(); ++r) {
    const std::string tag = "_r" + std::to_string(r);
    emit(ctx.out_dir, "observations" + tag + ".csv", wells_to_csv(sets[r].wells), ctx.manifest);
    Scenario s = sf.scenario;
    s.name = sf.scenario.name + "_synthetic" + tag;
    s.wells = sets[r].wells;
    s.expert.h_pas_star = sets[r].h_pas_star;
    emit(ctx.out_dir, "synthetic" + tag + ".json", scenario_file_json(s, sf.solver), ctx.manifest);
  }
  nlohmann::ordered_json truth;
  truth["p_true"] = params_json(p);
  truth["h_pas_true"] = sets.front().h_pas_star;
  truth["sigma"] = a.sigma;
  truth["replicates"] = a.replicates;
  emit(ctx.out_dir, "truth.json", truth.dump(2) + "\n", ctx.manifest);
  *ctx.out << "wrote " << sets.size() << " synthetic data set(s)\n";
  return kExitOk;
}

// -------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string scenario;
  std::string observations;
  std::optional<double> h_pas_star;
  std::optional<double> sigma_hpas;
  std::string scan;
  bool coarse = false;
  std::string sigma_grid;
  int n_starts = 3;
  bool no_trace = false;
  bool no_laplace = false;
  double step_fraction = 2e-4;
  std::string step_sweep;
  double ridge = 0.0;
};

std::vector<double> resolve_sigma_grid(const std::string& text) {
  if (text.empty()) return default_sigma_grid();
  auto v = parse_double_list(text);
  if (v.empty()) throw ValidationError("sigma grid must not be empty");
  return v;
}

ScanSpec resolve_scan(const std::string& text, bool coarse) {
  if (!text.empty()) {
    const auto v = parse_double_list(text);
    if (v.size() != 4) throw ParseError("--scan needs 4 counts");
    ScanSpec s;
    for (std::size_t j = 0; j < 4; ++j) s.counts[j] = static_cast<int>(v[j]);
    return s;
  }
  return coarse ? ScanSpec::coarse() : ScanSpec{};
}

int cmd_calibrate(Context& ctx, const Common& c, const CalibrateArgs& a) {
  ctx.begin("calibrate", c);
  ScenarioFile sf = load_scenario_for(ctx, a.scenario, c);
  if (!a.observations.empty()) {
    const std::string text = read_text_file(a.observations);
    ctx.manifest.add_input(a.observations, text);
    sf.scenario.wells = parse_wells_csv(text);
  }
  ObservationSet obs = observations_from_scenario(sf.scenario);
  if (a.h_pas_star) obs.h_pas_star = *a.h_pas_star;
  if (a.sigma_hpas) obs.sigma_hpas = *a.sigma_hpas;
  obs.validate();

  CalibrationOptions co;
  co.scan = resolve_scan(a.scan, a.coarse);
  co.n_starts = a.n_starts;
  co.workers = c.workers;
  co.keep_trace = !a.no_trace;
  const auto sigma_grid = resolve_sigma_grid(a.sigma_grid);
  auto& cfg = ctx.manifest.config;
  cfg["h_pas_star"] = obs.h_pas_star;
  cfg["sigma_hpas"] = obs.sigma_hpas;
  cfg["scan"] = co.scan.counts;
  cfg["sigma_grid"] = sigma_grid;
  cfg["n_starts"] = co.n_starts;
  cfg["trace"] = co.keep_trace;
  cfg["laplace"] = !a.no_laplace;
  cfg["step_fraction"] = a.step_fraction;
  cfg["step_sweep"] = a.step_sweep;
  cfg["ridge"] = a.ridge;

  const ForwardModel model(sf.scenario, obs.wells, sf.solver);
  const CalibrationResult res = calibrate(model, obs, sigma_grid, co);
  emit(ctx.out_dir, "calibration.json", calibration_to_json(res), ctx.manifest);
  if (co.keep_trace) emit(ctx.out_dir, "trace.csv", trace_to_csv(res), ctx.manifest);
  *ctx.out << "sigma_h_hat " << format_double(res.sigma_h_hat) << " m, nll " << format_double(res.nll_at_min) << "\n";

  int code = kExitOk;
  if (!a.no_laplace) {
    CovarianceOptions cov;
    cov.ridge = a.ridge;
    try {
      const LaplaceResult lr =
          laplace_posterior(model, obs, res.mu_post, res.sigma_h_hat, a.step_fraction, cov, c.workers);
      emit(ctx.out_dir, "posterior.json", posterior_to_json(lr.posterior), ctx.manifest);
      std::string jac = "row";
      for (const char* n : kParameterNames) jac += std::string(",") + n;
      jac += "\n";
      for (Eigen::Index i = 0; i < lr.jacobians.j_h.rows(); ++i) {
        jac += obs.wells[static_cast<std::size_t>(i)].id;
        for (Eigen::Index j = 0; j < 4; ++j) jac += "," + format_double(lr.jacobians.j_h(i, j));
        jac += "\n";
      }
      jac += "h_pas";
      for (Eigen::Index j = 0; j < 4; ++j) jac += "," + format_double(lr.jacobians.j_hpas[j]);
      jac += "\n";
      emit(ctx.out_dir, "jacobian.csv", jac, ctx.manifest);
      if (lr.jacobians.hpas_flat()) *ctx.err << "note: H_PAS is flat at mu_post; it adds no curvature\n";
      for (std::size_t j = 0; j < 4; ++j) {
        if (lr.jacobians.probe_unordered[j]) {
          *ctx.err << "note: the " << kParameterNames[j] << " probe crosses the ordering constraint\n";
        }
      }
    } catch (const HessianError& e) {
      ctx.manifest.message = e.what();
      *ctx.err << "error: " << e.what() << "\n";
      code = kExitHessian;
    }
    if (!a.step_sweep.empty()) {
      // Convergence study over the finite-difference step.
      std::string sweep = "step_fraction,status";
      for (const char* n : kParameterNames) sweep += std::string(",sd_") + n;
      sweep += "\n";
      for (double f : parse_double_list(a.step_sweep)) {
        sweep += format_double(f);
        try {
          const LaplaceResult lr = laplace_posterior(model, obs, res.mu_post, res.sigma_h_hat, f, cov, c.workers);
          sweep += ",ok";
          for (int j = 0; j < 4; ++j) sweep += "," + format_double(std::sqrt(lr.posterior.sigma(j, j)));
        } catch (const Error&) {
          sweep += ",failed,,,,";
        }
        sweep += "\n";
      }
      emit(ctx.out_dir, "step_sweep.csv", sweep, ctx.manifest);
    }
  }
  ctx.manifest.counters["solves"] = model.solve_count();
  return code;
}

// --------------------------------------------------------------- identify

struct IdentifyArgs {
  std::string scenario;
  std::string params;
  std::string levels;
  int replicates = 5;
  std::string scan;
  bool coarse = false;
  std::string sigma_grid;
  double step_fraction = 2e-4;
};

int cmd_identify(Context& ctx, const Common& c, const IdentifyArgs& a) {
  ctx.begin("identify", c);
  const ScenarioFile sf = load_scenario_for(ctx, a.scenario, c);
  IdentifiabilityOptions io;
  if (!a.levels.empty()) io.noise_levels = parse_double_list(a.levels);
  io.replicates = a.replicates;
  io.seed = identify_seed(c.seed);
  io.sigma_grid = resolve_sigma_grid(a.sigma_grid);
  io.calibration.scan = resolve_scan(a.scan, a.coarse);
  io.solver = sf.solver;
  io.step_fraction = a.step_fraction;
  io.workers = c.workers;
  const ParameterVector p_true = params_or_base(a.params);
  auto& cfg = ctx.manifest.config;
  cfg["p_true"] = params_json(p_true);
  cfg["noise_levels"] = io.noise_levels;
  cfg["replicates"] = io.replicates;
  cfg["sigma_grid"] = io.sigma_grid;
  cfg["scan"] = io.calibration.scan.counts;
  cfg["step_fraction"] = io.step_fraction;

  const IdentifiabilityReport report = identifiability_study(sf.scenario, p_true, io);
  write_identify_outputs(report, ctx.out_dir, ctx.manifest);
  std::uint64_t solves = 0;
  for (const auto& cell : report.cells) solves += cell.calibration.forward_solves;
  ctx.manifest.counters["solves"] = solves;
  ctx.manifest.counters["inversions"] = report.cells.size();
  *ctx.out << "identifiability study: " << report.cells.size() << " inversions\n";
  return kExitOk;
}

// --------------------------------------------------------------------- uq

struct UqArgs {
  std::string scenario;
  std::string posterior;
  UqSettings settings;
  double max_time_years = 10000.0;
};

int cmd_uq(Context& ctx, const Common& c, const UqArgs& a) {
  ctx.begin("uq", c);
  const ScenarioFile sf = load_scenario_for(ctx, a.scenario, c);
  const std::string ptext = read_text_file(a.posterior);
  ctx.manifest.add_input(a.posterior, ptext);
  const PosteriorGaussian pg = posterior_from_json(ptext);

  ForwardUqOptions fo;
  fo.n_draws = a.settings.n_draws;
  fo.release_spacing = a.settings.release_spacing;
  fo.seed = uq_seed(c.seed, 0);
  fo.max_rejects = a.settings.max_rejects;
  fo.threshold_years = a.settings.threshold_years;
  fo.solver = sf.solver;
  fo.tracking.max_time_years = a.max_time_years;
  fo.workers = c.workers;
  auto& cfg = ctx.manifest.config;
  cfg["n_draws"] = fo.n_draws;
  cfg["release_spacing"] = fo.release_spacing;
  cfg["max_rejects"] = fo.max_rejects;
  cfg["threshold_years"] = fo.threshold_years;
  cfg["max_time_years"] = a.max_time_years;
  cfg["p50_bin_width"] = a.settings.p50_bin_width;
  cfg["under_threshold_bin_width"] = a.settings.under_threshold_bin_width;

  const TravelTimeEnsemble ens = forward_uq(sf.scenario, pg, fo);
  std::uint64_t tracked = 0;
  for (const auto& r : ens.realizations) tracked += r.n_released;
  ctx.manifest.counters["solves"] = ens.realizations.size();
  ctx.manifest.counters["tracked_particles"] = tracked;
  ctx.manifest.counters["rejections"] = ens.rejections;
  const EnsembleSummary summary = ensemble_summary(ens);
  write_uq_outputs(ens, summary, a.settings, ctx.out_dir, ctx.manifest);
  *ctx.out << "ensemble: " << summary.n_succeeded << "/" << summary.n_requested << " realizations\n";
  return kExitOk;
}

// --------------------------------------------------------------- campaign

int cmd_campaign(Context& ctx, const Common& c, const std::string& config_path) {
  ctx.begin("campaign", c);
  const std::string text = read_text_file(config_path);
  ctx.manifest.add_input(config_path, text);
  const CampaignConfig cfg = parse_campaign_config(text, fs::path(config_path).parent_path());
  ScenarioFile sf = load_scenario_for(ctx, cfg.scenario_path.string(), c);
  ctx.manifest.seed = cfg.seed;
  ctx.manifest.config["campaign"] = campaign_config_json(cfg);

  const CampaignOutcome outcome = run_campaign(cfg, sf, c.workers);
  write_identify_outputs(outcome.report, ctx.out_dir, ctx.manifest);
  std::uint64_t solves = 0, tracked = 0, rejections = 0;
  for (const auto& cell : outcome.report.cells) solves += cell.calibration.forward_solves;
  for (const auto& le : outcome.ensembles) {
    if (!le.ok) {
      *ctx.err << "warning: uq at noise level " << format_double(le.noise_level) << ": " << le.error << "\n";
      continue;
    }
    write_uq_outputs(le.ensemble, le.summary, cfg.uq, ctx.out_dir, ctx.manifest,
                     "uq_L" + format_double(le.noise_level) + "/");
    solves += le.ensemble.realizations.size();
    rejections += le.ensemble.rejections;
    for (const auto& r : le.ensemble.realizations) tracked += r.n_released;
  }
  ctx.manifest.counters["solves"] = solves;
  ctx.manifest.counters["tracked_particles"] = tracked;
  ctx.manifest.counters["rejections"] = rejections;
  *ctx.out << "campaign finished: " << outcome.report.cells.size() << " inversions\n";
  return kExitOk;
}

// -------------------------------------------------------- generate-valley

int cmd_generate_valley(Context& ctx, const Common& c, const ValleySpec& spec, const std::string& name) {
  ctx.begin("generate-valley", c);
  ValleySpec vs = spec;
  vs.seed = c.seed;
  SolverOptions so;
  so.mode = c.solver_mode.empty() ? SolverMode::confined_linear : solver_mode_from_string(c.solver_mode);
  auto& cfg = ctx.manifest.config;
  cfg["n_rows"] = vs.n_rows;
  cfg["n_cols"] = vs.n_cols;
  cfg["n_layers"] = vs.n_layers;
  cfg["cell_size"] = vs.cell_size;
  cfg["n_wells"] = vs.n_wells;
  cfg["solver"] = solver_to_json(so);
  Scenario s = generate_synthetic_valley(vs);
  s.name = name;
  emit(ctx.out_dir, name + ".json", scenario_file_json(s, so), ctx.manifest);
  *ctx.out << "generated " << s.grid.n_cells() << " cells, " << s.bc.chd.size() << " CHD, " << s.bc.ghb.size()
           << " GHB, " << s.bc.drn.size() << " DRN, " << s.wells.size() << " wells\n";
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return kExitParse;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const SingularSystemError*>(&e)) return kExitSingular;
  if (dynamic_cast<const HessianError*>(&e)) return kExitHessian;
  if (dynamic_cast<const SamplingError*>(&e)) return kExitSampling;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
  if (dynamic_cast<const Error*>(&e)) return kExitError;
  return kExitInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Groundwater flow calibration and uncertainty quantification", "gwbayes"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  Common common;
  common.workers = default_worker_count();
  std::function<int(Context&)> action;

  SolveArgs solve;
  auto* s_solve = app.add_subcommand("solve", "Steady heads, budget and H_PAS for one parameter vector");
  add_common(s_solve, common);
  s_solve->add_option("--scenario", solve.scenario, "Scenario file")->required();
  s_solve->add_option("--params", solve.params, "k_zone1,k_zone2,k_zone3,r_irrig (default: base case)");
  s_solve->callback([&] { action = [&](Context& ctx) { return cmd_solve(ctx, common, solve); }; });

  TrackArgs track;
  auto* s_track = app.add_subcommand("track", "Particle travel times from every n-th top-layer cell");
  add_common(s_track, common);
  s_track->add_option("--scenario", track.scenario, "Scenario file")->required();
  s_track->add_option("--params", track.params, "k_zone1,k_zone2,k_zone3,r_irrig (default: base case)");
  s_track->add_option("--spacing", track.spacing, "Release spacing in cells")->check(CLI::PositiveNumber)->capture_default_str();
  s_track->add_option("--max-time-years", track.max_time_years, "Tracking cutoff")->capture_default_str();
  s_track->add_option("--weak-sinks", track.weak_sinks, "pass_through or stop")
      ->check(CLI::IsMember({"pass_through", "stop"}))
      ->capture_default_str();
  s_track->callback([&] { action = [&](Context& ctx) { return cmd_track(ctx, common, track); }; });

  SyntheticArgs syn;
  auto* s_syn = app.add_subcommand("make-synthetic", "Noisy synthetic head observations from a known truth");
  add_common(s_syn, common);
  s_syn->add_option("--scenario", syn.scenario, "Scenario file")->required();
  s_syn->add_option("--params", syn.params, "True parameters (default: base case)");
  s_syn->add_option("--sigma", syn.sigma, "Noise standard deviation, m")->check(CLI::NonNegativeNumber)->capture_default_str();
  s_syn->add_option("--replicates", syn.replicates, "Number of noise replicates")->capture_default_str();
  s_syn->callback([&] { action = [&](Context& ctx) { return cmd_make_synthetic(ctx, common, syn); }; });

  CalibrateArgs cal;
  auto* s_cal = app.add_subcommand("calibrate", "Posterior mode and Laplace covariance");
  add_common(s_cal, common);
  s_cal->add_option("--scenario", cal.scenario, "Scenario file with observed heads")->required();
  s_cal->add_option("--observations", cal.observations, "Wells CSV replacing the scenario's wells");
  s_cal->add_option("--h-pas-star", cal.h_pas_star, "Expert H_PAS target, %");
  s_cal->add_option("--sigma-hpas", cal.sigma_hpas, "Expert H_PAS standard deviation, %");
  s_cal->add_option("--scan", cal.scan, "Scan counts k_zone1,k_zone2,k_zone3,r_irrig (default 15,4,15,20)");
  s_cal->add_flag("--coarse", cal.coarse, "Use the 6,4,6,5 scan");
  s_cal->add_option("--sigma-grid", cal.sigma_grid, "Comma-separated sigma_h values, m");
  s_cal->add_option("--n-starts", cal.n_starts, "Nelder-Mead starts per sigma_h")->capture_default_str();
  s_cal->add_flag("--no-trace", cal.no_trace, "Skip trace.csv");
  s_cal->add_flag("--no-laplace", cal.no_laplace, "Skip the posterior covariance");
  s_cal->add_option("--step-fraction", cal.step_fraction, "Finite-difference step / parameter")->capture_default_str();
  s_cal->add_option("--step-sweep", cal.step_sweep, "Comma-separated step fractions for a convergence study");
  s_cal->add_option("--ridge", cal.ridge, "Ridge factor on the Hessian diagonal (0 = off)")->capture_default_str();
  s_cal->callback([&] { action = [&](Context& ctx) { return cmd_calibrate(ctx, common, cal); }; });

  IdentifyArgs idf;
  auto* s_id = app.add_subcommand("identify", "Identifiability study on synthetic data");
  add_common(s_id, common);
  s_id->add_option("--scenario", idf.scenario, "Scenario file")->required();
  s_id->add_option("--params", idf.params, "True parameters (default: base case)");
  s_id->add_option("--levels", idf.levels, "Noise levels, m (default 0.25,0.5,1,2,3,4)");
  s_id->add_option("--replicates", idf.replicates, "Replicates per level")->capture_default_str();
  s_id->add_option("--scan", idf.scan, "Scan counts (default 15,4,15,20)");
  s_id->add_flag("--coarse", idf.coarse, "Use the 6,4,6,5 scan");
  s_id->add_option("--sigma-grid", idf.sigma_grid, "Comma-separated sigma_h values, m");
  s_id->add_option("--step-fraction", idf.step_fraction, "Finite-difference step / parameter")->capture_default_str();
  s_id->callback([&] { action = [&](Context& ctx) { return cmd_identify(ctx, common, idf); }; });

  UqArgs uq;
  auto* s_uq = app.add_subcommand("uq", "Travel-time ensemble from a posterior");
  add_common(s_uq, common);
  s_uq->add_option("--scenario", uq.scenario, "Scenario file")->required();
  s_uq->add_option("--posterior", uq.posterior, "Posterior JSON")->required();
  s_uq->add_option("--n", uq.settings.n_draws, "Posterior draws")->capture_default_str();
  s_uq->add_option("--spacing", uq.settings.release_spacing, "Release spacing in cells")->check(CLI::PositiveNumber)->capture_default_str();
  s_uq->add_option("--threshold-years", uq.settings.threshold_years, "Travel-time threshold")->capture_default_str();
  s_uq->add_option("--p50-bin-width", uq.settings.p50_bin_width, "Histogram bin width, years")->capture_default_str();
  s_uq->add_option("--under-threshold-bin-width", uq.settings.under_threshold_bin_width,
                   "Histogram bin width, percentage points")
      ->capture_default_str();
  s_uq->add_option("--max-rejects", uq.settings.max_rejects, "Rejections allowed per accepted draw")->capture_default_str();
  s_uq->add_option("--max-time-years", uq.max_time_years, "Tracking cutoff")->capture_default_str();
  s_uq->callback([&] { action = [&](Context& ctx) { return cmd_uq(ctx, common, uq); }; });

  std::string campaign_config;
  auto* s_camp = app.add_subcommand("campaign", "Identifiability study plus forward UQ from one config file");
  add_common(s_camp, common);
  s_camp->add_option("--config", campaign_config, "Campaign JSON")->required();
  s_camp->callback([&] { action = [&](Context& ctx) { return cmd_campaign(ctx, common, campaign_config); }; });

  ValleySpec valley;
  std::string valley_name = "valley";
  auto* s_val = app.add_subcommand("generate-valley", "Write a synthetic river-valley scenario");
  add_common(s_val, common);
  s_val->add_option("--rows", valley.n_rows)->capture_default_str();
  s_val->add_option("--cols", valley.n_cols)->capture_default_str();
  s_val->add_option("--layers", valley.n_layers)->capture_default_str();
  s_val->add_option("--cell-size", valley.cell_size, "m")->capture_default_str();
  s_val->add_option("--wells", valley.n_wells)->capture_default_str();
  s_val->add_option("--name", valley_name, "Scenario name and file stem")->capture_default_str();
  s_val->callback([&] { action = [&](Context& ctx) { return cmd_generate_valley(ctx, common, valley, valley_name); }; });

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.manifest.args.assign(args.begin() + (args.empty() ? 0 : 1), args.end());
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    code = action(ctx);
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    ctx.manifest.message = e.what();
    err << "error: " << e.what() << "\n";
  }
  ctx.manifest.exit_code = code;
  ctx.manifest.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ctx.ready) {
    try {
      write_text_file(ctx.out_dir / "manifest.json", ctx.manifest.to_json());
    } catch (const std::exception& e) {
      err << "error: cannot write manifest: " << e.what() << "\n";
      if (code == kExitOk) code = kExitIo;
    }
  }
  return code;
}

}  // namespace gwbayes::cli
