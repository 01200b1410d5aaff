#include "gwbayes/cli/campaign.hpp"

#include <algorithm>

#include "gwbayes/error.hpp"
#include "gwbayes/rng.hpp"
#include "gwbayes/text.hpp"

namespace gwbayes::cli {

namespace {

template <class T>
T get(const nlohmann::json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what(), 0, where + "." + key);
  }
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be an object", 0, where);
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ParseError("unknown key '" + where + "." + key + "'", 0, where + "." + key);
    }
  }
}

std::string level_tag(double level) { return "L" + format_double(level); }

}  // namespace

CampaignConfig parse_campaign_config(const std::string& text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("campaign config: ") + e.what());
  }
  reject_unknown(doc, {"scenario", "seed", "p_true", "solver", "identify", "uq"}, "campaign");
  CampaignConfig cfg;
  cfg.scenario_path = base_dir / get<std::string>(doc, "scenario", "campaign");
  if (doc.contains("seed")) cfg.seed = get<std::uint64_t>(doc, "seed", "campaign");
  if (doc.contains("p_true")) {
    const auto v = get<std::vector<double>>(doc, "p_true", "campaign");
    if (v.size() != 4) throw ParseError("campaign.p_true needs 4 values", 0, "campaign.p_true");
    cfg.p_true = ParameterVector{v[0], v[1], v[2], v[3]};
  }
  if (doc.contains("solver")) {
    parse_solver_block(doc.at("solver"));  // validate early
    cfg.solver = doc.at("solver");
  }
  if (doc.contains("identify")) {
    const auto& id = doc.at("identify");
    reject_unknown(id, {"noise_levels", "replicates", "scan", "sigma_grid", "step_fraction"}, "identify");
    if (id.contains("noise_levels")) cfg.noise_levels = get<std::vector<double>>(id, "noise_levels", "identify");
    if (id.contains("replicates")) cfg.replicates = get<int>(id, "replicates", "identify");
    if (id.contains("scan")) {
      const auto v = get<std::vector<int>>(id, "scan", "identify");
      if (v.size() != 4) throw ParseError("identify.scan needs 4 counts", 0, "identify.scan");
      std::copy(v.begin(), v.end(), cfg.scan.counts.begin());
    }
    if (id.contains("sigma_grid")) {
      const auto& g = id.at("sigma_grid");
      if (g.is_array()) {
        cfg.sigma_grid = get<std::vector<double>>(id, "sigma_grid", "identify");
      } else {
        reject_unknown(g, {"min", "max", "count"}, "identify.sigma_grid");
        cfg.sigma_grid = log_spaced(Interval{get<double>(g, "min", "identify.sigma_grid"),
                                             get<double>(g, "max", "identify.sigma_grid")},
                                    get<int>(g, "count", "identify.sigma_grid"));
      }
    }
    if (id.contains("step_fraction")) cfg.step_fraction = get<double>(id, "step_fraction", "identify");
  }
  if (doc.contains("uq")) {
    const auto& uq = doc.at("uq");
    reject_unknown(uq,
                   {"noise_levels", "replicate", "n_draws", "release_spacing", "threshold_years", "p50_bin_width",
                    "under_threshold_bin_width", "max_rejects"},
                   "uq");
    if (uq.contains("noise_levels")) cfg.uq_levels = get<std::vector<double>>(uq, "noise_levels", "uq");
    if (uq.contains("replicate")) cfg.uq_replicate = get<int>(uq, "replicate", "uq");
    if (uq.contains("n_draws")) cfg.uq.n_draws = get<std::size_t>(uq, "n_draws", "uq");
    if (uq.contains("release_spacing")) cfg.uq.release_spacing = get<int>(uq, "release_spacing", "uq");
    if (uq.contains("threshold_years")) cfg.uq.threshold_years = get<double>(uq, "threshold_years", "uq");
    if (uq.contains("p50_bin_width")) cfg.uq.p50_bin_width = get<double>(uq, "p50_bin_width", "uq");
    if (uq.contains("under_threshold_bin_width")) {
      cfg.uq.under_threshold_bin_width = get<double>(uq, "under_threshold_bin_width", "uq");
    }
    if (uq.contains("max_rejects")) cfg.uq.max_rejects = get<std::size_t>(uq, "max_rejects", "uq");
  }
  for (double l : cfg.uq_levels) {
    if (std::find(cfg.noise_levels.begin(), cfg.noise_levels.end(), l) == cfg.noise_levels.end()) {
      throw ValidationError("uq noise level " + format_double(l) + " is not among identify.noise_levels");
    }
  }
  if (cfg.uq_replicate < 0 || cfg.uq_replicate >= cfg.replicates) {
    throw ValidationError("uq.replicate must index an identify replicate");
  }
  return cfg;
}

nlohmann::ordered_json campaign_config_json(const CampaignConfig& c) {
  nlohmann::ordered_json doc;
  doc["seed"] = c.seed;
  doc["p_true"] = c.p_true.as_array();
  doc["noise_levels"] = c.noise_levels;
  doc["replicates"] = c.replicates;
  doc["scan"] = c.scan.counts;
  doc["sigma_grid"] = c.sigma_grid;
  doc["step_fraction"] = c.step_fraction;
  doc["uq_levels"] = c.uq_levels;
  doc["uq_replicate"] = c.uq_replicate;
  doc["n_draws"] = c.uq.n_draws;
  doc["release_spacing"] = c.uq.release_spacing;
  doc["threshold_years"] = c.uq.threshold_years;
  doc["p50_bin_width"] = c.uq.p50_bin_width;
  doc["under_threshold_bin_width"] = c.uq.under_threshold_bin_width;
  doc["max_rejects"] = c.uq.max_rejects;
  return doc;
}

std::uint64_t identify_seed(std::uint64_t master) { return derive_seed(master, {1}); }
std::uint64_t uq_seed(std::uint64_t master, std::size_t level_index) { return derive_seed(master, {2, level_index}); }

CampaignOutcome run_campaign(const CampaignConfig& cfg, const ScenarioFile& sf, int workers) {
  const SolverOptions solver = cfg.solver ? parse_solver_block(*cfg.solver, sf.solver) : sf.solver;
  IdentifiabilityOptions io;
  io.noise_levels = cfg.noise_levels;
  io.replicates = cfg.replicates;
  io.seed = identify_seed(cfg.seed);
  io.sigma_grid = cfg.sigma_grid;
  io.calibration.scan = cfg.scan;
  io.solver = solver;
  io.step_fraction = cfg.step_fraction;
  io.workers = workers;

  CampaignOutcome out;
  out.report = identifiability_study(sf.scenario, cfg.p_true, io);

  for (std::size_t l = 0; l < cfg.uq_levels.size(); ++l) {
    LevelEnsemble le;
    le.noise_level = cfg.uq_levels[l];
    const auto it = std::find_if(out.report.cells.begin(), out.report.cells.end(), [&](const auto& c) {
      return c.noise_level == le.noise_level && c.replicate == cfg.uq_replicate;
    });
    if (it == out.report.cells.end() || !it->has_posterior) {
      le.error = "no posterior for noise level " + format_double(le.noise_level);
      out.ensembles.push_back(std::move(le));
      continue;
    }
    le.posterior = it->posterior;
    ForwardUqOptions fo;
    fo.n_draws = cfg.uq.n_draws;
    fo.release_spacing = cfg.uq.release_spacing;
    fo.seed = uq_seed(cfg.seed, l);
    fo.max_rejects = cfg.uq.max_rejects;
    fo.threshold_years = cfg.uq.threshold_years;
    fo.solver = solver;
    fo.workers = workers;
    try {
      le.ensemble = forward_uq(sf.scenario, le.posterior, fo);
      le.summary = ensemble_summary(le.ensemble);
      le.ok = true;
    } catch (const Error& e) {
      le.error = e.what();
    }
    out.ensembles.push_back(std::move(le));
  }
  return out;
}

void write_identify_outputs(const IdentifiabilityReport& report, const std::filesystem::path& dir,
                            RunManifest& manifest, const std::string& prefix) {
  emit(dir, prefix + "identifiability_report.csv", identifiability_report_csv(report), manifest);
  emit(dir, prefix + "identifiability_summary.json", identifiability_summary_json(report), manifest);
  for (const auto& c : report.cells) {
    if (!c.has_posterior) continue;
    emit(dir, prefix + "posteriors/posterior_" + level_tag(c.noise_level) + "_r" + std::to_string(c.replicate) + ".json",
         posterior_to_json(c.posterior), manifest);
  }
}

void write_uq_outputs(const TravelTimeEnsemble& ens, const EnsembleSummary& summary, const UqSettings& settings,
                      const std::filesystem::path& dir, RunManifest& manifest, const std::string& prefix) {
  std::vector<double> p50, under;
  const auto k50 = std::find(ens.levels.begin(), ens.levels.end(), 50.0) - ens.levels.begin();
  for (const auto& r : ens.realizations) {
    if (!r.ok) continue;
    if (static_cast<std::size_t>(k50) < ens.levels.size()) p50.push_back(r.percentiles[static_cast<std::size_t>(k50)]);
    under.push_back(r.percent_under_threshold);
  }
  emit(dir, prefix + "ensemble_percentiles.csv", ensemble_percentiles_csv(ens), manifest);
  emit(dir, prefix + "ensemble_summary.json", ensemble_summary_json(ens, summary), manifest);
  emit(dir, prefix + "histogram_p50.csv", histogram_csv(histogram(p50, settings.p50_bin_width)), manifest);
  emit(dir, prefix + "histogram_under_threshold.csv",
       histogram_csv(histogram(under, settings.under_threshold_bin_width)), manifest);
  emit(dir, prefix + "cdf_long.csv", cdf_long_csv(ens), manifest);
}

}  // namespace gwbayes::cli
