#pragma once

// Seeded identifiability + forward-UQ campaign driven by one JSON config:
//
// {
//   "scenario": "valley_small.json",
//   "seed": 20240611,
//   "p_true": [6.5e-5, 4.5e-4, 5.0e-3, 2.5e-8],
//   "solver": {"mode": "confined_linear"},
//   "identify": {"noise_levels": [...], "replicates": 5, "scan": [6, 4, 6, 5],
//                "sigma_grid": {"min": 0.1, "max": 8.0, "count": 12}, "step_fraction": 2e-4},
//   "uq": {"noise_levels": [0.25, 4.0], "replicate": 0, "n_draws": 100, "release_spacing": 5,
//          "threshold_years": 25, "p50_bin_width": 0.05, "under_threshold_bin_width": 0.1,
//          "max_rejects": 1000}
// }

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gwbayes/cli/run_io.hpp"
#include "gwbayes/uq.hpp"

namespace gwbayes::cli {

struct UqSettings {
  std::size_t n_draws = 500;
  int release_spacing = 5;
  double threshold_years = 25.0;
  double p50_bin_width = 0.05;             // years
  double under_threshold_bin_width = 0.1;  // percentage points
  std::size_t max_rejects = 1000;
};

struct CampaignConfig {
  std::filesystem::path scenario_path;
  std::uint64_t seed = 1;
  ParameterVector p_true = ParameterVector::base_case();
  std::optional<nlohmann::json> solver;  // overrides the scenario's block
  std::vector<double> noise_levels{0.25, 0.5, 1.0, 2.0, 3.0, 4.0};
  int replicates = 5;
  ScanSpec scan = ScanSpec::coarse();
  std::vector<double> sigma_grid = default_sigma_grid();
  double step_fraction = 2e-4;
  std::vector<double> uq_levels{0.25, 4.0};
  int uq_replicate = 0;
  UqSettings uq;
};

/// Relative paths resolve against `base_dir`.
CampaignConfig parse_campaign_config(const std::string& text, const std::filesystem::path& base_dir);
nlohmann::ordered_json campaign_config_json(const CampaignConfig& cfg);

struct LevelEnsemble {
  double noise_level = 0.0;
  bool ok = false;
  std::string error;
  PosteriorGaussian posterior;
  TravelTimeEnsemble ensemble;
  EnsembleSummary summary;
};

struct CampaignOutcome {
  IdentifiabilityReport report;
  std::vector<LevelEnsemble> ensembles;
};

CampaignOutcome run_campaign(const CampaignConfig& cfg, const ScenarioFile& scenario, int workers);

/// Seeds of the two campaign stages, derived from the master seed.
std::uint64_t identify_seed(std::uint64_t master);
std::uint64_t uq_seed(std::uint64_t master, std::size_t level_index);

// Output writers shared by the CLI commands and the acceptance suite.
void write_identify_outputs(const IdentifiabilityReport& report, const std::filesystem::path& dir,
                            RunManifest& manifest, const std::string& prefix = "");
void write_uq_outputs(const TravelTimeEnsemble& ens, const EnsembleSummary& summary, const UqSettings& settings,
                      const std::filesystem::path& dir, RunManifest& manifest, const std::string& prefix = "");

}  // namespace gwbayes::cli
