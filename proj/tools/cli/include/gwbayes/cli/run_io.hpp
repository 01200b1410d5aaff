#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gwbayes/flow.hpp"
#include "gwbayes/model.hpp"

namespace gwbayes::cli {

/// A scenario document plus its optional "solver" block
/// ({"mode": ..., "head_change_tol": ..., ...}).
struct ScenarioFile {
  Scenario scenario;
  SolverOptions solver;
  std::string text;  // raw document, hashed into the run manifest
};

ScenarioFile load_scenario_file(const std::filesystem::path& path);
SolverOptions parse_solver_block(const nlohmann::json& block, SolverOptions base = {});
nlohmann::ordered_json solver_to_json(const SolverOptions& opts);
/// Scenario JSON with a "solver" block appended.
std::string scenario_file_json(const Scenario& scenario, const SolverOptions& solver);

/// "k1,k2,k3,r" in parameter order.
ParameterVector parse_parameters(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  int workers = 1;
  nlohmann::ordered_json config;  // every resolved option that affects outputs
  std::vector<std::pair<std::string, std::string>> inputs;  // path, content hash
  std::map<std::string, std::uint64_t> counters;
  std::vector<std::string> outputs;
  double wall_time_s = 0.0;
  int exit_code = 0;
  std::string message;  // error text when exit_code != 0

  void add_input(const std::filesystem::path& path, const std::string& content);
  /// fnv1a64 over the canonical config and every input's content hash.
  std::string config_hash() const;
  std::string to_json() const;
};

/// Writes `content` to out_dir/name and records it in the manifest.
void emit(const std::filesystem::path& out_dir, const std::string& name, const std::string& content,
          RunManifest& manifest);

std::string tool_version();

}  // namespace gwbayes::cli
