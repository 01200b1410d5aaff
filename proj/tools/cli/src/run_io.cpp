#include "gwbayes/cli/run_io.hpp"

#include <sstream>

#include "gwbayes/error.hpp"
#include "gwbayes/scenario_io.hpp"
#include "gwbayes/text.hpp"

#ifndef GWBAYES_VERSION
#define GWBAYES_VERSION "0.0.0"
#endif

namespace gwbayes::cli {

std::string tool_version() { return GWBAYES_VERSION; }

SolverOptions parse_solver_block(const nlohmann::json& block, SolverOptions opts) {
  if (!block.is_object()) throw ParseError("solver block must be an object", 0, "solver");
  try {
    for (const auto& [key, value] : block.items()) {
      if (key == "mode") {
        opts.mode = solver_mode_from_string(value.get<std::string>());
      } else if (key == "head_change_tol") {
        opts.head_change_tol = value.get<double>();
      } else if (key == "max_picard_iters") {
        opts.max_picard_iters = value.get<int>();
      } else if (key == "linear_residual_tol") {
        opts.linear_residual_tol = value.get<double>();
      } else if (key == "picard_damping") {
        opts.picard_damping = value.get<double>();
      } else if (key == "min_saturated_fraction") {
        opts.min_saturated_fraction = value.get<double>();
      } else {
        throw ParseError("unknown solver option '" + key + "'", 0, "solver." + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("solver block: ") + e.what(), 0, "solver");
  }
  opts.validate();
  return opts;
}

nlohmann::ordered_json solver_to_json(const SolverOptions& o) {
  return {{"mode", to_string(o.mode)},
          {"head_change_tol", o.head_change_tol},
          {"max_picard_iters", o.max_picard_iters},
          {"linear_residual_tol", o.linear_residual_tol},
          {"picard_damping", o.picard_damping},
          {"min_saturated_fraction", o.min_saturated_fraction}};
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
  ScenarioFile f;
  f.text = read_text_file(path);
  f.scenario = parse_scenario(f.text, path.parent_path());
  const auto doc = nlohmann::json::parse(f.text, nullptr, false);
  if (!doc.is_discarded() && doc.contains("solver")) f.solver = parse_solver_block(doc.at("solver"));
  return f;
}

std::string scenario_file_json(const Scenario& scenario, const SolverOptions& solver) {
  auto doc = nlohmann::ordered_json::parse(scenario_to_json(scenario));
  doc["solver"] = solver_to_json(solver);
  return doc.dump(1) + "\n";
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& field : split_csv_line(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != field.size()) throw ParseError("not a number: '" + field + "'");
    out.push_back(v);
  }
  return out;
}

ParameterVector parse_parameters(const std::string& text) {
  const auto v = parse_double_list(text);
  if (v.size() != 4) throw ParseError("expected 4 comma-separated parameters k_zone1,k_zone2,k_zone3,r_irrig");
  ParameterVector p{v[0], v[1], v[2], v[3]};
  if (!all_positive(p)) throw ValidationError("parameters must be strictly positive");
  return p;
}

void RunManifest::add_input(const std::filesystem::path& path, const std::string& content) {
  inputs.emplace_back(path.generic_string(), hex64(fnv1a64(content)));
}

std::string RunManifest::config_hash() const {
  std::string canon = command + "\n" + config.dump() + "\n";
  for (const auto& [path, hash] : inputs) canon += hash + "\n";
  return hex64(fnv1a64(canon));
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["command"] = command;
  doc["tool_version"] = tool_version();
  doc["args"] = args;
  doc["config_hash"] = config_hash();
  doc["master_seed"] = seed;
  doc["workers"] = workers;
  doc["config"] = config;
  nlohmann::ordered_json in = nlohmann::ordered_json::array();
  for (const auto& [path, hash] : inputs) in.push_back({{"path", path}, {"fnv1a64", hash}});
  doc["inputs"] = in;
  doc["counters"] = counters;
  doc["outputs"] = outputs;
  doc["exit_code"] = exit_code;
  if (!message.empty()) doc["message"] = message;
  doc["wall_time_s"] = wall_time_s;
  return doc.dump(2) + "\n";
}

void emit(const std::filesystem::path& out_dir, const std::string& name, const std::string& content,
          RunManifest& manifest) {
  write_text_file(out_dir / name, content);
  manifest.outputs.push_back(name);
}

}  // namespace gwbayes::cli
