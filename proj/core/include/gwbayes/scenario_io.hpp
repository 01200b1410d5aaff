#pragma once

// Scenario documents are JSON with the sections grid, zones, chd, ghb, drn,
// recharge, wells, expert and prior. Arrays over cells are flat, layer-major
// then row-major; cell addresses are [layer, row, col] triples.

#include <filesystem>
#include <string>
#include <string_view>

#include "gwbayes/model.hpp"

namespace gwbayes {

/// Reads, parses and validates a scenario file. Relative `wells_csv`
/// references resolve against the scenario file's directory.
Scenario load_scenario(const std::filesystem::path& path);

/// Parses a scenario document held in memory. `base_dir` resolves `wells_csv`.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});

/// Serializes every field at full round-trip precision.
std::string scenario_to_json(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// CSV with header `well_id,layer,row,col,observed_head_m`; empty head means
/// no observation.
WellSet load_wells_csv(const std::filesystem::path& path);
WellSet parse_wells_csv(std::string_view text);
std::string wells_to_csv(const WellSet& wells);

}  // namespace gwbayes
