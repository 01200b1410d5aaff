#pragma once

#include <array>
#include <cstdint>

#include "gwbayes/model.hpp"

namespace gwbayes {

/// Desk-scale river-valley aquifer. Each row, from west to east: a zone-1
/// margin, the zone-3 valley centered on the river, a zone-2 terrace, and a
/// zone-1 margin. The river is a CHD strip in the top layer; the remaining
/// edge cells carry GHB; drains sit at the foot of the terrace scarp; the
/// lowermost layer is zone 1 when there are two or more layers.
struct ValleySpec {
  int n_rows = 30;
  int n_cols = 30;
  int n_layers = 2;
  double cell_size = 500.0;                         // m, square cells
  std::array<double, 3> zone_fractions{0.5, 0.2, 0.3};  // zone 1, 2, 3 share of each row
  std::uint64_t seed = 7;
  int n_wells = 200;
  double valley_elevation = 100.0;   // m, at row 0
  double valley_slope = 1.0e-3;      // surface drop per m along +y
  double scarp_height = 60.0;        // m, plain surface above valley floor
  double plain_rise = 2.0;           // m per cell away from the scarp
  double valley_thickness = 40.0;    // m
  double river_depth = 1.0;          // river stage below valley surface
  double ghb_depth = 8.0;            // GHB head below local surface
  double ghb_conductance = 5.0e-4;   // m^2/s per edge cell
  double drain_probability = 1.0;    // scarp-foot cells that receive a drain
  double drain_depth = 0.5;          // drain elevation below local surface
  double rch_base = 3.0e-8;          // m/s, precipitation recharge
  double irrigated_valley_fraction = 0.8;
  double irrigated_plain_fraction = 0.35;
  double porosity = 0.2;
};

/// Pure function of `spec`. Throws ValidationError when the grid is too small
/// (fewer than 8 rows or columns, bad layer count, or a zone band narrower
/// than one cell) or the fractions do not sum to 1.
Scenario generate_synthetic_valley(const ValleySpec& spec);

}  // namespace gwbayes
