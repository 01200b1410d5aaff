#include "gwbayes/synthetic_valley.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "gwbayes/error.hpp"
#include "gwbayes/rng.hpp"

namespace gwbayes {

namespace {

// Uniform double in [0,1) built from raw engine output, so the generated
// scenario does not depend on the standard library's distribution code.
double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(unit(rng) * static_cast<double>(n)); }

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(rng, i)]);
}

struct RowBands {
  int valley_begin;  // first zone-3 column
  int terrace_begin; // first zone-2 column
  int east_begin;    // first east-margin column
  int river_col;
};

}  // namespace

Scenario generate_synthetic_valley(const ValleySpec& spec) {
  if (spec.n_rows < 8 || spec.n_cols < 8) throw ValidationError("synthetic valley needs n_rows, n_cols >= 8");
  if (spec.n_layers < 1 || spec.n_layers > 3) throw ValidationError("synthetic valley needs n_layers in {1,2,3}");
  const auto& f = spec.zone_fractions;
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9 || f[0] < 0 || f[1] < 0 || f[2] < 0) {
    throw ValidationError("zone fractions must be non-negative and sum to 1");
  }
  if (!(spec.cell_size > 0.0)) throw ValidationError("cell_size > 0");
  if (!(spec.drain_depth >= 0.0)) throw ValidationError("drain_depth >= 0");

  const int w3 = static_cast<int>(std::lround(f[2] * spec.n_cols));
  const int w2 = static_cast<int>(std::lround(f[1] * spec.n_cols));
  const int w1 = spec.n_cols - w2 - w3;
  if (w3 < 1 || w2 < 1 || w1 < 2) {
    throw ValidationError("grid too small to host all three zones (widths " + std::to_string(w1) + "/" +
                          std::to_string(w2) + "/" + std::to_string(w3) + ")");
  }

  Rng rng(derive_seed(spec.seed, {0x5a11e7}));
  const int west = w1 / 2;
  const int east = w1 - west;

  std::vector<RowBands> bands(static_cast<std::size_t>(spec.n_rows));
  int shift = 0;
  for (int r = 0; r < spec.n_rows; ++r) {
    // Meander: bounded random walk of the valley position.
    const double u = unit(rng);
    const int step = u < 1.0 / 3.0 ? -1 : (u < 2.0 / 3.0 ? 0 : 1);
    shift = std::clamp(shift + step, 1 - west, east - 1);
    RowBands b;
    b.valley_begin = west + shift;
    b.terrace_begin = b.valley_begin + w3;
    b.east_begin = b.terrace_begin + w2;
    b.river_col = b.valley_begin + w3 / 2;
    bands[static_cast<std::size_t>(r)] = b;
  }

  Scenario s;
  s.name = "synthetic_valley";
  s.grid = Grid(spec.n_layers, spec.n_rows, spec.n_cols, spec.cell_size, spec.cell_size);
  Grid& g = s.grid;
  s.zones.zone_id.assign(g.n_cells(), 1);
  s.porosity = spec.porosity;

  auto lateral_zone = [&](int r, int c) {
    const auto& b = bands[static_cast<std::size_t>(r)];
    if (c >= b.valley_begin && c < b.terrace_begin) return 3;
    if (c >= b.terrace_begin && c < b.east_begin) return 2;
    return 1;
  };

  std::vector<double> layer_fraction;
  switch (spec.n_layers) {
    case 1: layer_fraction = {1.0}; break;
    case 2: layer_fraction = {0.5, 0.5}; break;
    default: layer_fraction = {0.25, 0.25, 0.5}; break;
  }

  for (int r = 0; r < spec.n_rows; ++r) {
    const auto& b = bands[static_cast<std::size_t>(r)];
    const double valley_z = spec.valley_elevation - spec.valley_slope * (r + 0.5) * spec.cell_size;
    const double base = valley_z - spec.valley_thickness;
    for (int c = 0; c < spec.n_cols; ++c) {
      double z = valley_z;
      if (lateral_zone(r, c) != 3) {
        const int dist = c < b.valley_begin ? b.valley_begin - c : c - b.terrace_begin + 1;
        z = valley_z + spec.scarp_height + spec.plain_rise * (dist - 1) + 0.4 * (unit(rng) - 0.5);
      }
      g.surface_elev()[g.column(r, c)] = z;
      double bottom = z;
      for (int k = 0; k < spec.n_layers; ++k) {
        bottom -= layer_fraction[static_cast<std::size_t>(k)] * (z - base);
        g.layer_bottoms()[g.index(k, r, c)] = bottom;
        const bool lowermost = spec.n_layers >= 2 && k == spec.n_layers - 1;
        s.zones.zone_id[g.index(k, r, c)] = lowermost ? 1 : lateral_zone(r, c);
      }
    }
  }

  // River: CHD strip along the valley center.
  for (int r = 0; r < spec.n_rows; ++r) {
    const int c = bands[static_cast<std::size_t>(r)].river_col;
    s.bc.chd.push_back({{0, r, c}, g.surface_elev()[g.column(r, c)] - spec.river_depth});
  }

  // GHB along every domain edge, all layers, except the river cells.
  auto is_river = [&](int k, int r, int c) { return k == 0 && bands[static_cast<std::size_t>(r)].river_col == c; };
  for (int k = 0; k < spec.n_layers; ++k) {
    for (int r = 0; r < spec.n_rows; ++r) {
      for (int c = 0; c < spec.n_cols; ++c) {
        const bool edge = r == 0 || c == 0 || r == spec.n_rows - 1 || c == spec.n_cols - 1;
        if (!edge || is_river(k, r, c)) continue;
        const double z = g.surface_elev()[g.column(r, c)];
        const double depth = lateral_zone(r, c) == 3 ? spec.river_depth : spec.ghb_depth;
        s.bc.ghb.push_back({{k, r, c}, z - depth, spec.ghb_conductance});
      }
    }
  }

  // Springs: drains on valley cells at the foot of the scarp.
  for (int r = 0; r < spec.n_rows; ++r) {
    const auto& b = bands[static_cast<std::size_t>(r)];
    for (int c : {b.valley_begin, b.terrace_begin - 1}) {
      const bool edge = r == 0 || c == 0 || r == spec.n_rows - 1 || c == spec.n_cols - 1;
      if (edge || c == b.river_col) continue;
      if (unit(rng) < spec.drain_probability) {
        s.bc.drn.push_back({{0, r, c}, g.surface_elev()[g.column(r, c)] - spec.drain_depth,
                          kDefaultDrainConductance});
      }
    }
  }

  s.bc.rch_base.assign(g.n_columns(), spec.rch_base);
  s.bc.irrigated.assign(g.n_columns(), 0);
  for (int r = 0; r < spec.n_rows; ++r) {
    for (int c = 0; c < spec.n_cols; ++c) {
      const double frac = lateral_zone(r, c) == 3 ? spec.irrigated_valley_fraction : spec.irrigated_plain_fraction;
      if (unit(rng) < frac) s.bc.irrigated[g.column(r, c)] = 1;
    }
  }

  // Wells: half in zone 1, 30% in zone 2, 20% in zone 3.
  std::vector<CellIndex> zone_cells[4];
  for (int k = 0; k < spec.n_layers; ++k) {
    for (int r = 0; r < spec.n_rows; ++r) {
      for (int c = 0; c < spec.n_cols; ++c) {
        if (is_river(k, r, c)) continue;
        zone_cells[s.zones.zone_id[g.index(k, r, c)]].push_back({k, r, c});
      }
    }
  }
  const int n3 = static_cast<int>(std::lround(0.2 * spec.n_wells));
  const int n2 = static_cast<int>(std::lround(0.3 * spec.n_wells));
  const int n1 = spec.n_wells - n2 - n3;
  const int wanted[4] = {0, n1, n2, n3};
  int next_id = 1;
  for (int z = 1; z <= 3; ++z) {
    auto& cells = zone_cells[z];
    shuffle(cells, rng);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(wanted[z], 0)), cells.size());
    std::vector<CellIndex> chosen(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(chosen.begin(), chosen.end(), [&](const CellIndex& a, const CellIndex& b) {
      return g.index(a) < g.index(b);
    });
    for (const auto& cell : chosen) {
      char id[16];
      std::snprintf(id, sizeof(id), "W%03d", next_id++);
      s.wells.push_back({id, cell, std::nullopt});
    }
  }

  validate(s);
  return s;
}

}  // namespace gwbayes
