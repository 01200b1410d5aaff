#include "gwbayes/model.hpp"

#include <cmath>
#include <sstream>

#include "gwbayes/error.hpp"

namespace gwbayes {

Grid::Grid(int n_layers, int n_rows, int n_cols, double cell_dx, double cell_dy)
    : n_layers_(n_layers), n_rows_(n_rows), n_cols_(n_cols), dx_(cell_dx), dy_(cell_dy) {
  if (n_layers <= 0 || n_rows <= 0 || n_cols <= 0) {
    throw ValidationError("grid dimensions must be positive");
  }
  surface_.assign(n_columns(), 0.0);
  bottoms_.assign(n_cells(), 0.0);
  active_.assign(n_cells(), 1);
}

CellIndex Grid::cell(std::size_t idx) const noexcept {
  const auto per_layer = n_columns();
  const int layer = static_cast<int>(idx / per_layer);
  const auto rem = idx % per_layer;
  return {layer, static_cast<int>(rem / n_cols_), static_cast<int>(rem % n_cols_)};
}

double Grid::top(const CellIndex& c) const noexcept {
  if (c.layer == 0) return surface_[column(c.row, c.col)];
  return bottoms_[index(c.layer - 1, c.row, c.col)];
}

int Grid::top_active_layer(int row, int col) const noexcept {
  for (int k = 0; k < n_layers_; ++k) {
    if (is_active(index(k, row, col))) return k;
  }
  return -1;
}

double ParameterVector::operator[](std::size_t i) const noexcept {
  switch (i) {
    case 0: return k_zone1;
    case 1: return k_zone2;
    case 2: return k_zone3;
    default: return r_irrig;
  }
}

double& ParameterVector::operator[](std::size_t i) noexcept {
  switch (i) {
    case 0: return k_zone1;
    case 1: return k_zone2;
    case 2: return k_zone3;
    default: return r_irrig;
  }
}

double ParameterVector::conductivity_for_zone(int zone) const noexcept {
  switch (zone) {
    case 1: return k_zone1;
    case 2: return k_zone2;
    case 3: return k_zone3;
    default: return 0.0;
  }
}

bool PriorBox::contains(const ParameterVector& p) const noexcept {
  for (std::size_t j = 0; j < ParameterVector::kSize; ++j) {
    if (!(p[j] >= bounds[j].low && p[j] <= bounds[j].high)) return false;
  }
  return true;
}

double PriorBox::uniform_variance(std::size_t j) const noexcept {
  const double w = bounds[j].high - bounds[j].low;
  return w * w / 12.0;
}

bool validate_ordering(const ParameterVector& p) noexcept {
  return p.k_zone1 <= p.k_zone2 && p.k_zone2 <= p.k_zone3;
}

bool all_positive(const ParameterVector& p) noexcept {
  for (std::size_t j = 0; j < ParameterVector::kSize; ++j) {
    if (!(p[j] > 0.0) || !std::isfinite(p[j])) return false;
  }
  return true;
}

namespace {

std::string describe(const CellIndex& c) {
  std::ostringstream os;
  os << "(" << c.layer << "," << c.row << "," << c.col << ")";
  return os.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

void require_cell(const Grid& g, const CellIndex& c, const std::string& what) {
  require(g.contains(c), what + " cell " + describe(c) + " is outside the grid");
  require(g.is_active(g.index(c)), what + " cell " + describe(c) + " is inactive");
}

}  // namespace

void validate(const Scenario& s) {
  const Grid& g = s.grid;
  require(g.n_layers() > 0 && g.n_rows() > 0 && g.n_cols() > 0, "grid dimensions must be positive");
  require(g.cell_dx() > 0.0 && g.cell_dy() > 0.0, "cell_dx, cell_dy > 0");
  require(g.surface_elev().size() == g.n_columns(), "surface_elev must have one value per column");
  require(g.layer_bottoms().size() == g.n_cells(), "layer_bottoms must have one value per cell");
  require(g.active().size() == g.n_cells(), "active_mask must have one value per cell");

  for (int r = 0; r < g.n_rows(); ++r) {
    for (int c = 0; c < g.n_cols(); ++c) {
      bool any_active = false;
      for (int k = 0; k < g.n_layers(); ++k) {
        any_active = any_active || g.is_active(g.index(k, r, c));
        if (k > 0) {
          require(g.layer_bottoms()[g.index(k, r, c)] < g.layer_bottoms()[g.index(k - 1, r, c)],
                  "layer_bottoms must strictly decrease with layer index at column " +
                      describe({k, r, c}));
        }
      }
      if (any_active) {
        require(g.surface_elev()[g.column(r, c)] > g.layer_bottoms()[g.index(0, r, c)],
                "surface_elev > layer_bottoms[0] violated at column " + describe({0, r, c}));
      }
    }
  }

  require(s.zones.zone_id.size() == g.n_cells(), "zone map must have one value per cell");
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    if (!g.is_active(i)) continue;
    const int z = s.zones.zone_id[i];
    require(z >= 1 && z <= 3, "active cell " + describe(g.cell(i)) + " has no zone in {1,2,3}");
  }
  if (g.n_layers() >= 2) {
    const int last = g.n_layers() - 1;
    for (int r = 0; r < g.n_rows(); ++r) {
      for (int c = 0; c < g.n_cols(); ++c) {
        const auto i = g.index(last, r, c);
        if (g.is_active(i)) {
          require(s.zones.zone_id[i] == 1,
                  "zone 1 must cover the lowermost layer; found zone " +
                      std::to_string(s.zones.zone_id[i]) + " at " + describe(g.cell(i)));
        }
      }
    }
  }

  std::vector<std::uint8_t> has_chd(g.n_cells(), 0), has_ghb(g.n_cells(), 0), has_drn(g.n_cells(), 0);
  for (const auto& b : s.bc.chd) {
    require_cell(g, b.cell, "chd");
    require(std::isfinite(b.head), "chd head must be finite");
    auto& flag = has_chd[g.index(b.cell)];
    require(flag == 0, "duplicate chd at " + describe(b.cell));
    flag = 1;
  }
  for (const auto& b : s.bc.ghb) {
    require_cell(g, b.cell, "ghb");
    require(b.conductance > 0.0, "ghb conductance > 0 violated at " + describe(b.cell));
    const auto i = g.index(b.cell);
    require(has_chd[i] == 0, "a cell carries at most one of {CHD, GHB}: " + describe(b.cell));
    require(has_ghb[i] == 0, "duplicate ghb at " + describe(b.cell));
    has_ghb[i] = 1;
  }
  for (const auto& b : s.bc.drn) {
    require_cell(g, b.cell, "drn");
    require(b.conductance > 0.0, "drn conductance > 0 violated at " + describe(b.cell));
    const auto i = g.index(b.cell);
    require(has_chd[i] == 0, "drain placed on a chd cell " + describe(b.cell));
    require(has_drn[i] == 0, "duplicate drn at " + describe(b.cell));
    has_drn[i] = 1;
  }
  require(s.bc.rch_base.size() == g.n_columns(), "recharge must have one value per column");
  require(s.bc.irrigated.size() == g.n_columns(), "irrigated flags must have one value per column");
  for (double r : s.bc.rch_base) require(std::isfinite(r) && r >= 0.0, "recharge must be finite and >= 0");

  for (const auto& w : s.wells) {
    require_cell(g, w.cell, "well '" + w.id + "'");
    require(has_chd[g.index(w.cell)] == 0, "well '" + w.id + "' sits on a chd cell");
  }

  require(s.porosity > 0.0 && s.porosity <= 1.0, "porosity must lie in (0,1]");
  require(s.expert.sigma_hpas > 0.0, "sigma_hpas > 0");
  require(s.anisotropy_ratio > 0.0, "anisotropy ratio > 0");
  for (std::size_t j = 0; j < ParameterVector::kSize; ++j) {
    const auto& b = s.prior.bounds[j];
    require(b.low > 0.0 && b.low < b.high,
            std::string("prior bounds must satisfy 0 < low < high for ") + kParameterNames[j]);
  }
}

ConductivityField conductivity_field(const Scenario& s, const ParameterVector& p) {
  const Grid& g = s.grid;
  ConductivityField k;
  k.horizontal.assign(g.n_cells(), 0.0);
  k.vertical.assign(g.n_cells(), 0.0);
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    if (!g.is_active(i)) continue;
    const double kh = p.conductivity_for_zone(s.zones.zone_id[i]);
    k.horizontal[i] = kh;
    k.vertical[i] = kh * s.anisotropy_ratio;
  }
  return k;
}

CellRoles cell_roles(const Scenario& s) {
  const Grid& g = s.grid;
  CellRoles roles;
  roles.is_chd.assign(g.n_cells(), 0);
  roles.chd_head.assign(g.n_cells(), 0.0);
  roles.ghb_index.assign(g.n_cells(), -1);
  roles.drn_index.assign(g.n_cells(), -1);
  for (const auto& b : s.bc.chd) {
    const auto i = g.index(b.cell);
    roles.is_chd[i] = 1;
    roles.chd_head[i] = b.head;
  }
  for (std::size_t n = 0; n < s.bc.ghb.size(); ++n) roles.ghb_index[g.index(s.bc.ghb[n].cell)] = static_cast<int>(n);
  for (std::size_t n = 0; n < s.bc.drn.size(); ++n) roles.drn_index[g.index(s.bc.drn[n].cell)] = static_cast<int>(n);
  return roles;
}

double column_recharge(const Scenario& s, const ParameterVector& p, std::size_t column) {
  return s.bc.rch_base[column] + (s.bc.irrigated[column] != 0 ? p.r_irrig : 0.0);
}

}  // namespace gwbayes
