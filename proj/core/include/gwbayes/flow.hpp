#pragma once

// Steady-state groundwater flow on a block-centered grid:
//
//   d/dx(Kxx b dh/dx) + d/dy(Kyy b dh/dy) + d/dz(Kzz dh/dz) + W = 0
//
// discretized with the seven-point stencil. Inter-cell conductances are
// harmonic combinations of the two cell conductances. CHD cells are fixed
// heads, GHB adds C (h_b - h), DRN removes C max(0, h - z_d) and recharge
// enters the topmost active cell of each column.

#include <cstdint>
#include <string>
#include <vector>

#include "gwbayes/model.hpp"

namespace gwbayes {

enum class SolverMode { confined_linear, unconfined_picard };

std::string to_string(SolverMode mode);
SolverMode solver_mode_from_string(const std::string& name);

struct SolverOptions {
  SolverMode mode = SolverMode::unconfined_picard;
  double head_change_tol = 1e-6;     // m
  int max_picard_iters = 200;
  double linear_residual_tol = 1e-10;  // relative
  double picard_damping = 0.5;
  double min_saturated_fraction = 0.01;

  void validate() const;
};

struct HeadField {
  std::vector<double> head;                // per cell, NaN on inactive cells
  std::vector<double> thickness;           // per cell thickness used by the final assembly
  std::vector<std::uint8_t> drain_active;  // per drain entry, as used by the final assembly
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  double max_head_change = 0.0;
  SolverMode mode = SolverMode::confined_linear;
};

struct FluxBudget {
  double chd_net = 0.0;  // into the aquifer, m^3/s
  double ghb_net = 0.0;  // into the aquifer
  double drn_out = 0.0;  // out of the aquifer, >= 0
  double rch_in = 0.0;   // into the aquifer, >= 0
  double imbalance = 0.0;
  // Gross terms, summed per boundary cell by the sign of its net exchange.
  double chd_in = 0.0;
  double chd_out = 0.0;
  double ghb_in = 0.0;
  double ghb_out = 0.0;

  /// Total inflow (CHD + GHB + recharge) or total outflow, whichever is larger.
  double scale() const noexcept;
};

/// Conductance (m^2/s) from each cell to its +x, +y and lower neighbor; 0 where
/// the neighbor is missing or inactive.
struct FaceConductances {
  std::vector<double> x_plus;
  std::vector<double> y_plus;
  std::vector<double> z_below;
};

/// Cell thicknesses for the given heads: geometric everywhere except the top
/// layer in unconfined mode, which uses the clamped saturated thickness.
std::vector<double> cell_thickness(const Scenario& scenario, const std::vector<double>& head,
                                   const SolverOptions& opts);

FaceConductances face_conductances(const Scenario& scenario, const ConductivityField& k,
                                   const std::vector<double>& thickness);

/// Throws SingularSystemError when no CHD or GHB cell anchors the system and
/// ValidationError when `p` is not strictly positive. Non-convergence is
/// reported through `converged == false`.
HeadField solve_steady_heads(const Scenario& scenario, const ParameterVector& p, const SolverOptions& opts);

/// Percentage of eligible top-layer cells whose head exceeds land surface.
/// Eligible: active layer-0 cells that are not CHD.
double compute_hpas(const HeadField& hf, const Scenario& scenario);

/// Head at each well's cell, in well order. Throws ValidationError for a well
/// in an inactive cell.
std::vector<double> sample_wells(const HeadField& hf, const Scenario& scenario, const WellSet& wells);

FluxBudget flux_budget(const HeadField& hf, const Scenario& scenario, const ParameterVector& p);

}  // namespace gwbayes
