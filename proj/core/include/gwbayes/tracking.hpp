#pragma once

// Advective particle tracking with Pollock's semi-analytic scheme. Within a
// cell each velocity component varies linearly between its two faces,
//
//   v(x) = v1 + A (x - x1),   A = (v2 - v1) / dx,
//
// so the time to reach a face with velocity v_e from velocity v_p is
// ln(v_e / v_p) / A. The smallest such time over the three axes selects the
// exit face.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gwbayes/flow.hpp"
#include "gwbayes/model.hpp"

namespace gwbayes {

inline constexpr double kSecondsPerYear = 365.25 * 86400.0;

enum Face : int { kWest = 0, kEast = 1, kSouth = 2, kNorth = 3, kBottom = 4, kTop = 5 };

/// Per-cell face fluxes (m^3/s), positive along +x (east, increasing col),
/// +y (increasing row) and +z (up). Internal faces are single valued.
class VelocityField {
 public:
  VelocityField() = default;

  /// Raw constructor; `fluxes` holds six values per cell, `net_source` the
  /// flow entering each cell from CHD/GHB/DRN exchange (m^3/s), and
  /// `thickness` the saturated thickness the velocities refer to.
  VelocityField(Grid grid, std::vector<std::array<double, 6>> fluxes, std::vector<double> net_source,
                std::vector<double> thickness, std::vector<std::uint8_t> terminates, double porosity);

  const Grid& grid() const noexcept { return grid_; }
  double porosity() const noexcept { return porosity_; }
  const std::array<double, 6>& faces(std::size_t cell) const noexcept { return fluxes_[cell]; }
  double net_source(std::size_t cell) const noexcept { return net_source_[cell]; }
  double thickness(std::size_t cell) const noexcept { return thickness_[cell]; }
  /// Bottom of the cell and top of its saturated part.
  double z_bottom(std::size_t cell) const noexcept { return grid_.layer_bottoms()[cell]; }
  double z_top(std::size_t cell) const noexcept { return z_bottom(cell) + thickness_[cell]; }
  bool terminates(std::size_t cell) const noexcept { return terminates_[cell] != 0; }

  /// Face-flux divergence (outflow minus inflow through faces) minus the
  /// cell's net source; zero for a conservative field.
  double divergence_residual(std::size_t cell) const noexcept;

  /// Copy with every flux negated; used to retrace paths backwards.
  VelocityField reversed() const;

 private:
  Grid grid_;
  std::vector<std::array<double, 6>> fluxes_;
  std::vector<double> net_source_;
  std::vector<double> thickness_;
  std::vector<std::uint8_t> terminates_;
  double porosity_ = 0.2;
};

enum class WeakSinkPolicy { pass_through, stop };

struct TrackingOptions {
  double max_time_years = 10000.0;
  WeakSinkPolicy weak_sinks = WeakSinkPolicy::pass_through;
  std::size_t max_cell_steps = 1000000;
};

/// Darcy fluxes from the solved heads, using the solver's conductances, and
/// the sink classification: CHD cells always terminate particles; DRN/GHB
/// cells with outflow terminate when they are strong sinks (no face outflow)
/// or when the weak-sink policy is `stop`. Throws ValidationError when the
/// porosity is outside (0,1].
VelocityField build_velocity_field(const HeadField& hf, const Scenario& scenario, const ParameterVector& p,
                                   const TrackingOptions& opts = {});

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

enum class ExitReason { sink, boundary, max_time, start_in_sink };

std::string to_string(ExitReason reason);

struct TrackResult {
  double time_years = 0.0;
  ExitReason reason = ExitReason::sink;
  Position end;
  std::size_t end_cell = 0;
  std::size_t cells_visited = 0;
};

/// Locates the active cell containing `pos`; throws ValidationError when the
/// point lies outside the grid or in an inactive cell.
std::size_t locate_cell(const VelocityField& vf, const Position& pos);

TrackResult track_particle(const VelocityField& vf, const Position& start, const TrackingOptions& opts = {});

/// Time (s) for a particle at offset `s` inside an axis with face velocities
/// v1 (at 0) and v2 (at `length`) to reach the face it moves towards;
/// +infinity when it never exits along this axis. `exit_high` reports the face.
double axis_exit_time(double v1, double v2, double length, double s, bool& exit_high);

struct ReleasePoint {
  CellIndex cell;
  Position position;
};

/// Centers of every `spacing`-th active top-layer cell, row-major, counting
/// rows and columns from 1 (spacing 5 picks indices 4, 9, 14, ...). A spacing
/// larger than the grid yields no release points.
std::vector<ReleasePoint> release_grid(const VelocityField& vf, int spacing);

struct ParticleRecord {
  std::size_t particle_id = 0;
  CellIndex start_cell;
  double time_years = 0.0;
  ExitReason reason = ExitReason::sink;
};

struct TravelTimeSample {
  std::vector<double> times;  // years, ascending, all > 0
  std::size_t n_released = 0;
  std::size_t n_zero_excluded = 0;
  std::size_t n_unterminated = 0;
  std::vector<ParticleRecord> records;  // release order
};

TravelTimeSample travel_time_distribution(const VelocityField& vf, const std::vector<ReleasePoint>& starts,
                                          const TrackingOptions& opts = {});

/// Long-format travel-time CSV:
/// particle_id,start_layer,start_row,start_col,time_years,exit_reason
/// Zero-time particles are left out; unterminated ones are kept.
std::string travel_times_to_csv(const TravelTimeSample& sample);

}  // namespace gwbayes
