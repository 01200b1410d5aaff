#include "gwbayes/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gwbayes/error.hpp"
#include "gwbayes/text.hpp"

namespace gwbayes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this relative velocity change across the remaining distance the
// uniform-velocity formula replaces the logarithm.
constexpr double kUniformThreshold = 1e-12;

}  // namespace

VelocityField::VelocityField(Grid grid, std::vector<std::array<double, 6>> fluxes, std::vector<double> net_source,
                             std::vector<double> thickness, std::vector<std::uint8_t> terminates, double porosity)
    : grid_(std::move(grid)),
      fluxes_(std::move(fluxes)),
      net_source_(std::move(net_source)),
      thickness_(std::move(thickness)),
      terminates_(std::move(terminates)),
      porosity_(porosity) {
  if (!(porosity_ > 0.0 && porosity_ <= 1.0)) throw ValidationError("porosity must lie in (0,1]");
  const auto n = grid_.n_cells();
  if (fluxes_.size() != n || net_source_.size() != n || thickness_.size() != n || terminates_.size() != n) {
    throw ValidationError("velocity field arrays must have one entry per cell");
  }
}

double VelocityField::divergence_residual(std::size_t cell) const noexcept {
  const auto& f = fluxes_[cell];
  const double outflow = (f[kEast] - f[kWest]) + (f[kNorth] - f[kSouth]) + (f[kTop] - f[kBottom]);
  return outflow - net_source_[cell];
}

VelocityField VelocityField::reversed() const {
  VelocityField r = *this;
  for (auto& f : r.fluxes_) {
    for (double& q : f) q = -q;
  }
  for (double& q : r.net_source_) q = -q;
  return r;
}

VelocityField build_velocity_field(const HeadField& hf, const Scenario& s, const ParameterVector& p,
                                   const TrackingOptions& opts) {
  if (!(s.porosity > 0.0 && s.porosity <= 1.0)) throw ValidationError("porosity must lie in (0,1]");
  const Grid& g = s.grid;
  const CellRoles roles = cell_roles(s);
  const ConductivityField k = conductivity_field(s, p);
  const FaceConductances fc = face_conductances(s, k, hf.thickness);
  const auto n = g.n_cells();

  std::vector<std::array<double, 6>> flux(n, std::array<double, 6>{});
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.is_active(i)) continue;
    const auto c = g.cell(i);
    if (fc.x_plus[i] > 0.0) {
      const auto j = g.index(c.layer, c.row, c.col + 1);
      const double q = fc.x_plus[i] * (hf.head[i] - hf.head[j]);
      flux[i][kEast] = q;
      flux[j][kWest] = q;
    }
    if (fc.y_plus[i] > 0.0) {
      const auto j = g.index(c.layer, c.row + 1, c.col);
      const double q = fc.y_plus[i] * (hf.head[i] - hf.head[j]);
      flux[i][kNorth] = q;
      flux[j][kSouth] = q;
    }
    if (fc.z_below[i] > 0.0) {
      const auto j = g.index(c.layer + 1, c.row, c.col);
      const double q = fc.z_below[i] * (hf.head[j] - hf.head[i]);  // upward
      flux[i][kBottom] = q;
      flux[j][kTop] = q;
    }
  }
  // Recharge crosses the top face of the topmost active cell.
  for (int r = 0; r < g.n_rows(); ++r) {
    for (int c = 0; c < g.n_cols(); ++c) {
      const int layer = g.top_active_layer(r, c);
      if (layer < 0) continue;
      const auto i = g.index(layer, r, c);
      if (roles.is_chd[i]) continue;
      flux[i][kTop] = -column_recharge(s, p, g.column(r, c)) * g.cell_area();
    }
  }

  std::vector<double> source(n, 0.0);
  std::vector<std::uint8_t> terminates(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.is_active(i)) continue;
    const auto& f = flux[i];
    if (roles.is_chd[i]) {
      source[i] = (f[kEast] - f[kWest]) + (f[kNorth] - f[kSouth]) + (f[kTop] - f[kBottom]);
      terminates[i] = 1;
      continue;
    }
    double src = 0.0;
    if (roles.ghb_index[i] >= 0) {
      const auto& b = s.bc.ghb[static_cast<std::size_t>(roles.ghb_index[i])];
      src += b.conductance * (b.head - hf.head[i]);
    }
    if (roles.drn_index[i] >= 0) {
      const auto d = static_cast<std::size_t>(roles.drn_index[i]);
      if (d >= hf.drain_active.size() || hf.drain_active[d]) {
        const auto& drn = s.bc.drn[d];
        src -= drn.conductance * std::max(0.0, hf.head[i] - drn.elevation);
      }
    }
    source[i] = src;
    if (src < 0.0) {
      const double face_in = std::max(0.0, f[kWest]) + std::max(0.0, -f[kEast]) + std::max(0.0, f[kSouth]) +
                             std::max(0.0, -f[kNorth]) + std::max(0.0, f[kBottom]) + std::max(0.0, -f[kTop]);
      const bool strong = -src >= (1.0 - 1e-9) * face_in;
      if (strong || opts.weak_sinks == WeakSinkPolicy::stop) terminates[i] = 1;
    }
  }
  return VelocityField(g, std::move(flux), std::move(source), hf.thickness, std::move(terminates), s.porosity);
}

std::string to_string(ExitReason reason) {
  switch (reason) {
    case ExitReason::sink: return "sink";
    case ExitReason::boundary: return "boundary";
    case ExitReason::max_time: return "max_time";
    case ExitReason::start_in_sink: return "start_in_sink";
  }
  return "unknown";
}

double axis_exit_time(double v1, double v2, double length, double s, bool& exit_high) {
  const double a = (v2 - v1) / length;
  const double vp = v1 + a * s;
  double d = 0.0;
  if (vp > 0.0) {
    if (!(v2 > 0.0)) return kInf;
    d = length - s;
    exit_high = true;
  } else if (vp < 0.0) {
    if (!(v1 < 0.0)) return kInf;
    d = -s;
    exit_high = false;
  } else {
    return kInf;
  }
  if (d == 0.0) return 0.0;
  const double rel = a * d / vp;  // (v_exit - v_p) / v_p
  if (std::abs(rel) < kUniformThreshold) return d / vp;
  return std::log1p(rel) / a;
}

std::size_t locate_cell(const VelocityField& vf, const Position& pos) {
  const Grid& g = vf.grid();
  int col = static_cast<int>(std::floor(pos.x / g.cell_dx()));
  int row = static_cast<int>(std::floor(pos.y / g.cell_dy()));
  // Points on the far east or north edge belong to the last cell.
  if (col == g.n_cols() && pos.x == g.n_cols() * g.cell_dx()) col = g.n_cols() - 1;
  if (row == g.n_rows() && pos.y == g.n_rows() * g.cell_dy()) row = g.n_rows() - 1;
  if (col < 0 || col >= g.n_cols() || row < 0 || row >= g.n_rows()) {
    throw ValidationError("start position lies outside the grid");
  }
  for (int k = 0; k < g.n_layers(); ++k) {
    const auto i = g.index(k, row, col);
    if (pos.z >= vf.z_bottom(i) && (k == 0 ? pos.z <= vf.z_top(i) : pos.z <= g.layer_bottoms()[g.index(k - 1, row, col)])) {
      if (!g.is_active(i)) throw ValidationError("start position lies in an inactive cell");
      return i;
    }
  }
  throw ValidationError("start position lies outside the saturated column");
}

TrackResult track_particle(const VelocityField& vf, const Position& start, const TrackingOptions& opts) {
  const Grid& g = vf.grid();
  const double dx = g.cell_dx();
  const double dy = g.cell_dy();
  const double max_time = opts.max_time_years * kSecondsPerYear;
  const double n = vf.porosity();

  TrackResult out;
  std::size_t cell = locate_cell(vf, start);
  CellIndex ci = g.cell(cell);
  double sx = start.x - ci.col * dx;
  double sy = start.y - ci.row * dy;
  double sz = std::min(start.z - vf.z_bottom(cell), vf.thickness(cell));
  out.end = start;
  out.end_cell = cell;
  out.cells_visited = 1;
  if (vf.terminates(cell)) {
    out.reason = ExitReason::start_in_sink;
    return out;
  }

  double elapsed = 0.0;
  for (std::size_t step = 0;; ++step) {
    const auto& f = vf.faces(cell);
    const double b = vf.thickness(cell);
    const double len[3] = {dx, dy, b};
    const double area[3] = {dy * b, dx * b, dx * dy};
    double v1[3], v2[3];
    for (int ax = 0; ax < 3; ++ax) {
      v1[ax] = f[2 * ax] / (n * area[ax]);
      v2[ax] = f[2 * ax + 1] / (n * area[ax]);
    }
    double* pos[3] = {&sx, &sy, &sz};

    double dt = kInf;
    int exit_axis = -1;
    bool exit_high = false;
    for (int ax = 0; ax < 3; ++ax) {
      bool high = false;
      const double t = axis_exit_time(v1[ax], v2[ax], len[ax], *pos[ax], high);
      if (t < dt) {
        dt = t;
        exit_axis = ax;
        exit_high = high;
      }
    }

    bool stop_here = false;
    if (exit_axis < 0) {
      // No face outflow reachable: the particle ends in this cell.
      out.reason = vf.net_source(cell) < 0.0 ? ExitReason::sink : ExitReason::max_time;
      stop_here = true;
      dt = 0.0;
    } else if (elapsed + dt > max_time || step >= opts.max_cell_steps) {
      dt = std::max(0.0, max_time - elapsed);
      out.reason = ExitReason::max_time;
      stop_here = true;
      exit_axis = -1;
    }

    for (int ax = 0; ax < 3; ++ax) {
      if (ax == exit_axis) {
        *pos[ax] = exit_high ? len[ax] : 0.0;
        continue;
      }
      const double a = (v2[ax] - v1[ax]) / len[ax];
      const double vp = v1[ax] + a * *pos[ax];
      const double moved = (a * dt == 0.0) ? vp * dt : vp * std::expm1(a * dt) / a;
      *pos[ax] = std::clamp(*pos[ax] + moved, 0.0, len[ax]);
    }
    elapsed += dt;
    out.end = {ci.col * dx + sx, ci.row * dy + sy, vf.z_bottom(cell) + sz};
    out.end_cell = cell;
    if (stop_here) break;

    CellIndex next = ci;
    if (exit_axis == 0) next.col += exit_high ? 1 : -1;
    if (exit_axis == 1) next.row += exit_high ? 1 : -1;
    if (exit_axis == 2) next.layer += exit_high ? -1 : 1;  // +z is towards layer 0
    if (!g.contains(next) || !g.is_active(g.index(next))) {
      out.reason = ExitReason::boundary;
      break;
    }
    const auto next_cell = g.index(next);
    if (exit_axis == 0) sx = exit_high ? 0.0 : dx;
    if (exit_axis == 1) sy = exit_high ? 0.0 : dy;
    if (exit_axis == 2) {
      sz = exit_high ? 0.0 : vf.thickness(next_cell);
    } else {
      sz = sz / b * vf.thickness(next_cell);
    }
    cell = next_cell;
    ci = next;
    ++out.cells_visited;
    if (vf.terminates(cell)) {
      out.reason = ExitReason::sink;
      out.end = {ci.col * dx + sx, ci.row * dy + sy, vf.z_bottom(cell) + sz};
      out.end_cell = cell;
      break;
    }
  }
  out.time_years = elapsed / kSecondsPerYear;
  return out;
}

std::vector<ReleasePoint> release_grid(const VelocityField& vf, int spacing) {
  if (spacing < 1) throw ValidationError("release spacing must be >= 1");
  const Grid& g = vf.grid();
  std::vector<ReleasePoint> out;
  // Every spacing-th cell counted from 1: indices spacing-1, 2 spacing-1, ...
  for (int r = spacing - 1; r < g.n_rows(); r += spacing) {
    for (int c = spacing - 1; c < g.n_cols(); c += spacing) {
      const auto i = g.index(0, r, c);
      if (!g.is_active(i)) continue;
      const Position pos{(c + 0.5) * g.cell_dx(), (r + 0.5) * g.cell_dy(), vf.z_bottom(i) + 0.5 * vf.thickness(i)};
      out.push_back({CellIndex{0, r, c}, pos});
    }
  }
  return out;
}

TravelTimeSample travel_time_distribution(const VelocityField& vf, const std::vector<ReleasePoint>& starts,
                                          const TrackingOptions& opts) {
  TravelTimeSample out;
  out.n_released = starts.size();
  out.records.reserve(starts.size());
  for (std::size_t id = 0; id < starts.size(); ++id) {
    const TrackResult r = track_particle(vf, starts[id].position, opts);
    out.records.push_back({id, starts[id].cell, r.time_years, r.reason});
    if (r.reason == ExitReason::max_time) {
      ++out.n_unterminated;
    } else if (r.time_years == 0.0) {
      ++out.n_zero_excluded;
    } else {
      out.times.push_back(r.time_years);
    }
  }
  std::sort(out.times.begin(), out.times.end());
  return out;
}

std::string travel_times_to_csv(const TravelTimeSample& sample) {
  std::string out = "particle_id,start_layer,start_row,start_col,time_years,exit_reason\n";
  for (const auto& r : sample.records) {
    if (r.reason != ExitReason::max_time && r.time_years == 0.0) continue;  // excluded zero-time particle
    out += std::to_string(r.particle_id) + "," + std::to_string(r.start_cell.layer) + "," +
           std::to_string(r.start_cell.row) + "," + std::to_string(r.start_cell.col) + "," +
           format_double(r.time_years) + "," + to_string(r.reason) + "\n";
  }
  return out;
}

}  // namespace gwbayes
