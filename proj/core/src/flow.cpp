#include "gwbayes/flow.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gwbayes/error.hpp"

namespace gwbayes {

std::string to_string(SolverMode mode) {
  return mode == SolverMode::confined_linear ? "confined_linear" : "unconfined_picard";
}

SolverMode solver_mode_from_string(const std::string& name) {
  if (name == "confined_linear" || name == "confined") return SolverMode::confined_linear;
  if (name == "unconfined_picard" || name == "unconfined") return SolverMode::unconfined_picard;
  throw ValidationError("unknown solver mode '" + name + "'");
}

void SolverOptions::validate() const {
  if (!(head_change_tol > 0.0) || !(linear_residual_tol > 0.0)) {
    throw ValidationError("solver tolerances must be > 0");
  }
  if (max_picard_iters < 1) throw ValidationError("max_picard_iters must be >= 1");
  if (!(picard_damping > 0.0 && picard_damping <= 1.0)) throw ValidationError("picard_damping must lie in (0,1]");
  if (!(min_saturated_fraction > 0.0 && min_saturated_fraction < 1.0)) {
    throw ValidationError("min_saturated_fraction must lie in (0,1)");
  }
}

double FluxBudget::scale() const noexcept {
  return std::max(chd_in + ghb_in + rch_in, chd_out + ghb_out + drn_out);
}

namespace {

double harmonic(double a, double b) {
  return (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b) : 0.0;
}

}  // namespace

std::vector<double> cell_thickness(const Scenario& s, const std::vector<double>& head, const SolverOptions& opts) {
  const Grid& g = s.grid;
  std::vector<double> b(g.n_cells(), 0.0);
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    if (!g.is_active(i)) continue;
    const auto c = g.cell(i);
    const double top = g.top(c);
    const double bot = g.bottom(c);
    const double full = top - bot;
    if (c.layer == 0 && opts.mode == SolverMode::unconfined_picard) {
      const double h = head.empty() ? top : head[i];
      b[i] = std::max(opts.min_saturated_fraction * full, std::min(h, top) - bot);
    } else {
      b[i] = full;
    }
  }
  return b;
}

FaceConductances face_conductances(const Scenario& s, const ConductivityField& k,
                                   const std::vector<double>& thickness) {
  const Grid& g = s.grid;
  const double dx = g.cell_dx();
  const double dy = g.cell_dy();
  FaceConductances fc;
  fc.x_plus.assign(g.n_cells(), 0.0);
  fc.y_plus.assign(g.n_cells(), 0.0);
  fc.z_below.assign(g.n_cells(), 0.0);
  for (int l = 0; l < g.n_layers(); ++l) {
    for (int r = 0; r < g.n_rows(); ++r) {
      for (int c = 0; c < g.n_cols(); ++c) {
        const auto i = g.index(l, r, c);
        if (!g.is_active(i)) continue;
        const double t_i = k.horizontal[i] * thickness[i];
        if (c + 1 < g.n_cols()) {
          const auto j = g.index(l, r, c + 1);
          if (g.is_active(j)) fc.x_plus[i] = dy / dx * harmonic(t_i, k.horizontal[j] * thickness[j]);
        }
        if (r + 1 < g.n_rows()) {
          const auto j = g.index(l, r + 1, c);
          if (g.is_active(j)) fc.y_plus[i] = dx / dy * harmonic(t_i, k.horizontal[j] * thickness[j]);
        }
        if (l + 1 < g.n_layers()) {
          const auto j = g.index(l + 1, r, c);
          if (g.is_active(j)) {
            // Series resistance of the two half cells.
            const double res = 0.5 * thickness[i] / k.vertical[i] + 0.5 * thickness[j] / k.vertical[j];
            fc.z_below[i] = g.cell_area() / res;
          }
        }
      }
    }
  }
  return fc;
}

namespace {

struct Neighbor {
  std::size_t cell;
  double conductance;
};

// Visits the up to six active neighbors of cell `i` with their conductances.
template <class Fn>
void for_each_neighbor(const Grid& g, const FaceConductances& fc, std::size_t i, Fn&& fn) {
  const auto c = g.cell(i);
  if (c.col + 1 < g.n_cols() && fc.x_plus[i] > 0.0) fn(Neighbor{g.index(c.layer, c.row, c.col + 1), fc.x_plus[i]});
  if (c.col > 0) {
    const auto j = g.index(c.layer, c.row, c.col - 1);
    if (fc.x_plus[j] > 0.0) fn(Neighbor{j, fc.x_plus[j]});
  }
  if (c.row + 1 < g.n_rows() && fc.y_plus[i] > 0.0) fn(Neighbor{g.index(c.layer, c.row + 1, c.col), fc.y_plus[i]});
  if (c.row > 0) {
    const auto j = g.index(c.layer, c.row - 1, c.col);
    if (fc.y_plus[j] > 0.0) fn(Neighbor{j, fc.y_plus[j]});
  }
  if (c.layer + 1 < g.n_layers() && fc.z_below[i] > 0.0) fn(Neighbor{g.index(c.layer + 1, c.row, c.col), fc.z_below[i]});
  if (c.layer > 0) {
    const auto j = g.index(c.layer - 1, c.row, c.col);
    if (fc.z_below[j] > 0.0) fn(Neighbor{j, fc.z_below[j]});
  }
}

// Recharge (m^3/s) entering each cell: the topmost active cell of every column.
std::vector<double> recharge_inflow(const Scenario& s, const ParameterVector& p, const CellRoles& roles) {
  const Grid& g = s.grid;
  std::vector<double> q(g.n_cells(), 0.0);
  for (int r = 0; r < g.n_rows(); ++r) {
    for (int c = 0; c < g.n_cols(); ++c) {
      const int k = g.top_active_layer(r, c);
      if (k < 0) continue;
      const auto i = g.index(k, r, c);
      if (roles.is_chd[i]) continue;
      q[i] = column_recharge(s, p, g.column(r, c)) * g.cell_area();
    }
  }
  return q;
}

}  // namespace

HeadField solve_steady_heads(const Scenario& s, const ParameterVector& p, const SolverOptions& opts) {
  opts.validate();
  if (!all_positive(p)) throw ValidationError("parameters must be strictly positive");
  const Grid& g = s.grid;
  const CellRoles roles = cell_roles(s);
  if (s.bc.chd.empty() && s.bc.ghb.empty()) {
    throw SingularSystemError("singular system: no CHD or GHB cell anchors the heads");
  }

  const ConductivityField k = conductivity_field(s, p);
  const std::vector<double> rch = recharge_inflow(s, p, roles);

  // Equation numbering over active, non-CHD cells.
  std::vector<int> eq(g.n_cells(), -1);
  std::vector<std::size_t> cell_of_eq;
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    if (g.is_active(i) && !roles.is_chd[i]) {
      eq[i] = static_cast<int>(cell_of_eq.size());
      cell_of_eq.push_back(i);
    }
  }
  const auto n = static_cast<Eigen::Index>(cell_of_eq.size());

  HeadField hf;
  hf.mode = opts.mode;
  hf.head.assign(g.n_cells(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < g.n_cells(); ++i) {
    if (!g.is_active(i)) continue;
    hf.head[i] = roles.is_chd[i] ? roles.chd_head[i] : g.top(g.cell(i));
  }
  hf.drain_active.assign(s.bc.drn.size(), 0);

  if (n == 0) {
    hf.thickness = cell_thickness(s, hf.head, opts);
    hf.converged = true;
    return hf;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool pattern_ready = false;
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs(n);
  std::vector<double> current = hf.head;

  for (int iter = 1; iter <= opts.max_picard_iters; ++iter) {
    const std::vector<double> thickness = cell_thickness(s, current, opts);
    const FaceConductances fc = face_conductances(s, k, thickness);
    std::vector<std::uint8_t> drains(s.bc.drn.size(), 0);
    for (std::size_t d = 0; d < s.bc.drn.size(); ++d) {
      drains[d] = current[g.index(s.bc.drn[d].cell)] > s.bc.drn[d].elevation ? 1 : 0;
    }

    triplets.clear();
    rhs.setZero();
    for (Eigen::Index e = 0; e < n; ++e) {
      const auto i = cell_of_eq[static_cast<std::size_t>(e)];
      double diag = 0.0;
      for_each_neighbor(g, fc, i, [&](const Neighbor& nb) {
        diag += nb.conductance;
        if (eq[nb.cell] >= 0) {
          if (static_cast<std::size_t>(eq[nb.cell]) < static_cast<std::size_t>(e)) {
            triplets.emplace_back(e, eq[nb.cell], -nb.conductance);
          }
        } else {
          rhs[e] += nb.conductance * roles.chd_head[nb.cell];
        }
      });
      if (roles.ghb_index[i] >= 0) {
        const auto& b = s.bc.ghb[static_cast<std::size_t>(roles.ghb_index[i])];
        diag += b.conductance;
        rhs[e] += b.conductance * b.head;
      }
      if (roles.drn_index[i] >= 0 && drains[static_cast<std::size_t>(roles.drn_index[i])]) {
        const auto& d = s.bc.drn[static_cast<std::size_t>(roles.drn_index[i])];
        diag += d.conductance;
        rhs[e] += d.conductance * d.elevation;
      }
      rhs[e] += rch[i];
      triplets.emplace_back(e, e, diag);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    if (!pattern_ready) {
      solver.analyzePattern(a);
      pattern_ready = true;
    }
    solver.factorize(a);
    if (solver.info() != Eigen::Success) {
      throw SingularSystemError("singular system: factorization failed (a disconnected region has no CHD or GHB)");
    }
    const auto full = a.selfadjointView<Eigen::Lower>();
    Eigen::VectorXd x = solver.solve(rhs);
    const double rhs_norm = std::max(rhs.norm(), std::numeric_limits<double>::min());
    Eigen::VectorXd r = rhs - full * x;
    double rel = r.norm() / rhs_norm;
    // Refine until the residual stops shrinking. Velocities difference
    // neighbouring heads, so round-off in x shows up amplified there.
    for (int refine = 0; refine < 4; ++refine) {
      Eigen::VectorXd dx = solver.solve(r);
      Eigen::VectorXd x_new = x + dx;
      Eigen::VectorXd r_new = rhs - full * x_new;
      const double rel_new = r_new.norm() / rhs_norm;
      if (!(rel_new < rel)) break;
      x = std::move(x_new);
      r = std::move(r_new);
      rel = rel_new;
    }

    double change = 0.0;
    for (Eigen::Index e = 0; e < n; ++e) {
      const auto i = cell_of_eq[static_cast<std::size_t>(e)];
      change = std::max(change, std::abs(x[e] - current[i]));
    }
    bool drains_consistent = true;
    for (std::size_t d = 0; d < s.bc.drn.size(); ++d) {
      const auto i = g.index(s.bc.drn[d].cell);
      const std::uint8_t now = x[eq[i]] > s.bc.drn[d].elevation ? 1 : 0;
      drains_consistent = drains_consistent && now == drains[d];
    }

    hf.iterations = iter;
    hf.residual_norm = rel;
    hf.max_head_change = change;
    const bool done = drains_consistent && rel <= opts.linear_residual_tol &&
                      (opts.mode == SolverMode::confined_linear || change < opts.head_change_tol);
    if (done || iter == opts.max_picard_iters) {
      // The returned heads are the exact solution of the last assembled
      // system, so budgets and velocities built from the stored state close.
      for (Eigen::Index e = 0; e < n; ++e) hf.head[cell_of_eq[static_cast<std::size_t>(e)]] = x[e];
      hf.thickness = thickness;
      hf.drain_active = drains;
      hf.converged = done;
      return hf;
    }
    const double w = opts.mode == SolverMode::confined_linear ? 1.0 : opts.picard_damping;
    for (Eigen::Index e = 0; e < n; ++e) {
      const auto i = cell_of_eq[static_cast<std::size_t>(e)];
      current[i] += w * (x[e] - current[i]);
    }
  }
  return hf;
}

double compute_hpas(const HeadField& hf, const Scenario& s) {
  const Grid& g = s.grid;
  const CellRoles roles = cell_roles(s);
  std::size_t eligible = 0;
  std::size_t flooded = 0;
  for (int r = 0; r < g.n_rows(); ++r) {
    for (int c = 0; c < g.n_cols(); ++c) {
      const auto i = g.index(0, r, c);
      if (!g.is_active(i) || roles.is_chd[i]) continue;
      ++eligible;
      if (hf.head[i] > g.surface_elev()[g.column(r, c)]) ++flooded;
    }
  }
  if (eligible == 0) return 0.0;
  return 100.0 * static_cast<double>(flooded) / static_cast<double>(eligible);
}

std::vector<double> sample_wells(const HeadField& hf, const Scenario& s, const WellSet& wells) {
  const Grid& g = s.grid;
  std::vector<double> out;
  out.reserve(wells.size());
  for (const auto& w : wells) {
    if (!g.contains(w.cell) || !g.is_active(g.index(w.cell))) {
      throw ValidationError("well '" + w.id + "' is in an inactive cell");
    }
    out.push_back(hf.head[g.index(w.cell)]);
  }
  return out;
}

FluxBudget flux_budget(const HeadField& hf, const Scenario& s, const ParameterVector& p) {
  const Grid& g = s.grid;
  const CellRoles roles = cell_roles(s);
  const ConductivityField k = conductivity_field(s, p);
  const FaceConductances fc = face_conductances(s, k, hf.thickness);
  FluxBudget b;
  for (const auto& chd : s.bc.chd) {
    const auto i = g.index(chd.cell);
    double q = 0.0;
    for_each_neighbor(g, fc, i, [&](const Neighbor& nb) { q += nb.conductance * (hf.head[i] - hf.head[nb.cell]); });
    b.chd_net += q;
    (q > 0.0 ? b.chd_in : b.chd_out) += std::abs(q);
  }
  for (const auto& ghb : s.bc.ghb) {
    const double q = ghb.conductance * (ghb.head - hf.head[g.index(ghb.cell)]);
    b.ghb_net += q;
    (q > 0.0 ? b.ghb_in : b.ghb_out) += std::abs(q);
  }
  for (std::size_t d = 0; d < s.bc.drn.size(); ++d) {
    if (d < hf.drain_active.size() && !hf.drain_active[d]) continue;
    const auto& drn = s.bc.drn[d];
    b.drn_out += drn.conductance * std::max(0.0, hf.head[g.index(drn.cell)] - drn.elevation);
  }
  for (double q : recharge_inflow(s, p, roles)) b.rch_in += q;
  b.imbalance = b.chd_net + b.ghb_net + b.rch_in - b.drn_out;
  return b;
}

}  // namespace gwbayes
