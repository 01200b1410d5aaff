#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "gwbayes/flow.hpp"
#include "gwbayes/inversion.hpp"
#include "gwbayes/laplace.hpp"

namespace gwbayes::testing {

Scenario slab(int n_layers, int n_rows, int n_cols, double dx, double dy, double top, double layer_thickness) {
  Scenario s;
  s.name = "slab";
  s.grid = Grid(n_layers, n_rows, n_cols, dx, dy);
  auto& g = s.grid;
  std::fill(g.surface_elev().begin(), g.surface_elev().end(), top);
  for (int k = 0; k < n_layers; ++k) {
    for (std::size_t c = 0; c < g.n_columns(); ++c) {
      g.layer_bottoms()[static_cast<std::size_t>(k) * g.n_columns() + c] = top - (k + 1) * layer_thickness;
    }
  }
  s.zones.zone_id.assign(g.n_cells(), 1);
  s.bc.rch_base.assign(g.n_columns(), 0.0);
  s.bc.irrigated.assign(g.n_columns(), 0);
  return s;
}

namespace {

double zone_k(const ParameterVector& p, int zone) {
  return zone == 1 ? p.k_zone1 : zone == 2 ? p.k_zone2 : p.k_zone3;
}

}  // namespace

std::vector<double> dense_confined_heads(const Scenario& s, const ParameterVector& p) {
  const Grid& g = s.grid;
  const auto n = g.n_cells();
  std::vector<double> kh(n, 0.0), b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.is_active(i)) continue;
    kh[i] = zone_k(p, s.zones.zone_id[i]);
    b[i] = g.thickness(g.cell(i));
  }
  std::vector<int> chd(n, -1), ghb(n, -1), drn(n, -1);
  for (std::size_t k = 0; k < s.bc.chd.size(); ++k) chd[g.index(s.bc.chd[k].cell)] = static_cast<int>(k);
  for (std::size_t k = 0; k < s.bc.ghb.size(); ++k) ghb[g.index(s.bc.ghb[k].cell)] = static_cast<int>(k);
  for (std::size_t k = 0; k < s.bc.drn.size(); ++k) drn[g.index(s.bc.drn[k].cell)] = static_cast<int>(k);

  std::vector<bool> drain_on(s.bc.drn.size(), false);
  Eigen::VectorXd h;
  for (int pass = 0; pass < 100; ++pass) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    auto couple = [&](std::size_t i, std::size_t j, double cond) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      a(ii, ii) += cond;
      a(ii, jj) -= cond;
    };
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (!g.is_active(i)) {
        a(ii, ii) = 1.0;
        continue;
      }
      if (chd[i] >= 0) {
        a(ii, ii) = 1.0;
        rhs(ii) = s.bc.chd[static_cast<std::size_t>(chd[i])].head;
        continue;
      }
      const CellIndex c = g.cell(i);
      const CellIndex nbrs[6] = {{c.layer, c.row, c.col - 1}, {c.layer, c.row, c.col + 1},
                                 {c.layer, c.row - 1, c.col}, {c.layer, c.row + 1, c.col},
                                 {c.layer - 1, c.row, c.col}, {c.layer + 1, c.row, c.col}};
      for (int f = 0; f < 6; ++f) {
        if (!g.contains(nbrs[f])) continue;
        const auto j = g.index(nbrs[f]);
        if (!g.is_active(j)) continue;
        double cond = 0.0;
        if (f < 4) {
          const double ti = kh[i] * b[i], tj = kh[j] * b[j];
          const double width_over_length = f < 2 ? g.cell_dy() / g.cell_dx() : g.cell_dx() / g.cell_dy();
          cond = width_over_length * 2.0 * ti * tj / (ti + tj);
        } else {
          const double kvi = kh[i] * s.anisotropy_ratio, kvj = kh[j] * s.anisotropy_ratio;
          cond = g.cell_area() / (0.5 * b[i] / kvi + 0.5 * b[j] / kvj);
        }
        couple(i, j, cond);
      }
      if (ghb[i] >= 0) {
        const auto& e = s.bc.ghb[static_cast<std::size_t>(ghb[i])];
        a(ii, ii) += e.conductance;
        rhs(ii) += e.conductance * e.head;
      }
      if (drn[i] >= 0 && drain_on[static_cast<std::size_t>(drn[i])]) {
        const auto& e = s.bc.drn[static_cast<std::size_t>(drn[i])];
        a(ii, ii) += e.conductance;
        rhs(ii) += e.conductance * e.elevation;
      }
      if (c.layer == g.top_active_layer(c.row, c.col)) {
        const auto col = g.column(c.row, c.col);
        const double w = s.bc.rch_base[col] + (s.bc.irrigated[col] ? p.r_irrig : 0.0);
        rhs(ii) += w * g.cell_area();
      }
    }
    h = a.partialPivLu().solve(rhs);
    bool changed = false;
    for (std::size_t k = 0; k < s.bc.drn.size(); ++k) {
      const bool on = h(static_cast<Eigen::Index>(g.index(s.bc.drn[k].cell))) > s.bc.drn[k].elevation;
      if (on != drain_on[k]) {
        drain_on[k] = on;
        changed = true;
      }
    }
    if (!changed) break;
  }
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    if (g.is_active(i)) out[i] = h(static_cast<Eigen::Index>(i));
  }
  return out;
}

double max_relative_difference(const std::vector<double>& a, const std::vector<double>& b,
                               const std::vector<std::uint8_t>& mask) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask[i]) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1.0));
  }
  return worst;
}

std::vector<Scenario> manufactured_confined_problems() {
  std::vector<Scenario> out;

  {  // uniform K, uniform recharge, CHD on two opposite edges
    Scenario s = slab(1, 10, 10, 100.0, 100.0, 50.0, 30.0);
    s.name = "uniform_10x10";
    for (int r = 0; r < 10; ++r) {
      s.bc.chd.push_back({{0, r, 0}, 20.0});
      s.bc.chd.push_back({{0, r, 9}, 15.0});
    }
    std::fill(s.bc.rch_base.begin(), s.bc.rch_base.end(), 2e-8);
    out.push_back(std::move(s));
  }
  {  // three zone bands, irrigation, CHD west and GHB east
    Scenario s = slab(1, 9, 12, 150.0, 120.0, 60.0, 25.0);
    s.name = "zoned_bands";
    auto& g = s.grid;
    for (int r = 0; r < 9; ++r) {
      for (int c = 0; c < 12; ++c) {
        s.zones.zone_id[g.index(0, r, c)] = c < 4 ? 1 : c < 8 ? 2 : 3;
        if (c >= 6 && r % 2 == 0) s.bc.irrigated[g.column(r, c)] = 1;
        s.bc.rch_base[g.column(r, c)] = 1e-8 * (1.0 + 0.1 * r);
      }
      s.bc.chd.push_back({{0, r, 0}, 30.0 + 0.2 * r});
      s.bc.ghb.push_back({{0, r, 11}, 25.0, 2e-3});
    }
    out.push_back(std::move(s));
  }
  {  // two layers, anisotropy, GHB ring on the north edge
    Scenario s = slab(2, 8, 8, 200.0, 200.0, 80.0, 20.0);
    s.name = "two_layer";
    s.anisotropy_ratio = 0.1;
    auto& g = s.grid;
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        s.zones.zone_id[g.index(0, r, c)] = (r + c) % 3 + 1;
        s.bc.rch_base[g.column(r, c)] = 5e-9 * (1 + c);
      }
    }
    s.bc.chd.push_back({{0, 7, 7}, 55.0});
    for (int c = 0; c < 8; ++c) {
      s.bc.ghb.push_back({{0, 0, c}, 60.0, 1e-3});
      s.bc.ghb.push_back({{1, 0, c}, 58.0, 5e-4});
    }
    out.push_back(std::move(s));
  }
  {  // drains that switch on
    Scenario s = slab(1, 6, 10, 100.0, 100.0, 40.0, 30.0);
    s.name = "drains";
    auto& g = s.grid;
    for (int r = 0; r < 6; ++r) {
      s.bc.chd.push_back({{0, r, 0}, 20.0});
      s.bc.drn.push_back({{0, r, 5}, 21.0 + 0.5 * r, 100.0});
      s.bc.drn.push_back({{0, r, 9}, 35.0, 50.0});  // stays dry
    }
    std::fill(s.bc.rch_base.begin(), s.bc.rch_base.end(), 3e-8);
    for (int c = 6; c < 10; ++c) s.bc.irrigated[g.column(2, c)] = 1;
    out.push_back(std::move(s));
  }
  {  // three layers with inactive cells, GHB anchor only
    Scenario s = slab(3, 7, 11, 120.0, 90.0, 70.0, 15.0);
    s.name = "three_layer_masked";
    auto& g = s.grid;
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 11; ++c) {
        if (r < 2 && c > 8) {
          for (int k = 0; k < 3; ++k) g.active()[g.index(k, r, c)] = 0;
        }
        s.zones.zone_id[g.index(0, r, c)] = c < 4 ? 3 : 2;
        s.zones.zone_id[g.index(1, r, c)] = c < 6 ? 2 : 1;
        s.bc.rch_base[g.column(r, c)] = 1.5e-8;
        if (c < 3) s.bc.irrigated[g.column(r, c)] = 1;
      }
    }
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
      if (!g.is_active(i)) s.zones.zone_id[i] = 0;
    }
    for (int r = 0; r < 7; ++r) s.bc.ghb.push_back({{0, r, 0}, 50.0, 3e-3});
    s.bc.drn.push_back({{0, 3, 6}, 48.0, 100.0});
    s.bc.drn.push_back({{0, 5, 8}, 45.0, 80.0});
    out.push_back(std::move(s));
  }
  return out;
}

// ------------------------------------------------------------- 1-D rows

namespace {

constexpr double kRowK = 1e-4;
constexpr double kRowB = 10.0;
constexpr double kRowLength = 1000.0;
constexpr double kRowH0 = 10.0;
constexpr double kRowHL = 5.0;

template <class Recharge, class Exact>
double row_error(int n_interior, Recharge w, Exact exact) {
  const double dx = kRowLength / (n_interior + 1);
  Scenario s = slab(1, 1, n_interior + 2, dx, 100.0, 100.0, kRowB);
  s.bc.chd.push_back({{0, 0, 0}, kRowH0});
  s.bc.chd.push_back({{0, 0, n_interior + 1}, kRowHL});
  for (int c = 1; c <= n_interior; ++c) s.bc.rch_base[static_cast<std::size_t>(c)] = w(c * dx);
  SolverOptions so;
  so.mode = SolverMode::confined_linear;
  const ParameterVector p{kRowK, kRowK, kRowK, 1e-9};
  const HeadField hf = solve_steady_heads(s, p, so);
  double err = 0.0;
  for (int c = 1; c <= n_interior; ++c) err = std::max(err, std::abs(hf.head[static_cast<std::size_t>(c)] - exact(c * dx)));
  return err;
}

}  // namespace

double parabola_error(int n_interior) {
  const double w = 1e-7, t = kRowK * kRowB;
  return row_error(
      n_interior, [&](double) { return w; },
      [&](double x) { return kRowH0 + (kRowHL - kRowH0) * x / kRowLength + w / (2 * t) * x * (kRowLength - x); });
}

double sine_recharge_error(int n_interior) {
  const double w0 = 1e-7, t = kRowK * kRowB, pi = std::numbers::pi;
  return row_error(
      n_interior, [&](double x) { return w0 * std::sin(pi * x / kRowLength); },
      [&](double x) {
        return kRowH0 + (kRowHL - kRowH0) * x / kRowLength +
               w0 * kRowLength * kRowLength / (pi * pi * t) * std::sin(pi * x / kRowLength);
      });
}

SolverOracleReport run_solver_oracles(const std::vector<Scenario>& fixtures) {
  SolverOracleReport rep;
  std::ostringstream detail;
  SolverOptions confined;
  confined.mode = SolverMode::confined_linear;
  const ParameterVector p = ParameterVector::base_case();
  auto imbalance = [&](const Scenario& s, const HeadField& hf) {
    const FluxBudget b = flux_budget(hf, s, p);
    return std::abs(b.imbalance) / std::max(b.scale(), 1e-300);
  };
  for (const Scenario& s : manufactured_confined_problems()) {
    const HeadField hf = solve_steady_heads(s, p, confined);
    const double rel = max_relative_difference(hf.head, dense_confined_heads(s, p), s.grid.active());
    const double imb = imbalance(s, hf);
    rep.worst_dense_rel = std::max(rep.worst_dense_rel, rel);
    rep.worst_imbalance = std::max(rep.worst_imbalance, imb);
    detail << s.name << " dense_rel=" << rel << " imbalance=" << imb << "; ";
  }
  for (const Scenario& s : fixtures) {
    for (SolverMode mode : {SolverMode::confined_linear, SolverMode::unconfined_picard}) {
      SolverOptions so;
      so.mode = mode;
      const HeadField hf = solve_steady_heads(s, p, so);
      const double imb = imbalance(s, hf);
      rep.worst_imbalance = std::max(rep.worst_imbalance, imb);
      detail << s.name << "/" << to_string(mode) << " imbalance=" << imb << "; ";
    }
  }
  rep.parabola_max_error = parabola_error(19);
  const double coarse = sine_recharge_error(19), fine = sine_recharge_error(39);
  rep.refinement_ratio = coarse / fine;
  detail << "parabola_err=" << rep.parabola_max_error << " sine_err " << coarse << " -> " << fine;
  rep.detail = detail.str();
  return rep;
}

// ------------------------------------------------------------ ODE tracks

namespace {

struct CellField {
  double len[3];
  double v1[3];
  double v2[3];
  void rhs(const double s[3], double out[3]) const {
    for (int a = 0; a < 3; ++a) out[a] = v1[a] + (v2[a] - v1[a]) * s[a] / len[a];
  }
};

// One Dormand-Prince 5(4) step; returns the error estimate (max norm scaled by len).
double dp_step(const CellField& f, const double s[3], double h, double out[3]) {
  static constexpr double c21 = 1.0 / 5, c31 = 3.0 / 40, c32 = 9.0 / 40, c41 = 44.0 / 45, c42 = -56.0 / 15,
                          c43 = 32.0 / 9, c51 = 19372.0 / 6561, c52 = -25360.0 / 2187, c53 = 64448.0 / 6561,
                          c54 = -212.0 / 729, c61 = 9017.0 / 3168, c62 = -355.0 / 33, c63 = 46732.0 / 5247,
                          c64 = 49.0 / 176, c65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113,
                          b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84, e1 = 71.0 / 57600,
                          e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                          e7 = -1.0 / 40;
  double k1[3], k2[3], k3[3], k4[3], k5[3], k6[3], k7[3], y[3];
  f.rhs(s, k1);
  for (int a = 0; a < 3; ++a) y[a] = s[a] + h * c21 * k1[a];
  f.rhs(y, k2);
  for (int a = 0; a < 3; ++a) y[a] = s[a] + h * (c31 * k1[a] + c32 * k2[a]);
  f.rhs(y, k3);
  for (int a = 0; a < 3; ++a) y[a] = s[a] + h * (c41 * k1[a] + c42 * k2[a] + c43 * k3[a]);
  f.rhs(y, k4);
  for (int a = 0; a < 3; ++a) y[a] = s[a] + h * (c51 * k1[a] + c52 * k2[a] + c53 * k3[a] + c54 * k4[a]);
  f.rhs(y, k5);
  for (int a = 0; a < 3; ++a) {
    y[a] = s[a] + h * (c61 * k1[a] + c62 * k2[a] + c63 * k3[a] + c64 * k4[a] + c65 * k5[a]);
  }
  f.rhs(y, k6);
  for (int a = 0; a < 3; ++a) out[a] = s[a] + h * (b1 * k1[a] + b3 * k3[a] + b4 * k4[a] + b5 * k5[a] + b6 * k6[a]);
  f.rhs(out, k7);
  double err = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double e = h * (e1 * k1[a] + e3 * k3[a] + e4 * k4[a] + e5 * k5[a] + e6 * k6[a] + e7 * k7[a]);
    err = std::max(err, std::abs(e) / f.len[a]);
  }
  return err;
}

bool outside(const CellField& f, const double s[3]) {
  for (int a = 0; a < 3; ++a) {
    if (s[a] < 0.0 || s[a] > f.len[a]) return true;
  }
  return false;
}

}  // namespace

OdeTrack ode_track(const VelocityField& vf, const Position& start, double max_time_years, double rel_tol) {
  const Grid& g = vf.grid();
  const double n = vf.porosity();
  const double max_time = max_time_years * kSecondsPerYear;
  OdeTrack out;
  std::size_t cell = locate_cell(vf, start);
  CellIndex ci = g.cell(cell);
  double s[3] = {start.x - ci.col * g.cell_dx(), start.y - ci.row * g.cell_dy(),
                 std::min(start.z - vf.z_bottom(cell), vf.thickness(cell))};
  if (vf.terminates(cell)) {
    out.start_in_sink = out.terminated = true;
    out.end = start;
    return out;
  }
  double t = 0.0;
  for (int visits = 0; visits < 1000000; ++visits) {
    const auto& q = vf.faces(cell);
    const double b = vf.thickness(cell);
    CellField f{{g.cell_dx(), g.cell_dy(), b}, {}, {}};
    const double area[3] = {g.cell_dy() * b, g.cell_dx() * b, g.cell_area()};
    for (int a = 0; a < 3; ++a) {
      f.v1[a] = q[2 * a] / (n * area[a]);
      f.v2[a] = q[2 * a + 1] / (n * area[a]);
    }
    // Initial step from the cell crossing time scale.
    double vmax = 0.0;
    for (int a = 0; a < 3; ++a) vmax = std::max({vmax, std::abs(f.v1[a]) / f.len[a], std::abs(f.v2[a]) / f.len[a]});
    double h = vmax > 0.0 ? 1e-3 / vmax : max_time;
    const double t_entry = t;
    int exit_axis = -1;
    bool exit_high = false;
    for (int steps = 0; steps < 2000000; ++steps) {
      if (t - t_entry > 1e3 * max_time || t > max_time) break;
      double trial[3];
      const double err = dp_step(f, s, h, trial);
      if (err > rel_tol) {
        h *= std::max(0.1, 0.9 * std::pow(rel_tol / err, 0.2));
        continue;
      }
      if (!outside(f, trial)) {
        std::copy(trial, trial + 3, s);
        t += h;
        h *= std::min(5.0, err > 0.0 ? 0.9 * std::pow(rel_tol / err, 0.2) : 5.0);
        continue;
      }
      // Bisect on the step length for the first face crossing.
      double lo = 0.0, hi = h, tmp[3];
      for (int it = 0; it < 200 && hi - lo > 1e-15 * (t + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        dp_step(f, s, mid, tmp);
        (outside(f, tmp) ? hi : lo) = mid;
      }
      dp_step(f, s, hi, tmp);
      double worst = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double over = tmp[a] < 0.0 ? -tmp[a] : tmp[a] - f.len[a];
        if (over > worst) {
          worst = over;
          exit_axis = a;
          exit_high = tmp[a] > f.len[a];
        }
      }
      for (int a = 0; a < 3; ++a) s[a] = std::clamp(tmp[a], 0.0, f.len[a]);
      t += hi;
      break;
    }
    if (exit_axis < 0) {
      // Trapped in this cell: a sink without reachable face outflow.
      out.terminated = vf.net_source(cell) < 0.0;
      out.time_years = t_entry / kSecondsPerYear;
      out.end = {ci.col * g.cell_dx() + s[0], ci.row * g.cell_dy() + s[1], vf.z_bottom(cell) + s[2]};
      return out;
    }
    out.end = {ci.col * g.cell_dx() + s[0], ci.row * g.cell_dy() + s[1], vf.z_bottom(cell) + s[2]};
    CellIndex next = ci;
    if (exit_axis == 0) next.col += exit_high ? 1 : -1;
    if (exit_axis == 1) next.row += exit_high ? 1 : -1;
    if (exit_axis == 2) next.layer += exit_high ? -1 : 1;
    if (!g.contains(next) || !g.is_active(g.index(next))) {
      out.terminated = true;
      out.time_years = t / kSecondsPerYear;
      return out;
    }
    const auto nc = g.index(next);
    if (exit_axis == 0) s[0] = exit_high ? 0.0 : g.cell_dx();
    if (exit_axis == 1) s[1] = exit_high ? 0.0 : g.cell_dy();
    s[2] = exit_axis == 2 ? (exit_high ? 0.0 : vf.thickness(nc)) : s[2] / b * vf.thickness(nc);
    cell = nc;
    ci = next;
    if (vf.terminates(cell)) {
      out.terminated = true;
      out.time_years = t / kSecondsPerYear;
      return out;
    }
  }
  out.time_years = t / kSecondsPerYear;
  return out;
}

// ----------------------------------------------------------- affine model

AffineProblem make_affine_problem(std::uint64_t seed, int n_wells) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  AffineProblem pb;
  pb.a.resize(n_wells, 4);
  pb.b.resize(n_wells);
  pb.heads_obs.resize(n_wells);
  const Eigen::Vector4d p_star(1.0, 2.0, 3.5, 0.7);
  for (int i = 0; i < n_wells; ++i) {
    for (int j = 0; j < 4; ++j) pb.a(i, j) = z(rng);
    pb.b(i) = 50.0 + z(rng);
  }
  for (int j = 0; j < 4; ++j) pb.c(j) = 0.5 * z(rng);
  pb.d = 1.0;
  pb.sigma_h = 0.4;
  pb.sigma_hpas = 0.33;
  for (int i = 0; i < n_wells; ++i) pb.heads_obs(i) = pb.a.row(i).dot(p_star) + pb.b(i) + pb.sigma_h * z(rng);
  pb.hpas_obs = pb.c.dot(p_star) + pb.d + pb.sigma_hpas * z(rng);
  pb.p0 = p_star + Eigen::Vector4d(0.1, -0.2, 0.3, 0.05);
  return pb;
}

LinearGaussian affine_closed_form(const AffineProblem& pb) {
  const auto nb = pb.a.rows();
  Eigen::MatrixXd w(nb + 1, 4);
  Eigen::VectorXd y(nb + 1);
  w.topRows(nb) = pb.a / pb.sigma_h;
  y.head(nb) = (pb.heads_obs - pb.b) / pb.sigma_h;
  w.row(nb) = pb.c / pb.sigma_hpas;
  y(nb) = (pb.hpas_obs - pb.d) / pb.sigma_hpas;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
  LinearGaussian lg;
  lg.mean = qr.solve(y);
  const Eigen::Matrix4d r = qr.matrixQR().topRows(4).triangularView<Eigen::Upper>();
  const Eigen::Matrix4d r_inv = r.inverse();
  lg.cov = r_inv * r_inv.transpose();
  return lg;
}

AffineLaplaceCheck check_affine_laplace(std::uint64_t seed, int n_wells) {
  const AffineProblem pb = make_affine_problem(seed, n_wells);
  const LinearGaussian exact = affine_closed_form(pb);
  auto respond = [&](const ParameterVector& p) {
    const Eigen::Vector4d v(p[0], p[1], p[2], p[3]);
    const Eigen::VectorXd h = pb.a * v + pb.b;
    return Responses{std::vector<double>(h.data(), h.data() + h.size()), pb.c.dot(v) + pb.d};
  };
  const ParameterVector p0{pb.p0(0), pb.p0(1), pb.p0(2), pb.p0(3)};
  const ResponseJacobians jac = jacobian_responses(respond, p0, 2e-4);
  const Eigen::Matrix4d hess = gauss_newton_hessian(jac, pb.sigma_h, pb.sigma_hpas);
  const Eigen::Matrix4d cov = posterior_covariance(hess);

  // One Gauss-Newton step from p0 lands on the mode of an affine model.
  const Responses r0 = respond(p0);
  const Eigen::VectorXd res_h = pb.heads_obs - Eigen::Map<const Eigen::VectorXd>(r0.heads.data(), n_wells);
  const double res_hpas = pb.hpas_obs - r0.hpas;
  const Eigen::Vector4d grad = jac.j_h.transpose() * res_h / (pb.sigma_h * pb.sigma_h) +
                               jac.j_hpas.transpose() * res_hpas / (pb.sigma_hpas * pb.sigma_hpas);
  const Eigen::Vector4d mode = pb.p0 + cov * grad;

  AffineLaplaceCheck out;
  out.mean_rel_err = (mode - exact.mean).norm() / exact.mean.norm();
  out.cov_rel_err = (cov - exact.cov).norm() / exact.cov.norm();

  // Brute-force central-difference Hessian of the NLL at the exact mode.
  auto nll = [&](const Eigen::Vector4d& v) {
    const Responses r = respond(ParameterVector{v(0), v(1), v(2), v(3)});
    std::vector<double> obs(pb.heads_obs.data(), pb.heads_obs.data() + n_wells);
    const double ssr = sum_squared_residuals(r.heads, obs);
    return nll_from_residuals(ssr, r.hpas - pb.hpas_obs, static_cast<std::size_t>(n_wells), pb.sigma_h,
                              pb.sigma_hpas);
  };
  Eigen::Matrix4d fd;
  const double step = 1e-3;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      Eigen::Vector4d ei = Eigen::Vector4d::Zero(), ej = Eigen::Vector4d::Zero();
      ei(i) = step;
      ej(j) = step;
      const Eigen::Vector4d& m = exact.mean;
      fd(i, j) = (nll(m + ei + ej) - nll(m + ei - ej) - nll(m - ei + ej) + nll(m - ei - ej)) / (4 * step * step);
    }
  }
  out.hessian_rel_err = (hess - fd).norm() / fd.norm();
  return out;
}

}  // namespace gwbayes::testing
