#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of them calls into the solver, tracker or Laplace code paths
// they check.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gwbayes/model.hpp"
#include "gwbayes/tracking.hpp"

namespace gwbayes::testing {

/// Single-zone slab: every layer `layer_thickness` thick below a flat surface
/// at `top`, no boundary conditions, zero recharge.
Scenario slab(int n_layers, int n_rows, int n_cols, double dx, double dy, double top, double layer_thickness);

/// Confined steady heads by assembling the full dense FD matrix from first
/// principles and solving it with a full-pivot LU. Drains are handled with a
/// brute-force active-set loop.
std::vector<double> dense_confined_heads(const Scenario& s, const ParameterVector& p);

double max_relative_difference(const std::vector<double>& a, const std::vector<double>& b,
                               const std::vector<std::uint8_t>& mask);

/// Five manufactured confined problems covering CHD, GHB, drains, zones,
/// several layers and non-uniform recharge.
std::vector<Scenario> manufactured_confined_problems();

/// Adaptive Dormand-Prince integration of dx/dt = v(x)/n through the same
/// cell-wise linear velocity field, crossing faces by bisection on the step.
struct OdeTrack {
  double time_years = 0.0;
  bool terminated = false;  // reached a sink or the domain boundary
  bool start_in_sink = false;
  Position end;
};
OdeTrack ode_track(const VelocityField& vf, const Position& start, double max_time_years = 1e4, double rel_tol = 1e-11);

/// Manufactured affine response model r(p) = A p + b with a scalar H_PAS
/// response c.p + d and data generated at p_star plus fixed perturbations.
struct AffineProblem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::RowVector4d c;
  double d = 0.0;
  Eigen::VectorXd heads_obs;
  double hpas_obs = 0.0;
  double sigma_h = 0.0;
  double sigma_hpas = 0.0;
  Eigen::Vector4d p0;  // linearization point for the Gauss-Newton step
};
AffineProblem make_affine_problem(std::uint64_t seed, int n_wells);

/// Closed-form linear-Gaussian posterior of the affine problem under a flat
/// prior, solved by QR on the whitened stacked system.
struct LinearGaussian {
  Eigen::Vector4d mean;
  Eigen::Matrix4d cov;
};
LinearGaussian affine_closed_form(const AffineProblem& pb);

/// Outcome of running the library's Laplace pipeline on the affine problem.
struct AffineLaplaceCheck {
  double mean_rel_err = 0.0;
  double cov_rel_err = 0.0;
  double hessian_rel_err = 0.0;  // Gauss-Newton vs brute-force FD Hessian of the NLL
};
AffineLaplaceCheck check_affine_laplace(std::uint64_t seed, int n_wells);

/// Flow-solver oracle suite shared by the unit tests and the acceptance
/// binary: worst relative difference to the dense oracle, the parabola
/// error, the error ratio under one grid halving and the worst relative
/// imbalance over `fixtures` and the manufactured problems.
struct SolverOracleReport {
  double worst_dense_rel = 0.0;
  double parabola_max_error = 0.0;
  double refinement_ratio = 0.0;
  double worst_imbalance = 0.0;
  std::string detail;
};
SolverOracleReport run_solver_oracles(const std::vector<Scenario>& fixtures);

/// Max-norm nodal error of a confined 1-D row between two CHD cells with
/// uniform recharge W against h(x) = h0 + (hL - h0) x / L + (W / 2 T) x (L - x).
double parabola_error(int n_interior);
/// Same row with recharge W0 sin(pi x / L); the analytic solution is
/// h0 + (hL - h0) x / L + W0 L^2 / (pi^2 T) sin(pi x / L).
double sine_recharge_error(int n_interior);

}  // namespace gwbayes::testing
