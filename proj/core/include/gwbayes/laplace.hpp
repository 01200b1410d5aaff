#pragma once

// Gaussian (Laplace) approximation of the posterior around its mode:
// forward-difference Jacobians, the Gauss-Newton Hessian
//
//   H = J_h^T J_h / sigma_h^2 + J_hpas^T J_hpas / sigma_hpas^2
//
// and its inverse.

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "gwbayes/inversion.hpp"
#include "gwbayes/model.hpp"

namespace gwbayes {

struct Responses {
  std::vector<double> heads;
  double hpas = 0.0;
};

using ResponseFn = std::function<Responses(const ParameterVector&)>;

struct ResponseJacobians {
  Eigen::MatrixXd j_h;        // nb x 4
  Eigen::RowVector4d j_hpas;  // 1 x 4
  double step_fraction = 2e-4;
  std::array<double, 4> steps{};
  std::array<bool, 4> probe_unordered{};  // probe crossed the ordering cone

  bool hpas_flat() const { return j_hpas.isZero(0.0); }
};

/// Column j is (r(mu + d_j e_j) - r(mu)) / d_j with d_j = step_fraction * mu_j.
/// The five evaluations run as independent jobs. Throws Error naming every
/// column whose perturbed evaluation failed.
ResponseJacobians jacobian_responses(const ResponseFn& responses, const ParameterVector& mu,
                                     double step_fraction = 2e-4, int workers = 1);
ResponseJacobians jacobian_responses(const ForwardModel& model, const ParameterVector& mu,
                                     double step_fraction = 2e-4, int workers = 1);

Eigen::Matrix4d gauss_newton_hessian(const ResponseJacobians& jac, double sigma_h, double sigma_hpas);

struct CovarianceOptions {
  double rank_tol = 1e-10;
  // When > 0, H + ridge * diag(H) is inverted instead of H. Off by default.
  double ridge = 0.0;
};

/// Inverse of a symmetric Hessian. The rank test is applied to the
/// Jacobi-scaled matrix D^-1/2 H D^-1/2 (D = diag H) so that the very
/// different parameter units do not masquerade as rank deficiency. Throws
/// HessianError carrying the smallest scaled eigenvalue when it is
/// <= rank_tol times the largest.
Eigen::Matrix4d posterior_covariance(const Eigen::Matrix4d& hess, const CovarianceOptions& opts = {});

struct PosteriorGaussian {
  ParameterVector mu;
  Eigen::Matrix4d sigma = Eigen::Matrix4d::Zero();
  double sigma_h_hat = 0.0;

  Eigen::Vector4d eigenvalues() const;  // ascending
  double condition_number() const;      // largest / smallest eigenvalue
  /// Symmetry, non-negative diagonal, and positive definiteness unless
  /// `allow_degenerate` (a zero covariance is then accepted).
  void validate(bool allow_degenerate = false) const;
};

struct LaplaceResult {
  PosteriorGaussian posterior;
  ResponseJacobians jacobians;
  Eigen::Matrix4d hessian;
};

LaplaceResult laplace_posterior(const ForwardModel& model, const ObservationSet& obs, const ParameterVector& mu,
                                double sigma_h, double step_fraction = 2e-4, const CovarianceOptions& opts = {},
                                int workers = 1);

std::string posterior_to_json(const PosteriorGaussian& pg);
PosteriorGaussian posterior_from_json(const std::string& text);
PosteriorGaussian load_posterior(const std::string& path);

}  // namespace gwbayes
