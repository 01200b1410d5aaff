#pragma once

// Derivative-free simplex minimization (Nelder and Mead, 1965) with the
// standard coefficients: reflection 1, expansion 2, contraction 1/2,
// shrink 1/2. Infinite objective values are accepted and act as walls.

#include <functional>
#include <vector>

namespace gwbayes {

struct NelderMeadOptions {
  double f_tol = 1e-8;      // stop when max |f_i - f_best| < f_tol
  double x_tol = 1e-6;      // stop when max |x_i - x_best|_inf < x_tol
  int max_evaluations = 500;
};

enum class NelderMeadStatus { converged_f, converged_x, max_evaluations };

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  NelderMeadStatus status = NelderMeadStatus::max_evaluations;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// `steps[j]` is the offset of the j-th initial vertex along axis j. When that
/// vertex is infeasible (+inf) the opposite direction is tried. Throws
/// std::invalid_argument when the objective is not finite at `start`.
NelderMeadResult nelder_mead_minimize(const Objective& objective, std::vector<double> start,
                                      const std::vector<double>& steps, const NelderMeadOptions& opts = {});

}  // namespace gwbayes
