#include "gwbayes/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gwbayes {

NelderMeadResult nelder_mead_minimize(const Objective& objective, std::vector<double> start,
                                      const std::vector<double>& steps, const NelderMeadOptions& opts) {
  const std::size_t n = start.size();
  if (steps.size() != n) throw std::invalid_argument("nelder_mead: steps and start differ in size");

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, start);
  std::vector<double> f(n + 1);
  f[0] = eval(start);
  if (!std::isfinite(f[0])) throw std::invalid_argument("nelder_mead: objective is not finite at the start point");
  for (std::size_t j = 0; j < n; ++j) {
    simplex[j + 1][j] += steps[j];
    f[j + 1] = eval(simplex[j + 1]);
    if (!std::isfinite(f[j + 1])) {
      simplex[j + 1][j] = start[j] - steps[j];
      f[j + 1] = eval(simplex[j + 1]);
    }
  }

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto point = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + t * (worst[k] - centroid[k]);
  };

  while (true) {
    std::iota(order.begin(), order.end(), 0);
    // Stable sort keeps ties in vertex order, so runs are reproducible.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    {
      std::vector<std::vector<double>> s2(n + 1);
      std::vector<double> f2(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        s2[i] = std::move(simplex[order[i]]);
        f2[i] = f[order[i]];
      }
      simplex = std::move(s2);
      f = std::move(f2);
    }

    double f_spread = 0.0;
    double x_spread = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      f_spread = std::max(f_spread, std::abs(f[i] - f[0]));
      for (std::size_t k = 0; k < n; ++k) x_spread = std::max(x_spread, std::abs(simplex[i][k] - simplex[0][k]));
    }
    if (std::isfinite(f_spread) && f_spread < opts.f_tol) {
      res.status = NelderMeadStatus::converged_f;
      break;
    }
    if (x_spread < opts.x_tol) {
      res.status = NelderMeadStatus::converged_x;
      break;
    }
    if (res.evaluations >= opts.max_evaluations) {
      res.status = NelderMeadStatus::max_evaluations;
      break;
    }
    ++res.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    const auto& worst = simplex[n];
    point(-1.0, trial, worst);
    const double fr = eval(trial);
    if (fr < f[0]) {
      point(-2.0, trial2, worst);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[n] = trial2;
        f[n] = fe;
      } else {
        simplex[n] = trial;
        f[n] = fr;
      }
      continue;
    }
    if (fr < f[n - 1]) {
      simplex[n] = trial;
      f[n] = fr;
      continue;
    }
    if (fr < f[n]) {
      point(-0.5, trial2, worst);  // outside contraction
      const double fc = eval(trial2);
      if (fc <= fr) {
        simplex[n] = trial2;
        f[n] = fc;
        continue;
      }
    } else {
      point(0.5, trial2, worst);  // inside contraction
      const double fc = eval(trial2);
      if (fc < f[n]) {
        simplex[n] = trial2;
        f[n] = fc;
        continue;
      }
    }
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
      f[i] = eval(simplex[i]);
    }
  }

  res.x = simplex[0];
  res.value = f[0];
  return res;
}

}  // namespace gwbayes
