#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gwbayes/nelder_mead.hpp"

using namespace gwbayes;

namespace {

NelderMeadOptions tight() {
  NelderMeadOptions o;
  o.f_tol = 1e-16;
  o.x_tol = 1e-10;
  o.max_evaluations = 5000;
  return o;
}

}  // namespace

TEST_CASE("convex quadratic in four dimensions") {
  const std::vector<double> c{-2.0, 0.5, 3.0, -7.0};
  auto f = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) v += (j + 1.0) * (x[j] - c[j]) * (x[j] - c[j]);
    return v;
  };
  const auto r = nelder_mead_minimize(f, {0, 0, 0, 0}, {1, 1, 1, 1}, tight());
  for (std::size_t j = 0; j < 4; ++j) CHECK(r.x[j] == doctest::Approx(c[j]).epsilon(1e-6));
  CHECK(r.value < 1e-10);
  CHECK(r.status != NelderMeadStatus::max_evaluations);
}

TEST_CASE("Rosenbrock from the classic start") {
  auto f = [](const std::vector<double>& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const auto r = nelder_mead_minimize(f, {-1.2, 1.0}, {0.1, 0.1}, tight());
  CHECK(std::abs(r.x[0] - 1.0) < 1e-4);
  CHECK(std::abs(r.x[1] - 1.0) < 1e-4);
}

TEST_CASE("infinite values act as walls") {
  // Unconstrained minimum at (-1, -1) lies outside the feasible quadrant.
  auto f = [](const std::vector<double>& x) {
    if (x[0] < 0.0 || x[1] < 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(x[0] + 1.0, 2) + std::pow(x[1] + 1.0, 2);
  };
  const auto r = nelder_mead_minimize(f, {2.0, 3.0}, {0.5, 0.5}, tight());
  CHECK(r.x[0] >= 0.0);
  CHECK(r.x[1] >= 0.0);
  CHECK(std::isfinite(r.value));
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("infeasible initial vertex flips direction") {
  auto f = [](const std::vector<double>& x) {
    if (x[0] > 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(x[0] + 3.0, 2);
  };
  const auto r = nelder_mead_minimize(f, {0.0}, {1.0}, tight());
  CHECK(r.x[0] == doctest::Approx(-3.0).epsilon(1e-6));
}

TEST_CASE("evaluation budget is respected") {
  auto f = [](const std::vector<double>& x) { return std::pow(x[0] - 100.0, 2); };
  NelderMeadOptions o;
  o.max_evaluations = 20;
  const auto r = nelder_mead_minimize(f, {0.0}, {1e-3}, o);
  CHECK(r.evaluations <= 20);
  CHECK(r.status == NelderMeadStatus::max_evaluations);
}

TEST_CASE("non-finite start is rejected") {
  auto f = [](const std::vector<double>&) { return std::numeric_limits<double>::infinity(); };
  CHECK_THROWS_AS(nelder_mead_minimize(f, {0.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
  auto g = [](const std::vector<double>&) { return std::nan(""); };
  CHECK_THROWS_AS(nelder_mead_minimize(g, {0.0}, {1.0}), std::invalid_argument);
}
