#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gwbayes/error.hpp"
#include "gwbayes/scenario_io.hpp"
#include "gwbayes/uq.hpp"
#include "test_paths.hpp"

using namespace gwbayes;

namespace {

const ParameterVector kTrue = ParameterVector::base_case();

SolverOptions confined() {
  SolverOptions o;
  o.mode = SolverMode::confined_linear;
  return o;
}

PosteriorGaussian diagonal_posterior(const ParameterVector& mu, double rel_sd) {
  PosteriorGaussian pg;
  pg.mu = mu;
  for (std::size_t j = 0; j < 4; ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    pg.sigma(i, i) = std::pow(rel_sd * mu[j], 2);
  }
  pg.sigma_h_hat = 0.5;
  return pg;
}

}  // namespace

TEST_CASE("identifiability metrics") {
  SUBCASE("exact mean with zero covariance") {
    const auto m = identifiability_metrics(kTrue, Eigen::Matrix4d::Zero(), kTrue, PriorBox::reference());
    for (const auto& x : m) {
      CHECK(x.ratio_to_true == 1.0);
      CHECK(x.coefficient_of_variation == 0.0);
      CHECK(x.variance_reduction_ratio == 0.0);
      CHECK(x.truth_in_2sigma);
    }
  }
  SUBCASE("unit prior interval and variance 1/120") {
    PriorBox box;
    for (auto& b : box.bounds) b = {0.0, 1.0};
    const ParameterVector mu{0.2, 0.4, 0.6, 0.8};
    const Eigen::Matrix4d sigma = Eigen::Matrix4d::Identity() / 120.0;
    const auto m = identifiability_metrics(mu, sigma, {0.1, 0.4, 0.9, 0.8}, box);
    for (const auto& x : m) CHECK(x.variance_reduction_ratio == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(m[0].ratio_to_true == doctest::Approx(2.0));
    CHECK(m[1].coefficient_of_variation == doctest::Approx(std::sqrt(1.0 / 120.0) / 0.4));
    // sd = 0.0913: 0.1 lies within 2 sd of 0.2, 0.9 does not lie within 2 sd of 0.6.
    CHECK(m[0].truth_in_2sigma);
    CHECK_FALSE(m[2].truth_in_2sigma);
  }
}

TEST_CASE("posterior sampling") {
  SUBCASE("zero covariance returns the mean") {
    PosteriorGaussian pg;
    pg.mu = kTrue;
    const auto s = sample_posterior(pg, 50, 3);
    REQUIRE(s.draws.size() == 50);
    for (const auto& d : s.draws) CHECK(d == kTrue);
    CHECK(s.rejections == 0);
  }
  SUBCASE("Monte Carlo moments of a well-separated diagonal posterior") {
    const PosteriorGaussian pg = diagonal_posterior({1.0, 2.0, 3.0, 4.0}, 0.05);
    const std::size_t n = 100000;
    const auto s = sample_posterior(pg, n, 99);
    CHECK(s.rejections == 0);
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    for (const auto& d : s.draws) mean += Eigen::Vector4d(d[0], d[1], d[2], d[3]);
    mean /= static_cast<double>(n);
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    for (const auto& d : s.draws) {
      const Eigen::Vector4d e = Eigen::Vector4d(d[0], d[1], d[2], d[3]) - mean;
      cov += e * e.transpose();
    }
    cov /= static_cast<double>(n - 1);
    for (int j = 0; j < 4; ++j) {
      CHECK(std::abs(mean[j] - pg.mu[static_cast<std::size_t>(j)]) <= 4.0 * std::sqrt(pg.sigma(j, j) / n));
      CHECK(std::abs(cov(j, j) / pg.sigma(j, j) - 1.0) < 0.05);
      for (int k = 0; k < j; ++k) CHECK(std::abs(cov(j, k)) < 0.05 * std::sqrt(pg.sigma(j, j) * pg.sigma(k, k)));
    }
  }
  SUBCASE("correlated covariance is reproduced") {
    PosteriorGaussian pg = diagonal_posterior({1.0, 2.0, 3.0, 4.0}, 0.05);
    pg.sigma(0, 1) = pg.sigma(1, 0) = 0.6 * std::sqrt(pg.sigma(0, 0) * pg.sigma(1, 1));
    const std::size_t n = 100000;
    const auto s = sample_posterior(pg, n, 5);
    double m0 = 0, m1 = 0, c01 = 0;
    for (const auto& d : s.draws) m0 += d[0], m1 += d[1];
    m0 /= n;
    m1 /= n;
    for (const auto& d : s.draws) c01 += (d[0] - m0) * (d[1] - m1);
    c01 /= static_cast<double>(n - 1);
    CHECK(std::abs(c01 / pg.sigma(0, 1) - 1.0) < 0.05);
  }
  SUBCASE("draws are independent of n") {
    const PosteriorGaussian pg = diagonal_posterior(kTrue, 0.1);
    const auto a = sample_posterior(pg, 10, 7), b = sample_posterior(pg, 20, 7);
    for (std::size_t i = 0; i < 10; ++i) CHECK(a.draws[i] == b.draws[i]);
  }
  SUBCASE("constraints are enforced") {
    const PosteriorGaussian pg = diagonal_posterior({1e-4, 1.1e-4, 5e-3, 1e-8}, 0.3);
    const auto s = sample_posterior(pg, 2000, 8);
    CHECK(s.rejections > 0);
    for (const auto& d : s.draws) {
      CHECK(validate_ordering(d));
      CHECK(all_positive(d));
    }
  }
  SUBCASE("hopeless acceptance rate") {
    PosteriorGaussian pg;
    pg.mu = {2e-4, 1e-4, 5e-3, 1e-8};  // unordered mean, zero spread
    CHECK_THROWS_AS(sample_posterior(pg, 1, 1, 10), SamplingError);
  }
}

TEST_CASE("percentile convention") {
  CHECK(percentile({10.0}, 37.0) == 10.0);
  CHECK(percentile({1, 2, 3, 4, 5}, 50.0) == 3.0);
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  CHECK(percentile(hundred, 75.0) == doctest::Approx(75.25).epsilon(1e-15));
  CHECK(percentile(hundred, 99.0) == doctest::Approx(99.01).epsilon(1e-15));
  CHECK_THROWS(percentile({}, 50.0));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 6.0}) == 5.0);
}

TEST_CASE("ensemble summary") {
  TravelTimeEnsemble ens;
  ens.levels = {25, 50};
  Realization a;
  a.ok = true;
  a.percentiles = {2.0, 4.0};
  a.percent_under_threshold = 30.0;
  Realization b = a;
  b.percentiles = {3.0, 6.0};
  b.percent_under_threshold = 10.0;
  SUBCASE("single realization") {
    ens.realizations = {a};
    const auto s = ensemble_summary(ens);
    for (const auto& row : s.percentiles) {
      CHECK(row.median == row.min);
      CHECK(row.max == row.min);
    }
  }
  SUBCASE("two realizations") {
    ens.realizations = {a, b};
    const auto s = ensemble_summary(ens);
    CHECK(s.percentiles[1].median == 5.0);
    CHECK(s.percentiles[1].min == 4.0);
    CHECK(s.percentiles[1].max == 6.0);
    CHECK(s.under_threshold.median == 20.0);
  }
  SUBCASE("failed realizations are excluded and counted") {
    Realization bad;
    bad.error = "solver failed";
    ens.realizations = {a, bad};
    const auto s = ensemble_summary(ens);
    CHECK(s.n_requested == 2);
    CHECK(s.n_succeeded == 1);
    CHECK(s.percentiles[1].median == 4.0);
    ens.realizations = {bad};
    CHECK_THROWS_AS(ensemble_summary(ens), Error);
  }
}

TEST_CASE("histogram bins") {
  const auto bins = histogram({0.12, 0.13, 0.31}, 0.1);
  REQUIRE(bins.size() == 3);
  CHECK(bins[0].low == doctest::Approx(0.1));
  CHECK(bins[0].count == 2);
  CHECK(bins[1].count == 0);
  CHECK(bins[2].count == 1);
  std::size_t total = 0;
  for (const auto& b : histogram({1, 2, 3, 4, 5, 6, 7}, 0.5)) total += b.count;
  CHECK(total == 7);
  CHECK(histogram({}, 1.0).empty());
  CHECK_THROWS_AS(histogram({1.0}, 0.0), ValidationError);
}

TEST_CASE("forward UQ on the valley") {
  const Scenario s = load_scenario(data_path("valley_small.json"));
  ForwardUqOptions o;
  o.n_draws = 6;
  o.release_spacing = 5;
  o.seed = 12;
  o.solver = confined();

  SUBCASE("zero covariance collapses the ensemble onto the nominal run") {
    PosteriorGaussian pg;
    pg.mu = kTrue;
    const auto ens = forward_uq(s, pg, o);
    const auto nominal = run_realization(s, kTrue, o);
    REQUIRE(ens.realizations.size() == 6);
    for (const auto& r : ens.realizations) {
      CHECK(r.percentiles == nominal.percentiles);
      CHECK(r.percent_under_threshold == nominal.percent_under_threshold);
    }
    const auto sum = ensemble_summary(ens);
    for (const auto& row : sum.percentiles) CHECK(row.max - row.min == 0.0);
    CHECK(sum.under_threshold.max - sum.under_threshold.min == 0.0);
  }
  SUBCASE("spread, monotone percentiles and worker independence") {
    const PosteriorGaussian pg = diagonal_posterior(kTrue, 0.1);
    const auto ens = forward_uq(s, pg, o);
    for (const auto& r : ens.realizations) {
      REQUIRE(r.ok);
      for (std::size_t k = 1; k < r.percentiles.size(); ++k) CHECK(r.percentiles[k - 1] <= r.percentiles[k]);
      CHECK(r.times.size() + r.n_zero_excluded == r.n_released);
      CHECK(std::is_sorted(r.times.begin(), r.times.end()));
    }
    const auto sum = ensemble_summary(ens);
    for (const auto& row : sum.percentiles) {
      CHECK(row.min <= row.median);
      CHECK(row.median <= row.max);
    }
    for (std::size_t k = 1; k < sum.percentiles.size(); ++k) CHECK(sum.percentiles[k - 1].median <= sum.percentiles[k].median);

    ForwardUqOptions o3 = o;
    o3.workers = 3;
    const auto ens3 = forward_uq(s, pg, o3);
    CHECK(ensemble_percentiles_csv(ens3) == ensemble_percentiles_csv(ens));
    CHECK(cdf_long_csv(ens3) == cdf_long_csv(ens));
    CHECK(ensemble_summary_json(ens3, ensemble_summary(ens3)) == ensemble_summary_json(ens, sum));

    // Realization i depends on draw i only.
    const auto draws = sample_posterior(pg, o.n_draws, o.seed, o.max_rejects);
    const auto r4 = run_realization(s, draws.draws[4], o);
    CHECK(r4.percentiles == ens.realizations[4].percentiles);
  }
  SUBCASE("single draw") {
    o.n_draws = 1;
    const auto ens = forward_uq(s, diagonal_posterior(kTrue, 0.1), o);
    const auto sum = ensemble_summary(ens);
    for (std::size_t k = 0; k < sum.percentiles.size(); ++k) {
      CHECK(sum.percentiles[k].median == ens.realizations[0].percentiles[k]);
      CHECK(sum.percentiles[k].min == sum.percentiles[k].max);
    }
  }
}

TEST_CASE("identifiability study bookkeeping") {
  const Scenario s = load_scenario(data_path("valley_small.json"));
  IdentifiabilityOptions o;
  o.noise_levels = {0.5, 2.0};
  o.replicates = 2;
  o.seed = 4;
  o.sigma_grid = {0.5, 2.0};
  o.calibration.scan = {{2, 1, 2, 2}};
  o.calibration.n_starts = 1;
  o.calibration.simplex.max_evaluations = 60;
  o.solver = confined();
  const auto rep = identifiability_study(s, kTrue, o);
  REQUIRE(rep.cells.size() == 4);
  CHECK(rep.cells[0].noise_level == 0.5);
  CHECK(rep.cells[3].replicate == 1);
  const std::string csv = identifiability_report_csv(rep);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 4);
  for (const auto& c : rep.cells) {
    if (!c.has_posterior) continue;
    for (const auto& m : c.metrics) {
      CHECK(m.ratio_to_true > 0.0);
      CHECK(m.coefficient_of_variation >= 0.0);
    }
  }
  o.workers = 2;
  CHECK(identifiability_report_csv(identifiability_study(s, kTrue, o)) == csv);
}
