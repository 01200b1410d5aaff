#include "gwbayes/laplace.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <optional>

#include "gwbayes/error.hpp"
#include "gwbayes/parallel.hpp"
#include "gwbayes/text.hpp"

namespace gwbayes {

namespace {

// D^-1/2 for a matrix with non-negative diagonal; zero entries stay zero.
Eigen::Vector4d inverse_sqrt_diagonal(const Eigen::Matrix4d& m) {
  Eigen::Vector4d s;
  for (int j = 0; j < 4; ++j) s[j] = m(j, j) > 0.0 ? 1.0 / std::sqrt(m(j, j)) : 0.0;
  return s;
}

std::string describe(double v) {
  return format_double(v);
}

}  // namespace

ResponseJacobians jacobian_responses(const ResponseFn& responses, const ParameterVector& mu, double step_fraction,
                                     int workers) {
  if (!all_positive(mu)) throw ValidationError("jacobian: mu must be strictly positive");
  if (!(step_fraction > 0.0)) throw ValidationError("jacobian: step_fraction > 0");

  ResponseJacobians jac;
  jac.step_fraction = step_fraction;
  std::array<ParameterVector, 5> points;
  points[0] = mu;
  for (std::size_t j = 0; j < 4; ++j) {
    jac.steps[j] = step_fraction * mu[j];
    points[j + 1] = mu;
    points[j + 1][j] = mu[j] + jac.steps[j];
    jac.probe_unordered[j] = !validate_ordering(points[j + 1]);
  }

  const auto results = parallel_map(5, workers, [&](std::size_t i) -> std::optional<Responses> {
    try {
      return responses(points[i]);
    } catch (const Error&) {
      return std::nullopt;
    }
  });
  if (!results[0]) throw Error("jacobian: evaluation at mu failed");
  const std::size_t nb = results[0]->heads.size();

  std::string failed;
  for (std::size_t j = 0; j < 4; ++j) {
    if (!results[j + 1] || results[j + 1]->heads.size() != nb) {
      failed += (failed.empty() ? "" : ", ") + std::string(kParameterNames[j]);
    }
  }
  if (!failed.empty()) throw Error("jacobian: perturbed evaluation failed for column(s) " + failed);

  jac.j_h.resize(static_cast<Eigen::Index>(nb), 4);
  for (std::size_t j = 0; j < 4; ++j) {
    const Responses& r = *results[j + 1];
    for (std::size_t i = 0; i < nb; ++i) {
      jac.j_h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (r.heads[i] - results[0]->heads[i]) / jac.steps[j];
    }
    jac.j_hpas[static_cast<Eigen::Index>(j)] = (r.hpas - results[0]->hpas) / jac.steps[j];
  }
  if (!jac.j_h.allFinite() || !jac.j_hpas.allFinite()) throw Error("jacobian: non-finite entries");
  return jac;
}

ResponseJacobians jacobian_responses(const ForwardModel& model, const ParameterVector& mu, double step_fraction,
                                     int workers) {
  // Probes may leave the ordering cone; the response surface is still
  // smooth there, so the solve is run without the ordering penalty.
  return jacobian_responses(
      [&](const ParameterVector& p) {
        const auto r = model.evaluate(p);
        if (!r->converged) throw Error("forward solve did not converge");
        return Responses{r->heads, r->hpas};
      },
      mu, step_fraction, workers);
}

Eigen::Matrix4d gauss_newton_hessian(const ResponseJacobians& jac, double sigma_h, double sigma_hpas) {
  if (!(sigma_h > 0.0) || !(sigma_hpas > 0.0)) throw ValidationError("gauss_newton_hessian: sigmas must be > 0");
  Eigen::Matrix4d h = jac.j_h.transpose() * jac.j_h / (sigma_h * sigma_h);
  h += jac.j_hpas.transpose() * jac.j_hpas / (sigma_hpas * sigma_hpas);
  return 0.5 * (h + h.transpose());
}

Eigen::Matrix4d posterior_covariance(const Eigen::Matrix4d& hess_in, const CovarianceOptions& opts) {
  if (!hess_in.allFinite()) throw HessianError("Hessian has non-finite entries", std::nan(""));
  const double scale = hess_in.cwiseAbs().maxCoeff();
  if (!((hess_in - hess_in.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale)) {
    throw ValidationError("posterior_covariance: Hessian is not symmetric");
  }
  Eigen::Matrix4d hess = 0.5 * (hess_in + hess_in.transpose());
  if (opts.ridge > 0.0) hess.diagonal() *= 1.0 + opts.ridge;

  for (int j = 0; j < 4; ++j) {
    if (!(hess(j, j) > 0.0)) {
      throw HessianError("Hessian is singular: no curvature along " + std::string(kParameterNames[j]) +
                             " (diagonal " + describe(hess(j, j)) + ")",
                         hess(j, j));
    }
  }
  const Eigen::Vector4d d = inverse_sqrt_diagonal(hess);
  const Eigen::Matrix4d scaled = d.asDiagonal() * hess * d.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(scaled);
  const Eigen::Vector4d lambda = es.eigenvalues();
  if (!(lambda[0] > opts.rank_tol * lambda[3])) {
    throw HessianError("Hessian is singular or indefinite: smallest scaled eigenvalue " + describe(lambda[0]) +
                           " against largest " + describe(lambda[3]),
                       lambda[0]);
  }
  const Eigen::Matrix4d inv_scaled =
      es.eigenvectors() * lambda.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  Eigen::Matrix4d sigma = d.asDiagonal() * inv_scaled * d.asDiagonal();
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::Vector4d PosteriorGaussian::eigenvalues() const {
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(sigma, Eigen::EigenvaluesOnly).eigenvalues();
}

double PosteriorGaussian::condition_number() const {
  const Eigen::Vector4d ev = eigenvalues();
  return ev[0] > 0.0 ? ev[3] / ev[0] : std::numeric_limits<double>::infinity();
}

void PosteriorGaussian::validate(bool allow_degenerate) const {
  if (!all_positive(mu)) throw ValidationError("posterior: mu must be strictly positive");
  if (!sigma.allFinite()) throw ValidationError("posterior: sigma has non-finite entries");
  const double scale = sigma.cwiseAbs().maxCoeff();
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError("posterior: sigma is not symmetric");
  }
  for (int j = 0; j < 4; ++j) {
    if (sigma(j, j) < 0.0 || (!allow_degenerate && sigma(j, j) == 0.0)) {
      throw ValidationError("posterior: sigma diagonal must be > 0");
    }
  }
  // Definiteness is judged on the correlation-scaled matrix.
  const Eigen::Vector4d d = inverse_sqrt_diagonal(sigma);
  const Eigen::Matrix4d c = d.asDiagonal() * sigma * d.asDiagonal();
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(c, Eigen::EigenvaluesOnly).eigenvalues()[0];
  if (allow_degenerate ? lmin < -1e-12 : !(lmin > 0.0)) {
    throw ValidationError("posterior: sigma is not positive definite (scaled eigenvalue " + describe(lmin) + ")");
  }
}

LaplaceResult laplace_posterior(const ForwardModel& model, const ObservationSet& obs, const ParameterVector& mu,
                                double sigma_h, double step_fraction, const CovarianceOptions& opts, int workers) {
  LaplaceResult out;
  out.jacobians = jacobian_responses(model, mu, step_fraction, workers);
  if (static_cast<std::size_t>(out.jacobians.j_h.rows()) != obs.wells.size()) {
    throw ValidationError("laplace: model wells and observations differ in size");
  }
  out.hessian = gauss_newton_hessian(out.jacobians, sigma_h, obs.sigma_hpas);
  out.posterior.mu = mu;
  out.posterior.sigma = posterior_covariance(out.hessian, opts);
  out.posterior.sigma_h_hat = sigma_h;
  return out;
}

std::string posterior_to_json(const PosteriorGaussian& pg) {
  nlohmann::ordered_json doc;
  doc["mu"] = pg.mu.as_array();
  std::vector<double> flat;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) flat.push_back(pg.sigma(i, j));
  }
  doc["sigma"] = flat;
  doc["sigma_h_hat"] = pg.sigma_h_hat;
  const Eigen::Vector4d ev = pg.eigenvalues();
  doc["eigenvalues"] = std::vector<double>(ev.data(), ev.data() + 4);
  const double cond = pg.condition_number();
  if (std::isfinite(cond)) {
    doc["condition_number"] = cond;
  } else {
    doc["condition_number"] = nullptr;
  }
  doc["parameters"] = std::vector<std::string>(kParameterNames.begin(), kParameterNames.end());
  return doc.dump(2) + "\n";
}

PosteriorGaussian posterior_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("posterior: ") + e.what());
  }
  PosteriorGaussian pg;
  try {
    const auto mu = doc.at("mu").get<std::vector<double>>();
    const auto sigma = doc.at("sigma").get<std::vector<double>>();
    if (mu.size() != 4) throw ParseError("posterior: mu needs 4 values", 0, "mu");
    if (sigma.size() != 16) throw ParseError("posterior: sigma needs 16 values", 0, "sigma");
    for (std::size_t j = 0; j < 4; ++j) pg.mu[j] = mu[j];
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) pg.sigma(i, j) = sigma[static_cast<std::size_t>(4 * i + j)];
    }
    pg.sigma_h_hat = doc.value("sigma_h_hat", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("posterior: ") + e.what());
  }
  pg.validate(true);
  return pg;
}

PosteriorGaussian load_posterior(const std::string& path) {
  return posterior_from_json(read_text_file(path));
}

}  // namespace gwbayes
