#pragma once

// nlohmann/json adapters shared by the core translation units.

#include <json.hpp>

#include "hyperbo/error.hpp"
#include "hyperbo/gp.hpp"
#include "hyperbo/prior.hpp"

namespace hyperbo::detail {

using nlohmann::json;

inline json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline json gp_params_to_json(const GpParams& p) {
  return json{{"constant_mean", p.constant_mean},
              {"lengthscales", vector_to_json(p.lengthscales)},
              {"signal_variance", p.signal_variance},
              {"noise_variance", p.noise_variance}};
}

inline GpParams gp_params_from_json(const json& j) {
  GpParams p;
  p.constant_mean = j.at("constant_mean").get<double>();
  p.lengthscales = vector_from_json(j.at("lengthscales"));
  p.signal_variance = j.at("signal_variance").get<double>();
  p.noise_variance = j.at("noise_variance").get<double>();
  return p;
}

inline json hyper_prior_to_json_value(const HyperPrior& h) {
  auto gamma = [](const GammaParams& g) { return json{{"alpha", g.alpha}, {"beta", g.beta}}; };
  return json{{"constant_mean", {{"mu", h.constant_mean_prior.mu}, {"sigma", h.constant_mean_prior.sigma}}},
              {"lengthscale", gamma(h.lengthscale_prior)},
              {"signal_variance", gamma(h.signal_variance_prior)},
              {"noise_variance", gamma(h.noise_variance_prior)},
              {"convention", "rate"}};
}

inline HyperPrior hyper_prior_from_json_value(const json& j) {
  if (j.contains("convention") && j.at("convention") != "rate")
    throw ConfigError("hyper-prior JSON must use the rate convention");
  auto gamma = [](const json& g) { return GammaParams{g.at("alpha").get<double>(), g.at("beta").get<double>()}; };
  HyperPrior h;
  h.constant_mean_prior = {j.at("constant_mean").at("mu").get<double>(),
                           j.at("constant_mean").at("sigma").get<double>()};
  h.lengthscale_prior = gamma(j.at("lengthscale"));
  h.signal_variance_prior = gamma(j.at("signal_variance"));
  h.noise_variance_prior = gamma(j.at("noise_variance"));
  return h;
}

}  // namespace hyperbo::detail
