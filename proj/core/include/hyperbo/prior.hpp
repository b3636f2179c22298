#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hyperbo/gp.hpp"
#include "hyperbo/random.hpp"

namespace hyperbo {

struct NormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};

// Shape/rate convention: mean = alpha / beta.
struct GammaParams {
  double alpha = 1.0;
  double beta = 1.0;
  [[nodiscard]] double mean() const noexcept { return alpha / beta; }
};

// Universal prior over GP parameters. All components are independent and a
// single lengthscale distribution is shared by every input dimension.
struct HyperPrior {
  NormalParams constant_mean_prior;
  GammaParams lengthscale_prior;
  GammaParams signal_variance_prior;
  GammaParams noise_variance_prior;
};

// Uniform distribution over a finite set of fitted parameter sets.
struct DiscretePrior {
  std::vector<GpParams> atoms;
};

struct UniformRange {
  double low = 0.0;
  double high = 1.0;
};

// Independent uniforms on each parameter family.
struct UniformBoxPrior {
  UniformRange constant_mean;
  UniformRange lengthscale;
  UniformRange signal_variance;
  UniformRange noise_variance;
};

using PriorSource = std::variant<HyperPrior, DiscretePrior, UniformBoxPrior>;

inline constexpr double kSigmaFloor = 1e-3;

// Generating prior of the synthetic super-dataset.
[[nodiscard]] HyperPrior synthetic_ground_truth_prior();
// Fixed, deliberately misspecified baseline prior.
[[nodiscard]] HyperPrior hand_specified_prior();
[[nodiscard]] UniformBoxPrior non_informative_prior();

[[nodiscard]] std::string describe(const PriorSource& prior);

// Draws (theta, sigma) for a search space of the given dimension.
//
// A DiscretePrior picks one atom uniformly; when the atom's dimension differs
// from dim, the dim lengthscales are resampled i.i.d. (with replacement) from
// that atom's own lengthscales.
[[nodiscard]] GpParams sample_gp_params(const PriorSource& prior, Eigen::Index dim, Rng& rng);

[[nodiscard]] double normal_log_pdf(double x, const NormalParams& p) noexcept;
// -inf outside the support.
[[nodiscard]] double gamma_log_pdf(double x, const GammaParams& p) noexcept;

// Sum of component log-densities; -inf when any value is out of support.
[[nodiscard]] double log_density(const HyperPrior& prior, const GpParams& params) noexcept;
[[nodiscard]] double log_density(const UniformBoxPrior& prior, const GpParams& params) noexcept;

[[nodiscard]] NormalParams fit_normal_mle(std::span<const double> samples);

// Gamma MLE by Newton iteration on the shape profile likelihood.
[[nodiscard]] GammaParams fit_gamma_mle(std::span<const double> samples);
[[nodiscard]] double gamma_log_likelihood(std::span<const double> samples, const GammaParams& p);

// Normal MLE over constant means, Gamma MLE over pooled lengthscales and
// over each variance family.
[[nodiscard]] HyperPrior fit_hyper_prior(std::span<const GpParams> fitted);

// -log mean_q exp(-x_q), evaluated stably. +inf when no term is finite.
[[nodiscard]] double neg_log_mean_exp_neg(std::span<const double> nlls) noexcept;

// Monte-Carlo marginal NLL of a dataset under a prior: q_samples parameter
// draws from the prior, each scored by dataset_nll, combined in the log
// domain. Draws whose Cholesky cannot be formed count as zero likelihood.
[[nodiscard]] double hierarchical_nll(const PriorSource& prior, std::span<const SubDataset> sds,
                                      int q_samples, Rng& rng, const KernelSpec& spec);

// {"constant_mean": {"mu", "sigma"}, "lengthscale": {"alpha", "beta"}, ...,
//  "convention": "rate"}
[[nodiscard]] std::string hyper_prior_to_json(const HyperPrior& prior, int indent = 2);
[[nodiscard]] HyperPrior hyper_prior_from_json(std::string_view text);

}  // namespace hyperbo
