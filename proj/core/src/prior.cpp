#include "hyperbo/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "hyperbo/error.hpp"
#include "json_io.hpp"

namespace hyperbo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double draw_gamma(const GammaParams& g, Rng& rng) {
  return std::gamma_distribution<double>(g.alpha, 1.0 / g.beta)(rng);
}

double draw_uniform(const UniformRange& u, Rng& rng) {
  return std::uniform_real_distribution<double>(u.low, u.high)(rng);
}

double uniform_log_pdf(double x, const UniformRange& u) noexcept {
  if (x < u.low || x > u.high) return kNegInf;
  return -std::log(u.high - u.low);
}

}  // namespace

HyperPrior synthetic_ground_truth_prior() {
  return HyperPrior{{1.0, 1.0}, {10.0, 30.0}, {1.0, 1.0}, {10.0, 100000.0}};
}

HyperPrior hand_specified_prior() {
  return HyperPrior{{0.0, 1.0}, {1.0, 10.0}, {1.0, 5.0}, {10.0, 100.0}};
}

UniformBoxPrior non_informative_prior() {
  return UniformBoxPrior{{-100.0, 100.0}, {0.001, 10.0}, {1e-6, 100.0}, {1e-8, 100.0}};
}

std::string describe(const PriorSource& prior) {
  return std::visit(Overloaded{
                        [](const HyperPrior& h) {
                          std::ostringstream os;
                          os << "HyperPrior(mean~N(" << h.constant_mean_prior.mu << ","
                             << h.constant_mean_prior.sigma << "), ls~Gamma(" << h.lengthscale_prior.alpha
                             << "," << h.lengthscale_prior.beta << "))";
                          return os.str();
                        },
                        [](const DiscretePrior& d) {
                          return "DiscretePrior(" + std::to_string(d.atoms.size()) + " atoms)";
                        },
                        [](const UniformBoxPrior&) { return std::string("UniformBoxPrior"); },
                    },
                    prior);
}

GpParams sample_gp_params(const PriorSource& prior, Eigen::Index dim, Rng& rng) {
  if (dim < 1) throw ArgumentError("sample_gp_params: dim must be >= 1");
  return std::visit(
      Overloaded{
          [&](const HyperPrior& h) {
            GpParams p;
            p.constant_mean = std::normal_distribution<double>(h.constant_mean_prior.mu,
                                                               h.constant_mean_prior.sigma)(rng);
            p.lengthscales.resize(dim);
            for (Eigen::Index k = 0; k < dim; ++k) p.lengthscales[k] = draw_gamma(h.lengthscale_prior, rng);
            p.signal_variance = draw_gamma(h.signal_variance_prior, rng);
            p.noise_variance = draw_gamma(h.noise_variance_prior, rng);
            return p;
          },
          [&](const DiscretePrior& d) {
            if (d.atoms.empty()) throw ArgumentError("sample_gp_params: DiscretePrior has no atoms");
            const auto idx = std::uniform_int_distribution<std::size_t>(0, d.atoms.size() - 1)(rng);
            GpParams p = d.atoms[idx];
            if (p.dim() != dim) {
              const Eigen::VectorXd pool = p.lengthscales;
              std::uniform_int_distribution<Eigen::Index> pick(0, pool.size() - 1);
              p.lengthscales.resize(dim);
              for (Eigen::Index k = 0; k < dim; ++k) p.lengthscales[k] = pool[pick(rng)];
            }
            return p;
          },
          [&](const UniformBoxPrior& u) {
            GpParams p;
            p.constant_mean = draw_uniform(u.constant_mean, rng);
            p.lengthscales.resize(dim);
            for (Eigen::Index k = 0; k < dim; ++k) p.lengthscales[k] = draw_uniform(u.lengthscale, rng);
            p.signal_variance = draw_uniform(u.signal_variance, rng);
            p.noise_variance = draw_uniform(u.noise_variance, rng);
            return p;
          },
      },
      prior);
}

double normal_log_pdf(double x, const NormalParams& p) noexcept {
  const double z = (x - p.mu) / p.sigma;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(p.sigma) - 0.5 * z * z;
}

double gamma_log_pdf(double x, const GammaParams& p) noexcept {
  if (!(x > 0.0)) return kNegInf;
  return p.alpha * std::log(p.beta) - std::lgamma(p.alpha) + (p.alpha - 1.0) * std::log(x) - p.beta * x;
}

double log_density(const HyperPrior& prior, const GpParams& params) noexcept {
  double total = normal_log_pdf(params.constant_mean, prior.constant_mean_prior);
  for (Eigen::Index k = 0; k < params.lengthscales.size(); ++k)
    total += gamma_log_pdf(params.lengthscales[k], prior.lengthscale_prior);
  total += gamma_log_pdf(params.signal_variance, prior.signal_variance_prior);
  total += gamma_log_pdf(params.noise_variance, prior.noise_variance_prior);
  return std::isnan(total) ? kNegInf : total;
}

double log_density(const UniformBoxPrior& prior, const GpParams& params) noexcept {
  double total = uniform_log_pdf(params.constant_mean, prior.constant_mean);
  for (Eigen::Index k = 0; k < params.lengthscales.size(); ++k)
    total += uniform_log_pdf(params.lengthscales[k], prior.lengthscale);
  total += uniform_log_pdf(params.signal_variance, prior.signal_variance);
  total += uniform_log_pdf(params.noise_variance, prior.noise_variance);
  return total;
}

NormalParams fit_normal_mle(std::span<const double> samples) {
  if (samples.size() < 2) throw InsufficientDataError("fit_normal_mle needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  return NormalParams{mean, std::max(std::sqrt(ss / n), kSigmaFloor)};
}

double gamma_log_likelihood(std::span<const double> samples, const GammaParams& p) {
  double total = 0.0;
  for (double x : samples) total += gamma_log_pdf(x, p);
  return total;
}

GammaParams fit_gamma_mle(std::span<const double> samples) {
  if (samples.size() < 2) throw InsufficientDataError("fit_gamma_mle needs at least 2 samples");
  double sum = 0.0;
  double sum_log = 0.0;
  for (double x : samples) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError("fit_gamma_mle: samples must be positive and finite");
    sum += x;
    sum_log += std::log(x);
  }
  const bool all_equal = std::all_of(samples.begin(), samples.end(), [&](double x) { return x == samples[0]; });
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  const double s = std::log(mean) - sum_log / n;
  if (all_equal || !(s > 0.0)) throw DegenerateDataError("fit_gamma_mle: samples are all equal");

  // Profile score: log(alpha) - digamma(alpha) - s = 0.
  double alpha = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(alpha) - boost::math::digamma(alpha) - s;
    const double df = 1.0 / alpha - boost::math::trigamma(alpha);
    double next = alpha - f / df;
    if (!(next > 0.0)) next = 0.5 * alpha;
    const double step = std::abs(next - alpha);
    alpha = next;
    if (step < 1e-10) break;
  }
  return GammaParams{alpha, alpha / mean};
}

HyperPrior fit_hyper_prior(std::span<const GpParams> fitted) {
  if (fitted.size() < 2) throw InsufficientDataError("fit_hyper_prior needs at least 2 fitted parameter sets");
  std::vector<double> means, lengthscales, signals, noises;
  for (const auto& p : fitted) {
    means.push_back(p.constant_mean);
    for (Eigen::Index k = 0; k < p.lengthscales.size(); ++k) lengthscales.push_back(p.lengthscales[k]);
    signals.push_back(p.signal_variance);
    noises.push_back(p.noise_variance);
  }
  return HyperPrior{fit_normal_mle(means), fit_gamma_mle(lengthscales), fit_gamma_mle(signals),
                    fit_gamma_mle(noises)};
}

double neg_log_mean_exp_neg(std::span<const double> nlls) noexcept {
  double best = std::numeric_limits<double>::infinity();
  for (double v : nlls)
    if (v < best) best = v;
  if (!std::isfinite(best) || nlls.empty()) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double v : nlls)
    if (std::isfinite(v)) acc += std::exp(best - v);
  return best - std::log(acc) + std::log(static_cast<double>(nlls.size()));
}

double hierarchical_nll(const PriorSource& prior, std::span<const SubDataset> sds, int q_samples, Rng& rng,
                        const KernelSpec& spec) {
  if (q_samples < 1) throw ArgumentError("hierarchical_nll: q_samples must be >= 1");
  if (sds.empty()) return 0.0;
  const Eigen::Index dim = sds.front().dim();
  for (const auto& sd : sds)
    if (sd.dim() != dim) throw ArgumentError("hierarchical_nll: sub-datasets must share the dimension");
  const std::uint64_t base = rng();
  std::vector<double> nlls(static_cast<std::size_t>(q_samples));
  for (int q = 0; q < q_samples; ++q) {
    Rng sample_rng = make_rng(base, {static_cast<std::uint64_t>(q)});
    const GpParams theta = sample_gp_params(prior, dim, sample_rng);
    double v = std::numeric_limits<double>::infinity();
    try {
      v = dataset_nll(theta, sds, spec);
      if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
    } catch (const ArgumentError&) {
    }
    nlls[static_cast<std::size_t>(q)] = v;
  }
  return neg_log_mean_exp_neg(nlls);
}

std::string hyper_prior_to_json(const HyperPrior& prior, int indent) {
  return detail::hyper_prior_to_json_value(prior).dump(indent);
}

HyperPrior hyper_prior_from_json(std::string_view text) {
  try {
    return detail::hyper_prior_from_json_value(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid hyper-prior JSON: ") + e.what());
  }
}

}  // namespace hyperbo
