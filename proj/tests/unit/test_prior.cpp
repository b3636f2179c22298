#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "hyperbo/error.hpp"
#include "hyperbo/prior.hpp"
#include "oracles.hpp"

using namespace hyperbo;

namespace {

std::vector<double> gamma_draws(double alpha, double beta, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(alpha, 1.0 / beta);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& x : out) x = g(rng);
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SubDataset toy_sub(std::uint64_t seed, Eigen::Index n = 6) {
  std::mt19937_64 rng(seed);
  return SubDataset{oracle::uniform_matrix(n, 1, rng), oracle::uniform_matrix(n, 1, rng, -1.0, 1.0).col(0)};
}

}  // namespace

TEST_CASE("preset priors carry the published values in rate form") {
  const HyperPrior gt = synthetic_ground_truth_prior();
  CHECK(gt.constant_mean_prior.mu == 1.0);
  CHECK(gt.constant_mean_prior.sigma == 1.0);
  CHECK(gt.lengthscale_prior.alpha == 10.0);
  CHECK(gt.lengthscale_prior.beta == 30.0);
  CHECK(gt.signal_variance_prior.alpha == 1.0);
  CHECK(gt.signal_variance_prior.beta == 1.0);
  CHECK(gt.noise_variance_prior.alpha == 10.0);
  CHECK(gt.noise_variance_prior.beta == 100000.0);

  const HyperPrior hs = hand_specified_prior();
  CHECK(hs.constant_mean_prior.mu == 0.0);
  CHECK(hs.constant_mean_prior.sigma == 1.0);
  CHECK(hs.lengthscale_prior.alpha == 1.0);
  CHECK(hs.lengthscale_prior.beta == 10.0);
  CHECK(hs.signal_variance_prior.alpha == 1.0);
  CHECK(hs.signal_variance_prior.beta == 5.0);
  CHECK(hs.noise_variance_prior.alpha == 10.0);
  CHECK(hs.noise_variance_prior.beta == 100.0);

  const UniformBoxPrior ni = non_informative_prior();
  CHECK(ni.constant_mean.low == -100.0);
  CHECK(ni.constant_mean.high == 100.0);
  CHECK(ni.lengthscale.low == 0.001);
  CHECK(ni.lengthscale.high == 10.0);
  CHECK(ni.signal_variance.low == 1e-6);
  CHECK(ni.signal_variance.high == 100.0);
  CHECK(ni.noise_variance.low == 1e-8);
  CHECK(ni.noise_variance.high == 100.0);
}

TEST_CASE("sample_gp_params moments and determinism") {
  HyperPrior exp1 = hand_specified_prior();
  exp1.lengthscale_prior = {1.0, 1.0};
  Rng rng(1);
  double sum = 0.0;
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) sum += sample_gp_params(exp1, 1, rng).lengthscales[0];
  CHECK(std::abs(sum / kDraws - 1.0) < 0.02);

  Rng rng2(2);
  double ls = 0.0;
  for (int i = 0; i < 20000; ++i) ls += sample_gp_params(synthetic_ground_truth_prior(), 2, rng2).lengthscales.sum();
  CHECK(ls / 40000.0 == doctest::Approx(10.0 / 30.0).epsilon(0.01));

  Rng a(5);
  Rng b(5);
  const GpParams pa = sample_gp_params(non_informative_prior(), 3, a);
  const GpParams pb = sample_gp_params(non_informative_prior(), 3, b);
  CHECK(pa.lengthscales == pb.lengthscales);
  CHECK(pa.constant_mean == pb.constant_mean);
  CHECK(pa.noise_variance == pb.noise_variance);
}

TEST_CASE("DiscretePrior resamples lengthscales from the chosen atom") {
  GpParams atom;
  atom.lengthscales = Eigen::Vector2d(0.25, 0.75);
  atom.constant_mean = 0.5;
  DiscretePrior d{{atom}};
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const GpParams p = sample_gp_params(d, 4, rng);
    REQUIRE(p.dim() == 4);
    for (Eigen::Index k = 0; k < 4; ++k) CHECK((p.lengthscales[k] == 0.25 || p.lengthscales[k] == 0.75));
    CHECK(p.constant_mean == 0.5);
  }
  CHECK(sample_gp_params(d, 2, rng).lengthscales == atom.lengthscales);
  CHECK_THROWS_AS((void)sample_gp_params(DiscretePrior{}, 2, rng), ArgumentError);
}

TEST_CASE("log densities") {
  CHECK(gamma_log_pdf(1.0, {1.0, 1.0}) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(normal_log_pdf(0.0, {0.0, 1.0}) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(gamma_log_pdf(-1.0, {2.0, 1.0}) == -std::numeric_limits<double>::infinity());

  HyperPrior h = hand_specified_prior();
  h.lengthscale_prior = {1.0, 1.0};
  GpParams p;
  p.constant_mean = 0.3;
  p.lengthscales = Eigen::Vector3d(1.0, 1.0, 1.0);
  p.signal_variance = 0.4;
  p.noise_variance = 0.05;
  const double expect = normal_log_pdf(0.3, h.constant_mean_prior) + 3.0 * -1.0 +
                        gamma_log_pdf(0.4, h.signal_variance_prior) + gamma_log_pdf(0.05, h.noise_variance_prior);
  CHECK(log_density(h, p) == doctest::Approx(expect).epsilon(1e-14));

  // Componentwise oracle with the closed-form Gamma density.
  auto gamma_oracle = [](double x, double a, double b) {
    return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x) - b * x;
  };
  CHECK(gamma_log_pdf(0.37, {10.0, 30.0}) == doctest::Approx(gamma_oracle(0.37, 10.0, 30.0)).epsilon(1e-13));

  const UniformBoxPrior u = non_informative_prior();
  CHECK(log_density(u, p) == doctest::Approx(-std::log(200.0) - 3.0 * std::log(10.0 - 0.001) -
                                             std::log(100.0 - 1e-6) - std::log(100.0 - 1e-8))
                                 .epsilon(1e-12));
  p.lengthscales[1] = 11.0;
  CHECK(log_density(u, p) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("component densities integrate to one") {
  using boost::math::quadrature::gauss_kronrod;
  const double inf = std::numeric_limits<double>::infinity();
  for (const NormalParams& n : {NormalParams{0.0, 1.0}, NormalParams{1.0, 1.0}, NormalParams{-3.0, 0.01}}) {
    const double mass =
        gauss_kronrod<double, 61>::integrate([&](double x) { return std::exp(normal_log_pdf(x, n)); }, -inf, inf, 15);
    CHECK(mass >= 0.999);
    CHECK(mass <= 1.001);
  }
  for (const GammaParams& g : {GammaParams{10.0, 30.0}, GammaParams{1.0, 1.0}, GammaParams{1.0, 5.0},
                               GammaParams{10.0, 100.0}, GammaParams{10.0, 1e5}}) {
    const double mass =
        gauss_kronrod<double, 61>::integrate([&](double x) { return std::exp(gamma_log_pdf(x, g)); }, 0.0, inf, 15);
    CHECK(mass >= 0.999);
    CHECK(mass <= 1.001);
  }
}

TEST_CASE("average log density of Normal samples matches the negative entropy") {
  const NormalParams n{0.4, 2.0};
  std::mt19937_64 rng(8);
  std::normal_distribution<double> dist(n.mu, n.sigma);
  constexpr int kDraws = 10000;
  std::vector<double> lp(kDraws);
  for (auto& v : lp) v = normal_log_pdf(dist(rng), n);
  double mean = 0.0;
  for (double v : lp) mean += v;
  mean /= kDraws;
  double var = 0.0;
  for (double v : lp) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (kDraws - 1) / kDraws);
  const double neg_entropy = -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * n.sigma * n.sigma);
  CHECK(std::abs(mean - neg_entropy) < 3.0 * se);
}

TEST_CASE("fit_normal_mle") {
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(fit_normal_mle(zeros).mu == 0.0);
  CHECK(fit_normal_mle(zeros).sigma == kSigmaFloor);
  const std::vector<double> pm{-1.0, 1.0};
  CHECK(fit_normal_mle(pm).mu == 0.0);
  CHECK(fit_normal_mle(pm).sigma == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> dist(1.0, 1.0);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = dist(rng);
  CHECK(std::abs(fit_normal_mle(xs).mu - 1.0) < 0.05);
  CHECK_THROWS_AS((void)fit_normal_mle(std::vector<double>{1.0}), InsufficientDataError);
}

TEST_CASE("fit_gamma_mle: recovery, grid oracle, stationarity") {
  const auto xs = gamma_draws(10.0, 30.0, 100000, 12);
  const GammaParams g = fit_gamma_mle(xs);
  CHECK(std::abs(g.alpha - 10.0) < 0.5);
  CHECK(std::abs(g.beta - 30.0) < 1.5);

  const auto small = gamma_draws(10.0, 30.0, 2000, 13);
  const GammaParams gs = fit_gamma_mle(small);
  const auto [grid_alpha, grid_ll] = oracle::gamma_grid_search(small, 0.1, 50.0, 0.01);
  CHECK(oracle::gamma_loglik(small, gs.alpha, gs.beta) >= grid_ll - 1e-6);
  CHECK(gamma_log_likelihood(small, gs) == doctest::Approx(oracle::gamma_loglik(small, gs.alpha, gs.beta)));
  CHECK(std::abs(grid_alpha - gs.alpha) < 0.02);

  // Score equations of the shape/rate likelihood.
  double sum = 0.0;
  double sum_log = 0.0;
  for (double x : small) {
    sum += x;
    sum_log += std::log(x);
  }
  const double n = static_cast<double>(small.size());
  const double score_alpha = n * std::log(gs.beta) - n * boost::math::digamma(gs.alpha) + sum_log;
  const double score_beta = n * gs.alpha / gs.beta - sum;
  CHECK(std::abs(score_alpha) < 1e-6);
  CHECK(std::abs(score_beta) < 1e-6);

  CHECK_THROWS_AS((void)fit_gamma_mle(std::vector<double>{1.0, 1.0, 1.0}), DegenerateDataError);
  CHECK_THROWS_AS((void)fit_gamma_mle(std::vector<double>{1.0, -1.0}), ArgumentError);
}

TEST_CASE("estimator error shrinks with sample size") {
  std::vector<double> gamma_err;
  std::vector<double> normal_err;
  for (int n : {100, 1000, 10000, 100000}) {
    std::vector<double> ge;
    std::vector<double> ne;
    for (int s = 0; s < 20; ++s) {
      const auto xs = gamma_draws(10.0, 30.0, n, 1000 + 31 * s + n);
      ge.push_back(std::abs(fit_gamma_mle(xs).alpha - 10.0));
      std::mt19937_64 rng(5000 + 17 * s + n);
      std::normal_distribution<double> dist(1.0, 1.0);
      std::vector<double> ys(static_cast<std::size_t>(n));
      for (auto& y : ys) y = dist(rng);
      ne.push_back(std::abs(fit_normal_mle(ys).mu - 1.0));
    }
    gamma_err.push_back(median(ge));
    normal_err.push_back(median(ne));
  }
  for (std::size_t i = 1; i < gamma_err.size(); ++i) {
    CHECK(gamma_err[i] < gamma_err[i - 1]);
    CHECK(normal_err[i] < normal_err[i - 1]);
  }
}

TEST_CASE("fit_hyper_prior") {
  GpParams a;
  a.constant_mean = 0.0;
  a.lengthscales = Eigen::Vector2d(0.2, 0.3);
  a.signal_variance = 1.0;
  a.noise_variance = 0.01;
  GpParams b = a;
  b.constant_mean = 2.0;
  b.lengthscales = Eigen::Vector3d(0.4, 0.25, 0.5);
  b.signal_variance = 2.0;
  b.noise_variance = 0.02;
  const std::vector<GpParams> fits{a, b};
  const HyperPrior h = fit_hyper_prior(fits);
  CHECK(h.constant_mean_prior.mu == doctest::Approx(1.0));
  const std::vector<double> pooled{0.2, 0.3, 0.4, 0.25, 0.5};
  const GammaParams direct = fit_gamma_mle(pooled);
  CHECK(h.lengthscale_prior.alpha == direct.alpha);
  CHECK(h.lengthscale_prior.beta == direct.beta);
  CHECK_THROWS_AS((void)fit_hyper_prior(std::vector<GpParams>{a}), InsufficientDataError);
}

TEST_CASE("neg_log_mean_exp_neg is stable") {
  const std::vector<double> big{1e4, 1e4 + 1.0, std::numeric_limits<double>::infinity()};
  const double v = neg_log_mean_exp_neg(big);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(1e4 - std::log((1.0 + std::exp(-1.0)) / 3.0)));
  const std::vector<double> neg{-1e4, -1e4};
  CHECK(neg_log_mean_exp_neg(neg) == doctest::Approx(-1e4));
  CHECK(neg_log_mean_exp_neg(std::vector<double>{std::numeric_limits<double>::infinity()}) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("hierarchical_nll degenerate cases") {
  const std::vector<SubDataset> sds{toy_sub(1), toy_sub(2)};
  GpParams atom;
  atom.constant_mean = 0.1;
  atom.lengthscales = Eigen::VectorXd::Constant(1, 0.3);
  atom.signal_variance = 0.8;
  atom.noise_variance = 0.05;
  Rng rng(3);
  CHECK(hierarchical_nll(DiscretePrior{{atom}}, sds, 7, rng, {}) ==
        doctest::Approx(dataset_nll(atom, sds, {})).epsilon(1e-12));

  // Q = 1 reproduces the single draw made from the first substream.
  Rng r1(4);
  Rng r1_copy = r1;
  const double h1 = hierarchical_nll(hand_specified_prior(), sds, 1, r1, {});
  Rng sample_rng = make_rng(r1_copy(), {0});
  const GpParams drawn = sample_gp_params(hand_specified_prior(), 1, sample_rng);
  CHECK(h1 == doctest::Approx(dataset_nll(drawn, sds, {})).epsilon(1e-12));
}

TEST_CASE("hierarchical_nll converges in Q") {
  const std::vector<SubDataset> sds{toy_sub(5, 4)};
  HyperPrior h = hand_specified_prior();
  h.noise_variance_prior = {10.0, 50.0};
  // Standard error from the sampled likelihoods: the estimator is
  // -log(mean L), so se ~ sd(L) / (sqrt(Q) mean(L)).
  auto estimate = [&](int q, std::uint64_t seed) {
    Rng rng(seed);
    return hierarchical_nll(h, sds, q, rng, {});
  };
  const double small = estimate(10000, 1);
  const double large = estimate(100000, 2);
  Rng rng(3);
  std::vector<double> lik;
  for (int i = 0; i < 10000; ++i) lik.push_back(std::exp(-dataset_nll(sample_gp_params(h, 1, rng), sds, {})));
  double m = 0.0;
  for (double v : lik) m += v;
  m /= static_cast<double>(lik.size());
  double var = 0.0;
  for (double v : lik) var += (v - m) * (v - m);
  var /= static_cast<double>(lik.size() - 1);
  const double se_small = std::sqrt(var / 10000.0) / m;
  const double se_large = std::sqrt(var / 100000.0) / m;
  CHECK(std::abs(small - large) < 3.0 * std::hypot(se_small, se_large));
}

TEST_CASE("hyper-prior JSON round trip") {
  const HyperPrior h = hand_specified_prior();
  const std::string text = hyper_prior_to_json(h);
  CHECK(text.find("\"rate\"") != std::string::npos);
  const HyperPrior back = hyper_prior_from_json(text);
  CHECK(back.lengthscale_prior.alpha == h.lengthscale_prior.alpha);
  CHECK(back.lengthscale_prior.beta == h.lengthscale_prior.beta);
  CHECK(back.noise_variance_prior.beta == h.noise_variance_prior.beta);
  CHECK(back.constant_mean_prior.sigma == h.constant_mean_prior.sigma);
}
