#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "hyperbo/error.hpp"
#include "hyperbo/pretrain.hpp"
#include "oracles.hpp"

using namespace hyperbo;

namespace {

FitConfig quick_fit(int restarts = 1) {
  FitConfig cfg;
  cfg.restarts = restarts;
  cfg.max_iters = 200;
  return cfg;
}

SuperDataset small_super(int n_datasets, std::uint64_t seed, int subs = 3, int obs = 20) {
  return generate_synthetic(synthetic_ground_truth_prior(), n_datasets, subs, obs, {1, 2}, seed, {});
}

}  // namespace

TEST_CASE("softplus reparameterization round trip") {
  for (double v : {1e-8, 1e-4, 0.01, 0.5, 1.0, 3.0, 40.0, 1e3}) {
    CHECK(softplus(inverse_softplus(v)) == doctest::Approx(v).epsilon(1e-12));
  }
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(softplus(800.0)));
  GpParams p;
  p.constant_mean = -0.7;
  p.lengthscales = Eigen::Vector3d(0.01, 0.3, 7.0);
  p.signal_variance = 2.5;
  p.noise_variance = 1e-6;
  const GpParams back = UnconstrainedParams::from_vector(UnconstrainedParams::from_params(p).to_vector()).to_params();
  CHECK(back.constant_mean == p.constant_mean);
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(oracle::relative_error(back.lengthscales[k], p.lengthscales[k]) < 1e-12);
  CHECK(oracle::relative_error(back.signal_variance, p.signal_variance) < 1e-12);
  CHECK(oracle::relative_error(back.noise_variance, p.noise_variance) < 1e-12);
}

TEST_CASE("unconstrained gradient matches central differences") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index d = 1 + t % 3;
    const GpParams p = oracle::random_params(d, rng);
    std::vector<SubDataset> sds;
    for (int j = 0; j < 2; ++j)
      sds.push_back({oracle::uniform_matrix(10, d, rng), oracle::uniform_matrix(10, 1, rng, -1.0, 1.0).col(0)});
    const Eigen::VectorXd raw = UnconstrainedParams::from_params(p).to_vector();
    const NllGradient g = unconstrained_nll_and_gradient(raw, sds, {});
    const Eigen::VectorXd fd = oracle::central_difference(
        [&](const Eigen::VectorXd& v) { return dataset_nll(UnconstrainedParams::from_vector(v).to_params(), sds, {}); },
        raw, 1e-6);
    for (Eigen::Index i = 0; i < raw.size(); ++i) CHECK(oracle::relative_error(g.gradient[i], fd[i], 1e-4) < 1e-4);
  }
}

TEST_CASE("fit_gp_mle recovers generating parameters and dominates restarts") {
  GpParams truth;
  truth.constant_mean = 0.5;
  truth.lengthscales = Eigen::VectorXd::Constant(1, 0.2);
  truth.signal_variance = 1.0;
  truth.noise_variance = 0.01;
  Rng rng(7);
  std::vector<SubDataset> sds;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int j = 0; j < 8; ++j) {
    SubDataset sd{Eigen::MatrixXd(300, 1), Eigen::VectorXd()};
    for (int i = 0; i < 300; ++i) sd.xs(i, 0) = u(rng);
    sd.ys = sample_function_values(truth, sd.xs, {}, rng, true);
    sds.push_back(std::move(sd));
  }
  FitConfig cfg;
  cfg.restarts = 2;
  const FitResult r = fit_gp_mle(sds, cfg, {}, "space");
  CHECK(r.nll <= dataset_nll(truth, sds, {}) + 1e-3);
  CHECK(std::abs(r.params.lengthscales[0] - 0.2) < 0.06);
  CHECK(r.restart_nlls.size() == 3);
  for (double v : r.restart_nlls) CHECK(r.nll <= v);
}

TEST_CASE("fit_gp_mle edge cases and determinism") {
  CHECK_THROWS_AS((void)fit_gp_mle(std::vector<SubDataset>{}, quick_fit(), {}), ArgumentError);
  const SuperDataset super = small_super(1, 3);
  const auto members = super.datasets.begin()->second.members();

  FitConfig adam = FitConfig::adam_defaults();
  adam.max_iters = 150;
  adam.subsample_per_iter = 8;
  adam.restarts = 1;
  adam.seed = 5;
  const FitResult a = fit_gp_mle(members, adam, {}, "s");
  const FitResult b = fit_gp_mle(members, adam, {}, "s");
  CHECK(a.params.lengthscales == b.params.lengthscales);
  CHECK(a.nll == b.nll);

  FitConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS((void)fit_gp_mle(members, bad, {}), ConfigError);
}

TEST_CASE("pretrain_two_step: boundary, determinism, cache, JSON") {
  const SuperDataset one = small_super(1, 4);
  CHECK_THROWS_AS((void)pretrain_two_step(one, quick_fit(), {}), InsufficientDataError);

  const SuperDataset two = small_super(2, 5);
  const PretrainResult r = pretrain_two_step(two, quick_fit(), {});
  CHECK(r.per_space_fits.size() == 2);
  CHECK(r.discrete_prior.atoms.size() == 2);
  CHECK(r.hyper_prior.lengthscale_prior.alpha > 0.0);

  FitCache cache;
  const PretrainResult c1 = pretrain_two_step(two, quick_fit(), {}, 1, &cache);
  CHECK(cache.size() == 2);
  const PretrainResult c2 = pretrain_two_step(two, quick_fit(), {}, 1, &cache);
  CHECK(cache.size() == 2);
  auto strip = [](PretrainResult p) {
    p.wallclock_seconds = 0.0;
    return pretrain_result_to_json(p);
  };
  CHECK(strip(r) == strip(c1));
  CHECK(strip(c1) == strip(c2));

  const PretrainResult back = pretrain_result_from_json(pretrain_result_to_json(r));
  CHECK(strip(back) == strip(r));

  // Different data under the same ids must not share cache entries.
  const SuperDataset other = small_super(2, 6);
  (void)pretrain_two_step(other, quick_fit(), {}, 1, &cache);
  CHECK(cache.size() == 4);

  (void)pretrain_two_step(two, quick_fit(), KernelSpec{Smoothness::half}, 1, &cache);
  CHECK(cache.size() == 6);
}

TEST_CASE("leave-one-space-out pre-training") {
  const SuperDataset three = small_super(3, 8);
  const PretrainResult full = pretrain_two_step(three, quick_fit(), {});
  SuperDataset without = three;
  without.datasets.erase(synthetic_space_id(0));
  const PretrainResult z = pretrain_two_step(without, quick_fit(), {});
  CHECK(z.per_space_fits.size() == 2);
  for (const auto& f : z.per_space_fits) CHECK(f.space_id != synthetic_space_id(0));
  std::vector<SpaceFit> kept;
  for (const auto& f : full.per_space_fits)
    if (f.space_id != synthetic_space_id(0)) kept.push_back(f);
  const PretrainResult assembled = assemble_pretrain(kept);
  CHECK(assembled.hyper_prior.lengthscale_prior.alpha == z.hyper_prior.lengthscale_prior.alpha);
}

TEST_CASE("asymptotics tables") {
  GpParams gen;
  gen.lengthscales = Eigen::VectorXd::Constant(1, 0.3);
  gen.noise_variance = 0.01;
  const AsymptoticsTable t = asymptotics_single_gp(gen, {1}, 10, 3, quick_fit(0), {});
  std::set<int> grids;
  std::set<std::string> params;
  for (const auto& row : t) {
    grids.insert(row.grid);
    params.insert(row.parameter);
  }
  CHECK(grids == std::set<int>{1});
  CHECK(params.contains("lengthscale"));
  CHECK(params.contains("noise_variance"));
  CHECK(asymptotics_column(t, 1, "lengthscale").size() == 3);

  const AsymptoticsTable back = asymptotics_from_csv(asymptotics_to_csv(t));
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back[i].parameter == t[i].parameter);
    CHECK(back[i].value == t[i].value);
  }

  // With exactly two datasets every seed pre-trains on the same pair.
  const SuperDataset two = small_super(2, 9);
  const AsymptoticsTable s = asymptotics_two_step(two, {2}, 3, quick_fit(), {});
  const auto alphas = asymptotics_column(s, 2, "lengthscale_alpha");
  REQUIRE(alphas.size() == 3);
  CHECK(alphas[0] == alphas[1]);
  CHECK(alphas[1] == alphas[2]);
  CHECK_THROWS_AS((void)asymptotics_two_step(two, {4}, 1, quick_fit(), {}), ArgumentError);
}

TEST_CASE("per-sub-dataset hierarchical NLL with a point-mass prior") {
  const SuperDataset super = small_super(1, 10, 3, 30);
  const Dataset& d = super.datasets.begin()->second;
  GpParams atom = *d.generating_params;
  const double h = per_sub_dataset_hierarchical_nll(DiscretePrior{{atom}}, d, 5, 1000, 0, {});
  CHECK(h == doctest::Approx(dataset_nll(atom, d.members(), {}) / 3.0).epsilon(1e-12));
}
