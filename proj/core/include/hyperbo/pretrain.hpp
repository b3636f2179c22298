#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyperbo/data.hpp"
#include "hyperbo/gp.hpp"
#include "hyperbo/optimize.hpp"
#include "hyperbo/prior.hpp"

namespace hyperbo {

enum class OptimizerKind { lbfgs, adam };

struct FitConfig {
  OptimizerKind optimizer = OptimizerKind::lbfgs;
  int max_iters = 500;
  double learning_rate = 1e-3;
  // Adam only: points kept per sub-dataset at each iteration.
  std::optional<int> subsample_per_iter;
  // Random initializations in addition to the fixed one.
  int restarts = 5;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] static FitConfig lbfgs_defaults();
  [[nodiscard]] static FitConfig adam_defaults();
};

[[nodiscard]] double softplus(double x) noexcept;
[[nodiscard]] double inverse_softplus(double y) noexcept;
[[nodiscard]] double sigmoid(double x) noexcept;

// Optimizer coordinates: identity for the mean, inverse softplus for the
// strictly positive parameters.
struct UnconstrainedParams {
  double raw_mean = 0.0;
  Eigen::VectorXd raw_lengthscales;
  double raw_signal_var = 0.0;
  double raw_noise_var = 0.0;

  [[nodiscard]] static UnconstrainedParams from_params(const GpParams& p);
  [[nodiscard]] static UnconstrainedParams from_vector(const Eigen::VectorXd& v);
  [[nodiscard]] GpParams to_params() const;
  // Layout [mean, lengthscales..., signal, noise].
  [[nodiscard]] Eigen::VectorXd to_vector() const;
};

// Dataset NLL and its gradient with respect to a flat UnconstrainedParams vector.
[[nodiscard]] NllGradient unconstrained_nll_and_gradient(const Eigen::VectorXd& raw,
                                                         std::span<const SubDataset> sds,
                                                         const KernelSpec& spec);

// The fixed initialization used alongside random restarts.
[[nodiscard]] GpParams default_initial_params(Eigen::Index dim);

struct FitResult {
  GpParams params;
  double nll = 0.0;  // full-data dataset NLL at params
  std::vector<double> restart_nlls;  // +inf for failed restarts
  std::vector<OptimizeStatus> restart_status;
};

// Maximum-likelihood GP fit over all sub-datasets of one search space:
// best of (1 fixed + cfg.restarts random) optimizer runs. Throws FitError
// when every restart fails.
[[nodiscard]] FitResult fit_gp_mle(std::span<const SubDataset> sds, const FitConfig& cfg, const KernelSpec& spec,
                                   std::string_view space_id = {});

struct SpaceFit {
  std::string space_id;
  GpParams params;
  double nll = 0.0;
};

struct PretrainResult {
  std::vector<SpaceFit> per_space_fits;  // sorted by space id
  HyperPrior hyper_prior;
  DiscretePrior discrete_prior;
  double wallclock_seconds = 0.0;
};

// Memoizes step-one fits keyed by space id, member sub-dataset contents, fit
// configuration and kernel. Safe to share between threads.
class FitCache {
 public:
  std::optional<SpaceFit> find(const std::string& key) const;
  void store(const std::string& key, const SpaceFit& fit);
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] static std::string key_for(const Dataset& d, const FitConfig& cfg, const KernelSpec& spec);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, SpaceFit> fits_;
};

// Step-one fits for every dataset in `train`, in space-id order.
[[nodiscard]] std::vector<SpaceFit> fit_all_spaces(const SuperDataset& train, const FitConfig& cfg,
                                                   const KernelSpec& spec, int threads = 1,
                                                   FitCache* cache = nullptr);

// Step two over a set of fits: parametric hyper-prior and the discrete prior.
[[nodiscard]] PretrainResult assemble_pretrain(std::vector<SpaceFit> fits);

// Two-step pre-training over at least two datasets.
[[nodiscard]] PretrainResult pretrain_two_step(const SuperDataset& train, const FitConfig& cfg,
                                               const KernelSpec& spec, int threads = 1,
                                               FitCache* cache = nullptr);

[[nodiscard]] std::string pretrain_result_to_json(const PretrainResult& result, int indent = 2);
[[nodiscard]] PretrainResult pretrain_result_from_json(std::string_view text);

// Long-format sweep table: (grid value, seed, parameter, value).
struct AsymptoticsRow {
  int grid = 0;
  int seed = 0;
  std::string parameter;
  double value = 0.0;
};
using AsymptoticsTable = std::vector<AsymptoticsRow>;

[[nodiscard]] std::string asymptotics_to_csv(const AsymptoticsTable& table);
[[nodiscard]] AsymptoticsTable asymptotics_from_csv(std::string_view text);
// Values of one parameter at one grid value, in seed order.
[[nodiscard]] std::vector<double> asymptotics_column(const AsymptoticsTable& table, int grid,
                                                     std::string_view parameter);

// Single-GP sweep: for every grid value and seed, draw that many
// sub-datasets of obs_per uniform inputs from the generating GP, fit, and
// record each estimated parameter. Failed cells are recorded with the
// parameter name "fit_failed".
[[nodiscard]] AsymptoticsTable asymptotics_single_gp(const GpParams& generating, const std::vector<int>& grid,
                                                     int obs_per, int n_seeds, const FitConfig& cfg,
                                                     const KernelSpec& spec, int threads = 1);

struct TwoStepSweepOptions {
  // When set, the mean per-sub-dataset hierarchical NLL on these datasets is
  // recorded as "test_nll".
  const SuperDataset* test = nullptr;
  int q_samples = 500;
  Eigen::Index nll_subsample = 100;
  int threads = 1;
  FitCache* cache = nullptr;
};

// Two-step sweep: for every grid value and seed, pre-train on a uniform
// subsample of that many training datasets and record the hyper-prior.
[[nodiscard]] AsymptoticsTable asymptotics_two_step(const SuperDataset& train, const std::vector<int>& grid,
                                                    int n_seeds, const FitConfig& cfg, const KernelSpec& spec,
                                                    const TwoStepSweepOptions& options = {});

// Per-sub-dataset hierarchical NLL of one dataset: hierarchical_nll over its
// (subsampled) members divided by the member count.
[[nodiscard]] double per_sub_dataset_hierarchical_nll(const PriorSource& prior, const Dataset& d, int q_samples,
                                                      Eigen::Index nll_subsample, std::uint64_t seed,
                                                      const KernelSpec& spec);

}  // namespace hyperbo
