#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hyperbo/gp.hpp"
#include "hyperbo/prior.hpp"
#include "hyperbo/random.hpp"

namespace hyperbo {

// PI target is best_y + zeta.
struct ProbabilityOfImprovement {
  double zeta = 0.1;
};
// EI target is best_y.
struct ExpectedImprovement {};
struct UpperConfidenceBound {
  double beta = 3.0;
};

using AcquisitionSpec = std::variant<ProbabilityOfImprovement, ExpectedImprovement, UpperConfidenceBound>;

[[nodiscard]] std::string acquisition_name(const AcquisitionSpec& acq);

// Values at every posterior point. s = sqrt(variance); at s == 0, PI and EI
// take their limits (step function and max(m - tau, 0)).
[[nodiscard]] Eigen::VectorXd acquisition_values(const AcquisitionSpec& acq, const GpPosterior& post,
                                                 double best_y);

struct BoConfig {
  int budget = 50;
  int n_init = 5;
  int r_samples = 100;
  std::uint64_t seed = 0;
  bool include_noise_in_acq_variance = false;
  // Draw fresh prior samples at every step; otherwise draw once per run.
  bool redraw_samples_each_step = true;

  void validate() const;
};

struct BoPick {
  Eigen::Index candidate_index = 0;
  Eigen::VectorXd x;
  double y = 0.0;
};

struct BoTrajectory {
  std::vector<BoPick> picks;
  std::vector<double> incumbents;
  std::vector<double> regrets;

  // step,candidate_index,y,incumbent,regret
  [[nodiscard]] std::string to_csv() const;
};

struct RandomPolicy {};

using BoModel = std::variant<PriorSource, GpParams, RandomPolicy>;

struct ReweightedAcquisition {
  Eigen::VectorXd values;
  Eigen::VectorXd weights;  // normalized, sums to 1
  std::vector<GpParams> samples;
};

// Normalized weights from log-weights; -inf entries get zero weight. Throws
// Error when every entry is -inf.
[[nodiscard]] Eigen::VectorXd softmax_weights(const Eigen::VectorXd& log_weights);

// Column r of per_sample holds sample r's acquisition on every candidate.
[[nodiscard]] Eigen::VectorXd combine_reweighted(const Eigen::VectorXd& log_weights, const Eigen::MatrixXd& per_sample);

// Index of the largest value, ties to the lowest index.
[[nodiscard]] Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v);

// Largest observed y, or the prior mean when nothing has been observed.
[[nodiscard]] double incumbent_value(const SubDataset& observed, const GpParams& params);

[[nodiscard]] Eigen::VectorXd single_gp_acquisition(const AcquisitionSpec& acq, const GpParams& params,
                                                    const SubDataset& observed,
                                                    const Eigen::Ref<const Eigen::MatrixXd>& candidates,
                                                    const BoConfig& cfg, const KernelSpec& spec);

// Likelihood-reweighted average of single-GP acquisitions over R parameter
// draws from the prior.
[[nodiscard]] ReweightedAcquisition hierarchical_acquisition(const AcquisitionSpec& acq, const PriorSource& prior,
                                                             const SubDataset& observed,
                                                             const Eigen::Ref<const Eigen::MatrixXd>& candidates,
                                                             const BoConfig& cfg, Rng& rng,
                                                             const KernelSpec& spec);

// As above with caller-supplied parameter samples.
[[nodiscard]] ReweightedAcquisition reweighted_acquisition(const AcquisitionSpec& acq,
                                                           std::span<const GpParams> samples,
                                                           const SubDataset& observed,
                                                           const Eigen::Ref<const Eigen::MatrixXd>& candidates,
                                                           const BoConfig& cfg, const KernelSpec& spec);

// n_init distinct indices in [0, pool_size), uniformly at random.
[[nodiscard]] std::vector<Eigen::Index> draw_init_indices(Eigen::Index pool_size, int n_init, std::uint64_t seed);

// Offline BO over a finite pool. When init_indices is empty they are drawn
// from cfg.seed. The trajectory has n_init + budget entries.
[[nodiscard]] BoTrajectory run_bo(const AcquisitionSpec& acq, const BoModel& model, const SubDataset& pool,
                                  const BoConfig& cfg, Rng& rng, const KernelSpec& spec,
                                  std::span<const Eigen::Index> init_indices = {});

[[nodiscard]] double normalized_simple_regret(std::span<const double> ys_seen, std::span<const double> pool_ys);

}  // namespace hyperbo
