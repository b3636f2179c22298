#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hyperbo/bo.hpp"
#include "hyperbo/data.hpp"
#include "hyperbo/pretrain.hpp"

namespace hyperbo {

enum class MethodKind {
  random,
  non_informative,
  hand_specified,
  ground_truth,
  hyperbo,       // per-space fitted GP
  hyperbo_plus,  // fitted hyper-prior
  x_variant,     // uniform over step-one fits
  z_variant,     // hyper-prior fitted without the target space
};

[[nodiscard]] std::string_view to_string(MethodKind m) noexcept;
[[nodiscard]] MethodKind parse_method_kind(std::string_view s);

struct MethodSpec {
  MethodKind kind = MethodKind::hyperbo_plus;
  AcquisitionSpec acquisition = ProbabilityOfImprovement{};

  [[nodiscard]] std::string label() const { return std::string(to_string(kind)); }
};

[[nodiscard]] AcquisitionSpec parse_acquisition(std::string_view name, double zeta = 0.1, double beta = 3.0);

// Builds the model each method uses for a target search space. Pre-training
// runs lazily and is shared between methods and targets.
class PriorBuilder {
 public:
  PriorBuilder(const SuperDataset& train, FitConfig fit, KernelSpec spec, int threads = 1,
               std::shared_ptr<FitCache> cache = nullptr);

  // Throws ConfigError for method/setup pairings with no meaning: GroundTruth
  // without a generating prior, HyperBO without training data for the target.
  [[nodiscard]] BoModel build(MethodKind m, const std::string& target_space);
  void check_valid(MethodKind m, const std::string& target_space) const;

  [[nodiscard]] const PretrainResult& full_pretrain();
  [[nodiscard]] const PretrainResult& pretrain_excluding(const std::string& space);
  [[nodiscard]] const FitCache& cache() const noexcept { return *cache_; }

 private:
  const SuperDataset& train_;
  FitConfig fit_;
  KernelSpec spec_;
  int threads_;
  std::shared_ptr<FitCache> cache_;
  std::optional<PretrainResult> full_;
  std::map<std::string, PretrainResult> excluding_;
};

struct BenchmarkOptions {
  BoConfig bo;
  std::vector<std::uint64_t> seeds{0};
  // Pools larger than this are uniformly subsampled per seed.
  std::optional<Eigen::Index> pool_size;
  // Keep only the first k test sub-datasets of each test space.
  std::optional<int> max_test_sub_datasets;
  std::optional<std::vector<std::string>> test_spaces;
  int threads = 1;
  // When empty nothing is written.
  std::filesystem::path out_dir;
};

struct CellResult {
  std::string method;
  std::uint64_t seed = 0;
  std::string space;
  std::string sub;
  std::optional<BoTrajectory> trajectory;
  std::string error;
  std::filesystem::path csv_path;
};

struct MethodCurve {
  std::string method;
  // Arithmetic mean over every successful trajectory, per step.
  std::vector<double> mean;
  // Standard deviation of the per-seed mean curves.
  std::vector<double> std;
  std::vector<std::vector<double>> per_seed;
  std::size_t trajectories = 0;
  std::size_t failures = 0;

  [[nodiscard]] double final_mean() const { return mean.empty() ? 0.0 : mean.back(); }
  [[nodiscard]] double final_std() const { return std.empty() ? 0.0 : std.back(); }
};

struct ExperimentReport {
  std::vector<MethodCurve> curves;  // in method order
  std::vector<CellResult> cells;    // sorted by (method order, seed, space, sub)
  double runtime_seconds = 0.0;

  [[nodiscard]] const MethodCurve& curve(std::string_view method) const;
  [[nodiscard]] std::string summary_json(int indent = 2) const;
};

// Offline BO on every test sub-dataset for every method and seed. Initial
// observations are shared across methods for a given seed and sub-dataset.
[[nodiscard]] ExperimentReport run_benchmark(const SplitViews& views, const std::vector<MethodSpec>& methods,
                                             PriorBuilder& priors, const BenchmarkOptions& options,
                                             const KernelSpec& spec);

struct NllRow {
  std::string method;
  std::uint64_t seed = 0;
  std::string side;  // "train" or "test"
  std::string space;
  std::size_t sub_datasets = 0;
  double nll = 0.0;  // per sub-dataset; NaN when the cell failed
  std::string error;
};

struct NllSummary {
  std::string method;
  double train_mean = 0.0;
  double train_std = 0.0;
  double test_mean = 0.0;
  double test_std = 0.0;
};

struct NllTable {
  std::vector<NllRow> rows;
  std::vector<NllSummary> summary;

  [[nodiscard]] const NllSummary& method(std::string_view name) const;
  [[nodiscard]] std::string rows_csv() const;
  [[nodiscard]] std::string summary_json(int indent = 2) const;
};

struct NllOptions {
  int q_samples = 500;
  Eigen::Index nll_subsample = 100;
  std::vector<std::uint64_t> seeds{0};
  bool include_train = true;
  int threads = 1;
};

// Mean per-sub-dataset NLL of each method's prior on the train and test
// sides. Aggregates weight spaces by sub-dataset count; seeds are averaged.
[[nodiscard]] NllTable evaluate_nll(const SplitViews& views, const std::vector<MethodSpec>& methods,
                                    PriorBuilder& priors, const NllOptions& options, const KernelSpec& spec);

// Sub-dataset-count weighted mean.
[[nodiscard]] double weighted_aggregate(const std::vector<std::pair<double, std::size_t>>& per_space);

// Single JSON document describing one experiment.
struct ExperimentConfig {
  std::string name = "experiment";

  struct Synthetic {
    int n_datasets = 20;
    int subdatasets_per = 10;
    int obs_per = 300;
    int dim_min = 2;
    int dim_max = 5;
    std::uint64_t seed = 0;
    HyperPrior prior = synthetic_ground_truth_prior();
  };
  std::optional<Synthetic> synthetic;
  std::optional<std::filesystem::path> native_path;
  std::optional<std::filesystem::path> external_meta;
  std::optional<std::filesystem::path> external_split;

  SplitSpec split;
  KernelSpec kernel;
  FitConfig fit;
  std::vector<MethodSpec> methods;
  BenchmarkOptions bench;
  NllOptions nll;
  int threads = 1;

  struct Asymptotics {
    std::vector<int> single_grid{1, 4, 16, 64};
    int single_obs_per = 25;
    int single_seeds = 20;
    std::optional<GpParams> single_generating;
    std::vector<int> two_step_grid{2, 4, 8, 16};
    int two_step_seeds = 3;
  } asymptotics;

  [[nodiscard]] static ExperimentConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  [[nodiscard]] static ExperimentConfig load(const std::filesystem::path& path);
};

// The super-dataset a configuration describes: generated, or loaded from disk.
[[nodiscard]] SuperDataset materialize_data(const ExperimentConfig& cfg);

[[nodiscard]] std::string kernel_name(const KernelSpec& spec);
[[nodiscard]] KernelSpec parse_kernel(std::string_view name);

}  // namespace hyperbo
