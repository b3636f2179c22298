#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hyperbo/gp.hpp"
#include "hyperbo/prior.hpp"

namespace hyperbo {

// All observations within one search space.
struct Dataset {
  std::string space_id;
  Eigen::Index dim = 0;
  std::map<std::string, SubDataset> sub_datasets;

  // Parameters the synthetic generator drew for this space.
  std::optional<GpParams> generating_params;
  // Per-dimension min-max normalization applied at load time (x - offset) / scale.
  Eigen::VectorXd input_offset;
  Eigen::VectorXd input_scale;
  // Predefined membership from an external split file.
  std::set<std::string> predefined_train;
  std::set<std::string> predefined_test;

  [[nodiscard]] std::vector<SubDataset> members() const;
  [[nodiscard]] std::vector<std::string> sub_ids() const;
  void validate() const;
};

enum class Provenance { synthetic, external };

struct SuperDataset {
  std::map<std::string, Dataset> datasets;
  Provenance provenance = Provenance::synthetic;
  std::optional<HyperPrior> generating_prior;

  [[nodiscard]] std::size_t total_sub_datasets() const;
  [[nodiscard]] std::vector<std::string> space_ids() const;
  void validate() const;
};

enum class SplitMode { setup_a, setup_b, external_predefined };

[[nodiscard]] std::string_view to_string(SplitMode m) noexcept;
[[nodiscard]] SplitMode parse_split_mode(std::string_view s);

// Units are taken in lexicographic id order; the first round(fraction * n)
// go to training. With shuffle set, the order is permuted by seed first.
struct SplitSpec {
  SplitMode mode = SplitMode::setup_a;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool shuffle = false;
};

struct SplitViews {
  SuperDataset train;
  SuperDataset test;
};

// Zero-padded ids so lexicographic order matches generation order.
[[nodiscard]] std::string synthetic_space_id(int index);
[[nodiscard]] std::string synthetic_sub_id(int index);

[[nodiscard]] SuperDataset generate_synthetic(const HyperPrior& prior, int n_datasets, int subdatasets_per,
                                              int obs_per, std::pair<int, int> dim_range, std::uint64_t seed,
                                              const KernelSpec& spec);

[[nodiscard]] SplitViews split(const SuperDataset& super, const SplitSpec& spec);

// Nested JSON: space_id -> sub_id -> {"X": [[...], ...], "y": [...] | [[...], ...]}.
// The optional split file maps space_id -> {"train": [...], "test": [...]}.
[[nodiscard]] SuperDataset load_external_meta(const std::filesystem::path& path,
                                              const std::optional<std::filesystem::path>& split_path = std::nullopt);
[[nodiscard]] SuperDataset parse_external_meta(std::string_view json_text,
                                               std::optional<std::string_view> split_text = std::nullopt);

// Uniform selection of min(n, L) rows without replacement, original order kept.
[[nodiscard]] SubDataset subsample_sub_dataset(const SubDataset& sd, Eigen::Index n, std::uint64_t seed);

// Native format: one JSON document; X/y blocks are base64 little-endian
// float64 unless plain is set.
[[nodiscard]] std::string serialize_native(const SuperDataset& super, bool plain = false);
[[nodiscard]] SuperDataset parse_native(std::string_view text);
void save_native(const SuperDataset& super, const std::filesystem::path& path, bool plain = false);
[[nodiscard]] SuperDataset load_native(const std::filesystem::path& path);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace hyperbo
