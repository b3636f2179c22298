#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "hyperbo/data.hpp"
#include "hyperbo/error.hpp"

using namespace hyperbo;

namespace {

const std::filesystem::path kFixtures = HYPERBO_FIXTURE_DIR;

SuperDataset small(std::uint64_t seed = 1) {
  return generate_synthetic(synthetic_ground_truth_prior(), 5, 4, 12, {1, 3}, seed, {});
}

std::string one_record(const std::string& body) { return R"({"s": {"t": )" + body + "}}"; }

}  // namespace

TEST_CASE("synthetic generation shapes") {
  const SuperDataset tiny = generate_synthetic(synthetic_ground_truth_prior(), 1, 1, 1, {1, 1}, 0, {});
  REQUIRE(tiny.datasets.size() == 1);
  const Dataset& d = tiny.datasets.begin()->second;
  CHECK(d.dim == 1);
  CHECK(d.sub_datasets.size() == 1);
  CHECK(d.sub_datasets.begin()->second.size() == 1);
  CHECK(d.generating_params.has_value());

  const SuperDataset full_scale = generate_synthetic(synthetic_ground_truth_prior(), 20, 10, 300, {2, 5}, 0, {});
  CHECK(full_scale.datasets.size() == 20);
  CHECK(full_scale.total_sub_datasets() == 200);
  std::set<Eigen::Index> dims;
  for (const auto& [id, ds] : full_scale.datasets) {
    dims.insert(ds.dim);
    CHECK(ds.generating_params->dim() == ds.dim);
    for (const auto& [sid, sd] : ds.sub_datasets) {
      CHECK(sd.size() == 300);
      CHECK(sd.dim() == ds.dim);
      CHECK(sd.xs.minCoeff() >= 0.0);
      CHECK(sd.xs.maxCoeff() <= 1.0);
    }
  }
  CHECK(*dims.begin() >= 2);
  CHECK(*dims.rbegin() <= 5);
  CHECK(dims.size() >= 3);
  CHECK_THROWS_AS((void)generate_synthetic(synthetic_ground_truth_prior(), 0, 1, 1, {1, 1}, 0, {}), ArgumentError);
  CHECK_THROWS_AS((void)generate_synthetic(synthetic_ground_truth_prior(), 1, 1, 1, {3, 2}, 0, {}), ArgumentError);
}

TEST_CASE("synthetic outputs have the generating scale") {
  // Sample variance of a GP draw is bounded by the marginal variance and
  // rarely far below it on the unit cube.
  const SuperDataset s = generate_synthetic(synthetic_ground_truth_prior(), 30, 3, 100, {1, 2}, 4, {});
  double ratio_sum = 0.0;
  for (const auto& [id, d] : s.datasets) {
    double var = 0.0;
    for (const auto& [sid, sd] : d.sub_datasets) {
      const double m = sd.ys.mean();
      var += (sd.ys.array() - m).square().sum() / static_cast<double>(sd.size() - 1);
    }
    var /= static_cast<double>(d.sub_datasets.size());
    ratio_sum += var / (d.generating_params->signal_variance + d.generating_params->noise_variance);
  }
  const double mean_ratio = ratio_sum / 30.0;
  CHECK(mean_ratio > 0.1);
  CHECK(mean_ratio < 1.5);
}

TEST_CASE("native serialization is byte stable") {
  const SuperDataset a = small(9);
  const SuperDataset b = small(9);
  const std::string text = serialize_native(a);
  CHECK(text == serialize_native(b));
  CHECK(text != serialize_native(small(10)));
  CHECK(serialize_native(parse_native(text)) == text);
  const std::string plain = serialize_native(a, true);
  CHECK(serialize_native(parse_native(plain)) == text);

  const auto dir = std::filesystem::temp_directory_path() / "hyperbo_test_data";
  std::filesystem::create_directories(dir);
  save_native(a, dir / "a.json");
  CHECK(read_text_file(dir / "a.json") == text);
  const SuperDataset back = load_native(dir / "a.json");
  for (const auto& [id, d] : a.datasets) {
    const Dataset& e = back.datasets.at(id);
    CHECK(e.dim == d.dim);
    CHECK(e.generating_params->lengthscales == d.generating_params->lengthscales);
    for (const auto& [sid, sd] : d.sub_datasets) {
      CHECK(e.sub_datasets.at(sid).xs == sd.xs);
      CHECK(e.sub_datasets.at(sid).ys == sd.ys);
    }
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS((void)parse_native("{\"format\": \"other\"}"), LoadError);
  CHECK_THROWS_AS((void)load_native("/nonexistent/file.json"), LoadError);
}

TEST_CASE("setup_a split partitions spaces") {
  const SuperDataset s = generate_synthetic(synthetic_ground_truth_prior(), 20, 2, 3, {1, 1}, 0, {});
  const SplitViews v = split(s, {SplitMode::setup_a, 0.8});
  CHECK(v.train.datasets.size() == 16);
  CHECK(v.test.datasets.size() == 4);
  for (const auto& [id, d] : v.test.datasets) CHECK(!v.train.datasets.contains(id));
  std::set<std::string> all;
  for (const auto& [id, d] : v.train.datasets) all.insert(id);
  for (const auto& [id, d] : v.test.datasets) all.insert(id);
  CHECK(all.size() == 20);
  CHECK(v.train.generating_prior.has_value());

  SplitSpec shuffled{SplitMode::setup_a, 0.8, 5, true};
  const SplitViews v2 = split(s, shuffled);
  CHECK(v2.train.datasets.size() == 16);
  CHECK(split(s, shuffled).test.space_ids() == v2.test.space_ids());

  CHECK_THROWS_AS((void)split(s, {SplitMode::setup_a, 0.0}), ArgumentError);
  CHECK_THROWS_AS((void)split(s, {SplitMode::setup_a, 1.0}), ArgumentError);
  CHECK_THROWS_AS((void)split(s, {SplitMode::setup_a, 0.01}), ArgumentError);
}

TEST_CASE("setup_b split partitions sub-datasets") {
  const SuperDataset s = generate_synthetic(synthetic_ground_truth_prior(), 3, 10, 3, {1, 1}, 0, {});
  const SplitViews v = split(s, {SplitMode::setup_b, 0.8});
  REQUIRE(v.train.datasets.size() == 3);
  REQUIRE(v.test.datasets.size() == 3);
  for (const auto& [id, d] : s.datasets) {
    const Dataset& tr = v.train.datasets.at(id);
    const Dataset& te = v.test.datasets.at(id);
    CHECK(tr.sub_datasets.size() == 8);
    CHECK(te.sub_datasets.size() == 2);
    for (const auto& sid : te.sub_ids()) CHECK(!tr.sub_datasets.contains(sid));
    CHECK(tr.generating_params->lengthscales == d.generating_params->lengthscales);
  }
}

TEST_CASE("external meta-dataset fixture") {
  const SuperDataset s = load_external_meta(kFixtures / "hpob_mini.json", kFixtures / "hpob_mini_split.json");
  CHECK(s.provenance == Provenance::external);
  CHECK(!s.generating_prior.has_value());
  CHECK(s.space_ids() == std::vector<std::string>{"4796", "5527", "5636"});
  for (const auto& [id, d] : s.datasets) {
    CHECK(d.sub_datasets.size() == 4);
    CHECK(d.predefined_train.size() == 2);
    CHECK(d.predefined_test.size() == 2);
    double lo = 1.0, hi = 0.0;
    for (const auto& [sid, sd] : d.sub_datasets) {
      lo = std::min(lo, sd.xs.minCoeff());
      hi = std::max(hi, sd.xs.maxCoeff());
    }
    CHECK(lo == doctest::Approx(0.0));
    CHECK(hi == doctest::Approx(1.0));
  }
  CHECK(s.datasets.at("5527").dim == 3);

  const SplitViews v = split(s, {SplitMode::external_predefined});
  CHECK(v.train.total_sub_datasets() == 6);
  CHECK(v.test.total_sub_datasets() == 6);

  // Round trip through the native format.
  const SuperDataset back = parse_native(serialize_native(s));
  CHECK(back.provenance == Provenance::external);
  CHECK(back.datasets.at("4796").input_scale == s.datasets.at("4796").input_scale);
  CHECK(serialize_native(back) == serialize_native(s));
}

TEST_CASE("external parsing accepts both y layouts and normalizes inputs") {
  const SuperDataset flat = parse_external_meta(one_record(R"({"X": [[1, 10], [3, 30]], "y": [0.5, 0.7]})"));
  const SuperDataset nested = parse_external_meta(one_record(R"({"X": [[1, 10], [3, 30]], "y": [[0.5], [0.7]]})"));
  const SubDataset& a = flat.datasets.at("s").sub_datasets.at("t");
  const SubDataset& b = nested.datasets.at("s").sub_datasets.at("t");
  CHECK(a.ys == b.ys);
  CHECK(a.xs == b.xs);
  CHECK(a.xs(0, 0) == 0.0);
  CHECK(a.xs(1, 1) == 1.0);

  // A constant column keeps unit scale.
  const SuperDataset c = parse_external_meta(one_record(R"({"X": [[2], [2]], "y": [1, 2]})"));
  CHECK(c.datasets.at("s").sub_datasets.at("t").xs(0, 0) == 0.0);
}

TEST_CASE("external parsing rejects malformed input") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    try {
      (void)parse_external_meta(text);
    } catch (const LoadError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_with("{not json", "malformed JSON"));
  CHECK(fails_with(one_record(R"({"y": [1]})"), "sub-dataset 't' is missing the \"X\" key"));
  CHECK(fails_with(one_record(R"({"X": [[1]]})"), "missing the \"y\" key"));
  CHECK(fails_with(one_record(R"({"X": [[1, 2], [3]], "y": [1, 2]})"), "ragged"));
  CHECK(fails_with(one_record(R"({"X": [[1], [2]], "y": [1]})"), "2 inputs but 1 outputs"));
  CHECK(fails_with(one_record(R"({"X": [["a"]], "y": [1]})"), "non-numeric"));
  CHECK(fails_with(R"({"s": {"t": {"X": [[1]], "y": [1]}, "u": {"X": [[1, 2]], "y": [1]}}})", "dimension"));
  CHECK(fails_with("[]", "nonempty object"));
  CHECK_THROWS_AS((void)parse_external_meta(one_record(R"({"X": [[1]], "y": [1]})"), std::string_view(R"({"zz": {}})")),
                  LoadError);
}

TEST_CASE("subsample_sub_dataset") {
  SubDataset sd{Eigen::MatrixXd(6, 1), Eigen::VectorXd(6)};
  for (int i = 0; i < 6; ++i) {
    sd.xs(i, 0) = i;
    sd.ys[i] = 10.0 * i;
  }
  const SubDataset all = subsample_sub_dataset(sd, 100, 0);
  CHECK(all.ys == sd.ys);
  const SubDataset three = subsample_sub_dataset(sd, 3, 7);
  CHECK(three.size() == 3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(three.ys[i] == 10.0 * three.xs(i, 0));
    if (i > 0) CHECK(three.xs(i, 0) > three.xs(i - 1, 0));
  }
  CHECK(subsample_sub_dataset(sd, 3, 7).ys == three.ys);
  CHECK(subsample_sub_dataset(sd, 1, 2).size() == 1);
  CHECK_THROWS_AS((void)subsample_sub_dataset(sd, 0, 0), ArgumentError);
}

TEST_CASE("validation catches inconsistent datasets") {
  SuperDataset s = small();
  CHECK_NOTHROW(s.validate());
  Dataset& d = s.datasets.begin()->second;
  d.sub_datasets.begin()->second.xs.conservativeResize(Eigen::NoChange, d.dim + 1);
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  CHECK(parse_split_mode("setup_b") == SplitMode::setup_b);
  CHECK_THROWS_AS((void)parse_split_mode("setup_c"), ConfigError);
}
