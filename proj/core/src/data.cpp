#include "hyperbo/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "hyperbo/error.hpp"
#include "hyperbo/random.hpp"
#include "json_io.hpp"

namespace hyperbo {

using nlohmann::json;

namespace {

std::string base64_encode(const std::string& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::string base64_decode(std::string text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  const auto pad = static_cast<std::size_t>(std::count(text.begin(), text.end(), '='));
  std::replace(text.begin(), text.end(), '=', 'A');
  std::string out(It(text.begin()), It(text.end()));
  out.erase(out.size() - std::min(pad, out.size()));
  return out;
}

std::string doubles_to_b64(const double* data, std::size_t n) {
  std::string bytes(n * sizeof(double), '\0');
  for (std::size_t i = 0; i < n; ++i) {
    auto bits = std::bit_cast<std::uint64_t>(data[i]);
    for (std::size_t b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
  }
  return base64_encode(bytes);
}

std::vector<double> doubles_from_b64(const std::string& text) {
  const std::string bytes = base64_decode(text);
  if (bytes.size() % 8 != 0) throw LoadError("base64 block is not a whole number of float64 values");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

std::string where(const std::string& space, const std::string& sub = {}) {
  return sub.empty() ? "space '" + space + "'" : "space '" + space + "', sub-dataset '" + sub + "'";
}

SuperDataset copy_shell(const SuperDataset& s) {
  SuperDataset out;
  out.provenance = s.provenance;
  out.generating_prior = s.generating_prior;
  return out;
}

Dataset copy_dataset_shell(const Dataset& d) {
  Dataset out = d;
  out.sub_datasets.clear();
  return out;
}

std::size_t train_count(std::size_t n, double fraction, const std::string& what) {
  const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  if (k < 1 || k >= n)
    throw ArgumentError("split: cannot place at least one " + what + " on each side (" + std::to_string(n) +
                        " available, fraction " + std::to_string(fraction) + ")");
  return k;
}

std::vector<std::string> ordered(std::vector<std::string> ids, const SplitSpec& spec, std::uint64_t salt) {
  if (spec.shuffle) {
    Rng rng = make_rng(spec.seed, {salt});
    std::shuffle(ids.begin(), ids.end(), rng);
  }
  return ids;
}

}  // namespace

std::vector<SubDataset> Dataset::members() const {
  std::vector<SubDataset> out;
  out.reserve(sub_datasets.size());
  for (const auto& [id, sd] : sub_datasets) out.push_back(sd);
  return out;
}

std::vector<std::string> Dataset::sub_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, sd] : sub_datasets) out.push_back(id);
  return out;
}

void Dataset::validate() const {
  if (dim < 1) throw ArgumentError(where(space_id) + " has dimension < 1");
  if (sub_datasets.empty()) throw ArgumentError(where(space_id) + " has no sub-datasets");
  for (const auto& [id, sd] : sub_datasets) {
    if (sd.dim() != dim) throw ArgumentError(where(space_id, id) + " does not match the dataset dimension");
    sd.validate();
    if (sd.empty()) throw ArgumentError(where(space_id, id) + " is empty");
  }
}

std::size_t SuperDataset::total_sub_datasets() const {
  std::size_t n = 0;
  for (const auto& [id, d] : datasets) n += d.sub_datasets.size();
  return n;
}

std::vector<std::string> SuperDataset::space_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, d] : datasets) out.push_back(id);
  return out;
}

void SuperDataset::validate() const {
  if (datasets.empty()) throw ArgumentError("super-dataset is empty");
  for (const auto& [id, d] : datasets) {
    if (id != d.space_id) throw ArgumentError("super-dataset key '" + id + "' differs from its space_id");
    d.validate();
  }
}

std::string_view to_string(SplitMode m) noexcept {
  switch (m) {
    case SplitMode::setup_a: return "setup_a";
    case SplitMode::setup_b: return "setup_b";
    case SplitMode::external_predefined: return "external_predefined";
  }
  return "unknown";
}

SplitMode parse_split_mode(std::string_view s) {
  if (s == "setup_a") return SplitMode::setup_a;
  if (s == "setup_b") return SplitMode::setup_b;
  if (s == "external_predefined") return SplitMode::external_predefined;
  throw ConfigError("unknown split mode '" + std::string(s) + "'");
}

std::string synthetic_space_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "space_%03d", index);
  return buf;
}

std::string synthetic_sub_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub_%03d", index);
  return buf;
}

SuperDataset generate_synthetic(const HyperPrior& prior, int n_datasets, int subdatasets_per, int obs_per,
                                std::pair<int, int> dim_range, std::uint64_t seed, const KernelSpec& spec) {
  if (n_datasets < 1 || subdatasets_per < 1 || obs_per < 1)
    throw ArgumentError("generate_synthetic: counts must be >= 1");
  if (dim_range.first < 1 || dim_range.second < dim_range.first)
    throw ArgumentError("generate_synthetic: invalid dimension range");
  SuperDataset out;
  out.provenance = Provenance::synthetic;
  out.generating_prior = prior;
  for (int i = 0; i < n_datasets; ++i) {
    Rng rng = make_rng(seed, {0x5ace, static_cast<std::uint64_t>(i)});
    Dataset d;
    d.space_id = synthetic_space_id(i);
    d.dim = std::uniform_int_distribution<int>(dim_range.first, dim_range.second)(rng);
    const GpParams params = sample_gp_params(prior, d.dim, rng);
    d.generating_params = params;
    for (int j = 0; j < subdatasets_per; ++j) {
      Rng sub_rng = make_rng(seed, {0x5ace, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      SubDataset sd;
      sd.xs.resize(obs_per, d.dim);
      for (Eigen::Index r = 0; r < sd.xs.rows(); ++r)
        for (Eigen::Index c = 0; c < sd.xs.cols(); ++c) sd.xs(r, c) = unit(sub_rng);
      sd.ys = sample_function_values(params, sd.xs, spec, sub_rng, true);
      d.sub_datasets.emplace(synthetic_sub_id(j), std::move(sd));
    }
    out.datasets.emplace(d.space_id, std::move(d));
  }
  return out;
}

SplitViews split(const SuperDataset& super, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) && spec.mode != SplitMode::external_predefined)
    throw ArgumentError("split: train_fraction must lie in (0, 1)");
  SplitViews views{copy_shell(super), copy_shell(super)};
  switch (spec.mode) {
    case SplitMode::setup_a: {
      const auto ids = ordered(super.space_ids(), spec, 0xa);
      const std::size_t k = train_count(ids.size(), spec.train_fraction, "dataset");
      for (std::size_t i = 0; i < ids.size(); ++i)
        (i < k ? views.train : views.test).datasets.emplace(ids[i], super.datasets.at(ids[i]));
      break;
    }
    case SplitMode::setup_b: {
      for (const auto& [space, d] : super.datasets) {
        const auto ids = ordered(d.sub_ids(), spec, hash_id(space));
        const std::size_t k = train_count(ids.size(), spec.train_fraction, "sub-dataset of " + where(space));
        Dataset tr = copy_dataset_shell(d);
        Dataset te = copy_dataset_shell(d);
        for (std::size_t i = 0; i < ids.size(); ++i)
          (i < k ? tr : te).sub_datasets.emplace(ids[i], d.sub_datasets.at(ids[i]));
        views.train.datasets.emplace(space, std::move(tr));
        views.test.datasets.emplace(space, std::move(te));
      }
      break;
    }
    case SplitMode::external_predefined: {
      for (const auto& [space, d] : super.datasets) {
        Dataset tr = copy_dataset_shell(d);
        Dataset te = copy_dataset_shell(d);
        for (const auto& [id, sd] : d.sub_datasets) {
          if (d.predefined_train.contains(id)) tr.sub_datasets.emplace(id, sd);
          else if (d.predefined_test.contains(id)) te.sub_datasets.emplace(id, sd);
        }
        if (!tr.sub_datasets.empty()) views.train.datasets.emplace(space, std::move(tr));
        if (!te.sub_datasets.empty()) views.test.datasets.emplace(space, std::move(te));
      }
      if (views.train.datasets.empty() || views.test.datasets.empty())
        throw ArgumentError("split: predefined split leaves the train or test side empty");
      break;
    }
  }
  return views;
}

SuperDataset parse_external_meta(std::string_view json_text, std::optional<std::string_view> split_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw LoadError(std::string("malformed JSON in meta-dataset: ") + e.what());
  }
  if (!root.is_object() || root.empty()) throw LoadError("meta-dataset must be a nonempty object of search spaces");

  SuperDataset out;
  out.provenance = Provenance::external;
  for (const auto& [space, subs] : root.items()) {
    if (!subs.is_object() || subs.empty()) throw LoadError(where(space) + " must map sub-dataset ids to records");
    Dataset d;
    d.space_id = space;
    for (const auto& [sub, rec] : subs.items()) {
      if (!rec.is_object()) throw LoadError(where(space, sub) + " is not an object");
      if (!rec.contains("X")) throw LoadError(where(space, sub) + " is missing the \"X\" key");
      if (!rec.contains("y")) throw LoadError(where(space, sub) + " is missing the \"y\" key");
      const json& xj = rec.at("X");
      const json& yj = rec.at("y");
      if (!xj.is_array() || xj.empty() || !yj.is_array())
        throw LoadError(where(space, sub) + " needs a nonempty \"X\" array and a \"y\" array");
      const std::size_t rows = xj.size();
      std::size_t cols = 0;
      std::vector<double> flat;
      for (std::size_t r = 0; r < rows; ++r) {
        const json& row = xj[r];
        if (!row.is_array() || row.empty()) throw LoadError(where(space, sub) + " has a non-vector row in \"X\"");
        if (r == 0) cols = row.size();
        if (row.size() != cols)
          throw LoadError(where(space, sub) + " has ragged \"X\" (row " + std::to_string(r) + " has " +
                          std::to_string(row.size()) + " entries, expected " + std::to_string(cols) + ")");
        for (const auto& v : row) {
          if (!v.is_number()) throw LoadError(where(space, sub) + " has a non-numeric entry in \"X\"");
          flat.push_back(v.get<double>());
        }
      }
      std::vector<double> ys;
      for (const auto& v : yj) {
        if (v.is_array() && v.size() == 1 && v[0].is_number()) ys.push_back(v[0].get<double>());
        else if (v.is_number()) ys.push_back(v.get<double>());
        else throw LoadError(where(space, sub) + " has a malformed \"y\" entry");
      }
      if (ys.size() != rows)
        throw LoadError(where(space, sub) + " has " + std::to_string(rows) + " inputs but " +
                        std::to_string(ys.size()) + " outputs");
      if (d.dim == 0) d.dim = static_cast<Eigen::Index>(cols);
      if (static_cast<Eigen::Index>(cols) != d.dim)
        throw LoadError(where(space, sub) + " has dimension " + std::to_string(cols) + " but the space has " +
                        std::to_string(d.dim));
      SubDataset sd;
      sd.xs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          flat.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      sd.ys = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
      if (!sd.xs.allFinite() || !sd.ys.allFinite()) throw LoadError(where(space, sub) + " contains non-finite values");
      d.sub_datasets.emplace(sub, std::move(sd));
    }
    // Min-max normalization over the space's pooled inputs.
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(d.dim, std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = -lo;
    for (const auto& [id, sd] : d.sub_datasets) {
      lo = lo.cwiseMin(sd.xs.colwise().minCoeff().transpose());
      hi = hi.cwiseMax(sd.xs.colwise().maxCoeff().transpose());
    }
    d.input_offset = lo;
    d.input_scale = (hi - lo).unaryExpr([](double s) { return s > 0.0 ? s : 1.0; });
    for (auto& [id, sd] : d.sub_datasets) {
      sd.xs.rowwise() -= d.input_offset.transpose();
      sd.xs = sd.xs * d.input_scale.cwiseInverse().asDiagonal();
    }
    out.datasets.emplace(space, std::move(d));
  }

  if (split_text) {
    json sp;
    try {
      sp = json::parse(*split_text);
    } catch (const json::parse_error& e) {
      throw LoadError(std::string("malformed JSON in split file: ") + e.what());
    }
    if (!sp.is_object()) throw LoadError("split file must be an object keyed by space id");
    for (const auto& [space, parts] : sp.items()) {
      auto it = out.datasets.find(space);
      if (it == out.datasets.end()) throw LoadError("split file names unknown " + where(space));
      for (const char* side : {"train", "test"}) {
        if (!parts.contains(side)) continue;
        for (const auto& idj : parts.at(side)) {
          const std::string id = idj.is_string() ? idj.get<std::string>() : idj.dump();
          if (!it->second.sub_datasets.contains(id)) throw LoadError("split file names unknown " + where(space, id));
          (std::string_view(side) == "train" ? it->second.predefined_train : it->second.predefined_test).insert(id);
        }
      }
    }
  }
  return out;
}

SuperDataset load_external_meta(const std::filesystem::path& path,
                                const std::optional<std::filesystem::path>& split_path) {
  const std::string text = read_text_file(path);
  if (split_path) {
    const std::string split_text = read_text_file(*split_path);
    return parse_external_meta(text, split_text);
  }
  return parse_external_meta(text);
}

SubDataset subsample_sub_dataset(const SubDataset& sd, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("subsample_sub_dataset: n must be >= 1");
  if (n >= sd.size()) return sd;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(sd.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng = make_rng(seed, {0x5b5});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  SubDataset out{Eigen::MatrixXd(n, sd.dim()), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.xs.row(i) = sd.xs.row(idx[static_cast<std::size_t>(i)]);
    out.ys[i] = sd.ys[idx[static_cast<std::size_t>(i)]];
  }
  return out;
}

std::string serialize_native(const SuperDataset& super, bool plain) {
  json root;
  root["format"] = "hyperbo-superdataset";
  root["version"] = 1;
  root["provenance"] = super.provenance == Provenance::synthetic ? "synthetic" : "external";
  root["generating_prior"] =
      super.generating_prior ? detail::hyper_prior_to_json_value(*super.generating_prior) : json(nullptr);
  json datasets = json::array();
  for (const auto& [space, d] : super.datasets) {
    json dj;
    dj["space_id"] = d.space_id;
    dj["dim"] = d.dim;
    dj["generating_params"] = d.generating_params ? detail::gp_params_to_json(*d.generating_params) : json(nullptr);
    dj["input_offset"] = detail::vector_to_json(d.input_offset);
    dj["input_scale"] = detail::vector_to_json(d.input_scale);
    dj["train"] = d.predefined_train;
    dj["test"] = d.predefined_test;
    json subs = json::array();
    for (const auto& [id, sd] : d.sub_datasets) {
      json sj;
      sj["sub_id"] = id;
      sj["rows"] = sd.size();
      // Row-major X.
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = sd.xs;
      if (plain) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < xr.rows(); ++r)
          rows.push_back(std::vector<double>(xr.row(r).data(), xr.row(r).data() + xr.cols()));
        sj["X"] = std::move(rows);
        sj["y"] = detail::vector_to_json(sd.ys);
      } else {
        sj["X_b64"] = doubles_to_b64(xr.data(), static_cast<std::size_t>(xr.size()));
        sj["y_b64"] = doubles_to_b64(sd.ys.data(), static_cast<std::size_t>(sd.ys.size()));
      }
      subs.push_back(std::move(sj));
    }
    dj["sub_datasets"] = std::move(subs);
    datasets.push_back(std::move(dj));
  }
  root["datasets"] = std::move(datasets);
  return root.dump(1) + "\n";
}

SuperDataset parse_native(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError(std::string("malformed native super-dataset JSON: ") + e.what());
  }
  try {
    if (root.value("format", "") != "hyperbo-superdataset") throw LoadError("not a native super-dataset document");
    SuperDataset out;
    out.provenance = root.at("provenance") == "synthetic" ? Provenance::synthetic : Provenance::external;
    if (!root.at("generating_prior").is_null())
      out.generating_prior = detail::hyper_prior_from_json_value(root.at("generating_prior"));
    for (const auto& dj : root.at("datasets")) {
      Dataset d;
      d.space_id = dj.at("space_id").get<std::string>();
      d.dim = dj.at("dim").get<Eigen::Index>();
      if (!dj.at("generating_params").is_null()) d.generating_params = detail::gp_params_from_json(dj.at("generating_params"));
      d.input_offset = detail::vector_from_json(dj.at("input_offset"));
      d.input_scale = detail::vector_from_json(dj.at("input_scale"));
      d.predefined_train = dj.at("train").get<std::set<std::string>>();
      d.predefined_test = dj.at("test").get<std::set<std::string>>();
      for (const auto& sj : dj.at("sub_datasets")) {
        const std::string id = sj.at("sub_id").get<std::string>();
        const auto rows = sj.at("rows").get<Eigen::Index>();
        std::vector<double> xs;
        std::vector<double> ys;
        if (sj.contains("X_b64")) {
          xs = doubles_from_b64(sj.at("X_b64").get<std::string>());
          ys = doubles_from_b64(sj.at("y_b64").get<std::string>());
        } else {
          for (const auto& row : sj.at("X"))
            for (const auto& v : row) xs.push_back(v.get<double>());
          ys = sj.at("y").get<std::vector<double>>();
        }
        if (static_cast<Eigen::Index>(ys.size()) != rows ||
            static_cast<Eigen::Index>(xs.size()) != rows * d.dim)
          throw LoadError(where(d.space_id, id) + " has inconsistent block sizes");
        SubDataset sd;
        sd.xs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), rows, d.dim);
        sd.ys = Eigen::Map<const Eigen::VectorXd>(ys.data(), rows);
        d.sub_datasets.emplace(id, std::move(sd));
      }
      out.datasets.emplace(d.space_id, std::move(d));
    }
    out.validate();
    return out;
  } catch (const json::exception& e) {
    throw LoadError(std::string("invalid native super-dataset: ") + e.what());
  } catch (const ArgumentError& e) {
    throw LoadError(std::string("invalid native super-dataset: ") + e.what());
  }
}

void save_native(const SuperDataset& super, const std::filesystem::path& path, bool plain) {
  write_text_file(path, serialize_native(super, plain));
}

SuperDataset load_native(const std::filesystem::path& path) { return parse_native(read_text_file(path)); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace hyperbo
