#include "hyperbo/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "hyperbo/error.hpp"
#include "hyperbo/parallel.hpp"
#include "hyperbo/random.hpp"
#include "json_io.hpp"

namespace hyperbo {

using detail::json;

namespace {

constexpr std::array<std::pair<MethodKind, std::string_view>, 8> kMethodNames{{
    {MethodKind::random, "random"},
    {MethodKind::non_informative, "non_informative"},
    {MethodKind::hand_specified, "hand_specified"},
    {MethodKind::ground_truth, "ground_truth"},
    {MethodKind::hyperbo, "hyperbo"},
    {MethodKind::hyperbo_plus, "hyperbo_plus"},
    {MethodKind::x_variant, "x_variant"},
    {MethodKind::z_variant, "z_variant"},
}};

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double mean_of(const std::vector<double>& v) {
  return v.empty() ? nan() : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::vector<SubDataset> nll_members(const Dataset& d, Eigen::Index subsample, std::uint64_t seed) {
  std::vector<SubDataset> sds;
  for (const auto& [id, sd] : d.sub_datasets)
    sds.push_back(subsample_sub_dataset(sd, subsample, derive_seed(seed, {hash_id(d.space_id), hash_id(id)})));
  return sds;
}

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown key '" + k + "' in " + std::string(where));
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

std::string_view to_string(MethodKind m) noexcept {
  for (const auto& [k, name] : kMethodNames)
    if (k == m) return name;
  return "unknown";
}

MethodKind parse_method_kind(std::string_view s) {
  for (const auto& [k, name] : kMethodNames)
    if (name == s) return k;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

AcquisitionSpec parse_acquisition(std::string_view name, double zeta, double beta) {
  if (name == "pi") return ProbabilityOfImprovement{zeta};
  if (name == "ei") return ExpectedImprovement{};
  if (name == "ucb") return UpperConfidenceBound{beta};
  throw ConfigError("unknown acquisition '" + std::string(name) + "' (expected pi, ei or ucb)");
}

std::string kernel_name(const KernelSpec& spec) {
  switch (spec.smoothness) {
    case Smoothness::half: return "half";
    case Smoothness::three_halves: return "three_halves";
    case Smoothness::five_halves: return "five_halves";
  }
  return "three_halves";
}

KernelSpec parse_kernel(std::string_view name) {
  if (name == "half") return {Smoothness::half};
  if (name == "three_halves") return {Smoothness::three_halves};
  if (name == "five_halves") return {Smoothness::five_halves};
  throw ConfigError("unknown kernel smoothness '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// PriorBuilder

PriorBuilder::PriorBuilder(const SuperDataset& train, FitConfig fit, KernelSpec spec, int threads,
                           std::shared_ptr<FitCache> cache)
    : train_(train), fit_(fit), spec_(spec), threads_(threads),
      cache_(cache ? std::move(cache) : std::make_shared<FitCache>()) {
  fit_.validate();
}

void PriorBuilder::check_valid(MethodKind m, const std::string& target_space) const {
  switch (m) {
    case MethodKind::ground_truth:
      if (train_.provenance != Provenance::synthetic || !train_.generating_prior)
        throw ConfigError("ground_truth needs synthetic data with a known generating prior");
      break;
    case MethodKind::hyperbo:
      if (!train_.datasets.contains(target_space))
        throw ConfigError("hyperbo needs training sub-datasets from target space '" + target_space +
                          "'; use a per-space split");
      break;
    case MethodKind::hyperbo_plus:
    case MethodKind::x_variant:
      if (train_.datasets.size() < 2) throw ConfigError(std::string(to_string(m)) + " needs >= 2 training datasets");
      break;
    case MethodKind::z_variant: {
      const std::size_t left = train_.datasets.size() - (train_.datasets.contains(target_space) ? 1 : 0);
      if (left < 2) throw ConfigError("z_variant needs >= 2 training datasets besides '" + target_space + "'");
      break;
    }
    default: break;
  }
}

const PretrainResult& PriorBuilder::full_pretrain() {
  if (!full_) full_ = pretrain_two_step(train_, fit_, spec_, threads_, cache_.get());
  return *full_;
}

const PretrainResult& PriorBuilder::pretrain_excluding(const std::string& space) {
  if (auto it = excluding_.find(space); it != excluding_.end()) return it->second;
  std::vector<SpaceFit> fits;
  for (const auto& f : full_pretrain().per_space_fits)
    if (f.space_id != space) fits.push_back(f);
  if (fits.size() < 2) throw InsufficientDataError("pre-training without '" + space + "' leaves < 2 datasets");
  return excluding_.emplace(space, assemble_pretrain(std::move(fits))).first->second;
}

BoModel PriorBuilder::build(MethodKind m, const std::string& target_space) {
  check_valid(m, target_space);
  switch (m) {
    case MethodKind::random: return RandomPolicy{};
    case MethodKind::non_informative: return PriorSource{non_informative_prior()};
    case MethodKind::hand_specified: return PriorSource{hand_specified_prior()};
    case MethodKind::ground_truth: return PriorSource{*train_.generating_prior};
    case MethodKind::hyperbo: {
      SuperDataset one;
      one.provenance = train_.provenance;
      one.datasets.emplace(target_space, train_.datasets.at(target_space));
      return fit_all_spaces(one, fit_, spec_, 1, cache_.get()).front().params;
    }
    case MethodKind::hyperbo_plus: return PriorSource{full_pretrain().hyper_prior};
    case MethodKind::x_variant: return PriorSource{full_pretrain().discrete_prior};
    case MethodKind::z_variant:
      if (!train_.datasets.contains(target_space)) return PriorSource{full_pretrain().hyper_prior};
      return PriorSource{pretrain_excluding(target_space).hyper_prior};
  }
  throw ConfigError("unhandled method");
}

// ---------------------------------------------------------------------------
// Benchmark

const MethodCurve& ExperimentReport::curve(std::string_view method) const {
  for (const auto& c : curves)
    if (c.method == method) return c;
  throw ArgumentError("no curve for method '" + std::string(method) + "'");
}

std::string ExperimentReport::summary_json(int indent) const {
  json methods = json::array();
  for (const auto& c : curves) {
    json per_seed = json::array();
    for (const auto& s : c.per_seed) per_seed.push_back(number_or_null(s.empty() ? nan() : s.back()));
    methods.push_back({{"method", c.method},
                       {"final_regret_mean", number_or_null(c.final_mean())},
                       {"final_regret_std", number_or_null(c.final_std())},
                       {"per_seed_final_regret", per_seed},
                       {"trajectories", c.trajectories},
                       {"failures", c.failures}});
  }
  json failed = json::array();
  json paths = json::array();
  for (const auto& cell : cells) {
    if (!cell.trajectory)
      failed.push_back(
          {{"method", cell.method}, {"seed", cell.seed}, {"space", cell.space}, {"sub", cell.sub}, {"error", cell.error}});
    else if (!cell.csv_path.empty())
      paths.push_back(cell.csv_path.generic_string());
  }
  const json root{{"methods", methods},
                  {"failed_cells", failed},
                  {"trajectory_files", paths},
                  {"regret_weighting", "uniform over test sub-datasets"},
                  {"runtime_seconds", runtime_seconds}};
  return root.dump(indent);
}

ExperimentReport run_benchmark(const SplitViews& views, const std::vector<MethodSpec>& methods, PriorBuilder& priors,
                               const BenchmarkOptions& options, const KernelSpec& spec) {
  if (methods.empty()) throw ConfigError("run_benchmark: no methods given");
  if (options.seeds.empty()) throw ConfigError("run_benchmark: no seeds given");
  options.bo.validate();
  const auto start = std::chrono::steady_clock::now();

  struct Unit {
    std::string space;
    std::string sub;
  };
  std::vector<Unit> units;
  std::vector<std::string> spaces;
  for (const auto& [space, d] : views.test.datasets) {
    if (options.test_spaces &&
        std::find(options.test_spaces->begin(), options.test_spaces->end(), space) == options.test_spaces->end())
      continue;
    spaces.push_back(space);
    int taken = 0;
    for (const auto& [sub, sd] : d.sub_datasets) {
      if (options.max_test_sub_datasets && taken >= *options.max_test_sub_datasets) break;
      units.push_back({space, sub});
      ++taken;
    }
  }
  if (units.empty()) throw ConfigError("run_benchmark: no test sub-datasets selected");

  // Models per (method, space); invalid pairings are fatal, other failures
  // are recorded against every affected cell.
  std::vector<std::map<std::string, BoModel>> models(methods.size());
  std::vector<std::map<std::string, std::string>> model_errors(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (const auto& space : spaces) priors.check_valid(methods[m].kind, space);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (const auto& space : spaces) {
      try {
        models[m].emplace(space, priors.build(methods[m].kind, space));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        model_errors[m][space] = e.what();
      }
    }
  }

  // Pools and shared initial indices per (seed, unit).
  const std::size_t n_seeds = options.seeds.size();
  std::vector<SubDataset> pools(n_seeds * units.size());
  std::vector<std::vector<Eigen::Index>> inits(pools.size());
  std::vector<std::string> pool_errors(pools.size());
  for (std::size_t s = 0; s < n_seeds; ++s) {
    for (std::size_t u = 0; u < units.size(); ++u) {
      const std::size_t k = s * units.size() + u;
      const auto& sd = views.test.datasets.at(units[u].space).sub_datasets.at(units[u].sub);
      const std::uint64_t cell_seed = derive_seed(options.seeds[s], {hash_id(units[u].space), hash_id(units[u].sub)});
      pools[k] = options.pool_size ? subsample_sub_dataset(sd, *options.pool_size, derive_seed(cell_seed, {0x9001}))
                                   : sd;
      try {
        inits[k] = draw_init_indices(pools[k].size(), options.bo.n_init, cell_seed);
      } catch (const Error& e) {
        pool_errors[k] = e.what();
      }
    }
  }

  const std::size_t n_cells = methods.size() * pools.size();
  std::vector<CellResult> cells(n_cells);
  parallel_for(n_cells, options.threads, [&](std::size_t c) {
    const std::size_t m = c / pools.size();
    const std::size_t k = c % pools.size();
    const std::size_t s = k / units.size();
    const Unit& unit = units[k % units.size()];
    CellResult& cell = cells[c];
    cell.method = methods[m].label();
    cell.seed = options.seeds[s];
    cell.space = unit.space;
    cell.sub = unit.sub;
    if (auto it = model_errors[m].find(unit.space); it != model_errors[m].end()) {
      cell.error = it->second;
      return;
    }
    if (!pool_errors[k].empty()) {
      cell.error = pool_errors[k];
      return;
    }
    BoConfig cfg = options.bo;
    cfg.seed = derive_seed(cell.seed, {hash_id(unit.space), hash_id(unit.sub)});
    Rng rng = make_rng(cell.seed, {hash_id(cell.method), hash_id(unit.space), hash_id(unit.sub)});
    try {
      cell.trajectory = run_bo(methods[m].acquisition, models[m].at(unit.space), pools[k], cfg, rng, spec, inits[k]);
    } catch (const Error& e) {
      cell.error = std::string(e.kind()) + ": " + e.what();
    }
  });

  ExperimentReport report;
  const std::size_t steps = static_cast<std::size_t>(options.bo.n_init + options.bo.budget);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodCurve curve;
    curve.method = methods[m].label();
    curve.mean.assign(steps, 0.0);
    curve.per_seed.assign(n_seeds, std::vector<double>(steps, 0.0));
    std::vector<std::size_t> per_seed_count(n_seeds, 0);
    for (std::size_t k = 0; k < pools.size(); ++k) {
      const CellResult& cell = cells[m * pools.size() + k];
      if (!cell.trajectory) {
        ++curve.failures;
        continue;
      }
      const std::size_t s = k / units.size();
      for (std::size_t t = 0; t < steps; ++t) {
        curve.mean[t] += cell.trajectory->regrets[t];
        curve.per_seed[s][t] += cell.trajectory->regrets[t];
      }
      ++curve.trajectories;
      ++per_seed_count[s];
    }
    for (std::size_t t = 0; t < steps; ++t)
      curve.mean[t] = curve.trajectories ? curve.mean[t] / static_cast<double>(curve.trajectories) : nan();
    curve.std.assign(steps, 0.0);
    for (std::size_t s = 0; s < n_seeds; ++s)
      for (auto& v : curve.per_seed[s]) v = per_seed_count[s] ? v / static_cast<double>(per_seed_count[s]) : nan();
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> col;
      for (std::size_t s = 0; s < n_seeds; ++s)
        if (per_seed_count[s]) col.push_back(curve.per_seed[s][t]);
      curve.std[t] = std_of(col);
    }
    report.curves.push_back(std::move(curve));
  }

  // Deterministic order: method order, then seed, space, sub.
  std::stable_sort(cells.begin(), cells.end(), [&](const CellResult& a, const CellResult& b) {
    auto rank = [&](const std::string& label) {
      for (std::size_t m = 0; m < methods.size(); ++m)
        if (methods[m].label() == label) return m;
      return methods.size();
    };
    return std::tuple(rank(a.method), a.seed, a.space, a.sub) < std::tuple(rank(b.method), b.seed, b.space, b.sub);
  });

  if (!options.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(options.out_dir);
    std::ostringstream long_csv;
    long_csv.precision(17);
    long_csv << "method,seed,space,sub,step,regret\n";
    for (auto& cell : cells) {
      if (!cell.trajectory) continue;
      cell.csv_path = fs::path("trajectories") / cell.method / ("seed_" + std::to_string(cell.seed)) /
                      (cell.space + "__" + cell.sub + ".csv");
      const fs::path full = options.out_dir / cell.csv_path;
      fs::create_directories(full.parent_path());
      write_text_file(full, cell.trajectory->to_csv());
      for (std::size_t t = 0; t < cell.trajectory->regrets.size(); ++t)
        long_csv << cell.method << ',' << cell.seed << ',' << cell.space << ',' << cell.sub << ',' << t + 1 << ','
                 << cell.trajectory->regrets[t] << '\n';
    }
    write_text_file(options.out_dir / "regret_long.csv", long_csv.str());
    std::ostringstream curves_csv;
    curves_csv << "method,step,mean,std\n";
    for (const auto& c : report.curves)
      for (std::size_t t = 0; t < c.mean.size(); ++t)
        curves_csv << c.method << ',' << t + 1 << ',' << format_double(c.mean[t]) << ',' << format_double(c.std[t])
                   << '\n';
    write_text_file(options.out_dir / "curves.csv", curves_csv.str());
  }
  report.cells = std::move(cells);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!options.out_dir.empty()) write_text_file(options.out_dir / "summary.json", report.summary_json());
  return report;
}

// ---------------------------------------------------------------------------
// NLL tables

double weighted_aggregate(const std::vector<std::pair<double, std::size_t>>& per_space) {
  double total = 0.0;
  double weight = 0.0;
  for (const auto& [v, n] : per_space) {
    total += v * static_cast<double>(n);
    weight += static_cast<double>(n);
  }
  return weight > 0.0 ? total / weight : nan();
}

const NllSummary& NllTable::method(std::string_view name) const {
  for (const auto& s : summary)
    if (s.method == name) return s;
  throw ArgumentError("no NLL summary for method '" + std::string(name) + "'");
}

std::string NllTable::rows_csv() const {
  std::ostringstream os;
  os << "method,seed,split,space,sub_datasets,nll\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.seed << ',' << r.side << ',' << r.space << ',' << r.sub_datasets << ','
       << format_double(r.nll) << '\n';
  return os.str();
}

std::string NllTable::summary_json(int indent) const {
  json methods = json::array();
  for (const auto& s : summary)
    methods.push_back({{"method", s.method},
                       {"train_nll_mean", number_or_null(s.train_mean)},
                       {"train_nll_std", number_or_null(s.train_std)},
                       {"test_nll_mean", number_or_null(s.test_mean)},
                       {"test_nll_std", number_or_null(s.test_std)}});
  json failed = json::array();
  for (const auto& r : rows)
    if (!r.error.empty())
      failed.push_back({{"method", r.method}, {"seed", r.seed}, {"split", r.side}, {"space", r.space}, {"error", r.error}});
  return json{{"methods", methods}, {"failed_cells", failed}, {"aggregate", "weighted by sub-dataset count"}}.dump(
      indent);
}

NllTable evaluate_nll(const SplitViews& views, const std::vector<MethodSpec>& methods, PriorBuilder& priors,
                      const NllOptions& options, const KernelSpec& spec) {
  if (methods.empty()) throw ConfigError("evaluate_nll: no methods given");
  if (options.seeds.empty()) throw ConfigError("evaluate_nll: no seeds given");
  if (options.q_samples < 1) throw ConfigError("evaluate_nll: q_samples must be >= 1");
  for (const auto& m : methods)
    if (m.kind == MethodKind::random) throw ConfigError("evaluate_nll: random has no model to score");

  struct Side {
    std::string name;
    const SuperDataset* data;
  };
  std::vector<Side> sides;
  if (options.include_train) sides.push_back({"train", &views.train});
  sides.push_back({"test", &views.test});

  struct Target {
    std::size_t side;
    std::string space;
  };
  std::vector<Target> targets;
  for (std::size_t s = 0; s < sides.size(); ++s)
    for (const auto& [space, d] : sides[s].data->datasets) targets.push_back({s, space});

  for (const auto& m : methods)
    for (const auto& t : targets) priors.check_valid(m.kind, t.space);
  std::vector<std::map<std::string, BoModel>> models(methods.size());
  std::vector<std::map<std::string, std::string>> model_errors(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (const auto& t : targets) {
      if (models[m].contains(t.space) || model_errors[m].contains(t.space)) continue;
      try {
        models[m].emplace(t.space, priors.build(methods[m].kind, t.space));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        model_errors[m][t.space] = e.what();
      }
    }
  }

  const std::size_t per_method = options.seeds.size() * targets.size();
  NllTable table;
  table.rows.resize(methods.size() * per_method);
  parallel_for(table.rows.size(), options.threads, [&](std::size_t c) {
    const std::size_t m = c / per_method;
    const std::size_t seed_idx = (c % per_method) / targets.size();
    const Target& t = targets[c % targets.size()];
    const Dataset& d = sides[t.side].data->datasets.at(t.space);
    NllRow& row = table.rows[c];
    row.method = methods[m].label();
    row.seed = options.seeds[seed_idx];
    row.side = sides[t.side].name;
    row.space = t.space;
    row.sub_datasets = d.sub_datasets.size();
    row.nll = nan();
    if (auto it = model_errors[m].find(t.space); it != model_errors[m].end()) {
      row.error = it->second;
      return;
    }
    const std::uint64_t seed = derive_seed(row.seed, {hash_id(row.side)});
    try {
      const BoModel& model = models[m].at(t.space);
      if (const auto* fixed = std::get_if<GpParams>(&model)) {
        const auto sds = nll_members(d, options.nll_subsample, seed);
        row.nll = dataset_nll(*fixed, sds, spec) / static_cast<double>(sds.size());
      } else {
        row.nll = per_sub_dataset_hierarchical_nll(std::get<PriorSource>(model), d, options.q_samples,
                                                   options.nll_subsample, seed, spec);
      }
    } catch (const Error& e) {
      row.error = std::string(e.kind()) + ": " + e.what();
    }
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    NllSummary s;
    s.method = methods[m].label();
    for (std::size_t side = 0; side < sides.size(); ++side) {
      std::vector<double> per_seed;
      for (std::size_t k = 0; k < options.seeds.size(); ++k) {
        std::vector<std::pair<double, std::size_t>> parts;
        for (std::size_t i = 0; i < targets.size(); ++i) {
          const NllRow& row = table.rows[m * per_method + k * targets.size() + i];
          if (targets[i].side == side && row.error.empty()) parts.emplace_back(row.nll, row.sub_datasets);
        }
        if (!parts.empty()) per_seed.push_back(weighted_aggregate(parts));
      }
      const double mu = mean_of(per_seed);
      const double sd = std_of(per_seed);
      if (sides[side].name == "train") {
        s.train_mean = mu;
        s.train_std = sd;
      } else {
        s.test_mean = mu;
        s.test_std = sd;
      }
    }
    if (!options.include_train) s.train_mean = s.train_std = nan();
    table.summary.push_back(s);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  check_keys(root, "config", {"name", "data", "split", "kernel", "fit", "methods", "acquisition", "bo", "nll", "seeds",
                              "threads", "asymptotics", "description"});
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  ExperimentConfig cfg;
  try {
    read_opt(root, "name", cfg.name);
    read_opt(root, "threads", cfg.threads);

    if (root.contains("data")) {
      const json& data = root.at("data");
      check_keys(data, "data", {"synthetic", "native", "external"});
      if (data.size() != 1) throw ConfigError("data must name exactly one of synthetic, native, external");
      if (data.contains("synthetic")) {
        const json& s = data.at("synthetic");
        check_keys(s, "data.synthetic", {"n_datasets", "subdatasets_per", "obs_per", "dim_min", "dim_max", "seed", "prior"});
        Synthetic syn;
        read_opt(s, "n_datasets", syn.n_datasets);
        read_opt(s, "subdatasets_per", syn.subdatasets_per);
        read_opt(s, "obs_per", syn.obs_per);
        read_opt(s, "dim_min", syn.dim_min);
        read_opt(s, "dim_max", syn.dim_max);
        read_opt(s, "seed", syn.seed);
        if (s.contains("prior")) syn.prior = detail::hyper_prior_from_json_value(s.at("prior"));
        cfg.synthetic = syn;
      } else if (data.contains("native")) {
        cfg.native_path = resolve(data.at("native").get<std::string>());
      } else {
        const json& e = data.at("external");
        check_keys(e, "data.external", {"meta", "split"});
        cfg.external_meta = resolve(e.at("meta").get<std::string>());
        if (e.contains("split") && !e.at("split").is_null()) cfg.external_split = resolve(e.at("split").get<std::string>());
      }
    }

    if (root.contains("split")) {
      const json& s = root.at("split");
      check_keys(s, "split", {"mode", "train_fraction", "seed", "shuffle"});
      if (s.contains("mode")) cfg.split.mode = parse_split_mode(s.at("mode").get<std::string>());
      read_opt(s, "train_fraction", cfg.split.train_fraction);
      read_opt(s, "seed", cfg.split.seed);
      read_opt(s, "shuffle", cfg.split.shuffle);
    }
    if (root.contains("kernel")) cfg.kernel = parse_kernel(root.at("kernel").get<std::string>());

    if (root.contains("fit")) {
      const json& f = root.at("fit");
      check_keys(f, "fit", {"optimizer", "max_iters", "learning_rate", "subsample_per_iter", "restarts", "seed"});
      if (f.contains("optimizer")) {
        const auto name = f.at("optimizer").get<std::string>();
        if (name == "lbfgs") cfg.fit = FitConfig::lbfgs_defaults();
        else if (name == "adam") cfg.fit = FitConfig::adam_defaults();
        else throw ConfigError("unknown optimizer '" + name + "'");
      }
      read_opt(f, "max_iters", cfg.fit.max_iters);
      read_opt(f, "learning_rate", cfg.fit.learning_rate);
      if (f.contains("subsample_per_iter")) {
        if (f.at("subsample_per_iter").is_null()) cfg.fit.subsample_per_iter.reset();
        else cfg.fit.subsample_per_iter = f.at("subsample_per_iter").get<int>();
      }
      read_opt(f, "restarts", cfg.fit.restarts);
      read_opt(f, "seed", cfg.fit.seed);
      cfg.fit.validate();
    }

    AcquisitionSpec acq = ProbabilityOfImprovement{};
    if (root.contains("acquisition")) {
      const json& a = root.at("acquisition");
      check_keys(a, "acquisition", {"kind", "zeta", "beta"});
      double zeta = 0.1;
      double beta = 3.0;
      read_opt(a, "zeta", zeta);
      read_opt(a, "beta", beta);
      acq = parse_acquisition(a.value("kind", std::string("pi")), zeta, beta);
    }
    if (root.contains("methods")) {
      for (const auto& m : root.at("methods")) cfg.methods.push_back({parse_method_kind(m.get<std::string>()), acq});
    }

    if (root.contains("bo")) {
      const json& b = root.at("bo");
      check_keys(b, "bo", {"budget", "n_init", "r_samples", "include_noise_in_acq_variance", "redraw_samples_each_step",
                           "pool_size", "max_test_sub_datasets", "test_spaces"});
      read_opt(b, "budget", cfg.bench.bo.budget);
      read_opt(b, "n_init", cfg.bench.bo.n_init);
      read_opt(b, "r_samples", cfg.bench.bo.r_samples);
      read_opt(b, "include_noise_in_acq_variance", cfg.bench.bo.include_noise_in_acq_variance);
      read_opt(b, "redraw_samples_each_step", cfg.bench.bo.redraw_samples_each_step);
      if (b.contains("pool_size") && !b.at("pool_size").is_null()) cfg.bench.pool_size = b.at("pool_size").get<Eigen::Index>();
      if (b.contains("max_test_sub_datasets") && !b.at("max_test_sub_datasets").is_null())
        cfg.bench.max_test_sub_datasets = b.at("max_test_sub_datasets").get<int>();
      if (b.contains("test_spaces") && !b.at("test_spaces").is_null())
        cfg.bench.test_spaces = b.at("test_spaces").get<std::vector<std::string>>();
      cfg.bench.bo.validate();
    }

    if (root.contains("nll")) {
      const json& n = root.at("nll");
      check_keys(n, "nll", {"q_samples", "subsample", "include_train"});
      read_opt(n, "q_samples", cfg.nll.q_samples);
      read_opt(n, "subsample", cfg.nll.nll_subsample);
      read_opt(n, "include_train", cfg.nll.include_train);
    }

    if (root.contains("seeds")) {
      cfg.bench.seeds = root.at("seeds").get<std::vector<std::uint64_t>>();
      cfg.nll.seeds = cfg.bench.seeds;
    }

    if (root.contains("asymptotics")) {
      const json& a = root.at("asymptotics");
      check_keys(a, "asymptotics", {"single_grid", "single_obs_per", "single_seeds", "single_generating",
                                    "two_step_grid", "two_step_seeds"});
      read_opt(a, "single_grid", cfg.asymptotics.single_grid);
      read_opt(a, "single_obs_per", cfg.asymptotics.single_obs_per);
      read_opt(a, "single_seeds", cfg.asymptotics.single_seeds);
      if (a.contains("single_generating")) cfg.asymptotics.single_generating = detail::gp_params_from_json(a.at("single_generating"));
      read_opt(a, "two_step_grid", cfg.asymptotics.two_step_grid);
      read_opt(a, "two_step_seeds", cfg.asymptotics.two_step_seeds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  cfg.bench.threads = cfg.threads;
  cfg.nll.threads = cfg.threads;
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return from_json(text, path.parent_path());
}

SuperDataset materialize_data(const ExperimentConfig& cfg) {
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    return generate_synthetic(s.prior, s.n_datasets, s.subdatasets_per, s.obs_per, {s.dim_min, s.dim_max}, s.seed,
                              cfg.kernel);
  }
  if (cfg.native_path) return load_native(*cfg.native_path);
  if (cfg.external_meta) return load_external_meta(*cfg.external_meta, cfg.external_split);
  throw ConfigError("config has no data section");
}

}  // namespace hyperbo
